"""Regenerate tests/golden/fixture_report.json from configs/fixture.cfg.

Only run this after an intentional behaviour change; the golden file exists to
catch unintended drift anywhere upstream of the report.
"""
from pathlib import Path

from oga.harness import emit_report, load_config, run_experiment

ROOT = Path(__file__).resolve().parents[1]

if __name__ == "__main__":
    cfg = load_config(ROOT / "configs" / "fixture.cfg")
    report = run_experiment(cfg)
    out = emit_report(report, ROOT / "tests" / "golden" / "fixture_report.json", "json")
    print("wrote", out)
