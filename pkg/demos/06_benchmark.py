"""Running a benchmark from a TOML config.

The same entry point backs ``cubicqn run`` and ``cubicqn compare``. Each
method writes a per-iteration CSV; the run also writes a summary and
gap-versus-iteration and gap-versus-HVP plots.
"""

import tempfile
from pathlib import Path

from cubicqn.bench import load_config, run_experiment

config = load_config(Path(__file__).resolve().parent.parent / "configs" / "fixture.toml")
with tempfile.TemporaryDirectory() as tmp:
    summary = run_experiment(config.with_overrides(out_dir=tmp, max_iters=100))
    print(summary.table())
    print("files:", sorted(p.name for p in Path(tmp).iterdir()))
    for name in ("exact-crn", "cubic-lbfgs", "gd"):
        print(f"{name}: gap 1e-2 reached at t={summary.iterations_to(name, 1e-2)}")
