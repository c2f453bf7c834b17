"""Regenerate the shipped synthetic sweep datasets from the shipped configs."""
import shutil
import tempfile
from pathlib import Path

from casimir_metrology.cli import main

DATA = Path(__file__).resolve().parents[1] / "src" / "casimir_metrology" / "data"

for name in ("uncleaned", "cleaned"):
    with tempfile.TemporaryDirectory() as tmp:
        rc = main(["simulate", "--config", str(DATA / "configs" / f"{name}.toml"), "--out", tmp])
        if rc:
            raise SystemExit(rc)
        shutil.copy(Path(tmp) / "sweeps.csv", DATA / "datasets" / f"{name}_sweeps.csv")
