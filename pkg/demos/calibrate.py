"""Regenerate the locked constants in src/densetsp/calibration.json.

Run from the repository root:

    python3 demos/calibrate.py

The Monte Carlo part takes well under a minute.  Commit the resulting file
only after checking that the regression tests still pass against it.
"""

import datetime
import json
from pathlib import Path

from densetsp.experiments import calibrate

SEED = 20261016

constants = calibrate(SEED)
doc = {
    "generated": datetime.date.today().isoformat(),
    "generator": "demos/calibrate.py",
    "constants": [dict(c, date=datetime.date.today().isoformat()) for c in constants],
}
target = Path(__file__).resolve().parents[1] / "src" / "densetsp" / "calibration.json"
target.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
for c in constants:
    print(f"{c['name']:40s} {c['value']!r}")
