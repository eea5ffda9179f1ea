"""Published dynamic-exponent estimates bundled with the package."""

from __future__ import annotations

import csv
import math
from importlib import resources
from typing import NamedTuple

Z_REF = 2.1667
Z_REF_UNCERTAINTY = 0.0005

# published results of the PRNG/QRNG comparison, keyed by generator label
PUBLISHED_Z = {
    "prng0": (2.1087, 0.0268),
    "prng1": (2.1159, 0.0234),
    "prng2": (2.1047, 0.0286),
    "prng3": (2.1162, 0.0233),
    "prng3 kappa=2": (2.1815, 0.0068),
    "prng3 kappa=1": (2.1477, 0.0088),
    "prng3 kappa=1/2": (2.1482, 0.0085),
    "prng3 kappa=1/4": (2.1441, 0.0104),
    "qrng": (2.165, None),
}
PUBLISHED_LOG_TAU0 = {
    "qrng": -0.362,
    "prng3 kappa=1/2": -0.1701,
    "prng3 kappa=2": -0.2454,
    "prng2": -0.0906,
    "prng0": -0.1007,
    "prng1": -0.1183,
}


class ReferenceEntry(NamedTuple):
    year: int
    method: str
    dimension: int
    z: float
    uncertainty: float | None
    reference: str
    note: str


def load_reference_table() -> list[ReferenceEntry]:
    text = resources.files("isingbench").joinpath("data/reference_z.csv").read_text()
    rows = []
    for r in csv.DictReader(text.splitlines()):
        unc = float(r["uncertainty"]) if r["uncertainty"] else None
        rows.append(
            ReferenceEntry(int(r["year"]), r["method"], int(r["dimension"]), float(r["z"]), unc, r["reference"], r["note"])
        )
    return rows


def mc_mean(dimension: int = 2) -> float:
    vals = [e.z for e in load_reference_table() if e.dimension == dimension and e.method == "MC"]
    return math.fsum(vals) / len(vals)
