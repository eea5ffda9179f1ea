"""2D square-lattice Ising model with checkerboard Metropolis updates.

Conventions: J = 1, k_B = 1, periodic boundaries, ``H = -sum_<ij> s_i s_j``.
Site (i, j) is black when ``i + j`` is even; black sites are updated first.

The functions here are the readable reference path.  Long trajectories run
through the compiled kernels in :mod:`isingbench._kernels`, which are tested
to agree with this module bit for bit.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Sequence

import numpy as np

from .rng import RngStream, SiteStreams


class LatticeError(ValueError):
    pass


class Color(IntEnum):
    BLACK = 0
    WHITE = 1


def critical_beta() -> float:
    return math.log(1.0 + math.sqrt(2.0)) / 2.0


def acceptance_table(beta: float) -> dict[int, float]:
    if math.isinf(beta):
        return {4: 0.0, 8: 0.0}
    return {4: math.exp(-4.0 * beta), 8: math.exp(-8.0 * beta)}


def is_power_of_two(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


@dataclass
class LatticeState:
    side: int
    spins: np.ndarray = None
    beta: float = field(default_factory=critical_beta)
    accept_table: dict = None

    def __post_init__(self):
        if not (self.side >= 2 and is_power_of_two(self.side)):
            raise LatticeError(f"side must be a power of two >= 2, got {self.side}")
        if self.spins is None:
            self.spins = np.ones((self.side, self.side), dtype=np.int8)
        else:
            self.spins = np.asarray(self.spins, dtype=np.int8)
            if self.spins.shape != (self.side, self.side):
                raise LatticeError(f"spins must have shape {(self.side, self.side)}")
            if not np.isin(self.spins, (-1, 1)).all():
                raise LatticeError("spins must be +1 or -1")
        if self.accept_table is None:
            self.accept_table = acceptance_table(self.beta)

    @classmethod
    def all_up(cls, side: int, beta: float | None = None) -> "LatticeState":
        return cls(side, beta=critical_beta() if beta is None else beta)

    @property
    def n_sites(self) -> int:
        return self.side * self.side

    def copy(self) -> "LatticeState":
        return LatticeState(self.side, self.spins.copy(), self.beta, dict(self.accept_table))


def color_mask(side: int, color: Color) -> np.ndarray:
    i, j = np.indices((side, side))
    return (i + j) % 2 == int(color)


def color_sites(side: int, color: Color) -> np.ndarray:
    """Flat row-major indices of the sites of one colour."""
    return np.flatnonzero(color_mask(side, color))


def neighbor_sum(spins: np.ndarray) -> np.ndarray:
    s = spins.astype(np.int64)
    return np.roll(s, 1, 0) + np.roll(s, -1, 0) + np.roll(s, 1, 1) + np.roll(s, -1, 1)


def delta_energy(lattice: LatticeState, i: int, j: int) -> int:
    L = lattice.side
    s = lattice.spins
    nb = int(s[(i - 1) % L, j]) + int(s[(i + 1) % L, j]) + int(s[i, (j - 1) % L]) + int(s[i, (j + 1) % L])
    return 2 * int(s[i, j]) * nb


def energy(lattice: LatticeState) -> int:
    s = lattice.spins.astype(np.int64)
    return int(-(s * (np.roll(s, 1, 0) + np.roll(s, 1, 1))).sum())


def metropolis_decide(delta_e: int, r: float, accept_table: dict) -> bool:
    if delta_e <= 0:
        return True
    return r <= accept_table[delta_e]


def raw_thresholds(accept_table: dict, modulus: int) -> tuple[float, float]:
    """Largest raw draw accepted for dE = 4 and dE = 8.

    ``raw <= t`` holds exactly when ``raw / modulus <= p`` in double precision,
    so kernels can compare integers instead of dividing.
    """
    out = []
    for de in (4, 8):
        p = accept_table[de]
        t = min(int(math.floor(p * modulus)), modulus - 1)
        while t + 1 < modulus and (t + 1) / modulus <= p:
            t += 1
        while t >= 0 and t / modulus > p:
            t -= 1
        out.append(float(t))
    return out[0], out[1]


def magnetization(lattice: LatticeState) -> float:
    return int(lattice.spins.sum(dtype=np.int64)) / lattice.n_sites


def _draw_for_sites(streams, idx: np.ndarray) -> np.ndarray:
    if isinstance(streams, SiteStreams):
        return np.asarray(streams.next_values(idx), dtype=np.float64)
    if isinstance(streams, RngStream):
        return np.array([streams.next_value() for _ in idx])
    return np.array([streams[k].next_value() for k in idx])


def _check_streams(streams, n_sites: int):
    if isinstance(streams, RngStream):
        return
    if len(streams) != n_sites:
        raise LatticeError(f"need one stream per site ({n_sites}), got {len(streams)}")


def half_sweep(lattice: LatticeState, color: Color, streams, workers: int = 1) -> LatticeState:
    """Offer a Metropolis flip to every site of ``color``.

    ``streams`` is a :class:`SiteStreams` bank, a sequence of one stream per
    site, or a single shared stream consumed in row-major site order.  Each
    offered site consumes one value whatever the sign of dE.
    """
    L = lattice.side
    _check_streams(streams, L * L)
    idx = color_sites(L, color)
    flat = lattice.spins.reshape(-1)
    de = (2 * flat.astype(np.int64) * neighbor_sum(lattice.spins).reshape(-1))[idx]
    table = lattice.accept_table

    def decide(part: slice, r: np.ndarray) -> np.ndarray:
        d = de[part]
        p = np.where(d == 8, table[8], table[4])
        return (d <= 0) | (r <= p)

    if isinstance(streams, RngStream) or workers <= 1:
        r_all = _draw_for_sites(streams, idx)
        accept = decide(slice(None), r_all)
    else:
        bounds = np.linspace(0, len(idx), workers + 1).astype(int)
        parts = [slice(bounds[w], bounds[w + 1]) for w in range(workers)]
        # each worker advances only its own sites' streams
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda sl: decide(sl, _draw_for_sites(streams, idx[sl])), parts))
        accept = np.concatenate(results) if results else np.zeros(0, dtype=bool)
    flip = idx[accept]
    flat[flip] = -flat[flip]
    return lattice


def full_sweep(lattice: LatticeState, streams, workers: int = 1) -> LatticeState:
    half_sweep(lattice, Color.BLACK, streams, workers)
    half_sweep(lattice, Color.WHITE, streams, workers)
    return lattice


def dump_snapshot(lattice: LatticeState) -> str:
    rows = ["".join("+" if v > 0 else "-" for v in row) for row in lattice.spins]
    return "\n".join([f"L={lattice.side}", *rows]) + "\n"


def load_snapshot(text: str, beta: float | None = None) -> LatticeState:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("L="):
        raise LatticeError("snapshot must start with 'L=<n>'")
    L = int(lines[0][2:])
    rows = lines[1:]
    if len(rows) != L or any(len(r) != L or set(r) - {"+", "-"} for r in rows):
        raise LatticeError("malformed snapshot body")
    spins = np.array([[1 if ch == "+" else -1 for ch in r] for r in rows], dtype=np.int8)
    return LatticeState(L, spins, critical_beta() if beta is None else beta)


def sublattice_consumption(side: int) -> Sequence[int]:
    """Draws consumed by the black and white half-sweeps."""
    n = side * side
    return (n // 2, n - n // 2)
