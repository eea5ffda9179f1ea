"""Uniform random sources with exact draw accounting.

Every source exposes integer draws (``next_raw``) in ``[0, modulus)`` and
uniform reals (``next_value``) obtained by dividing by the modulus.  Lattice
sweeps use :class:`SiteStreams`, a vectorized bank holding one LCG per site.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

MASK64 = (1 << 64) - 1


class RngError(Exception):
    """Invalid generator parameters or seeds."""


class EntropyExhausted(RngError):
    """An entropy file ran out of data under the ``error`` policy."""


@dataclass(frozen=True)
class LcgParams:
    modulus: int
    multiplier: int
    increment: int = 0
    name: str = ""

    def __post_init__(self):
        m, a, c = self.modulus, self.multiplier, self.increment
        if not 2 <= m <= MASK64:
            raise RngError(f"modulus must be in [2, 2**64-1], got {m}")
        if not 0 < a < m:
            raise RngError(f"multiplier must be in (0, modulus), got {a}")
        if not 0 <= c < m:
            raise RngError(f"increment must be in [0, modulus), got {c}")

    @property
    def label(self) -> str:
        return self.name or f"lcg(m={self.modulus},a={self.multiplier},c={self.increment})"

    def valid_seed(self, seed: int) -> bool:
        if not 0 <= seed < self.modulus:
            return False
        return not (self.increment == 0 and seed == 0)


PRNG0 = LcgParams(2**32 - 1, 16807, 0, "prng0")
PRNG1 = LcgParams(2**25 - 39, 12836191, 0, "prng1")
PRNG2 = LcgParams(2**23 - 15, 422527, 0, "prng2")
PRNG3 = LcgParams(2**17 - 1, 43165, 0, "prng3")

BUILTIN_LCGS = {p.name: p for p in (PRNG0, PRNG1, PRNG2, PRNG3)}


def get_params(name: str) -> LcgParams:
    try:
        return BUILTIN_LCGS[name.lower()]
    except KeyError:
        raise RngError(f"unknown generator {name!r}; choose from {sorted(BUILTIN_LCGS)}") from None


def lcg_next(state: int, params: LcgParams) -> int:
    # Python ints are unbounded, so the product never overflows.
    return (params.multiplier * state + params.increment) % params.modulus


def to_unit_interval(raw: int, modulus: int) -> float:
    return raw / modulus


def parse_kappa(text) -> Fraction:
    kappa = Fraction(str(text).strip())
    if kappa <= 0:
        raise RngError(f"kappa must be positive, got {text}")
    return kappa


@dataclass(frozen=True)
class ReseedPolicy:
    """Replace the LCG state every ``round(kappa * (m - 1))`` draws."""

    kappa: Fraction
    period_base: int

    def __post_init__(self):
        object.__setattr__(self, "kappa", parse_kappa(self.kappa))
        if self.reseed_interval < 1:
            raise RngError("reseed interval must be at least one draw")

    @classmethod
    def for_params(cls, kappa, params: LcgParams) -> "ReseedPolicy":
        return cls(parse_kappa(kappa), params.modulus - 1)

    @property
    def reseed_interval(self) -> int:
        # round half up, computed once in exact rational arithmetic
        x = self.kappa * self.period_base
        return int((x + Fraction(1, 2)).__floor__())


class RngStream:
    """Base class for scalar streams.  Subclasses implement ``_emit``."""

    kind = "abstract"
    modulus: int

    def __init__(self):
        self.draws = 0

    def _emit(self) -> int:
        raise NotImplementedError

    def next_raw(self) -> int:
        raw = self._emit()
        self.draws += 1
        return raw

    def next_value(self) -> float:
        return to_unit_interval(self.next_raw(), self.modulus)

    def next_raw_block(self, n: int) -> np.ndarray:
        """Draw ``n`` raw values as float64 (exact for moduli up to 2**53)."""
        return np.array([self.next_raw() for _ in range(n)], dtype=np.float64)

    @property
    def label(self) -> str:
        return self.kind


class LcgStream(RngStream):
    kind = "lcg"

    def __init__(self, params: LcgParams, seed: int):
        super().__init__()
        if not params.valid_seed(seed):
            raise RngError(f"seed {seed} is invalid (absorbing or out of range) for {params.label}")
        self.params = params
        self.modulus = params.modulus
        self.state = seed

    def _emit(self) -> int:
        self.state = lcg_next(self.state, self.params)
        return self.state

    def next_raw_block(self, n: int) -> np.ndarray:
        from . import _kernels

        if not _kernels.lcg_fits_float(self.params):
            return super().next_raw_block(n)
        out = np.empty(n, dtype=np.float64)
        self.state = int(_kernels.lcg_fill(float(self.state), *_kernels.lcg_constants(self.params), out))
        self.draws += n
        return out

    @property
    def label(self) -> str:
        return self.params.label


class ReseededLcgStream(RngStream):
    """LCG whose state is replaced from ``seed_source`` every reseed interval.

    The reseed happens just before the draw that would exceed the interval.
    """

    kind = "reseeded-lcg"

    def __init__(self, params: LcgParams, policy: ReseedPolicy, seed_source: RngStream, seed: int | None = None):
        super().__init__()
        self.params = params
        self.policy = policy
        self.seed_source = seed_source
        self.modulus = params.modulus
        self.reseeds = 0
        if seed is None:
            seed = draw_seed(seed_source, params)
        elif not params.valid_seed(seed):
            raise RngError(f"seed {seed} is invalid for {params.label}")
        self.state = seed

    def _emit(self) -> int:
        if self.draws and self.draws % self.policy.reseed_interval == 0:
            self.state = draw_seed(self.seed_source, self.params)
            self.reseeds += 1
        self.state = lcg_next(self.state, self.params)
        return self.state

    def next_raw_block(self, n: int) -> np.ndarray:
        from . import _kernels

        if not _kernels.lcg_fits_float(self.params):
            return super().next_raw_block(n)
        interval = self.policy.reseed_interval
        consts = _kernels.lcg_constants(self.params)
        out = np.empty(n, dtype=np.float64)
        pos = 0
        while pos < n:
            if self.draws and self.draws % interval == 0:
                self.state = draw_seed(self.seed_source, self.params)
                self.reseeds += 1
            seg = min(n - pos, interval - self.draws % interval)
            self.state = int(_kernels.lcg_fill(float(self.state), *consts, out[pos : pos + seg]))
            self.draws += seg
            pos += seg
        return out

    @property
    def label(self) -> str:
        return f"{self.params.label}+reseed(kappa={self.policy.kappa})"


def splitmix64_mix(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


class SplitMix64Stream(RngStream):
    """64-bit SplitMix generator; the default source of seeds, never of spin draws."""

    kind = "splitmix64"
    modulus = 1 << 64

    def __init__(self, seed: int):
        super().__init__()
        self.state = seed & MASK64

    def _emit(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        return splitmix64_mix(self.state)

    @property
    def label(self) -> str:
        return "splitmix64"


class ScriptedStream(RngStream):
    """Test double replaying a fixed list of raw values."""

    kind = "counterless-test-double"

    def __init__(self, raws: Iterable[int], modulus: int, cycle: bool = False):
        super().__init__()
        self.raws = list(raws)
        self.modulus = modulus
        self.cycle = cycle
        if any(not 0 <= r < modulus for r in self.raws):
            raise RngError("scripted raw values must lie in [0, modulus)")

    def _emit(self) -> int:
        if self.draws >= len(self.raws) and not self.cycle:
            raise EntropyExhausted("scripted stream exhausted")
        return self.raws[self.draws % len(self.raws)]


class EntropyFileStream(RngStream):
    """Raw little-endian words read from a file or device, no framing."""

    kind = "entropy-file"

    def __init__(self, path, word_width: int = 32, offset: int = 0, exhausted_policy: str = "error"):
        super().__init__()
        if word_width not in (8, 16, 32, 64):
            raise RngError(f"word width must be 8, 16, 32 or 64 bits, got {word_width}")
        if exhausted_policy not in ("error", "wrap"):
            raise RngError(f"exhausted_policy must be 'error' or 'wrap', got {exhausted_policy!r}")
        self.path = os.fspath(path)
        self.word_width = word_width
        self.word_bytes = word_width // 8
        self.modulus = 1 << word_width
        self.exhausted_policy = exhausted_policy
        self.cursor = int(offset)
        self._dtype = np.dtype(f"<u{self.word_bytes}")
        self._fh = open(self.path, "rb")
        self._size = self._probe_size()
        if self.exhausted_policy == "wrap":
            if not self._size:
                raise RngError(f"{self.path}: wrap policy needs a finite, non-empty file")
            self.cursor %= self._size - self._size % self.word_bytes

    def _probe_size(self) -> int | None:
        st = os.fstat(self._fh.fileno())
        import stat

        return st.st_size if stat.S_ISREG(st.st_mode) else None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def close(self):
        self._fh.close()

    def remaining_words(self) -> int | None:
        if self._size is None:
            return None
        return max(self._size - self.cursor, 0) // self.word_bytes

    def _read(self, nbytes: int) -> bytes:
        if self._size is not None:
            self._fh.seek(self.cursor)
        data = self._fh.read(nbytes)
        self.cursor += len(data)
        return data

    def _read_words(self, n: int) -> np.ndarray:
        need = n * self.word_bytes
        data = self._read(need)
        if len(data) < need:
            if self.exhausted_policy == "error" or self._size is None:
                self.cursor -= len(data)
                raise EntropyExhausted(
                    f"{self.path}: requested {n} words, only {len(data) // self.word_bytes} left "
                    f"(cursor {self.cursor})"
                )
            usable = self._size - self._size % self.word_bytes
            chunks = [data[: len(data) - len(data) % self.word_bytes]]
            self.cursor = 0
            got = len(chunks[0])
            while got < need:
                part = self._read(min(need - got, usable))
                chunks.append(part)
                got += len(part)
                if self.cursor >= usable:
                    self.cursor = 0
            data = b"".join(chunks)
        return np.frombuffer(data, dtype=self._dtype, count=n)

    def _emit(self) -> int:
        return int(self._read_words(1)[0])

    def next_raw_block(self, n: int) -> np.ndarray:
        words = self._read_words(n).astype(np.float64)
        self.draws += n
        return words

    @property
    def label(self) -> str:
        return f"entropy-file({os.path.basename(self.path)})"


def draw_seed(seed_source: RngStream, params: LcgParams) -> int:
    while True:
        seed = seed_source.next_raw() % params.modulus
        if params.valid_seed(seed):
            return seed


def draw_site_seeds(seed_source: RngStream, params: LcgParams, n: int) -> list[int]:
    """Draw ``n`` distinct valid seeds; absorbing and repeated seeds are redrawn."""
    capacity = params.modulus - (1 if params.increment == 0 else 0)
    if n > capacity:
        raise RngError(f"cannot draw {n} distinct seeds for {params.label} (only {capacity} valid states)")
    seen: set[int] = set()
    seeds = []
    while len(seeds) < n:
        s = draw_seed(seed_source, params)
        if s not in seen:
            seen.add(s)
            seeds.append(s)
    return seeds


def spawn_site_streams(seed_source: RngStream, params: LcgParams, n: int) -> list[LcgStream]:
    if n < 1:
        raise RngError("need at least one stream")
    return [LcgStream(params, s) for s in draw_site_seeds(seed_source, params, n)]


@dataclass
class SiteStreams:
    """One LCG per lattice site, stored as arrays.

    ``states[k]`` and ``draws[k]`` belong to site ``k`` (row-major).  With a
    ``policy`` each site reseeds from ``seed_source`` after every reseed
    interval of its own draws.
    """

    params: LcgParams
    states: np.ndarray
    policy: ReseedPolicy | None = None
    seed_source: RngStream | None = None
    draws: np.ndarray = field(default=None)
    reseeds: int = 0

    def __post_init__(self):
        dtype = np.int64 if self.params.modulus <= 2**63 else object
        self.states = np.asarray([int(s) for s in self.states], dtype=dtype)
        if self.draws is None:
            self.draws = np.zeros(len(self.states), dtype=np.int64)
        if self.policy is not None and self.seed_source is None:
            raise RngError("reseeding requires a seed source")
        for s in self.states:
            if not self.params.valid_seed(int(s)):
                raise RngError(f"seed {s} is invalid for {self.params.label}")

    @classmethod
    def spawn(cls, seed_source: RngStream, params: LcgParams, n: int, policy: ReseedPolicy | None = None):
        seeds = draw_site_seeds(seed_source, params, n)
        return cls(params, np.array(seeds, dtype=object), policy, seed_source if policy else None)

    def __len__(self):
        return len(self.states)

    @property
    def modulus(self) -> int:
        return self.params.modulus

    @property
    def total_draws(self) -> int:
        return int(self.draws.sum())

    @property
    def label(self) -> str:
        if self.policy is None:
            return self.params.label
        return f"{self.params.label}+reseed(kappa={self.policy.kappa})"

    def lockstep_draws(self) -> int:
        d = self.draws
        if not (d == d[0]).all():
            raise RngError("site streams are not in lock-step")
        return int(d[0])

    def reseed_sites(self, idx: Sequence[int]):
        idx = np.asarray(idx, dtype=np.int64)
        if len(idx) == 0:
            return
        seeds = draw_site_seeds(self.seed_source, self.params, len(idx))
        for k, s in zip(idx, seeds):
            self.states[k] = s
        self.reseeds += 1

    def next_raw(self, idx: Sequence[int]) -> np.ndarray:
        """Advance the listed sites once each and return their new states."""
        idx = np.asarray(idx, dtype=np.int64)
        if self.policy is not None:
            d = self.draws[idx]
            due = idx[(d > 0) & (d % self.policy.reseed_interval == 0)]
            self.reseed_sites(due)
        p = self.params
        if self.states.dtype == object:
            new = np.array([lcg_next(int(s), p) for s in self.states[idx]], dtype=object)
        else:
            if p.multiplier * (p.modulus - 1) + p.increment < 2**63:
                new = (self.states[idx] * p.multiplier + p.increment) % p.modulus
            else:
                new = np.array([lcg_next(int(s), p) for s in self.states[idx]], dtype=np.int64)
        self.states[idx] = new
        self.draws[idx] += 1
        return new

    def next_values(self, idx: Sequence[int]) -> np.ndarray:
        raw = self.next_raw(idx)
        return np.array([to_unit_interval(int(r), self.modulus) for r in raw]) if raw.dtype == object else raw / self.modulus
