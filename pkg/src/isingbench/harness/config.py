"""Experiment configuration in a flat ``key = value`` file.

Lines starting with ``#`` are comments.  Per-side iteration counts use keys of
the form ``iterations.64 = 10``.  Command-line flags override file values.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from fractions import Fraction

from ..ising import is_power_of_two
from ..rng import BUILTIN_LCGS, LcgParams, RngError, parse_kappa

RNG_KINDS = (*BUILTIN_LCGS, "lcg", "entropy-file")
SEED_SOURCES = ("splitmix64", "entropy-file")
STREAM_MODES = ("per-site", "shared")

DESK_SIDES = (4, 8, 16, 32, 64)
DEFAULT_ITERATIONS = 50


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RngSpec:
    kind: str = "prng0"
    params: LcgParams | None = None
    kappa: Fraction | None = None
    entropy_path: str | None = None
    word_width: int = 32
    exhausted_policy: str = "error"
    seed_source: str = "splitmix64"
    stream_mode: str = "per-site"

    def __post_init__(self):
        if self.kind not in RNG_KINDS:
            raise ConfigError(f"rng must be one of {RNG_KINDS}, got {self.kind!r}")
        if self.kind in BUILTIN_LCGS and self.params is None:
            object.__setattr__(self, "params", BUILTIN_LCGS[self.kind])
        if self.kind == "lcg" and self.params is None:
            raise ConfigError("rng = lcg needs modulus and multiplier")
        if self.kappa is not None:
            object.__setattr__(self, "kappa", parse_kappa(self.kappa))
            if self.kind == "entropy-file":
                raise ConfigError("kappa applies to LCG sources only")
        if self.seed_source not in SEED_SOURCES:
            raise ConfigError(f"seed_source must be one of {SEED_SOURCES}")
        if self.stream_mode not in STREAM_MODES:
            raise ConfigError(f"stream_mode must be one of {STREAM_MODES}")
        needs_file = self.kind == "entropy-file" or self.seed_source == "entropy-file"
        if needs_file and not self.entropy_path:
            raise ConfigError("an entropy file path is required (--entropy)")
        if self.exhausted_policy not in ("error", "wrap"):
            raise ConfigError("exhausted_policy must be 'error' or 'wrap'")

    @property
    def label(self) -> str:
        if self.kind == "entropy-file":
            return f"entropy-file({os.path.basename(self.entropy_path)})"
        base = self.params.label
        mode = "" if self.stream_mode == "per-site" else "[shared]"
        if self.kappa is None:
            return base + mode
        return f"{base}+reseed(kappa={self.kappa}){mode}"


@dataclass(frozen=True)
class ExperimentConfig:
    sides: tuple = DESK_SIDES
    n_iterations: dict = field(default_factory=dict)
    default_iterations: int = DEFAULT_ITERATIONS
    rng: RngSpec = field(default_factory=RngSpec)
    master_seed: int = 20221
    output_dir: str = "results"
    worker_count: int | str = 1
    run_multiple: int = 1300
    equil_multiple: int = 20
    z_approx: float = 2.0
    t_max_factor: float = 3.0
    batch_size: int = 16
    save_series: bool = False

    def __post_init__(self):
        sides = tuple(sorted(int(s) for s in self.sides))
        object.__setattr__(self, "sides", sides)
        if not sides or len(set(sides)) != len(sides):
            raise ConfigError("sides must be a non-empty list of distinct values")
        for s in sides:
            if s < 4 or not is_power_of_two(s):
                raise ConfigError(f"sides must be powers of two >= 4, got {s}")
        its = {int(k): int(v) for k, v in self.n_iterations.items()}
        object.__setattr__(self, "n_iterations", its)
        for s in sides:
            if self.iterations_for(s) < 2:
                raise ConfigError(f"need at least 2 iterations for side {s}")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.worker_count != "auto" and int(self.worker_count) < 1:
            raise ConfigError("workers must be >= 1 or 'auto'")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.run_multiple < 1 or self.equil_multiple < 0:
            raise ConfigError("run_multiple must be >= 1 and equil_multiple >= 0")

    def iterations_for(self, side: int) -> int:
        return self.n_iterations.get(side, self.default_iterations)

    @property
    def workers(self) -> int:
        if self.worker_count == "auto":
            return os.cpu_count() or 1
        return int(self.worker_count)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)

    def to_text(self) -> str:
        """Archivable form; ``output_dir`` and ``workers`` do not affect results
        and are left out so the text fingerprints the experiment itself."""
        r = self.rng
        lines = [
            f"sides = {','.join(str(s) for s in self.sides)}",
            f"iterations = {self.default_iterations}",
        ]
        lines += [f"iterations.{s} = {n}" for s, n in sorted(self.n_iterations.items())]
        lines += [f"rng = {r.kind}"]
        if r.kind == "lcg":
            lines += [
                f"modulus = {r.params.modulus}",
                f"multiplier = {r.params.multiplier}",
                f"increment = {r.params.increment}",
            ]
        if r.kappa is not None:
            lines.append(f"kappa = {r.kappa}")
        if r.entropy_path:
            lines += [f"entropy = {r.entropy_path}", f"word_width = {r.word_width}"]
        lines += [
            f"exhausted_policy = {r.exhausted_policy}",
            f"seed_source = {r.seed_source}",
            f"stream_mode = {r.stream_mode}",
            f"seed = {self.master_seed}",
            f"run_multiple = {self.run_multiple}",
            f"equil_multiple = {self.equil_multiple}",
            f"z_approx = {self.z_approx!r}",
            f"t_max_factor = {self.t_max_factor!r}",
            f"batch_size = {self.batch_size}",
        ]
        return "\n".join(lines) + "\n"


def parse_config_text(text: str) -> dict:
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {n}: expected key = value, got {raw!r}")
        out[key.strip().lower().replace("-", "_")] = value.strip()
    return out


def _parse_bool(v: str) -> bool:
    if v.lower() in ("1", "true", "yes", "on"):
        return True
    if v.lower() in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {v!r}")


def parse_sides(text: str) -> tuple:
    try:
        return tuple(int(s) for s in str(text).split(",") if s.strip())
    except ValueError:
        raise ConfigError(f"sides must be comma-separated integers, got {text!r}") from None


def build_config(values: dict) -> ExperimentConfig:
    """Build a config from flat string values (file entries plus overrides)."""
    v = dict(values)
    known = {
        "sides", "iterations", "rng", "kappa", "entropy", "word_width", "exhausted_policy",
        "seed_source", "stream_mode", "seed", "out", "workers", "run_multiple", "equil_multiple",
        "z_approx", "t_max_factor", "batch_size", "save_series", "modulus", "multiplier", "increment",
    }
    per_side = {}
    for key in list(v):
        if key.startswith("iterations."):
            per_side[int(key.split(".", 1)[1])] = int(v.pop(key))
        elif key not in known:
            raise ConfigError(f"unknown config key {key!r}")
    try:
        kind = v.get("rng", "prng0").lower()
        params = None
        if kind == "lcg":
            params = LcgParams(int(v["modulus"]), int(v["multiplier"]), int(v.get("increment", 0)), "lcg")
        rng = RngSpec(
            kind=kind,
            params=params,
            kappa=parse_kappa(v["kappa"]) if v.get("kappa") not in (None, "", "none") else None,
            entropy_path=v.get("entropy") or None,
            word_width=int(v.get("word_width", 32)),
            exhausted_policy=v.get("exhausted_policy", "error"),
            seed_source=v.get("seed_source", "splitmix64"),
            stream_mode=v.get("stream_mode", "per-site"),
        )
        workers = v.get("workers", "1")
        return ExperimentConfig(
            sides=parse_sides(v["sides"]) if "sides" in v else DESK_SIDES,
            n_iterations=per_side,
            default_iterations=int(v.get("iterations", DEFAULT_ITERATIONS)),
            rng=rng,
            master_seed=int(str(v.get("seed", 20221)), 0),
            output_dir=v.get("out", "results"),
            worker_count="auto" if workers == "auto" else int(workers),
            run_multiple=int(v.get("run_multiple", 1300)),
            equil_multiple=int(v.get("equil_multiple", 20)),
            z_approx=float(v.get("z_approx", 2.0)),
            t_max_factor=float(v.get("t_max_factor", 3.0)),
            batch_size=int(v.get("batch_size", 16)),
            save_series=_parse_bool(v.get("save_series", "false")),
        )
    except (KeyError, ValueError, RngError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    values = {}
    if path is not None:
        with open(path) as fh:
            values = parse_config_text(fh.read())
    for k, val in (overrides or {}).items():
        if val is not None:
            values[k] = str(val)
    return build_config(values)
