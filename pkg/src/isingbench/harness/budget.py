"""Randomness consumption estimates for a trajectory plan."""

from __future__ import annotations

from dataclasses import dataclass

RUN_MULTIPLE = 1300
TOTAL_BITS_LIMIT = 1 << 127
# exponent that reproduces the published consumption table row by row
TABLE_Z_PLAN = 2.17


class BudgetError(ValueError):
    pass


@dataclass(frozen=True)
class BudgetEstimate:
    side: int
    z_plan: float
    sweeps: int
    numbers_per_sweep: int
    bits_per_number: int
    n_iterations: int
    total_bits: int
    total_bytes: int
    equil_sweeps: int = 0
    closed_form_bits: float = 0.0

    @property
    def draws_per_iteration(self) -> int:
        return (self.sweeps + self.equil_sweeps) * self.numbers_per_sweep

    @property
    def gigabytes(self) -> float:
        return self.total_bytes / 1e9

    @property
    def gibibytes(self) -> float:
        return self.total_bytes / 2**30

    def as_row(self) -> dict:
        return {
            "side": self.side,
            "z_plan": self.z_plan,
            "sweeps": self.sweeps,
            "equil_sweeps": self.equil_sweeps,
            "numbers_per_sweep": self.numbers_per_sweep,
            "bits_per_number": self.bits_per_number,
            "n_iterations": self.n_iterations,
            "total_bits": self.total_bits,
            "total_bytes": self.total_bytes,
            "GB": round(self.gigabytes, 4),
            "GiB": round(self.gibibytes, 4),
            "closed_form_bits_per_iteration": f"{self.closed_form_bits:.6g}",
        }


def estimate_budget(
    side: int,
    z_plan: float = 2.0,
    n_iterations: int = 1,
    bits_per_number: int = 32,
    equil_sweeps: int = 0,
    run_multiple: int = RUN_MULTIPLE,
) -> BudgetEstimate:
    """Bits needed for ``n_iterations`` trajectories of ``run_multiple * L**z`` sweeps.

    Also reports the closed form ``1300 * 32 * L**(z + 2)`` bits per trajectory
    (41600 L^(z+2) for 32-bit numbers) for comparison.
    """
    if side < 2:
        raise BudgetError(f"side must be >= 2, got {side}")
    if bits_per_number < 1:
        raise BudgetError(f"bits_per_number must be >= 1, got {bits_per_number}")
    if n_iterations < 1:
        raise BudgetError(f"n_iterations must be >= 1, got {n_iterations}")
    if equil_sweeps < 0:
        raise BudgetError("equil_sweeps must be >= 0")
    sweeps = int(round(run_multiple * side**z_plan))
    per_sweep = side * side
    total_bits = (sweeps + equil_sweeps) * per_sweep * bits_per_number * n_iterations
    if total_bits >= TOTAL_BITS_LIMIT:
        raise BudgetError("bit budget exceeds 2**127")
    return BudgetEstimate(
        side=side,
        z_plan=z_plan,
        sweeps=sweeps,
        numbers_per_sweep=per_sweep,
        bits_per_number=bits_per_number,
        n_iterations=n_iterations,
        total_bits=total_bits,
        total_bytes=-(-total_bits // 8),
        equil_sweeps=equil_sweeps,
        closed_form_bits=run_multiple * 32 * side ** (z_plan + 2),
    )
