"""Exact digital solvers and the analytic line spectrum.

Two independent decision routes are kept deliberately separate: direct
enumeration of sign vectors (`decide_bruteforce`) and subset-sum
reachability (`decide_dp`).  `decide_meet_in_middle` covers instances whose
magnitude exceeds any reasonable reachability table, at 2**(n/2) cost.

Spectrum amplitudes use the time-average convention: the line at frequency
w carries (number of sign vectors summing to w) / 2**n, which is directly
testable against numerical integration.  The Dirac-weight convention of the
angular-frequency Fourier transform differs by a constant sqrt(2*pi).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .instances import CpiInstance

# Block size for the doubling enumeration (2**22 int64 values = 32 MB).
_ENUM_CHUNK = 22


class InstanceTooLargeError(ValueError):
    """Instance exceeds the guard of an enumeration-based operation."""


class DpBudgetError(RuntimeError):
    """Reachability table would exceed the configured cell budget."""


@dataclass(frozen=True)
class PartitionWitness:
    """A subset of 1-based positions whose values sum to half the total."""

    subset: frozenset[int]


@dataclass
class Spectrum:
    """Frequency -> amplitude map.

    Analytic spectra have ``resolution == 0``, integer frequencies in
    instance units and exact `Fraction` amplitudes; measured spectra carry
    the DFT bin width and float amplitudes.
    """

    lines: dict = field(default_factory=dict)
    resolution: float = 0.0

    @property
    def dc(self):
        return self.lines.get(0, 0)

    def total_power(self) -> float:
        return float(sum(a * a for a in self.lines.values()))

    def to_csv(self, units: str = "Hz") -> str:
        rows = [f"# units={units}", "frequency,amplitude"]
        for f in sorted(self.lines):
            rows.append(f"{float(f):.12g},{float(self.lines[f]):.12g}")
        return "\n".join(rows) + "\n"


def _signed_sums(values: tuple[int, ...]) -> np.ndarray:
    sums = np.zeros(1, dtype=np.int64)
    for a in values:
        sums = np.concatenate([sums + a, sums - a])
    return sums


def _zero_sign_count(values: tuple[int, ...]) -> int:
    """Count sign vectors eps with sum(eps_i * a_i) == 0, by enumeration."""
    k = len(values)
    if k <= _ENUM_CHUNK:
        return int(np.count_nonzero(_signed_sums(values) == 0))
    head, tail = values[: k - _ENUM_CHUNK], values[k - _ENUM_CHUNK:]
    tail_sums = np.sort(_signed_sums(tail))
    count = 0
    for signs in itertools.product((1, -1), repeat=len(head)):
        s = sum(si * ai for si, ai in zip(signs, head))
        lo = np.searchsorted(tail_sums, -s, side="left")
        hi = np.searchsorted(tail_sums, -s, side="right")
        count += int(hi - lo)
    return count


def _check_enum_guard(inst: CpiInstance, max_n: int) -> None:
    if inst.n > max_n:
        raise InstanceTooLargeError(f"n={inst.n} exceeds the n<={max_n} enumeration guard")


def decide_bruteforce(inst: CpiInstance, max_n: int = 30) -> bool:
    """True iff some sign vector balances the instance.  Direct 2**n scan."""
    _check_enum_guard(inst, max_n)
    return _zero_sign_count(inst.values) > 0


def ideal_dc(inst: CpiInstance, max_n: int = 30) -> Fraction:
    """Mean of the cosine product over one period: (balanced vectors) / 2**n."""
    _check_enum_guard(inst, max_n)
    return Fraction(_zero_sign_count(inst.values), 2**inst.n)


def _dp_reachable(values: tuple[int, ...], half: int) -> int:
    """Bitmask of subset sums reachable within [0, half]."""
    keep = (1 << (half + 1)) - 1
    mask = 1
    for a in values:
        mask |= mask << a
        mask &= keep
    return mask


def _dp_budget_cells(inst: CpiInstance) -> int:
    return inst.total // 2 + 1


def decide_dp(inst: CpiInstance, max_cells: int = 10**8) -> bool:
    """Pseudo-polynomial decision: subset-sum reachability of total/2."""
    cells = _dp_budget_cells(inst)
    if cells > max_cells:
        raise DpBudgetError(f"{cells} reachability cells exceed the budget of {max_cells}")
    if inst.total % 2:
        return False
    half = inst.total // 2
    return bool((_dp_reachable(inst.values, half) >> half) & 1)


def find_partition(inst: CpiInstance, max_cells: int = 10**8) -> Optional[PartitionWitness]:
    """Balanced subset (1-based positions) via reachability backtracking."""
    cells = _dp_budget_cells(inst)
    if cells > max_cells:
        raise DpBudgetError(f"{cells} reachability cells exceed the budget of {max_cells}")
    if inst.total % 2:
        return None
    half = inst.total // 2
    keep = (1 << (half + 1)) - 1
    masks = [1]
    for a in inst.values:
        masks.append((masks[-1] | (masks[-1] << a)) & keep)
    if not (masks[-1] >> half) & 1:
        return None
    subset = set()
    target = half
    for i in range(inst.n - 1, -1, -1):
        if (masks[i] >> target) & 1:
            continue
        subset.add(i + 1)
        target -= inst.values[i]
    assert target == 0
    return PartitionWitness(frozenset(subset))


def _subset_sums(values: tuple[int, ...]) -> np.ndarray:
    sums = np.zeros(1, dtype=np.int64)
    for a in values:
        sums = np.unique(np.concatenate([sums, sums + a]))
    return sums


def decide_meet_in_middle(inst: CpiInstance, max_n: int = 44) -> bool:
    """Magnitude-independent exact decision at 2**(n/2) cost (Horowitz-Sahni)."""
    if inst.n > max_n:
        raise InstanceTooLargeError(f"n={inst.n} exceeds the n<={max_n} meet-in-middle guard")
    if inst.total % 2:
        return False
    half = inst.total // 2
    mid = inst.n // 2
    left = _subset_sums(inst.values[:mid])
    right = _subset_sums(inst.values[mid:])
    need = half - left
    idx = np.searchsorted(right, need)
    idx = np.clip(idx, 0, len(right) - 1)
    return bool(np.any(right[idx] == need))


def solve_exact(inst: CpiInstance, max_cells: int = 10**8) -> bool:
    """Exact decision: reachability table when it fits, meet-in-middle otherwise."""
    try:
        return decide_dp(inst, max_cells=max_cells)
    except DpBudgetError:
        return decide_meet_in_middle(inst)


def analytic_spectrum(inst: CpiInstance, max_n: int = 20,
                      max_total: int = 2_000_000) -> Spectrum:
    """Exact line spectrum of the cosine product.

    Lines sit at every signed sum of the values; coincident subsets add
    coherently, so the amplitude at w is (multiplicity of w) / 2**n and the
    DC line equals `ideal_dc`.
    """
    _check_enum_guard(inst, max_n)
    total = inst.total
    if total > max_total:
        raise InstanceTooLargeError(f"sum={total} exceeds the spectrum guard of {max_total}")
    counts = np.zeros(2 * total + 1, dtype=np.int64)
    counts[total] = 1
    for a in inst.values:
        nxt = np.zeros_like(counts)
        nxt[a:] += counts[:-a]
        nxt[:-a] += counts[a:]
        counts = nxt
    denom = 2**inst.n
    lines = {int(i - total): Fraction(int(c), denom)
             for i, c in enumerate(counts) if c}
    return Spectrum(lines=lines, resolution=0.0)
