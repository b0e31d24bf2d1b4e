"""Low-pass filtering, sampling and DC extraction."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exact import Spectrum
from .pipeline import Signal

_KIND_ALIASES = {
    "ideal-brickwall": "brickwall",
    "one-pole-cascade": "one-pole",
}
FILTER_KINDS = ("brickwall", "one-pole", "none")


@dataclass(frozen=True)
class FilterSpec:
    """Low-pass description: kind, cutoff, order and per-stage gain.

    The compensating design uses gain 2 per stage so an order-n cascade
    restores the 2**n amplitude loss of an n-cosine product at DC.
    """

    kind: str
    cutoff_f0: float
    order: int = 1
    per_stage_gain: float = 1.0

    def __post_init__(self) -> None:
        kind = _KIND_ALIASES.get(self.kind, self.kind)
        if kind not in FILTER_KINDS:
            raise ValueError(f"kind must be one of {FILTER_KINDS}")
        object.__setattr__(self, "kind", kind)
        if self.cutoff_f0 <= 0:
            raise ValueError("cutoff_f0 must be positive")
        if self.order < 1:
            raise ValueError("order must be at least 1")

    @property
    def dc_gain(self) -> float:
        if self.kind == "none":
            return 1.0
        return self.per_stage_gain ** self.order


@dataclass(eq=False)
class SampledTrace:
    """Equidistant samples (t_start + i*tau, values[i]) after the filter."""

    t_start: float
    tau: float
    values: np.ndarray
    snap_distance: float = 0.0
    resampled: bool = False

    @property
    def m(self) -> int:
        return len(self.values)

    def times(self) -> np.ndarray:
        return self.t_start + self.tau * np.arange(self.m)


def apply_lowpass(sig: Signal, spec: FilterSpec, complex_response: bool = False) -> Signal:
    """Filter in the frequency domain over the signal's full grid.

    Brickwall zeroes every component at or above the cutoff; the one-pole
    cascade multiplies each bin by (gain / sqrt(1 + (f/f0)^2))**order.  The
    magnitude (zero-phase) response is the default since only amplitudes
    reach the decision; ``complex_response`` switches to the full pole.
    """
    if spec.kind == "none":
        return sig
    x = np.fft.rfft(sig.samples)
    freqs = np.fft.rfftfreq(sig.m, d=sig.dt)
    if spec.kind == "brickwall":
        x[freqs >= spec.cutoff_f0] = 0.0
        x *= spec.dc_gain
    else:
        if complex_response:
            h = (spec.per_stage_gain / (1.0 + 1j * freqs / spec.cutoff_f0)) ** spec.order
        else:
            h = (spec.per_stage_gain / np.sqrt(1.0 + (freqs / spec.cutoff_f0) ** 2)) ** spec.order
        x *= h
    out = np.fft.irfft(x, n=sig.m)
    return Signal(t0=sig.t0, dt=sig.dt, samples=out, f_max_nominal=sig.f_max_nominal,
                  alignment_period=sig.alignment_period)


def design_compensating_filter(n: int, f0: float) -> FilterSpec:
    """Order-n one-pole cascade with gain 2 per stage (DC gain 2**n)."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return FilterSpec(kind="one-pole", cutoff_f0=f0, order=n, per_stage_gain=2.0)


def sample_after_filter(sig: Signal, spec: FilterSpec, t_start: float, duration: float,
                        tau: Optional[float] = None) -> SampledTrace:
    """Filter, then record equidistant samples over ``duration`` seconds.

    The step is min(requested tau, 1/(2*cutoff)); the start time snaps to
    the nearest multiple of the signal's alignment period and the snap
    distance is recorded.  Sample instants that fall between grid points are
    linearly interpolated; grid-commensurate steps are read exactly.
    """
    if t_start < 0:
        raise ValueError("t_start must be non-negative")
    filtered = apply_lowpass(sig, spec)
    period = sig.alignment_period
    snap = 0.0
    start = t_start
    if period:
        if duration < period * (1 - 1e-9):
            raise ValueError("duration must cover at least one alignment period")
        start = round(t_start / period) * period
        snap = abs(start - t_start)

    nyq_tau = 1.0 / (2.0 * spec.cutoff_f0)
    tau_eff = nyq_tau if tau is None else min(tau, nyq_tau)
    m = int(math.floor(duration / tau_eff + 1e-9))
    if m < 1:
        raise ValueError("duration too short for the sampling step")

    grid_end = filtered.t0 + (filtered.m - 1) * filtered.dt
    last = start + (m - 1) * tau_eff
    if last > grid_end + filtered.dt * 1e-6:
        raise ValueError("sampling window extends beyond the simulated signal")

    j0 = (start - filtered.t0) / filtered.dt
    k = tau_eff / filtered.dt
    if abs(j0 - round(j0)) < 1e-6 and abs(k - round(k)) < 1e-9 * max(1.0, k) and round(k) >= 1:
        idx = round(j0) + round(k) * np.arange(m)
        values = filtered.samples[idx]
    else:
        values = np.interp(start + tau_eff * np.arange(m), filtered.times(), filtered.samples)
    return SampledTrace(t_start=start, tau=tau_eff, values=values, snap_distance=snap)


def dc_component(trace: SampledTrace) -> float:
    """Sample mean; identical to the DC bin of `dft` by construction."""
    return float(np.mean(trace.values))


def dft(trace: SampledTrace) -> Spectrum:
    """One-sided DFT, normalized so the DC bin equals the sample mean.

    A cosine of amplitude A over whole periods shows up as A/2 per side.
    """
    if trace.m < 2:
        raise ValueError("need at least two samples")
    x = np.fft.rfft(trace.values)
    amps = np.abs(x) / trace.m
    amps[0] = dc_component(trace)
    freqs = np.fft.rfftfreq(trace.m, d=trace.tau)
    return Spectrum(lines=dict(zip(freqs.tolist(), amps.tolist())),
                    resolution=1.0 / (trace.m * trace.tau))


def sampled_to_csv(trace: SampledTrace) -> str:
    """Two-column export: time_s, volts."""
    rows = ["time_s,volts"]
    for t, v in zip(trace.times(), trace.values):
        rows.append(f"{t:.12g},{v:.12g}")
    return "\n".join(rows) + "\n"
