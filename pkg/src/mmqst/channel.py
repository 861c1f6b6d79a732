"""Channel/qubit configuration and the finite-memory coupling kernel.

Times are measured in units of 2*pi/fsr of the canonical channel, so the
one-way propagation delay is t0 = pi/fsr = 0.5 for the canonical spacing.
Frequencies (detunings, couplings, rates) are stored as angular values in
those time units; `fsr` itself is the angular mode spacing (2*pi for the
canonical channel).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .grids import ALIGN_RTOL, TimeGrid

CANONICAL_FSR = 2.0 * math.pi


class CaseLabel(enum.Enum):
    """Qubit frequency placement relative to the mode comb."""

    MIDPOINT = "midpoint"   # halfway between two modes
    RESONANT = "resonant"   # on a mode


@dataclass(frozen=True)
class ChannelSpec:
    """Static channel data: mode detunings, spatial parities, spacing, delay.

    Invariants (checked on construction):
      * t0 * fsr = pi
      * detunings strictly increasing, adjacent spacing exactly fsr
      * parities alternate between adjacent modes
      * exp(i*delta_k*t0) = parity_k * exp(-i*omega0_phase) for every mode
    """

    delta: np.ndarray = field(repr=False)
    parity: np.ndarray = field(repr=False)
    fsr: float
    t0: float
    omega0_phase: float

    def __post_init__(self):
        delta = np.asarray(self.delta, dtype=float)
        parity = np.asarray(self.parity, dtype=int)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "parity", parity)
        if self.fsr <= 0:
            raise ConfigurationError("fsr must be positive")
        if abs(self.t0 * self.fsr - math.pi) > 1e-12 * math.pi:
            raise ConfigurationError("t0 * fsr must equal pi exactly")
        if delta.ndim != 1 or len(delta) < 1 or parity.shape != delta.shape:
            raise ConfigurationError("delta and parity must be matching 1-d arrays")
        spacing = np.diff(delta)
        if len(delta) > 1:
            if np.any(spacing <= 0):
                raise ConfigurationError("detunings must be strictly increasing")
            if np.any(np.abs(spacing - self.fsr) > ALIGN_RTOL * self.fsr):
                raise ConfigurationError("adjacent detunings must differ by fsr")
            if np.any(parity[1:] * parity[:-1] != -1):
                raise ConfigurationError("parities must alternate between modes")
        if np.any(np.abs(parity) != 1):
            raise ConfigurationError("parities must be +-1")
        ident = np.exp(1j * (delta * self.t0 + self.omega0_phase))
        if np.max(np.abs(ident - parity)) > 1e-9:
            raise ConfigurationError(
                "parity identity exp(i*delta_k*t0) = parity_k*exp(-i*omega0_phase) "
                "violated; check omega0_phase"
            )

    @property
    def n_modes(self) -> int:
        return len(self.delta)

    @property
    def delta_over_fsr(self) -> np.ndarray:
        return self.delta / self.fsr


@dataclass(frozen=True)
class PulseParams:
    """Sender pulse family.

    kind "offset_sine" is g*(1 + sin((t - shift)/scale)); "constant" is g.
    Coupling is given relative to the free spectral range.
    """

    g_over_fsr: float
    kind: str = "offset_sine"
    shift: float = 5.0
    scale: float = 10.0 * math.pi

    def __post_init__(self):
        if self.kind not in ("offset_sine", "constant"):
            raise ConfigurationError(f"unknown pulse kind {self.kind!r}")
        if self.g_over_fsr < 0:
            raise ConfigurationError("coupling must be non-negative")

    def sample(self, fsr: float, times: np.ndarray) -> np.ndarray:
        g = self.g_over_fsr * fsr
        if self.kind == "constant":
            return np.full(np.shape(times), g, dtype=complex)
        return (g * (1.0 + np.sin((np.asarray(times) - self.shift) / self.scale))
                ).astype(complex)


@dataclass(frozen=True)
class Scenario:
    """A channel plus the grid and sender-pulse family used to drive it."""

    channel: ChannelSpec
    case_label: CaseLabel
    grid: TimeGrid
    ga_params: PulseParams

    def __post_init__(self):
        # guarantees the memory window [t - t0, t] lands on grid nodes
        self.grid.aligned_steps(self.channel.t0)

    @property
    def window_steps(self) -> int:
        return self.grid.aligned_steps(self.channel.t0)

    def sender_samples(self, grid: TimeGrid | None = None) -> np.ndarray:
        g = grid if grid is not None else self.grid
        return self.ga_params.sample(self.channel.fsr, g.times())


def kernel_eval(spec: ChannelSpec, dt) -> complex | np.ndarray:
    """Memory kernel K(dt) = sum_k exp(-i*delta_k*dt).

    Accepts a scalar offset or an array of offsets. Hermitian in the offset:
    K(-dt) = conj(K(dt)). Real to round-off for detuning sets symmetric
    about zero.
    """
    dt_arr = np.asarray(dt, dtype=float)
    out = np.exp(-1j * np.multiply.outer(spec.delta, dt_arr)).sum(axis=0)
    return complex(out) if np.isscalar(dt) or dt_arr.ndim == 0 else out


# default grid steps quoted for the two demonstration cases
_CASE_DT = {CaseLabel.MIDPOINT: 0.002, CaseLabel.RESONANT: 0.001}
# phase conventions that make the parity identity hold with +-1 parities
_CASE_PHASE = {CaseLabel.MIDPOINT: 0.5 * math.pi, CaseLabel.RESONANT: 0.0}


def build_case(case_label: CaseLabel | str, modes_per_side: int,
               fsr_scale: float = 1.0, *, g_over_fsr: float = 0.3,
               pulse_kind: str = "offset_sine", dt: float | None = None,
               t_f_max: float = 40.0) -> Scenario:
    """Construct a midpoint or resonant scenario.

    modes_per_side counts modes on each side of the qubit frequency, so the
    midpoint case has 2*modes_per_side modes and the resonant case one more.
    fsr_scale rescales the canonical spacing (time stays in units of
    2*pi/canonical fsr).
    """
    case = CaseLabel(case_label)
    if modes_per_side < 1:
        raise ConfigurationError("modes_per_side must be at least 1")
    fsr = CANONICAL_FSR * fsr_scale
    t0 = math.pi / fsr
    if case is CaseLabel.MIDPOINT:
        offsets = np.arange(-modes_per_side + 0.5, modes_per_side + 0.5)
    else:
        offsets = np.arange(-modes_per_side, modes_per_side + 1.0)
    phase = _CASE_PHASE[case]
    delta = offsets * fsr
    parity_c = np.exp(1j * (delta * t0 + phase))
    parity = np.round(parity_c.real).astype(int)
    spec = ChannelSpec(delta=delta, parity=parity, fsr=fsr, t0=t0,
                       omega0_phase=phase)
    step = dt if dt is not None else _CASE_DT[case] / fsr_scale
    n_steps = int(round(t_f_max / step))
    grid = TimeGrid(0.0, step, n_steps)
    params = PulseParams(g_over_fsr=g_over_fsr, kind=pulse_kind)
    return Scenario(channel=spec, case_label=case, grid=grid, ga_params=params)
