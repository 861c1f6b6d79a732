"""Receiver-pulse synthesis from the solved sender trajectory.

Given the sender pulse gA and its amplitude alpha, the chain computes

    x = conj(gA) * alpha
    y(t) = integral_{t}^{t+t0} K(t - tau) x(tau) dtau
    d|beta|^2/dt = 2 Re[conj(x) y]        (receiver magnitude)
    |beta|^2 d(arg beta)/dt = Im[conj(x) y]  (receiver phase)
    gB = -conj(x) / conj(beta)

so that the dark-state residual conj(gA)*alpha + conj(gB)*beta vanishes on
every node where the division is performed.

The receiver amplitude grows like sqrt(t) out of zero whenever the sender
pulse does not itself ramp up from zero, which makes gB integrably singular
at the start. The stored first sample is therefore chosen so the trapezoid
reading of the first cell reproduces the exact pulse area there, and the
pulse pair carries a launch-cell model (x, d|beta|^2/dt, |beta|^2, phase on
the synthesis grid) from which consumers can evaluate the in-cell pulse
shape exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .channel import ChannelSpec, Scenario
from .errors import (ConfigurationError, InconsistentScenarioError,
                     SynthesisRefusedError)
from .grids import SampledSignal, TimeGrid, cumulative_trapezoid
from .ide import kernel_window, solve_windowed_ide

DEFAULT_CLAMP_EPS = 1e-6
DEFAULT_G_MAX_OVER_FSR = 50.0
DEFAULT_ALPHA_CUTOFF = 1e-8
DEFAULT_REFINE = 8

_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(48)


@dataclass
class LaunchModel:
    """In-cell model of the receiver launch on the synthesis grid.

    Piecewise-linear x and d|beta|^2/dt between samples give a C1 in-cell
    |beta|^2 that matches the cumulative trapezoid on the nodes, so the
    modeled pulse -conj(x)/conj(beta) agrees with the stored samples at the
    nodes and resolves the sqrt(t) launch between them.
    """

    dt: float
    x: np.ndarray = field(repr=False)
    dmag2: np.ndarray = field(repr=False)
    mag2: np.ndarray = field(repr=False)
    phase: np.ndarray = field(repr=False)

    @property
    def span(self) -> float:
        return self.dt * (len(self.x) - 1)

    def _cell(self, tau: float):
        j = min(int(tau / self.dt), len(self.x) - 2)
        return j, tau - j * self.dt

    def x_at(self, tau: float) -> complex:
        j, tp = self._cell(tau)
        w = tp / self.dt
        return self.x[j] * (1.0 - w) + self.x[j + 1] * w

    def mag2_at(self, tau: float) -> float:
        j, tp = self._cell(tau)
        d0, d1 = self.dmag2[j], self.dmag2[j + 1]
        return max(self.mag2[j] + d0 * tp + (d1 - d0) * tp * tp / (2 * self.dt), 0.0)

    def beta_at(self, tau: float) -> complex:
        j, tp = self._cell(tau)
        w = tp / self.dt
        ph = self.phase[j] * (1.0 - w) + self.phase[j + 1] * w
        return math.sqrt(self.mag2_at(tau)) * np.exp(1j * ph)

    def gB_at(self, tau: float) -> complex:
        m2 = self.mag2_at(tau)
        if m2 <= 0.0:
            return 0.0 + 0.0j
        return -np.conj(self.x_at(tau)) / np.conj(self.beta_at(tau))

    def gB_times_2u(self, u: float) -> complex:
        """2u * gB(u^2); finite at u = 0 even through the sqrt(t) launch."""
        tau = u * u
        if tau >= self.dt:
            return 2.0 * u * self.gB_at(tau)
        # first cell: |beta| = u * sqrt(d0 + (d1-d0) u^2/(2 dt)) cancels the 1/u
        d0, d1 = self.dmag2[0], self.dmag2[1]
        den_sq = d0 + (d1 - d0) * tau / (2 * self.dt)
        if den_sq <= 0.0:
            return 2.0 * u * self.gB_at(tau)
        w = tau / self.dt
        ph = self.phase[0] * (1.0 - w) + self.phase[1] * w
        return -2.0 * np.conj(self.x_at(tau)) / math.sqrt(den_sq) * np.exp(1j * ph)

    def pulse_area(self, upto: float) -> complex:
        """integral of gB over [0, upto] by sqrt-substituted Gauss quadrature."""
        umax = math.sqrt(min(upto, self.span))
        u = 0.5 * umax * (_GAUSS_NODES + 1.0)
        w = 0.5 * umax * _GAUSS_WEIGHTS
        return complex(sum(wk * self.gB_times_2u(uk) for uk, wk in zip(u, w)))


@dataclass
class SynthesisTrace:
    """Intermediate chain quantities on the synthesis output grid."""

    x: SampledSignal
    y: SampledSignal
    beta_mag2: np.ndarray = field(repr=False)
    beta_phase: np.ndarray = field(repr=False)

    def beta(self) -> np.ndarray:
        return np.sqrt(self.beta_mag2) * np.exp(1j * self.beta_phase)


@dataclass
class PulsePair:
    """Sender pulse and synthesized receiver pulse on a shared grid.

    Both signals are zero-extended outside [t_i, t_f]. capped_steps counts
    nodes whose magnitude was capped at g_max.
    """

    gA: SampledSignal
    gB_tilde: SampledSignal
    t_f: float
    clamp_eps: float
    g_max: float
    capped_steps: int = 0
    launch: LaunchModel | None = None

    @property
    def capped_span(self) -> float:
        return self.capped_steps * self.gA.grid.dt


def _chain_quantities(spec: ChannelSpec, gA: np.ndarray, alpha: np.ndarray,
                      grid: TimeGrid, clamp_eps: float):
    m = grid.aligned_steps(spec.t0)
    kern = kernel_window(spec, grid)
    x = np.conj(gA) * alpha
    xpad = np.concatenate([x, np.zeros(m, dtype=complex)])
    weights = np.ones(m + 1)
    weights[0] = weights[m] = 0.5
    y = sliding_window_view(xpad, m + 1) @ (weights * np.conj(kern)) * grid.dt
    xy = np.conj(x) * y
    dmag2 = 2.0 * xy.real
    mag2 = cumulative_trapezoid(dmag2, grid.dt)
    scale = float(np.max(mag2)) if np.max(mag2) > 0 else 1.0
    if float(np.min(mag2)) < -1e-10 * scale:
        t_bad = grid.t_start + grid.dt * int(np.argmin(mag2))
        raise InconsistentScenarioError(
            f"receiver population decreases at t = {t_bad:.6g}; "
            "the scenario is not consistent with a dark-state receiver"
        )
    mag2 = np.clip(mag2, 0.0, None)
    dphase = np.where(mag2 > clamp_eps**2, xy.imag / np.maximum(mag2, clamp_eps**2), 0.0)
    phase = cumulative_trapezoid(dphase, grid.dt)
    return x, y, dmag2, mag2, phase


def synthesize_receiver(alpha: SampledSignal, gA: SampledSignal,
                        spec: ChannelSpec, *,
                        clamp_eps: float = DEFAULT_CLAMP_EPS,
                        g_max: float | None = None,
                        alpha_cutoff: float = DEFAULT_ALPHA_CUTOFF,
                        t_f_round_to: int = 1):
    """Build the receiver pulse for a solved sender trajectory.

    Picks t_f as the first grid time with |alpha|^2 below alpha_cutoff
    (rounded up to a multiple of t_f_round_to steps), truncates the sender
    pulse to zero afterwards, and runs the synthesis chain. Raises
    SynthesisRefusedError when the sender never empties. A strictly zero
    drive trivially returns zero pulses.

    Returns (PulsePair, SynthesisTrace).
    """
    grid = alpha.grid
    if gA.grid != grid:
        raise ConfigurationError("alpha and gA must share one grid")
    if g_max is None:
        g_max = DEFAULT_G_MAX_OVER_FSR * spec.fsr
    ga = gA.values.copy()
    if not np.any(ga):
        zero = SampledSignal.zeros(grid)
        trace = SynthesisTrace(x=zero, y=SampledSignal.zeros(grid),
                               beta_mag2=np.zeros(len(ga)),
                               beta_phase=np.zeros(len(ga)))
        pair = PulsePair(gA=SampledSignal.zeros(grid), gB_tilde=zero,
                         t_f=grid.t_end, clamp_eps=clamp_eps, g_max=g_max)
        return pair, trace

    a2 = np.abs(alpha.values) ** 2
    below = np.nonzero(a2 < alpha_cutoff)[0]
    if len(below) == 0:
        raise SynthesisRefusedError(
            f"pulse does not empty the sender: min |alpha|^2 = {a2.min():.3e} "
            f"stays above the cutoff {alpha_cutoff:.1e}"
        )
    n_f = int(below[0])
    if t_f_round_to > 1:
        n_f = int(math.ceil(n_f / t_f_round_to)) * t_f_round_to
    if n_f >= grid.n_steps:
        raise SynthesisRefusedError("sender empties only at the last grid node; "
                                    "extend the grid beyond t_f")
    t_f = grid.t_start + n_f * grid.dt

    ga[n_f + 1:] = 0.0
    al = alpha.values.copy()
    al[n_f + 1:] = alpha.values[n_f]   # no drive, amplitude frozen

    x, y, dmag2, mag2, phase = _chain_quantities(spec, ga, al, grid, clamp_eps)

    beta = np.sqrt(mag2) * np.exp(1j * phase)
    mag = np.abs(beta)
    clamped_mag = np.maximum(mag, clamp_eps)
    gB = -np.conj(x) / (clamped_mag * np.exp(-1j * phase))

    launch_steps = min(grid.n_steps, 2 * grid.aligned_steps(spec.t0))
    launch = LaunchModel(dt=grid.dt, x=x[: launch_steps + 1].copy(),
                         dmag2=dmag2[: launch_steps + 1].copy(),
                         mag2=mag2[: launch_steps + 1].copy(),
                         phase=phase[: launch_steps + 1].copy())
    if mag[0] == 0.0 and dmag2[1] > 0.0:
        # area-matched first sample: the trapezoid over the first cell then
        # reproduces the exact integral of the singular launch pulse
        gB[0] = 2.0 * launch.pulse_area(grid.dt) / grid.dt - gB[1]

    over = np.abs(gB) > g_max
    if np.any(over):
        gB[over] *= g_max / np.abs(gB[over])
    capped = int(np.count_nonzero(over))

    pair = PulsePair(gA=SampledSignal(grid, ga), gB_tilde=SampledSignal(grid, gB),
                     t_f=t_f, clamp_eps=clamp_eps, g_max=g_max,
                     capped_steps=capped, launch=launch)
    trace = SynthesisTrace(x=SampledSignal(grid, x), y=SampledSignal(grid, y),
                           beta_mag2=mag2, beta_phase=phase)
    return pair, trace


@dataclass
class SynthesisRun:
    """Pipeline output: coarse-grid pulses, trace, and sender trajectory."""

    scenario: Scenario
    alpha: SampledSignal
    pair: PulsePair
    trace: SynthesisTrace
    refine: int

    @property
    def t_f(self) -> float:
        return self.pair.t_f

    def dark_state_residual(self) -> np.ndarray:
        """Dark-state residual on nodes where the receiver pulse is defined."""
        gB = self.pair.gB_tilde.values
        beta = self.trace.beta()
        return np.conj(self.pair.gA.values) * self.alpha.values + np.conj(gB) * beta


def run_synthesis(scenario: Scenario, *, refine: int = DEFAULT_REFINE,
                  clamp_eps: float = DEFAULT_CLAMP_EPS,
                  g_max_over_fsr: float = DEFAULT_G_MAX_OVER_FSR,
                  alpha_cutoff: float = DEFAULT_ALPHA_CUTOFF) -> SynthesisRun:
    """Solve the sender equation and synthesize the receiver pulse.

    The chain runs on an internally refined grid (scenario dt / refine) and
    the results are downsampled to the scenario grid; the launch model keeps
    the refined resolution. Refinement buys the accuracy budget of the
    validator comparison without changing the second-order scheme.
    """
    if refine < 1:
        raise ConfigurationError("refine must be >= 1")
    spec = scenario.channel
    fine = scenario.grid.refined(refine)
    drive = SampledSignal(fine, scenario.sender_samples(fine))
    if not np.any(drive.values):
        raise SynthesisRefusedError("zero sender pulse never empties the sender")
    alpha_f = solve_windowed_ide(spec, drive)
    pair_f, trace_f = synthesize_receiver(
        alpha_f, drive, spec, clamp_eps=clamp_eps,
        g_max=g_max_over_fsr * spec.fsr, alpha_cutoff=alpha_cutoff,
        t_f_round_to=refine)

    if refine == 1:
        return SynthesisRun(scenario, alpha_f, pair_f, trace_f, refine)

    gA_c = pair_f.gA.downsample(refine)
    gB_c = pair_f.gB_tilde.downsample(refine)
    launch = pair_f.launch
    if launch is not None and np.abs(trace_f.beta_mag2[0]) == 0.0 and launch.dmag2[1] > 0:
        # re-match the pulse area for the coarse first cell
        dt_c = gA_c.grid.dt
        gB_c.values[0] = 2.0 * launch.pulse_area(dt_c) / dt_c - gB_c.values[1]
        over = np.abs(gB_c.values) > pair_f.g_max
        gB_c.values[over] *= pair_f.g_max / np.abs(gB_c.values[over])
    capped_c = int(np.count_nonzero(
        np.abs(gB_c.values) >= pair_f.g_max * (1.0 - 1e-12)))
    pair = PulsePair(gA=gA_c, gB_tilde=gB_c, t_f=pair_f.t_f,
                     clamp_eps=pair_f.clamp_eps, g_max=pair_f.g_max,
                     capped_steps=capped_c, launch=launch)
    trace = SynthesisTrace(x=trace_f.x.downsample(refine),
                           y=trace_f.y.downsample(refine),
                           beta_mag2=trace_f.beta_mag2[::refine].copy(),
                           beta_phase=trace_f.beta_phase[::refine].copy())
    alpha_c = alpha_f.downsample(refine)
    return SynthesisRun(scenario, alpha_c, pair, trace, refine)


def reconstruct_channel_amplitudes(x: SampledSignal, spec: ChannelSpec,
                                   t: float) -> np.ndarray:
    """Mode amplitudes c_k(t) = -i * integral_{t-t0}^{t} x(tau) e^{i delta_k tau}.

    The window is clipped at the grid start (history before t_i is zero by
    the zero-extension convention).
    """
    grid = x.grid
    i = grid.index_of(t)
    m = grid.aligned_steps(spec.t0)
    j0 = max(0, i - m)
    if i == j0:
        return np.zeros(spec.n_modes, dtype=complex)
    tau = grid.t_start + grid.dt * np.arange(j0, i + 1)
    seg = x.values[j0: i + 1]
    w = np.ones(len(seg))
    w[0] = w[-1] = 0.5
    phases = np.exp(1j * np.multiply.outer(spec.delta, tau))
    return -1j * grid.dt * (phases @ (w * seg))


def terminal_residual(gA: SampledSignal, alpha: SampledSignal,
                      gB_tilde: SampledSignal, beta_tilde,
                      spec: ChannelSpec) -> np.ndarray:
    """|c_k| at protocol end from the dark-state residual quadrature.

    Integrates [conj(gA) alpha + conj(gB) beta] e^{i delta_k tau} over the
    grid. At the launch node the receiver product is a one-sided limit: the
    pulse diverges there while beta vanishes, and their product tends to
    -conj(gA) alpha, so the bracket is taken as zero at that single node.
    """
    grid = gA.grid
    beta = beta_tilde.values if isinstance(beta_tilde, SampledSignal) else np.asarray(beta_tilde)
    r = np.conj(gA.values) * alpha.values + np.conj(gB_tilde.values) * beta
    if beta[0] == 0.0 and gA.values[0] != 0.0:
        r = r.copy()
        r[0] = 0.0
    tau = grid.times()
    w = np.ones(len(tau))
    w[0] = w[-1] = 0.5
    phases = np.exp(1j * np.multiply.outer(spec.delta, tau))
    return np.abs(-1j * grid.dt * (phases @ (w * r)))
