"""Bounded-memory Volterra integro-differential solver.

Integrates equations of the form

    x'(t) = sign * f(t) * integral_{max(t - t0, t_i)}^{t} K(t - tau) h(tau) x(tau) dtau

on a uniform grid whose step divides the memory window t0 exactly. The
quadrature is the composite trapezoid over the grid-aligned window and the
stepping is an explicit second-order predictor-corrector (Heun): predict the
next value with the current window integral, re-evaluate the integral with
the predicted endpoint, correct. The scheme is globally second order.

The decay direction (sender) uses f = drive, h = conj(drive), sign = -1 and
the trailing window [t - t0, t]. The growth direction (receiver, window
[t, t + t0]) is solved by time reversal, which maps it onto the decay form
with the conjugated kernel; its initial value is therefore given at the end
of the grid and the equation is integrated backwards.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelSpec, Scenario, kernel_eval
from .errors import ConfigurationError, NumericalFailureError
from .grids import SampledSignal, TimeGrid

_FINITE_CHECK_STRIDE = 512


def kernel_window(spec: ChannelSpec, grid: TimeGrid) -> np.ndarray:
    """K(j*dt) for j = 0..m where m*dt = t0."""
    m = grid.aligned_steps(spec.t0)
    return kernel_eval(spec, grid.dt * np.arange(m + 1))


def window_integral(kernel_samples: np.ndarray, q: np.ndarray, i: int,
                    dt: float) -> complex:
    """Trapezoid of K(t_i - tau) q(tau) over the aligned window ending at node i.

    kernel_samples holds K at offsets 0..m; q holds the integrand factor
    h(tau) x(tau) at grid nodes 0..i. History before the grid start
    contributes zero, so the window is clipped at node 0.
    """
    m = len(kernel_samples) - 1
    span = min(m, i)
    if span == 0:
        return 0.0 + 0.0j
    w = kernel_samples[: span + 1].copy()
    w[0] *= 0.5
    w[span] *= 0.5
    return dt * np.dot(w, q[i - span: i + 1][::-1])


def _raise_first_nonfinite(values: np.ndarray, grid: TimeGrid):
    bad = np.nonzero(~np.isfinite(values))[0]
    t_bad = grid.t_start + grid.dt * int(bad[0])
    raise NumericalFailureError(
        f"non-finite amplitude first produced at t = {t_bad:.6g}", time=t_bad
    )


def _solve_decay_form(kernel_samples: np.ndarray, f: np.ndarray, h: np.ndarray,
                      grid: TimeGrid, init: complex) -> np.ndarray:
    """March ẋ = -f(t) * window-trapezoid(K, h*x) with Heun steps."""
    n = grid.n_steps
    dt = grid.dt
    m = len(kernel_samples) - 1
    x = np.empty(n + 1, dtype=complex)
    q = np.empty(n + 1, dtype=complex)
    x[0] = init
    q[0] = h[0] * init
    # edge-halved kernel weights for the full window, reused once i >= m
    w_full = kernel_samples.copy()
    w_full[0] *= 0.5
    w_full[m] *= 0.5

    def integral(i):
        if i >= m:
            return dt * np.dot(w_full, q[i - m: i + 1][::-1])
        return window_integral(kernel_samples, q, i, dt)

    for i in range(n):
        f0 = -f[i] * integral(i)
        q[i + 1] = h[i + 1] * (x[i] + dt * f0)       # predictor endpoint
        f1 = -f[i + 1] * integral(i + 1)
        x[i + 1] = x[i] + 0.5 * dt * (f0 + f1)
        q[i + 1] = h[i + 1] * x[i + 1]
        if i % _FINITE_CHECK_STRIDE == 0 and not np.isfinite(x[i + 1]):
            _raise_first_nonfinite(x[: i + 2], grid)
    if not np.all(np.isfinite(x)):
        _raise_first_nonfinite(x, grid)
    return x


def solve_windowed_ide(spec: ChannelSpec, drive: SampledSignal,
                       direction: str = "decay",
                       init: complex = 1.0) -> SampledSignal:
    """Solve the windowed-memory amplitude equation for one qubit.

    direction "decay" integrates the sender equation with the trailing
    window [t - t0, t] forward from init at the grid start. direction
    "growth" integrates the receiver equation with the leading window
    [t, t + t0] backward from init at the grid end; it is mapped onto the
    decay form by time reversal. Deterministic: identical inputs give
    bit-identical outputs.
    """
    grid = drive.grid
    kernel_samples = kernel_window(spec, grid)   # validates t0/dt alignment
    g = drive.values
    if direction == "decay":
        x = _solve_decay_form(kernel_samples, g, np.conj(g), grid, init)
        return SampledSignal(grid, x)
    if direction == "growth":
        rev = g[::-1]
        x = _solve_decay_form(np.conj(kernel_samples), rev, np.conj(rev), grid, init)
        return SampledSignal(grid, x[::-1].copy())
    raise ConfigurationError(f"unknown direction {direction!r}")


@dataclass(frozen=True)
class RichardsonResult:
    """Self-convergence estimate from three step sizes."""

    order: float
    diffs: tuple
    degenerate: bool = False


def richardson_check(run, dts) -> RichardsonResult:
    """Estimate convergence order from solutions at three step sizes.

    run(dt) must return the solution sampled on nodes shared by all three
    grids; dts must decrease by a constant ratio. A refinement with zero
    differences (e.g. a trivially zero drive) is reported as degenerate.
    """
    dts = list(dts)
    if len(dts) != 3 or not dts[0] > dts[1] > dts[2] > 0:
        raise ConfigurationError("richardson_check needs three decreasing steps")
    ratio = dts[0] / dts[1]
    if abs(dts[1] / dts[2] - ratio) > 1e-12 * ratio:
        raise ConfigurationError("step sizes must decrease by a constant ratio")
    sols = [np.asarray(run(dt)) for dt in dts]
    if sols[0].shape != sols[1].shape or sols[1].shape != sols[2].shape:
        raise ConfigurationError("run(dt) must sample solutions on shared nodes")
    d01 = float(np.max(np.abs(sols[0] - sols[1])))
    d12 = float(np.max(np.abs(sols[1] - sols[2])))
    if d01 == 0.0 and d12 == 0.0:
        return RichardsonResult(order=float("nan"), diffs=(d01, d12), degenerate=True)
    if d12 == 0.0 or not np.isfinite(d01 / d12):
        raise NumericalFailureError("refinement differences are not usable")
    order = float(np.log(d01 / d12) / np.log(ratio))
    if order < 0:
        raise NumericalFailureError(
            f"refinement diverges: differences {d01:.3e} -> {d12:.3e}"
        )
    return RichardsonResult(order=order, diffs=(d01, d12))


def ide_self_convergence(scenario: Scenario, dts=None,
                         span: float | None = None) -> RichardsonResult:
    """Richardson check of the sender solve on a scenario.

    The sender pulse family is resampled analytically at each step size, so
    the runs share the same continuum problem.
    """
    base = scenario.grid.dt
    if dts is None:
        dts = (2 * base, base, base / 2)
    length = span if span is not None else min(scenario.grid.t_end, 8.0)

    def run(dt):
        n = int(round(length / dt))
        grid = TimeGrid(scenario.grid.t_start, dt, n)
        drive = SampledSignal(grid, scenario.sender_samples(grid))
        sol = solve_windowed_ide(scenario.channel, drive)
        stride = max(int(round(dts[0] / dt)), 1)
        return sol.values[::stride]

    return richardson_check(run, dts)
