import math

import numpy as np
import pytest

from mmqst import (ChannelSpec, SampledSignal, SearchBox, TimeGrid,
                   alpha_from_poles, build_case, characteristic_derivative,
                   characteristic_fn, find_poles, single_qubit_poles,
                   solve_windowed_ide)


def _single_mode_spec():
    return ChannelSpec(delta=np.array([0.0]), parity=np.array([1]),
                       fsr=2 * math.pi, t0=0.5, omega0_phase=0.0)


def test_zero_coupling_reduces_to_identity(rng):
    spec = build_case("resonant", 3).channel
    s = rng.normal(size=10) + 1j * rng.normal(size=10)
    assert np.allclose(characteristic_fn(spec, 0.0, s), s)


def test_removable_singularity_is_finite():
    spec = build_case("resonant", 3).channel
    for d in spec.delta_over_fsr:
        val = characteristic_fn(spec, 0.3, -1j * d)
        assert np.isfinite(val.real) and np.isfinite(val.imag)


def test_series_switchover_is_smooth():
    spec = build_case("resonant", 3).channel
    r = 1e-4 / math.pi   # |w|*pi at the switch radius
    for eps in (0.999, 1.001):
        s_lo = -1j * spec.delta_over_fsr[0] + r * eps
        s_hi = -1j * spec.delta_over_fsr[0] + r * 1.002 * eps
        diff = abs(characteristic_fn(spec, 0.3, s_lo)
                   - characteristic_fn(spec, 0.3, s_hi))
        assert diff < 1e-6


def test_conjugate_symmetry_for_symmetric_spectrum(rng):
    # direct-evaluation oracle: f(conj(s)) equals conj(f(s))
    spec = build_case("midpoint", 3).channel
    s = rng.normal(size=12) + 1j * rng.normal(size=12)
    assert np.allclose(characteristic_fn(spec, 0.25, np.conj(s)),
                       np.conj(characteristic_fn(spec, 0.25, s)), atol=1e-12)


def test_derivative_against_finite_difference():
    spec = build_case("midpoint", 3).channel
    h = 1e-6
    for s in (0.1 + 0.3j, -0.5 - 1.2j, -0.02 + 0.0j):
        fd = (characteristic_fn(spec, 0.3, s + h)
              - characteristic_fn(spec, 0.3, s - h)) / (2 * h)
        assert characteristic_derivative(spec, 0.3, s) == pytest.approx(fd, rel=1e-6)


def test_small_coupling_pole_matches_perturbation():
    spec = build_case("resonant", 3).channel
    poles = find_poles(spec, 0.05)
    predicted = -(0.05**2) * math.pi   # -g^2 t0 in fsr units
    assert poles.slowest_decay == pytest.approx(predicted, rel=0.1)


def test_all_poles_strictly_decaying():
    for case in ("midpoint", "resonant"):
        spec = build_case(case, 3).channel
        poles = find_poles(spec, 0.3)
        assert len(poles.poles) > 0
        assert np.all(poles.poles.real < -1e-9)
        assert np.max(poles.residuals) < 1e-10


def test_poles_conjugate_paired():
    spec = build_case("midpoint", 3).channel
    poles = find_poles(spec, 0.35).poles
    for z in poles:
        assert np.min(np.abs(poles - np.conj(z))) < 1e-8


def test_empty_box_gives_empty_set():
    spec = build_case("midpoint", 3).channel
    poles = find_poles(spec, 0.3, SearchBox(0.05, 0.4, -0.3, 0.3))
    assert len(poles.poles) == 0


def test_time_domain_consistency_with_ide():
    spec = build_case("resonant", 3).channel
    g = 0.3
    poles = find_poles(spec, g)
    rate = abs(poles.slowest_decay) * spec.fsr
    t_lo, t_hi = 3.0 / rate, 6.0 / rate
    grid = TimeGrid(0.0, 0.002, int(round(t_hi / 0.002)))
    drive = SampledSignal(grid, np.full(grid.n_steps + 1, g * spec.fsr,
                                        dtype=complex))
    sol = solve_windowed_ide(spec, drive)
    t = grid.times()
    sel = t >= t_lo
    recon = alpha_from_poles(spec, poles.poles, g, t[sel])
    rel = np.abs(recon - sol.values[sel]) / np.abs(sol.values[sel])
    assert np.max(rel) < 0.05


def test_single_qubit_single_mode_rabi():
    assert np.allclose(single_qubit_poles(_single_mode_spec(), 0.25),
                       [-0.25, 0.25], atol=1e-12)


def test_single_qubit_count_and_interlacing():
    spec = build_case("resonant", 3).channel
    roots = single_qubit_poles(spec, 0.3)
    assert len(roots) == spec.n_modes + 1
    pole_pos = np.sort(-spec.delta_over_fsr)
    assert all(roots[i] < pole_pos[i] < roots[i + 1]
               for i in range(len(pole_pos)))


def test_single_qubit_small_coupling_limit():
    spec = build_case("resonant", 3).channel
    roots = single_qubit_poles(spec, 1e-3)
    targets = np.sort(np.concatenate([-spec.delta_over_fsr, [0.0]]))
    # double root at zero for the resonant mode splits by O(g)
    assert np.max(np.abs(np.sort(roots) - targets)) < 5e-3


def test_windowed_vs_full_history_contrast():
    """The finite memory window pushes every pole strictly into the left half
    plane while the full-history equation keeps them all on the axis."""
    for case in ("midpoint", "resonant"):
        spec = build_case(case, 3).channel
        windowed = find_poles(spec, 0.3)
        assert np.all(np.abs(windowed.poles.real) > 1e-9)
        full = single_qubit_poles(spec, 0.3)
        s = 1j * full
        assert np.max(np.abs(s.real)) == 0.0
