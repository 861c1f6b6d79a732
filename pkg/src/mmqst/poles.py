"""Poles of the Laplace representation of the sender decay.

For a constant coupling g the sender amplitude is the inverse Laplace
transform of 1/f(s) with the entire characteristic function

    f(s) = s + g^2 sum_k (1 - exp(-(s + i d_k) pi)) / (s + i d_k),

written here in units of the free spectral range (s and the detunings d_k
in units of fsr, the memory window contributing the factor pi = t0 * fsr).
Roots are located by argument-principle counting on rectangles, subdividing
until each rectangle isolates one root, then polished with Newton's method
using the analytic derivative.

The single-qubit (full-history) comparison drops the exponential memory
cutoff; its characteristic equation z - g^2 sum_k 1/(z + d_k) = 0 has only
real roots z (purely imaginary poles s = i z), found by bracketing between
the simple poles at -d_k.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .channel import ChannelSpec
from .errors import ConfigurationError, UnresolvedRegionError

_PI = math.pi
_SERIES_RADIUS = 1e-4      # switch to the series of (1-exp(-pi w))/w below this |w|*pi
RESIDUAL_LIMIT = 1e-10
DEDUP_TOL = 1e-8


@dataclass(frozen=True)
class SearchBox:
    """Complex rectangle [re_min, re_max] x [im_min, im_max] in fsr units."""

    re_min: float
    re_max: float
    im_min: float
    im_max: float

    def __post_init__(self):
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise ConfigurationError("degenerate search box")

    def contains(self, z: complex, pad: float = 0.0) -> bool:
        return (self.re_min - pad <= z.real <= self.re_max + pad
                and self.im_min - pad <= z.imag <= self.im_max + pad)

    def split(self, frac: float = 0.5):
        if (self.re_max - self.re_min) >= (self.im_max - self.im_min):
            mid = self.re_min + frac * (self.re_max - self.re_min)
            return (SearchBox(self.re_min, mid, self.im_min, self.im_max),
                    SearchBox(mid, self.re_max, self.im_min, self.im_max))
        mid = self.im_min + frac * (self.im_max - self.im_min)
        return (SearchBox(self.re_min, self.re_max, self.im_min, mid),
                SearchBox(self.re_min, self.re_max, mid, self.im_max))

    @property
    def diameter(self) -> float:
        return math.hypot(self.re_max - self.re_min, self.im_max - self.im_min)


@dataclass
class PoleSet:
    """Roots of the characteristic function inside the searched box."""

    poles: np.ndarray = field(repr=False)
    residuals: np.ndarray = field(repr=False)
    search_box: SearchBox
    g_over_fsr: float

    @property
    def slowest_decay(self) -> float:
        if len(self.poles) == 0:
            return float("nan")
        return float(np.max(self.poles.real))


def default_search_box(spec: ChannelSpec) -> SearchBox:
    d = spec.delta_over_fsr
    return SearchBox(-2.0, 0.5, float(d.min()) - 2.0, float(d.max()) + 2.0)


def _phi(w):
    """(1 - exp(-pi w)) / w with the removable singularity handled by series."""
    w = np.asarray(w, dtype=complex)
    small = np.abs(w) * _PI < _SERIES_RADIUS
    safe = np.where(small, 1.0, w)
    exact = (1.0 - np.exp(-_PI * safe)) / safe
    series = _PI - (w * _PI**2) / 2.0 + (w**2 * _PI**3) / 6.0
    return np.where(small, series, exact)


def _phi_prime(w):
    w = np.asarray(w, dtype=complex)
    small = np.abs(w) * _PI < _SERIES_RADIUS
    safe = np.where(small, 1.0, w)
    e = np.exp(-_PI * safe)
    exact = (e * (1.0 + _PI * safe) - 1.0) / safe**2
    series = -_PI**2 / 2.0 + (w * _PI**3) / 3.0 - (w**2 * _PI**4) / 8.0
    return np.where(small, series, exact)


def characteristic_fn(spec: ChannelSpec, g_over_fsr: float, s):
    """f(s) in fsr units; s may be a scalar or an array."""
    s_arr = np.asarray(s, dtype=complex)
    d = spec.delta_over_fsr
    w = s_arr[..., None] + 1j * d
    out = s_arr + g_over_fsr**2 * _phi(w).sum(axis=-1)
    return complex(out) if np.isscalar(s) or s_arr.ndim == 0 else out


def characteristic_derivative(spec: ChannelSpec, g_over_fsr: float, s):
    s_arr = np.asarray(s, dtype=complex)
    d = spec.delta_over_fsr
    w = s_arr[..., None] + 1j * d
    out = 1.0 + g_over_fsr**2 * _phi_prime(w).sum(axis=-1)
    return complex(out) if np.isscalar(s) or s_arr.ndim == 0 else out


def _boundary_winding(spec, g, box, base_density=96, max_refine=14):
    """Winding number of f around the box boundary by adaptive phase tracking."""
    corners = [complex(box.re_min, box.im_min), complex(box.re_max, box.im_min),
               complex(box.re_max, box.im_max), complex(box.re_min, box.im_max)]
    pts = []
    for a, b in zip(corners, corners[1:] + corners[:1]):
        n = max(8, int(base_density * abs(b - a) / max(box.diameter, 1e-12)))
        pts.append(a + (b - a) * np.arange(n) / n)
    z = np.concatenate(pts)
    vals = characteristic_fn(spec, g, z)
    for _ in range(max_refine):
        if np.min(np.abs(vals)) < 1e-12:
            raise UnresolvedRegionError("root on or near the box boundary", box=box)
        dphi = np.angle(np.roll(vals, -1) / vals)
        ok = np.abs(dphi) < 0.5 * _PI
        if np.all(ok):
            return int(round(float(dphi.sum()) / (2.0 * _PI)))
        mid = z + (np.roll(z, -1) - z) * 0.5
        insert = np.nonzero(~ok)[0]
        z = np.insert(z, insert + 1, mid[insert])
        vals = characteristic_fn(spec, g, z)
    raise UnresolvedRegionError("boundary phase tracking did not converge", box=box)


def _newton(spec, g, z0, tol=1e-13, max_iter=80):
    z = complex(z0)
    for _ in range(max_iter):
        fz = characteristic_fn(spec, g, z)
        if abs(fz) < tol:
            return z
        dz = fz / characteristic_derivative(spec, g, z)
        if not np.isfinite(dz):
            return None
        z = z - dz
        if abs(dz) < 1e-15 * max(1.0, abs(z)):
            break
    return z if abs(characteristic_fn(spec, g, z)) < tol else None


def find_poles(spec: ChannelSpec, g_over_fsr: float,
               search_box: SearchBox | None = None, *,
               min_box: float = 1e-6, max_depth: int = 60) -> PoleSet:
    """All roots of the characteristic function inside the box.

    Counts roots by the argument principle, subdivides rectangles until each
    holds at most one root, polishes with Newton, and cross-checks the total
    count against the top-level winding number.
    """
    box = search_box if search_box is not None else default_search_box(spec)
    # nudge the boundary off simple symmetry lines where roots might sit
    eps = 1e-7
    box = SearchBox(box.re_min - eps, box.re_max + 2 * eps,
                    box.im_min - 3 * eps, box.im_max + 5 * eps)
    total = _boundary_winding(spec, g_over_fsr, box)
    roots: list[complex] = []

    def hunt(b: SearchBox, count: int, depth: int):
        if count == 0:
            return
        if count == 1 or b.diameter < 10 * min_box:
            seeds = [complex(0.5 * (b.re_min + b.re_max), 0.5 * (b.im_min + b.im_max)),
                     complex(0.7 * b.re_min + 0.3 * b.re_max, 0.6 * b.im_min + 0.4 * b.im_max),
                     complex(0.3 * b.re_min + 0.7 * b.re_max, 0.4 * b.im_min + 0.6 * b.im_max)]
            for seed in seeds:
                z = _newton(spec, g_over_fsr, seed)
                if z is not None and b.contains(z, pad=1e-9) and count == 1:
                    roots.append(z)
                    return
            if count == 1 and b.diameter < min_box:
                raise UnresolvedRegionError("Newton failed in an isolated box", box=b)
        if depth >= max_depth or b.diameter < min_box:
            raise UnresolvedRegionError(
                f"could not isolate {count} roots in a minimal box", box=b)
        # split lines can graze a root; retry with offset fractions until the
        # sub-counts are trackable and consistent
        for frac in (0.5, 0.537814, 0.462901, 0.573123, 0.418237):
            try:
                subs = b.split(frac)
                counts = [_boundary_winding(spec, g_over_fsr, sub) for sub in subs]
            except UnresolvedRegionError:
                continue
            if sum(counts) != count:
                continue
            for sub, c in zip(subs, counts):
                hunt(sub, c, depth + 1)
            return
        raise UnresolvedRegionError(
            f"could not split a box holding {count} roots", box=b)

    hunt(box, total, 0)

    uniq: list[complex] = []
    for z in sorted(roots, key=lambda v: (v.imag, v.real)):
        if all(abs(z - u) > DEDUP_TOL for u in uniq):
            uniq.append(z)
    poles = np.array(uniq, dtype=complex)
    if len(poles) != total:
        raise UnresolvedRegionError(
            f"found {len(poles)} distinct roots but the boundary winding is {total}",
            box=box)
    residuals = np.abs(characteristic_fn(spec, g_over_fsr, poles)) if len(poles) else np.empty(0)
    if len(residuals) and float(residuals.max()) > RESIDUAL_LIMIT:
        raise UnresolvedRegionError(
            f"polished root residual {residuals.max():.2e} exceeds {RESIDUAL_LIMIT}",
            box=box)
    return PoleSet(poles=poles, residuals=residuals, search_box=box,
                   g_over_fsr=g_over_fsr)


def alpha_from_poles(spec: ChannelSpec, poles: np.ndarray, g_over_fsr: float,
                     times: np.ndarray) -> np.ndarray:
    """Residue-sum reconstruction of the constant-coupling sender amplitude.

    alpha(t) = sum_j exp(s_j * fsr * t) / f'(s_j); valid once the poles
    outside the searched box have decayed.
    """
    weights = 1.0 / characteristic_derivative(spec, g_over_fsr, poles)
    phases = np.exp(np.multiply.outer(np.asarray(times) * spec.fsr, poles))
    return phases @ weights


def single_qubit_poles(spec: ChannelSpec, g_over_fsr: float) -> np.ndarray:
    """Real roots z of the full-history (single-qubit) characteristic equation.

    The function z - g^2 sum_k 1/(z + d_k) increases monotonically between
    consecutive simple poles at -d_k, so there are exactly M + 1 real roots
    interlacing them; the Laplace poles are s = i z, all on the imaginary
    axis.
    """
    if g_over_fsr <= 0:
        raise ConfigurationError("coupling must be positive")
    d = np.sort(spec.delta_over_fsr)
    g2 = g_over_fsr**2

    def h(z):
        return z - g2 * np.sum(1.0 / (z + d))

    pole_pos = np.sort(-d)          # ascending pole locations
    gap = max(float(np.min(np.diff(pole_pos))) if len(pole_pos) > 1 else 1.0, 1e-12)
    roots = []
    shrink = 1e-11 * max(1.0, float(np.max(np.abs(pole_pos))))
    for a, b in zip(pole_pos[:-1], pole_pos[1:]):
        roots.append(brentq(h, a + shrink, b - shrink, xtol=1e-14, rtol=8.9e-16))
    # outer roots: expand away from the extreme poles until the sign flips
    for sgn, p in ((-1.0, pole_pos[0]), (1.0, pole_pos[-1])):
        step = max(g_over_fsr, 0.5 * gap)
        a = p + sgn * shrink
        b = p + sgn * step
        for _ in range(200):
            if h(a) * h(b) < 0:
                break
            b = p + sgn * (abs(b - p) * 2.0)
        else:
            raise UnresolvedRegionError("no sign change bracketing an outer root")
        lo, hi = (a, b) if a < b else (b, a)
        roots.append(brentq(h, lo, hi, xtol=1e-14, rtol=8.9e-16))
    out = np.sort(np.array(roots))
    if len(out) != spec.n_modes + 1:
        raise UnresolvedRegionError(
            f"expected {spec.n_modes + 1} real roots, found {len(out)}")
    return out
