"""Radial Plancherel quadrature and the piecewise decay-rate functions.

With the unitary Fourier convention, Sobolev-weighted norms reduce to
one-dimensional radial integrals

    || |D|^s f ||_{L2}^2 = omega_n * int_0^inf r^(2s+n-1) |f_hat(r)|^2 dr,

with ``omega_n = 2 pi^(n/2) / Gamma(n/2)`` the unit-sphere area.  The
integrator below subdivides panels adaptively around a fixed 15-point
Gauss-Legendre rule; callers integrating oscillatory kernels pass explicit
cap segments so that no panel ever spans more than a prescribed fraction
of the oscillation period (otherwise a coarse panel and its two halves
can alias to the same wrong answer and stop the refinement early).

The smooth frequency cut-offs of the underlying estimates are replaced by
sharp cuts at the zone boundaries; every rate is insensitive to that
choice, and the three zones then partition the radial domain exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InvalidParameterError, TruncationError
from .params import ModelParams
from .spectrum import DEFAULT_EPS_CUT, DEFAULT_N_CUT

_GL_X, _GL_W = np.polynomial.legendre.leggauss(15)

SPECTRUM_KINDS = ("gaussian", "gaussian_diff", "linear_gaussian", "tabulated")


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere in R^n."""
    if int(n) != n or n < 1:
        raise DomainError(f"dimension must be a positive integer, got {n}")
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


# ---------------------------------------------------------------------------
# data spectra
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DataSpectrum:
    """Radial Fourier spectrum of an initial datum.

    ``moment`` is the spectrum value at the origin; under the unitary
    transform the physical moment (spatial integral) of the datum is
    ``(2 pi)^(n/2)`` times this value, see :meth:`physical_moment`.
    """

    kind: str
    params: tuple
    moment: float = field(init=False)

    def __post_init__(self):
        if self.kind not in SPECTRUM_KINDS:
            raise InvalidParameterError(f"unknown spectrum kind {self.kind!r}")
        object.__setattr__(self, "moment", float(np.real(self(0.0))))

    @classmethod
    def gaussian(cls, amplitude: float = 1.0, width: float = 1.0) -> "DataSpectrum":
        if width <= 0:
            raise InvalidParameterError("gaussian width must be positive")
        return cls("gaussian", (float(amplitude), float(width)))

    @classmethod
    def gaussian_diff(cls, amplitude: float = 1.0, width_a: float = 1.0,
                      width_b: float = 2.0) -> "DataSpectrum":
        """Difference of two unit-height gaussians: vanishing moment."""
        if width_a <= 0 or width_b <= 0:
            raise InvalidParameterError("gaussian widths must be positive")
        return cls("gaussian_diff", (float(amplitude), float(width_a), float(width_b)))

    @classmethod
    def linear_gaussian(cls, amplitude: float = 1.0, width: float = 1.0) -> "DataSpectrum":
        """Spectrum vanishing linearly at the origin: r * exp(-w r^2)."""
        if width <= 0:
            raise InvalidParameterError("gaussian width must be positive")
        return cls("linear_gaussian", (float(amplitude), float(width)))

    @classmethod
    def tabulated(cls, r_nodes, values) -> "DataSpectrum":
        r_nodes = tuple(float(x) for x in r_nodes)
        values = tuple(float(x) for x in values)
        if len(r_nodes) != len(values) or len(r_nodes) < 2:
            raise InvalidParameterError("tabulated spectrum needs matching nodes/values")
        if any(b <= a for a, b in zip(r_nodes, r_nodes[1:])):
            raise InvalidParameterError("tabulated nodes must increase strictly")
        return cls("tabulated", (r_nodes, values))

    @classmethod
    def zero(cls) -> "DataSpectrum":
        return cls.gaussian(0.0, 1.0)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "gaussian":
            amp, w = self.params
            return amp * np.exp(-w * r * r)
        if self.kind == "gaussian_diff":
            amp, wa, wb = self.params
            return amp * (np.exp(-wa * r * r) - np.exp(-wb * r * r))
        if self.kind == "linear_gaussian":
            amp, w = self.params
            return amp * r * np.exp(-w * r * r)
        nodes, values = self.params
        return np.interp(r, nodes, values, left=values[0], right=0.0)

    @property
    def is_zero(self) -> bool:
        if self.kind == "tabulated":
            return all(v == 0.0 for v in self.params[1])
        return self.params[0] == 0.0

    def physical_moment(self, n: int) -> float:
        """Spatial integral of the datum: (2 pi)^(n/2) * spectrum(0)."""
        return (2.0 * math.pi) ** (n / 2.0) * self.moment

    def tail_radius(self) -> float:
        """Radius beyond which the squared spectrum is negligible (< ~1e-30)."""
        if self.kind == "tabulated":
            return self.params[0][-1]
        widths = self.params[1:]
        return math.sqrt(36.0 / (2.0 * min(widths))) + 1.0


# ---------------------------------------------------------------------------
# adaptive panel integration
# ---------------------------------------------------------------------------

def _initial_edges(a: float, b: float, breakpoints, cap_segments) -> np.ndarray:
    edges = {a, b}
    for x in breakpoints or ():
        if a < x < b:
            edges.add(float(x))
    for lo, hi, width in cap_segments or ():
        lo, hi = max(a, lo), min(b, hi)
        if hi <= lo or width <= 0:
            continue
        count = int(math.ceil((hi - lo) / width))
        edges.update(np.linspace(lo, hi, count + 1).tolist())
    return np.array(sorted(edges))


def adaptive_integral(f, a: float, b: float, *, rel_tol: float = 1e-9,
                      breakpoints=None, cap_segments=None, max_depth: int = 30,
                      max_panels: int = 60000) -> tuple[float, float]:
    """Globally adaptive panel quadrature of a vectorised integrand.

    Returns (value, error_estimate).  Panels are accepted once the
    15-point estimate and its two-half refinement agree locally; accepted
    contributions are summed left to right for reproducibility.

    ``cap_segments`` is an iterable of (lo, hi, width) triples bounding
    the initial panel width on oscillatory subintervals.
    """
    if not b > a:
        raise DomainError(f"empty integration range [{a}, {b}]")
    edges = _initial_edges(a, b, breakpoints, cap_segments)
    lefts = edges[:-1]
    rights = edges[1:]
    depths = np.zeros(lefts.shape, dtype=int)

    def gl_rows(lo, hi):
        """Per-row Gauss-Legendre estimates; one integrand call for all rows."""
        half = 0.5 * (hi - lo)
        nodes = 0.5 * (lo + hi)[:, None] + half[:, None] * _GL_X[None, :]
        vals = np.asarray(f(nodes.ravel()), dtype=float).reshape(nodes.shape)
        return (vals * _GL_W[None, :]).sum(axis=1) * half

    accepted_left: list[np.ndarray] = []
    accepted_val: list[np.ndarray] = []
    accepted_err: list[np.ndarray] = []
    total_ref = 0.0
    span = b - a
    n_panels = lefts.size
    while lefts.size:
        if n_panels > max_panels:
            raise TruncationError(
                f"adaptive quadrature exceeded {max_panels} panels")
        mids = 0.5 * (lefts + rights)
        chunks = gl_rows(np.concatenate([lefts, lefts, mids]),
                         np.concatenate([rights, mids, rights]))
        p = lefts.size
        coarse = chunks[:p]
        fine = chunks[p:2 * p] + chunks[2 * p:]
        err = np.abs(fine - coarse)
        total_ref = max(total_ref, float(np.abs(fine).sum()))
        frac = (rights - lefts) / span
        tol_local = rel_tol * np.maximum(np.abs(fine), total_ref * frac) + 1e-300
        done = (err <= tol_local) | (depths >= max_depth)
        accepted_left.append(lefts[done])
        accepted_val.append(fine[done])
        accepted_err.append(err[done])
        split = ~done
        lefts = np.concatenate([lefts[split], mids[split]])
        rights = np.concatenate([mids[split], rights[split]])
        depths = np.concatenate([depths[split] + 1, depths[split] + 1])
        n_panels += int(split.sum())

    left = np.concatenate(accepted_left)
    order = np.argsort(left, kind="stable")
    value = float(np.concatenate(accepted_val)[order].sum())
    err_total = float(np.concatenate(accepted_err)[order].sum())
    return value, err_total


# ---------------------------------------------------------------------------
# Sobolev norms
# ---------------------------------------------------------------------------

def _zone_ranges(zone, eps_cut, n_cut, r_max):
    if zone in (None, "all"):
        return [(0.0, eps_cut), (eps_cut, n_cut), (n_cut, r_max)]
    if zone == "small":
        return [(0.0, eps_cut)]
    if zone == "bounded":
        return [(eps_cut, n_cut)]
    if zone == "large":
        return [(n_cut, r_max)]
    raise DomainError(f"unknown zone filter {zone!r}")


def l2_norm_radial(spectrum, n: int, s: float = 0.0, zone_filter=None, *,
                   eps_cut: float = DEFAULT_EPS_CUT, n_cut: float = DEFAULT_N_CUT,
                   r_max: float | None = None, rel_tol: float = 1e-9,
                   cap_segments=None, full_output: bool = False):
    """Sobolev-weighted radial L2 norm of a spectrum.

    Parameters
    ----------
    spectrum:
        Vectorised callable r -> complex values (a :class:`DataSpectrum`
        works directly).
    n, s:
        Space dimension (positive integer) and Sobolev order (s >= 0).
    zone_filter:
        One of None/"all"/"small"/"bounded"/"large"; sharp cuts at the
        zone boundaries.  The "all" result is assembled from the three
        zone pieces, so zone contributions add up exactly.
    r_max:
        Upper integration radius for unbounded zones; defaults to the
        spectrum's ``tail_radius`` when available.

    Raises
    ------
    TruncationError
        If no tail radius is known and none is supplied, or the integrand
        has not decayed at the chosen radius.
    """
    if int(n) != n or n < 1:
        raise DomainError(f"dimension must be a positive integer, got {n}")
    if s < 0:
        raise DomainError(f"Sobolev order must be >= 0, got {s}")
    exponent = 2.0 * s + n - 1.0
    needs_tail = zone_filter in (None, "all", "large")
    if r_max is None:
        if needs_tail:
            if hasattr(spectrum, "tail_radius"):
                r_max = max(float(spectrum.tail_radius()), n_cut * 1.5)
            else:
                raise TruncationError(
                    "unbounded zone requires r_max or a spectrum with tail_radius()")
        else:
            r_max = n_cut  # unused

    def integrand(r):
        vals = np.asarray(spectrum(r))
        return np.abs(vals) ** 2 * r ** exponent

    total = 0.0
    err = 0.0
    for lo, hi in _zone_ranges(zone_filter, eps_cut, n_cut, r_max):
        if hi <= lo:
            continue
        v, e = adaptive_integral(integrand, lo, hi, rel_tol=rel_tol,
                                 cap_segments=cap_segments)
        total += v
        err += e
    if needs_tail:
        tail_sample = float(np.max(integrand(np.array([r_max * 0.99, r_max]))))
        if tail_sample * r_max > max(rel_tol * total, 1e-290):
            raise TruncationError(
                f"integrand has not decayed at r_max={r_max}: "
                f"tail estimate {tail_sample * r_max:.2e} vs total {total:.2e}")
    norm = math.sqrt(sphere_area(n) * total)
    if full_output:
        half_rel = 0.5 * err / max(total, 1e-300)
        return norm, norm * half_rel
    return norm


# ---------------------------------------------------------------------------
# weighted kernel norms
# ---------------------------------------------------------------------------

def kernel_norm(t: float, s: float, n: int, part: str, params: ModelParams, *,
                eps_cut: float = DEFAULT_EPS_CUT, rel_tol: float = 1e-9) -> float:
    """Low-frequency weighted norm of the oscillatory kernel envelopes.

    ``part="cos_part"`` integrates |r^s cos(gt r t) e^(-c r^2 t)|^2 and
    ``part="sin_part"`` the companion with weight r^(s-1).  For t > 0 the
    sin integrand extends continuously to r = 0 for every s >= 0, n >= 1
    (sin^2 supplies two powers of r), which covers all four branches of
    the piecewise rate function G; nonpositive t is rejected instead.
    """
    if part not in ("cos_part", "sin_part"):
        raise DomainError(f"part must be cos_part or sin_part, got {part!r}")
    if t <= 0:
        raise DomainError(
            "kernel norms require t > 0 (at t = 0 the sin weight r^(s-1) "
            "has a non-integrable envelope for 2s + n <= 2)")
    if s < 0:
        raise DomainError(f"Sobolev order must be >= 0, got {s}")
    if int(n) != n or n < 1:
        raise DomainError(f"dimension must be a positive integer, got {n}")
    gt = params.gamma_tilde
    decay = 2.0 * params.parabolic_decay * t
    phase = gt * t
    if part == "cos_part":
        exponent = 2.0 * s + n - 1.0

        def integrand(r):
            return np.cos(phase * r) ** 2 * np.exp(-decay * r * r) * r ** exponent
    else:
        exponent = 2.0 * s + n - 3.0

        def integrand(r):
            r = np.maximum(r, 1e-300)
            return np.sin(phase * r) ** 2 * np.exp(-decay * r * r) * r ** exponent

    cap = [(0.0, eps_cut, math.pi / max(phase, math.pi / eps_cut))]
    value, _ = adaptive_integral(integrand, 0.0, eps_cut, rel_tol=rel_tol,
                                 cap_segments=cap)
    return math.sqrt(sphere_area(n) * value)


# ---------------------------------------------------------------------------
# piecewise rate functions
# ---------------------------------------------------------------------------

_CASE_TOL = 1e-12


def rate_function(kind: str, t, s: float | None = None, n: int = 1):
    """The piecewise time-dependent coefficients G, H and kappa.

    G(t; s, n) bounds the sin-kernel norm (four branches switching at
    2s + n = 2, 3); H(t; n) is the sharp two-sided rate of the solution
    norm; kappa_n(t) weights the relaxed-model energy bound.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("rate functions require t > 0")
    if int(n) != n or n < 1:
        raise DomainError(f"dimension must be a positive integer, got {n}")
    if kind == "G":
        if s is None or s < 0:
            raise DomainError("G needs a Sobolev order s >= 0")
        q = 2.0 * s + n
        if q < 2.0 - _CASE_TOL:
            out = (1.0 + t) ** (1.0 - s - n / 2.0)
        elif abs(q - 2.0) <= _CASE_TOL:
            out = np.sqrt(np.log(math.e + t))
        elif q < 3.0 - _CASE_TOL:
            out = (1.0 + t) ** (1.0 - 5.0 * s / 6.0 - 5.0 * n / 12.0)
        else:
            out = (1.0 + t) ** (0.5 - s / 2.0 - n / 4.0)
    elif kind == "H":
        if n == 1:
            out = np.sqrt(t)
        elif n == 2:
            out = np.sqrt(np.log(t))
        else:
            out = t ** (0.5 - n / 4.0)
    elif kind == "kappa":
        if n == 1:
            out = np.sqrt(1.0 + t)
        elif n == 2:
            out = np.log(math.e + t)
        else:
            out = np.ones_like(t)
    else:
        raise DomainError(f"unknown rate function kind {kind!r}")
    return out if out.ndim else float(out)
