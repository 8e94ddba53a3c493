"""Closed-form Fourier-space solution kernels and leading profiles.

With pairwise-distinct characteristic roots ``lambda_j`` the mode solution
of the second-order model is

    u_hat(t) = K0(t, r) u0_hat + K1(t, r) u1_hat,

    K0 = sum_j (lambda_k lambda_l - r^2) / D_j * exp(lambda_j t),
    K1 = sum_j (-(lambda_k + lambda_l) - r^2) / D_j * exp(lambda_j t),

where ``{k, l}`` are the other two indices and ``D_j`` the product of root
gaps.  These follow from the Lagrange solve of the third-order initial
value problem with second datum ``u2_hat = -r^2 (u0_hat + u1_hat)``.

The relaxed model is handled the same way through a 4x4 Vandermonde solve,
with the third datum closed by evaluating the third-order equation at
t = 0 where the memory integral vanishes:

    v3_hat = -(v2_hat + r^2 (u0_hat + u1_hat)) / tau.

Near-degenerate roots raise :class:`~viscowave.errors.NearDegenerateError`;
callers fall back to :mod:`viscowave.oracle` (no confluent formulas here).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NearDegenerateError
from .params import ModelParams
from .spectrum import (DEFAULT_EPS_CUT, cubic_char_roots_batch,
                       quartic_char_roots_batch)


@dataclass
class KernelPair:
    """Kernel values (and their time derivatives) at one frequency.

    Fields are complex scalars for scalar ``t`` and arrays for array ``t``.
    At t = 0: k0 = 1, k1 = 0, dk0 = 0, dk1 = 1.
    """

    k0: np.ndarray
    k1: np.ndarray
    dk0: np.ndarray
    dk1: np.ndarray


@dataclass
class ModeState:
    """Complex mode values at one frequency and time."""

    u: complex
    ut: complex
    utt: complex
    z: complex


@dataclass
class ProfilePair:
    """Leading low-frequency profiles multiplying the data moments."""

    j0: np.ndarray
    j1: np.ndarray


# ---------------------------------------------------------------------------
# batched kernel machinery
# ---------------------------------------------------------------------------

_OTHERS3 = [(1, 2), (0, 2), (0, 1)]


@dataclass
class VdwKernelBasis:
    """Per-node kernel component amplitudes for a batch of frequencies."""

    r: np.ndarray       # (B,)
    roots: np.ndarray   # (B, 3)
    coef0: np.ndarray   # (B, 3)
    coef1: np.ndarray   # (B, 3)
    flags: np.ndarray   # (B,) near-degenerate markers

    def eval(self, t) -> KernelPair:
        """Kernels at time(s) ``t``; shape (B,) or (T, B)."""
        t = np.asarray(t, dtype=float)
        e = np.exp(np.multiply.outer(t, self.roots))  # (..., B, 3)
        k0 = (self.coef0 * e).sum(axis=-1)
        k1 = (self.coef1 * e).sum(axis=-1)
        dk0 = (self.coef0 * self.roots * e).sum(axis=-1)
        dk1 = (self.coef1 * self.roots * e).sum(axis=-1)
        return KernelPair(k0=k0, k1=k1, dk0=dk0, dk1=dk1)

    def mode_tables(self, t, u0vals, u1vals):
        """(u, ut, utt) tables for data values on the node batch."""
        t = np.asarray(t, dtype=float)
        amp = self.coef0 * np.asarray(u0vals, dtype=complex)[:, None] \
            + self.coef1 * np.asarray(u1vals, dtype=complex)[:, None]
        e = np.exp(np.multiply.outer(t, self.roots))
        u = (amp * e).sum(axis=-1)
        ut = (amp * self.roots * e).sum(axis=-1)
        utt = (amp * self.roots ** 2 * e).sum(axis=-1)
        return u, ut, utt


def vdw_kernel_basis(params: ModelParams, r) -> VdwKernelBasis:
    """Solve the cubic on a node batch and form kernel amplitudes."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    roots, _, _, flags = cubic_char_roots_batch(params, r)
    r2 = (r * r)[:, None]
    coef0 = np.empty_like(roots)
    coef1 = np.empty_like(roots)
    for j, (k, l) in enumerate(_OTHERS3):
        gap = (roots[:, j] - roots[:, k]) * (roots[:, j] - roots[:, l])
        gap = np.where(flags, 1.0, gap)  # flagged nodes are rejected by users
        coef0[:, j] = (roots[:, k] * roots[:, l] - r2[:, 0]) / gap
        coef1[:, j] = (-(roots[:, k] + roots[:, l]) - r2[:, 0]) / gap
    return VdwKernelBasis(r=r, roots=roots, coef0=coef0, coef1=coef1, flags=flags)


@dataclass
class MgtModeBasis:
    """Mode amplitudes of the relaxed model for fixed data values."""

    r: np.ndarray       # (B,)
    roots: np.ndarray   # (B, 4)
    amp: np.ndarray     # (B, 4)
    flags: np.ndarray   # (B,)

    def eval(self, t):
        """(v, vt, vtt) at time(s) ``t``; shape (B,) or (T, B)."""
        t = np.asarray(t, dtype=float)
        e = np.exp(np.multiply.outer(t, self.roots))
        v = (self.amp * e).sum(axis=-1)
        vt = (self.amp * self.roots * e).sum(axis=-1)
        vtt = (self.amp * self.roots ** 2 * e).sum(axis=-1)
        return v, vt, vtt


def mgt_mode_basis(params: ModelParams, r, u0vals, u1vals, v2vals) -> MgtModeBasis:
    """Quartic solve plus Vandermonde coefficients for given data values."""
    tau = params.require_tau()
    r = np.atleast_1d(np.asarray(r, dtype=float))
    roots, _, _, flags = quartic_char_roots_batch(params, r)
    u0vals = np.broadcast_to(np.asarray(u0vals, dtype=complex), r.shape)
    u1vals = np.broadcast_to(np.asarray(u1vals, dtype=complex), r.shape)
    v2vals = np.broadcast_to(np.asarray(v2vals, dtype=complex), r.shape)
    r2 = r * r
    v3vals = -(v2vals + r2 * (u0vals + u1vals)) / tau
    powers = np.arange(4)
    vander = roots[:, None, :] ** powers[None, :, None]       # (B, 4, 4)
    data = np.stack([u0vals, u1vals, v2vals, v3vals], axis=1)  # (B, 4)
    safe = np.where(flags[:, None, None], np.eye(4)[None], vander)
    amp = np.linalg.solve(safe, data[..., None])[..., 0]
    return MgtModeBasis(r=r, roots=roots, amp=amp, flags=flags)


# ---------------------------------------------------------------------------
# scalar-frequency API
# ---------------------------------------------------------------------------

def vdw_kernels(params: ModelParams, r: float, t) -> KernelPair:
    """Kernels of the second-order model at one frequency.

    Raises
    ------
    NearDegenerateError
        If the roots at ``r`` are (near-)multiple; use the time-domain
        oracle there instead.
    """
    _check_time(t)
    basis = vdw_kernel_basis(params, np.array([r]))
    if basis.flags[0]:
        raise NearDegenerateError(
            f"near-multiple roots at r={r}; evaluate via the ode oracle")
    pair = basis.eval(t)
    return KernelPair(k0=pair.k0[..., 0], k1=pair.k1[..., 0],
                      dk0=pair.dk0[..., 0], dk1=pair.dk1[..., 0])


def _check_time(t):
    if np.any(np.asarray(t) < 0):
        raise DomainError("time must be >= 0")


def _expm1_over_x(x: np.ndarray) -> np.ndarray:
    """(exp(x) - 1)/x for complex x, stable near 0."""
    x = np.asarray(x, dtype=complex)
    small = np.abs(x) < 1e-4
    xs = np.where(small, 0.0, x)
    a, b = x.real, x.imag
    expm1c = np.expm1(a) * np.cos(b) - 2.0 * np.sin(0.5 * b) ** 2 \
        + 1j * np.exp(a) * np.sin(b)
    series = 1.0 + x / 2.0 + x * x / 6.0 + x * x * x / 24.0
    return np.where(small, series, expm1c / np.where(small, 1.0, xs))


def _memory_weights(roots: np.ndarray, gamma: float, t) -> np.ndarray:
    """Per-component factors (exp(lambda t) - exp(-gamma t))/(lambda + gamma)
    of the memory variable z = g * u.

    ``t`` may be scalar or 1-d; the result broadcasts as (..., deg).  Small
    (lambda + gamma) t is routed through a cancellation-free form so the
    lambda -> -gamma limit (t exp(-gamma t)) is exact.
    """
    t = np.asarray(t, dtype=float)
    lamg = roots + gamma
    x = np.multiply.outer(t, lamg)                    # (..., deg)
    near = np.abs(x) < 1.0
    e_gam = np.exp(-gamma * t)
    direct = (np.exp(np.multiply.outer(t, roots)) - e_gam[..., None]) \
        / np.where(near, 1.0, lamg)
    stable = (e_gam[..., None] * t[..., None] if t.ndim else e_gam * t) \
        * _expm1_over_x(np.where(near, x, 0.0))
    return np.where(near, stable, direct)


def vdw_mode_solution(params: ModelParams, r: float, t, u0hat, u1hat) -> ModeState:
    """Mode solution (u, u_t, u_tt, z) of the second-order model.

    The frequency r = 0 is handled in closed form (the mode equation
    degenerates to u'' = 0 there); other near-degenerate frequencies raise
    :class:`NearDegenerateError`.
    """
    _check_time(t)
    g = params.gamma
    t_arr = np.asarray(t, dtype=float)
    if r == 0.0:
        decay = -np.expm1(-g * t_arr)  # 1 - exp(-gamma t)
        u = u0hat + u1hat * t_arr
        z = u0hat * decay / g + u1hat * (t_arr / g - decay / (g * g))
        return ModeState(u=u, ut=u1hat * np.ones_like(t_arr) if t_arr.ndim else u1hat,
                         utt=np.zeros_like(t_arr) if t_arr.ndim else 0.0, z=z)
    basis = vdw_kernel_basis(params, np.array([r]))
    if basis.flags[0]:
        raise NearDegenerateError(
            f"near-multiple roots at r={r}; evaluate via the ode oracle")
    roots = basis.roots[0]
    amp = basis.coef0[0] * u0hat + basis.coef1[0] * u1hat
    e = np.exp(np.multiply.outer(t_arr, roots))
    u = (amp * e).sum(axis=-1)
    ut = (amp * roots * e).sum(axis=-1)
    utt = (amp * roots ** 2 * e).sum(axis=-1)
    z = (amp * _memory_weights(roots, g, t_arr)).sum(axis=-1)
    return ModeState(u=u, ut=ut, utt=utt, z=z)


def mgt_mode_solution(params: ModelParams, r: float, t, u0hat, u1hat,
                      v2hat) -> ModeState:
    """Mode solution (v, v_t, v_tt, z) of the relaxed model."""
    _check_time(t)
    basis = mgt_mode_basis(params, np.array([r]), [u0hat], [u1hat], [v2hat])
    if basis.flags[0]:
        raise NearDegenerateError(
            f"near-multiple quartic roots at r={r}; evaluate via the ode oracle")
    cond = np.linalg.cond(np.vander(basis.roots[0], increasing=True).T)
    if not np.isfinite(cond) or cond > 1e14:
        raise NearDegenerateError(
            f"ill-conditioned mode solve at r={r} (cond={cond:.2e})")
    t_arr = np.asarray(t, dtype=float)
    roots, amp = basis.roots[0], basis.amp[0]
    e = np.exp(np.multiply.outer(t_arr, roots))
    v = (amp * e).sum(axis=-1)
    vt = (amp * roots * e).sum(axis=-1)
    vtt = (amp * roots ** 2 * e).sum(axis=-1)
    z = (amp * _memory_weights(roots, params.gamma, t_arr)).sum(axis=-1)
    return ModeState(u=v, ut=vt, utt=vtt, z=z)


# ---------------------------------------------------------------------------
# leading low-frequency profiles
# ---------------------------------------------------------------------------

def leading_profiles(params: ModelParams, r, t,
                     eps_cut: float = DEFAULT_EPS_CUT) -> ProfilePair:
    """Leading diffusion-wave profiles on the low-frequency zone.

    Closed real cos/sin form; equals the sum of the two oscillatory branch
    truncations (see :func:`profile_branch_terms`) identically.  The sin
    numerator of the second profile is ``2 gamma^3 - (gamma^2 - 2 gamma + 3) r^2``;
    a commonly quoted variant with ``(gamma-3)(gamma+1)`` breaks that identity.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(r >= eps_cut):
        raise DomainError(f"profiles are defined on 0 <= r < {eps_cut}")
    _check_time(t)
    t = np.asarray(t, dtype=float)
    g = params.gamma
    gt = params.gamma_tilde
    theta = gt * r * t
    damp = np.exp(-params.parabolic_decay * r * r * t)
    r2 = r * r
    den0 = 2.0 * g ** 3 + 2.0 * (g - 1.0) * r2
    j0 = ((2.0 * g ** 3 - (g - 1.0) ** 2 * r2) * np.cos(theta)
          + g * (g + 1.0) * np.sqrt(g * (g - 1.0)) * r * np.sin(theta)) / den0 * damp
    # sin(theta)/r, continuous at r = 0 with value gamma_tilde * t
    sin_over_r = gt * t * np.sinc(theta / np.pi)
    j1 = ((g * g + 1.0) * r2 / (2.0 * g ** 4 + 2.0 * g * (g - 1.0) * r2) * np.cos(theta)
          + (2.0 * g ** 3 - (g * g - 2.0 * g + 3.0) * r2)
          / (2.0 * g ** 3 * gt + 2.0 * (g - 1.0) * gt * r2) * sin_over_r) * damp
    return ProfilePair(j0=j0 + 0j, j1=j1 + 0j)


def profile_branch_terms(params: ModelParams, r, t):
    """The oscillatory branch truncations defining the leading profiles.

    Returns (j0_plus, j0_minus, j1_plus, j1_minus); j0 = j0_plus + j0_minus
    and likewise for j1.  Requires r > 0 (the second pair carries a 1/r
    factor that cancels only in the sum).
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("branch terms need r > 0")
    t = np.asarray(t, dtype=float)
    g = params.gamma
    gt = params.gamma_tilde
    a = np.sqrt(g * (g - 1.0))
    osc = np.exp(1j * gt * r * t - params.parabolic_decay * r * r * t)
    out = []
    for sign in (1.0, -1.0):
        e = osc if sign > 0 else np.conj(osc)
        num0 = sign * 1j * a + (g - 1.0) ** 2 / (2.0 * g) * r
        den0 = sign * 2j * a - 2.0 * (g - 1.0) / g * r
        out.append(num0 / den0 * e)
    for sign in (1.0, -1.0):
        e = osc if sign > 0 else np.conj(osc)
        num1 = g + sign * 1j * gt * r - params.parabolic_decay * r * r
        den1 = sign * 2j * a * r - 2.0 * (g - 1.0) / g * r * r
        out.append(num1 / den1 * e)
    return tuple(out)
