"""Brute-force time integration of the per-frequency mode systems.

This is the independent validation route for :mod:`viscowave.kernels` and
the fallback at (near-)degenerate frequencies.  The memory convolution
``z = g * u`` with ``g(t) = exp(-gamma t)`` is reduced exactly to the extra
state equation ``z' = u - gamma z``, so the mode systems are ordinary ODEs:

second order (3 complex states u, u', z):

    u'' = -r^2 u - r^2 u' + r^2 z

relaxed third order (4 complex states u, u', u'', z):

    tau u''' = -u'' - r^2 u - r^2 u' + r^2 z

Both are integrated with the classical fixed-step fourth-order Runge-Kutta
scheme; the step is tied to the stiffness scale max(gamma, r^2, 1/tau).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, StabilityError
from .params import ModelParams

#: |h * lambda| limit for the classical scheme (real-axis bound ~= 2.78)
STABILITY_LIMIT = 2.5
#: default step safety factor relative to the stiffness scale
DEFAULT_STEP_FACTOR = 0.2
#: default step ceiling
DEFAULT_STEP_MAX = 0.1


@dataclass
class ModeTrajectory:
    """Sampled mode states along an integration.

    ``u``/``ut``/``utt``/``z`` have shape (len(t),) for a single mode or
    (len(t), B) for a batch.
    """

    t: np.ndarray
    u: np.ndarray
    ut: np.ndarray
    utt: np.ndarray
    z: np.ndarray


def stiffness_scale(params: ModelParams, r: float) -> float:
    scale = max(params.gamma, r * r)
    if params.tau is not None:
        scale = max(scale, 1.0 / params.tau)
    return scale


def default_step(params: ModelParams, r: float) -> float:
    return min(DEFAULT_STEP_MAX, DEFAULT_STEP_FACTOR / stiffness_scale(params, r))


def _check_step(step: float, scale: float):
    if step <= 0:
        raise StabilityError(f"step must be positive, got {step}")
    if step * scale > STABILITY_LIMIT:
        raise StabilityError(
            f"step {step} exceeds the stability bound {STABILITY_LIMIT / scale:.3e} "
            f"for stiffness scale {scale:.3e}")


def _rk4_path(rhs, y0: np.ndarray, t_eval: np.ndarray, step: float) -> np.ndarray:
    """Classical RK4 from 0 through every requested output time.

    Each output interval is subdivided into an integer number of equal
    steps no larger than ``step``, so sample points are hit exactly.
    """
    out = np.empty((len(t_eval),) + y0.shape, dtype=complex)
    y = y0.astype(complex)
    t = 0.0
    for i, t_next in enumerate(t_eval):
        dt = t_next - t
        if dt > 0:
            n_sub = max(1, int(np.ceil(dt / step - 1e-12)))
            h = dt / n_sub
            for _ in range(n_sub):
                k1 = rhs(y)
                k2 = rhs(y + 0.5 * h * k1)
                k3 = rhs(y + 0.5 * h * k2)
                k4 = rhs(y + h * k3)
                y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t = t_next
        out[i] = y
    return out


def _prepare_times(t_end, t_eval):
    if t_eval is None:
        if t_end is None or t_end <= 0:
            raise InvalidParameterError("need t_end > 0 or explicit t_eval")
        t_eval = np.linspace(0.0, float(t_end), 65)
    t_eval = np.asarray(t_eval, dtype=float)
    if t_eval.ndim != 1 or np.any(np.diff(t_eval) < 0) or t_eval[0] < 0:
        raise InvalidParameterError("t_eval must be sorted and nonnegative")
    return t_eval


def integrate_vdw_mode(params: ModelParams, r: float, t_end: float | None = None,
                       u0hat=1.0, u1hat=0.0, step: float | None = None,
                       t_eval=None) -> ModeTrajectory:
    """Integrate one second-order mode; returns the sampled trajectory.

    ``u''`` is reconstructed from the mode equation so the trajectory
    carries the full state used by comparisons.
    """
    t_eval = _prepare_times(t_end, t_eval)
    scale = stiffness_scale(params.without_tau(), r)
    if step is None:
        step = default_step(params.without_tau(), r)
    _check_step(step, scale)
    g = params.gamma
    r2 = r * r

    def rhs(y):
        u, ut, z = y
        return np.array([ut, -r2 * u - r2 * ut + r2 * z, u - g * z])

    y0 = np.array([u0hat, u1hat, 0.0], dtype=complex)
    path = _rk4_path(rhs, y0, t_eval, step)
    u, ut, z = path[:, 0], path[:, 1], path[:, 2]
    utt = -r2 * u - r2 * ut + r2 * z
    return ModeTrajectory(t=t_eval, u=u, ut=ut, utt=utt, z=z)


def integrate_mgt_mode(params: ModelParams, r: float, t_end: float | None = None,
                       u0hat=1.0, u1hat=0.0, v2hat=0.0, step: float | None = None,
                       t_eval=None) -> ModeTrajectory:
    """Integrate one relaxed third-order mode."""
    tau = params.require_tau()
    t_eval = _prepare_times(t_end, t_eval)
    scale = stiffness_scale(params, r)
    if step is None:
        step = default_step(params, r)
    _check_step(step, scale)
    g = params.gamma
    r2 = r * r

    def rhs(y):
        u, ut, utt, z = y
        return np.array([
            ut, utt,
            (-utt - r2 * u - r2 * ut + r2 * z) / tau,
            u - g * z,
        ])

    y0 = np.array([u0hat, u1hat, v2hat, 0.0], dtype=complex)
    path = _rk4_path(rhs, y0, t_eval, step)
    return ModeTrajectory(t=t_eval, u=path[:, 0], ut=path[:, 1],
                          utt=path[:, 2], z=path[:, 3])


def integrate_vdw_many(gamma: np.ndarray, r: np.ndarray, t_eval,
                       u0hat, u1hat, step: float) -> ModeTrajectory:
    """Vectorised second-order integration over a batch of modes.

    All modes share the output grid and the step, which must satisfy the
    strictest stability bound in the batch.
    """
    gamma = np.asarray(gamma, dtype=float)
    r = np.asarray(r, dtype=float)
    t_eval = _prepare_times(None, t_eval)
    scale = float(np.max(np.maximum(gamma, r * r)))
    _check_step(step, scale)
    r2 = r * r

    def rhs(y):
        u, ut, z = y
        return np.stack([ut, -r2 * u - r2 * ut + r2 * z, u - gamma * z])

    y0 = np.stack(np.broadcast_arrays(
        np.asarray(u0hat, dtype=complex), np.asarray(u1hat, dtype=complex),
        np.zeros_like(gamma, dtype=complex)))
    path = _rk4_path(rhs, y0, t_eval, step)
    u, ut, z = path[:, 0], path[:, 1], path[:, 2]
    return ModeTrajectory(t=t_eval, u=u, ut=ut, utt=-r2 * (u + ut) + r2 * z, z=z)


def integrate_mgt_many(gamma: np.ndarray, tau: np.ndarray, r: np.ndarray, t_eval,
                       u0hat, u1hat, v2hat, step: float) -> ModeTrajectory:
    """Vectorised relaxed-model integration over a batch of modes."""
    gamma = np.asarray(gamma, dtype=float)
    tau = np.asarray(tau, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(tau <= 0):
        raise InvalidParameterError("tau must be positive")
    t_eval = _prepare_times(None, t_eval)
    scale = float(np.max(np.maximum(np.maximum(gamma, r * r), 1.0 / tau)))
    _check_step(step, scale)
    r2 = r * r

    def rhs(y):
        u, ut, utt, z = y
        return np.stack([
            ut, utt, (-utt - r2 * u - r2 * ut + r2 * z) / tau, u - gamma * z])

    y0 = np.stack(np.broadcast_arrays(
        np.asarray(u0hat, dtype=complex), np.asarray(u1hat, dtype=complex),
        np.asarray(v2hat, dtype=complex), np.zeros_like(gamma, dtype=complex)))
    path = _rk4_path(rhs, y0, t_eval, step)
    return ModeTrajectory(t=t_eval, u=path[:, 0], ut=path[:, 1],
                          utt=path[:, 2], z=path[:, 3])
