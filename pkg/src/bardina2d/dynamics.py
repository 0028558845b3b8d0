"""Model tendencies: nonlinearity, filtered momentum equation, tangent flow.

The evolved variable is the unfiltered velocity u.  With v = (I + alpha^2 A) u
the momentum equation

    dv/dt + nu A v + B(u, u) + sigma u = f,    B(u, u) = (P + Q)(Curl_n u x u)

becomes, mode by mode in streamfunction coefficients,

    dpsi/dt = -nu lam psi + (f1 - Np - sigma psi) / (1 + alpha^2 lam)

with f1 here the streamfunction representation of the rotational forcing, and
for the harmonic component on the torus dh/dt = f2 - sigma h - Nq.  The
nonlinearity is evaluated pointwise on the grid as zeta * (n x u), dealiased,
and split into its Leray and harmonic projections.

The tangent flow linearizes the nonlinearity to

    Ntilde(u, U) = zeta_U (n x u) + zeta_u (n x U)

with the forcing removed and the drag acting on the perturbation.

The prepared variant evolves v directly on the sphere with the nonlinear and
forcing terms multiplied by a smooth cutoff of |v| / rho, which makes every
large ball positively invariant while leaving the dynamics untouched inside
the ball of radius rho.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import basis
from . import operators as ops
from .errors import ConfigurationError, ShapeError, UnsupportedGeometryError


@dataclass
class Forcing:
    """Rotational forcing by its scalar Curl_n coefficients, plus harmonic pair."""

    f1_curl: np.ndarray
    f2: np.ndarray


@dataclass
class ModelParams:
    nu: float
    alpha: float
    sigma: float
    forcing: Forcing


@dataclass
class NonlinearSplit:
    """Leray part as streamfunction coefficients, harmonic part as a pair."""

    p_part: np.ndarray
    q_part: np.ndarray


def zero_forcing(plan):
    return Forcing(np.zeros(plan.n_modes), np.zeros(plan.n_harmonic))


def forcing_state(plan, forcing):
    """The forcing as a velocity state: psi_f = -f1_curl / lam, harmonic = f2."""
    if forcing.f1_curl.shape != (plan.n_modes,) or forcing.f2.shape != (plan.n_harmonic,):
        raise ShapeError("forcing arrays do not match plan")
    return ops.VelocityState(-forcing.f1_curl / plan.lam, forcing.f2.copy())


def validate_params(plan, params):
    """Parameter sanity shared by integrators, envelopes, and the CLI."""
    if not params.nu > 0.0:
        raise ConfigurationError(f"nu must be positive, got {params.nu}")
    if not params.alpha > 0.0:
        raise ConfigurationError(f"alpha must be positive, got {params.alpha}")
    if params.sigma < 0.0:
        raise ConfigurationError(f"sigma must be nonnegative, got {params.sigma}")
    if plan.geometry.kind == basis.TORUS and not params.sigma > 0.0:
        raise ConfigurationError(
            "sigma must be positive on the torus; the harmonic component is "
            "otherwise undamped"
        )
    forcing_state(plan, params.forcing)


# ---------------------------------------------------------------------------
# nonlinearity


@dataclass
class BaseGrids:
    """Grid evaluations of a base state reused across tangent evaluations."""

    zeta: np.ndarray
    u: np.ndarray


def base_grids(plan, state):
    return BaseGrids(
        zeta=basis.synthesize(plan, ops.scalar_vorticity(plan, state)),
        u=ops.velocity_grid(plan, state),
    )


def _split(plan, g):
    p = basis.dealias(plan, ops.leray_project(plan, g))
    q = ops.harmonic_project(plan, g)
    return p, q


def nonlinear_term(plan, state):
    """B(u, u) = (P + Q)(zeta * (n x u)) with zeta * (n x u) formed pointwise."""
    aux = base_grids(plan, state)
    g = aux.zeta * ops.rot90(aux.u)
    p, q = _split(plan, g)
    return NonlinearSplit(p, q)


def _tangent_batch(plan, psis, hs, aux):
    """Linearized nonlinearity for stacked tangents against one base state."""
    zeta_t = basis.synthesize(plan, -plan.lam * psis)
    u_t = ops.rot90(basis.surface_gradient(plan, psis))
    if plan.n_harmonic:
        u_t[..., 0, :, :] += hs[..., 0, None, None]
        u_t[..., 1, :, :] += hs[..., 1, None, None]
    g = zeta_t[..., None, :, :] * ops.rot90(aux.u) + aux.zeta * ops.rot90(u_t)
    return _split(plan, g)


# ---------------------------------------------------------------------------
# tendencies


def _remainder_u(plan, psi, h, params, fstate):
    """Non-stiff part of the u tendency; the integrator exponentiates -nu lam."""
    filt = 1.0 + params.alpha**2 * plan.lam
    zeta = basis.synthesize(plan, -plan.lam * psi)
    grad = basis.surface_gradient(plan, psi)
    u = ops.rot90(grad)
    if plan.n_harmonic:
        u[0] += h[0]
        u[1] += h[1]
    p, q = _split(plan, zeta * ops.rot90(u))
    dpsi = (fstate.psi - p - params.sigma * psi) / filt
    dh = fstate.harmonic - params.sigma * h - q
    return dpsi, dh


def rhs_u(plan, state, params):
    """Full tendency of the evolved state, stiff linear part included."""
    fstate = forcing_state(plan, params.forcing)
    dpsi, dh = _remainder_u(plan, state.psi, state.harmonic, params, fstate)
    return ops.VelocityState(dpsi - params.nu * plan.lam * state.psi, dh)


def _remainder_tangent(plan, psis, hs, aux, params):
    filt = 1.0 + params.alpha**2 * plan.lam
    p, q = _tangent_batch(plan, psis, hs, aux)
    dpsis = (-p - params.sigma * psis) / filt
    dhs = -params.sigma * hs - q
    return dpsis, dhs


def rhs_tangent(plan, delta, state, params):
    """Full tangent tendency at base state `state` (forcing drops out)."""
    aux = base_grids(plan, state)
    dpsi, dh = _remainder_tangent(plan, delta.psi, delta.harmonic, aux, params)
    return ops.VelocityState(dpsi - params.nu * plan.lam * delta.psi, dh)


# ---------------------------------------------------------------------------
# prepared equation (sphere)


def cutoff_theta(x):
    """Smooth cutoff: 1 on (-inf, 1], 0 on [2, inf), cubic blend between."""
    x = np.asarray(x, dtype=np.float64)
    t = np.clip(x - 1.0, 0.0, 1.0)
    out = 1.0 - t * t * (3.0 - 2.0 * t)
    return out if out.ndim else float(out)


def _remainder_prepared(plan, vpsi, params, rho, fstate):
    upsi = vpsi / (1.0 + params.alpha**2 * plan.lam)
    split = nonlinear_term(plan, ops.VelocityState(upsi, np.zeros(0)))
    nv = float(np.sqrt(np.dot(plan.lam * vpsi, vpsi)))
    th = cutoff_theta(nv / rho)
    return -th * (split.p_part - fstate.psi)


def prepared_rhs(plan, vstate, params, rho):
    """Tendency of the prepared v-equation; requires the sphere and sigma = 0.

    dv/dt = -nu A v - theta(|v| / rho) (B(u, u) - f),  u = (I + alpha^2 A)^-1 v.
    """
    if plan.geometry.kind != basis.SPHERE:
        raise UnsupportedGeometryError("the prepared equation is defined on the sphere")
    if not rho > 0.0:
        raise ConfigurationError(f"rho must be positive, got {rho}")
    if params.sigma != 0.0:
        raise ConfigurationError("the prepared equation carries no drag; set sigma = 0")
    fstate = forcing_state(plan, params.forcing)
    dpsi = _remainder_prepared(plan, vstate.psi, params, rho, fstate)
    return ops.VelocityState(dpsi - params.nu * plan.lam * vstate.psi, np.zeros(0))
