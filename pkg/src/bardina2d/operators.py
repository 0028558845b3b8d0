"""Divergence-free velocity fields, Hodge projections, and the trilinear form.

A velocity field splits as u = u1 + u2 with u1 = n x grad(psi) for a
mean-free streamfunction psi and u2 a harmonic field (constants on the
torus, absent on the sphere).  States store the streamfunction expansion
against the plan basis plus the harmonic component pair, so the Stokes
operator, Helmholtz filter, and all inner products are diagonal:

    |u|^2      = sum lam psi^2        + area * |h|^2
    ||u||^2    = sum lam^2 psi^2                      (= |Curl_n u|^2)
    |A u|^2    = sum lam^3 psi^2
    [u, w]     = <u, w> + alpha^2 <Curl_n u, Curl_n w>

The trilinear form is evaluated through the symmetric three-term formula

    b(u, v, w) = 1/2 * int( -(u x v).n zeta_w + zeta_u (n x v).w
                            + zeta_v (n x u).w ) dM

whose integrand vanishes pointwise when w = v or when antisymmetrized in
(v, w), so those identities hold to rounding regardless of quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import basis
from .errors import ShapeError

__all__ = [
    "VelocityState",
    "zero_state",
    "state_from_mode",
    "random_state",
    "rot90",
    "velocity_grid",
    "scalar_vorticity",
    "stokes_apply",
    "helmholtz_filter",
    "helmholtz_unfilter",
    "leray_project",
    "harmonic_project",
    "inner_l2",
    "inner_v",
    "inner_weighted",
    "norm_l2",
    "norm_v",
    "norm_a",
    "energy_e1",
    "energy_e2",
    "trilinear_b",
]


@dataclass
class VelocityState:
    """Streamfunction coefficients plus harmonic component of one velocity field."""

    psi: np.ndarray
    harmonic: np.ndarray

    def copy(self):
        return VelocityState(self.psi.copy(), self.harmonic.copy())


def _check(plan, state):
    if state.psi.shape != (plan.n_modes,) or state.harmonic.shape != (plan.n_harmonic,):
        raise ShapeError(
            f"state shapes {state.psi.shape}/{state.harmonic.shape} do not match plan "
            f"({plan.n_modes} modes, {plan.n_harmonic} harmonic)"
        )


def zero_state(plan):
    return VelocityState(np.zeros(plan.n_modes), np.zeros(plan.n_harmonic))


def state_from_mode(plan, index, amplitude=1.0):
    """State whose streamfunction is one basis mode with the given coefficient."""
    st = zero_state(plan)
    st.psi[basis.mode_slot(plan, index)] = amplitude
    return st


def random_state(plan, seed, slope=2.0, e1=1.0, alpha=1.0):
    """Seeded random dealias-consistent state normalized to energy E1.

    Streamfunction coefficients are drawn i.i.d. normal and shaped by
    lam^(-slope/2), then scaled so |u|^2 + alpha^2 ||u||^2 == e1.
    """
    rng = np.random.default_rng(seed)
    psi = rng.standard_normal(plan.n_modes) * plan.lam ** (-slope / 2.0)
    psi = basis.dealias(plan, psi)
    raw = np.dot((plan.lam + alpha**2 * plan.lam**2) * psi, psi)
    st = VelocityState(psi * np.sqrt(e1 / raw), np.zeros(plan.n_harmonic))
    return st


def rot90(vec):
    """Pointwise n x (.) rotation of a tangent grid field: (a, b) -> (-b, a)."""
    return np.stack((-vec[..., 1, :, :], vec[..., 0, :, :]), axis=-3)


def velocity_grid(plan, state):
    """Evaluate u = n x grad(psi) + u2 on the plan grid."""
    _check(plan, state)
    u = rot90(basis.surface_gradient(plan, state.psi))
    if plan.n_harmonic:
        u[0] += state.harmonic[0]
        u[1] += state.harmonic[1]
    return u


def scalar_vorticity(plan, state):
    """Coefficients of Curl_n u = Laplacian(psi); the harmonic part drops out."""
    _check(plan, state)
    return -plan.lam * state.psi


def stokes_apply(plan, state):
    """A u = Curl Curl_n u: multiplies streamfunction coefficients by lam."""
    _check(plan, state)
    return VelocityState(plan.lam * state.psi, np.zeros(plan.n_harmonic))


def helmholtz_filter(plan, state, alpha):
    """v = (I + alpha^2 A) u; the harmonic part passes through unchanged."""
    _check(plan, state)
    return VelocityState((1.0 + alpha**2 * plan.lam) * state.psi, state.harmonic.copy())


def helmholtz_unfilter(plan, state, alpha):
    """Inverse of `helmholtz_filter`."""
    _check(plan, state)
    return VelocityState(state.psi / (1.0 + alpha**2 * plan.lam), state.harmonic.copy())


def leray_project(plan, vec):
    """Streamfunction coefficients of the divergence-free projection of a grid field.

    Broadcasts over leading axes.  The mean-free rotational part of g has
    streamfunction -Curl_n(g) / lam mode by mode; gradient components and the
    grid mean are annihilated.
    """
    return -basis.gradient_analysis(plan, rot90(vec)) / plan.lam


def harmonic_project(plan, vec):
    """Harmonic component of a grid vector field (componentwise area mean)."""
    if plan.n_harmonic == 0:
        return np.zeros(vec.shape[:-3] + (0,))
    return np.stack(
        (vec[..., 0, :, :].mean(axis=(-2, -1)), vec[..., 1, :, :].mean(axis=(-2, -1))),
        axis=-1,
    )


# ---------------------------------------------------------------------------
# inner products and norms


def inner_l2(plan, a, b):
    """<a, b> over the manifold, harmonic parts paired with the area weight."""
    _check(plan, a)
    _check(plan, b)
    out = float(np.dot(plan.lam * a.psi, b.psi))
    if plan.n_harmonic:
        out += plan.area * float(np.dot(a.harmonic, b.harmonic))
    return out


def inner_v(plan, a, b):
    """<Curl_n a, Curl_n b>; harmonic parts contribute nothing."""
    _check(plan, a)
    _check(plan, b)
    return float(np.dot(plan.lam**2 * a.psi, b.psi))


def inner_weighted(plan, a, b, alpha):
    """[a, b] = <a, b> + alpha^2 <Curl_n a, Curl_n b>."""
    return inner_l2(plan, a, b) + alpha**2 * inner_v(plan, a, b)


def norm_l2(plan, state):
    return np.sqrt(max(inner_l2(plan, state, state), 0.0))


def norm_v(plan, state):
    return np.sqrt(max(inner_v(plan, state, state), 0.0))


def norm_a(plan, state):
    """|A u|."""
    _check(plan, state)
    return float(np.sqrt(np.dot(plan.lam**3 * state.psi, state.psi)))


def energy_e1(plan, state, alpha):
    """E1 = |u|^2 + alpha^2 ||u||^2."""
    return inner_weighted(plan, state, state, alpha)


def energy_e2(plan, state, alpha):
    """E2 = ||u||^2 + alpha^2 |A u|^2."""
    _check(plan, state)
    return float(np.dot((plan.lam**2 + alpha**2 * plan.lam**3) * state.psi, state.psi))


# ---------------------------------------------------------------------------
# trilinear form


def _cross2(a, b):
    return a[..., 0, :, :] * b[..., 1, :, :] - a[..., 1, :, :] * b[..., 0, :, :]


def trilinear_b(plan, u, v, w):
    """Rotational trilinear form b(u, v, w) by the symmetric three-term formula.

    Exact for dealias-consistent states because the grid integrates triple
    products of band-limited fields without error.
    """
    ug, vg, wg = velocity_grid(plan, u), velocity_grid(plan, v), velocity_grid(plan, w)
    zu = basis.synthesize(plan, scalar_vorticity(plan, u))
    zv = basis.synthesize(plan, scalar_vorticity(plan, v))
    zw = basis.synthesize(plan, scalar_vorticity(plan, w))
    integrand = 0.5 * (
        -_cross2(ug, vg) * zw + zu * _cross2(vg, wg) + zv * _cross2(ug, wg)
    )
    return basis.integrate(plan, integrand)
