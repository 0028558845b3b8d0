"""Energy diagnostics, Gronwall envelopes, and identity residuals along runs.

The checks here are the desk-scale counterparts of the a priori estimates
that give well-posedness: two Lyapunov levels

    E1 = |u|^2 + alpha^2 ||u||^2,      E2 = ||u||^2 + alpha^2 |Au|^2,

each dominated by an explicit exponential envelope, plus the algebraic
identities of the rotational nonlinearity (b(u, v, v) = 0 and friends)
evaluated on random states.  Envelope constants come from `bounds`; with
drag the generic min-form branches apply, without drag (sphere only) the
single-branch forms with rate nu lambda_1.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from . import basis, bounds, dynamics as dyn, integrate, operators as ops
from .errors import ConfigurationError

# discretization allowance: energies sampled from an RK4/Euler run may
# overshoot the continuous envelope by O(dt^2); the unit coefficient is
# generous at desk-scale steps
DT_ALLOWANCE_COEFF = 1.0


@dataclass(frozen=True)
class DiagnosticsRecord:
    """One sample's norms, energies, envelopes, and energy-law residual."""

    t: float
    u_l2: float
    u_v: float
    au_l2: float
    h_l2: float
    v_l2: float
    e1: float
    e2: float
    envelope1: float
    envelope2: float
    energy_residual: float


def energy_record(plan, state, params, t, anchor=None):
    """All norms of one state, computed modewise, plus the envelope values.

    `anchor` is (e1_0, e2_0, t0); when omitted the record is its own anchor,
    so the envelopes equal the energies.  The energy residual compares
    [u, du/dt] against <f, u> - nu E2 - sigma |u|^2, relative to the size
    of those terms.
    """
    e1 = ops.energy_e1(plan, state, params.alpha)
    e2 = ops.energy_e2(plan, state, params.alpha)
    u_l2 = ops.norm_l2(plan, state)
    h_l2 = np.sqrt(plan.area) * float(np.linalg.norm(state.harmonic))
    v_l2 = ops.norm_l2(plan, ops.helmholtz_filter(plan, state, params.alpha))
    if anchor is None:
        env1, env2 = e1, e2
    else:
        e1_0, e2_0, t0 = anchor
        env1, env2 = gronwall_envelopes(plan, e1_0, e2_0, t - t0, params)
    tend = dyn.rhs_u(plan, state, params)
    fstate = dyn.forcing_state(plan, params.forcing)
    lhs = ops.inner_weighted(plan, state, tend, params.alpha)
    work = ops.inner_l2(plan, fstate, state)
    drain = params.nu * e2 + params.sigma * ops.inner_l2(plan, state, state)
    scale = abs(work) + drain
    residual = abs(lhs - (work - drain)) / scale if scale > 0.0 else 0.0
    return DiagnosticsRecord(
        t=float(t),
        u_l2=float(u_l2),
        u_v=float(ops.norm_v(plan, state)),
        au_l2=float(ops.norm_a(plan, state)),
        h_l2=float(h_l2),
        v_l2=float(v_l2),
        e1=float(e1),
        e2=float(e2),
        envelope1=float(env1),
        envelope2=float(env2),
        energy_residual=float(residual),
    )


def trajectory_diagnostics(plan, trajectory, params):
    """Records for every sample of a run, envelopes anchored at the first."""
    if not trajectory.samples:
        return []
    t0, s0 = trajectory.samples[0]
    anchor = (
        ops.energy_e1(plan, s0, params.alpha),
        ops.energy_e2(plan, s0, params.alpha),
        t0,
    )
    return [energy_record(plan, s, params, t, anchor) for t, s in trajectory.samples]


def gronwall_envelopes(plan, e1_0, e2_0, t, params):
    """Exponential majorants of E1 and E2 at elapsed time t (scalar or array).

    With drag: env1 = e^(-delta t) E1_0 + (L1/delta)(1 - e^(-delta t)) and
    env2 likewise with rate delta' and level 2 L2.  Without drag (sphere)
    both rates collapse to nu lambda_1 and the levels are the single-branch
    |A^-1 f|^2/(nu alpha^2) and |A^-1/2 f|^2/(nu alpha^2), undoubled.
    """
    dyn.validate_params(plan, params)
    norms = bounds.forcing_norms(plan, params.forcing)
    t = np.asarray(t, dtype=float)
    if params.sigma == 0.0:
        rate1 = rate2 = params.nu * plan.lambda_1
        level1 = norms.f1_inv**2 / (params.nu * params.alpha**2)
        level2 = norms.f1_half_inv**2 / (params.nu * params.alpha**2)
    else:
        c = bounds.constants(plan, params, norms)
        rate1, rate2 = c.delta, c.delta_prime
        level1, level2 = c.l1, 2.0 * c.l2
    d1 = np.exp(-rate1 * t)
    d2 = np.exp(-rate2 * t)
    env1 = d1 * e1_0 + (level1 / rate1) * (1.0 - d1)
    env2 = d2 * e2_0 + (level2 / rate2) * (1.0 - d2)
    return env1, env2


def check_trajectory(plan, records, params, slack=1e-6, dt=0.0):
    """Flag samples whose energies exceed their recorded envelopes.

    The tolerance factor is 1 + slack + DT_ALLOWANCE_COEFF dt^2; the dt^2
    term absorbs time-discretization overshoot of the sampled energies.
    Returns a list of violation dicts (empty when every sample is below).
    """
    dyn.validate_params(plan, params)
    factor = 1.0 + slack + DT_ALLOWANCE_COEFF * dt**2
    out = []
    for r in records:
        if r.e1 > r.envelope1 * factor:
            out.append({"t": r.t, "kind": "e1", "value": r.e1, "envelope": r.envelope1})
        if r.e2 > r.envelope2 * factor:
            out.append({"t": r.t, "kind": "e2", "value": r.e2, "envelope": r.envelope2})
    return out


# ---------------------------------------------------------------------------
# identity residuals


def _random_state(plan, rng, amplitude, dealias_inputs):
    psi = amplitude * rng.standard_normal(plan.n_modes) / np.sqrt(1.0 + plan.lam)
    if dealias_inputs:
        psi = basis.dealias(plan, psi)
    h = amplitude * rng.standard_normal(plan.n_harmonic)
    return ops.VelocityState(psi, h)


def identity_suite(plan, params, seed, n_states=20, amplitude=1.0, dealias_inputs=True):
    """Relative residuals of the nonlinearity identities on random states.

    Keys: b_uvv (b(u, v, v) = 0), b_swap (antisymmetry in the last pair),
    b_energy (<B(u, u), u> = 0), and b_enstrophy (<B(u, u), Au> = 0) on the
    sphere or harmonic_pair (<Q(zeta rot90(h)), h> = 0) on the torus.  The
    identities hold for any model parameters; `params` only rides along so
    the verification entry points share one call shape.  With
    dealias_inputs=False the torus residuals that rely on the 2/3 rule
    degrade; the suite then serves as an aliasing diagnostic.
    """
    del params
    rng = np.random.default_rng(seed)
    names = ["b_uvv", "b_swap", "b_energy"]
    names.append("b_enstrophy" if plan.geometry.kind == basis.SPHERE else "harmonic_pair")
    table = {name: np.zeros(n_states) for name in names}
    for i in range(n_states):
        u = _random_state(plan, rng, amplitude, dealias_inputs)
        v = _random_state(plan, rng, amplitude, dealias_inputs)
        w = _random_state(plan, rng, amplitude, dealias_inputs)
        scale = ops.norm_v(plan, u) * ops.norm_v(plan, v) * ops.norm_v(plan, w)
        uvv = ops.trilinear_b(plan, u, v, v)
        swap = ops.trilinear_b(plan, u, v, w) + ops.trilinear_b(plan, u, w, v)
        spl = dyn.nonlinear_term(plan, u)
        bstate = ops.VelocityState(spl.p_part, spl.q_part)
        energy = ops.inner_l2(plan, bstate, u)
        table["b_uvv"][i] = _relative(uvv, scale)
        table["b_swap"][i] = _relative(swap, scale)
        table["b_energy"][i] = _relative(energy, scale)
        if plan.geometry.kind == basis.SPHERE:
            enst = ops.inner_l2(plan, bstate, ops.stokes_apply(plan, u))
            table["b_enstrophy"][i] = _relative(enst, scale)
        else:
            aux = dyn.base_grids(plan, u)
            hv = np.zeros_like(aux.u)
            hv[0], hv[1] = u.harmonic
            q = ops.harmonic_project(plan, aux.zeta * ops.rot90(hv))
            pair = plan.area * float(np.dot(q, u.harmonic))
            table["harmonic_pair"][i] = _relative(pair, scale)
    return table


def _relative(value, scale):
    return abs(value) / scale if scale > 0.0 else 0.0


# ---------------------------------------------------------------------------
# trajectory studies


def separation_growth(plan, state_a, state_b, params, scheme, t_end):
    """Distance growth between two runs, reported without hard assertions.

    The separation is the weighted-norm distance E1(a - b)^(1/2); alongside
    it the report carries the cumulative enstrophy integral of the first
    trajectory, the quantity whose exponential controls uniqueness (its
    prefactor constant is not pinned down, hence report-only).
    """
    sch = dataclasses.replace(scheme, t_end=t_end)
    traj_a = integrate.run(plan, state_a, params, sch)
    traj_b = integrate.run(plan, state_b, params, sch)
    ts = np.array([t for t, _ in traj_a.samples])
    sep = np.zeros(ts.size)
    enst = np.zeros(ts.size)
    for i, ((_, sa), (_, sb)) in enumerate(zip(traj_a.samples, traj_b.samples)):
        diff = ops.VelocityState(sa.psi - sb.psi, sa.harmonic - sb.harmonic)
        sep[i] = np.sqrt(max(ops.energy_e1(plan, diff, params.alpha), 0.0))
        enst[i] = ops.norm_v(plan, sa) ** 2
    if sep[0] > 0.0:
        with np.errstate(divide="ignore"):
            log_growth = np.log(sep / sep[0])
    else:
        log_growth = np.zeros(ts.size)
    return {
        "t": ts,
        "separation": sep,
        "log_growth": log_growth,
        "enstrophy_integral": cumulative_trapezoid(enst, ts, initial=0.0),
    }


def average_enstrophy_check(plan, records, params):
    """Time-average of ||u||^2 against 2 L2/delta' plus the measured transient.

    The transient term is E2(0)/(delta' t); with drag delta' is the generic
    min rate, without drag it is nu lambda_1.
    """
    if len(records) < 2:
        raise ConfigurationError("need at least two records to form a time average")
    ts = np.array([r.t for r in records])
    span = ts[-1] - ts[0]
    if not span > 0.0:
        raise ConfigurationError("records must span a positive time interval")
    if params.sigma == 0.0:
        dyn.validate_params(plan, params)
        rate = params.nu * plan.lambda_1
    else:
        rate = bounds.constants(plan, params).delta_prime
    avg = trapezoid([r.u_v**2 for r in records], ts) / span
    transient = records[0].e2 / (rate * span)
    bound = bounds.average_enstrophy_bound(plan, params) + transient
    return {
        "average": float(avg),
        "bound": float(bound),
        "transient": float(transient),
        "ok": bool(avg <= bound),
    }
