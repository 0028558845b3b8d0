"""Command line driver: simulate | lyapunov | bounds | verify | selftest.

All numerics live in the library modules; this file parses arguments, pins
the BLAS thread pools, and serializes reports.  The pools are pinned to one
thread before numpy is first imported so that reductions always run in the
same order: --threads is accepted (a speed hint for wrappers) but can never
change a single output bit.  CSV numbers are written with 17 significant
digits, so every 64-bit float round-trips exactly.

Exit codes: 0 success, 1 runtime failure (divergence, degenerate ensemble,
failed verification suite), 2 invalid configuration or input file.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import tempfile

ENVELOPE_SLACK = 1e-6

_THREAD_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "VECLIB_MAXIMUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)

_DIAG_HEADER = (
    "t,norm_u_l2,norm_u_v,norm_Au,norm_u2,norm_v,"
    "E1,E2,env1,env2,energy_residual,violations"
)


def _pin_thread_pools():
    # must happen before the first numpy import anywhere in the process
    for var in _THREAD_VARS:
        os.environ[var] = "1"


# ---------------------------------------------------------------------------
# serialization helpers


def _fmt(x):
    return format(float(x), ".17g")


def _write_lines(path, lines):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def _jsonable(value):
    import numpy as np

    if isinstance(value, dict):
        return {key: _jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    return value


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _out_dir(args, spec):
    out = args.out or spec.out or "."
    os.makedirs(out, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# argument parsing


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="bardina2d",
        description="Spectral simulator and estimate checks for a regularized "
        "fluid model on the sphere and the flat torus.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--threads",
        type=int,
        default=1,
        help="worker hint; results never depend on it (pools stay pinned)",
    )

    configured = argparse.ArgumentParser(add_help=False)
    configured.add_argument("--config", required=True, help="JSON run spec")
    configured.add_argument("--out", default=None, help="output directory")
    configured.add_argument(
        "--seed",
        type=int,
        default=None,
        help="override every seed in the config",
    )

    sim = sub.add_parser(
        "simulate",
        parents=[common, configured],
        help="integrate one run; writes diagnostics.csv, final.bdna, meta.json",
    )
    sim.add_argument("--resume", default=None, help="snapshot file to continue from")

    sub.add_parser(
        "lyapunov",
        parents=[common, configured],
        help="exponent estimation; writes exponents.csv and lyapunov.json",
    )
    sub.add_parser(
        "bounds",
        parents=[common, configured],
        help="closed-form constants and bounds; writes bounds.json (+ sweep CSV)",
    )
    sub.add_parser(
        "verify",
        parents=[common, configured],
        help="identity, envelope, roundtrip, and tangent checks; "
        "also rechecks a run directory when --out holds one",
    )
    slf = sub.add_parser(
        "selftest",
        parents=[common],
        help="fixed built-in check suite on both geometries",
    )
    slf.add_argument(
        "--inject-sign-fault",
        action="store_true",
        help="flip the pointwise rotation sign to demonstrate failure reporting",
    )
    return parser


def _override_seed(spec, seed):
    initial = spec.initial
    if initial.kind == "random":
        initial = dataclasses.replace(initial, seed=seed)
    lyap = spec.lyapunov
    if lyap is not None:
        lyap = dataclasses.replace(lyap, seed=seed)
    return dataclasses.replace(spec, seed=seed, initial=initial, lyapunov=lyap)


def _load_spec(args):
    from . import config as cfg

    with open(args.config, "r", encoding="utf-8") as fh:
        text = fh.read()
    spec = cfg.parse_config(text)
    if args.seed is not None:
        spec = _override_seed(spec, args.seed)
    return spec


# ---------------------------------------------------------------------------
# simulate


def _diag_rows(records, dt):
    from . import verification

    factor = 1.0 + ENVELOPE_SLACK + verification.DT_ALLOWANCE_COEFF * dt * dt
    rows = []
    for r in records:
        flags = int(r.e1 > r.envelope1 * factor) + int(r.e2 > r.envelope2 * factor)
        rows.append(
            ",".join(
                [
                    _fmt(r.t),
                    _fmt(r.u_l2),
                    _fmt(r.u_v),
                    _fmt(r.au_l2),
                    _fmt(r.h_l2),
                    _fmt(r.v_l2),
                    _fmt(r.e1),
                    _fmt(r.e2),
                    _fmt(r.envelope1),
                    _fmt(r.envelope2),
                    _fmt(r.energy_residual),
                    str(flags),
                ]
            )
        )
    return rows


def _param_echo(spec):
    return {
        "geometry": spec.geometry.kind,
        "length": spec.geometry.length,
        "truncation": spec.truncation,
        "nu": spec.nu,
        "alpha": spec.alpha,
        "sigma": spec.sigma,
    }


def _resume_anchor(resume_path, spec):
    """Envelope anchor of the original run, read from meta.json next to the
    snapshot; resumed diagnostics then continue the original envelopes bitwise."""
    meta_path = os.path.join(os.path.dirname(os.path.abspath(resume_path)), "meta.json")
    try:
        with open(meta_path, "r", encoding="utf-8") as fh:
            meta = json.load(fh)
    except (OSError, ValueError):
        return None
    echo = _param_echo(spec)
    if any(meta.get(key) != value for key, value in echo.items()):
        return None
    try:
        return (float(meta["anchor_e1"]), float(meta["anchor_e2"]), float(meta["anchor_t"]))
    except (KeyError, TypeError, ValueError):
        return None


def cmd_simulate(args, spec):
    from . import config as cfg
    from . import dynamics as dyn
    from . import integrate, snapshot, verification
    from . import operators as ops
    from .errors import ConfigurationError, DivergenceError

    plan = cfg.build_plan(spec)
    params = cfg.model_params(plan, spec)
    dyn.validate_params(plan, params)
    scheme = spec.scheme

    if args.resume:
        snap = snapshot.load_snapshot(args.resume)
        snapshot.check_snapshot(snap, plan, params)
        state = snapshot.as_state(snap)
        t_start = snap.t
        anchor = _resume_anchor(args.resume, spec)
    else:
        state = cfg.initial_state(plan, spec)
        t_start = 0.0
        anchor = None
    if anchor is None:
        anchor = (
            ops.energy_e1(plan, state, params.alpha),
            ops.energy_e2(plan, state, params.alpha),
            t_start,
        )
    if scheme.t_end < t_start:
        raise ConfigurationError(
            f"scheme.t_end: {scheme.t_end} is before the start time {t_start}"
        )

    out = _out_dir(args, spec)
    csv_path = os.path.join(out, "diagnostics.csv")
    meta = _param_echo(spec)
    meta.update(
        {
            "anchor_e1": float(anchor[0]),
            "anchor_e2": float(anchor[1]),
            "anchor_t": float(anchor[2]),
            "dt": scheme.dt,
            "t_end": scheme.t_end,
            "stride": scheme.stride,
            "method": scheme.method,
            "t_start": t_start,
            "seed": spec.seed,
            "diagnostics": "diagnostics.csv",
            "snapshot": "final.bdna",
        }
    )

    records = []

    def observe(t, st):
        records.append(verification.energy_record(plan, st, params, t, anchor))

    if scheme.t_end == t_start:
        # zero-length run: header-only diagnostics plus the initial snapshot
        _write_lines(csv_path, [_DIAG_HEADER])
        final_state, t_final = state, t_start
    else:
        try:
            traj = integrate.run(
                plan, state, params, scheme, observers=(observe,), t_start=t_start
            )
        except DivergenceError as exc:
            _write_lines(csv_path, [_DIAG_HEADER] + _diag_rows(records, scheme.dt))
            meta["diverged_at"] = exc.t
            meta["t_final"] = records[-1].t if records else t_start
            _write_json(os.path.join(out, "meta.json"), meta)
            print(f"error: {exc}; partial diagnostics flushed", file=sys.stderr)
            return 1
        _write_lines(csv_path, [_DIAG_HEADER] + _diag_rows(records, scheme.dt))
        final_state, t_final = traj.final_state, traj.final_time

    snapshot.save_snapshot(os.path.join(out, "final.bdna"), plan, final_state, t_final, params)
    meta["t_final"] = t_final
    _write_json(os.path.join(out, "meta.json"), meta)
    return 0


# ---------------------------------------------------------------------------
# lyapunov


def cmd_lyapunov(args, spec):
    import numpy as np

    from . import config as cfg
    from . import lyapunov
    from .errors import ConfigurationError

    if spec.lyapunov is None:
        raise ConfigurationError("lyapunov: missing required block")
    plan = cfg.build_plan(spec)
    params = cfg.model_params(plan, spec)
    state = cfg.initial_state(plan, spec)

    report = lyapunov.benettin_run(plan, state, params, spec.scheme, spec.lyapunov)
    verdict = lyapunov.compare_bound(plan, report, params)

    out = _out_dir(args, spec)
    n = spec.lyapunov.n_ensemble
    header = ",".join(
        ["t"] + [f"mu_{k}" for k in range(1, n + 1)] + [f"q_{k}" for k in range(1, n + 1)]
    )
    lines = [header]
    for row in range(report.t_series.size):
        mu = np.sort(report.mu_series[row])[::-1]
        q = np.cumsum(mu)
        lines.append(",".join([_fmt(report.t_series[row])] + [_fmt(x) for x in mu] + [_fmt(x) for x in q]))
    _write_lines(os.path.join(out, "exponents.csv"), lines)

    payload = _param_echo(spec)
    payload.update(
        {
            "exponents": report.exponents,
            "q_partial": report.q_partial,
            "dim_ky": report.dim_ky,
            "ky_saturated": report.ky_saturated,
            "nstar": report.nstar,
            "measured_crossing": verdict["measured_crossing"],
            "consistent": verdict["consistent"],
            "n_ensemble": spec.lyapunov.n_ensemble,
            "t_transient": spec.lyapunov.t_transient,
            "t_average": spec.lyapunov.t_average,
            "renorm_interval": spec.lyapunov.renorm_interval,
            "seed": spec.lyapunov.seed,
        }
    )
    _write_json(os.path.join(out, "lyapunov.json"), payload)
    return 0


# ---------------------------------------------------------------------------
# bounds


_SWEEP_FIELDS = (
    "lambda_1",
    "delta",
    "delta_prime",
    "l1",
    "l2",
    "grashof",
    "nstar",
    "rho0",
    "rho1",
    "rho1_tilde",
    "rho2",
    "rho_v_sum",
    "average_enstrophy_bound",
)


def cmd_bounds(args, spec):
    from . import bounds
    from . import config as cfg

    plan = cfg.build_plan(spec)
    params = cfg.model_params(plan, spec)
    out = _out_dir(args, spec)
    _write_json(os.path.join(out, "bounds.json"), bounds.bounds_report(plan, params))

    if spec.sweep is not None:
        key, values = spec.sweep
        lines = ["parameter,value," + ",".join(_SWEEP_FIELDS)]
        for value in values:
            p = cfg.model_params(plan, spec, **{key: value})
            norms = bounds.forcing_norms(plan, p.forcing)
            c = bounds.constants(plan, p, norms)
            radii = bounds.absorbing_radii(plan, p, norms)
            point = {
                "lambda_1": c.lambda_1,
                "delta": c.delta,
                "delta_prime": c.delta_prime,
                "l1": c.l1,
                "l2": c.l2,
                "grashof": bounds.grashof(p.nu, norms.total),
                "nstar": bounds.attractor_bound(plan, p, norms),
                "rho0": radii.rho0,
                "rho1": radii.rho1,
                "rho1_tilde": radii.rho1_tilde,
                "rho2": radii.rho2,
                "rho_v_sum": radii.rho_v_sum,
                "average_enstrophy_bound": bounds.average_enstrophy_bound(plan, p, norms),
            }
            lines.append(
                ",".join([key, _fmt(value)] + [_fmt(point[f]) for f in _SWEEP_FIELDS])
            )
        _write_lines(os.path.join(out, "bounds_sweep.csv"), lines)
    return 0


# ---------------------------------------------------------------------------
# verify / selftest check suites


def _run_check(name, fn):
    from .errors import ModelError

    try:
        ok, detail = fn()
    except ModelError as exc:
        return (name, False, f"error: {exc}")
    return (name, bool(ok), detail)


def _ensure_forced(plan, params):
    """Inject a unit single-mode force when the config carries none, so the
    envelope check exercises a nontrivial balance."""
    import numpy as np

    from . import basis
    from . import dynamics as dyn

    if np.any(params.forcing.f1_curl != 0.0) or np.any(params.forcing.f2 != 0.0):
        return params
    c = np.zeros(plan.n_modes)
    index = (2, 1) if plan.geometry.kind == basis.SPHERE else (1, 1)
    c[basis.mode_slot(plan, index)] = 1.0
    return dyn.ModelParams(
        nu=params.nu,
        alpha=params.alpha,
        sigma=params.sigma,
        forcing=dyn.Forcing(c, np.zeros(plan.n_harmonic)),
    )


def _library_checks(plan, params, seed, prefix=""):
    import numpy as np

    from . import basis, integrate, verification
    from . import dynamics as dyn
    from . import operators as ops

    def roundtrip():
        rng = np.random.default_rng(seed)
        coeffs = rng.standard_normal(plan.n_modes) / np.sqrt(1.0 + plan.lam)
        f = basis.synthesize(plan, coeffs)
        back = basis.analyze(plan, f)
        rel = np.linalg.norm(back - coeffs) / np.linalg.norm(coeffs)
        ss = float(np.dot(coeffs, coeffs))
        parseval = abs(basis.integrate(plan, f * f) - ss) / ss
        worst = max(float(rel), float(parseval))
        return worst <= 1e-12, f"max residual {worst:.3e}"

    def identities():
        table = verification.identity_suite(plan, params, seed, n_states=20)
        worst = max(float(np.max(vals)) for vals in table.values())
        return worst <= 1e-9, f"max residual {worst:.3e}"

    def tangent():
        eps = 1e-6
        worst = 0.0
        for i in range(5):
            rng = np.random.default_rng(seed + 1000 + i)
            u = ops.VelocityState(
                basis.dealias(plan, rng.standard_normal(plan.n_modes) / (1.0 + plan.lam)),
                rng.standard_normal(plan.n_harmonic),
            )
            w = ops.VelocityState(
                basis.dealias(plan, rng.standard_normal(plan.n_modes) / (1.0 + plan.lam)),
                rng.standard_normal(plan.n_harmonic),
            )
            plus = ops.VelocityState(u.psi + eps * w.psi, u.harmonic + eps * w.harmonic)
            minus = ops.VelocityState(u.psi - eps * w.psi, u.harmonic - eps * w.harmonic)
            fp = dyn.rhs_u(plan, plus, params)
            fm = dyn.rhs_u(plan, minus, params)
            lin = dyn.rhs_tangent(plan, w, u, params)
            num = np.linalg.norm((fp.psi - fm.psi) / (2 * eps) - lin.psi) + np.linalg.norm(
                (fp.harmonic - fm.harmonic) / (2 * eps) - lin.harmonic
            )
            den = np.linalg.norm(lin.psi) + np.linalg.norm(lin.harmonic)
            worst = max(worst, num / den)
        return worst <= 1e-6, f"max residual {worst:.3e}"

    def envelopes():
        run_params = _ensure_forced(plan, params)
        rng = np.random.default_rng(seed)
        psi = basis.dealias(plan, rng.standard_normal(plan.n_modes) / (1.0 + plan.lam))
        state = ops.VelocityState(psi, np.zeros(plan.n_harmonic))
        scheme = integrate.SchemeConfig(dt=0.005, t_end=2.0, method=integrate.IF_RK4, stride=10)
        traj = integrate.run(plan, state, run_params, scheme)
        recs = verification.trajectory_diagnostics(plan, traj, run_params)
        bad = verification.check_trajectory(
            plan, recs, run_params, slack=ENVELOPE_SLACK, dt=scheme.dt
        )
        return not bad, f"{len(bad)} violation(s) in {len(recs)} samples"

    return [
        _run_check(prefix + "transform-roundtrip", roundtrip),
        _run_check(prefix + "operator-identities", identities),
        _run_check(prefix + "tangent-linearization", tangent),
        _run_check(prefix + "gronwall-envelopes", envelopes),
    ]


def _recheck_run_dir(plan, params, out):
    """Re-test the recorded energies of a completed run directory against the
    recorded envelopes (columns E1/E2 vs env1/env2 of diagnostics.csv)."""
    from . import verification

    def recheck():
        csv_path = os.path.join(out, "diagnostics.csv")
        dt = 0.0
        try:
            with open(os.path.join(out, "meta.json"), "r", encoding="utf-8") as fh:
                dt = float(json.load(fh).get("dt", 0.0))
        except (OSError, ValueError, TypeError):
            pass
        factor = 1.0 + ENVELOPE_SLACK + verification.DT_ALLOWANCE_COEFF * dt * dt
        bad = 0
        total = 0
        with open(csv_path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
            cols = {name: k for k, name in enumerate(header)}
            for line in fh:
                parts = line.strip().split(",")
                total += 1
                e1, env1 = float(parts[cols["E1"]]), float(parts[cols["env1"]])
                e2, env2 = float(parts[cols["E2"]]), float(parts[cols["env2"]])
                bad += int(e1 > env1 * factor) + int(e2 > env2 * factor)
        return bad == 0, f"{bad} violation(s) in {total} rows"

    return _run_check("run-envelopes", recheck)


def _print_table(checks):
    width = max(len(name) for name, _, _ in checks)
    print(f"{'check':<{width}}  status  detail")
    failures = sum(0 if ok else 1 for _, ok, _ in checks)
    for name, ok, detail in checks:
        print(f"{name:<{width}}  {'PASS' if ok else 'FAIL':<6}  {detail}")
    if failures:
        sys.stdout.flush()
        print(f"{failures} check(s) failed", file=sys.stderr)
        return 1
    return 0


def cmd_verify(args, spec):
    from . import config as cfg
    from . import dynamics as dyn

    plan = cfg.build_plan(spec)
    params = cfg.model_params(plan, spec)
    dyn.validate_params(plan, params)
    seed = spec.seed if spec.seed is not None else 0
    checks = _library_checks(plan, params, seed)
    run_dir = args.out or spec.out
    if run_dir and os.path.isfile(os.path.join(run_dir, "diagnostics.csv")):
        checks.append(_recheck_run_dir(plan, params, run_dir))
    return _print_table(checks)


def cmd_selftest(args):
    import numpy as np

    from . import basis, snapshot
    from . import dynamics as dyn
    from . import integrate
    from . import operators as ops
    from .errors import CorruptSnapshotError

    restore = None
    if args.inject_sign_fault:
        restore = ops.rot90

        def unsigned_rot90(vec):
            # deliberately wrong: drops the minus sign of the rotation
            return np.stack((vec[..., 1, :, :], vec[..., 0, :, :]), axis=-3)

        ops.rot90 = unsigned_rot90

    try:
        checks = []
        for kind in (basis.SPHERE, basis.TORUS):
            if kind == basis.SPHERE:
                plan = basis.build_plan(basis.sphere(), 21)
                sigma, index, f2 = 0.0, (2, 1), np.zeros(0)
            else:
                plan = basis.build_plan(basis.torus(2.0 * np.pi), 21)
                sigma, index, f2 = 0.5, (1, 1), np.array([0.1, 0.0])
            c = np.zeros(plan.n_modes)
            c[basis.mode_slot(plan, index)] = 1.0
            params = dyn.ModelParams(nu=1.0, alpha=1.0, sigma=sigma, forcing=dyn.Forcing(c, f2))
            checks.extend(_library_checks(plan, params, seed=0, prefix=kind + ":"))

        def decay():
            plan = basis.build_plan(basis.sphere(), 6)
            params = dyn.ModelParams(nu=1.0, alpha=1.0, sigma=0.0, forcing=dyn.zero_forcing(plan))
            state = ops.state_from_mode(plan, (3, 1), amplitude=0.7)
            lam = basis.eigenvalue(plan, (3, 1))
            scheme = integrate.SchemeConfig(dt=1e-3, t_end=0.5, method=integrate.IF_RK4)
            traj = integrate.run(plan, state, params, scheme)
            expected = ops.norm_l2(plan, state) * np.exp(-params.nu * lam * scheme.t_end)
            rel = abs(ops.norm_l2(plan, traj.final_state) - expected) / expected
            return rel <= 1e-8, f"relative error {rel:.3e}"

        def snapshot_roundtrip():
            plan = basis.build_plan(basis.sphere(), 4)
            params = dyn.ModelParams(nu=1.0, alpha=1.0, sigma=0.0, forcing=dyn.zero_forcing(plan))
            state = ops.random_state(plan, seed=3)
            with tempfile.TemporaryDirectory() as tmp:
                path = os.path.join(tmp, "state.bdna")
                snapshot.save_snapshot(path, plan, state, 1.25, params)
                snap = snapshot.load_snapshot(path)
                snapshot.check_snapshot(snap, plan, params)
                back = snapshot.as_state(snap)
                same = bool(np.array_equal(back.psi, state.psi)) and snap.t == 1.25
                blob = bytearray(open(path, "rb").read())
                blob[-10] ^= 0x01  # flip one payload byte
                open(path, "wb").write(bytes(blob))
                try:
                    snapshot.load_snapshot(path)
                    caught = False
                except CorruptSnapshotError:
                    caught = True
            ok = same and caught
            return ok, "roundtrip bitwise, corruption detected" if ok else "mismatch"

        checks.append(_run_check("eigenmode-decay", decay))
        checks.append(_run_check("snapshot-roundtrip", snapshot_roundtrip))
        return _print_table(checks)
    finally:
        if restore is not None:
            ops.rot90 = restore


# ---------------------------------------------------------------------------
# entry point


def _dispatch(args):
    if args.command == "selftest":
        return cmd_selftest(args)
    spec = _load_spec(args)
    if args.command == "simulate":
        return cmd_simulate(args, spec)
    if args.command == "lyapunov":
        return cmd_lyapunov(args, spec)
    if args.command == "bounds":
        return cmd_bounds(args, spec)
    return cmd_verify(args, spec)


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    _pin_thread_pools()
    from .errors import (
        ConfigurationError,
        DegenerateEnsembleError,
        DivergenceError,
        IndexRangeError,
        ShapeError,
        SnapshotError,
        UnsupportedGeometryError,
    )

    try:
        return _dispatch(args)
    except (
        ConfigurationError,
        IndexRangeError,
        ShapeError,
        SnapshotError,
        UnsupportedGeometryError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DivergenceError, DegenerateEnsembleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
