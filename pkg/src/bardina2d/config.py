"""JSON run specifications: schema validation with key paths, state builders.

A run spec is one JSON object.  Minimal example:

    {"geometry": "sphere", "truncation": 8, "nu": 1.0, "alpha": 1.0,
     "scheme": {"dt": 0.01, "t_end": 2.0}}

Optional blocks: "forcing" (rotational modes as [index..., amplitude] rows
plus a torus "harmonic" pair), "initial" (zero | eigenmode | random),
"lyapunov" (ensemble settings), "sweep" (bounds parameter sweep), "seed",
"out", and "length" (torus period, required there).  Unknown keys anywhere
are rejected by name so typos cannot silently fall back to defaults.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import basis, dynamics, integrate, lyapunov, operators as ops
from .errors import ConfigurationError

SWEEP_KEYS = ("nu", "alpha", "sigma")


@dataclass(frozen=True)
class InitialSpec:
    """Initial condition: zero, one eigenmode, or a seeded random spectrum."""

    kind: str
    mode: tuple = ()
    amplitude: float = 1.0
    seed: int = 0
    slope: float = 2.0
    energy: float = 1.0


@dataclass(frozen=True)
class RunSpec:
    geometry: basis.Geometry
    truncation: int
    nu: float
    alpha: float
    sigma: float
    forcing_modes: tuple
    forcing_harmonic: tuple
    initial: InitialSpec
    scheme: integrate.SchemeConfig
    lyapunov: lyapunov.LyapunovConfig | None
    seed: int | None
    out: str | None
    sweep: tuple | None


# ---------------------------------------------------------------------------
# validation helpers


def _fail(path, message):
    raise ConfigurationError(f"{path}: {message}")


def _reject_unknown(obj, allowed, path):
    for key in obj:
        if key not in allowed:
            _fail(f"{path}.{key}" if path else key, "unknown key")


def _get_number(obj, key, path, default=None, minimum=None, strict_min=False):
    if key not in obj:
        if default is None:
            _fail(f"{path}{key}", "missing required key")
        return default
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(f"{path}{key}", f"expected a number, got {value!r}")
    value = float(value)
    if minimum is not None:
        if strict_min and not value > minimum:
            _fail(f"{path}{key}", f"must be > {minimum}, got {value}")
        if not strict_min and value < minimum:
            _fail(f"{path}{key}", f"must be >= {minimum}, got {value}")
    return value


def _get_int(obj, key, path, default=None, minimum=None):
    if key not in obj:
        if default is None:
            _fail(f"{path}{key}", "missing required key")
        return default
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(f"{path}{key}", f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        _fail(f"{path}{key}", f"must be >= {minimum}, got {value}")
    return value


def _check_mode_index(geometry, truncation, index, path):
    if geometry.kind == basis.SPHERE:
        if len(index) != 2:
            _fail(path, f"sphere mode index needs (n, m), got {index}")
        n, m = index
        if not (1 <= n <= truncation and -n <= m <= n):
            _fail(path, f"mode (n={n}, m={m}) outside truncation {truncation}")
    else:
        if len(index) != 2:
            _fail(path, f"torus mode index needs (k1, k2), got {index}")
        k1, k2 = index
        if (k1, k2) == (0, 0) or max(abs(k1), abs(k2)) > truncation:
            _fail(path, f"mode k=({k1}, {k2}) outside truncation {truncation}")


# ---------------------------------------------------------------------------
# block parsers


def _parse_forcing(obj, geometry, truncation):
    if obj is None:
        return (), ()
    _reject_unknown(obj, {"modes", "harmonic"}, "forcing")
    modes = []
    for i, row in enumerate(obj.get("modes", [])):
        path = f"forcing.modes[{i}]"
        if not isinstance(row, list) or len(row) != 3:
            _fail(path, f"expected [index, index, amplitude], got {row!r}")
        idx = row[:2]
        for part in idx:
            if isinstance(part, bool) or not isinstance(part, int):
                _fail(path, f"mode indices must be integers, got {row!r}")
        if isinstance(row[2], bool) or not isinstance(row[2], (int, float)):
            _fail(path, f"amplitude must be a number, got {row[2]!r}")
        _check_mode_index(geometry, truncation, tuple(idx), path)
        modes.append((tuple(idx), float(row[2])))
    harmonic = obj.get("harmonic", [])
    if harmonic and geometry.kind == basis.SPHERE:
        _fail("forcing.harmonic", "the sphere has no harmonic component")
    if harmonic:
        if not isinstance(harmonic, list) or len(harmonic) != 2:
            _fail("forcing.harmonic", f"expected a pair, got {harmonic!r}")
        for i, v in enumerate(harmonic):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                _fail(f"forcing.harmonic[{i}]", f"expected a number, got {v!r}")
        harmonic = [float(v) for v in harmonic]
    return tuple(modes), tuple(harmonic)


def _parse_initial(obj, geometry, truncation, top_seed):
    if obj is None:
        return InitialSpec("zero")
    kind = obj.get("kind")
    if kind == "zero":
        _reject_unknown(obj, {"kind"}, "initial")
        return InitialSpec("zero")
    if kind == "eigenmode":
        _reject_unknown(obj, {"kind", "mode", "amplitude"}, "initial")
        mode = obj.get("mode")
        if not isinstance(mode, list) or len(mode) != 2:
            _fail("initial.mode", f"expected an index pair, got {mode!r}")
        _check_mode_index(geometry, truncation, tuple(mode), "initial.mode")
        amp = _get_number(obj, "amplitude", "initial.", default=1.0)
        return InitialSpec("eigenmode", mode=tuple(mode), amplitude=amp)
    if kind == "random":
        _reject_unknown(obj, {"kind", "seed", "slope", "energy"}, "initial")
        seed = obj.get("seed", top_seed)
        if seed is None:
            _fail("initial.seed", "random initial data needs a seed (here or top-level)")
        if isinstance(seed, bool) or not isinstance(seed, int):
            _fail("initial.seed", f"expected an integer, got {seed!r}")
        slope = _get_number(obj, "slope", "initial.", default=2.0)
        energy = _get_number(obj, "energy", "initial.", default=1.0, minimum=0.0, strict_min=True)
        return InitialSpec("random", seed=seed, slope=slope, energy=energy)
    _fail("initial.kind", f"expected zero | eigenmode | random, got {kind!r}")


def _parse_scheme(obj):
    if obj is None:
        _fail("scheme", "missing required key")
    _reject_unknown(obj, {"dt", "t_end", "method", "stride"}, "scheme")
    dt = _get_number(obj, "dt", "scheme.")
    t_end = _get_number(obj, "t_end", "scheme.")
    method = obj.get("method", integrate.IF_RK4)
    stride = _get_int(obj, "stride", "scheme.", default=1)
    try:
        return integrate.SchemeConfig(dt=dt, t_end=t_end, method=method, stride=stride)
    except ConfigurationError as exc:
        raise ConfigurationError(f"scheme: {exc}") from exc


def _parse_lyapunov(obj, top_seed):
    if obj is None:
        return None
    allowed = {"n_ensemble", "t_transient", "t_average", "renorm_interval", "seed"}
    _reject_unknown(obj, allowed, "lyapunov")
    seed = obj.get("seed", top_seed if top_seed is not None else 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        _fail("lyapunov.seed", f"expected an integer, got {seed!r}")
    try:
        return lyapunov.LyapunovConfig(
            n_ensemble=_get_int(obj, "n_ensemble", "lyapunov.", minimum=1),
            t_transient=_get_number(obj, "t_transient", "lyapunov.", default=0.0, minimum=0.0),
            t_average=_get_number(obj, "t_average", "lyapunov."),
            renorm_interval=_get_number(obj, "renorm_interval", "lyapunov."),
            seed=seed,
        )
    except ConfigurationError as exc:
        msg = str(exc)
        raise ConfigurationError(msg if msg.startswith("lyapunov") else f"lyapunov: {msg}") from exc


def _parse_sweep(obj):
    if obj is None:
        return None
    _reject_unknown(obj, {"key", "values"}, "sweep")
    key = obj.get("key")
    if key not in SWEEP_KEYS:
        _fail("sweep.key", f"expected one of {SWEEP_KEYS}, got {key!r}")
    values = obj.get("values")
    if not isinstance(values, list) or not values:
        _fail("sweep.values", "expected a nonempty list of numbers")
    out = []
    for i, v in enumerate(values):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            _fail(f"sweep.values[{i}]", f"expected a number, got {v!r}")
        out.append(float(v))
    return (key, tuple(out))


TOP_KEYS = {
    "geometry",
    "length",
    "truncation",
    "nu",
    "alpha",
    "sigma",
    "forcing",
    "initial",
    "scheme",
    "lyapunov",
    "seed",
    "out",
    "sweep",
}


def parse_config(text):
    """Parse and validate one JSON run spec; every error names its key path."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"malformed JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigurationError("the top level must be a JSON object")
    _reject_unknown(raw, TOP_KEYS, "")
    kind = raw.get("geometry")
    if kind not in (basis.SPHERE, basis.TORUS):
        _fail("geometry", f"expected sphere | torus, got {kind!r}")
    if kind == basis.TORUS:
        length = _get_number(raw, "length", "", minimum=0.0, strict_min=True)
        geometry = basis.torus(length)
    else:
        if "length" in raw:
            _fail("length", "only valid with torus geometry")
        geometry = basis.sphere()
    truncation = _get_int(raw, "truncation", "", minimum=1)
    nu = _get_number(raw, "nu", "", minimum=0.0, strict_min=True)
    alpha = _get_number(raw, "alpha", "", minimum=0.0, strict_min=True)
    sigma = _get_number(raw, "sigma", "", default=0.0, minimum=0.0)
    if kind == basis.TORUS and sigma == 0.0:
        _fail("sigma", "must be positive on the torus (harmonic drag)")
    seed = raw.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int)):
        _fail("seed", f"expected an integer, got {seed!r}")
    out = raw.get("out")
    if out is not None and not isinstance(out, str):
        _fail("out", f"expected a string, got {out!r}")
    modes, harmonic = _parse_forcing(raw.get("forcing"), geometry, truncation)
    return RunSpec(
        geometry=geometry,
        truncation=truncation,
        nu=nu,
        alpha=alpha,
        sigma=sigma,
        forcing_modes=modes,
        forcing_harmonic=harmonic,
        initial=_parse_initial(raw.get("initial"), geometry, truncation, seed),
        scheme=_parse_scheme(raw.get("scheme")),
        lyapunov=_parse_lyapunov(raw.get("lyapunov"), seed),
        seed=seed,
        out=out,
        sweep=_parse_sweep(raw.get("sweep")),
    )


# ---------------------------------------------------------------------------
# realization against a plan


def build_plan(spec):
    return basis.build_plan(spec.geometry, spec.truncation)


def model_params(plan, spec, nu=None, alpha=None, sigma=None):
    """ModelParams for the spec, with optional overrides for sweeps."""
    c = np.zeros(plan.n_modes)
    for index, amplitude in spec.forcing_modes:
        c[basis.mode_slot(plan, index)] += amplitude
    f2 = np.zeros(plan.n_harmonic)
    if spec.forcing_harmonic:
        f2[:] = spec.forcing_harmonic
    return dynamics.ModelParams(
        nu=spec.nu if nu is None else nu,
        alpha=spec.alpha if alpha is None else alpha,
        sigma=spec.sigma if sigma is None else sigma,
        forcing=dynamics.Forcing(c, f2),
    )


def initial_state(plan, spec):
    """Realize the initial condition block against a transform plan."""
    init = spec.initial
    psi = np.zeros(plan.n_modes)
    h = np.zeros(plan.n_harmonic)
    if init.kind == "eigenmode":
        psi[basis.mode_slot(plan, init.mode)] = init.amplitude
    elif init.kind == "random":
        rng = np.random.default_rng(init.seed)
        psi = rng.standard_normal(plan.n_modes) * plan.lam ** (-0.5 * init.slope)
        psi = basis.dealias(plan, psi)
        state = ops.VelocityState(psi, h)
        e1 = ops.energy_e1(plan, state, spec.alpha)
        if e1 > 0.0:
            psi *= np.sqrt(init.energy / e1)
    return ops.VelocityState(psi, h)
