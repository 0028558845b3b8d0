"""Real spectral bases for scalar fields on the unit 2-sphere and flat square 2-torus.

Both geometries expose the same plan interface: a flat array of real
coefficients against an orthonormal eigenbasis of -Laplacian, sorted by
ascending eigenvalue with deterministic tie-breaking, plus grid transforms
sized so that quadratic products of band-limited fields are analyzed without
aliasing and triple products are integrated exactly by the quadrature.

Sphere
    Real spherical harmonics (Condon-Shortley phase), degrees 1..truncation,
    eigenvalue n(n+1).  Gauss-Legendre latitudes, equispaced longitudes,
    associated-Legendre recurrence for the latitude tables, FFT in longitude.
    Mode (n, m): m >= 0 selects the cos(m phi) member, m < 0 the sin(|m| phi)
    member.  Slot order is (n, m) lexicographic.

Torus
    Fourier modes exp(2*pi*i k.x / L) on [0, L]^2 with max(|k1|, |k2|) <=
    truncation, eigenvalue (2 pi / L)^2 |k|^2.  Uniform N x N grid with
    N = 3*truncation and a 2/3-rule dealias mask keeping |k_i| <=
    floor(2*truncation/3).  Each nonzero lattice vector q labels one real
    basis function: cos for q in the right half-plane (q1 > 0, or q1 == 0 and
    q2 > 0), sin(2 pi k.x/L) with k = -q otherwise.  Slot order is
    (|q|^2, q1, q2) lexicographic.

All transforms broadcast over leading axes: coefficients have shape
(..., n_modes), grid fields (..., nlat, nlon), tangent vector fields
(..., 2, nlat, nlon) with component 0 pointing along theta-hat (sphere,
towards increasing colatitude) or x (torus).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_legendre

from .errors import IndexRangeError, ShapeError, UnsupportedGeometryError

SPHERE = "sphere"
TORUS = "torus"


@dataclass(frozen=True)
class Geometry:
    """Manifold selector.  `length` is the torus period, unused on the sphere."""

    kind: str
    length: float = 0.0

    def __post_init__(self):
        if self.kind not in (SPHERE, TORUS):
            raise UnsupportedGeometryError(f"unknown geometry kind {self.kind!r}")
        if self.kind == TORUS and not self.length > 0.0:
            raise UnsupportedGeometryError("torus geometry requires length > 0")

    @property
    def area(self):
        if self.kind == SPHERE:
            return 4.0 * math.pi
        return self.length**2


def sphere():
    return Geometry(SPHERE)


def torus(length):
    return Geometry(TORUS, float(length))


# ---------------------------------------------------------------------------
# sphere transform core


class _SphereCore:
    """Latitude tables and FFT bookkeeping for one sphere truncation."""

    def __init__(self, lmax):
        self.lmax = lmax
        self.nlat = (3 * lmax + 2 + 1) // 2  # ceil((3L+2)/2)
        self.nlon = _fast_even(3 * lmax + 1)
        mu, w = roots_legendre(self.nlat)
        self.mu = mu
        self.wlat = w
        self.sin_t = np.sqrt(1.0 - mu**2)
        self.phi = 2.0 * np.pi * np.arange(self.nlon) / self.nlon
        # cell weight for the longitude direction
        self.dphi = 2.0 * np.pi / self.nlon

        # normalized associated Legendre tables, n = m..lmax per order m
        # pbar[m] has rows n = n_start(m)..lmax, columns = latitudes
        self.pbar = []
        self.dpbar = []  # d/d(theta)
        self.spbar = []  # m * pbar / sin(theta)
        for m in range(lmax + 1):
            p, dp = _legendre_tables(lmax, m, mu, self.sin_t)
            n_start = max(m, 1)
            rows = slice(n_start - m, lmax - m + 1)
            self.pbar.append(p[rows])
            self.dpbar.append(dp[rows])
            self.spbar.append(m * p[rows] / self.sin_t)

        # flat slot layout: slot(n, m) = n^2 + n + m - 1
        self.n_modes = lmax * (lmax + 2)
        deg = np.zeros(self.n_modes, dtype=np.int64)
        order = np.zeros(self.n_modes, dtype=np.int64)
        for n in range(1, lmax + 1):
            for m in range(-n, n + 1):
                s = n * n + n + m - 1
                deg[s] = n
                order[s] = m
        self.deg = deg
        self.order = order
        self.lam = (deg * (deg + 1)).astype(np.float64)

        self.cos_slots = []
        self.sin_slots = []
        for m in range(lmax + 1):
            ns = np.arange(max(m, 1), lmax + 1)
            self.cos_slots.append(ns * ns + ns + m - 1)
            self.sin_slots.append(ns * ns + ns - m - 1 if m > 0 else None)

        self.k0 = 1.0 / math.sqrt(2.0 * math.pi)
        self.k1 = 1.0 / math.sqrt(math.pi)
        self.qw = np.repeat((self.wlat * self.dphi)[:, None], self.nlon, axis=1)

    # -- scalar --------------------------------------------------------

    def synthesize(self, coeffs):
        lead = coeffs.shape[:-1]
        spec = np.zeros(lead + (self.nlat, self.nlon // 2 + 1), dtype=np.complex128)
        for m in range(self.lmax + 1):
            a = coeffs[..., self.cos_slots[m]] @ self.pbar[m]
            if m == 0:
                spec[..., 0] = self.nlon * self.k0 * a
            else:
                b = coeffs[..., self.sin_slots[m]] @ self.pbar[m]
                spec[..., m] = (0.5 * self.nlon * self.k1) * (a - 1j * b)
        return np.fft.irfft(spec, n=self.nlon, axis=-1)

    def analyze(self, f):
        g = np.fft.rfft(f, axis=-1)
        out = np.empty(f.shape[:-2] + (self.n_modes,))
        for m in range(self.lmax + 1):
            gm = g[..., m] * self.wlat
            if m == 0:
                out[..., self.cos_slots[0]] = (self.dphi * self.k0) * (
                    gm.real @ self.pbar[0].T
                )
            else:
                c = self.dphi * self.k1
                out[..., self.cos_slots[m]] = c * (gm.real @ self.pbar[m].T)
                out[..., self.sin_slots[m]] = -c * (gm.imag @ self.pbar[m].T)
        return out

    # -- gradient ------------------------------------------------------

    def synth_grad(self, coeffs):
        lead = coeffs.shape[:-1]
        spec = np.zeros(lead + (2, self.nlat, self.nlon // 2 + 1), dtype=np.complex128)
        for m in range(self.lmax + 1):
            a = coeffs[..., self.cos_slots[m]]
            if m == 0:
                spec[..., 0, :, 0] = self.nlon * self.k0 * (a @ self.dpbar[0])
            else:
                b = coeffs[..., self.sin_slots[m]]
                c = 0.5 * self.nlon * self.k1
                spec[..., 0, :, m] = c * ((a @ self.dpbar[m]) - 1j * (b @ self.dpbar[m]))
                spec[..., 1, :, m] = 1j * c * ((a @ self.spbar[m]) - 1j * (b @ self.spbar[m]))
        return np.fft.irfft(spec, n=self.nlon, axis=-1)

    def grad_analysis(self, vec):
        gt = np.fft.rfft(vec[..., 0, :, :], axis=-1)
        gp = np.fft.rfft(vec[..., 1, :, :], axis=-1)
        out = np.empty(vec.shape[:-3] + (self.n_modes,))
        for m in range(self.lmax + 1):
            gtm = gt[..., m] * self.wlat
            gpm = gp[..., m] * self.wlat
            if m == 0:
                out[..., self.cos_slots[0]] = (self.dphi * self.k0) * (
                    gtm.real @ self.dpbar[0].T
                )
            else:
                c = self.dphi * self.k1
                out[..., self.cos_slots[m]] = c * (
                    gtm.real @ self.dpbar[m].T + gpm.imag @ self.spbar[m].T
                )
                out[..., self.sin_slots[m]] = c * (
                    -gtm.imag @ self.dpbar[m].T + gpm.real @ self.spbar[m].T
                )
        return out


def _legendre_tables(lmax, m, mu, sin_t):
    """Orthonormal associated Legendre values and theta-derivatives.

    Returns arrays of shape (lmax - m + 1, nlat) for degrees n = m..lmax,
    normalized so the square integrates to 1 over mu in [-1, 1], with the
    Condon-Shortley phase.
    """
    rows = lmax - m + 1
    p = np.zeros((max(rows, 1), mu.size))
    # diagonal seed P_m^m
    pmm = np.full(mu.size, 1.0 / math.sqrt(2.0))
    for k in range(1, m + 1):
        pmm = -math.sqrt((2 * k + 1) / (2.0 * k)) * sin_t * pmm
    if rows <= 0:
        return p, np.zeros_like(p)
    p[0] = pmm
    if rows > 1:
        p[1] = math.sqrt(2 * m + 3.0) * mu * pmm
    for n in range(m + 2, lmax + 1):
        a = math.sqrt((4.0 * n * n - 1.0) / (n * n - m * m))
        b = math.sqrt(((n - 1.0) ** 2 - m * m) / (4.0 * (n - 1.0) ** 2 - 1.0))
        p[n - m] = a * (mu * p[n - m - 1] - b * p[n - m - 2])

    dp = np.zeros_like(p)
    for n in range(m, lmax + 1):
        i = n - m
        acc = n * mu * p[i]
        if i > 0:
            e = math.sqrt((n * n - m * m) * (2.0 * n + 1.0) / (2.0 * n - 1.0))
            acc = acc - e * p[i - 1]
        dp[i] = acc / sin_t
    return p, dp


def _fast_even(n):
    """Smallest even grid length >= n with no prime factor above 7."""
    n = n + (n % 2)
    while True:
        k = n
        for f in (2, 3, 5, 7):
            while k % f == 0:
                k //= f
        if k == 1:
            return n
        n += 2


# ---------------------------------------------------------------------------
# torus transform core


class _TorusCore:
    """FFT bookkeeping for one torus truncation."""

    def __init__(self, kmax, length):
        self.kmax = kmax
        self.length = length
        self.ngrid = 3 * kmax
        n = self.ngrid

        qs = []
        for q1 in range(-kmax, kmax + 1):
            for q2 in range(-kmax, kmax + 1):
                if q1 == 0 and q2 == 0:
                    continue
                qs.append((q1 * q1 + q2 * q2, q1, q2))
        qs.sort()
        self.qvec = np.array([(q1, q2) for _, q1, q2 in qs], dtype=np.int64)
        self.n_modes = len(qs)
        self.lam = (2.0 * np.pi / length) ** 2 * (
            self.qvec[:, 0] ** 2 + self.qvec[:, 1] ** 2
        ).astype(np.float64)

        in_half = (self.qvec[:, 0] > 0) | (
            (self.qvec[:, 0] == 0) & (self.qvec[:, 1] > 0)
        )
        self.is_cos = in_half
        # representative wavevector of the basis function in each slot
        self.kk = np.where(in_half[:, None], self.qvec, -self.qvec)

        slot_of = {(int(q1), int(q2)): s for s, (q1, q2) in enumerate(self.qvec)}
        self.slot_of = slot_of
        reps = self.qvec[in_half]
        self.rep_k = reps
        self.rep_cos = np.array([slot_of[(int(k1), int(k2))] for k1, k2 in reps])
        self.rep_sin = np.array([slot_of[(-int(k1), -int(k2))] for k1, k2 in reps])
        self.ri = reps[:, 0] % n
        self.rj = reps[:, 1] % n
        self.mri = (-reps[:, 0]) % n
        self.mrj = (-reps[:, 1]) % n
        self.wnum = (2.0 * np.pi / length) * reps.astype(np.float64)

        band = math.floor(2 * kmax / 3)
        self.dealias_mask = (np.abs(self.qvec[:, 0]) <= band) & (
            np.abs(self.qvec[:, 1]) <= band
        )

        self.amp = math.sqrt(2.0) / length
        self.cell = (length / n) ** 2
        self.qw = np.full((n, n), self.cell)

    def _pack(self, coeffs):
        n = self.ngrid
        a = coeffs[..., self.rep_cos]
        b = coeffs[..., self.rep_sin]
        z = (0.5 * n * n * self.amp) * (a - 1j * b)
        fhat = np.zeros(coeffs.shape[:-1] + (n, n), dtype=np.complex128)
        fhat[..., self.ri, self.rj] = z
        fhat[..., self.mri, self.mrj] = np.conj(z)
        return fhat

    def synthesize(self, coeffs):
        return np.fft.ifft2(self._pack(coeffs)).real

    def analyze(self, f):
        z = np.fft.fft2(f)
        zr = z[..., self.ri, self.rj]
        c = self.amp * self.length**2 / self.ngrid**2
        out = np.empty(f.shape[:-2] + (self.n_modes,))
        out[..., self.rep_cos] = c * zr.real
        out[..., self.rep_sin] = -c * zr.imag
        return out

    def synth_grad(self, coeffs):
        fhat = self._pack(coeffs)
        n = self.ngrid
        q1 = np.fft.fftfreq(n, d=1.0 / n)
        w1 = (2.0 * np.pi / self.length) * q1
        out = np.empty(coeffs.shape[:-1] + (2, n, n))
        out[..., 0, :, :] = np.fft.ifft2(1j * w1[:, None] * fhat).real
        out[..., 1, :, :] = np.fft.ifft2(1j * w1[None, :] * fhat).real
        return out

    def grad_analysis(self, vec):
        z1 = np.fft.fft2(vec[..., 0, :, :])[..., self.ri, self.rj]
        z2 = np.fft.fft2(vec[..., 1, :, :])[..., self.ri, self.rj]
        c = self.amp * self.length**2 / self.ngrid**2
        zdot = self.wnum[:, 0] * z1 + self.wnum[:, 1] * z2
        out = np.empty(vec.shape[:-3] + (self.n_modes,))
        out[..., self.rep_cos] = c * zdot.imag
        out[..., self.rep_sin] = c * zdot.real
        return out


# ---------------------------------------------------------------------------
# public plan


@dataclass(frozen=True, eq=False)
class BasisPlan:
    """Precomputed transform tables for one geometry and truncation."""

    geometry: Geometry
    truncation: int
    lam: np.ndarray
    dealias_mask: np.ndarray
    n_modes: int
    n_harmonic: int
    area: float
    core: object = field(repr=False)

    @property
    def lambda_1(self):
        return float(self.lam[0])

    @property
    def grid_shape(self):
        if self.geometry.kind == SPHERE:
            return (self.core.nlat, self.core.nlon)
        return (self.core.ngrid, self.core.ngrid)


def build_plan(geometry, truncation):
    """Build the transform plan for `geometry` at the given truncation."""
    if truncation < 1:
        raise IndexRangeError(f"truncation must be >= 1, got {truncation}")
    if geometry.kind == SPHERE:
        core = _SphereCore(truncation)
        mask = np.ones(core.n_modes, dtype=bool)
        n_harm = 0
    else:
        core = _TorusCore(truncation, geometry.length)
        mask = core.dealias_mask
        n_harm = 2
    return BasisPlan(
        geometry=geometry,
        truncation=truncation,
        lam=core.lam,
        dealias_mask=mask,
        n_modes=core.n_modes,
        n_harmonic=n_harm,
        area=geometry.area,
        core=core,
    )


def mode_slot(plan, index):
    """Flat slot of a spectral index: (n, m) on the sphere, (k1, k2) on the torus."""
    a, b = index
    if plan.geometry.kind == SPHERE:
        n, m = int(a), int(b)
        if not (1 <= n <= plan.truncation and -n <= m <= n):
            raise IndexRangeError(f"mode (n={n}, m={m}) outside truncation {plan.truncation}")
        return n * n + n + m - 1
    k1, k2 = int(a), int(b)
    if (k1, k2) == (0, 0) or max(abs(k1), abs(k2)) > plan.truncation:
        raise IndexRangeError(f"mode k=({k1}, {k2}) outside truncation {plan.truncation}")
    return plan.core.slot_of[(k1, k2)]


def eigenvalue(plan, index):
    """Laplacian eigenvalue of one mode index."""
    return float(plan.lam[mode_slot(plan, index)])


def _check_coeffs(plan, coeffs):
    if coeffs.shape[-1] != plan.n_modes:
        raise ShapeError(
            f"coefficient array has {coeffs.shape[-1]} modes, plan has {plan.n_modes}"
        )


def _check_field(plan, f, vec=False):
    want = plan.grid_shape
    got = f.shape[-2:]
    if got != want or (vec and (f.ndim < 3 or f.shape[-3] != 2)):
        raise ShapeError(f"grid field shape {f.shape} does not match plan grid {want}")


def synthesize(plan, coeffs):
    """Evaluate a coefficient array on the plan grid."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    _check_coeffs(plan, coeffs)
    return plan.core.synthesize(coeffs)


def analyze(plan, f):
    """Project a grid field onto the basis by quadrature."""
    f = np.asarray(f, dtype=np.float64)
    _check_field(plan, f)
    return plan.core.analyze(f)


def surface_gradient(plan, coeffs):
    """Tangent gradient of a scalar on the grid, components (theta, phi) or (x, y)."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    _check_coeffs(plan, coeffs)
    return plan.core.synth_grad(coeffs)


def gradient_analysis(plan, vec):
    """Adjoint of `surface_gradient`: slot s of the result is <vec, grad basis_s>."""
    vec = np.asarray(vec, dtype=np.float64)
    _check_field(plan, vec, vec=True)
    return plan.core.grad_analysis(vec)


def dealias(plan, coeffs):
    """Zero coefficients outside the dealias band (identity on the sphere)."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    _check_coeffs(plan, coeffs)
    if plan.geometry.kind == SPHERE:
        return coeffs.copy()
    return np.where(plan.dealias_mask, coeffs, 0.0)


def quad_weights(plan):
    """Quadrature weights over the grid; integrate(f) == sum(qw * f)."""
    return plan.core.qw.copy()


def integrate(plan, f):
    """Surface integral of a grid field by the plan quadrature."""
    f = np.asarray(f, dtype=np.float64)
    _check_field(plan, f)
    out = np.einsum("...jk,jk->...", f, plan.core.qw)
    return float(out) if out.ndim == 0 else out


def grid_points(plan):
    """Coordinate arrays of the plan grid.

    Sphere: (theta, phi) colatitude/longitude 1-d arrays.  Torus: (x, y).
    """
    if plan.geometry.kind == SPHERE:
        return np.arccos(plan.core.mu), plan.core.phi.copy()
    n = plan.core.ngrid
    x = plan.geometry.length * np.arange(n) / n
    return x, x.copy()
