"""Binary state snapshots for exact resume.

Little-endian layout: magic b"BDNA", format version (u32), geometry tag
(u8: 0 sphere, 1 torus), truncation (u32), then t, nu, alpha, sigma as
f64, payload length in coefficients (u64), the coefficient block (f64:
streamfunction coefficients in slot order, then the harmonic pair on the
torus), and finally CRC-32 of the coefficient bytes (u32).

The torus period is not part of the header; a resumed run takes it from
the config, and the mismatch checks therefore cover geometry kind,
truncation, and model parameters, not the period.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from . import basis, operators as ops
from .errors import CorruptSnapshotError, SnapshotMismatchError

MAGIC = b"BDNA"
VERSION = 1
_HEADER = struct.Struct("<4sIBI4dQ")
_TRAILER = struct.Struct("<I")
_GEOMETRY_TAGS = {basis.SPHERE: 0, basis.TORUS: 1}
_GEOMETRY_KINDS = {tag: kind for kind, tag in _GEOMETRY_TAGS.items()}


@dataclass(frozen=True)
class Snapshot:
    """Decoded snapshot: header fields plus the coefficient arrays."""

    geometry_kind: str
    truncation: int
    t: float
    nu: float
    alpha: float
    sigma: float
    psi: np.ndarray
    harmonic: np.ndarray


def _mode_count(kind, truncation):
    if kind == basis.SPHERE:
        return truncation * (truncation + 2), 0
    # torus: every k with max|k| <= K except k = 0, plus the harmonic pair
    return (2 * truncation + 1) ** 2 - 1, 2


def save_snapshot(path, plan, state, t, params):
    """Write one state with its time and model parameters."""
    payload = np.concatenate([state.psi, state.harmonic]).astype("<f8")
    body = payload.tobytes()
    header = _HEADER.pack(
        MAGIC,
        VERSION,
        _GEOMETRY_TAGS[plan.geometry.kind],
        plan.truncation,
        float(t),
        params.nu,
        params.alpha,
        params.sigma,
        payload.size,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body)
        fh.write(_TRAILER.pack(zlib.crc32(body)))


def load_snapshot(path):
    """Read and structurally validate one snapshot."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size + _TRAILER.size:
        raise CorruptSnapshotError(f"{path}: file shorter than the fixed header")
    magic, version, tag, truncation, t, nu, alpha, sigma, count = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise CorruptSnapshotError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise CorruptSnapshotError(f"{path}: unsupported format version {version}")
    if tag not in _GEOMETRY_KINDS:
        raise CorruptSnapshotError(f"{path}: unknown geometry tag {tag}")
    kind = _GEOMETRY_KINDS[tag]
    n_modes, n_harmonic = _mode_count(kind, truncation)
    if count != n_modes + n_harmonic:
        raise CorruptSnapshotError(
            f"{path}: payload of {count} coefficients does not match "
            f"truncation {truncation}"
        )
    body_end = _HEADER.size + 8 * count
    if len(blob) != body_end + _TRAILER.size:
        raise CorruptSnapshotError(f"{path}: truncated or oversized payload")
    body = blob[_HEADER.size : body_end]
    (crc,) = _TRAILER.unpack_from(blob, body_end)
    if crc != zlib.crc32(body):
        raise CorruptSnapshotError(f"{path}: checksum failure")
    coeffs = np.frombuffer(body, dtype="<f8").astype(float)
    return Snapshot(
        geometry_kind=kind,
        truncation=truncation,
        t=t,
        nu=nu,
        alpha=alpha,
        sigma=sigma,
        psi=coeffs[:n_modes],
        harmonic=coeffs[n_modes:],
    )


def check_snapshot(snap, plan, params=None):
    """Raise unless the snapshot belongs to this plan (and parameters)."""
    if snap.geometry_kind != plan.geometry.kind:
        raise SnapshotMismatchError(
            f"snapshot geometry {snap.geometry_kind} != plan {plan.geometry.kind}"
        )
    if snap.truncation != plan.truncation:
        raise SnapshotMismatchError(
            f"snapshot truncation {snap.truncation} != plan {plan.truncation}"
        )
    if params is not None:
        for name, have, want in (
            ("nu", snap.nu, params.nu),
            ("alpha", snap.alpha, params.alpha),
            ("sigma", snap.sigma, params.sigma),
        ):
            if have != want:
                raise SnapshotMismatchError(f"snapshot {name}={have} != config {name}={want}")


def as_state(snap):
    return ops.VelocityState(snap.psi.copy(), snap.harmonic.copy())
