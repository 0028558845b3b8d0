"""Binary snapshot format: roundtrip fidelity and corruption detection."""

import struct

import numpy as np
import pytest

from bardina2d import basis, dynamics, operators as ops, snapshot
from bardina2d.errors import CorruptSnapshotError, SnapshotMismatchError


def sphere_plan(trunc=4):
    return basis.build_plan(basis.sphere(), trunc)


def torus_plan(trunc=3):
    return basis.build_plan(basis.torus(2.0 * np.pi), trunc)


def params_for(plan, nu=0.7, alpha=1.2, sigma=0.0):
    return dynamics.ModelParams(nu, alpha, sigma, dynamics.zero_forcing(plan))


def rand_state(plan, seed=0):
    rng = np.random.default_rng(seed)
    return ops.VelocityState(
        rng.standard_normal(plan.n_modes), rng.standard_normal(plan.n_harmonic)
    )


class TestRoundtrip:
    def test_sphere_bitwise(self, tmp_path):
        plan = sphere_plan()
        params = params_for(plan)
        state = rand_state(plan, 1)
        path = tmp_path / "s.bdna"
        snapshot.save_snapshot(path, plan, state, 2.5, params)
        snap = snapshot.load_snapshot(path)
        assert snap.geometry_kind == basis.SPHERE
        assert snap.truncation == 4
        assert snap.t == 2.5
        assert (snap.nu, snap.alpha, snap.sigma) == (0.7, 1.2, 0.0)
        assert np.array_equal(snap.psi, state.psi)
        assert snap.harmonic.size == 0

    def test_torus_bitwise_with_harmonic(self, tmp_path):
        plan = torus_plan()
        params = params_for(plan, sigma=0.4)
        state = rand_state(plan, 2)
        path = tmp_path / "t.bdna"
        snapshot.save_snapshot(path, plan, state, 0.0, params)
        snap = snapshot.load_snapshot(path)
        assert np.array_equal(snap.psi, state.psi)
        assert np.array_equal(snap.harmonic, state.harmonic)

    def test_as_state_returns_copies(self, tmp_path):
        plan = torus_plan()
        state = rand_state(plan, 3)
        path = tmp_path / "t.bdna"
        snapshot.save_snapshot(path, plan, state, 1.0, params_for(plan, sigma=0.1))
        snap = snapshot.load_snapshot(path)
        out = snapshot.as_state(snap)
        out.psi[:] = 0.0
        out.harmonic[:] = 0.0
        assert np.array_equal(snap.psi, state.psi)
        assert np.array_equal(snap.harmonic, state.harmonic)

    def test_save_load_save_identical_bytes(self, tmp_path):
        plan = sphere_plan()
        params = params_for(plan)
        state = rand_state(plan, 4)
        a, b = tmp_path / "a.bdna", tmp_path / "b.bdna"
        snapshot.save_snapshot(a, plan, state, 3.0, params)
        snap = snapshot.load_snapshot(a)
        snapshot.save_snapshot(b, plan, snapshot.as_state(snap), snap.t, params)
        assert a.read_bytes() == b.read_bytes()


class TestCorruption:
    def write_one(self, tmp_path):
        plan = sphere_plan()
        path = tmp_path / "s.bdna"
        snapshot.save_snapshot(path, plan, rand_state(plan, 5), 1.5, params_for(plan))
        return path

    def test_truncated_file(self, tmp_path):
        path = self.write_one(tmp_path)
        blob = path.read_bytes()
        path.write_bytes(blob[: len(blob) // 2])
        with pytest.raises(CorruptSnapshotError):
            snapshot.load_snapshot(path)

    def test_short_header(self, tmp_path):
        path = tmp_path / "s.bdna"
        path.write_bytes(b"BDNA\x01")
        with pytest.raises(CorruptSnapshotError):
            snapshot.load_snapshot(path)

    def test_bad_magic(self, tmp_path):
        path = self.write_one(tmp_path)
        blob = bytearray(path.read_bytes())
        blob[:4] = b"NOPE"
        path.write_bytes(bytes(blob))
        with pytest.raises(CorruptSnapshotError):
            snapshot.load_snapshot(path)

    def test_bad_version(self, tmp_path):
        path = self.write_one(tmp_path)
        blob = bytearray(path.read_bytes())
        blob[4:8] = struct.pack("<I", snapshot.VERSION + 9)
        path.write_bytes(bytes(blob))
        with pytest.raises(CorruptSnapshotError):
            snapshot.load_snapshot(path)

    def test_bad_geometry_tag(self, tmp_path):
        path = self.write_one(tmp_path)
        blob = bytearray(path.read_bytes())
        blob[8] = 7
        path.write_bytes(bytes(blob))
        with pytest.raises(CorruptSnapshotError):
            snapshot.load_snapshot(path)

    def test_flipped_payload_byte_fails_crc(self, tmp_path):
        path = self.write_one(tmp_path)
        blob = bytearray(path.read_bytes())
        blob[-12] ^= 0x40  # inside the payload, ahead of the CRC trailer
        path.write_bytes(bytes(blob))
        with pytest.raises(CorruptSnapshotError):
            snapshot.load_snapshot(path)

    def test_trailing_garbage_rejected(self, tmp_path):
        path = self.write_one(tmp_path)
        path.write_bytes(path.read_bytes() + b"\x00" * 8)
        with pytest.raises(CorruptSnapshotError):
            snapshot.load_snapshot(path)


class TestMismatch:
    def test_geometry_mismatch(self, tmp_path):
        plan_s = sphere_plan()
        path = tmp_path / "s.bdna"
        snapshot.save_snapshot(path, plan_s, rand_state(plan_s, 6), 0.0, params_for(plan_s))
        snap = snapshot.load_snapshot(path)
        with pytest.raises(SnapshotMismatchError):
            snapshot.check_snapshot(snap, torus_plan())

    def test_truncation_mismatch(self, tmp_path):
        plan = sphere_plan(4)
        path = tmp_path / "s.bdna"
        snapshot.save_snapshot(path, plan, rand_state(plan, 7), 0.0, params_for(plan))
        snap = snapshot.load_snapshot(path)
        with pytest.raises(SnapshotMismatchError):
            snapshot.check_snapshot(snap, sphere_plan(5))

    def test_params_mismatch(self, tmp_path):
        plan = sphere_plan()
        path = tmp_path / "s.bdna"
        snapshot.save_snapshot(path, plan, rand_state(plan, 8), 0.0, params_for(plan, nu=0.7))
        snap = snapshot.load_snapshot(path)
        with pytest.raises(SnapshotMismatchError):
            snapshot.check_snapshot(snap, plan, params_for(plan, nu=0.8))

    def test_matching_check_passes(self, tmp_path):
        plan = torus_plan()
        params = params_for(plan, sigma=0.2)
        path = tmp_path / "t.bdna"
        snapshot.save_snapshot(path, plan, rand_state(plan, 9), 4.0, params)
        snap = snapshot.load_snapshot(path)
        snapshot.check_snapshot(snap, plan)
        snapshot.check_snapshot(snap, plan, params)
