import math

import numpy as np
import pytest

from cczsim.calibration import measure_conditional_phases, wrap
from cczsim.gates import (
    BITS,
    GateRecipe,
    RangeError,
    apply_virtual_z,
    assemble_ccz,
    ccphase,
    ccphase_point,
    computational_block,
    gate_unitary,
    run_stage1,
    single_phases,
    to_standard_ccz,
)
from cczsim.metrics import average_gate_fidelity, ccz_target


@pytest.fixture(scope="module")
def report(sim, recipe):
    return assemble_ccz(sim, recipe)


class TestStage1:
    def test_returns_full_space_unitary(self, sim, recipe):
        u = run_stage1(sim, recipe.stage1)
        assert u.shape == (27, 27)
        assert np.allclose(u.conj().T @ u, np.eye(27), atol=1e-9)

    def test_101_returns_with_pi(self, sim, recipe):
        u = run_stage1(sim, recipe.stage1)
        i = sim.index((1, 0, 1))
        assert abs(u[i, i]) ** 2 >= 0.97
        assert abs(wrap(measure_conditional_phases(sim, u).phi13 - math.pi)) < 0.05


class TestVirtualZ:
    def test_zero_phases_identity(self):
        rng = np.random.default_rng(0)
        block = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        assert np.array_equal(apply_virtual_z(block, (0.0, 0.0, 0.0)), block)

    def test_magnitudes_unchanged(self):
        rng = np.random.default_rng(1)
        block = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        out = apply_virtual_z(block, rng.uniform(-np.pi, np.pi, 3))
        assert np.allclose(np.abs(out), np.abs(block), atol=1e-15)

    def test_removes_single_qubit_phases(self, sim):
        phi = np.array([0.3, -1.1, 2.0])
        u = np.eye(27, dtype=complex)
        u[np.ix_(sim.computational, sim.computational)] = np.diag(np.exp(-1j * (BITS @ phi)))
        assert np.allclose(single_phases(sim, u), phi, atol=1e-12)
        fixed = apply_virtual_z(computational_block(sim, u), single_phases(sim, u))
        assert np.allclose(fixed, np.eye(8), atol=1e-12)

    def test_singles_real_positive_after_correction(self, sim, recipe):
        block = apply_virtual_z(computational_block(sim, gate_unitary(sim, recipe)), recipe.vz)
        ref = block[0, 0]
        for k in (0b100, 0b010, 0b001):
            z = block[k, k] / ref
            assert abs(np.angle(z)) < 0.05

    def test_ideal_diagonal_gives_exact_target(self, sim):
        phi = np.array([0.7, 0.2, -0.4])
        target = ccz_target()
        u = np.eye(27, dtype=complex)
        u[np.ix_(sim.computational, sim.computational)] = target * np.exp(-1j * (BITS @ phi))[:, None]
        block = apply_virtual_z(computational_block(sim, u), phi)
        assert np.allclose(block, target, atol=1e-12)
        assert average_gate_fidelity(target, block) == pytest.approx(1.0, abs=1e-12)


class TestStandardBasis:
    def test_relabels_101_to_111(self):
        std = to_standard_ccz(ccz_target())
        assert std[7, 7] == pytest.approx(-1.0)
        assert np.allclose(np.delete(np.diag(std), 7), 1.0)

    def test_involution(self):
        rng = np.random.default_rng(2)
        m = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        assert np.array_equal(to_standard_ccz(to_standard_ccz(m)), m)


class TestAssembledCCZ:
    def test_fidelity_and_duration(self, report):
        assert report.fidelity >= 0.99
        assert report.duration <= 252.2

    def test_bases_agree(self, report):
        assert report.fidelity_standard == pytest.approx(report.fidelity, abs=1e-9)

    def test_residual_phases(self, report):
        # angle errors against the target, in the e^{-i phi} convention
        err = -np.angle(np.diag(report.u_realized) / np.diag(ccz_target()))
        phi111 = err[0b111] - err[0b100] - err[0b010] - err[0b001] + 2 * err[0b000]
        assert abs(wrap(phi111)) <= 0.05
        assert np.max(np.abs(wrap(err - err[0]))) < 0.05

    def test_nearly_diagonal(self, report):
        assert report.offdiag_weight <= 0.02

    def test_singular_values(self, report):
        s = np.linalg.svd(report.u_realized, compute_uv=False)
        assert np.all(s <= 1 + 1e-6)
        assert np.all(s >= 1 - report.leakage.total - 0.01)

    def test_standard_report(self, sim, recipe):
        std = assemble_ccz(sim, recipe, standard_basis=True)
        assert np.real(std.u_realized[7, 7] / std.u_realized[0, 0]) < -0.95

    def test_recipe_round_trip(self, recipe):
        again = GateRecipe.from_dict(recipe.to_dict())
        assert again.to_dict() == recipe.to_dict()


class TestCCPhase:
    def test_half_pi(self, sim, cmap):
        rep, rec, _ = ccphase(sim, math.pi / 2, cmap=cmap)
        ph = measure_conditional_phases(sim, gate_unitary(sim, rec))
        assert ph.phi13 == pytest.approx(math.pi / 2, abs=0.03)
        assert rep.fidelity >= 0.97

    def test_map_covers_band(self, cmap):
        assert cmap.thetas.min() <= 0.2
        assert cmap.thetas.max() >= 6.0

    def test_map_monotone(self, cmap):
        assert cmap.monotone

    def test_out_of_range(self, sim, cmap):
        with pytest.raises(RangeError):
            ccphase_point(sim, cmap, 0.0)
        with pytest.raises(RangeError):
            cmap.bracket(cmap.thetas.max() + 0.1)

    def test_pi_matches_working_point(self, sim, cmap, recipe):
        point = ccphase_point(sim, cmap, math.pi)
        assert abs(point.delta_working - recipe.stage1.delta_working) <= abs(cmap.step)
