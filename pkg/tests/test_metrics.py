import numpy as np
import pytest
from scipy.stats import unitary_group

from cczsim.gates import gate_unitary, to_standard_ccz
from cczsim.metrics import (
    RobustnessGrid,
    average_gate_fidelity,
    ccz_target,
    leakage,
    leakage_from_unitary,
    leakage_scan,
)

CCZ = ccz_target()


def random_unitary(seed, d=8):
    return unitary_group.rvs(d, random_state=seed)


class TestAverageGateFidelity:
    def test_self_fidelity_exact(self):
        for seed in range(5):
            u = random_unitary(seed)
            assert abs(average_gate_fidelity(u, u) - 1.0) <= 1e-12

    def test_identity_vs_ccz(self):
        assert average_gate_fidelity(np.eye(8), to_standard_ccz(CCZ)) == pytest.approx(44 / 72, abs=1e-14)

    def test_shared_rotation_invariance(self):
        u, v, w = random_unitary(1), random_unitary(2), random_unitary(3)
        assert average_gate_fidelity(w @ u, w @ v) == pytest.approx(average_gate_fidelity(u, v), abs=1e-9)

    def test_bounded_for_contractions(self):
        rng = np.random.default_rng(11)
        for seed in range(20):
            a, b = random_unitary(seed), random_unitary(seed + 100)
            sub = a @ np.diag(rng.uniform(0.0, 1.0, 8)) @ b
            f = average_gate_fidelity(random_unitary(seed + 200), sub)
            assert 0.0 <= f <= 1.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            average_gate_fidelity(np.eye(8), np.eye(4))

    def test_target_phase(self):
        assert CCZ[5, 5] == pytest.approx(-1.0)
        assert np.allclose(np.delete(np.diag(CCZ), 5), 1.0)
        assert ccz_target(phase=np.pi / 2)[5, 5] == pytest.approx(-1j)


class TestLeakage:
    def test_no_pulse(self, sim):
        rep = leakage_from_unitary(np.eye(27), sim.spec.space)
        assert rep.total == 0.0 and rep.second_excited == 0.0

    def test_density_and_vector_agree(self, sim, recipe):
        col = gate_unitary(sim, recipe)[:, sim.index((1, 0, 1))]
        a = leakage(col, sim.spec.space)
        b = leakage(np.outer(col, col.conj()), sim.spec.space)
        assert a.per_state == pytest.approx(b.per_state, abs=1e-15)

    def test_population_budget(self, sim, recipe):
        u = gate_unitary(sim, recipe)
        for k in sim.computational:
            col = u[:, k]
            rep = leakage(col, sim.spec.space)
            comp = sum(abs(col[i]) ** 2 for i in sim.computational)
            assert rep.second_excited + comp == pytest.approx(1.0, abs=1e-6)

    def test_working_point(self, sim, recipe):
        assert leakage_from_unitary(gate_unitary(sim, recipe), sim.spec.space).total <= 0.05

    def test_minimum_inside_window(self, sim, recipe):
        point = recipe.stage1
        shifts = point.delta_working + np.linspace(-2e-3, 2e-3, 9)
        times = point.tau_stage1 + np.linspace(-20.0, 20.0, 41)
        lmap = leakage_scan(sim, shifts, times)
        d_opt, t_opt, l_opt = lmap.optimum()
        assert shifts[0] < d_opt < shifts[-1]
        assert times[0] < t_opt < times[-1]
        i, j = np.argmin(np.abs(times - point.tau_stage1)), np.argmin(np.abs(shifts - point.delta_working))
        assert l_opt <= lmap.total[i, j]


class TestRobustness:
    def test_nominal(self, robustness):
        assert robustness.value.nominal >= 0.99

    def test_locally_maximal_at_origin(self, robustness):
        grid = robustness.value
        i, j = np.unravel_index(int(np.argmax(grid.fidelity)), grid.fidelity.shape)
        dz = grid.zeta_values[1] - grid.zeta_values[0]
        dd = grid.delta_values[1] - grid.delta_values[0]
        assert abs(grid.zeta_values[i]) <= dz + 1e-12
        assert abs(grid.delta_values[j]) <= dd + 1e-12

    def test_summary_fields(self, robustness):
        s = robustness.value.summary()
        assert set(s) == {"min", "argmin", "nominal", "dips", "level_crossing_candidates"}
        assert s["min"] <= s["nominal"]

    def test_shape_checked(self):
        with pytest.raises(ValueError):
            RobustnessGrid(np.zeros(3), np.zeros(2), np.ones((3, 2)))
        with pytest.raises(ValueError):
            RobustnessGrid(np.zeros(2), np.zeros(2), np.full((2, 2), 1.5))
