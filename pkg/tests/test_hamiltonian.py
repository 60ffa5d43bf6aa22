import itertools
import math

import numpy as np
import pytest

from cczsim.hamiltonian import (
    ControlModel,
    DeviceSpec,
    DispersiveError,
    SingularityError,
    anticrossing,
    build_effective,
    build_full,
    charge_coupling,
    dressed_energies,
    effective_coupling,
    effective_from_full,
    paper_device,
    project_101_020,
    resonance_shift,
    synthetic_full_device,
    two_photon_J,
    zero_coupling_frequency,
    zz_coefficients,
)
from cczsim.hilbert import TWO_PI, ModeSpec, basis_index, is_hermitian, ladder

PAPER = paper_device()
ON = {"Q1-Q2": 1.0, "Q2-Q3": 1.0}


def diag_ghz(h, space, occ):
    return float(np.real(h[basis_index(occ, space), basis_index(occ, space)])) / TWO_PI


class TestBuildFull:
    def test_decoupled_harmonic_spectrum(self):
        modes = (ModeSpec("A", 5.0, 0.0, 3), ModeSpec("B", 6.5, 0.0, 2, "coupler"), ModeSpec("C", 4.2, 0.0, 3))
        h = build_full(DeviceSpec(modes, {}, "full"))
        assert np.count_nonzero(h - np.diag(np.diag(h))) == 0
        for occ in itertools.product(range(3), range(2), range(3)):
            expected = 5.0 * occ[0] + 6.5 * occ[1] + 4.2 * occ[2]
            assert diag_ghz(h, modes, occ) == pytest.approx(expected)

    def test_paper_diagonal_and_bare_detuning(self):
        bare = DeviceSpec(PAPER.modes, {}, "full")
        h = build_full(bare)
        e101 = diag_ghz(h, bare.space, (1, 0, 1))
        e020 = diag_ghz(h, bare.space, (0, 2, 0))
        assert e101 == pytest.approx(9.998, abs=1e-12)
        assert e020 == pytest.approx(10.01, abs=1e-12)
        assert 1e3 * (e101 - e020) == pytest.approx(-12.0, abs=1e-9)

    def test_charge_coupling_expansion(self):
        sp = PAPER.space
        a, b = ladder("Q1", "lower", sp), ladder("Q2", "lower", sp)
        ad, bd = a.conj().T, b.conj().T
        assert np.allclose(charge_coupling("Q1", "Q2", sp), a @ b - a @ bd - ad @ b + ad @ bd)

    def test_full_device_hermitian(self):
        full = synthetic_full_device()
        assert is_hermitian(build_full(full))

    def test_flavor_checked(self):
        with pytest.raises(ValueError):
            build_full(PAPER)
        with pytest.raises(KeyError):
            build_full(synthetic_full_device(), {"Q7": 0.1})


class TestBuildEffective:
    def test_zero_coupling_is_diagonal(self):
        h = build_effective(paper_device(coupling=0.0))
        assert np.count_nonzero(h - np.diag(np.diag(h))) == 0

    def test_exchange_element(self):
        h = build_effective(PAPER, activation=ON)
        i, j = basis_index((1, 1, 0), PAPER.space), basis_index((2, 0, 0), PAPER.space)
        assert abs(h[i, j]) / TWO_PI == pytest.approx(0.015 * math.sqrt(2), rel=1e-12)

    def test_excitation_number_conserved(self):
        h = build_effective(PAPER, activation=ON)
        n = sum(ladder(q, "number", PAPER.space) for q in PAPER.qubits)
        assert np.max(np.abs(h @ n - n @ h)) < 1e-12

    def test_switch_off(self):
        off = build_effective(PAPER, activation={"Q1-Q2": 0.0, "Q2-Q3": 0.0})
        assert np.count_nonzero(off - np.diag(np.diag(off))) == 0
        assert is_hermitian(build_effective(PAPER, activation={"Q1-Q2": 0.3, "Q2-Q3": 0.7}))


class TestEffectiveCoupling:
    def test_no_mediated_path(self):
        assert effective_coupling(0.0, 0.0, 0.004, 5.0, 5.1, 6.5) == 0.004

    def test_symmetric_reduction(self):
        g, gqq, w, wc = 0.09, 0.003, 5.0, 6.5
        d, s = w - wc, w + wc
        expected = gqq + g * g * (1 / d - 1 / s)
        assert effective_coupling(g, g, gqq, w, w, wc) == pytest.approx(expected, rel=1e-14)

    def test_zero_coupling_point(self):
        g, gqq, w1, w2 = 0.1, 0.006, 5.0, 5.18
        wc = zero_coupling_frequency(g, g, gqq, w1, w2, 5.8, 12.0)
        assert 5.8 < wc < 12.0
        assert abs(effective_coupling(g, g, gqq, w1, w2, wc)) < 1e-12

    def test_errors(self):
        with pytest.raises(SingularityError):
            effective_coupling(0.05, 0.05, 0.0, 5.0, 5.1, 5.0)
        with pytest.raises(DispersiveError):
            effective_coupling(0.2, 0.05, 0.0, 5.0, 5.1, 5.5)


class TestTwoPhotonJ:
    def test_zero_coupling(self):
        assert two_photon_J(paper_device(coupling=0.0)) == 0.0

    def test_paper_magnitude(self):
        assert 3e-3 <= abs(two_photon_J(PAPER)) <= 4e-3

    def test_quadratic_in_coupling(self):
        assert two_photon_J(paper_device(coupling=0.03)) == pytest.approx(4 * two_photon_J(PAPER), rel=1e-12)

    def test_singularity(self):
        dev = PAPER.with_modes(Q1={"frequency": 5.18 - 0.35})
        with pytest.raises(SingularityError):
            two_photon_J(dev)


class TestProject101020:
    def test_uncoupled_bare_sums(self):
        dev = paper_device(coupling=0.0)
        block = project_101_020(build_effective(dev), dev.space) / TWO_PI
        assert np.allclose(block, np.diag([9.998, 10.01]), atol=1e-12)

    def test_offdiagonal_matches_J(self):
        shift, _ = resonance_shift(PAPER)
        h = ControlModel(PAPER, frame=0.0).hamiltonian({**ON, "Q2": shift})
        block = project_101_020(h, PAPER.space) / TWO_PI
        j = two_photon_J(PAPER, {"Q2": shift})
        assert abs(block[0, 1]) == pytest.approx(abs(j), rel=0.2)

    def test_gap_at_resonance_is_2J(self):
        shift, j_exact = resonance_shift(PAPER)
        h = ControlModel(PAPER, frame=0.0).hamiltonian({**ON, "Q2": shift})
        block = project_101_020(h, PAPER.space) / TWO_PI
        w = np.linalg.eigvalsh(block)
        assert w[1] - w[0] == pytest.approx(2 * abs(block[0, 1]), rel=0.01)
        assert w[1] - w[0] == pytest.approx(2 * j_exact, rel=0.05)

    def test_exact_block_spectrum(self):
        shift, j_exact = resonance_shift(PAPER)
        h = ControlModel(PAPER, frame=0.0).hamiltonian({**ON, "Q2": shift})
        block = project_101_020(h, PAPER.space, exact=True) / TWO_PI
        w = np.linalg.eigvalsh(block)
        full = np.linalg.eigvalsh(h) / TWO_PI
        assert all(np.min(np.abs(full - x)) < 1e-9 for x in w)
        assert w[1] - w[0] == pytest.approx(2 * j_exact, rel=1e-6)

    def test_exact_block_uncoupled(self):
        dev = paper_device(coupling=0.0)
        block = project_101_020(build_effective(dev), dev.space, exact=True) / TWO_PI
        assert np.allclose(block, np.diag([9.998, 10.01]), atol=1e-12)

    def test_anticrossing_minimum(self):
        shift, j = resonance_shift(PAPER)
        _, gaps = anticrossing(PAPER, [shift - 0.002, shift, shift + 0.002])
        assert gaps[1] == pytest.approx(2 * j)
        assert gaps[0] > gaps[1] and gaps[2] > gaps[1]


class TestZZ:
    def test_uncoupled_zero(self):
        dev = paper_device(coupling=0.0)
        zz = zz_coefficients(build_effective(dev), dev.space)
        assert all(abs(v) < 1e-9 for v in zz.as_dict().values())

    def test_idle_full_device_small(self):
        full = synthetic_full_device()
        zz = zz_coefficients(ControlModel(full).h0, full.space)
        j_mhz = 1e3 * abs(two_photon_J(PAPER))
        assert all(np.isfinite(v) for v in zz.as_dict().values())
        assert max(abs(v) for v in zz.as_dict().values()) < 0.1 * j_mhz

    def test_relabel_symmetry(self):
        dev = paper_device(switchable=False)
        flipped = DeviceSpec(tuple(reversed(dev.modes)), dev.couplings, "effective", False)
        z, zf = zz_coefficients(build_effective(dev), dev.space), zz_coefficients(build_effective(flipped), flipped.space)
        # reversing the mode order maps label (a, b, c) to (c, b, a)
        assert zf.zeta12 == pytest.approx(z.zeta23, abs=1e-9)
        assert zf.zeta23 == pytest.approx(z.zeta12, abs=1e-9)
        assert zf.zeta123 == pytest.approx(z.zeta123, abs=1e-9)


class TestSpectrumInvariant:
    @pytest.mark.parametrize("activated", [False, True])
    def test_full_matches_effective(self, activated):
        full = synthetic_full_device()
        values = {c: full.coupler_on[c] - full.mode(c).frequency for c in full.couplers} if activated else {}
        mapped = effective_from_full(full, activated=activated)
        labels = [s for s in itertools.product(range(3), repeat=3) if 1 <= sum(s) <= 2]
        ef = dressed_energies(ControlModel(full).hamiltonian(values), full.space, labels + [(0, 0, 0)])
        ee = dressed_energies(ControlModel(mapped, frame=0.0).h0, mapped.space, labels + [(0, 0, 0)])
        worst = max(abs((ef[s] - ef[(0, 0, 0)]) - (ee[s] - ee[(0, 0, 0)])) / TWO_PI for s in labels)
        assert worst <= 0.05 * 0.015


class TestDeviceSpec:
    def test_validate_rejects_positive_anharmonicity(self):
        with pytest.raises(ValueError, match="anharmonicity"):
            PAPER.with_modes(Q3={"anharmonicity": 0.35}).validate()

    def test_validate_dispersive(self):
        with pytest.raises(DispersiveError):
            paper_device(coupling=0.05).validate()
        assert PAPER.validate() == []

    def test_synthetic_full_device_validates(self):
        full = synthetic_full_device()
        assert isinstance(full.validate(), list)
        assert full.couplers == ["C1", "C2"]
