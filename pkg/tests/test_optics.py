import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from optcz.design import (
    assemble_A,
    dual_rail_occupation,
    optimal_success_probability,
    verify_gate_conditions,
)
from optcz.errors import ConfigError, DomainError, ExtinctionError, ShapeError
from optcz.numkernel import permanent
from optcz.optics import (
    HWP,
    PBS,
    Filter,
    KrausMap,
    NoiseProfile,
    PhaseShift,
    QWP,
    amplitude,
    apply,
    as_process,
    build_network,
    classical_kraus,
    distinguishability_mix,
    effective_map,
    ideal_network,
    is_subunitary,
    load_network,
    load_noise,
    network_from_dict,
    network_to_dict,
    noise_from_dict,
    noise_to_dict,
    perturb,
    reference_network,
    simulate_process,
    to_design_order,
    to_polarization_order,
)
from tests.conftest import random_unitary

PI = np.pi
DD = np.full(4, 0.5, dtype=complex)


def _up_to_phase(M, target):
    k = np.unravel_index(np.argmax(abs(target)), target.shape)
    return M * (target[k] / M[k])


class TestAmplitudes:
    def test_worked_examples_at_pi(self):
        A = assemble_A(PI).A
        one_one = dual_rail_occupation(1, 1)
        zero_zero = dual_rail_occupation(0, 0)
        assert amplitude(A, one_one, one_one) == pytest.approx(-1 / 3, abs=1e-12)
        assert amplitude(A, zero_zero, zero_zero) == pytest.approx(1 / 3, abs=1e-12)

    def test_effective_map_pi(self):
        M = effective_map(assemble_A(PI).A)
        np.testing.assert_allclose(M, np.diag([1, 1, 1, -1]) / 3, atol=1e-12)

    @pytest.mark.parametrize("phi", np.linspace(PI / 50, PI, 50))
    def test_effective_map_is_scaled_gate(self, phi):
        M = effective_map(assemble_A(phi).A)
        target = np.sqrt(optimal_success_probability(phi)) * np.diag([1, 1, 1, np.exp(1j * phi)])
        np.testing.assert_allclose(_up_to_phase(M, target), target, atol=1e-10)

    def test_shape(self):
        with pytest.raises(ShapeError):
            effective_map(np.eye(3))

    def test_classical_pair_sums_to_coherent(self, rng):
        A = random_unitary(rng, 4)
        direct, exchanged = classical_kraus(A)
        np.testing.assert_allclose(direct + exchanged, effective_map(A), atol=1e-12)


class TestApply:
    def test_dd_at_pi(self):
        out, p = apply(effective_map(assemble_A(PI).A), DD)
        np.testing.assert_allclose(out, [0.5, 0.5, 0.5, -0.5], atol=1e-12)
        assert p == pytest.approx(1 / 9, abs=1e-12)

    def test_extinction(self):
        with pytest.raises(ExtinctionError):
            apply(np.zeros((4, 4)), DD)

    def test_requires_normalized_input(self):
        with pytest.raises(ValueError):
            apply(np.eye(4), np.ones(4))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_success_bounded_for_subunitary(self, seed):
        rng = np.random.default_rng(seed)
        A = random_unitary(rng, 4) * rng.uniform(0.1, 1.0)
        assert is_subunitary(A)
        psi = rng.normal(size=4) + 1j * rng.normal(size=4)
        psi /= np.linalg.norm(psi)
        try:
            _, p = apply(effective_map(A), psi)
        except ExtinctionError:
            return
        assert 0 <= p <= 1 + 1e-12


class TestComponents:
    def test_empty_network_is_identity(self):
        np.testing.assert_array_equal(build_network([]), np.eye(4))

    def test_hwp45_swaps_polarization(self):
        m = build_network([HWP(1, 45.0)])
        np.testing.assert_allclose(m[:2, :2], [[0, 1], [1, 0]], atol=1e-15)

    def test_qwp_twice_is_hwp(self):
        m = build_network([QWP(1, 30.0), QWP(1, 30.0)])
        h = build_network([HWP(1, 30.0)])
        np.testing.assert_allclose(_up_to_phase(m, h), h, atol=1e-12)

    def test_ideal_pbs(self):
        m = PBS().matrix()
        np.testing.assert_allclose(abs(m), [[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]])

    @pytest.mark.parametrize("t_h, t_v", [(0.95, 0.0), (0.7, 0.2), (1.0, 0.03)])
    def test_pbs_is_unitary(self, t_h, t_v):
        m = PBS(t_h, t_v, 0.3).matrix()
        np.testing.assert_allclose(m.conj().T @ m, np.eye(4), atol=1e-12)

    def test_filter_and_phase(self):
        m = build_network([Filter(2, "V", 0.5), PhaseShift("1V", PI / 2)])
        np.testing.assert_allclose(np.diag(m), [1, 1j, 1, 0.5], atol=1e-15)

    @pytest.mark.parametrize("bad", [Filter(1, "X", 0.5), Filter(1, "H", 1.5), PhaseShift("3H", 0.0), HWP(3, 0.0)])
    def test_invalid_elements(self, bad):
        with pytest.raises(ConfigError):
            build_network([bad])

    def test_unknown_element(self):
        with pytest.raises(ConfigError):
            build_network([object()])

    def test_order_permutation_round_trip(self, rng):
        A = random_unitary(rng, 4)
        np.testing.assert_array_equal(to_polarization_order(to_design_order(A)), A)

    @pytest.mark.parametrize("frac", [0.125, 0.25, 0.5, 0.75, 1.0])
    def test_ideal_network_realises_design(self, frac):
        # equal to the design up to the sign of the off-diagonal coupling
        A = to_design_order(build_network(ideal_network(frac * PI)))
        d = assemble_A(frac * PI)
        assert verify_gate_conditions(A, frac * PI) < 1e-8
        np.testing.assert_allclose(abs(A), abs(d.A), atol=1e-8)
        np.testing.assert_allclose(effective_map(A), effective_map(d.A), atol=1e-8)

    def test_reference_network_is_identity(self):
        np.testing.assert_allclose(build_network(reference_network()), np.eye(4), atol=1e-15)


class TestNoise:
    def test_zero_noise_is_identity(self):
        net = ideal_network(0.5 * PI)
        assert perturb(net, NoiseProfile(), seed=3) == net

    def test_crosstalk_breaks_gate(self):
        net = ideal_network(PI)
        M = simulate_process(net, NoiseProfile(pbs_t_h=0.95)).kraus[0]
        assert np.max(abs(M - np.diag([1, 1, 1, -1]) / 3)) > 1e-3

    def test_per_pbs_parameters(self):
        noise = NoiseProfile(pbs_t_h=(0.95, 1.0))
        out = [el for el in perturb(ideal_network(PI), noise, 0) if isinstance(el, PBS)]
        assert [el.t_h for el in out] == [0.95, 1.0]
        with pytest.raises(ConfigError):
            perturb(ideal_network(PI) + [PBS()], noise, 0)

    def test_seed_determinism(self):
        noise = NoiseProfile(waveplate_angle_error=0.5, phase_jitter=0.1)
        net = ideal_network(0.5 * PI)
        assert perturb(net, noise, 11) == perturb(net, noise, 11)
        assert perturb(net, noise, 11) != perturb(net, noise, 12)

    @pytest.mark.parametrize(
        "kw", [{"pbs_t_h": 1.2}, {"overlap": -0.1}, {"phase_jitter": -1.0}, {"pbs_t_v": (0.1, 2.0)}]
    )
    def test_validation(self, kw):
        with pytest.raises(ConfigError):
            NoiseProfile(**kw)


class TestDistinguishability:
    def test_fully_distinguishable_at_pi(self):
        A = assemble_A(PI).A
        proc = distinguishability_mix(effective_map(A), classical_kraus(A), 0.0)
        rho = np.zeros((4, 4), dtype=complex)
        rho[3, 3] = 1
        assert np.trace(proc.apply(rho)).real == pytest.approx(5 / 9, abs=1e-12)

    def test_fidelity_decreases_with_overlap_loss(self):
        A = assemble_A(PI).A
        M, pair = effective_map(A), classical_kraus(A)
        rho_in = np.outer(DD, DD.conj())
        target = np.array([0.5, 0.5, 0.5, -0.5])
        fids = []
        for w in np.linspace(1.0, 0.0, 11):
            out = distinguishability_mix(M, pair, w).apply(rho_in)
            out /= np.trace(out)
            fids.append((target.conj() @ out @ target).real)
        assert fids[0] == pytest.approx(1.0)
        assert np.all(np.diff(fids) < 0)

    def test_overlap_one_is_single_kraus(self):
        A = assemble_A(PI).A
        proc = distinguishability_mix(effective_map(A), classical_kraus(A), 1.0)
        assert len(proc.kraus) == 1

    def test_overlap_domain(self):
        with pytest.raises(DomainError):
            distinguishability_mix(np.eye(4), (np.eye(4), np.eye(4)), 1.5)

    def test_choi_of_identity(self):
        chi = KrausMap((np.eye(4),)).choi()
        v = np.eye(4).reshape(16)
        np.testing.assert_allclose(chi, np.outer(v, v))

    def test_as_process(self):
        assert isinstance(as_process(np.eye(4)), KrausMap)
        with pytest.raises(ShapeError):
            as_process(np.eye(2))


class TestFiles:
    def test_network_round_trip(self, tmp_path):
        net = ideal_network(0.25 * PI)
        path = tmp_path / "net.json"
        path.write_text(json.dumps(network_to_dict(net)))
        assert load_network(path) == net

    @pytest.mark.parametrize(
        "doc",
        [
            {},
            {"components": [{"kind": "Mirror"}]},
            {"components": [{"kind": "HWP", "beam": 1}]},
            {"components": [{"kind": "Filter", "beam": 1, "polarization": "H", "transmissivity": 2}]},
        ],
    )
    def test_network_schema_errors(self, doc):
        with pytest.raises(ConfigError):
            network_from_dict(doc)

    def test_noise_round_trip(self, tmp_path):
        noise = NoiseProfile(pbs_t_h=(0.95, 1.0), overlap=0.9, phase_jitter=0.05)
        doc = noise_to_dict(noise)
        doc["assumptions"] = "illustrative"
        path = tmp_path / "noise.json"
        path.write_text(json.dumps(doc))
        assert load_noise(path) == noise

    @pytest.mark.parametrize("doc", [{"overlap": 2}, {"pbs_t_h": [0.5, 1.5]}, {"unknown": 1}])
    def test_noise_schema_errors(self, doc):
        with pytest.raises(ConfigError):
            noise_from_dict(doc)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_network(tmp_path / "absent.json")


def test_shipped_profile_matches_builtin():
    from pathlib import Path

    from optcz.pipeline import experimental_noise_profile

    path = Path(__file__).resolve().parents[1] / "profiles" / "experimental.json"
    assert load_noise(path) == experimental_noise_profile()
