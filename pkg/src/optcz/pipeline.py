"""End-to-end characterization of one gate setting: simulate, fit, report."""

from dataclasses import dataclass

import numpy as np

from .optics import NoiseProfile, ideal_network, reference_network, simulate_process
from .tomography import (
    CANONICAL_SETTINGS,
    DEFAULT_EFFICIENCIES,
    build_report,
    compensate_efficiencies,
    estimate_success_probability,
    mle_reconstruct_choi,
    reconstruct_states,
    simulate_counts,
)

TABLE_PHASES = tuple(f * np.pi for f in (0.0, 0.05, 0.125, 0.25, 0.5, 0.75, 1.0))


def derive_seed(seed, *path):
    """Child seed for a named stream (``path``) under a master ``seed``."""
    if seed is None:
        raise ValueError("a seed is required for stochastic commands")
    return int(np.random.SeedSequence([int(seed), *path]).generate_state(1)[0])


# Sub-stream identifiers under the master seed.
NOISE_STREAM = 1
COUNTS_STREAM = 2
REFERENCE_STREAM = 3


def experimental_noise_profile():
    """Imperfections used to mimic the measured degradation.

    Only the first PBS carries the quoted 95 % H transmissivity; overlap and
    jitter magnitudes are assumptions.
    """
    return NoiseProfile(pbs_t_h=(0.95, 1.0), overlap=0.95, phase_jitter=0.05)


def generate_records(phi, pairs_per_setting, noise=None, seed=0, efficiencies=DEFAULT_EFFICIENCIES):
    """Raw gate and reference coincidence records for phase ``phi``."""
    noise = noise or NoiseProfile()
    noise_seed = derive_seed(seed, NOISE_STREAM)
    gate = simulate_process(ideal_network(phi), noise, noise_seed)
    ref = simulate_process(reference_network(), noise, noise_seed)
    records = simulate_counts(
        gate, CANONICAL_SETTINGS, pairs_per_setting, efficiencies, derive_seed(seed, COUNTS_STREAM)
    )
    reference = simulate_counts(
        ref, CANONICAL_SETTINGS, pairs_per_setting, efficiencies, derive_seed(seed, REFERENCE_STREAM)
    )
    return records, reference


@dataclass
class PhaseResult:
    report: object
    choi: object
    states: dict
    records: list
    reference: list


def characterize(phi, pairs_per_setting=1e4, noise=None, seed=0, efficiencies=DEFAULT_EFFICIENCIES,
                 max_iter=5000):
    records, reference = generate_records(phi, pairs_per_setting, noise, seed, efficiencies)
    comp = compensate_efficiencies(records, efficiencies)
    comp_ref = compensate_efficiencies(reference, efficiencies)
    chi = mle_reconstruct_choi(comp, max_iter=max_iter, phi=phi)
    states = reconstruct_states(comp, max_iter=max_iter)
    p_s = estimate_success_probability(comp, comp_ref)
    report = build_report(phi, chi, states, p_s)
    return PhaseResult(report, chi, states, records, reference)
