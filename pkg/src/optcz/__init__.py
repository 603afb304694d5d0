"""Optimal post-selected linear-optical controlled-phase gates: design,
simulation and tomographic characterization."""

from .design import (
    DesignSolution,
    GateSpec,
    assemble_A,
    brute_force_optimal_B,
    construct_B,
    damping_theta,
    optimal_success_probability,
    phase_settings,
    verify_gate_conditions,
)
from .numkernel import eigh, permanent, permanent_sub, project_psd, svd2

__version__ = "0.1.0"
