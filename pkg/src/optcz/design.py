"""Optimal post-selected linear-optical controlled-phase gate design.

The full mode matrix acts on four modes ordered as
``(q1 logical-0, q2 logical-0, q1 logical-1, q2 logical-1)``. The two
logical-0 modes bypass the interaction and are damped by ``gamma``; the two
logical-1 modes meet in the 2x2 block ``B``.
"""

from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy.optimize import minimize

from .errors import DegenerateDesignError, DomainError, OptimizationFailure, ShapeError
from .numkernel import as_matrix, max_singular_value, permanent, permanent_sub

# Modes of qubit 1 and qubit 2 indexed by logical value, in design ordering.
QUBIT1_MODES = (0, 2)
QUBIT2_MODES = (1, 3)

# First beam splitter of the interaction block.
W_SPLITTER = np.array([[-1.0, -1.0], [1.0, -1.0]]) / np.sqrt(2.0)


def _check_phi(phi, allow_zero=True):
    phi = float(phi)
    if not np.isfinite(phi) or phi < 0.0 or phi > np.pi:
        raise DomainError(f"phi outside [0, pi]: {phi!r}")
    if phi == 0.0 and not allow_zero:
        raise DegenerateDesignError("design parameter undefined at phi = 0 (identity gate)")
    return phi


@dataclass(frozen=True)
class GateSpec:
    """Target controlled-phase gate ``diag(1, 1, 1, exp(i phi))``."""

    phi: float

    def __post_init__(self):
        _check_phi(self.phi)

    @property
    def u(self):
        """Diagonal phases ``(u00, u01, u10, u11)``."""
        return np.array([1, 1, 1, np.exp(1j * self.phi)], dtype=complex)

    @property
    def unitary(self):
        return np.diag(self.u)


def ideal_unitary(phi):
    return GateSpec(phi).unitary


def optimal_success_probability(phi):
    """Largest success probability of any post-selected linear-optical CZ(phi)."""
    phi = _check_phi(phi)
    s = abs(np.sin(phi / 2))
    return float(
        (1 + 2 * s + 2 ** 1.5 * np.sin((np.pi - phi) / 4) * np.sqrt(s)) ** -2
    )


def _arccot(x):
    # Branch (-pi/2, pi/2]; the (0, pi) branch breaks the gate conditions.
    return float(np.arctan2(1.0, x)) if x >= 0 else float(np.arctan(1.0 / x))


def damping_theta(phi):
    """Amplitude transmissivity of the filter in the damped interferometer arm."""
    phi = _check_phi(phi, allow_zero=False)
    r = (2 - 2 * np.cos(phi)) ** 0.25
    c = np.cos((phi + np.pi) / 4)
    s = 2 * np.sin(phi / 2)
    ratio = (1 + s - 2 * r * c) / (1 + s + 2 * r * c)
    return float(np.sqrt(min(max(ratio, 0.0), 1.0)))


def phase_settings(phi):
    """Interferometer arm phases ``(phi_plus, phi_minus)`` in radians."""
    phi = _check_phi(phi, allow_zero=False)
    a = 1 / np.tan((phi + np.pi) / 4)
    b = 1 / ((2 - 2 * np.cos(phi)) ** 0.25 * np.sin((phi + np.pi) / 4))
    return _arccot(a + b), _arccot(a - b)


def construct_B(phi):
    """Interaction block ``V diag(1, theta) W`` re-phased so ``B[0, 0] > 0``."""
    phi = _check_phi(phi)
    if phi == 0.0:
        return np.eye(2, dtype=complex)
    theta = damping_theta(phi)
    phi_plus, phi_minus = phase_settings(phi)
    V = np.linalg.inv(W_SPLITTER) @ np.diag([np.exp(1j * phi_plus), np.exp(1j * phi_minus)])
    B = V @ np.diag([1.0, theta]) @ W_SPLITTER
    B = B * np.exp(-1j * np.angle(B[0, 0]))
    B[0, 0] = B[0, 0].real
    return B


@dataclass(frozen=True, eq=False)
class DesignSolution:
    phi: float
    p_s: float
    theta: float
    gamma: float
    phi_plus: float
    phi_minus: float
    W: np.ndarray
    V: np.ndarray
    B: np.ndarray
    A: np.ndarray

    @property
    def residual(self):
        return verify_gate_conditions(self.A, self.phi)

    def to_dict(self):
        def cplx(m):
            return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]

        return {
            "phi": self.phi,
            "p_s": self.p_s,
            "theta": self.theta,
            "gamma": self.gamma,
            "phi_plus": self.phi_plus,
            "phi_minus": self.phi_minus,
            "W": cplx(self.W),
            "V": cplx(self.V),
            "B": cplx(self.B),
            "A": cplx(self.A),
            "residual": self.residual,
        }


def assemble_A(phi):
    """Full optimal design for ``phi``, with ``A = diag(gamma, gamma) (+) B``.

    At ``phi = 0`` the design is the identity; ``theta`` is reported as 1 and
    the arm phases as 0 since no interferometer is needed.
    """
    phi = _check_phi(phi)
    p_s = optimal_success_probability(phi)
    gamma = p_s ** 0.25
    B = construct_B(phi)
    if phi == 0.0:
        theta, phi_plus, phi_minus = 1.0, 0.0, 0.0
        W = V = np.eye(2, dtype=complex)
    else:
        theta = damping_theta(phi)
        phi_plus, phi_minus = phase_settings(phi)
        W = W_SPLITTER.astype(complex)
        V = np.linalg.inv(W_SPLITTER) @ np.diag([np.exp(1j * phi_plus), np.exp(1j * phi_minus)])
    A = np.zeros((4, 4), dtype=complex)
    A[0, 0] = A[1, 1] = gamma
    A[2:, 2:] = B
    return DesignSolution(phi, p_s, theta, gamma, phi_plus, phi_minus, W, V, B, A)


def dual_rail_occupation(i, j):
    """Occupation vector of the two-qubit basis state ``|i, j>`` in design ordering."""
    occ = np.zeros(4, dtype=int)
    occ[QUBIT1_MODES[i]] = 1
    occ[QUBIT2_MODES[j]] = 1
    return occ


def verify_gate_conditions(A, phi):
    """Max deviation of the 16 permanent equations from a scaled CZ(phi).

    The scale is the amplitude ``per A[c0, c0 | c0, c0]`` of the ``|00>`` branch.
    """
    A = as_matrix(A, "A")
    if A.shape != (4, 4):
        raise ShapeError(f"A must be 4x4, got {A.shape}")
    u = GateSpec(phi).u.reshape(2, 2)
    lam = permanent_sub(A, dual_rail_occupation(0, 0), dual_rail_occupation(0, 0))
    worst = 0.0
    for i, j, k, l in product((0, 1), repeat=4):
        amp = permanent_sub(A, dual_rail_occupation(k, l), dual_rail_occupation(i, j))
        target = lam * u[i, j] if (i, j) == (k, l) else 0.0
        worst = max(worst, abs(amp - target))
    return float(worst)


def _spectral_norm_2x2(m00, m01, m10, m11):
    fro2 = abs(m00) ** 2 + abs(m01) ** 2 + abs(m10) ** 2 + abs(m11) ** 2
    det = abs(m00 * m11 - m01 * m10)
    return np.sqrt((fro2 + np.sqrt(max(fro2 * fro2 - 4 * det * det, 0.0))) / 2)


def _unnormalised_block(phi, params):
    # [[1, a], [b, 1]] with a*b = exp(i phi) - 1, so per = exp(i phi) * B00 * B11.
    a = np.exp(params[0] + 1j * params[1])
    b = (np.exp(1j * phi) - 1) / a
    return 1.0, a, b, 1.0


def brute_force_optimal_B(phi, restarts=64, tolerance=1e-6, max_iter=10_000, seed=0):
    """Numerically maximise the success probability over admissible 2x2 blocks.

    Independent of the closed forms: searches blocks with equal real positive
    diagonal and the permanent fixed at ``exp(i phi) * B[0,0]**2``, rescaled
    to largest singular value 1 (the feasibility boundary). Restarts are
    seeded from ``seed`` and the best result wins, so the outcome does not
    depend on evaluation order.

    Returns ``(p_s, B)``.
    """
    phi = _check_phi(phi, allow_zero=False)
    rng = np.random.default_rng(seed)
    starts = np.column_stack(
        [rng.uniform(-2.0, 2.0, restarts), rng.uniform(-np.pi, np.pi, restarts)]
    )

    def neg_ps(x):
        return -_spectral_norm_2x2(*_unnormalised_block(phi, x)) ** -4

    best = None
    for x0 in starts:
        res = minimize(
            neg_ps,
            x0,
            method="Nelder-Mead",
            options={"xatol": 1e-10, "fatol": tolerance * 1e-3, "maxiter": max_iter},
        )
        if not res.success:
            continue
        if best is None or res.fun < best.fun:
            best = res
    if best is None:
        raise OptimizationFailure(f"no restart converged for phi={phi}")
    B = np.array(_unnormalised_block(phi, best.x), dtype=complex).reshape(2, 2)
    B /= max_singular_value(B)
    return float(abs(B[0, 0]) ** 4), B


def block_success_probability(B):
    """Success probability implied by a block with equal diagonal: ``|B00|^4``."""
    B = as_matrix(B)
    return float(abs(B[0, 0]) ** 4)


def effective_phase(B):
    """Phase applied to ``|11>`` by block ``B`` relative to the bypass branch."""
    B = as_matrix(B)
    return float(np.angle(permanent(B) / (B[0, 0] * B[1, 1])))
