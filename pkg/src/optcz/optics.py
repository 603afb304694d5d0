"""Post-selected two-photon linear optics.

Two mode orderings appear here:

* design ordering ``(q1-0, q2-0, q1-1, q2-1)``, used by :mod:`optcz.design`
  and by :func:`amplitude` / :func:`effective_map`;
* polarization ordering ``(beam1-H, beam1-V, beam2-H, beam2-V)``, used by the
  component model. Logical 0 is H and logical 1 is V for both qubits, so
  :func:`to_design_order` is a fixed permutation.
"""

import json
from dataclasses import dataclass, field, replace
from itertools import product

import jsonschema
import numpy as np

from .design import QUBIT1_MODES, QUBIT2_MODES, assemble_A, dual_rail_occupation
from .errors import ConfigError, DomainError, ExtinctionError, ShapeError
from .numkernel import as_matrix, max_singular_value, permanent_sub

POLARIZATION_MODES = ("1H", "1V", "2H", "2V")
_DESIGN_FROM_POLARIZATION = [0, 2, 1, 3]


def to_design_order(A):
    """Reorder a polarization-ordered mode matrix into design ordering."""
    A = as_matrix(A)
    p = _DESIGN_FROM_POLARIZATION
    return A[np.ix_(p, p)]


def to_polarization_order(A):
    A = as_matrix(A)
    p = np.argsort(_DESIGN_FROM_POLARIZATION)
    return A[np.ix_(p, p)]


# -- processes ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class KrausMap:
    """Completely positive (generally trace-decreasing) two-qubit map."""

    kraus: tuple

    def apply(self, rho):
        rho = np.asarray(rho, dtype=complex)
        return sum(K @ rho @ K.conj().T for K in self.kraus)

    def choi(self):
        """Choi matrix on input (x) output, ``sum |i><j| (x) E(|i><j|)``."""
        chi = np.zeros((16, 16), dtype=complex)
        for K in self.kraus:
            v = np.asarray(K).T.reshape(16)  # v[i*4 + o] = K[o, i]
            chi += np.outer(v, v.conj())
        return chi


def as_process(process):
    """Wrap a bare 4x4 effective map as a single-Kraus process."""
    if isinstance(process, KrausMap):
        return process
    M = as_matrix(process, "effective map")
    if M.shape != (4, 4):
        raise ShapeError(f"effective map must be 4x4, got {M.shape}")
    return KrausMap((M,))


# -- amplitudes and effective maps --------------------------------------------


def amplitude(A, in_occ, out_occ):
    """Transition amplitude between single-occupancy Fock states."""
    return permanent_sub(A, out_occ, in_occ)


def effective_map(A):
    """Post-selected 4x4 map on the computational basis (design ordering).

    ``M[2*k + l, 2*i + j]`` is the amplitude for ``|i, j> -> |k, l>``.
    """
    A = as_matrix(A, "A")
    if A.shape != (4, 4):
        raise ShapeError(f"A must be 4x4, got {A.shape}")
    M = np.zeros((4, 4), dtype=complex)
    for i, j, k, l in product((0, 1), repeat=4):
        M[2 * k + l, 2 * i + j] = amplitude(A, dual_rail_occupation(i, j), dual_rail_occupation(k, l))
    return M


def classical_kraus(A):
    """Kraus pair for fully distinguishable photons: ``(direct, exchanged)``.

    The direct term keeps each photon on its own qubit; the exchanged term
    swaps them. Their coherent sum is :func:`effective_map`.
    """
    A = as_matrix(A, "A")
    direct = np.zeros((4, 4), dtype=complex)
    exchanged = np.zeros((4, 4), dtype=complex)
    for i, j, k, l in product((0, 1), repeat=4):
        a1, a2 = QUBIT1_MODES[i], QUBIT2_MODES[j]
        b1, b2 = QUBIT1_MODES[k], QUBIT2_MODES[l]
        direct[2 * k + l, 2 * i + j] = A[b1, a1] * A[b2, a2]
        exchanged[2 * k + l, 2 * i + j] = A[b1, a2] * A[b2, a1]
    return direct, exchanged


def distinguishability_mix(M_interfering, M_classical, overlap):
    """Convex mixture of interfering and distinguishable-photon evolution.

    ``M_classical`` is the ``(direct, exchanged)`` pair from
    :func:`classical_kraus`; ``overlap`` weights the coherent map.
    """
    overlap = float(overlap)
    if not 0.0 <= overlap <= 1.0:
        raise DomainError(f"overlap must lie in [0, 1], got {overlap}")
    kraus = [np.sqrt(overlap) * as_matrix(M_interfering)]
    if overlap < 1.0:
        kraus += [np.sqrt(1.0 - overlap) * as_matrix(K) for K in M_classical]
    return KrausMap(tuple(k for k in kraus if np.any(k)))


def apply(M, psi):
    """Apply a post-selected map to a pure state.

    Returns the normalized output state and the success probability.
    """
    psi = np.asarray(psi, dtype=complex).reshape(4)
    if abs(np.linalg.norm(psi) - 1.0) > 1e-12:
        raise ValueError("input state must be normalized")
    out = as_matrix(M) @ psi
    norm = np.linalg.norm(out)
    if norm < 1e-14:
        raise ExtinctionError("post-selected output vanishes for this input")
    return out / norm, float(norm ** 2)


# -- optical components --------------------------------------------------------


def _beam_modes(beam):
    if beam not in (1, 2):
        raise ConfigError(f"beam must be 1 or 2, got {beam!r}")
    return 2 * (beam - 1), 2 * (beam - 1) + 1


@dataclass(frozen=True)
class PBS:
    """Polarizing beam splitter between the two beams.

    ``t_h``/``t_v`` are intensity transmissivities; the ideal device has
    ``t_h = 1`` and ``t_v = 0``. ``phase`` is a parasitic V-versus-H phase on
    the outputs.
    """

    t_h: float = 1.0
    t_v: float = 0.0
    phase: float = 0.0
    kind: str = field(default="PBS", init=False)

    def matrix(self):
        m = np.zeros((4, 4), dtype=complex)
        th, rh = np.sqrt(self.t_h), np.sqrt(1.0 - self.t_h)
        tv, rv = np.sqrt(self.t_v), np.sqrt(1.0 - self.t_v)
        m[np.ix_([0, 2], [0, 2])] = [[th, -rh], [rh, th]]
        m[np.ix_([1, 3], [1, 3])] = np.exp(1j * self.phase) * np.array([[tv, rv], [rv, -tv]])
        return m


def _jones_hwp(angle_deg):
    a = np.deg2rad(2 * angle_deg)
    return np.array([[np.cos(a), np.sin(a)], [np.sin(a), -np.cos(a)]], dtype=complex)


def _jones_qwp(angle_deg):
    a = np.deg2rad(angle_deg)
    c, s = np.cos(a), np.sin(a)
    return np.array(
        [[c * c + 1j * s * s, (1 - 1j) * s * c], [(1 - 1j) * s * c, s * s + 1j * c * c]],
        dtype=complex,
    )


@dataclass(frozen=True)
class HWP:
    """Half-wave plate, fast axis ``angle`` degrees from horizontal."""

    beam: int
    angle: float
    kind: str = field(default="HWP", init=False)

    def matrix(self):
        m = np.eye(4, dtype=complex)
        idx = _beam_modes(self.beam)
        m[np.ix_(idx, idx)] = _jones_hwp(self.angle)
        return m


@dataclass(frozen=True)
class QWP:
    beam: int
    angle: float
    kind: str = field(default="QWP", init=False)

    def matrix(self):
        m = np.eye(4, dtype=complex)
        idx = _beam_modes(self.beam)
        m[np.ix_(idx, idx)] = _jones_qwp(self.angle)
        return m


@dataclass(frozen=True)
class Filter:
    """Attenuator with amplitude transmissivity on ``H``, ``V`` or ``HV``."""

    beam: int
    polarization: str
    transmissivity: float
    kind: str = field(default="Filter", init=False)

    def matrix(self):
        if self.polarization not in ("H", "V", "HV"):
            raise ConfigError(f"filter polarization must be H, V or HV, got {self.polarization!r}")
        if not 0.0 <= self.transmissivity <= 1.0:
            raise ConfigError("filter transmissivity must lie in [0, 1]")
        m = np.eye(4, dtype=complex)
        h, v = _beam_modes(self.beam)
        if "H" in self.polarization:
            m[h, h] = self.transmissivity
        if "V" in self.polarization:
            m[v, v] = self.transmissivity
        return m


@dataclass(frozen=True)
class PhaseShift:
    """Path-length phase on one mode, e.g. ``mode="2H"``."""

    mode: str
    phase: float
    kind: str = field(default="PhaseShift", init=False)

    def matrix(self):
        if self.mode not in POLARIZATION_MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        m = np.eye(4, dtype=complex)
        k = POLARIZATION_MODES.index(self.mode)
        m[k, k] = np.exp(1j * self.phase)
        return m


ELEMENT_TYPES = {cls.__name__: cls for cls in (PBS, HWP, QWP, Filter, PhaseShift)}


def build_network(components):
    """Mode matrix of an ordered component list, in polarization ordering.

    Elements act in list order, so the first element is applied first.
    """
    A = np.eye(4, dtype=complex)
    for element in components:
        matrix = getattr(element, "matrix", None)
        if matrix is None or type(element).__name__ not in ELEMENT_TYPES:
            raise ConfigError(f"unknown element kind: {element!r}")
        A = matrix() @ A
    return A


def ideal_network(phi):
    """Component list of the conceptual gate setup for target phase ``phi``.

    Qubit 2 is flipped before the first PBS and flipped back after the second,
    so both logical-1 modes share beam 2 between the PBSs, where two 22.5 deg
    wave plates form the interferometer that realises the interaction block.
    """
    d = assemble_A(phi)
    return [
        HWP(2, 45.0),
        PBS(),
        PhaseShift("1H", 0.0),
        PhaseShift("1V", 0.0),
        HWP(2, 22.5),
        PhaseShift("2H", d.phi_minus),
        PhaseShift("2V", d.phi_plus),
        Filter(2, "H", d.theta),
        HWP(2, 22.5),
        Filter(1, "HV", d.gamma),
        PBS(),
        HWP(2, 45.0),
    ]


def reference_network():
    """Calibration configuration: no filters, every wave plate at 0 deg."""
    return [HWP(2, 0.0), PBS(), HWP(2, 0.0), HWP(2, 0.0), PBS(), HWP(2, 0.0)]


# -- noise ---------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseProfile:
    """Experimental imperfections.

    The PBS parameters are either one number for every PBS or a sequence
    indexed by PBS order in the component list. ``waveplate_angle_error``
    (degrees) and ``phase_jitter`` (radians) are standard deviations; one
    draw is made per plate / phase element per run.
    """

    pbs_t_h: object = 1.0
    pbs_t_v: object = 0.0
    pbs_phase: object = 0.0
    waveplate_angle_error: float = 0.0
    phase_jitter: float = 0.0
    overlap: float = 1.0

    def __post_init__(self):
        for name in ("pbs_t_h", "pbs_t_v", "pbs_phase"):
            v = getattr(self, name)
            if not np.isscalar(v):
                object.__setattr__(self, name, tuple(float(x) for x in v))
        for name in ("pbs_t_h", "pbs_t_v"):
            if not all(0.0 <= x <= 1.0 for x in np.atleast_1d(getattr(self, name))):
                raise ConfigError(f"{name} must lie in [0, 1]")
        if not 0.0 <= self.overlap <= 1.0:
            raise ConfigError(f"overlap must lie in [0, 1], got {self.overlap}")
        for name in ("waveplate_angle_error", "phase_jitter"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")

    def pbs_parameters(self, k):
        """``(t_h, t_v, phase)`` for the ``k``-th PBS of a network."""
        out = []
        for name in ("pbs_t_h", "pbs_t_v", "pbs_phase"):
            v = getattr(self, name)
            if np.isscalar(v):
                out.append(float(v))
            elif k < len(v):
                out.append(v[k])
            else:
                raise ConfigError(f"{name} lists {len(v)} values but the network has more PBSs")
        return tuple(out)


def perturb(components, noise, seed):
    """Return a perturbed copy of ``components``; deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    out = []
    n_pbs = 0
    for el in components:
        if isinstance(el, PBS):
            t_h, t_v, phase = noise.pbs_parameters(n_pbs)
            n_pbs += 1
            el = replace(el, t_h=t_h, t_v=t_v, phase=el.phase + phase)
        elif isinstance(el, (HWP, QWP)):
            if noise.waveplate_angle_error:
                el = replace(el, angle=el.angle + rng.normal(0.0, noise.waveplate_angle_error))
        elif isinstance(el, PhaseShift):
            if noise.phase_jitter:
                el = replace(el, phase=el.phase + rng.normal(0.0, noise.phase_jitter))
        out.append(el)
    return out


def simulate_process(components, noise=None, seed=0):
    """Two-qubit process realised by a (possibly perturbed) network."""
    noise = noise or NoiseProfile()
    A = to_design_order(build_network(perturb(components, noise, seed)))
    return distinguishability_mix(effective_map(A), classical_kraus(A), noise.overlap)


# -- JSON files ----------------------------------------------------------------

NETWORK_SCHEMA = {
    "type": "object",
    "required": ["components"],
    "properties": {
        "components": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["kind"],
                "oneOf": [
                    {
                        "properties": {
                            "kind": {"const": "PBS"},
                            "t_h": {"type": "number", "minimum": 0, "maximum": 1},
                            "t_v": {"type": "number", "minimum": 0, "maximum": 1},
                            "phase": {"type": "number"},
                        },
                        "additionalProperties": False,
                    },
                    {
                        "properties": {
                            "kind": {"enum": ["HWP", "QWP"]},
                            "beam": {"enum": [1, 2]},
                            "angle": {"type": "number"},
                        },
                        "required": ["beam", "angle"],
                        "additionalProperties": False,
                    },
                    {
                        "properties": {
                            "kind": {"const": "Filter"},
                            "beam": {"enum": [1, 2]},
                            "polarization": {"enum": ["H", "V", "HV"]},
                            "transmissivity": {"type": "number", "minimum": 0, "maximum": 1},
                        },
                        "required": ["beam", "polarization", "transmissivity"],
                        "additionalProperties": False,
                    },
                    {
                        "properties": {
                            "kind": {"const": "PhaseShift"},
                            "mode": {"enum": list(POLARIZATION_MODES)},
                            "phase": {"type": "number"},
                        },
                        "required": ["mode", "phase"],
                        "additionalProperties": False,
                    },
                ],
            },
        }
    },
}

NOISE_SCHEMA = {
    "type": "object",
    "properties": {
        "pbs_t_h": {"$ref": "#/$defs/unit_or_list"},
        "pbs_t_v": {"$ref": "#/$defs/unit_or_list"},
        "pbs_phase": {
            "oneOf": [{"type": "number"}, {"type": "array", "items": {"type": "number"}}]
        },
        "waveplate_angle_error": {"type": "number", "minimum": 0},
        "phase_jitter": {"type": "number", "minimum": 0},
        "overlap": {"type": "number", "minimum": 0, "maximum": 1},
        "assumptions": {"type": "string"},
    },
    "additionalProperties": False,
    "$defs": {
        "unit": {"type": "number", "minimum": 0, "maximum": 1},
        "unit_or_list": {
            "oneOf": [
                {"$ref": "#/$defs/unit"},
                {"type": "array", "items": {"$ref": "#/$defs/unit"}},
            ]
        },
    },
}


def _validate(doc, schema, what):
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid {what}: {exc.message}") from None


def network_to_dict(components):
    items = []
    for el in components:
        d = {"kind": el.kind}
        d.update({k: v for k, v in el.__dict__.items() if k != "kind"})
        items.append(d)
    return {"components": items}


def network_from_dict(doc):
    _validate(doc, NETWORK_SCHEMA, "network description")
    out = []
    for item in doc["components"]:
        item = dict(item)
        cls = ELEMENT_TYPES[item.pop("kind")]
        out.append(cls(**item))
    return out


def noise_from_dict(doc):
    _validate(doc, NOISE_SCHEMA, "noise profile")
    doc = {k: v for k, v in doc.items() if k != "assumptions"}
    return NoiseProfile(**doc)


def noise_to_dict(noise):
    return {k: list(v) if isinstance(v, tuple) else v for k, v in noise.__dict__.items()}


def load_network(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read network file {path}: {exc}") from None
    return network_from_dict(doc)


def load_noise(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read noise profile {path}: {exc}") from None
    return noise_from_dict(doc)


def is_subunitary(A, tol=1e-12):
    return max_singular_value(A) <= 1.0 + tol
