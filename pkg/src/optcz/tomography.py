"""Process and state tomography of the two-qubit gate.

Synthetic coincidence data for the 36 x 9 x 4 protocol, detector-efficiency
compensation, maximum-likelihood reconstruction of the Choi matrix and of
output states, and the figures of merit reported per phase.
"""

import csv
import json
import logging
from dataclasses import dataclass
from itertools import product

import numpy as np

from .design import ideal_unitary, optimal_success_probability
from .errors import (
    CalibrationError,
    CompletenessError,
    ConfigError,
    ConsistencyError,
    FormulaDomainError,
    IterationLimitError,
)
from .numkernel import eigh
from .optics import as_process

log = logging.getLogger(__name__)

_S = 1 / np.sqrt(2)
STATES = {
    "H": np.array([1, 0], dtype=complex),
    "V": np.array([0, 1], dtype=complex),
    "D": np.array([_S, _S], dtype=complex),
    "A": np.array([_S, -_S], dtype=complex),
    "R": np.array([_S, 1j * _S], dtype=complex),
    "L": np.array([_S, -1j * _S], dtype=complex),
}
INPUT_LABELS = ("H", "V", "D", "A", "R", "L")
BASES = {"HV": ("H", "V"), "DA": ("D", "A"), "RL": ("R", "L")}
BASIS_LABELS = ("HV", "DA", "RL")
DEFAULT_EFFICIENCIES = (1.0, 0.9, 0.85, 0.95)  # D1H, D1V, D2H, D2V
CSV_HEADER = ["input1", "input2", "basis1", "basis2", "outcome1", "outcome2", "count"]


@dataclass(frozen=True, order=True)
class MeasurementSetting:
    input1: str
    input2: str
    basis1: str
    basis2: str
    outcome1: int
    outcome2: int

    @property
    def inputs(self):
        return self.input1, self.input2

    @property
    def detectors(self):
        """Indices of the two firing detectors in ``(D1H, D1V, D2H, D2V)``."""
        return self.outcome1, 2 + self.outcome2

    def input_vector(self):
        return np.kron(STATES[self.input1], STATES[self.input2])

    def projector_vector(self):
        a = STATES[BASES[self.basis1][self.outcome1]]
        b = STATES[BASES[self.basis2][self.outcome2]]
        return np.kron(a, b)

    def __str__(self):
        return (
            f"{self.input1}{self.input2}/{self.basis1},{self.basis2}/"
            f"{self.outcome1}{self.outcome2}"
        )


@dataclass(frozen=True)
class CoincidenceRecord:
    setting: MeasurementSetting
    count: float
    expected_pairs: float = 0.0


def generate_settings():
    """All 1296 settings in canonical order."""
    return [
        MeasurementSetting(i1, i2, b1, b2, o1, o2)
        for i1, i2 in product(INPUT_LABELS, repeat=2)
        for b1, b2 in product(BASIS_LABELS, repeat=2)
        for o1, o2 in product((0, 1), repeat=2)
    ]


CANONICAL_SETTINGS = tuple(generate_settings())
_CANONICAL_INDEX = {s: k for k, s in enumerate(CANONICAL_SETTINGS)}


def outcome_probability(process, setting):
    """Joint probability of post-selection success and the given outcome."""
    proc = as_process(process)
    psi = setting.input_vector()
    proj = setting.projector_vector()
    rho_out = proc.apply(np.outer(psi, psi.conj()))
    return float(np.real(proj.conj() @ rho_out @ proj))


def outcome_probabilities(process, settings):
    """Vectorised :func:`outcome_probability` over many settings."""
    proc = as_process(process)
    psis = np.array([s.input_vector() for s in settings])
    projs = np.array([s.projector_vector() for s in settings])
    total = np.zeros(len(settings))
    for K in proc.kraus:
        amp = np.einsum("so,oi,si->s", projs.conj(), K, psis)
        total += np.abs(amp) ** 2
    return total


def _check_efficiencies(efficiencies):
    eta = np.asarray(efficiencies, dtype=float)
    if eta.shape != (4,):
        raise ConfigError("need four detector efficiencies (D1H, D1V, D2H, D2V)")
    if np.any(eta <= 0) or np.any(eta > 1):
        raise ConfigError(f"detector efficiencies must lie in (0, 1], got {tuple(eta)}")
    return eta


def setting_rng(seed, index):
    """Independent generator for setting ``index`` derived from ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def simulate_counts(process, settings, pairs_per_setting, efficiencies=(1, 1, 1, 1), seed=0):
    """Poisson coincidence counts for each setting.

    The mean for a setting is ``pairs * probability * eta_i * eta_j``. Each
    setting draws from its own generator keyed by its canonical index, so a
    record does not depend on which other settings are simulated.
    """
    if pairs_per_setting <= 0:
        raise ConfigError("pairs_per_setting must be positive")
    eta = _check_efficiencies(efficiencies)
    probs = np.clip(outcome_probabilities(process, settings), 0.0, None)
    records = []
    for s, p in zip(settings, probs):
        i, j = s.detectors
        mean = pairs_per_setting * p * eta[i] * eta[j]
        key = _CANONICAL_INDEX.get(s, len(_CANONICAL_INDEX))
        count = int(setting_rng(seed, key).poisson(mean))
        records.append(CoincidenceRecord(s, count, float(pairs_per_setting)))
    return records


def compensate_efficiencies(records, efficiencies):
    """Rescale each count by ``1 / (eta_i * eta_j)`` of its detector pair."""
    eta = _check_efficiencies(efficiencies)
    out = []
    for r in records:
        i, j = r.setting.detectors
        out.append(CoincidenceRecord(r.setting, r.count / (eta[i] * eta[j]), r.expected_pairs))
    return out


def _index_records(records, expected):
    by_setting = {}
    for r in records:
        if r.setting in by_setting:
            raise ConsistencyError(f"duplicate record for setting {r.setting}")
        by_setting[r.setting] = r.count
    missing = [s for s in expected if s not in by_setting]
    if missing:
        raise CompletenessError(
            f"{len(missing)} settings missing, first: {missing[0]}", missing=missing
        )
    return np.array([by_setting[s] for s in expected], dtype=float)


@dataclass
class MLEResult:
    matrix: np.ndarray
    log_likelihood: float
    iterations: int
    trace: list


def _inv_sqrt(G):
    w, v = eigh(G)
    if w[0] <= 0:
        raise CompletenessError("measurement operators do not span the full space")
    return (v / np.sqrt(w)) @ v.conj().T


def _normalized(Rd, X):
    cand = Rd @ X @ Rd
    cand = (cand + cand.conj().T) / 2
    return cand / np.real(np.trace(cand))


def _ascent_step(R, X, L, loglik):
    """One likelihood-increasing update of ``X``, or ``(None, L, None)``.

    The plain step ``R X R`` is tried first. If it is accepted, the exponent
    of ``R`` is doubled while the likelihood keeps rising, which speeds up the
    otherwise slow approach to rank-deficient estimates. If it is rejected,
    the step is diluted towards the identity until it is accepted.
    """
    cand = _normalized(R, X)
    L_new, p_new = loglik(cand)
    if L_new >= L:
        w, v = eigh(R)
        w = np.maximum(w, 0.0)
        power = 2.0
        while power <= 64:
            c2 = _normalized((v * w ** power) @ v.conj().T, X)
            L2, p2 = loglik(c2)
            if not L2 > L_new:
                break
            cand, L_new, p_new = c2, L2, p2
            power *= 2
        return cand, L_new, p_new
    eye = np.eye(len(X))
    eps = 1.0
    while eps > 1e-8:
        cand = _normalized((eye + eps * R) / (1 + eps), X)
        L_new, p_new = loglik(cand)
        if L_new >= L:
            return cand, L_new, p_new
        eps /= 2
    return None, L, None


def _poisson_mle(vectors, counts, max_iter=5000, tol=1e-10):
    """Maximise ``sum n ln p - sum p`` with ``p_s = <e_s| X |e_s>`` over ``X >= 0``.

    Works in the frame where the measurement operators sum to the identity
    and iterates the ``R X R`` map (see :func:`_ascent_step`). Only steps that
    do not lower the likelihood are accepted, so the trace never decreases.
    """
    vectors = np.asarray(vectors, dtype=complex)
    counts = np.asarray(counts, dtype=float)
    dim = vectors.shape[1]
    G = vectors.T @ vectors.conj()  # sum_s |e_s><e_s|
    g = _inv_sqrt(G)
    f = vectors @ g.T  # rows are (G^{-1/2} e_s)
    total = counts.sum()
    if total <= 0:
        raise CalibrationError("no counts recorded")
    # Iterate on frequencies so that rescaled data follow the same path.
    freqs = counts / total

    def loglik(X):
        p = np.maximum(np.real(np.sum((f.conj() @ X) * f, axis=1)), 1e-12)
        return float(np.sum(freqs * np.log(p)) - p.sum()), p

    X = np.eye(dim, dtype=complex) / dim
    L, p = loglik(X)
    trace = [L]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        R = (f.T * (freqs / p)) @ f.conj()
        cand, L_new, p_new = _ascent_step(R, X, L, loglik)
        if cand is None:
            converged = True
            break
        change = (L_new - L) / max(abs(L), 1e-300)
        X, L, p = cand, L_new, p_new
        trace.append(L)
        if change < tol:
            converged = True
            break
    if not converged:
        raise IterationLimitError(
            f"MLE did not converge in {max_iter} iterations",
            diagnostics={
                "log_likelihood": total * (L + np.log(total)),
                "last_change": total * (trace[-1] - trace[-2]),
            },
        )
    # Back to count units: L_counts = total * (L_freq + ln total).
    trace = [total * (x + np.log(total)) for x in trace]
    return MLEResult(g @ X @ g * total, trace[-1], it, trace)


def choi_vectors(settings):
    """Rank-one vectors ``conj(in) (x) proj`` pairing a setting with the Choi matrix."""
    return np.array([np.kron(s.input_vector().conj(), s.projector_vector()) for s in settings])


@dataclass(eq=False)
class ChoiMatrix:
    """16x16 Choi matrix on input (x) output with fit metadata."""

    matrix: np.ndarray
    phi: float = None
    iterations: int = 0
    log_likelihood: float = float("nan")
    likelihood_trace: list = None

    @property
    def trace(self):
        return float(np.real(np.trace(self.matrix)))

    def fidelity(self, phi=None):
        phi = self.phi if phi is None else phi
        return process_fidelity(self.matrix, ideal_choi(phi))

    def predict(self, setting):
        e = np.kron(setting.input_vector().conj(), setting.projector_vector())
        return float(np.real(e.conj() @ self.matrix @ e))

    def output_state(self, psi_in):
        """Normalized output state for a pure input ``psi_in``."""
        psi_in = np.asarray(psi_in, dtype=complex)
        rho_in = np.outer(psi_in, psi_in.conj())
        chi = self.matrix.reshape(4, 4, 4, 4)  # [i, o, j, p]
        rho = np.einsum("iojp,ij->op", chi, rho_in)
        return rho / np.real(np.trace(rho))

    def to_dict(self):
        return {
            "phi": self.phi,
            "normalization_trace": self.trace,
            "iterations": self.iterations,
            "log_likelihood": self.log_likelihood,
            "matrix": [[[float(z.real), float(z.imag)] for z in row] for row in self.matrix],
        }

    @classmethod
    def from_dict(cls, doc):
        try:
            m = np.array(doc["matrix"], dtype=float)
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"malformed Choi document: {exc}") from None
        if m.shape != (16, 16, 2):
            raise ConfigError(f"Choi matrix must be 16x16 [re, im] pairs, got {m.shape}")
        return cls(
            m[..., 0] + 1j * m[..., 1],
            doc.get("phi"),
            int(doc.get("iterations", 0)),
            float(doc.get("log_likelihood", float("nan"))),
        )


def mle_reconstruct_choi(records, max_iter=5000, tol=1e-10, phi=None):
    """Maximum-likelihood Choi matrix from a complete set of 1296 records.

    The overall scale is left free (the gate is trace decreasing); figures of
    merit computed from it are scale invariant.
    """
    counts = _index_records(records, CANONICAL_SETTINGS)
    res = _poisson_mle(choi_vectors(CANONICAL_SETTINGS), counts, max_iter=max_iter, tol=tol)
    log.info("choi MLE: %d iterations, log-likelihood %.6f", res.iterations, res.log_likelihood)
    chi = (res.matrix + res.matrix.conj().T) / 2
    return ChoiMatrix(chi, phi, res.iterations, res.log_likelihood, res.trace)


def ideal_choi(phi):
    """Rank-one Choi matrix of ``CZ(phi)`` with trace 4."""
    U = ideal_unitary(phi)
    v = U.T.reshape(16)
    return np.outer(v, v.conj())


def process_fidelity(chi, chi_id, rank_tol=1e-9):
    """``Tr[chi chi_id] / (Tr chi Tr chi_id)`` for a rank-one ``chi_id``."""
    chi = np.asarray(chi, dtype=complex)
    chi_id = np.asarray(chi_id, dtype=complex)
    w, _ = eigh(chi_id)
    if w[-2] > rank_tol * max(w[-1], 1e-300):
        raise FormulaDomainError("ideal process matrix is not a one-dimensional projector")
    num = np.real(np.trace(chi @ chi_id))
    return float(num / (np.real(np.trace(chi)) * np.real(np.trace(chi_id))))


def _input_settings(inputs):
    i1, i2 = inputs
    return [s for s in CANONICAL_SETTINGS if s.inputs == (i1, i2)]


def mle_reconstruct_state(records, max_iter=5000, tol=1e-10):
    """Maximum-likelihood output density matrix from the 36 records of one input."""
    records = list(records)
    if not records:
        raise CompletenessError("no records given")
    inputs = records[0].setting.inputs
    expected = _input_settings(inputs)
    if any(r.setting.inputs != inputs for r in records):
        raise ConsistencyError("records belong to more than one input state")
    counts = _index_records(records, expected)
    vectors = np.array([s.projector_vector() for s in expected])
    res = _poisson_mle(vectors, counts, max_iter=max_iter, tol=tol)
    rho = (res.matrix + res.matrix.conj().T) / 2
    return rho / np.real(np.trace(rho))


def reconstruct_states(records, **kw):
    """Output density matrix for every input pair, keyed by ``(input1, input2)``."""
    groups = {}
    for r in records:
        groups.setdefault(r.setting.inputs, []).append(r)
    missing = [k for k in product(INPUT_LABELS, repeat=2) if k not in groups]
    if missing:
        raise CompletenessError(f"no records for input {missing[0]}", missing=missing)
    return {k: mle_reconstruct_state(groups[k], **kw) for k in product(INPUT_LABELS, repeat=2)}


def state_metrics(rho_out, psi_expected):
    """Fidelity ``<psi|rho|psi>`` and purity ``Tr rho^2``."""
    rho = np.asarray(rho_out, dtype=complex)
    psi = np.asarray(psi_expected, dtype=complex)
    fid = float(np.real(psi.conj() @ rho @ psi))
    purity = float(np.real(np.trace(rho @ rho)))
    return fid, purity


def expected_output(phi, inputs):
    psi = np.kron(STATES[inputs[0]], STATES[inputs[1]])
    return ideal_unitary(phi) @ psi


def estimate_success_probability(records, reference_records, inputs=None):
    """Success probability as the ratio of gate to reference counts.

    The ratio is formed per input state (summing all its settings), then
    averaged. Returns ``(mean, sample standard deviation)``.
    """
    gate, ref = {}, {}
    for r in records:
        gate[r.setting.inputs] = gate.get(r.setting.inputs, 0.0) + r.count
    for r in reference_records:
        ref[r.setting.inputs] = ref.get(r.setting.inputs, 0.0) + r.count
    keys = list(inputs) if inputs is not None else sorted(gate, key=lambda k: (
        INPUT_LABELS.index(k[0]), INPUT_LABELS.index(k[1])))
    ratios = []
    for k in keys:
        if ref.get(k, 0.0) <= 0:
            raise CalibrationError(f"no reference counts for input {k}")
        ratios.append(gate.get(k, 0.0) / ref[k])
    ratios = np.array(ratios)
    std = float(ratios.std(ddof=1)) if len(ratios) > 1 else 0.0
    return float(ratios.mean()), std


@dataclass(frozen=True)
class GateReport:
    phi: float
    F_chi: float
    F_av: float
    F_min: float
    P_av: float
    P_min: float
    p_s_obs: float
    p_s_obs_std: float
    p_s_th: float

    COLUMNS = ("phi", "F_chi", "F_av", "F_min", "P_av", "P_min", "p_s_obs", "p_s_obs_std", "p_s_th")

    def row(self):
        return [getattr(self, c) for c in self.COLUMNS]

    def format_row(self):
        return (
            f"{self.phi / np.pi:.3g}pi  {self.F_chi:.2f}  {self.F_av:.2f}  {self.F_min:.2f}  "
            f"{self.P_av:.2f}  {self.P_min:.2f}  {self.p_s_obs:.3f} +- {self.p_s_obs_std:.3f}  "
            f"{self.p_s_th:.2f}"
        )


def build_report(phi, chi, states, p_s_estimate):
    """Assemble one table row from a reconstructed process and output states."""
    chi_m = chi.matrix if isinstance(chi, ChoiMatrix) else np.asarray(chi)
    if isinstance(chi, ChoiMatrix) and chi.phi is not None and not np.isclose(chi.phi, phi):
        raise ConsistencyError(f"Choi matrix was fitted for phi={chi.phi}, report asks for {phi}")
    fids, purs = [], []
    for inputs, rho in states.items():
        f, p = state_metrics(rho, expected_output(phi, inputs))
        fids.append(f)
        purs.append(p)
    p_obs, p_std = p_s_estimate
    return GateReport(
        phi=float(phi),
        F_chi=process_fidelity(chi_m, ideal_choi(phi)),
        F_av=float(np.mean(fids)),
        F_min=float(np.min(fids)),
        P_av=float(np.mean(purs)),
        P_min=float(np.min(purs)),
        p_s_obs=p_obs,
        p_s_obs_std=p_std,
        p_s_th=optimal_success_probability(phi),
    )


# -- files ---------------------------------------------------------------------


def write_counts_csv(records, path_or_file):
    def _write(fh):
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for r in records:
            s = r.setting
            count = r.count if isinstance(r.count, int) else repr(float(r.count))
            w.writerow([s.input1, s.input2, s.basis1, s.basis2, s.outcome1, s.outcome2, count])

    if hasattr(path_or_file, "write"):
        _write(path_or_file)
    else:
        with open(path_or_file, "w", newline="") as fh:
            _write(fh)


def read_counts_csv(path):
    """Parse a counts file; rows may come in any order."""
    records = []
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ConfigError(f"cannot read counts file {path}: {exc}") from None
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER:
            raise ConfigError(f"counts file header must be {','.join(CSV_HEADER)}")
        for n, row in enumerate(reader, start=2):
            try:
                s = MeasurementSetting(
                    row["input1"], row["input2"], row["basis1"], row["basis2"],
                    int(row["outcome1"]), int(row["outcome2"]),
                )
                count = float(row["count"])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{path}:{n}: {exc}") from None
            if (s.input1 not in STATES or s.input2 not in STATES or s.basis1 not in BASES
                    or s.basis2 not in BASES or s.outcome1 not in (0, 1) or s.outcome2 not in (0, 1)):
                raise ConfigError(f"{path}:{n}: bad labels {row}")
            if not np.isfinite(count) or count < 0:
                raise ConfigError(f"{path}:{n}: count must be finite and non-negative")
            records.append(CoincidenceRecord(s, int(count) if count.is_integer() else count))
    return records


def write_choi_json(chi, path):
    with open(path, "w") as fh:
        json.dump(chi.to_dict(), fh, indent=1)


def read_choi_json(path):
    try:
        with open(path) as fh:
            return ChoiMatrix.from_dict(json.load(fh))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read Choi file {path}: {exc}") from None
