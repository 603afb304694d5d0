"""Command-line front end.

Every stochastic command takes an explicit ``--seed``; phases are given in
radians and accept ``pi`` literals such as ``pi``, ``0.25pi`` or ``pi/4``.
"""

import argparse
import csv
import io
import json
import logging
import os
import re
import sys
import tempfile
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar

from . import design, optics, plotting, tomography
from .errors import ConsistencyError, OptczError
from .pipeline import (
    TABLE_PHASES,
    characterize,
    derive_seed,
    generate_records,
    NOISE_STREAM,
)

log = logging.getLogger("optcz")

PSD_TOL = 1e-9
RESIDUAL_TOL = 1e-8


def parse_phi(text):
    """Parse ``1.2``, ``pi``, ``0.25pi``, ``pi/4`` or ``3pi/4`` into radians."""
    s = str(text).strip().replace(" ", "").lower()
    m = re.fullmatch(r"([0-9.eE+-]*)\*?pi(?:/([0-9.]+))?", s)
    try:
        if m:
            coef = float(m.group(1)) if m.group(1) not in ("", "+", "-") else float(m.group(1) + "1")
            return coef * np.pi / (float(m.group(2)) if m.group(2) else 1.0)
        return float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse phase {text!r}") from None


def _fmt_phi(phi):
    return f"{phi / np.pi:.4g}pi"


def atomic_write(path, text):
    """Write ``text`` to ``path`` through a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _format_matrix(m, indent="  "):
    lines = []
    for row in np.asarray(m):
        lines.append(indent + "  ".join(f"{z.real:+.4f}{z.imag:+.4f}j" for z in row))
    return "\n".join(lines)


def _sibling(path, suffix):
    p = Path(path)
    return p.with_name(p.stem + suffix)


def _plot_path(out, suffix, args):
    if getattr(args, "no_plot", False) or out is None:
        return None
    return _sibling(out, suffix)


# -- commands ------------------------------------------------------------------


def cmd_design(args):
    sol = design.assemble_A(args.phi)
    residual = sol.residual
    print(f"phi        = {args.phi:.6f} rad ({_fmt_phi(args.phi)})")
    print(f"p_s        = {sol.p_s:.4f}")
    print(f"theta      = {sol.theta:.4f}")
    print(f"gamma      = {sol.gamma:.4f}")
    print(f"phi_plus   = {sol.phi_plus:.4f} rad")
    print(f"phi_minus  = {sol.phi_minus:.4f} rad")
    print("B =")
    print(_format_matrix(sol.B))
    print("A =")
    print(_format_matrix(sol.A))
    print(f"gate-condition residual = {residual:.3e}")
    if args.out:
        atomic_write(args.out, json.dumps(sol.to_dict(), indent=1))
    return 0 if residual < RESIDUAL_TOL else 1


def sweep_rows(lo, hi, steps, restarts=64, seed=0, brute=True):
    """Rows ``(phi, p_s closed form, p_s numerical optimum, theta)`` on a grid."""
    rows = []
    for phi in np.linspace(lo, hi, steps):
        p = design.optimal_success_probability(phi)
        if phi > 0:
            theta = design.damping_theta(phi)
            pb = design.brute_force_optimal_B(phi, restarts=restarts, seed=seed)[0] if brute else np.nan
        else:
            theta, pb = 1.0, (1.0 if brute else np.nan)
        rows.append((float(phi), p, pb, theta))
    return rows


def interior_minimum(rows):
    """Argmin of the closed-form column, refined by a bracketed 1-D search.

    Returns ``(phi, p_s, is_interior)``.
    """
    phis = np.array([r[0] for r in rows])
    ps = np.array([r[1] for r in rows])
    k = int(np.argmin(ps))
    if 0 < k < len(ps) - 1:
        res = minimize_scalar(design.optimal_success_probability, bracket=(phis[k - 1], phis[k], phis[k + 1]))
        return float(res.x), float(res.fun), True
    return float(phis[k]), float(ps[k]), False


def cmd_sweep(args):
    if args.steps < 2:
        raise OptczError("--steps must be at least 2")
    for phi in (args.lo, args.hi):
        design._check_phi(phi)
    rows = sweep_rows(args.lo, args.hi, args.steps, args.restarts, args.seed, not args.no_oracle)
    text = _csv_text(("phi", "p_s_closed_form", "p_s_brute_force", "theta"), rows)
    if args.out:
        atomic_write(args.out, text)
        png = _plot_path(args.out, ".png", args)
        if png:
            plotting.plot_success_curve(
                [r[0] for r in rows], [r[1] for r in rows], png,
                p_brute=None if args.no_oracle else [r[2] for r in rows],
            )
    else:
        sys.stdout.write(text)
    phi_min, p_min, interior = interior_minimum(rows)
    where = "interior" if interior else "endpoint"
    print(f"minimum ({where}): p_s = {p_min:.6f} at phi = {phi_min:.6f} rad ({_fmt_phi(phi_min)})")
    if not args.no_oracle:
        dev = max(abs(r[1] - r[2]) for r in rows)
        print(f"max |closed form - numerical optimum| = {dev:.3e}")
    return 0


def _load_noise(path):
    return optics.load_noise(path) if path else optics.NoiseProfile()


def cmd_simulate(args):
    noise = _load_noise(args.noise)
    proc = optics.simulate_process(optics.ideal_network(args.phi), noise, derive_seed(args.seed, NOISE_STREAM))
    labels = args.input.upper()
    if len(labels) != 2 or any(c not in tomography.STATES for c in labels):
        raise OptczError(f"--input must be two labels from HVDARL, got {args.input!r}")
    psi = np.kron(tomography.STATES[labels[0]], tomography.STATES[labels[1]])
    rho = proc.apply(np.outer(psi, psi.conj()))
    p = float(np.real(np.trace(rho)))
    if p < 1e-14:
        raise OptczError("post-selected output vanishes for this input")
    rho = rho / p
    expected = tomography.expected_output(args.phi, labels)
    fid, pur = tomography.state_metrics(rho, expected)
    print(f"phi = {_fmt_phi(args.phi)}, input |{labels}>")
    if len(proc.kraus) == 1:
        print("effective map M =")
        print(_format_matrix(proc.kraus[0]))
    print(f"success probability = {p:.6f} (design {design.optimal_success_probability(args.phi):.6f})")
    print(f"output fidelity = {fid:.6f}, purity = {pur:.6f}")
    print("output density matrix =")
    print(_format_matrix(rho))
    return 0


def _meta_path(counts_path):
    return _sibling(counts_path, ".meta.json")


def cmd_tomo_gen(args):
    noise = _load_noise(args.noise)
    eta = tuple(args.efficiencies)
    records, reference = generate_records(args.phi, args.shots, noise, args.seed, eta)
    buf = io.StringIO()
    tomography.write_counts_csv(records, buf)
    atomic_write(args.out, buf.getvalue())
    ref_path = _sibling(args.out, ".reference.csv")
    buf = io.StringIO()
    tomography.write_counts_csv(reference, buf)
    atomic_write(ref_path, buf.getvalue())
    meta = {
        "phi": args.phi,
        "seed": args.seed,
        "shots": args.shots,
        "efficiencies": list(eta),
        "noise": optics.noise_to_dict(noise),
        "reference": ref_path.name,
    }
    atomic_write(_meta_path(args.out), json.dumps(meta, indent=1))
    print(f"wrote {len(records)} settings to {args.out} (reference: {ref_path})")
    return 0


def _read_meta(counts_path):
    p = _meta_path(counts_path)
    if p.exists():
        with open(p) as fh:
            return json.load(fh)
    return {}


def cmd_tomo_fit(args):
    meta = _read_meta(args.counts)
    phi = args.phi if args.phi is not None else meta.get("phi")
    if args.phi is not None and "phi" in meta and not np.isclose(args.phi, meta["phi"]):
        raise ConsistencyError(f"--phi {args.phi} disagrees with counts metadata phi {meta['phi']}")
    eta = tuple(args.efficiencies or meta.get("efficiencies") or tomography.DEFAULT_EFFICIENCIES)
    records = tomography.compensate_efficiencies(tomography.read_counts_csv(args.counts), eta)
    chi = tomography.mle_reconstruct_choi(records, max_iter=args.max_iter, phi=phi)
    print(f"MLE converged in {chi.iterations} iterations, log-likelihood {chi.log_likelihood:.6f}")
    trace = chi.likelihood_trace
    for k in sorted({0, len(trace) // 4, len(trace) // 2, len(trace) - 1}):
        print(f"  iteration {k:5d}: log-likelihood {trace[k]:.6f}")
    atomic_write(args.out, json.dumps(chi.to_dict(), indent=1))

    states = tomography.reconstruct_states(records, max_iter=args.max_iter)
    ref_path = args.reference or (
        _sibling(args.counts, ".reference.csv") if meta.get("reference") else None
    )
    doc = {"phi": phi, "states": {
        a + b: [[[float(z.real), float(z.imag)] for z in row] for row in rho]
        for (a, b), rho in states.items()
    }}
    if ref_path and Path(ref_path).exists():
        ref = tomography.compensate_efficiencies(tomography.read_counts_csv(ref_path), eta)
        p_obs, p_std = tomography.estimate_success_probability(records, ref)
        doc["p_s_obs"], doc["p_s_obs_std"] = p_obs, p_std
        print(f"p_s,obs = {p_obs:.4f} +- {p_std:.4f}")
    states_out = args.states_out or _sibling(args.out, ".states.json")
    atomic_write(states_out, json.dumps(doc))

    min_eig = float(np.linalg.eigvalsh(chi.matrix)[0])
    scale = max(chi.trace, 1e-300)
    psd_ok = min_eig >= -PSD_TOL * scale
    print(f"PSD check: min eigenvalue / trace = {min_eig / scale:.3e} ({'ok' if psd_ok else 'FAILED'})")
    if phi is not None:
        print(f"F_chi vs ideal CZ({_fmt_phi(phi)}) = {chi.fidelity(phi):.4f}")
        png = _plot_path(args.out, ".png", args)
        if png:
            plotting.plot_choi(chi.matrix, tomography.ideal_choi(phi), png, f"CZ({_fmt_phi(phi)})")
    return 0 if psd_ok else 1


def _read_states(path):
    with open(path) as fh:
        doc = json.load(fh)
    states = {}
    for key, m in doc["states"].items():
        a = np.array(m, dtype=float)
        states[(key[0], key[1])] = a[..., 0] + 1j * a[..., 1]
    return doc, states


REPORT_HEADER = ("phi", "F_chi", "F_av", "F_min", "P_av", "P_min", "p_s_obs", "p_s_obs_std", "p_s_th")


def cmd_report(args):
    chi = tomography.read_choi_json(args.choi)
    doc, states = _read_states(args.states)
    phi = args.phi
    for name, value in (("Choi file", chi.phi), ("states file", doc.get("phi"))):
        if value is not None and not np.isclose(value, phi):
            raise ConsistencyError(f"{name} was produced for phi={value}, report asks for {phi}")
    p_est = (doc.get("p_s_obs", float("nan")), doc.get("p_s_obs_std", float("nan")))
    rep = tomography.build_report(phi, chi, states, p_est)
    print("phi      F_chi F_av F_min P_av P_min p_s,obs        p_s,th")
    print(rep.format_row())
    if args.out:
        atomic_write(args.out, _csv_text(REPORT_HEADER, [rep.row()]))
    return 0


def cmd_table(args):
    noise = _load_noise(args.noise)
    reports = []
    out_dir = Path(args.out_dir)
    for phi in args.phases:
        res = characterize(phi, args.shots, noise, args.seed, tuple(args.efficiencies), args.max_iter)
        reports.append(res.report)
        print(res.report.format_row(), flush=True)
        if not args.no_plot:
            out_dir.mkdir(parents=True, exist_ok=True)
            plotting.plot_choi(
                res.choi.matrix, tomography.ideal_choi(phi),
                out_dir / f"choi_{phi / np.pi:.4g}pi.png", f"CZ({_fmt_phi(phi)})",
            )
    atomic_write(out_dir / "summary.csv", _csv_text(REPORT_HEADER, [r.row() for r in reports]))
    atomic_write(out_dir / "summary.txt", "\n".join(r.format_row() for r in reports) + "\n")
    if not args.no_plot:
        plotting.plot_report_table(reports, out_dir / "summary.png")
    return 0


def cmd_oracle_optimal_b(args):
    p, B = design.brute_force_optimal_B(args.phi, restarts=args.restarts, seed=args.seed)
    closed = design.optimal_success_probability(args.phi)
    print(f"numerical optimum p_s = {p:.10f}")
    print(f"closed form       p_s = {closed:.10f}")
    print(f"difference            = {p - closed:+.3e}")
    print("B =")
    print(_format_matrix(B))
    return 0


# -- parser --------------------------------------------------------------------


def _phi_in_range(text):
    phi = parse_phi(text)
    if not 0.0 <= phi <= np.pi + 1e-15:
        raise argparse.ArgumentTypeError(f"phi outside [0, pi]: {text}")
    return min(phi, np.pi)


def build_parser():
    parser = argparse.ArgumentParser(prog="optcz", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="print the optimal design for a phase")
    p.add_argument("--phi", type=_phi_in_range, required=True)
    p.add_argument("--out", help="optional JSON output")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("sweep", help="success probability over a phase grid")
    p.add_argument("--from", dest="lo", type=_phi_in_range, default=0.0)
    p.add_argument("--to", dest="hi", type=_phi_in_range, default=np.pi)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--restarts", type=int, default=64)
    p.add_argument("--seed", type=int, default=0, help="seed of the optimizer restarts")
    p.add_argument("--no-oracle", action="store_true", help="skip the numerical optimum column")
    p.add_argument("--no-plot", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="apply the (noisy) gate to a product input")
    p.add_argument("--phi", type=_phi_in_range, required=True)
    p.add_argument("--input", default="DD", help="two labels from H,V,D,A,R,L")
    p.add_argument("--noise")
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_simulate)

    tomo = sub.add_parser("tomo", help="tomography data generation and fitting")
    tsub = tomo.add_subparsers(dest="tomo_command", required=True)
    p = tsub.add_parser("gen", help="simulate coincidence counts")
    p.add_argument("--phi", type=_phi_in_range, required=True)
    p.add_argument("--shots", type=float, default=1e4, help="expected pairs per setting")
    p.add_argument("--noise")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--efficiencies", type=float, nargs=4, default=list(tomography.DEFAULT_EFFICIENCIES))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_tomo_gen)

    p = tsub.add_parser("fit", help="maximum-likelihood Choi matrix from counts")
    p.add_argument("--counts", required=True)
    p.add_argument("--reference")
    p.add_argument("--phi", type=_phi_in_range)
    p.add_argument("--efficiencies", type=float, nargs=4)
    p.add_argument("--max-iter", type=int, default=5000)
    p.add_argument("--states-out")
    p.add_argument("--no-plot", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_tomo_fit)

    p = sub.add_parser("report", help="table row from fitted artifacts")
    p.add_argument("--choi", required=True)
    p.add_argument("--states", required=True)
    p.add_argument("--phi", type=_phi_in_range, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("table", help="full pipeline over several phases")
    p.add_argument("--phases", type=_phi_in_range, nargs="+", default=list(TABLE_PHASES))
    p.add_argument("--shots", type=float, default=1e4)
    p.add_argument("--noise")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--efficiencies", type=float, nargs=4, default=list(tomography.DEFAULT_EFFICIENCIES))
    p.add_argument("--max-iter", type=int, default=5000)
    p.add_argument("--no-plot", action="store_true")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_table)

    oracle = sub.add_parser("oracle", help="independent numerical checks")
    osub = oracle.add_subparsers(dest="oracle_command", required=True)
    p = osub.add_parser("optimal-b", help="brute-force optimum of the interaction block")
    p.add_argument("--phi", type=_phi_in_range, required=True)
    p.add_argument("--restarts", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_oracle_optimal_b)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (OptczError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
