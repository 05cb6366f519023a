"""Configuration-driven sweep runner.

A single JSON document describes matter, probe, estimation parameter and
output; ``biphospec run config.json`` emits a delimited table (CSV or JSON)
whose rows reproduce the heatmap data, and optionally renders the heatmaps
as PNG files alongside it.  ``biphospec validate`` checks a config without
executing.  Exit codes: 0 success, 1 validation failure, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import sys
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import __version__, fisher, gdm, probe, scatter
from .matter import MatterSystem, coupled_dimer, tls
from .probe import (DEFAULT_ALPHA_OVER_HBAR, EV_TO_RADPS, TimeGrid,
                    default_grid, entanglement_entropy, make_envelope,
                    pdc_gaussian_jsa, pdc_schmidt, schmidt_factors, tfm_state,
                    wavenumber_to_radps)

PDC_COLUMNS = ["T_qent", "sigma_p", "S_entropy", "Q_biph", "C_classical",
               "Q_idler", "Q_total", "C_locc_identity", "Q_reduced",
               "kappa", "varsigma"]
TFM_COLUMNS = ["angle", "S_entropy", "Q_biph", "C_classical", "Q_idler",
               "Q_total", "C_locc_identity", "Q_reduced", "kappa", "varsigma"]
_PROBE_TYPES = ("pdc", "tfm", "fock", "coherent", "pacs")
_ENGINES = ("closedform", "gdm", "both")
_THETAS = ("gamma", "omega0", "J")


def validate(config: dict) -> List[str]:
    """Full error list (field paths); no partial execution."""
    errs: List[str] = []

    matter = config.get("matter")
    if not isinstance(matter, dict):
        errs.append("matter: missing section")
        matter = {}
    kind = matter.get("kind")
    if kind not in ("tls", "cd"):
        errs.append("matter.kind: must be 'tls' or 'cd'")
    if not isinstance(matter.get("gamma"), (int, float)) or matter.get("gamma", 0) <= 0:
        errs.append("matter.gamma: positive number required")
    if matter.get("gamma_perp", 0) < 0:
        errs.append("matter.gamma_perp: must be nonnegative")
    if kind == "cd":
        for key in ("omega_a", "omega_b", "J"):
            if not isinstance(matter.get(key), (int, float)):
                errs.append(f"matter.{key}: number required for CD systems")

    pr = config.get("probe")
    if not isinstance(pr, dict):
        errs.append("probe: missing section")
        pr = {}
    ptype = pr.get("type")
    if ptype not in _PROBE_TYPES:
        errs.append(f"probe.type: one of {_PROBE_TYPES} required")
    if ptype == "pdc":
        for key in ("sigma_p", "T_qent"):
            vals = pr.get(key)
            if not isinstance(vals, (list, tuple)) or len(vals) == 0:
                errs.append(f"probe.{key}: non-empty list required")
            elif any(v <= 0 for v in vals):
                errs.append(f"probe.{key}: entries must be positive")
    if ptype == "tfm":
        angles = pr.get("angles")
        if not isinstance(angles, (list, tuple)) or len(angles) == 0:
            errs.append("probe.angles: non-empty list required")
    if ptype in ("fock", "coherent", "pacs"):
        taus = pr.get("tau")
        if not isinstance(taus, (list, tuple)) or len(taus) == 0:
            errs.append("probe.tau: non-empty list required")
        if pr.get("envelope", "exponential") not in ("exponential", "gaussian", "square"):
            errs.append("probe.envelope: unsupported kind")

    theta = config.get("theta")
    if theta not in _THETAS:
        errs.append(f"theta: one of {_THETAS} required")
    elif kind == "tls" and theta == "J":
        errs.append("theta: J requires a CD matter system")
    elif kind == "cd" and theta == "omega0":
        errs.append("theta: omega0 requires a TLS matter system")

    engine = config.get("engine", "closedform")
    if engine not in _ENGINES:
        errs.append(f"engine: one of {_ENGINES} required")
    if engine in ("gdm", "both") and ptype in ("pdc", "tfm"):
        errs.append("engine: gdm engine only supports fock/coherent/pacs probes")

    grid = config.get("grid", {})
    if grid.get("n_points", 4096) < 16:
        errs.append("grid.n_points: at least 16 samples")

    out = config.get("output", {})
    if out.get("format", "csv") not in ("csv", "json"):
        errs.append("output.format: 'csv' or 'json'")
    return errs


def _build_matter(config: dict) -> MatterSystem:
    m = config["matter"]
    gamma = float(m["gamma"])
    gperp = float(m.get("gamma_perp", 0.0))
    if "gamma_perp_ratio" in m:
        gperp = float(m["gamma_perp_ratio"]) * gamma
    if m["kind"] == "tls":
        return tls(gamma=gamma, delta=float(m.get("delta", 0.0)), gamma_perp=gperp)
    scale = EV_TO_RADPS if m.get("energy_unit", "eV") == "eV" else 1.0
    return coupled_dimer(
        gamma=gamma,
        omega_a=float(m["omega_a"]) * scale,
        omega_b=float(m["omega_b"]) * scale,
        J=float(m["J"]) * scale,
        dip_a=float(m.get("dip_a", 1.0)),
        dip_b=float(m.get("dip_b", 1.0)),
        resonant_with=m.get("resonant_with", "beta"),
        gamma_perp=gperp,
    )


def _sigma_to_radps(value: float, pr: dict) -> float:
    unit = pr.get("sigma_p_unit", "cm^-1")
    if unit == "cm^-1":
        return wavenumber_to_radps(value, pr.get("wavenumber_convention", "ordinary"))
    if unit in ("rad/ps", "ps^-1"):
        return float(value)
    raise ValueError(f"unsupported sigma_p unit {unit!r}")


def pdc_point(ms: MatterSystem, theta: str, sigma_p_radps: float, T_qent: float,
              alpha_over_hbar: float, grid_cfg: dict) -> dict:
    """One (T_qent, sigma_p) sweep point, optionally grid-refined."""
    jsa = pdc_gaussian_jsa(sigma_p_radps, T_qent, alpha_over_hbar)
    fac = schmidt_factors(jsa)
    n0 = int(grid_cfg.get("n_points", 4096))
    n_max = int(grid_cfg.get("n_max", 131072))
    span = float(grid_cfg.get("span_factor", 20.0))
    refine = bool(grid_cfg.get("refine", True))
    tol = float(grid_cfg.get("refine_tol", 1e-3))

    def build(n):
        grid = default_grid(ms.gamma, fac.kappa_s, fac.kappa_i, n=n, span_factor=span)
        state, _ = pdc_schmidt(jsa, grid)
        return state, scatter.scatter_schmidt(state, ms, theta, keep_fields=False)

    n = n0
    state, st = build(n)
    rep = fisher.report(st)
    while refine and n < n_max:
        n *= 2
        state2, st2 = build(n)
        rep2 = fisher.report(st2)
        move = abs(rep2.q_biph - rep.q_biph) / max(abs(rep2.q_biph), 1e-300)
        move = max(move, abs(rep2.q_total - rep.q_total) / max(abs(rep2.q_total), 1e-300))
        state, st, rep = state2, st2, rep2
        if move < tol:
            break
    S = entanglement_entropy(state)
    return {
        "S_entropy": S,
        "Q_biph": rep.q_biph,
        "C_classical": rep.c_classical,
        "Q_idler": rep.q_idler,
        "Q_total": rep.q_total,
        "C_locc_identity": rep.c_locc_identity,
        "Q_reduced": rep.q_reduced,
        "kappa": rep.kappa,
        "varsigma": rep.varsigma,
        "grid_n": st.grid.n,
        "n_modes": st.n_modes,
    }


def _pdc_worker(args):
    ms, theta, sig_radps, sig_raw, tq, alpha, grid_cfg = args
    vals = pdc_point(ms, theta, sig_radps, tq, alpha, grid_cfg)
    row = {"T_qent": tq, "sigma_p": sig_raw}
    row.update(vals)
    return row


def run(config: dict, threads: int = 1):
    """Execute a validated config; returns (columns, rows, header)."""
    errs = validate(config)
    if errs:
        raise ValueError("invalid config: " + "; ".join(errs))
    ms = _build_matter(config)
    pr = config["probe"]
    theta = config["theta"]
    engine = config.get("engine", "closedform")
    grid_cfg = dict(config.get("grid", {}))
    header = {
        "version": __version__,
        "engine": engine,
        "theta": theta,
        "matter": config["matter"],
        "probe": {k: v for k, v in pr.items() if k != "samples"},
        "grid": grid_cfg,
        "truncation": "schmidt modes: |mu|^(2N) < 1e-10, capped at 64",
        "wavenumber_convention": pr.get("wavenumber_convention", "ordinary"),
        "units": "time ps, rates ps^-1, frequencies rad/ps",
    }

    if pr["type"] == "pdc":
        alpha = float(pr.get("alpha_over_hbar", DEFAULT_ALPHA_OVER_HBAR))
        jobs = []
        for tq in pr["T_qent"]:
            for sig in pr["sigma_p"]:
                jobs.append((ms, theta, _sigma_to_radps(sig, pr), float(sig),
                             float(tq), alpha, grid_cfg))
        if threads > 1:
            with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as ex:
                rows = list(ex.map(_pdc_worker, jobs))
        else:
            rows = [_pdc_worker(j) for j in jobs]
        rows.sort(key=lambda r: (r["T_qent"], r["sigma_p"]))
        return PDC_COLUMNS, rows, header

    if pr["type"] == "tfm":
        rows = []
        for ang in pr["angles"]:
            grid = default_grid(ms.gamma, pr.get("k1", 1.3), pr.get("k2", 1.3),
                                n=int(grid_cfg.get("n_points", 4096)),
                                span_factor=float(grid_cfg.get("span_factor", 20.0)))
            state = tfm_state(float(ang), grid, k1=pr.get("k1", 1.3), k2=pr.get("k2", 1.3),
                              alpha_over_hbar=pr.get("alpha_over_hbar", DEFAULT_ALPHA_OVER_HBAR))
            st = scatter.scatter_schmidt(state, ms, theta, keep_fields=False)
            rep = fisher.report(st)
            rows.append({
                "angle": float(ang),
                "S_entropy": entanglement_entropy(state),
                "Q_biph": rep.q_biph, "C_classical": rep.c_classical,
                "Q_idler": rep.q_idler, "Q_total": rep.q_total,
                "C_locc_identity": rep.c_locc_identity, "Q_reduced": rep.q_reduced,
                "kappa": rep.kappa, "varsigma": rep.varsigma,
            })
        rows.sort(key=lambda r: r["angle"])
        return TFM_COLUMNS, rows, header

    # fock / coherent / pacs probes
    env_kind = pr.get("envelope", "exponential")
    rows = []
    for tau in pr["tau"]:
        tau = float(tau)
        t_max = 40.0 * tau + 80.0 / ms.gamma
        n = int(grid_cfg.get("n_points", 4096))
        if env_kind == "gaussian":
            grid = TimeGrid(0.0, t_max, n)
            env = make_envelope("gaussian", {"tau": tau, "t_ar": 8 * tau}, grid)
        else:
            grid = TimeGrid(0.0, t_max, n)
            env = make_envelope(env_kind, {"tau": tau}, grid)
        row = {"tau": tau}
        if engine in ("closedform", "both") and pr["type"] == "fock":
            src = probe.SchmidtState(r=np.array([1.0 + 0j]), signal_modes=[env],
                                     idler_modes=[env], norm_const=1.0, has_vacuum=False)
            st = scatter.scatter_schmidt(src, ms, theta, keep_fields=False)
            q_total, c_cl, _, q_biph = fisher.total_qfi(st)
            row.update({"Q_total": q_total, "Q_biph": q_biph, "C_classical": c_cl,
                        "M": 1.0 - st.loss})
        if engine in ("gdm", "both"):
            if pr["type"] == "fock":
                q, diag = gdm.fock_qfi(ms, theta, env, n_fock=int(pr.get("n_photons", 1)))
            else:
                def make(hh, env=env):
                    return gdm.likelihood_surface(
                        ms, theta, pr["type"], T=80.0 / ms.gamma, h=hh,
                        xi=env, alpha=env,
                        n_fock=int(pr.get("n_photons", 1)),
                        mean_n=float(pr.get("mean_n", 1.0)),
                        alpha_amp=float(pr.get("alpha_amp", 1.0)))
                theta0 = ms.value_of(theta)
                q, diag = gdm.gdm_qfi_richardson(make, 1e-3 * abs(theta0) + 1e-5)
            row.update({"Q_gdm": q, "Q_gdm_h": diag["q_h"], "Q_gdm_h2": diag["q_h2"],
                        "richardson_rel": diag["rel_change"]})
        rows.append(row)
    rows.sort(key=lambda r: r["tau"])
    cols = sorted({k for r in rows for k in r}, key=lambda c: (c != "tau", c))
    return cols, rows, header


def write_output(columns, rows, header, path: str, fmt: str = "csv"):
    """CSV ('.' decimal, '\\n' endings, fixed column order) or JSON."""
    if fmt == "json":
        doc = {"header": dict(header, timestamp=time.strftime("%Y-%m-%dT%H:%M:%S")),
               "columns": columns, "rows": rows}
        with open(path, "w") as f:
            json.dump(doc, f, indent=1, default=float)
            f.write("\n")
        return
    lines = []
    lines.append(f"# biphospec {header.get('version', '')}")
    lines.append(f"# timestamp: {time.strftime('%Y-%m-%dT%H:%M:%S')}")
    for key in sorted(header):
        if key == "version":
            continue
        lines.append(f"# {key}: {json.dumps(header[key], default=float)}")
    lines.append(",".join(columns))
    for r in rows:
        lines.append(",".join(_fmt(r.get(c)) for c in columns))
    with open(path, "w", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="biphospec",
                                     description="Fisher-information sweeps for pulsed biphoton spectroscopy")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a sweep config")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=None, help="output path (overrides config)")
    p_run.add_argument("--engine", default=None, choices=_ENGINES)
    p_run.add_argument("--threads", type=int, default=1)
    p_run.add_argument("--grid-refine", dest="grid_refine", action="store_true", default=None,
                       help="force grid auto-refinement on")
    p_run.add_argument("--no-grid-refine", dest="grid_refine", action="store_false")
    p_run.add_argument("--figures", action="store_true",
                       help="render heatmap PNGs alongside the table")

    p_val = sub.add_parser("validate", help="validate a sweep config")
    p_val.add_argument("config")

    p_rep = sub.add_parser("report", help="render heatmap figures from a result CSV")
    p_rep.add_argument("results")
    p_rep.add_argument("--outdir", default=None)

    args = parser.parse_args(argv)

    if args.command == "validate":
        with open(args.config) as f:
            config = json.load(f)
        errs = validate(config)
        if errs:
            for e in errs:
                print(f"error: {e}", file=sys.stderr)
            return 1
        print("config ok")
        return 0

    if args.command == "report":
        from . import report as report_mod
        try:
            paths = report_mod.render_from_csv(args.results, args.outdir)
        except Exception as exc:  # noqa: BLE001 - surface as exit code 2
            print(f"report failed: {exc}", file=sys.stderr)
            return 2
        for p in paths:
            print(p)
        return 0

    with open(args.config) as f:
        config = json.load(f)
    if args.engine:
        config["engine"] = args.engine
    if args.grid_refine is not None:
        config.setdefault("grid", {})["refine"] = args.grid_refine
    errs = validate(config)
    if errs:
        for e in errs:
            print(f"error: {e}", file=sys.stderr)
        return 1
    out_cfg = config.get("output", {})
    path = args.out or out_cfg.get("path", "sweep.csv")
    fmt = out_cfg.get("format", "csv")
    try:
        columns, rows, header = run(config, threads=args.threads)
        write_output(columns, rows, header, path, fmt)
        if args.figures:
            from . import report as report_mod
            for p in report_mod.render_rows(columns, rows, outdir=None, base=path):
                print(p)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - numerical failure
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
