"""Command-line front end.

Subcommands: ``run`` a preset, ``audit`` the inequality suites,
``resources`` for a query-count report, ``spectral`` for gradient
observables of a CSV time series. Exit codes: 0 ok, 1 a checked
assertion failed, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from typing import List, Optional

import numpy as np

from .experiments import audit_bounds, list_presets, resource_report, run_preset
from .report import combine_ok, format_summary
from .spectral import (
    HistoryTensor,
    SubDomain,
    full_domain,
    kinetic_energy_ratio,
    mean_square_ratio,
    spectral_gradient,
)


def _parse_overrides(pairs: Optional[List[str]]) -> dict:
    out = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ValueError(f"override {pair!r} is not of the form key=value")
        key, _, text = pair.partition("=")
        if not key:
            raise ValueError(f"override {pair!r} has an empty key")
        out[key] = text
    return out


def _cmd_run(args: argparse.Namespace) -> int:
    result = run_preset(
        args.preset, overrides=_parse_overrides(args.set), outdir=args.outdir
    )
    radii = result.radii
    print(f"preset {result.preset.name}: artifacts in {result.outdir}")
    if result.radii_available:
        print(
            f"  radii: R={radii.R:.6g} R_bar={radii.R_bar:.6g} "
            f"R_D={radii.R_D:.6g} (lambda={radii.lambda_used:.6g})"
        )
    else:
        print(
            f"  radii unavailable: top linear eigenvalue {radii.lambda1:.6g} >= 0"
        )
    for rep in result.reports:
        print(f"  N={rep.N}: max sup-norm error {rep.max_eta1_inf():.6e}")
    status = "ok" if result.audit.all_ok() else "FAILED"
    print(f"  stacked-solve audit: {status} (G={result.audit.G:.6g})")
    return 0 if result.audit.all_ok() else 1


def _cmd_audit(args: argparse.Namespace) -> int:
    reports = audit_bounds(args.scope)
    print(format_summary(reports, title=f"bound audit: {args.scope}"))
    return 0 if combine_ok(reports) else 1


def _cmd_resources(args: argparse.Namespace) -> int:
    report = resource_report(args.preset, args.N, args.eps, G=args.G)
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def _read_series_csv(path: str) -> np.ndarray:
    """Read a (k, l, value) time-series CSV into an (m, n) array."""
    entries = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        if [c.strip().lower() for c in header[:3]] != ["k", "l", "value"]:
            raise ValueError(f"{path}: expected header k,l,value")
        for row in reader:
            if not row:
                continue
            entries[(int(row[0]), int(row[1]))] = float(row[2])
    if not entries:
        raise ValueError(f"{path}: no data rows")
    m = max(k for k, _ in entries) + 1
    n = max(l for _, l in entries) + 1
    if len(entries) != m * n:
        raise ValueError(
            f"{path}: incomplete grid, {len(entries)} rows for {m}x{n} points"
        )
    values = np.empty((m, n))
    for (k, l), v in entries.items():
        values[k, l] = v
    return values


def _cmd_spectral(args: argparse.Namespace) -> int:
    try:
        values = _read_series_csv(args.input)
    except OSError as exc:
        raise ValueError(str(exc)) from exc
    hist = HistoryTensor(values=values, T=args.T)
    if args.domain is not None:
        parts = [float(p) for p in args.domain.split(",")]
        if len(parts) != 2 + 2 * hist.d:
            raise ValueError(
                f"--domain needs t0,t1 plus {hist.d} coordinate pair(s), "
                f"got {len(parts)} numbers"
            )
        dom = SubDomain(
            t_window=(parts[0], parts[1]),
            x_box=tuple(
                (parts[2 + 2 * j], parts[3 + 2 * j]) for j in range(hist.d)
            ),
        )
    else:
        dom = full_domain(hist.d, hist.T)
    grad = spectral_gradient(hist, args.theta)
    payload = {
        "input": args.input,
        "m": hist.m,
        "n": hist.n,
        "theta": args.theta,
        "T": hist.T,
        "mean_square_ratio": mean_square_ratio(hist, dom),
        "kinetic_energy_ratio": kinetic_energy_ratio(hist, dom, args.theta),
        "imag_residue": grad.imag_residue,
    }
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rdcarleman",
        description="Carleman linearization runs, bound audits, and resource reports "
        "for discretized reaction-diffusion systems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a named preset")
    p_run.add_argument("preset", help=f"one of: {', '.join(list_presets())}")
    p_run.add_argument(
        "--set", action="append", metavar="KEY=VALUE",
        help="dot-path field override, e.g. --set rd.D=0.2",
    )
    p_run.add_argument("--outdir", default=None, help="artifact directory override")
    p_run.set_defaults(func=_cmd_run)

    p_audit = sub.add_parser("audit", help="replay the inequality suites")
    p_audit.add_argument(
        "scope", nargs="?", default="all",
        help="all or a module name (heatdecay, linsys, rdode, carleman, spectral)",
    )
    p_audit.set_defaults(func=_cmd_audit)

    p_res = sub.add_parser("resources", help="query-count report for a preset")
    p_res.add_argument("preset")
    p_res.add_argument("--N", type=int, required=True, help="truncation order")
    p_res.add_argument("--eps", type=float, required=True, help="target precision")
    p_res.add_argument(
        "--G", type=float, default=None,
        help="history norm override (otherwise read from the stored run)",
    )
    p_res.set_defaults(func=_cmd_resources)

    p_spec = sub.add_parser(
        "spectral", help="gradient observables of a (k,l,value) CSV time series"
    )
    p_spec.add_argument("input", help="CSV with columns k,l,value")
    p_spec.add_argument("--theta", type=int, required=True, help="frequency cutoff")
    p_spec.add_argument(
        "--domain", default=None, metavar="T0,T1,X0,X1",
        help="sub-domain window (default: everything)",
    )
    p_spec.add_argument("--T", type=float, default=1.0, help="time horizon of the series")
    p_spec.set_defaults(func=_cmd_spectral)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"assertion failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
