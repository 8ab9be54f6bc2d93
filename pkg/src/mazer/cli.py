"""Command-line front end: scans, cross-checks and the adiabatic study.

Exit codes: 0 success, 1 validation error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import adiabatic, algebra
from .core import MazerError, ModeProfile, NumericalError, SystemConfig, ValidationError
from .scattering import emission_probability_scan
from .wavepacket import (
    PacketSpec,
    asymptotic_analysis,
    auto_grid,
    propagate,
    stationary_populations,
)

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def render(rows: list[dict], fmt: str, footer: dict | None = None) -> str:
    """CSV with one header row and 17 significant digits, or a JSON document."""
    if fmt == "json":
        doc = {"rows": rows}
        if footer:
            doc.update(footer)
        return json.dumps(doc, indent=2, default=float) + "\n"
    buf = io.StringIO()
    if rows:
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(rows[0]))
        for r in rows:
            w.writerow([_fmt(v) for v in r.values()])
    for key, value in (footer or {}).items():
        buf.write(f"# {key}={_fmt(value) if not isinstance(value, str) else value}\n")
    return buf.getvalue()


def emit(text: str, out: str | None) -> None:
    """Write the whole table at once so a failed run never leaves a partial file."""
    if out in (None, "-"):
        sys.stdout.write(text)
        return
    path = Path(out)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _worker_count() -> int:
    raw = os.environ.get("MAZER_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError as exc:
        raise ValidationError(f"MAZER_THREADS must be an integer, got {raw!r}") from exc
    if n < 1:
        raise ValidationError("MAZER_THREADS must be >= 1")
    return n


def _add_physics(p, L_default=1.0, multi_delta=False):
    p.add_argument("--g", type=float, default=1.0, help="coupling strength")
    if multi_delta:
        p.add_argument("--delta", type=float, nargs="+", dest="delta_list", default=None,
                       help="detunings; crossed with every --k0")
    else:
        p.add_argument("--delta", type=float, default=0.0, help="detuning omega - omega0")
    p.add_argument("--n", type=int, default=0, help="photon number")
    p.add_argument("--m", type=float, default=0.5, help="atomic mass")
    p.add_argument("--L", type=float, default=None, help=f"cavity length (default {L_default})")
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def _config(args, L_default=1.0, delta=None) -> SystemConfig:
    L = args.L if args.L is not None else L_default
    return SystemConfig(g=args.g, delta=args.delta if delta is None else delta,
                        n=args.n, m=args.m, L=L)


def _profile(spec: str, L: float | None) -> ModeProfile:
    if spec == "mesa":
        return ModeProfile.mesa(1.0 if L is None else L)
    if not Path(spec).is_file():
        raise ValidationError(f"staircase file not found: {spec}")
    return ModeProfile.from_file(spec)


def run_scatter(args) -> int:
    if args.k_steps < 1 or not 0 < args.k_min <= args.k_max:
        raise ValidationError("need 0 < k-min <= k-max and k-steps >= 1")
    if args.k_steps == 1 and args.k_min != args.k_max:
        raise ValidationError("k-steps = 1 needs k-min = k-max")
    profile = _profile(args.profile, args.L)
    config = _config(args, L_default=profile.length)
    ks = np.linspace(args.k_min, args.k_max, args.k_steps)
    with ThreadPoolExecutor(max_workers=_worker_count()) as pool:
        rows = emission_probability_scan(config, profile, ks, executor=pool)
    emit(render(rows, args.format), args.out)
    return EXIT_OK


def run_crosscheck(args) -> int:
    config0 = _config(args, L_default=3.0)
    profile = ModeProfile.mesa(config0.L)
    rows, worst = [], 0.0
    cells = [(d, k) for d in args.delta_values for k in args.k0]
    names = ("P_a_reflected", "P_a_transmitted", "P_b_reflected", "P_b_transmitted")
    for delta, k0 in cells:
        config = config0.replace(delta=delta)
        sigma_z = args.sigma_z if args.sigma_z else 0.5 / (args.sigma_ratio * k0)
        try:
            packet = PacketSpec(k0=k0, sigma_z=sigma_z, z0=-args.start_widths * sigma_z)
            grid, t_final = auto_grid(config, profile, packet, N=args.grid_points,
                                       points_per_wavelength=args.points_per_wavelength)
            state = propagate(config, profile, grid, packet, t_final)
            pops = asymptotic_analysis(state, grid, config)
            exact = stationary_populations(config, profile, grid, packet)
        except MazerError as exc:
            raise type(exc)(f"cell delta={delta:g}, k0={k0:g}: {exc}") from exc
        row = {"delta": delta, "k0": k0, "sigma_z": sigma_z}
        gaps = np.abs(pops.as_array() - exact.as_array())
        for name, s, w_, gap in zip(names, exact.as_array(), pops.as_array(), gaps):
            row[f"{name}_stationary"] = float(s)
            row[f"{name}_wavepacket"] = float(w_)
            row[f"{name}_gap"] = float(gap)
        row["mean_k_b_transmitted"] = pops.mean_k["b_transmitted"]
        row["emission_k_expected"] = (math.sqrt(k0 ** 2 - 2 * config.m * delta)
                                      if k0 ** 2 > 2 * config.m * delta else float("nan"))
        worst = max(worst, float(gaps.max()))
        rows.append(row)
    emit(render(rows, args.format, {"max_gap": worst, "tol": args.tol}), args.out)
    if worst > args.tol:
        print(f"crosscheck failed: max gap {worst:.3e} exceeds tol {args.tol:g}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def run_adiabatic_study(args) -> int:
    if args.w_halvings < 0 or not args.w_start > 0:
        raise ValidationError("need w-start > 0 and w-halvings >= 0")
    config = _config(args, L_default=3.0)
    variant = args.variant.replace("-", "_")
    packet = PacketSpec(k0=args.k0, sigma_z=args.sigma_z, z0=-5.0 * args.sigma_z)
    grid, t_final = auto_grid(config, ModeProfile.mesa(config.L), packet,
                               points_per_wavelength=args.points_per_wavelength)
    ws = [args.w_start / 2 ** i for i in range(args.w_halvings + 1)]
    table = adiabatic.mesa_limit_discrepancy(
        config, grid, packet, ws, t_final, variant=variant,
        keep_derivative_terms=args.terms == "printed", adiabatic_dt=args.adiabatic_dt)
    rows = [asdict(r) for r in table]
    footer = {}
    if config.delta != 0 and len(ws) > 1:
        footer["loglog_slope"] = adiabatic.loglog_slope(ws, [r.max_dtheta_dz for r in table])
    if variant == "as_published" and config.delta == 0:
        smoothed = adiabatic.SmoothedProfile(config.L, ws[0])
        ad_grid = grid.__class__(grid.z_min, grid.z_max, grid.N, args.adiabatic_dt)
        pub = adiabatic.propagate_adiabatic(config, smoothed, ad_grid, packet, t_final, "as_published")
        cor = adiabatic.propagate_adiabatic(config, smoothed, ad_grid, packet, t_final, "sign_corrected")
        z_pub = adiabatic.mean_position(ad_grid, pub.C_minus)
        z_cor = adiabatic.mean_position(ad_grid, cor.C_minus)
        footer["reversed_velocity"] = (
            f"C- mean velocity as_published={(z_pub - packet.z0) / t_final:.6g} "
            f"sign_corrected={(z_cor - packet.z0) / t_final:.6g} "
            f"overlap={adiabatic.overlap(pub.C_minus, cor.C_minus):.3e}")
        print(f"reversed-velocity diagnostic: {footer['reversed_velocity']}", file=sys.stderr)
    emit(render(rows, args.format, footer), args.out)
    return EXIT_OK


def run_algebra_check(args) -> int:
    samples = algebra_samples(args.samples)
    worst = {tag: 0.0 for tag in algebra.OPERATORS}
    worst["ground_decoupling"] = 0.0
    for theta, n in samples:
        for tag in algebra.OPERATORS:
            for bra in "+-":
                for ket in "+-":
                    for n2 in (n, max(0, n - 1)):
                        c = algebra.closed_form_element(tag, bra, ket, n, n2, theta)
                        e = algebra.operator_element(tag, bra, ket, n, n2, theta)
                        worst[tag] = max(worst[tag], abs(c - e))
        worst["ground_decoupling"] = max(worst["ground_decoupling"],
                                         algebra.ground_block_decoupling(n, theta))
    rows = [{"check": k, "max_abs_error": v, "pass": v <= args.tol} for k, v in worst.items()]
    emit(render(rows, args.format), args.out)
    return EXIT_OK if all(r["pass"] for r in rows) else EXIT_NUMERICAL


def algebra_samples(count: int, n_max: int = 10):
    """Deterministic low-discrepancy (theta, n) samples; theta in [0, pi/2]."""
    golden = (math.sqrt(5.0) - 1.0) / 2.0
    plastic = 0.7548776662466927
    return [((i * golden) % 1.0 * 0.5 * math.pi, int(((i * plastic) % 1.0) * (n_max + 1)))
            for i in range(1, count + 1)]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mazer", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="scenario", required=True, parser_class=_Parser)

    p = sub.add_parser("scatter", help="stationary emission-probability scan over k")
    _add_physics(p)
    p.add_argument("--k-min", type=float, required=True)
    p.add_argument("--k-max", type=float, required=True)
    p.add_argument("--k-steps", type=int, default=50)
    p.add_argument("--profile", default="mesa",
                   help="'mesa' or a two-column (segment_length, u) staircase file")
    p.set_defaults(func=run_scatter)

    p = sub.add_parser("crosscheck", aliases=["wavepacket"],
                       help="stationary solver vs wavepacket propagation")
    _add_physics(p, L_default=3.0, multi_delta=True)
    p.add_argument("--k0", type=float, nargs="+", default=[2.0])
    p.add_argument("--sigma-ratio", type=float, default=0.02, help="sigma_k / k0")
    p.add_argument("--sigma-z", type=float, default=None)
    p.add_argument("--start-widths", type=float, default=5.6)
    p.add_argument("--grid-points", type=int, default=None)
    p.add_argument("--points-per-wavelength", type=int, default=32)
    p.add_argument("--tol", type=float, default=1e-3)
    p.set_defaults(func=run_crosscheck)

    p = sub.add_parser("adiabatic", help="adiabatic-breakdown study over smoothing widths")
    _add_physics(p, L_default=3.0)
    p.add_argument("--w-start", type=float, default=0.75)
    p.add_argument("--w-halvings", type=int, default=5)
    p.add_argument("--variant", choices=("sign-corrected", "as-published"), default="sign-corrected")
    p.add_argument("--terms", choices=("dropped", "printed"), default="dropped",
                   help="drop the frame-derivative terms or keep them as printed")
    p.add_argument("--k0", type=float, default=3.0)
    p.add_argument("--sigma-z", type=float, default=4.0)
    p.add_argument("--adiabatic-dt", type=float, default=0.01)
    p.add_argument("--points-per-wavelength", type=int, default=16)
    p.set_defaults(func=run_adiabatic_study)

    p = sub.add_parser("algebra-check", help="closed-form matrix elements vs operator action")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=run_algebra_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # Bad flags (and --help) return a status rather than exiting mid-call.
        return exc.code if isinstance(exc.code, int) else EXIT_VALIDATION
    if args.scenario in ("crosscheck", "wavepacket"):
        args.delta_values = args.delta_list or [0.0]
        args.delta = args.delta_values[0]
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericalError, MazerError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
