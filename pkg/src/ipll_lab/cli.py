"""Command-line entry point: ``ipll-lab <subcommand> [flags]``.

Exit status: 0 on success (including a Diverged verdict), 1 for invalid
input, 2 for runtime failures such as a missing equilibrium.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import kernels
from .analysis import (
    critical_impedance,
    damping_bounds,
    damping_sweep,
    existence_boundary,
    map_ipll_to_pll,
)
from .config import ParseError, StudyConfig, config_from_mapping
from .core import IpllLabError, ValidationError
from .dynamics import ModelKind
from .output import (
    build_report,
    emit_sweep_csv,
    emit_trajectory_csv,
    format_report,
    sweep_plot,
    verdict_lines,
    waveform_panels,
)
from .simulator import integrate, measure_damping, run_figure5, run_figure6_suite


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# flag dest -> config key
_FLAG_KEYS = {
    "ug": "u_g_volt", "omega_g": "omega_g_rad_s", "omega_0": "omega_0_rad_s",
    "lg": "l_g_henry", "rg": "r_g_ohm", "idref": "i_dref_amp", "iqref": "i_qref_amp",
    "rated_current": "rated_current_amp", "kp": "k_ppll", "ki": "k_ipll", "j": "j_ipll",
    "d": "d_ipll", "k_fluct": "k_fluct", "model": "model", "duration": "duration_s",
    "dt": "dt_s", "decimation": "decimation", "offset": "initial_offset_rad",
    "lg_min": "sweep_l_g_min_henry", "lg_max": "sweep_l_g_max_henry", "points": "sweep_points",
    "envelope_lg": "envelope_l_g_henry", "csv": "output_csv", "svg": "output_svg",
}


def _common() -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    g = p.add_argument_group("study parameters (SI units, peak V/A)")
    g.add_argument("--config", help="JSON study config; flags override its values")
    g.add_argument("--ug", type=float, help="grid voltage amplitude [V]")
    g.add_argument("--omega-g", type=float, help="grid angular frequency [rad/s]")
    g.add_argument("--omega-0", type=float, help="nominal angular frequency [rad/s]")
    g.add_argument("--lg", type=float, help="grid inductance [H]")
    g.add_argument("--rg", type=float, help="grid resistance [ohm]")
    g.add_argument("--idref", type=float, help="d-axis current reference [A]")
    g.add_argument("--iqref", type=float, help="q-axis current reference [A]")
    g.add_argument("--rated-current", type=float, help="rated current for SCR [A]")
    g.add_argument("--kp", type=float, help="PI-PLL proportional gain")
    g.add_argument("--ki", type=float, help="PI-PLL integral gain")
    g.add_argument("--j", type=float, help="IPLL integral gain J")
    g.add_argument("--d", type=float, help="IPLL damping gain D [V*s/rad]")
    g.add_argument("--map-pll", action="store_true",
                   help="derive PI-PLL gains from J, D at this grid")
    g.add_argument("--k-fluct", type=float, help="voltage fluctuation coefficient")
    return p


def _outputs(p):
    p.add_argument("--csv", help="write CSV here")
    p.add_argument("--svg", help="write SVG plot here")


def _sim_flags(p, duration_help):
    p.add_argument("--duration", type=float, help=duration_help)
    p.add_argument("--dt", type=float, help="integration step [s]")
    p.add_argument("--decimation", type=int, help="record every n-th step")
    p.add_argument("--offset", type=float, help="initial angle offset [rad]")
    p.add_argument("--backend", choices=kernels.available_backends(),
                   help=f"RK4 backend (default {kernels.BACKEND})")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="ipll-lab",
                     description="PI-PLL vs IPLL synchronization stability of grid-following inverters")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("analyze", parents=[common], help="equilibrium, coefficients, eigenvalues, bounds")

    p = sub.add_parser("sweep", parents=[common], help="damping coefficients over L_g")
    p.add_argument("--lg-min", type=float, help="sweep start [H]")
    p.add_argument("--lg-max", type=float, help="sweep end [H]")
    p.add_argument("--points", type=int, help="number of sweep points")
    _outputs(p)

    p = sub.add_parser("simulate", parents=[common], help="one time-domain run")
    p.add_argument("--model", choices=[m.value for m in ModelKind])
    _sim_flags(p, "simulated time [s]")
    p.add_argument("--step-lg", type=float, help="step L_g to this value [H] ...")
    p.add_argument("--step-time", type=float, default=0.1, help="... at this time [s]")
    _outputs(p)

    for name, help_, dur in (("fig5", "PI-PLL (mapped gains) vs IPLL at the base grid", "1.0"),
                             ("fig6", "verdict table across weak-grid L_g values", "3.0")):
        p = sub.add_parser(name, parents=[common], help=help_)
        _sim_flags(p, f"simulated time per run [s] (default {dur})")
        p.add_argument("--signal", action="store_true", help="use signal-level models")
        if name == "fig6":
            p.add_argument("--step", action="store_true",
                           help="disturb with an L_g step instead of an angle offset")
            p.add_argument("--workers", type=int, default=1, help="parallel runs")
        _outputs(p)

    sub.add_parser("map-gains", parents=[common], help="PI-PLL gains equivalent to J, D")

    p = sub.add_parser("design-damping", parents=[common], help="bounds and a recommended D")
    p.add_argument("--envelope-lg", type=float, nargs="+",
                   help="L_g values [H] spanning the operating envelope")

    p = sub.add_parser("find-critical", parents=[common], help="L_g where the PI-PLL damping vanishes")
    p.add_argument("--lg-min", type=float, help="search start [H]")
    p.add_argument("--lg-max", type=float, help="search end [H]")
    p.add_argument("--ipll", action="store_true", help="search the IPLL damping instead")
    return parser


def resolve_config(args) -> StudyConfig:
    data, text = {}, None
    if args.config:
        text = Path(args.config).read_text()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, line=exc.lineno) from None
        if not isinstance(data, dict):
            raise ParseError("top level must be a JSON object", line=1)
    for dest, key in _FLAG_KEYS.items():
        v = getattr(args, dest, None)
        if v is not None:
            data[key] = v
    if args.map_pll:
        data["map_pll_from_ipll"] = True
    if getattr(args, "step_lg", None) is not None:
        data["events"] = [{"time_s": args.step_time, "target": "l_g", "value": args.step_lg}]
    if args.command == "fig6" and getattr(args, "duration", None) is None:
        data.setdefault("duration_s", 3.0)
    return config_from_mapping(data, text)


def _write(path, text, cfg_json, out):
    Path(path).write_text(text)
    Path(str(path) + ".meta.json").write_text(cfg_json + "\n")
    print(f"wrote {path}", file=out)


def run(argv=None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        args = build_parser().parse_args(argv)
        cfg = resolve_config(args)
    except (UsageError, ParseError, ValidationError, OSError) as exc:
        print(f"error: {exc}", file=err)
        return 1
    except IpllLabError as exc:
        print(f"error: {exc}", file=err)
        return 2

    cfg_json = json.dumps(cfg.to_dict(), sort_keys=True)
    print(f"# config: {cfg_json}", file=out)
    try:
        _dispatch(args, cfg, cfg_json, out)
    except (ValidationError, ParseError) as exc:
        print(f"error: {exc}", file=err)
        return 1
    except (IpllLabError, ArithmeticError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=err)
        return 2
    return 0


def _dispatch(args, cfg: StudyConfig, cfg_json: str, out) -> None:
    grid, sp = cfg.grid, cfg.setpoint
    cmd = args.command
    backend = getattr(args, "backend", None)

    if cmd == "analyze":
        envelope = [(grid.with_(l_g=l), sp) for l in cfg.envelope_l_g] or None
        rep = build_report(grid, sp, cfg.pll, cfg.ipll, cfg.k_fluct, envelope, cfg.rated_current)
        out.write(format_report(rep))

    elif cmd == "sweep":
        rows = damping_sweep(grid, sp, cfg.pll, cfg.ipll, cfg.sweep_range, cfg.sweep_points)
        text = emit_sweep_csv(rows)
        if cfg.output_csv:
            _write(cfg.output_csv, text, cfg_json, out)
        else:
            out.write(text)
        if cfg.output_svg:
            _write(cfg.output_svg, sweep_plot(rows, metadata=cfg_json), cfg_json, out)

    elif cmd == "simulate":
        tr = integrate(cfg.scenario(), backend)
        print(f"verdict: {_verdict_text(tr.verdict)}", file=out)
        try:
            est = measure_damping(tr)
            print(f"measured: omega_d = {est.omega_d_est:.6g} rad/s, zeta = {est.zeta_est:.6g} "
                  f"({est.n_peaks_used} extrema)", file=out)
        except ValueError:
            pass
        text = emit_trajectory_csv(tr)
        if cfg.output_csv:
            _write(cfg.output_csv, text, cfg_json, out)
        else:
            out.write(text)
        if cfg.output_svg:
            svg = waveform_panels([(tr.model.value, [tr])], ncols=1, metadata=cfg_json)
            _write(cfg.output_svg, svg, cfg_json, out)

    elif cmd == "fig5":
        base = cfg.scenario(ModelKind.IPLL_SIGNAL if args.signal else ModelKind.IPLL_REDUCED)
        runs = run_figure5(base, cfg.ipll, offset=cfg.initial_offset, backend=backend)
        a, b = runs[0].trajectory, runs[1].trajectory
        dev = float(np.max(np.abs(a.delta - b.delta)))
        peak = float(np.max(np.abs(b.delta - (b.delta[0] - cfg.initial_offset))))
        print(f"max |delta_pll - delta_ipll| = {dev:.6g} rad ({100 * dev / peak:.3f} % of peak "
              f"deviation {peak:.6g} rad)", file=out)
        for r in runs:
            print(f"{r.model.value}: {_verdict_text(r.trajectory.verdict)}", file=out)
        _emit_runs(cfg, cfg_json, out, [r.trajectory for r in runs],
                   [(f"L_g = {grid.l_g * 1e3:.4g} mH", [r.trajectory for r in runs])])

    elif cmd == "fig6":
        base = cfg.scenario(ModelKind.IPLL_SIGNAL if args.signal else ModelKind.IPLL_REDUCED)
        runs = run_figure6_suite(base, pll_gains=cfg.pll, ipll_gains=cfg.ipll,
                                 offset=cfg.initial_offset,
                                 disturbance="step" if args.step else "offset",
                                 max_workers=args.workers, backend=backend)
        out.write(verdict_lines(runs))
        groups = {}
        for r in runs:
            groups.setdefault(r.l_g, []).append(r.trajectory)
        _emit_runs(cfg, cfg_json, out, [r.trajectory for r in runs],
                   [(f"L_g = {l * 1e3:.4g} mH", trs) for l, trs in groups.items()])

    elif cmd == "map-gains":
        g = map_ipll_to_pll(cfg.ipll, grid, sp)
        print(f"K_ppll = {g.k_ppll:.4f} rad/(V*s)   ({g.k_ppll!r})", file=out)
        print(f"K_ipll = {g.k_ipll:.3f} rad/(V*s^2)  ({g.k_ipll!r})", file=out)

    elif cmd == "design-damping":
        envelope = [(grid.with_(l_g=l), sp) for l in cfg.envelope_l_g] or None
        b = damping_bounds(grid, sp, cfg.ipll, envelope, cfg.k_fluct)
        recommended = b.lower_conservative
        d_e = recommended - max(g.l_g * s.i_dref for g, s in (envelope or [(grid, sp)]))
        print(f"lower_exact        = {b.lower_exact:.6g} V*s/rad  (max L_g*I_dref over envelope)", file=out)
        print(f"lower_conservative = {b.lower_conservative:.6g} V*s/rad  (k*U_g/omega_0, k = {b.k_fluct:g})", file=out)
        print(f"upper (on D_e)     = {b.upper:.6g} V*s/rad  (underdamped limit at this grid)", file=out)
        print(f"recommended D      = {recommended:.6g} V*s/rad", file=out)
        d_e_here = recommended - grid.l_g * sp.i_dref
        status = "ok" if 0 < d_e_here < b.upper else "outside (0, upper) at this grid"
        print(f"resulting D_e      = {d_e_here:.6g} V*s/rad here, {d_e:.6g} at the weakest "
              f"envelope point: {status}", file=out)

    elif cmd == "find-critical":
        gains = cfg.ipll if args.ipll else cfg.pll
        rng = None
        if args.lg_min is not None or args.lg_max is not None:
            lo = args.lg_min if args.lg_min is not None else grid.l_g
            hi = (args.lg_max if args.lg_max is not None
                  else existence_boundary(grid, sp) * (1 - 1e-9))
            rng = (lo, hi)
        cp = critical_impedance(grid, sp, gains, rng)
        print(f"l_g* = {cp.l_g:.6e} H", file=out)
        if not cp.equilibrium_exists:
            print("note: no equilibrium exists at l_g*", file=out)


def _verdict_text(v) -> str:
    fields = ", ".join(f"{k}={val!r}" if isinstance(val, str) else f"{k}={val:.6g}"
                       for k, val in vars(v).items())
    return f"{v.name}({fields})" if fields else v.name


def _emit_runs(cfg, cfg_json, out, trajs, groups):
    if cfg.output_csv:
        _write(cfg.output_csv, emit_trajectory_csv(trajs), cfg_json, out)
    if cfg.output_svg:
        _write(cfg.output_svg, waveform_panels(groups, metadata=cfg_json), cfg_json, out)


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
