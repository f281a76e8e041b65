"""CSV, SVG and text-report emitters."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .analysis import (
    DampingBounds,
    SweepRow,
    damping_bounds,
    eigenvalues,
    ipll_coefficients,
    pll_coefficients,
    second_order_characteristics,
    solve_equilibrium,
)
from .core import DegenerateAngle, IpllLabError, OperatingPoint
from .dynamics import ModelKind
from .simulator import Trajectory

TRAJECTORY_HEADER = "t_s,delta_pll_rad,omega_pll_rad_s,u_q_v,l_g_henry,model"
SWEEP_HEADER = "l_g_henry,scr,delta0_rad,d_e_pll,d_e_ipll,j_e_pll,j_e_ipll,equilibrium_exists"


class EmptySeries(IpllLabError, ValueError):
    pass


def _num(x: float) -> str:
    # 17 significant digits round-trip every double
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.16e}"


def emit_trajectory_csv(traj: Trajectory | Sequence[Trajectory]) -> str:
    trajs = [traj] if isinstance(traj, Trajectory) else list(traj)
    if not trajs or all(len(t) == 0 for t in trajs):
        raise ValueError("nothing to emit")
    lines = [TRAJECTORY_HEADER]
    for tr in trajs:
        name = tr.model.value
        for t, d, w, uq, lg in tr.rows():
            lines.append(f"{_num(t)},{_num(d)},{_num(w)},{_num(uq)},{_num(lg)},{name}")
    return "\n".join(lines) + "\n"


def emit_sweep_csv(rows: Sequence[SweepRow]) -> str:
    if not rows:
        raise ValueError("nothing to emit")
    lines = [SWEEP_HEADER]
    for r in rows:
        lines.append(",".join([
            _num(r.l_g), _num(r.scr), _num(r.delta_0), _num(r.d_e_pll), _num(r.d_e_ipll),
            _num(r.j_e_pll), _num(r.j_e_ipll), "true" if r.equilibrium_exists else "false",
        ]))
    return "\n".join(lines) + "\n"


def read_trajectory_csv(text: str) -> list[dict]:
    lines = text.splitlines()
    if not lines or lines[0] != TRAJECTORY_HEADER:
        raise ValueError("not a trajectory CSV")
    keys = TRAJECTORY_HEADER.split(",")
    out = []
    for line in lines[1:]:
        vals = line.split(",")
        row = {k: float(v) for k, v in zip(keys[:-1], vals[:-1])}
        row["model"] = vals[-1]
        out.append(row)
    return out


def read_sweep_csv(text: str) -> list[SweepRow]:
    lines = text.splitlines()
    if not lines or lines[0] != SWEEP_HEADER:
        raise ValueError("not a sweep CSV")
    rows = []
    for line in lines[1:]:
        *nums, flag = line.split(",")
        rows.append(SweepRow(*(float(v) for v in nums), flag == "true"))
    return rows


# -- SVG ----------------------------------------------------------------------

class Series(NamedTuple):
    label: str
    x: Sequence[float]
    y: Sequence[float]


@dataclass(frozen=True)
class Axes:
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    xscale: float = 1.0  # multiply x data for display, e.g. 1e3 for mH
    yscale: float = 1.0
    hlines: tuple[float, ...] = ()


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")
_PW, _PH = 480, 300  # panel size
_ML, _MR, _MT, _MB = 64, 16, 30, 44


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    span = hi - lo
    raw = span / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step - 1e-9) * step
    out = []
    v = first
    while v <= hi + 1e-9 * step:
        out.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return out


def _limits(values: np.ndarray) -> tuple[float, float]:
    finite = values[np.isfinite(values)]
    if finite.size == 0:
        return -1.0, 1.0
    lo, hi = float(finite.min()), float(finite.max())
    if hi == lo:
        pad = abs(lo) * 0.1 or 1.0
        return lo - pad, hi + pad
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _panel(axes: Axes, series: Sequence[Series], ox: float, oy: float) -> list[str]:
    if not series:
        raise EmptySeries("panel has no series")
    xs, ys = [], []
    for s in series:
        x = np.asarray(s.x, dtype=float) * axes.xscale
        y = np.asarray(s.y, dtype=float) * axes.yscale
        if len(x) < 2 or len(x) != len(y):
            raise EmptySeries(f"series {s.label!r} needs >= 2 points of matching x/y")
        xs.append(x)
        ys.append(y)
    x0, x1 = _limits(np.concatenate(xs))
    y0, y1 = _limits(np.concatenate(ys + [np.asarray(axes.hlines, dtype=float)]))
    w, h = _PW - _ML - _MR, _PH - _MT - _MB
    L, T = ox + _ML, oy + _MT

    def px(v):
        return L + (v - x0) / (x1 - x0) * w

    def py(v):
        return T + h - (v - y0) / (y1 - y0) * h

    el = [f'<rect x="{L:.2f}" y="{T:.2f}" width="{w}" height="{h}" fill="none" stroke="#000"/>']
    for v in _ticks(x0, x1):
        el.append(f'<line x1="{px(v):.2f}" y1="{T + h:.2f}" x2="{px(v):.2f}" y2="{T + h + 4:.2f}" stroke="#000"/>')
        el.append(f'<text x="{px(v):.2f}" y="{T + h + 16:.2f}" text-anchor="middle">{v:.4g}</text>')
    for v in _ticks(y0, y1):
        el.append(f'<line x1="{L - 4:.2f}" y1="{py(v):.2f}" x2="{L:.2f}" y2="{py(v):.2f}" stroke="#000"/>')
        el.append(f'<text x="{L - 6:.2f}" y="{py(v) + 4:.2f}" text-anchor="end">{v:.4g}</text>')
    for v in axes.hlines:
        el.append(f'<line x1="{L:.2f}" y1="{py(v):.2f}" x2="{L + w:.2f}" y2="{py(v):.2f}" '
                  f'stroke="#888" stroke-dasharray="4 3"/>')
    el.append(f'<text x="{L + w / 2:.2f}" y="{oy + _PH - 8:.2f}" text-anchor="middle">{escape(axes.xlabel)}</text>')
    el.append(f'<text transform="translate({ox + 14:.2f},{T + h / 2:.2f}) rotate(-90)" '
              f'text-anchor="middle">{escape(axes.ylabel)}</text>')
    if axes.title:
        el.append(f'<text x="{L + w / 2:.2f}" y="{oy + 20:.2f}" text-anchor="middle" '
                  f'font-weight="bold">{escape(axes.title)}</text>')
    for i, (s, x, y) in enumerate(zip(series, xs, ys)):
        color = _COLORS[i % len(_COLORS)]
        # break the polyline at NaN gaps
        ok = np.isfinite(x) & np.isfinite(y)
        runs, cur = [], []
        for xv, yv, good in zip(x, y, ok):
            if good:
                cur.append(f"{px(xv):.2f},{py(yv):.2f}")
            elif cur:
                runs.append(cur)
                cur = []
        if cur:
            runs.append(cur)
        for run in runs:
            el.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                      f'points="{" ".join(run)}"/>')
        ly = T + 14 + 16 * i
        el.append(f'<line x1="{L + w - 110:.2f}" y1="{ly - 4:.2f}" x2="{L + w - 90:.2f}" '
                  f'y2="{ly - 4:.2f}" stroke="{color}" stroke-width="2"/>')
        el.append(f'<text x="{L + w - 86:.2f}" y="{ly:.2f}">{escape(s.label)}</text>')
    return el


def render_svg_panels(panels: Sequence[tuple[Axes, Sequence[Series]]], ncols: int = 2,
                      metadata: str | None = None) -> str:
    """Standalone SVG 1.1 document with one plot per ``(axes, series)`` panel."""
    if not panels:
        raise EmptySeries("no panels")
    ncols = max(1, min(ncols, len(panels)))
    nrows = math.ceil(len(panels) / ncols)
    W, H = ncols * _PW, nrows * _PH
    body = []
    for k, (axes, series) in enumerate(panels):
        body.extend(_panel(axes, series, (k % ncols) * _PW, (k // ncols) * _PH))
    head = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">',
    ]
    if metadata:
        head.append(f"<metadata>{escape(metadata)}</metadata>")
    head.append(f'<rect width="{W}" height="{H}" fill="#fff"/>')
    return "\n".join(head + body + ["</svg>"]) + "\n"


def render_svg_plot(series: Sequence[Series], axes: Axes = Axes(),
                    metadata: str | None = None) -> str:
    if not series:
        raise EmptySeries("no series")
    return render_svg_panels([(axes, series)], ncols=1, metadata=metadata)


def sweep_plot(rows: Sequence[SweepRow], metadata: str | None = None) -> str:
    x = [r.l_g for r in rows]
    return render_svg_plot(
        [Series("PI-PLL D_e", x, [r.d_e_pll for r in rows]),
         Series("IPLL D_e", x, [r.d_e_ipll for r in rows])],
        Axes("Equivalent damping vs grid inductance", "L_g [mH]", "D_e [V*s/rad]",
             xscale=1e3, hlines=(0.0,)),
        metadata=metadata,
    )


def waveform_panels(groups: Sequence[tuple[str, Sequence[Trajectory]]], ncols: int = 2,
                    metadata: str | None = None) -> str:
    """One panel per group; each trajectory in a group is one delta(t) curve."""
    panels = []
    for title, trajs in groups:
        series = [Series(tr.model.value, tr.t, tr.delta) for tr in trajs if len(tr) >= 2]
        panels.append((Axes(title, "t [s]", "delta_pll [rad]"), series))
    return render_svg_panels(panels, ncols=ncols, metadata=metadata)


# -- text report --------------------------------------------------------------

@dataclass
class Report:
    equilibrium: OperatingPoint
    coefficients: dict = field(default_factory=dict)  # model name -> EquivalentCoefficients
    eigen: dict = field(default_factory=dict)  # model name -> (Eigenpair, SecondOrder | None)
    bounds: DampingBounds | None = None
    verdicts: dict = field(default_factory=dict)  # model name -> str


def build_report(grid, setpoint, pll, ipll, k_fluct=2.0, envelope=None,
                 rated_current=None) -> Report:
    op = solve_equilibrium(grid, setpoint, rated_current)
    rep = Report(equilibrium=op)
    for name, coeffs in (("pi-pll", pll_coefficients(grid, setpoint, pll, op.delta_0)),
                         ("ipll", ipll_coefficients(grid, setpoint, ipll))):
        rep.coefficients[name] = coeffs
        eig = eigenvalues(coeffs, grid, op.delta_0)
        try:
            so = second_order_characteristics(coeffs, grid, op.delta_0)
        except (DegenerateAngle, ValueError):
            so = None
        rep.eigen[name] = (eig, so)
        mr = eig.max_real
        rep.verdicts[name] = (f"small-signal stable (max Re = {mr:.6g} 1/s)" if mr < 0
                              else f"small-signal UNSTABLE (max Re = {mr:.6g} 1/s)")
    rep.bounds = damping_bounds(grid, setpoint, ipll, envelope, k_fluct)
    return rep


def _c(z: complex) -> str:
    return f"{z.real:.6g} {'+' if z.imag >= 0 else '-'} j{abs(z.imag):.6g}"


def format_report(rep: Report) -> str:
    op = rep.equilibrium
    out = [
        "[equilibrium]",
        f"  delta_0 = {op.delta_0:.6f} rad ({math.degrees(op.delta_0):.3f} deg)"
        + ("  [marginal]" if op.marginal else ""),
        f"  p_in    = {op.p_in:.6g} V",
        f"  SCR     = {op.scr:.6g} (-)",
        "[coefficients]",
    ]
    for name, c in rep.coefficients.items():
        out.append(f"  {name:7s} J_e = {c.j_e:.6g} V*s^2/rad  D_e = {c.d_e:.6g} V*s/rad  "
                   f"D_e1 = {c.d_e1:.6g} V*s/rad  D_e2 = {c.d_e2:.6g} V*s/rad")
    out.append("[eigenvalues]")
    for name, (eig, so) in rep.eigen.items():
        line = f"  {name:7s} lambda_1,2 = {_c(eig.lambda_1)}, {_c(eig.lambda_2)} 1/s"
        if so is not None:
            line += (f"  omega_n = {so.omega_n:.6g} rad/s  zeta = {so.zeta:.6g} (-)"
                     f"  omega_d = {so.omega_d:.6g} rad/s")
        out.append(line)
    if rep.bounds is not None:
        b = rep.bounds
        out += [
            "[damping bounds]",
            f"  D > max L_g*I_dref        = {b.lower_exact:.6g} V*s/rad",
            f"  D = k*U_g/omega_0 (k={b.k_fluct:g}) = {b.lower_conservative:.6g} V*s/rad",
            f"  D_e < 2*sqrt(J_e*U_g*cos) = {b.upper:.6g} V*s/rad",
        ]
    out.append("[verdict]")
    for name, v in rep.verdicts.items():
        out.append(f"  {name:7s} {v}")
    return "\n".join(out) + "\n"


def verdict_lines(runs: Iterable) -> str:
    lines = ["l_g_henry,model,verdict"]
    for r in runs:
        lines.append(f"{r.l_g:.6g},{r.model.value},{r.trajectory.verdict.name}")
    return "\n".join(lines) + "\n"


__all__ = [
    "TRAJECTORY_HEADER", "SWEEP_HEADER", "EmptySeries", "emit_trajectory_csv", "emit_sweep_csv",
    "read_trajectory_csv", "read_sweep_csv", "Series", "Axes", "render_svg_plot",
    "render_svg_panels", "sweep_plot", "waveform_panels", "Report", "build_report",
    "format_report", "verdict_lines", "ModelKind",
]
