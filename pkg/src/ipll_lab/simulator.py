"""Fixed-step time-domain simulation with parameter-step events."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence, Union

import numpy as np

from . import kernels
from .analysis import map_ipll_to_pll, solve_equilibrium
from .core import (
    WEAK_GRID_L_G,
    BASELINE_GRID,
    BASELINE_IPLL,
    BASELINE_PLL,
    BASELINE_SETPOINT,
    GridParams,
    InverterSetpoint,
    IpllGains,
    IpllLabError,
    NoEquilibrium,
    PiPllGains,
    ValidationError,
    Violation,
    p_in as _p_in,
    validate,
)
from .dynamics import ModelKind, native_state, pack_params

EVENT_TARGETS = ("l_g", "u_g", "omega_g", "i_dref", "i_qref")
_GRID_TARGETS = ("l_g", "u_g", "omega_g")

DEFAULT_DT = 50e-6
DEFAULT_DECIMATION = 10
NOISE_FLOOR = 1e-9  # rad
SETTLE_BAND = 1e-3  # rad
GROWTH_THRESHOLD = 0.01
RESIDUAL_TOL = 5e-3  # relative to u_g


class InsufficientOscillation(IpllLabError, ValueError):
    pass


@dataclass(frozen=True)
class Event:
    time: float
    target: str
    value: float


@dataclass(frozen=True)
class Scenario:
    model: ModelKind
    grid: GridParams
    setpoint: InverterSetpoint
    gains: Union[PiPllGains, IpllGains]
    initial: tuple[float, float]  # native state pair of ``model``
    duration: float
    dt: float = DEFAULT_DT
    events: tuple[Event, ...] = ()
    decimation: int = DEFAULT_DECIMATION

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)


@dataclass(frozen=True)
class Settled:
    settle_time: float
    final_delta: float
    name = "Settled"


@dataclass(frozen=True)
class Diverged:
    detect_time: float
    reason: str
    name = "Diverged"


@dataclass(frozen=True)
class Marginal:
    name = "Marginal"


StabilityVerdict = Union[Settled, Diverged, Marginal]


@dataclass
class Trajectory:
    """Uniformly sampled record of one run; row spacing is ``dt * decimation``."""

    model: ModelKind
    t: np.ndarray
    delta: np.ndarray
    omega: np.ndarray
    u_q: np.ndarray
    l_g: np.ndarray
    verdict: StabilityVerdict = field(default_factory=Marginal)
    p_in: float = math.nan
    u_g: float = math.nan

    def __len__(self):
        return len(self.t)

    def rows(self):
        return zip(self.t, self.delta, self.omega, self.u_q, self.l_g)


class DampingEstimate(NamedTuple):
    omega_d_est: float
    zeta_est: float
    n_peaks_used: int

    @property
    def decay_rate(self) -> float:
        """Estimated ``-Re(lambda)`` [1/s]."""
        z = self.zeta_est
        return z * self.omega_d_est / math.sqrt(1.0 - z * z)


class SuiteRun(NamedTuple):
    l_g: float
    model: ModelKind
    trajectory: Trajectory


# -- scenario handling --------------------------------------------------------

def _steps(t: float, dt: float) -> int | None:
    n = round(t / dt)
    return n if abs(n * dt - t) <= 1e-9 * max(dt, abs(t)) else None


def _apply(grid, setpoint, ev: Event):
    if ev.target in _GRID_TARGETS:
        return grid.with_(**{ev.target: ev.value}), setpoint
    return grid, setpoint.with_(**{ev.target: ev.value})


def validate_scenario(sc: Scenario) -> list[Violation]:
    out = validate(sc.grid, sc.setpoint, sc.gains)
    if sc.model.is_pll != isinstance(sc.gains, PiPllGains):
        out.append(Violation("gains", f"{type(sc.gains).__name__} does not match {sc.model.value}"))
    if not (math.isfinite(sc.duration) and sc.duration > 0):
        out.append(Violation("duration", "must be > 0"))
    if not (math.isfinite(sc.dt) and 0 < sc.dt <= sc.duration):
        out.append(Violation("dt", "must satisfy 0 < dt <= duration"))
    if not (isinstance(sc.decimation, int) and sc.decimation >= 1):
        out.append(Violation("decimation", "must be a positive integer"))
    if len(sc.initial) != 2 or not all(math.isfinite(v) for v in sc.initial):
        out.append(Violation("initial", "must be a finite state pair"))
    if out:
        return out
    if _steps(sc.duration, sc.dt) is None:
        out.append(Violation("duration", f"not a multiple of dt = {sc.dt}"))
    grid, sp = sc.grid, sc.setpoint
    last = -math.inf
    for i, ev in enumerate(sc.events):
        where = f"events[{i}]"
        if ev.target not in EVENT_TARGETS:
            out.append(Violation(where, f"unknown target {ev.target!r}"))
            continue
        if not (ev.time >= 0 and ev.time <= sc.duration):
            out.append(Violation(where, "time outside [0, duration]"))
        elif _steps(ev.time, sc.dt) is None:
            out.append(Violation(where, f"time {ev.time} is not a multiple of dt"))
        if ev.time <= last:
            out.append(Violation(where, "events must be sorted with unique times"))
        last = ev.time
        grid, sp = _apply(grid, sp, ev)
        out.extend(Violation(f"{where}.{v.field}", v.message)
                   for v in validate(grid, sp, sc.gains))
    return out


def baseline_scenario(model: ModelKind = ModelKind.IPLL_REDUCED, l_g: float | None = None,
                   offset: float = 0.1, duration: float = 1.0, dt: float = DEFAULT_DT,
                   gains=None, grid: GridParams = BASELINE_GRID,
                   setpoint: InverterSetpoint = BASELINE_SETPOINT) -> Scenario:
    """Scenario starting ``offset`` rad from equilibrium at the study operating point."""
    if l_g is not None:
        grid = grid.with_(l_g=l_g)
    if gains is None:
        gains = BASELINE_PLL if model.is_pll else BASELINE_IPLL
    op = solve_equilibrium(grid, setpoint)
    initial = native_state(model, grid, setpoint, gains, op.delta_0 + offset, grid.omega_g)
    return Scenario(model, grid, setpoint, gains, initial, duration, dt)


# -- integration --------------------------------------------------------------

def integrate(scenario: Scenario, backend: str | None = None) -> Trajectory:
    """Classical RK4 with events applied at their step boundaries.

    A non-finite state stops the run; the partial record is returned with a
    ``Diverged`` verdict.
    """
    sc = scenario
    violations = validate_scenario(sc)
    if violations:
        raise ValidationError(violations)
    step = kernels.get_segment_integrator(backend)
    dt, dec = float(sc.dt), int(sc.decimation)
    n_total = _steps(sc.duration, dt)

    # group events by step so simultaneous-step targets apply together
    boundaries: list[tuple[int, list[Event]]] = []
    for ev in sc.events:
        k = _steps(ev.time, dt)
        if boundaries and boundaries[-1][0] == k:
            boundaries[-1][1].append(ev)
        else:
            boundaries.append((k, [ev]))

    n_rows = n_total // dec + 1
    out = np.empty((n_rows, 3))
    l_col = np.empty(n_rows)
    grid, sp = sc.grid, sc.setpoint
    d, y = map(float, sc.initial)
    k, pos, finite = 0, 0, True
    bi = 0
    while k < n_total or bi < len(boundaries):
        while bi < len(boundaries) and boundaries[bi][0] == k:
            for ev in boundaries[bi][1]:
                grid, sp = _apply(grid, sp, ev)
            bi += 1
        k_next = boundaries[bi][0] if bi < len(boundaries) else n_total
        if k_next <= k:
            break
        start = pos
        d, y, done, pos, finite = step(sc.model.code, pack_params(grid, sp, sc.gains), d, y, dt,
                                       k_next - k, k, dec, out, pos)
        l_col[start:pos] = grid.l_g
        k += done
        if not finite:
            break
    if finite and n_total % dec == 0:
        # record the terminal state, which no segment wrote
        step(sc.model.code, pack_params(grid, sp, sc.gains), d, y, dt, 1, n_total, dec, out, pos)
        l_col[pos] = grid.l_g
        pos += 1

    traj = Trajectory(
        model=sc.model,
        t=np.arange(pos) * (dt * dec),
        delta=out[:pos, 0].copy(),
        omega=out[:pos, 1].copy(),
        u_q=out[:pos, 2].copy(),
        l_g=l_col[:pos].copy(),
        p_in=_p_in(grid, sp),
        u_g=grid.u_g,
    )
    if not finite:
        traj.verdict = Diverged(k * dt, "non-finite state")
    else:
        traj.verdict = detect_instability(traj, traj.p_in, traj.u_g)
    return traj


# -- waveform analysis --------------------------------------------------------

def _local_maxima(x: np.ndarray) -> np.ndarray:
    if len(x) < 3:
        return np.empty(0, dtype=int)
    mid = x[1:-1]
    return np.nonzero((mid > x[:-2]) & (mid >= x[2:]))[0] + 1


def detect_instability(traj: Trajectory, p_in: float, u_g: float,
                       residual_tol: float | None = None) -> StabilityVerdict:
    """Classify a trajectory as Settled, Diverged or Marginal.

    Diverged: ``|delta| > pi`` anywhere, or three consecutive same-sign peaks
    of ``delta - delta_ref`` growing by more than 1 % overall.
    Settled: the last 10 % of the record stays within 1e-3 rad of the final
    angle and ``|u_g sin(delta_final) - p_in|`` is below ``residual_tol``
    (default ``5e-3 * u_g``).
    """
    t, delta = traj.t, traj.delta
    if len(t) == 0:
        raise ValueError("empty trajectory")
    bad = np.nonzero(~np.isfinite(delta) | (np.abs(delta) > math.pi))[0]
    if len(bad):
        return Diverged(float(t[bad[0]]), "loss of synchronism (|delta| > pi)")

    delta_ref = math.asin(p_in / u_g) if abs(p_in) <= u_g else float(delta[-1])
    dev = delta - delta_ref
    # upper and lower envelopes separately: nonlinear swings are lopsided
    hits = []
    for lobe in (dev, -dev):
        peaks = _local_maxima(lobe)
        peaks = peaks[lobe[peaks] > NOISE_FLOOR]
        pv = lobe[peaks]
        if len(pv) < 3:
            continue
        grow = ((pv[1:-1] > pv[:-2]) & (pv[2:] > pv[1:-1])
                & (pv[2:] > (1 + GROWTH_THRESHOLD) * pv[:-2]))
        idx = np.nonzero(grow)[0]
        if len(idx):
            hits.append(float(t[peaks[idx[0] + 2]]))
    if hits:
        return Diverged(min(hits), "growing oscillation")

    final = float(delta[-1])
    tail = t >= 0.9 * t[-1]
    off = np.abs(delta - final) > SETTLE_BAND
    tol = RESIDUAL_TOL * u_g if residual_tol is None else residual_tol
    if not off[tail].any() and abs(u_g * math.sin(final) - p_in) < tol:
        idx = np.nonzero(off)[0]
        settle = float(t[idx[-1] + 1]) if len(idx) else 0.0
        return Settled(settle, final)
    return Marginal()


def _refine(x: np.ndarray, i: int) -> tuple[float, float]:
    """Parabolic vertex through samples ``i-1, i, i+1``: (index offset, value)."""
    a, b, c = x[i - 1], x[i], x[i + 1]
    den = a - 2.0 * b + c
    if den == 0.0:
        return 0.0, b
    p = 0.5 * (a - c) / den
    return p, b - 0.25 * (a - c) * p


def measure_damping(traj: Trajectory, floor: float = NOISE_FLOOR) -> DampingEstimate:
    """Ring frequency and damping ratio from the extrema of ``delta - delta_final``."""
    t = traj.t
    e = traj.delta - traj.delta[-1]
    if len(t) < 3:
        raise InsufficientOscillation("trajectory too short")
    h = t[1] - t[0]
    mid = e[1:-1]
    idx = np.nonzero(((mid > e[:-2]) & (mid >= e[2:])) | ((mid < e[:-2]) & (mid <= e[2:])))[0] + 1
    times, vals = [], []
    for i in idx:
        off, v = _refine(e, i)
        if abs(v) > floor:
            times.append(t[i] + off * h)
            vals.append(v)
    if len(vals) < 3:
        raise InsufficientOscillation(f"only {len(vals)} extrema above {floor:g} rad")
    times = np.asarray(times)
    vals = np.asarray(vals)
    omega_d = math.pi / float(np.mean(np.diff(times)))
    same = np.sign(vals[2:]) == np.sign(vals[:-2])
    if not same.any():
        raise InsufficientOscillation("no same-sign peak pairs")
    logdec = float(np.mean(np.log(np.abs(vals[:-2][same]) / np.abs(vals[2:][same]))))
    zeta = logdec / math.sqrt(4.0 * math.pi ** 2 + logdec ** 2)
    return DampingEstimate(omega_d, zeta, len(vals))


# -- canned studies -----------------------------------------------------------

def _run_all(scenarios: Sequence[Scenario], max_workers: int | None, backend=None):
    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            return list(pool.map(lambda s: integrate(s, backend), scenarios))
    return [integrate(s, backend) for s in scenarios]


def _suite_scenario(base: Scenario, model: ModelKind, gains, l_g: float, offset: float,
                    disturbance: str, step_time: float) -> Scenario:
    target = base.grid.with_(l_g=l_g)
    if disturbance == "offset":
        op = solve_equilibrium(target, base.setpoint)
        initial = native_state(model, target, base.setpoint, gains, op.delta_0 + offset,
                               target.omega_g)
        return replace(base, model=model, grid=target, gains=gains, initial=initial, events=())
    if disturbance == "step":
        op = solve_equilibrium(base.grid, base.setpoint)
        initial = native_state(model, base.grid, base.setpoint, gains, op.delta_0,
                               base.grid.omega_g)
        return replace(base, model=model, gains=gains, initial=initial,
                       events=(Event(step_time, "l_g", l_g),))
    raise ValueError(f"unknown disturbance {disturbance!r}")


def run_figure6_suite(base: Scenario | None = None, l_g_values: Sequence[float] = WEAK_GRID_L_G,
                      pll_gains: PiPllGains = BASELINE_PLL, ipll_gains: IpllGains = BASELINE_IPLL,
                      offset: float = 0.1, disturbance: str = "offset", step_time: float = 0.1,
                      max_workers: int | None = None, backend: str | None = None
                      ) -> list[SuiteRun]:
    """PI-PLL and IPLL runs across grid strengths.

    ``base`` supplies grid, setpoint, duration, dt and decimation; reduced
    models are used unless ``base.model`` is a signal-level kind.  With
    ``disturbance="offset"`` each run starts ``offset`` rad from the target
    equilibrium; with ``"step"`` it starts at the base equilibrium and
    ``l_g`` steps to the target at ``step_time``.
    """
    if base is None:
        base = baseline_scenario(duration=3.0)
    if base.model.is_signal:
        kinds = (ModelKind.PLL_SIGNAL, ModelKind.IPLL_SIGNAL)
    else:
        kinds = (ModelKind.PLL_REDUCED, ModelKind.IPLL_REDUCED)
    plan = []
    for l_g in l_g_values:
        for kind, gains in zip(kinds, (pll_gains, ipll_gains)):
            plan.append((l_g, kind, _suite_scenario(base, kind, gains, l_g, offset,
                                                    disturbance, step_time)))
    trajs = _run_all([p[2] for p in plan], max_workers, backend)
    return [SuiteRun(l_g, kind, tr) for (l_g, kind, _), tr in zip(plan, trajs)]


def run_figure5(base: Scenario | None = None, ipll_gains: IpllGains = BASELINE_IPLL,
                offset: float = 0.1, backend: str | None = None) -> list[SuiteRun]:
    """PI-PLL with gains mapped from ``ipll_gains`` vs the IPLL at the base grid."""
    if base is None:
        base = baseline_scenario(duration=1.0)
    pll = map_ipll_to_pll(ipll_gains, base.grid, base.setpoint)
    kinds = ((ModelKind.PLL_SIGNAL, ModelKind.IPLL_SIGNAL) if base.model.is_signal
             else (ModelKind.PLL_REDUCED, ModelKind.IPLL_REDUCED))
    runs = []
    for kind, gains in zip(kinds, (pll, ipll_gains)):
        sc = _suite_scenario(base, kind, gains, base.grid.l_g, offset, "offset", 0.0)
        runs.append(SuiteRun(base.grid.l_g, kind, integrate(sc, backend)))
    return runs


def verdict_table(runs: Sequence[SuiteRun]) -> dict[tuple[float, str], str]:
    return {(r.l_g, r.model.value): r.trajectory.verdict.name for r in runs}


__all__ = [
    "Event", "Scenario", "Trajectory", "Settled", "Diverged", "Marginal", "DampingEstimate",
    "SuiteRun", "InsufficientOscillation", "NoEquilibrium", "integrate", "detect_instability",
    "measure_damping", "run_figure6_suite", "run_figure5", "baseline_scenario",
    "validate_scenario", "verdict_table",
]
