"""Study configuration files.

A config is a flat JSON object.  Physical quantities carry their SI unit in
the key name (``l_g_henry``, never millihenry).  Every key is optional; the
defaults reproduce the baseline study (311 V peak, 80 A, 4.1 mH, J=20,
D=2, PI gains 0.1305/19.144, 50 Hz).

Keys
----
u_g_volt, omega_g_rad_s, omega_0_rad_s, l_g_henry, r_g_ohm,
i_dref_amp, i_qref_amp, rated_current_amp,
k_ppll, k_ipll, j_ipll, d_ipll, map_pll_from_ipll, k_fluct,
model, duration_s, dt_s, decimation, initial_offset_rad,
events (list of {"time_s", "target", "value"}),
sweep_l_g_min_henry, sweep_l_g_max_henry, sweep_points,
envelope_l_g_henry (list), output_csv, output_svg
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass

from .analysis import map_ipll_to_pll
from .core import (
    OMEGA_NOMINAL,
    BASELINE_IPLL,
    BASELINE_PLL,
    GridParams,
    InverterSetpoint,
    IpllGains,
    IpllLabError,
    PiPllGains,
    ValidationError,
    Violation,
    validate,
)
from .dynamics import ModelKind
from .simulator import EVENT_TARGETS, Event, Scenario, baseline_scenario, validate_scenario


class ParseError(IpllLabError, ValueError):
    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        self.key = key
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


_NUMBER_KEYS = {
    "u_g_volt": 311.0,
    "omega_g_rad_s": None,  # defaults to omega_0
    "omega_0_rad_s": OMEGA_NOMINAL,
    "l_g_henry": 4.1e-3,
    "r_g_ohm": 0.0,
    "i_dref_amp": 80.0,
    "i_qref_amp": 0.0,
    "rated_current_amp": None,  # defaults to |i_dref|
    "k_ppll": BASELINE_PLL.k_ppll,
    "k_ipll": BASELINE_PLL.k_ipll,
    "j_ipll": BASELINE_IPLL.j,
    "d_ipll": BASELINE_IPLL.d,
    "k_fluct": 2.0,
    "duration_s": 1.0,
    "dt_s": 50e-6,
    "initial_offset_rad": 0.1,
    "sweep_l_g_min_henry": 1e-3,
    "sweep_l_g_max_henry": 12e-3,
}
_INT_KEYS = {"decimation": 10, "sweep_points": 111}
_BOOL_KEYS = {"map_pll_from_ipll": False}
_STR_KEYS = {"model": "ipll_reduced", "output_csv": None, "output_svg": None}
_LIST_KEYS = {"events": (), "envelope_l_g_henry": ()}
KNOWN_KEYS = set(_NUMBER_KEYS) | set(_INT_KEYS) | set(_BOOL_KEYS) | set(_STR_KEYS) | set(_LIST_KEYS)


@dataclass(frozen=True)
class StudyConfig:
    grid: GridParams
    setpoint: InverterSetpoint
    pll: PiPllGains
    ipll: IpllGains
    rated_current: float
    k_fluct: float = 2.0
    model: ModelKind = ModelKind.IPLL_REDUCED
    duration: float = 1.0
    dt: float = 50e-6
    decimation: int = 10
    initial_offset: float = 0.1
    events: tuple[Event, ...] = ()
    sweep_range: tuple[float, float] = (1e-3, 12e-3)
    sweep_points: int = 111
    envelope_l_g: tuple[float, ...] = ()
    map_pll_from_ipll: bool = False
    output_csv: str | None = None
    output_svg: str | None = None

    def gains_for(self, model: ModelKind):
        return self.pll if model.is_pll else self.ipll

    def scenario(self, model: ModelKind | None = None) -> Scenario:
        model = model or self.model
        sc = baseline_scenario(model, offset=self.initial_offset, duration=self.duration,
                            dt=self.dt, gains=self.gains_for(model), grid=self.grid,
                            setpoint=self.setpoint)
        return sc.with_(events=self.events, decimation=self.decimation)

    def to_dict(self) -> dict:
        """Fully resolved flat mapping (defaults included) for echoing into outputs."""
        g, s = self.grid, self.setpoint
        return {
            "u_g_volt": g.u_g,
            "omega_g_rad_s": g.omega_g,
            "omega_0_rad_s": g.omega_0,
            "l_g_henry": g.l_g,
            "r_g_ohm": g.r_g,
            "i_dref_amp": s.i_dref,
            "i_qref_amp": s.i_qref,
            "rated_current_amp": self.rated_current,
            "k_ppll": self.pll.k_ppll,
            "k_ipll": self.pll.k_ipll,
            "j_ipll": self.ipll.j,
            "d_ipll": self.ipll.d,
            "map_pll_from_ipll": self.map_pll_from_ipll,
            "k_fluct": self.k_fluct,
            "model": self.model.value,
            "duration_s": self.duration,
            "dt_s": self.dt,
            "decimation": self.decimation,
            "initial_offset_rad": self.initial_offset,
            "events": [{"time_s": e.time, "target": e.target, "value": e.value}
                       for e in self.events],
            "sweep_l_g_min_henry": self.sweep_range[0],
            "sweep_l_g_max_henry": self.sweep_range[1],
            "sweep_points": self.sweep_points,
            "envelope_l_g_henry": list(self.envelope_l_g),
            "output_csv": self.output_csv,
            "output_svg": self.output_svg,
        }


def _line_of(text: str | None, key: str) -> int | None:
    if not text:
        return None
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def parse_config(text: str) -> StudyConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from None
    if not isinstance(data, dict):
        raise ParseError("top level must be a JSON object", line=1)
    return config_from_mapping(data, text)


def config_from_mapping(data: dict, text: str | None = None) -> StudyConfig:
    """Build and validate a :class:`StudyConfig` from a flat mapping."""
    for key in data:
        if key not in KNOWN_KEYS:
            raise ParseError("unknown key", key=key, line=_line_of(text, key))

    def get(key, default, ok, what):
        if key not in data or data[key] is None:
            return default
        v = data[key]
        if not ok(v):
            raise ParseError(f"expected {what}, got {v!r}", key=key, line=_line_of(text, key))
        return v

    num = {k: get(k, d, _is_number, "a number") for k, d in _NUMBER_KEYS.items()}
    ints = {k: get(k, d, lambda v: isinstance(v, int) and not isinstance(v, bool), "an integer")
            for k, d in _INT_KEYS.items()}
    bools = {k: get(k, d, lambda v: isinstance(v, bool), "true or false")
             for k, d in _BOOL_KEYS.items()}
    strs = {k: get(k, d, lambda v: isinstance(v, str), "a string") for k, d in _STR_KEYS.items()}
    envelope = get("envelope_l_g_henry", (), lambda v: isinstance(v, list)
                   and all(_is_number(x) for x in v), "a list of numbers")
    raw_events = get("events", (), lambda v: isinstance(v, list), "a list of events")

    try:
        model = ModelKind(strs["model"])
    except ValueError:
        raise ParseError(f"expected one of {[m.value for m in ModelKind]}", key="model",
                         line=_line_of(text, "model")) from None

    events = []
    for i, ev in enumerate(raw_events):
        key = f"events[{i}]"
        if (not isinstance(ev, dict) or set(ev) != {"time_s", "target", "value"}
                or not _is_number(ev["time_s"]) or not _is_number(ev["value"])
                or ev["target"] not in EVENT_TARGETS):
            raise ParseError(f"event must be {{time_s, target in {EVENT_TARGETS}, value}}",
                             key=key, line=_line_of(text, "events"))
        events.append(Event(float(ev["time_s"]), ev["target"], float(ev["value"])))

    omega_0 = float(num["omega_0_rad_s"])
    omega_g = omega_0 if num["omega_g_rad_s"] is None else float(num["omega_g_rad_s"])
    grid = GridParams(u_g=float(num["u_g_volt"]), omega_g=omega_g, omega_0=omega_0,
                      l_g=float(num["l_g_henry"]), r_g=float(num["r_g_ohm"]))
    setpoint = InverterSetpoint(i_dref=float(num["i_dref_amp"]), i_qref=float(num["i_qref_amp"]))
    ipll = IpllGains(j=float(num["j_ipll"]), d=float(num["d_ipll"]))
    pll = PiPllGains(k_ppll=float(num["k_ppll"]), k_ipll=float(num["k_ipll"]))
    rated = (abs(setpoint.i_dref) if num["rated_current_amp"] is None
             else float(num["rated_current_amp"]))

    violations = validate(grid, setpoint, ipll)
    if not violations and bools["map_pll_from_ipll"]:
        if "k_ppll" in data or "k_ipll" in data:
            violations.append(Violation("map_pll_from_ipll",
                                        "cannot be combined with explicit k_ppll/k_ipll"))
        else:
            pll = map_ipll_to_pll(ipll, grid, setpoint)
    violations += [v for v in validate(grid, setpoint, pll) if v.field in ("k_ppll", "k_ipll")]
    if not math.isfinite(rated) or rated <= 0:
        violations.append(Violation("rated_current_amp", "must be > 0"))
    if not num["k_fluct"] > 0:
        violations.append(Violation("k_fluct", "must be > 0"))
    lo, hi = num["sweep_l_g_min_henry"], num["sweep_l_g_max_henry"]
    if not (0 <= lo < hi):
        violations.append(Violation("sweep_l_g_*_henry", "need 0 <= min < max"))
    if ints["sweep_points"] < 2:
        violations.append(Violation("sweep_points", "must be >= 2"))
    if any(x < 0 for x in envelope):
        violations.append(Violation("envelope_l_g_henry", "values must be >= 0"))

    cfg = StudyConfig(
        grid=grid, setpoint=setpoint, pll=pll, ipll=ipll, rated_current=rated,
        k_fluct=float(num["k_fluct"]), model=model, duration=float(num["duration_s"]),
        dt=float(num["dt_s"]), decimation=ints["decimation"],
        initial_offset=float(num["initial_offset_rad"]), events=tuple(events),
        sweep_range=(float(lo), float(hi)), sweep_points=ints["sweep_points"],
        envelope_l_g=tuple(float(x) for x in envelope),
        map_pll_from_ipll=bools["map_pll_from_ipll"],
        output_csv=strs["output_csv"], output_svg=strs["output_svg"],
    )
    if not violations:
        sc = Scenario(model, grid, setpoint, cfg.gains_for(model), (0.0, omega_g),
                      cfg.duration, cfg.dt, cfg.events, cfg.decimation)
        violations += [v for v in validate_scenario(sc)
                       if v.field in ("duration", "dt", "decimation") or v.field.startswith("events")]
    if violations:
        raise ValidationError(violations)
    return cfg


def dump_config(cfg: StudyConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True)
