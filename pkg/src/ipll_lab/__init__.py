"""Synchronization stability of PI-PLL and pure-integral (IPLL) grid-following inverters."""

from .analysis import (
    CriticalPoint,
    DampingBounds,
    EmptyEnvelope,
    NotBracketed,
    SecondOrder,
    SweepRow,
    critical_impedance,
    damping_bounds,
    damping_sweep,
    eigenvalues,
    existence_boundary,
    ipll_coefficients,
    map_ipll_to_pll,
    pll_coefficients,
    second_order_characteristics,
    solve_equilibrium,
)
from .core import (
    WEAK_GRID_L_G,
    OMEGA_NOMINAL,
    BASELINE_GRID,
    BASELINE_IPLL,
    BASELINE_PLL,
    BASELINE_SETPOINT,
    DegenerateAngle,
    Eigenpair,
    EquivalentCoefficients,
    GridParams,
    InfeasibleScr,
    InverterSetpoint,
    IpllGains,
    IpllLabError,
    NoEquilibrium,
    OperatingPoint,
    PiPllGains,
    SignalPllState,
    SingularInertia,
    SyncState,
    ValidationError,
    Violation,
    ZeroImpedance,
    grid_from_scr,
    scr_from_grid,
    validate,
)
from .dynamics import (
    ModelKind,
    StateDerivative,
    ipll_reduced_rhs,
    ipll_signal_rhs,
    pcc_uq,
    pll_reduced_rhs,
    pll_signal_rhs,
)
from .kernels import BACKEND
from .simulator import (
    Diverged,
    Event,
    InsufficientOscillation,
    Marginal,
    Scenario,
    Settled,
    Trajectory,
    detect_instability,
    integrate,
    measure_damping,
    baseline_scenario,
    run_figure5,
    run_figure6_suite,
)

__version__ = "0.1.0"
