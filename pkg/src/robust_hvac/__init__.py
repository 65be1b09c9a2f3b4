"""Robust MPC toolkit and closed-loop simulator for building HVAC under bounded load uncertainty."""

from .config import BuildingConfig, default_building_path, load_building, parse_building
from .controller import (
    ActuatorLimits,
    ComfortEnvelope,
    ComfortSchedule,
    HorizonWindow,
    PowerModel,
    PriceWindow,
    RmpcConfig,
    RmpcController,
    StepSchedule,
    assemble_nominal_lp,
    assemble_rmpc_lp,
    consumption_cost,
    electric_power,
    reserve_revenue,
)
from .errors import (
    ConfigError,
    DataError,
    IoError,
    NumericError,
    RobustHvacError,
    SolverError,
    ValidationError,
)
from .lp import KktReport, LpProblem, LpSolution, check_kkt, dump_lp, load_lp, solve_lp
from .market import (
    CurtailmentSignal,
    DisturbanceForecast,
    PriceSeries,
    PriceShape,
    WeatherShape,
    bernoulli_curtailment,
    derive_uncertainty_bounds,
    load_curtailment_csv,
    load_forecast_csv,
    load_price_csv,
    synthesize_forecast,
    synthesize_prices,
    write_forecast_csv,
    write_price_csv,
)
from .prediction import PredictionMatrices, build_prediction_matrices, predict_states
from .reports import emit_reports, load_trace, write_schedule_csv
from .robust import (
    RobustifiedConstraints,
    dual_certificate,
    robustify_dynamics,
    vertex_oracle_max,
    worst_case_disturbance_offset,
)
from .sim import (
    AccountingReport,
    PppSweepResult,
    ScenarioSpec,
    SimulationTrace,
    accounting,
    detect_knee,
    replay_states,
    run_closed_loop,
    run_ppp_sweep,
    scenario,
)
from .thermal import (
    ContinuousStateSpace,
    DiscreteStateSpace,
    OperatingPoint,
    RcEdge,
    RcNetwork,
    RcNode,
    ThermalModel,
    assemble_continuous,
    check_continuous,
    discretize_zoh,
    plant_step,
    time_constants,
)

__version__ = "0.1.0"
