"""magfold: desk-scale simulation lab for a magnetically steered folding robot."""

from .backend import NUMBA_ENABLED
from .chain import (
    ChainModel,
    Config,
    Environment,
    Plates,
    SimParams,
    accordion_config,
    end_dipoles,
    end_gap,
    flat_config,
    forward_kinematics,
    generalized_forces,
    locked_config,
    settle,
    step,
    total_energy,
)
from .control import (
    ControlPrimitive,
    ControlScript,
    TransitionReport,
    TrajectorySample,
    bench_environment,
    beta_start,
    epm_pose_at,
    epm_rig,
    execute,
    fig3_script,
    working_frame,
)
from .errors import ConvergenceError, DivergenceError, SingularityError, ValidationError
from .geometry import Pose
from .magnetics import (
    Dipole,
    MagnetSpec,
    Wrench,
    dipole_field,
    discretize_magnet,
    moment_from_spec,
    pair_energy,
    pair_wrench,
)
from .scenarios import (
    CalibrationResult,
    SqueezeReport,
    UnfoldResult,
    calibrate_stiffness,
    calibrated_model,
    self_assembly_gap,
    squeeze_test,
    unfold_scenario,
)
from .states import (
    Alignment,
    Landscape,
    LandscapeSlice,
    StateLabel,
    Thresholds,
    classify,
    energy_landscape,
    export_landscape_csv,
    find_local_minima,
    landscape_minima,
    moment_alignment,
    pair_alignment,
)
from .wpt import (
    CouplingModel,
    LedLoad,
    ReceiverDesign,
    ResonantLink,
    SpiralCoil,
    design_receiver,
    faraday_peak_voltage,
    fit_coupling,
    inverse_design_coil,
    led_budget,
    required_capacitance,
    resonant_frequency,
    wheeler_inductance,
)

__version__ = "0.1.0"
