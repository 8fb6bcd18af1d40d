"""Noise-aware digital modulation design for over-the-air function computation."""
from .channel import (
    FadingKind,
    FadingModel,
    NoiseKind,
    NoiseModel,
    fading_gram,
    fading_grams,
    sample_noise,
    transmit,
    transmit_many,
)
from .designer import (
    DesignProblem,
    DesignResult,
    SolverConfig,
    canonicalize,
    design,
    evaluate_design,
    lse_objective,
    maxmin_subexponential,
    pair_separations,
    pam_oracle,
    smoothed_mse_design,
    verify_feasibility,
    worst_case_objective,
)
from .errors import (
    CombinatorialBlowup,
    DimensionMismatch,
    Infeasible,
    InvalidParam,
    NonSymmetricFunction,
    OacError,
    OverlapViolation,
    SolverDiverged,
    WrongFunction,
    ZeroChannel,
)
from .function_model import (
    AggregationFunction,
    ConstraintSet,
    FunctionKind,
    InputProfile,
    QuantizedAlphabet,
    build_constraints,
    enumerate_profiles,
    num_profiles,
    superimpose,
    superimposed_points,
)
from .metrics import DistanceMetric, MetricKind, TailBound, TailKind, q_function, tail_bound
from .receiver import Codebook, build_codebook, decode, decode_many, quantize_output
from .simulator import (
    InputLaw,
    SimulationConfig,
    SimulationResult,
    SweepAxis,
    SweepResult,
    compare_designs,
    run_mse,
    sweep,
)

__version__ = "0.1.0"
