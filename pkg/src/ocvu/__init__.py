"""OCV-SOC modeling, SOC/capacity estimation and OCV uncertainty propagation."""

from .characterization import (
    CellSimConfig,
    FitReport,
    OcvSocTable,
    coulomb_count,
    coulomb_count_series,
    fit,
    pseudo_ocv,
    simulate_gitt,
    simulate_low_rate_cycle,
)
from .estimation import (
    CapacityEstimate,
    OcvObservation,
    SocEstimate,
    estimate_capacity,
    invert,
    lookup_soc,
    nlc_curve,
    soc_variance,
)
from .estimator import OcvCurveRegressor, SocLookup
from .ocv_model import OcvModel, derivative, evaluate, is_monotone
from .uncertainty import ErrorBudget, ErrorSource, SourceKind, combined_bias, combined_sd, sample

__version__ = "0.1.0"
