"""Sample size and analysis for active-arm HIV prevention trials whose
placebo incidence is estimated cross-sectionally with a recency assay."""

from .asymptotics import (gamma_components, p_recent, v0_analytic, v1_analytic, v_r1,
                          w_covariance, z_gradient_weights)
from .config import DesignConfig, load_config, parse_config
from .design import DesignReport, design_report, detectability_floor, power_at_n, sample_size
from .domain import (AssayProperties, DesignContext, HypothesisSpec, PopulationStratum,
                     ScreeningCounts, TrialCounts, standard_normal_quantile)
from .errors import (ConfigError, EstimationError, InfeasibleDesignError, RecencyTrialError,
                     SimulationError, ValidationError)
from .estimators import (efficacy_test, lambda0_kassanjee, lambda0_perfect, lambda0_snapshot,
                         lambda1_active_arm)
from .population import pool_strata
from .simulation import SimulationConfig, moment_oracle, run_study, simulate_replicate

__version__ = "0.1.0"
