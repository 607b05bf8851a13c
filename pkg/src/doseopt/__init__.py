"""Design engine for randomized two-dose optimization studies.

Builds clinically grounded utility scores from efficacy/safety margins,
sizes the selection study (closed-form and exact), predicts the
selection-induced bias and Type I error inflation that dose selection
passes on to pooled confirmatory analyses (binary and time-to-event), and
validates every analytic formula with a built-in trial simulator.
"""

from .errors import ResourceLimitError
from .outcomes import (CountTable, JointOutcomeModel, UtilityMoments,
                       UtilitySpec, estimate_model, joint_probs,
                       marginal_rate_of_substitution, mean_utility_decomposed,
                       phi_bounds, response_only_utilities,
                       utility_from_margins, utility_moments)
from .lattice import (Lattice, LatticePmf, rationalize_utilities,
                      select_high_prob, selection_split, utility_sum_pmf)
from .sizing import (DesignResult, DesignScenario, GridSpec, ScenarioMoments,
                     exact_pcs, n_for_threshold, optimal_design_approx,
                     optimal_design_exact, rose_design, scenario_moments)
from .bias import (BiasReport, TwoStagePlan, binary_bias_report,
                   binomial_critical, binomial_type1, combined_bias, max_bias,
                   selection_bias, truncated_selection_expectation,
                   z_test_type1)
from .ttebias import (TteBiasReport, TtePlan, cox_type1, cox_type1_from_beta,
                      exp_test_type1, expected_events, landmark_bias,
                      landmark_bias_max, landmark_hazard_bridge,
                      landmark_type1, tte_bias_report)
from .sim import (PatientRecord, ScenarioSummary, SimConfig, TteSettings,
                  cox_score_z, empirical_pcs, gen_arm, logrank_z,
                  run_selection, run_study, run_tests)

__version__ = "0.1.0"
