"""Low-thrust transfer dataset generation with an adversarially trained sampler.

The package covers the full workflow: synthesize an asteroid catalog,
label transfer candidates with an analytic feasibility oracle, train a
feasibility classifier and an adversarial feature generator on the
labeled rows, then quantify how much more often the generated transfers
pass the oracle than the conventional pipeline's attempts do.
"""

from .astro import (AU_KM, AU_PER_DAY_IN_KM_S, DAY_S, MU_SUN, SUN,
                    ClassicalElements, ElementError, Mee, NearCollinearError,
                    NoConvergenceError, StateVector, angular_momentum,
                    classical_to_mee, lambert, lambert_many, mee_to_classical,
                    orbital_energy, propagate, propagate_many, solve_kepler,
                    state_to_classical, true_longitude)
from .classifier import (ClassifierConfig, ClassifierError, ClassifierMetrics,
                         FeasibilityClassifier, SingleClassError,
                         load_classifier, save_classifier, train_classifier)
from .evaluation import (ConvergenceReport, DistributionReport, FeatureStats,
                         RunComparison, compare_runs, coverage_ratio,
                         distribution_report, evaluate_generated,
                         feature_stats, ks_statistic)
from .gan import (CollapsedError, CollapseReport, CollapseThresholds,
                  DivergedError, GanConfig, GanError, ScoreBands, TrainResult,
                  TrainingMetrics, compute_scores, default_config,
                  destabilized_config, detect_collapse, load_history,
                  make_gan, recent_score_means, sample_transfers,
                  save_history, train, validation_cadence)
from .nn import (AdamState, DenseNet, Gradients, NetworkConfig, adam_step,
                 backward, bce_loss, forward, init_network, net_from_doc,
                 net_to_doc)
from .pipeline import (Asteroid, Catalog, CatalogRanges, Dataset, DatasetRow,
                       FEATURE_NAMES, FeasibilityReport, FeatureVector,
                       PairFilter, PipelineConfig, PipelineError, ScalingSpec,
                       SpacecraftModel, TransferCandidate, apply_scaler,
                       extract_features, feasibility_oracle, fit_scaler,
                       generate_dataset, impulsive_grid_search, init_transfer,
                       invert_scaler, load_catalog, load_dataset, sample_pair,
                       save_catalog, save_dataset, synth_catalog)
from .search import (GridSpec, SearchResult, TrialParams, TrialResult,
                     load_search_csv, run_grid, save_search_csv, trial_config,
                     trial_seed)

__version__ = "0.1.0"
