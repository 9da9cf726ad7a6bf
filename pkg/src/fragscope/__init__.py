"""fragscope: dataset-fragmentation and shortcut-learning diagnostics.

Four analysis surfaces over one theme, how a corpus assembled from multiple
sub-datasets invites models to learn spurious shortcuts:

* factors: exact information theory on discrete factor mixtures, including
  the closed-form NMI equality for disjoint supports and the NMI upper bound
  for overlapping ones, plus a randomized verification harness.
* metrics: diversity / disparity / fragmentation-ratio scores on embedding
  matrices with exact and subsampled pair estimators.
* simulate: a deterministic closed-form ridge learner that reproduces
  shortcut emergence, OOD pairing-swap evaluation, and knob sweeps.
* bridge: factor-level bridge and symmetrization interventions with a
  minimal-mass planner.
"""

from .bridge import BridgePlan, BridgeSpec, apply_bridge, plan_bridge, symmetrize_factor
from .errors import (
    ConfigurationError,
    DegenerateMixtureWarning,
    FormatError,
    FragscopeError,
    InsufficientDataError,
    SingletonGroupWarning,
    UnsupportedArityError,
    ValidationError,
)
from .factors import (
    DiscreteDistribution,
    JointDistribution,
    MixtureModel,
    SubDatasetFactors,
    VerificationReport,
    c_diversity,
    c_interleave,
    entropy,
    joint_mixture,
    load_mixture_json,
    mixture_from_dict,
    mixture_marginal,
    mixture_to_dict,
    mutual_information,
    normalized_mi,
    prop1_predicted_nmi,
    prop2_nmi_upper_bound,
    save_mixture_json,
    supports_disjoint,
    verify_propositions,
)
from .metrics import (
    DEFAULT_TEMPERATURES,
    EmbeddingSet,
    EstimatorConfig,
    MetricReport,
    Partition,
    diversity,
    disparity,
    fragmentation_ratio,
    normalize_rows,
    temperature_sweep,
)
from .simulate import (
    BlockGradients,
    EvalResult,
    LinearPolicy,
    SimConfig,
    SimDataset,
    SweepTable,
    evaluate_in_distribution,
    evaluate_ood,
    fit_ridge,
    generate_dataset,
    initial_gradients,
    sweep,
)

__version__ = "0.1.0"

__all__ = [
    "BlockGradients",
    "BridgePlan",
    "BridgeSpec",
    "ConfigurationError",
    "DEFAULT_TEMPERATURES",
    "DegenerateMixtureWarning",
    "DiscreteDistribution",
    "EmbeddingSet",
    "EstimatorConfig",
    "EvalResult",
    "FormatError",
    "FragscopeError",
    "InsufficientDataError",
    "JointDistribution",
    "LinearPolicy",
    "MetricReport",
    "MixtureModel",
    "Partition",
    "SimConfig",
    "SimDataset",
    "SingletonGroupWarning",
    "SubDatasetFactors",
    "SweepTable",
    "UnsupportedArityError",
    "ValidationError",
    "VerificationReport",
    "apply_bridge",
    "c_diversity",
    "c_interleave",
    "disparity",
    "diversity",
    "entropy",
    "evaluate_in_distribution",
    "evaluate_ood",
    "fit_ridge",
    "fragmentation_ratio",
    "generate_dataset",
    "initial_gradients",
    "joint_mixture",
    "load_mixture_json",
    "mixture_from_dict",
    "mixture_marginal",
    "mixture_to_dict",
    "mutual_information",
    "normalize_rows",
    "normalized_mi",
    "plan_bridge",
    "prop1_predicted_nmi",
    "prop2_nmi_upper_bound",
    "save_mixture_json",
    "supports_disjoint",
    "sweep",
    "symmetrize_factor",
    "temperature_sweep",
    "verify_propositions",
]
