"""From-scratch tree learners, ensembles, personalization, and evaluation."""

from .ensembles import (  # noqa: F401
    ADABOOST_R2,
    BAGGING,
    LINEAR,
    MEAN_BASELINE,
    MOST_FREQUENT,
    RANDOM_FOREST,
    SINGLE_TREE,
    EnsembleModel,
    EnsembleParams,
    PairedAxisModel,
    fit_adaboost_r2,
    fit_bagging,
    fit_linear,
    fit_mean_baseline,
    fit_most_frequent,
    fit_random_forest,
    fit_single_tree,
    weighted_median,
)
from .evaluation import (  # noqa: F401
    EvalReport,
    EvaluationError,
    SplitError,
    ValidationError,
    cross_validate,
    evaluate,
    kfold_indices,
    select_model,
    split_train_test,
)
from .model_io import ModelArtifact, load_model, save_model  # noqa: F401
from .personalized import PersonalizedModel, fit_personalized, user_baselines  # noqa: F401
from .pipeline import (  # noqa: F401
    Candidate,
    GridConfig,
    LearningDataset,
    TrainOutcome,
    dataset_from_rows,
    train_families,
)
from .trees import (  # noqa: F401
    CLASSIFICATION,
    REGRESSION,
    TrainingError,
    Tree,
    TreeNode,
    TreeParams,
    fit_tree,
)
