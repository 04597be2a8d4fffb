"""Road-accident severity classification with tree ensembles."""

from ._accsev import (
    AccsevError,
    Dataset,
    FeatureMatrix,
    MismatchError,
    Model,
    confusion,
    encode,
    evaluate,
    f_score,
    fit_model,
    generate_synth,
    inject_missing,
    load_csv,
    permutation_importance,
    preprocess,
    round_half_up,
    run_experiment,
    train_test_split,
)

MODEL_KINDS = ("voting", "rf", "adaboost", "extratrees", "gbm")

__all__ = [
    "AccsevError",
    "Dataset",
    "FeatureMatrix",
    "MismatchError",
    "Model",
    "MODEL_KINDS",
    "confusion",
    "encode",
    "evaluate",
    "f_score",
    "fit_model",
    "generate_synth",
    "inject_missing",
    "load_csv",
    "permutation_importance",
    "preprocess",
    "round_half_up",
    "run_experiment",
    "train_test_split",
]
