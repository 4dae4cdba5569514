"""Federated learning with activation-space auditing of client updates."""

from ._fedaudit import (
    ArchSpec,
    ConfigError,
    OcsvmModel,
    additive_gaussian,
    calibrate,
    coordinate_median,
    deserialize_params,
    evaluate,
    fedavg,
    init_params,
    krum,
    ocsvm_fit,
    parse_config,
    predict_proba,
    run_experiment,
    same_value,
    serialize_params,
    sign_flip,
    synth_dataset,
    train,
    trimmed_mean,
)

__all__ = [
    "ArchSpec",
    "ConfigError",
    "OcsvmModel",
    "additive_gaussian",
    "calibrate",
    "coordinate_median",
    "deserialize_params",
    "evaluate",
    "fedavg",
    "init_params",
    "krum",
    "ocsvm_fit",
    "parse_config",
    "predict_proba",
    "run_experiment",
    "same_value",
    "serialize_params",
    "sign_flip",
    "synth_dataset",
    "train",
    "trimmed_mean",
]
