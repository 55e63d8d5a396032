"""COGO adversarial transferability lab: Python bindings to the C++ core."""

from ._cogo import (
    CogoError,
    Model,
    attack,
    attack_success_rate,
    ce_transform,
    dct2,
    generate_procedural,
    gradient_dispersion,
    histogram_entropy,
    idct2,
    load_model,
    mutual_info,
    pearson,
    suppression_weights,
    train,
)

__all__ = [
    "CogoError",
    "Model",
    "attack",
    "attack_success_rate",
    "ce_transform",
    "dct2",
    "generate_procedural",
    "gradient_dispersion",
    "histogram_entropy",
    "idct2",
    "load_model",
    "mutual_info",
    "pearson",
    "suppression_weights",
    "train",
]
