"""End-to-end detection runs on generated data."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import EncodedDataset, Sample, synthetic_pipeline
from .fixedpoint import Scale
from .inference import micro_train_step, quantize
from .models import Linear, QuantizedModel, zero_model
from .poim import Metrics, evaluate


def train_perceptron(model: QuantizedModel, samples: Sequence[Sample], eta: int,
                     epochs: int, rng_seed: int) -> QuantizedModel:
    """Shuffled micro-step epochs; stops early after a mistake-free epoch."""
    rng = np.random.default_rng(rng_seed)
    samples = list(samples)
    for _ in range(epochs):
        before = model
        for i in rng.permutation(len(samples)):
            model = micro_train_step(model, samples[i], eta)
        if model is before or model.params_equal(before):
            break
    return model


@dataclass(frozen=True)
class DetectionResult:
    train: Metrics
    test: Metrics
    model: QuantizedModel
    data: EncodedDataset


def synthetic_detection(separation: float, rng_seed: int, n_normal: int = 200, n_attack: int = 200,
                        scale_exponent: int = 6, epochs: int = 50,
                        test_fraction: float = 0.3) -> DetectionResult:
    """Generate, split by time, encode, train a linear classifier and score it."""
    scale = Scale(scale_exponent)
    ds = synthetic_pipeline(n_normal, n_attack, separation, rng_seed, scale, test_fraction)
    model = quantize(zero_model(Linear(len(ds.train[0][0]))), scale)
    model = train_perceptron(model, ds.train, scale.value, epochs, rng_seed)
    return DetectionResult(evaluate(model, ds.train), evaluate(model, ds.test), model, ds)
