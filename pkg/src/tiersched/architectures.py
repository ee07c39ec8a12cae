"""Built-in model descriptions and default synthetic worker rates.

Layer tables list trainable layers only; pooling is folded into the
geometry of the following layer (the chain model has no branches).
"""
from __future__ import annotations

from .errors import ConfigError
from .profiles import (CostProfile, LayerSpec, ModelSpec, WorkerSpec,
                       conv_layer, dense_layer, synthesize_profile)

# Cloud compute is one order of magnitude above the edge server, which in
# turn is twice the end device; update rates track compute rates.
DEFAULT_RATES = {
    "device": WorkerSpec("device", compute_rate=1e9, update_rate=1e9),
    "edge": WorkerSpec("edge", compute_rate=2e9, update_rate=2e9),
    "cloud": WorkerSpec("cloud", compute_rate=2e10, update_rate=2e10),
}

# 32x32 RGB sample, one byte per raw pixel
CIFAR_SAMPLE_BYTES = 3072
# 64x64 RGB sample
TINY_IMAGENET_SAMPLE_BYTES = 12288


def t3_model() -> ModelSpec:
    """Three-layer synthetic benchmark model used throughout the tests."""
    layers = (
        LayerSpec(1, "conv", 768, 1024, 2_000_000, 1000),
        LayerSpec(2, "conv", 1024, 512, 4_000_000, 2000),
        LayerSpec(3, "dense", 512, 10, 8_000_000, 8000),
    )
    return ModelSpec("t3", layers, CIFAR_SAMPLE_BYTES)


def lenet5_model() -> ModelSpec:
    """LeNet-5 trainable chain on 32x32x3 input."""
    layers = (
        conv_layer(1, 5, 5, 3, 6, 28, 28, input_elems=3072),
        conv_layer(2, 5, 5, 6, 16, 10, 10, input_elems=1176),
        dense_layer(3, 400, 120),
        dense_layer(4, 120, 84),
        dense_layer(5, 84, 10),
    )
    return ModelSpec("lenet5", layers, CIFAR_SAMPLE_BYTES)


def alexnet_model() -> ModelSpec:
    """AlexNet's 8 trainable layers (standard geometry, ~6.2e7 parameters).

    The sample size reflects the 64x64 dataset the model is trained on in
    this benchmark family; the layer geometry is the published architecture.
    """
    layers = (
        conv_layer(1, 11, 11, 3, 96, 55, 55, input_elems=150528),
        conv_layer(2, 5, 5, 96, 256, 27, 27, input_elems=69984),
        conv_layer(3, 3, 3, 256, 384, 13, 13, input_elems=43264),
        conv_layer(4, 3, 3, 384, 384, 13, 13, input_elems=64896),
        conv_layer(5, 3, 3, 384, 256, 13, 13, input_elems=64896),
        dense_layer(6, 9216, 4096),
        dense_layer(7, 4096, 4096),
        dense_layer(8, 4096, 1000),
    )
    return ModelSpec("alexnet", layers, TINY_IMAGENET_SAMPLE_BYTES)


ARCHITECTURES = {
    "t3": t3_model,
    "lenet5": lenet5_model,
    "alexnet": alexnet_model,
}


def build_model(arch: str) -> ModelSpec:
    try:
        return ARCHITECTURES[arch]()
    except KeyError:
        known = ", ".join(sorted(ARCHITECTURES))
        raise ConfigError(f"unknown architecture {arch!r}; known: {known}") from None


def build_profile(arch: str, rates: dict[str, WorkerSpec] | None = None) -> CostProfile:
    workers = (rates or DEFAULT_RATES).values()
    return synthesize_profile(build_model(arch), workers)
