from . import gradcheck
from .model import (
    Model,
    ModelConfig,
    ModelFileError,
    build_model,
    forward,
    load_model,
    loss_and_grads,
    save_model,
)
from .train import TrainConfig, TrainReport, accuracy, sgd_step, train

__all__ = [
    "Model",
    "ModelConfig",
    "ModelFileError",
    "TrainConfig",
    "TrainReport",
    "accuracy",
    "build_model",
    "forward",
    "load_model",
    "loss_and_grads",
    "save_model",
    "sgd_step",
    "train",
]
