"""Minimal tensor arithmetic, reverse-mode differentiation, seeded randomness and Adam."""

from numeric.tensor import Tensor, backward, layer_norm, softmax, softmax_rows
from numeric.params import ParamStore
from numeric.rng import RngState
from numeric.optim import Adam, AdamState, adam_step
from numeric.gradcheck import GradCheckReport, grad_check

__all__ = [
    'Tensor',
    'backward',
    'layer_norm',
    'softmax',
    'softmax_rows',
    'ParamStore',
    'RngState',
    'Adam',
    'AdamState',
    'adam_step',
    'GradCheckReport',
    'grad_check',
]
