"""Named parameter storage with gradient accumulators, plus fan-based initialization."""

from collections import OrderedDict
from typing import Dict, Iterator, Mapping, Optional, Sequence, Tuple

import numpy as np

from errors import ShapeError
from numeric.tensor import Tensor, parameter


class ParamStore:
    """
    Ordered map name -> parameter tensor, with a gradient array per parameter.

    Iteration follows insertion order, which keeps optimizer updates and
    checkpoints reproducible.
    """

    def __init__(self):
        self._params: "OrderedDict[str, Tensor]" = OrderedDict()
        self._grads: Dict[str, np.ndarray] = {}

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self._params:
            raise KeyError(f"duplicate parameter name '{name}'")
        tensor = parameter(value, name)
        self._params[name] = tensor
        self._grads[name] = np.zeros_like(tensor.data)
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def names(self) -> Tuple[str, ...]:
        return tuple(self._params)

    def items(self) -> Iterator[Tuple[str, Tensor]]:
        return iter(self._params.items())

    def grad(self, name: str) -> np.ndarray:
        return self._grads[name]

    def num_parameters(self) -> int:
        return int(sum(t.size for t in self._params.values()))

    def zero_grad(self) -> None:
        for name in self._grads:
            self._grads[name].fill(0.0)

    def accumulate(self, leaf_grads: Mapping[Tensor, np.ndarray], scale: float = 1.0) -> None:
        """Add gradients keyed by leaf tensor; leaves not owned by this store are ignored."""
        for leaf, g in leaf_grads.items():
            if leaf.name in self._params and self._params[leaf.name] is leaf:
                self._grads[leaf.name] += g * scale if scale != 1.0 else g

    def accumulate_named(self, named: Mapping[str, np.ndarray], scale: float = 1.0) -> None:
        for name in self._params:
            if name in named:
                self._grads[name] += named[name] * scale if scale != 1.0 else named[name]

    def state_dict(self) -> "OrderedDict[str, np.ndarray]":
        """Copies of every parameter array, in order."""
        return OrderedDict((name, t.data.copy()) for name, t in self._params.items())

    def load_state_dict(self, state: Mapping[str, np.ndarray]) -> None:
        missing = [n for n in self._params if n not in state]
        unexpected = [n for n in state if n not in self._params]
        if missing or unexpected:
            raise ShapeError("ParamStore", f"missing={missing} unexpected={unexpected}")
        for name, tensor in self._params.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != tensor.shape:
                raise ShapeError("ParamStore", f"{name}: expected {tensor.shape}, got {value.shape}")
            tensor.data[...] = value

    def all_finite(self) -> bool:
        return all(np.isfinite(t.data).all() for t in self._params.values())


def glorot_bound(fan_in: int, fan_out: int) -> float:
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def init_weight(
    store: ParamStore,
    rng: np.random.Generator,
    name: str,
    shape: Sequence[int],
    fans: Optional[Tuple[int, int]] = None,
) -> Tensor:
    """
    uniform(-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))).

    For head-stacked weights of shape (H, d_in, d_out) the fans default to the
    last two axes; vectors use (len, 1).
    """
    shape = tuple(shape)
    if fans is None:
        fans = (shape[0], 1) if len(shape) == 1 else (shape[-2], shape[-1])
    bound = glorot_bound(*fans)
    return store.add(name, rng.uniform(-bound, bound, size=shape))


def init_zeros(store: ParamStore, name: str, shape: Sequence[int]) -> Tensor:
    return store.add(name, np.zeros(tuple(shape)))


def init_ones(store: ParamStore, name: str, shape: Sequence[int]) -> Tensor:
    return store.add(name, np.ones(tuple(shape)))
