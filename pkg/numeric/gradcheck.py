"""Central finite-difference audit of analytic gradients."""

from typing import Callable, Dict, List, Mapping, Optional

import numpy as np
from pydantic import BaseModel, Field

from numeric.params import ParamStore
from numeric.tensor import Tensor, backward

# Relative errors use max(|analytic|, |numeric|, floor) as denominator so that
# near-zero gradients are judged on absolute roundoff instead of blowing up.
RELATIVE_ERROR_FLOOR = 1e-4


class GradCheckReport(BaseModel):
    """Per-parameter worst relative error between analytic and numeric gradients"""
    step: float
    tol: float
    per_param: Dict[str, float] = Field(description="Max relative error per parameter name")
    checked_entries: int
    max_error: float
    worst_param: Optional[str] = None
    failures: List[str] = Field(default_factory=list, description="Non-finite evaluations")
    passed: bool


def relative_error(analytic: float, numeric: float, floor: float = RELATIVE_ERROR_FLOOR) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def grad_check(
    fn: Callable[[], Tensor],
    params: ParamStore,
    step: float = 1e-5,
    tol: float = 1e-4,
    max_entries: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    analytic: Optional[Mapping[str, np.ndarray]] = None,
) -> GradCheckReport:
    """
    Compare backward() against central differences for every parameter in `params`.

    Args:
        fn: deterministic closure returning a scalar loss built from `params`
        params: parameters to perturb in place (restored afterwards)
        step: finite-difference step
        tol: pass threshold on the max relative error
        max_entries: audit at most this many entries per parameter (sampled with `rng`)
        analytic: override of the analytic gradients, e.g. to test a corrupted gradient
    """
    failures: List[str] = []
    loss = fn()
    if not np.isfinite(loss.data).all():
        failures.append("loss")
    if analytic is None:
        params.zero_grad()
        backward(loss, params)
        analytic = {name: params.grad(name).copy() for name in params.names()}
        params.zero_grad()

    rng = rng or np.random.default_rng(0)
    per_param: Dict[str, float] = {}
    checked = 0
    for name, tensor in params.items():
        flat = tensor.data.reshape(-1)
        indices = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            indices = np.sort(rng.choice(flat.size, size=max_entries, replace=False))
        worst = 0.0
        grad_flat = np.asarray(analytic[name]).reshape(-1)
        for idx in indices:
            original = flat[idx]
            flat[idx] = original + step
            plus = fn().item()
            flat[idx] = original - step
            minus = fn().item()
            flat[idx] = original
            if not (np.isfinite(plus) and np.isfinite(minus)):
                failures.append(f"{name}[{idx}]")
                continue
            numeric = (plus - minus) / (2.0 * step)
            worst = max(worst, relative_error(float(grad_flat[idx]), numeric))
            checked += 1
        per_param[name] = worst

    worst_param = max(per_param, key=per_param.get) if per_param else None
    max_error = per_param[worst_param] if worst_param else 0.0
    return GradCheckReport(
        step=step,
        tol=tol,
        per_param=per_param,
        checked_entries=checked,
        max_error=max_error,
        worst_param=worst_param,
        failures=failures,
        passed=not failures and max_error < tol,
    )
