"""Central-difference gradient checking against the tape."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .tensor import Tape, Tensor

# floor for the denominator so that parameters with (near) zero gradient are
# judged by absolute error instead of amplifying roundoff
DENOM_FLOOR = 1e-8


@dataclass
class GradCheckReport:
    tol: float
    errors: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(e <= self.tol for e in self.errors.values())

    @property
    def worst(self) -> tuple[str, float]:
        return max(self.errors.items(), key=lambda kv: kv[1])

    def lines(self) -> list[str]:
        return [
            f"{'ok  ' if err <= self.tol else 'FAIL'} {name:32s} rel_err={err:.3e}"
            for name, err in sorted(self.errors.items())
        ]


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """max |a - n| over the tensor, relative to the larger of max|a|, max|n|."""
    diff = np.max(np.abs(analytic - numeric), initial=0.0)
    scale = max(np.max(np.abs(analytic), initial=0.0), np.max(np.abs(numeric), initial=0.0), DENOM_FLOOR)
    return float(diff / scale)


def numeric_gradient(f: Callable[[], Tensor], p: Tensor, step: float = 1e-5) -> np.ndarray:
    g = np.zeros_like(p.data)
    flat, gflat = p.data.reshape(-1), g.reshape(-1)
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + step
        up = f().item()
        flat[k] = orig - step
        down = f().item()
        flat[k] = orig
        gflat[k] = (up - down) / (2.0 * step)
    return g


def grad_check(
    f: Callable[[], Tensor],
    params: dict[str, Tensor],
    tol: float = 1e-4,
    step: float = 1e-5,
    analytic: Callable[[], dict[str, np.ndarray]] | None = None,
) -> GradCheckReport:
    """Compare tape gradients of the scalar ``f()`` with central differences.

    ``f`` closes over ``params`` and reads them on every call. ``analytic``
    overrides the tape (used to exercise the failing branch).
    """
    if analytic is None:
        with Tape() as tape:
            loss = f()
        grads = tape.gradient(loss, params)
    else:
        grads = analytic()
    report = GradCheckReport(tol=tol)
    for name, p in params.items():
        report.errors[name] = relative_error(grads[name], numeric_gradient(f, p, step))
    return report
