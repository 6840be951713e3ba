"""Central finite-difference oracle for analytic gradients."""

from typing import Callable, Optional

import numpy as np

from authformer.errors import ContractError
from authformer.tensor.core import Tape, Tensor, no_grad

_REFINE_ABOVE = 1e-6


def finite_diff_check(
    f: Callable[[Tensor], Tensor],
    x: Tensor,
    h: float = 1e-5,
    max_coords: Optional[int] = None,
    seed: int = 0,
    kinked: bool = False,
) -> float:
    """
    Compare the tape gradient of scalar ``f`` at ``x`` with central differences.

    Returns max over coordinates of ``|analytic - numeric| / max(1, |analytic|)``.
    With ``max_coords`` only a seeded random subset of coordinates is checked.
    With ``kinked`` (functions through ReLU) a coordinate whose error exceeds
    1e-6 is retried at ``h / 10`` and the smaller error kept.
    ``x`` itself is not modified.
    """
    base = x.data.copy()
    leaf = Tensor(base, requires_grad=True, dtype=base.dtype)
    with Tape() as tape:
        y = f(leaf)
        if y.size != 1:
            raise ContractError(f"finite_diff_check: f must be scalar-valued, got shape {y.shape}")
        if y.requires_grad:
            tape.backward(y)
    analytic = leaf.grad if leaf.grad is not None else np.zeros_like(base)

    coords = np.arange(base.size)
    if max_coords is not None and max_coords < base.size:
        coords = np.sort(np.random.default_rng(seed).choice(base.size, max_coords, replace=False))

    def central(i: int, step: float) -> float:
        plus = base.copy()
        plus.flat[i] += step
        minus = base.copy()
        minus.flat[i] -= step
        hi = f(Tensor(plus, dtype=base.dtype)).item()
        lo = f(Tensor(minus, dtype=base.dtype)).item()
        return (hi - lo) / (2 * step)

    worst = 0.0
    with no_grad():
        for i in coords:
            a = float(analytic.flat[i])
            err = abs(a - central(i, h)) / max(1.0, abs(a))
            if kinked and err > _REFINE_ABOVE:
                # A kink inside [x-h, x+h] biases the difference.
                err = min(err, abs(a - central(i, h / 10)) / max(1.0, abs(a)))
            worst = max(worst, err)
    return worst
