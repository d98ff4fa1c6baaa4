"""Central-difference gradient checking for tape-recorded operations."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, backward


def grad_check(fn, inputs, h: float = 1e-6) -> float:
    """Max relative error between analytic and numeric gradients of *fn*.

    *fn* maps one Tensor per entry of *inputs* to a scalar Tensor. Inputs
    are evaluated in float64; each coordinate is perturbed by
    h * max(1, |x|) and the relative error is
    |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
    """
    tensors = [Tensor(np.asarray(x, dtype=np.float64), requires_grad=True) for x in inputs]
    out = fn(*tensors)
    backward(out)
    analytic = [
        t.grad.copy() if t.grad is not None else np.zeros_like(t.data) for t in tensors
    ]

    frozen = [Tensor(t.data) for t in tensors]  # share the same buffers, no taping

    def evaluate() -> float:
        return float(fn(*frozen).data)

    max_err = 0.0
    for t, ga in zip(tensors, analytic):
        flat = t.data.reshape(-1)
        gflat = ga.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            step = h * max(1.0, abs(orig))
            flat[i] = orig + step
            fp = evaluate()
            flat[i] = orig - step
            fm = evaluate()
            flat[i] = orig
            numeric = (fp - fm) / (2.0 * step)
            a = gflat[i]
            err = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
            max_err = max(max_err, err)
    return max_err
