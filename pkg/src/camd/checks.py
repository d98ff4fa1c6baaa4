"""Gradient-check battery: every differentiable operation plus an
end-to-end pass through a tiny full-variant model, all in float64."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffcore import (
    Tensor,
    conv1d,
    cross_entropy,
    grad_check,
    layer_norm,
    linear,
    lstm_cell,
    matmul,
    relu,
    sigmoid,
    softmax,
    tanh,
    tmean,
    tsum,
)
from .model import CamdModel, ModelConfig

OP_TOLERANCE = 1e-4
END_TO_END_TOLERANCE = 1e-3


@dataclass
class CheckResult:
    name: str
    max_rel_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance


def tiny_config() -> ModelConfig:
    return ModelConfig(num_classes=3, nt=2, nr=2, length=16, channels=8,
                       cc_channels=4, heads=2, variant="full")


def end_to_end_error(h: float = 1e-5) -> float:
    """Max relative error of all parameter gradients of the tiny model."""
    model = CamdModel(tiny_config(), seed=1, dtype=np.float64)
    rng = np.random.default_rng(2)
    x = rng.normal(size=(2, 2, 16, 2))
    labels = np.array([0, 2])
    names = list(model.params)
    inputs = [model.params[n].data.copy() for n in names]

    def fn(*tensors):
        for n, t in zip(names, tensors):
            model.params[n] = t
        return cross_entropy(model.forward(Tensor(x)), labels)

    return grad_check(fn, inputs, h)


def run_battery(h: float = 1e-6) -> list[CheckResult]:
    rng = np.random.default_rng(0)
    results = []

    def check(name, fn, inputs, tol=OP_TOLERANCE):
        results.append(CheckResult(name, grad_check(fn, inputs, h), tol))

    check("matmul", lambda a, b: tsum(matmul(a, b)),
          [rng.normal(size=(3, 3)), rng.normal(size=(3, 3))], tol=1e-7)
    check("linear", lambda x, w, b: tsum(linear(x, w, b)),
          [rng.normal(size=(4, 5)), rng.normal(size=(5, 3)), rng.normal(size=3)])
    check("conv1d", lambda x, w, b: tsum(conv1d(x, w, b, stride=2, pad=1)),
          [rng.normal(size=(2, 8, 3)), rng.normal(size=(3, 3, 4)), rng.normal(size=4)])
    # relu probed away from the kink at 0
    relu_x = rng.normal(size=10)
    relu_x[np.abs(relu_x) < 1e-2] = 0.5
    check("relu", lambda x: tsum(relu(x)), [relu_x], tol=1e-8)
    check("sigmoid", lambda x: tsum(sigmoid(x)), [rng.normal(size=10)])
    check("tanh", lambda x: tsum(tanh(x)), [rng.normal(size=10)])
    # project through a fixed weight so the check is not constant (rows sum to 1)
    proj = Tensor(rng.normal(size=(5, 1)))
    check("softmax", lambda x: tsum(linear(softmax(x), proj)),
          [rng.normal(size=(3, 5))], tol=1e-6)
    check("softmax+cross_entropy", lambda z: cross_entropy(z, np.array([0, 2, 1])),
          [rng.normal(size=(3, 4))], tol=1e-6)
    check("layer_norm", lambda x, g, b: tsum(layer_norm(x, g, b)),
          [rng.normal(size=(4, 6)), rng.normal(size=6), rng.normal(size=6)])

    def lstm_fn(x, hs, cs, wx, wh, b):
        h_new, c_new = lstm_cell(x, hs, cs, wx, wh, b)
        return tsum(h_new) + tsum(c_new)

    check("lstm_cell", lstm_fn,
          [rng.normal(size=(2, 3)), rng.normal(size=(2, 3)), rng.normal(size=(2, 3)),
           rng.normal(size=(3, 12)), rng.normal(size=(3, 12)), rng.normal(size=12)])
    check("mean", lambda x: tmean(x), [rng.normal(size=(3, 4))], tol=1e-8)
    # larger step for the deep composite: its smallest-gradient coordinates are
    # otherwise dominated by float64 cancellation noise in the differences
    results.append(CheckResult("end_to_end_camd", end_to_end_error(1e-5), END_TO_END_TOLERANCE))
    return results
