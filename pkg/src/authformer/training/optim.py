"""First-order optimizers over a model's parameter list."""

import numpy as np

from authformer.config import TrainConfig
from authformer.errors import ConfigError
from authformer.tensor import Tensor


class Optimizer:
    def __init__(self, params: list[Tensor], lr: float):
        self.params = list(params)
        self.lr = lr
        self.steps = 0

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        self.steps += 1
        for i, p in enumerate(self.params):
            if p.grad is not None:
                # Rebind rather than mutate in place: tapes may still hold the old array.
                p.data = (p.data - self._update(i, p.grad)).astype(p.data.dtype, copy=False)

    def _update(self, i: int, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class SGD(Optimizer):
    def __init__(self, params: list[Tensor], lr: float, momentum: float = 0.0):
        super().__init__(params, lr)
        self.momentum = momentum
        self.velocity = [np.zeros_like(p.data) for p in self.params]

    def _update(self, i: int, grad: np.ndarray) -> np.ndarray:
        self.velocity[i] = self.momentum * self.velocity[i] + grad
        return self.lr * self.velocity[i]


class Adam(Optimizer):
    def __init__(
        self,
        params: list[Tensor],
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        super().__init__(params, lr)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def _update(self, i: int, grad: np.ndarray) -> np.ndarray:
        self.m[i] = self.beta1 * self.m[i] + (1 - self.beta1) * grad
        self.v[i] = self.beta2 * self.v[i] + (1 - self.beta2) * grad * grad
        m_hat = self.m[i] / (1 - self.beta1**self.steps)
        v_hat = self.v[i] / (1 - self.beta2**self.steps)
        return self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class OptimizerFactory:
    @staticmethod
    def create(name: str, params: list[Tensor], config: TrainConfig) -> Optimizer:
        match name.lower():
            case "adam":
                return Adam(params, config.learning_rate, config.beta1, config.beta2, config.eps)
            case "sgd":
                return SGD(params, config.learning_rate, config.momentum)
            case _:
                raise ConfigError(f"Unsupported optimizer: {name}")
