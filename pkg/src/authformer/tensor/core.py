"""Dense tensors and the tape that records their primitive applications."""

import threading
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Sequence, Union

import numpy as np
from loguru import logger

from authformer.errors import ContractError

ArrayLike = Union[np.ndarray, Sequence, float, int]
GradRule = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_DTYPES = {"float32": np.float32, "float64": np.float64}
_default_dtype = np.float32
_local = threading.local()


def get_default_dtype() -> type:
    return _default_dtype


def set_default_dtype(dtype: Union[str, type]) -> None:
    """Select the element type of newly created tensors (float32 or float64)."""
    global _default_dtype
    if isinstance(dtype, str):
        if dtype not in _DTYPES:
            raise ContractError(f"unsupported dtype '{dtype}'")
        dtype = _DTYPES[dtype]
    if dtype not in (np.float32, np.float64):
        raise ContractError(f"unsupported dtype {dtype}")
    _default_dtype = dtype


@contextmanager
def default_dtype(dtype: Union[str, type]) -> Iterator[None]:
    previous = _default_dtype
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(previous)


def float64():
    """Shorthand used by gradient checks, which are unreliable at 32-bit."""
    return default_dtype(np.float64)


class Tensor:
    """A dense row-major array with optional gradient tracking."""

    def __init__(
        self,
        data: ArrayLike,
        requires_grad: bool = False,
        dtype: Optional[type] = None,
        name: Optional[str] = None,
    ):
        self.data: np.ndarray = np.array(data, dtype=dtype or _default_dtype)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._tape: Optional["Tape"] = None

    @classmethod
    def _wrap(cls, data: np.ndarray, requires_grad: bool = False) -> "Tensor":
        out = cls.__new__(cls)
        out.data = data
        out.requires_grad = requires_grad
        out.grad = None
        out.name = None
        out._tape = None
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False, dtype=self.data.dtype)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        req = ", requires_grad=True" if self.requires_grad else ""
        nm = f", name={self.name}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{req}{nm})"

    # Operator sugar; the primitives live in authformer.tensor.ops.
    def __add__(self, other):
        from authformer.tensor import ops

        return ops.add(self, other)

    def __radd__(self, other):
        from authformer.tensor import ops

        return ops.add(self, other)

    def __sub__(self, other):
        from authformer.tensor import ops

        return ops.sub(self, other)

    def __rsub__(self, other):
        from authformer.tensor import ops

        return ops.add(ops.neg(self), other)

    def __mul__(self, other):
        from authformer.tensor import ops

        return ops.mul(self, other)

    def __rmul__(self, other):
        from authformer.tensor import ops

        return ops.mul(self, other)

    def __neg__(self):
        from authformer.tensor import ops

        return ops.neg(self)

    def __matmul__(self, other):
        from authformer.tensor import ops

        return ops.matmul(self, other)


@dataclass
class TapeEntry:
    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    rule: GradRule


class Tape:
    """Ordered record of primitive applications, replayed in reverse by backward()."""

    def __init__(self):
        self.entries: list[TapeEntry] = []
        self._previous: Optional["Tape"] = None

    def __enter__(self) -> "Tape":
        self._previous = getattr(_local, "tape", None)
        _local.tape = self
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _local.tape = self._previous
        self._previous = None

    def __len__(self) -> int:
        return len(self.entries)

    def record(self, op: str, inputs: Sequence[Tensor], output: Tensor, rule: GradRule) -> None:
        output._tape = self
        self.entries.append(TapeEntry(op, tuple(inputs), output, rule))

    def reset(self) -> None:
        self.entries.clear()

    def backward(self, loss: Tensor, retain_graph: bool = False) -> None:
        if loss.size != 1:
            raise ContractError(f"backward() needs a scalar loss, got shape {loss.shape}")
        if not loss.requires_grad:
            raise ContractError("backward() called on a loss that is not tracked")

        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        leaves: dict[int, Tensor] = {}
        produced = {id(e.output) for e in self.entries}
        if id(loss) not in produced:
            leaves[id(loss)] = loss

        for entry in reversed(self.entries):
            g = grads.pop(id(entry.output), None)
            if g is None:
                continue
            entry.output.grad = g
            for inp, gi in zip(entry.inputs, entry.rule(g)):
                if gi is None or not inp.requires_grad:
                    continue
                key = id(inp)
                grads[key] = grads[key] + gi if key in grads else gi
                if key not in produced:
                    leaves[key] = inp

        for key, leaf in leaves.items():
            g = grads.get(key)
            if g is None:
                continue
            g = g.astype(leaf.data.dtype, copy=False)
            leaf.grad = g.copy() if leaf.grad is None else leaf.grad + g

        logger.debug(f"backward: replayed {len(self.entries)} tape entries, {len(leaves)} leaves")
        if not retain_graph:
            self.reset()


def current_tape() -> Tape:
    """The innermost active tape on this thread (a per-thread default otherwise)."""
    tape = getattr(_local, "tape", None)
    if tape is None:
        default = getattr(_local, "default_tape", None)
        if default is None:
            default = _local.default_tape = Tape()
        return default
    return tape


def grad_enabled() -> bool:
    return getattr(_local, "grad_enabled", True)


@contextmanager
def no_grad() -> Iterator[None]:
    previous = grad_enabled()
    _local.grad_enabled = False
    try:
        yield
    finally:
        _local.grad_enabled = previous


def backward(loss: Tensor, retain_graph: bool = False) -> None:
    """Populate ``grad`` on every tracked tensor that ``loss`` depends on."""
    if loss.size != 1:
        raise ContractError(f"backward() needs a scalar loss, got shape {loss.shape}")
    if loss._tape is None:
        if loss.requires_grad:
            # A tracked scalar leaf: d(loss)/d(loss) = 1.
            g = np.ones_like(loss.data)
            loss.grad = g if loss.grad is None else loss.grad + g
            return
        raise ContractError("backward() called on a loss that is not tracked")
    loss._tape.backward(loss, retain_graph=retain_graph)
