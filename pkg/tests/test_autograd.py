import numpy as np
import pytest

from authformer.errors import ContractError
from authformer.tensor import (
    Tape,
    Tensor,
    affine,
    backward,
    cross_entropy_loss,
    finite_diff_check,
    layer_norm,
    mul,
    no_grad,
    relu,
    set_default_dtype,
    total,
)


def test_square_sum_gradient():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with Tape():
        backward(total(mul(x, x)))
    np.testing.assert_array_equal(x.grad, [2.0, 4.0])


def test_layer_norm_of_constant_has_no_gradient():
    x = Tensor(np.full(4, 3.0), requires_grad=True)
    with Tape():
        backward(total(layer_norm(x, Tensor(np.ones(4)), Tensor(np.zeros(4)))))
    np.testing.assert_allclose(x.grad, np.zeros(4), atol=1e-8)


def test_reuse_accumulates():
    data = np.random.default_rng(0).normal(size=(2, 3))
    x = Tensor(data, requires_grad=True)
    with Tape():
        backward(total(mul(x, x) + x))
    np.testing.assert_allclose(x.grad, 2 * data + 1, atol=1e-12)
    assert finite_diff_check(lambda t: total(mul(t, t) + t), Tensor(data)) <= 1e-8


def test_untracked_tensors_untouched():
    x = Tensor([1.0, 2.0], requires_grad=True)
    w = Tensor([3.0, 4.0])
    with Tape():
        backward(total(mul(x, w)))
    assert w.grad is None
    np.testing.assert_array_equal(x.grad, [3.0, 4.0])


def test_non_scalar_loss_rejected():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with Tape():
        y = mul(x, x)
        with pytest.raises(ContractError, match="scalar"):
            backward(y)


def test_untracked_loss_rejected():
    with pytest.raises(ContractError, match="not tracked"):
        backward(total(Tensor([1.0, 2.0])))


def test_tape_replays_once_and_resets():
    x = Tensor([1.0, -1.0], requires_grad=True)
    with Tape() as tape:
        loss = total(mul(x, x))
        assert len(tape) == 2
        tape.backward(loss)
        assert len(tape) == 0


def test_no_grad_records_nothing():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with Tape() as tape, no_grad():
        y = total(mul(x, x))
    assert not y.requires_grad
    assert len(tape) == 0


def test_leaf_gradients_keep_parameter_dtype():
    x = Tensor([1.0, 2.0], requires_grad=True, dtype=np.float32)
    with Tape():
        backward(total(mul(x, Tensor([0.5, 0.25], dtype=np.float32))))
    assert x.grad.dtype == np.float32


def test_finite_diff_sum_of_squares():
    x = Tensor(np.random.default_rng(1).normal(size=5))
    assert finite_diff_check(lambda t: total(mul(t, t)), x) <= 1e-8


def test_finite_diff_cross_entropy_of_affine():
    rng = np.random.default_rng(2)
    w, b = Tensor(rng.normal(size=(4, 3))), Tensor(rng.normal(size=3))
    labels = np.array([0, 2])
    x = Tensor(rng.normal(size=(2, 4)))
    assert finite_diff_check(lambda t: cross_entropy_loss(affine(t, w, b), labels), x) <= 1e-6


def test_finite_diff_does_not_modify_input():
    data = np.random.default_rng(3).normal(size=(2, 2))
    x = Tensor(data)
    finite_diff_check(lambda t: total(mul(t, t)), x)
    np.testing.assert_array_equal(x.data, data)


def test_finite_diff_uses_single_step_unless_kinked():
    # relu at 5e-6 with h=1e-5: the central difference straddles the kink and reads 0.75.
    x = Tensor([5e-6])
    assert finite_diff_check(lambda t: total(relu(t)), x) == pytest.approx(0.25, rel=1e-6)
    assert finite_diff_check(lambda t: total(relu(t)), x, kinked=True) <= 1e-9


def test_unsupported_dtype():
    with pytest.raises(ContractError, match="unsupported"):
        set_default_dtype("float16")
