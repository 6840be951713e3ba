"""Finite-difference suite over every primitive and composed block, run at 64-bit."""

import time
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from loguru import logger

from authformer.config import tiny_model_config
from authformer.errors import ContractError
from authformer.model.attention import cross_msa, init_attention, init_encoder, self_attention_encoder
from authformer.model.embedding import init_sequence_embed, tcn_extract
from authformer.model.fusion import fuse_images, glu, grn_fuse, init_cross_block, init_grn
from authformer.model.params import init_params
from authformer.model.router import embed_bundle, forward
from authformer.tensor import (
    Tensor,
    affine,
    concat,
    conv1d_causal,
    cross_entropy_loss,
    finite_diff_check,
    float64,
    gelu,
    layer_norm,
    matmul,
    mean_pool,
    mul,
    relu,
    reshape,
    sigmoid,
    softmax,
    total,
    transpose,
)

DEFAULT_TOLERANCE = 1e-4
DEFAULT_SEEDS = 10

Scalar = Callable[[Tensor], Tensor]


@dataclass(frozen=True)
class GradcheckTarget:
    name: str
    build: Callable[[int], tuple[Scalar, Tensor]]
    max_coords: Optional[int] = None
    kinked: bool = False


@dataclass(frozen=True)
class GradcheckResult:
    name: str
    max_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.max_error)) and self.max_error <= self.tolerance


def _weighted_sum(y: Tensor, rng: np.random.Generator) -> Tensor:
    """Random-weighted sum, so no gradient cancels by symmetry."""
    return total(mul(y, Tensor(rng.normal(size=y.shape))))


def _away_from_zero(a: np.ndarray) -> np.ndarray:
    return np.sign(a) * (np.abs(a) + 0.1) + (a == 0) * 0.1


def _unary(op: Callable[[Tensor], Tensor], shape=(3, 4), kinked: bool = False):
    def build(seed: int):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=shape)
        if kinked:
            x = _away_from_zero(x)
        return (lambda t: _weighted_sum(op(t), np.random.default_rng(seed + 1000))), Tensor(x)

    return build


def _matmul_left(seed: int):
    rng = np.random.default_rng(seed)
    b = Tensor(rng.normal(size=(4, 2)))
    return (lambda t: _weighted_sum(matmul(t, b), np.random.default_rng(seed + 1))), Tensor(rng.normal(size=(3, 4)))


def _matmul_right(seed: int):
    rng = np.random.default_rng(seed)
    a = Tensor(rng.normal(size=(2, 3, 4)))
    return (lambda t: _weighted_sum(matmul(a, t), np.random.default_rng(seed + 1))), Tensor(rng.normal(size=(4, 2)))


def _layer_norm_x(seed: int):
    rng = np.random.default_rng(seed)
    gamma, beta = Tensor(rng.normal(size=5)), Tensor(rng.normal(size=5))
    return (lambda t: _weighted_sum(layer_norm(t, gamma, beta), np.random.default_rng(seed + 1))), Tensor(rng.normal(size=(3, 5)))


def _layer_norm_gamma(seed: int):
    rng = np.random.default_rng(seed)
    x, beta = Tensor(rng.normal(size=(3, 5))), Tensor(rng.normal(size=5))
    return (lambda t: _weighted_sum(layer_norm(x, t, beta), np.random.default_rng(seed + 1))), Tensor(rng.normal(size=5))


def _layer_norm_beta(seed: int):
    rng = np.random.default_rng(seed)
    x, gamma = Tensor(rng.normal(size=(3, 5))), Tensor(rng.normal(size=5))
    return (lambda t: _weighted_sum(layer_norm(x, gamma, t), np.random.default_rng(seed + 1))), Tensor(rng.normal(size=5))


def _affine(seed: int):
    rng = np.random.default_rng(seed)
    w, b = Tensor(rng.normal(size=(4, 3))), Tensor(rng.normal(size=3))
    return (lambda t: _weighted_sum(affine(t, w, b), np.random.default_rng(seed + 1))), Tensor(rng.normal(size=(2, 4)))


def _bias_broadcast(seed: int):
    rng = np.random.default_rng(seed)
    x = Tensor(rng.normal(size=(2, 3, 4)))
    return (lambda t: _weighted_sum(mul(x, t) + t, np.random.default_rng(seed + 1))), Tensor(rng.normal(size=4))


def _reuse(seed: int):
    # x -> sum(x*x + x): x feeds three tape inputs.
    rng = np.random.default_rng(seed)
    return (lambda t: total(mul(t, t) + t)), Tensor(rng.normal(size=(2, 3)))


def _structure(seed: int):
    rng = np.random.default_rng(seed)
    other = Tensor(rng.normal(size=(2, 3)))

    def f(t):
        y = concat([t, other], axis=0)
        y = transpose(reshape(y, (2, 2, 3)), (2, 0, 1))
        return _weighted_sum(mean_pool(y, axis=1), np.random.default_rng(seed + 1))

    return f, Tensor(rng.normal(size=(2, 3)))


def _cross_entropy(seed: int):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 4, size=3)
    return (lambda t: cross_entropy_loss(t, labels)), Tensor(rng.normal(size=(3, 4)))


def _conv_x(seed: int):
    rng = np.random.default_rng(seed)
    k, b = Tensor(rng.normal(size=(3, 2, 3))), Tensor(rng.normal(size=3))
    return (lambda t: _weighted_sum(conv1d_causal(t, k, b, dilation=2), np.random.default_rng(seed + 1))), Tensor(
        rng.normal(size=(6, 2))
    )


def _conv_kernels(seed: int):
    rng = np.random.default_rng(seed)
    x, b = Tensor(rng.normal(size=(2, 6, 2))), Tensor(rng.normal(size=3))
    return (lambda t: _weighted_sum(conv1d_causal(x, t, b, dilation=1), np.random.default_rng(seed + 1))), Tensor(
        rng.normal(size=(3, 2, 3))
    )


def _tiny_tokens(rng: np.random.Generator, config) -> np.ndarray:
    return rng.normal(size=(config.embed.token_count, config.model_dim))


def _encoder(seed: int):
    config = tiny_model_config()
    rng = np.random.default_rng(seed)
    blocks = init_encoder(rng, config.model_dim, config.heads, config.mlp_ratio, config.layers)
    return (
        lambda t: _weighted_sum(self_attention_encoder(t, blocks), np.random.default_rng(seed + 1)),
        Tensor(_tiny_tokens(rng, config)),
    )


def _cross_msa(seed: int):
    config = tiny_model_config()
    rng = np.random.default_rng(seed)
    p = init_attention(rng, config.model_dim, config.heads)
    k, v = Tensor(_tiny_tokens(rng, config)), Tensor(_tiny_tokens(rng, config))
    return (lambda t: _weighted_sum(cross_msa(t, k, v, p), np.random.default_rng(seed + 1))), Tensor(_tiny_tokens(rng, config))


def _two_stage_fusion(seed: int):
    config = tiny_model_config()
    rng = np.random.default_rng(seed)
    d = config.model_dim
    s1 = init_cross_block(rng, d, config.heads, config.mlp_ratio)
    s2 = init_cross_block(rng, d, config.heads, config.mlp_ratio)
    second = Tensor(_tiny_tokens(rng, config))
    return (
        lambda t: _weighted_sum(fuse_images(t, second, s1, s2).b_fusion, np.random.default_rng(seed + 1)),
        Tensor(_tiny_tokens(rng, config)),
    )


def _glu(seed: int):
    config = tiny_model_config()
    rng = np.random.default_rng(seed)
    p = init_grn(rng, config.model_dim)
    return (lambda t: _weighted_sum(glu(t, p), np.random.default_rng(seed + 1))), Tensor(_tiny_tokens(rng, config))


GRN_PARAMETERS = (
    "m1_proj.weight",
    "m1_proj.bias",
    "fusion_proj.weight",
    "fusion_proj.bias",
    "voice_weight",
    "gate.weight",
    "gate.bias",
    "value.weight",
    "value.bias",
    "norm.gamma",
    "norm.beta",
)


def _grn(argument: str):
    """``"fusion"`` / ``"sequence"`` vary an input; anything else is a GRNParams field path."""

    def build(seed: int):
        config = tiny_model_config()
        rng = np.random.default_rng(seed)
        p = init_grn(rng, config.model_dim)
        b, s = Tensor(_tiny_tokens(rng, config)), Tensor(_tiny_tokens(rng, config))
        reduce = lambda y: _weighted_sum(y, np.random.default_rng(seed + 1))  # noqa: E731
        match argument:
            case "fusion":
                return (lambda t: reduce(grn_fuse(t, s, p))), b
            case "sequence":
                return (lambda t: reduce(grn_fuse(b, t, p))), s
            case _:
                *path, field = argument.split(".")
                owner = p
                for segment in path:
                    owner = getattr(owner, segment)
                if not isinstance(getattr(owner, field, None), Tensor):
                    raise ContractError(f"'{argument}' is not a GRN parameter")

                def f(t):
                    setattr(owner, field, t)
                    return reduce(grn_fuse(b, s, p))

                return f, getattr(owner, field)

    return build


def _tcn(seed: int):
    config = tiny_model_config()
    rng = np.random.default_rng(seed)
    p = init_sequence_embed(rng, config.embed)
    e = rng.normal(size=(config.embed.token_count, config.embed.sequence_dim))
    return (lambda t: _weighted_sum(tcn_extract(t, p), np.random.default_rng(seed + 1))), Tensor(e)


def _trimodal(name: str):
    def build(seed: int):
        config = tiny_model_config()
        params = init_params(config, seed)
        rng = np.random.default_rng(seed + 1)
        embed = config.embed
        raw = {
            "face": rng.uniform(size=(2, *embed.image_shape)),
            "finger": rng.uniform(size=(2, *embed.image_shape)),
            "voice": rng.uniform(-1, 1, size=(2, embed.sequence_length)),
        }
        labels = np.array([0, 1])

        def f(t):
            params.replace(name, t)
            return cross_entropy_loss(forward(embed_bundle(raw, params), params), labels)

        return f, params.get(name)

    return build


TRIMODAL_PARAMETERS = (
    "image_embeds.face.proj.weight",
    "sequence_embed.tcn.0.kernels",
    "encoders.fingerprint.1.attn.key.weight",
    "stage2.attn.query.weight",
    "grn.voice_weight",
    "grn.gate.weight",
    "head.classifier.weight",
)


def default_targets() -> list[GradcheckTarget]:
    targets = [
        GradcheckTarget("matmul[a]", _matmul_left),
        GradcheckTarget("matmul[b]", _matmul_right),
        GradcheckTarget("softmax", _unary(lambda t: softmax(t, axis=-1))),
        GradcheckTarget("layer_norm[x]", _layer_norm_x),
        GradcheckTarget("layer_norm[gamma]", _layer_norm_gamma),
        GradcheckTarget("layer_norm[beta]", _layer_norm_beta),
        GradcheckTarget("sigmoid", _unary(sigmoid)),
        GradcheckTarget("relu", _unary(relu, kinked=True), kinked=True),
        GradcheckTarget("gelu", _unary(gelu)),
        GradcheckTarget("affine", _affine),
        GradcheckTarget("add/mul broadcast", _bias_broadcast),
        GradcheckTarget("reuse accumulation", _reuse),
        GradcheckTarget("concat/reshape/transpose/mean_pool", _structure),
        GradcheckTarget("cross_entropy", _cross_entropy),
        GradcheckTarget("conv1d_causal[x]", _conv_x),
        GradcheckTarget("conv1d_causal[kernels]", _conv_kernels),
        GradcheckTarget("self_attention_encoder", _encoder, max_coords=12),
        GradcheckTarget("cross_msa", _cross_msa, max_coords=12),
        GradcheckTarget("fuse_images", _two_stage_fusion, max_coords=12),
        GradcheckTarget("glu", _glu, max_coords=12),
        GradcheckTarget("grn_fuse[fusion]", _grn("fusion"), max_coords=12),
        GradcheckTarget("grn_fuse[sequence]", _grn("sequence"), max_coords=12),
        GradcheckTarget("tcn_extract", _tcn, max_coords=12, kinked=True),
    ]
    targets += [GradcheckTarget(f"grn_fuse[{name}]", _grn(name), max_coords=12) for name in GRN_PARAMETERS]
    targets += [
        GradcheckTarget(f"trimodal[{name}]", _trimodal(name), max_coords=8, kinked=True)
        for name in TRIMODAL_PARAMETERS
    ]
    return targets


def check_target(target: GradcheckTarget, seeds: int = DEFAULT_SEEDS, tol: float = DEFAULT_TOLERANCE) -> GradcheckResult:
    worst = 0.0
    with float64():
        for seed in range(seeds):
            f, x = target.build(seed)
            err = finite_diff_check(f, x, max_coords=target.max_coords, seed=seed, kinked=target.kinked)
            worst = max(worst, err) if np.isfinite(err) else float("inf")
    return GradcheckResult(target.name, worst, tol)


def run_gradcheck(
    targets: Optional[Sequence[GradcheckTarget]] = None,
    seeds: int = DEFAULT_SEEDS,
    tol: float = DEFAULT_TOLERANCE,
) -> list[GradcheckResult]:
    start = time.perf_counter()
    results = []
    for target in targets if targets is not None else default_targets():
        result = check_target(target, seeds, tol)
        log = logger.info if result.passed else logger.error
        log(f"gradcheck {result.name}: max rel. error {result.max_error:.3e} ({'ok' if result.passed else 'FAIL'})")
        results.append(result)
    logger.info(f"gradcheck finished {len(results)} targets in {time.perf_counter() - start:.1f}s")
    return results
