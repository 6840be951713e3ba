from authformer.model.attention import (
    AttentionBlockParams,
    AttentionParams,
    attention_weights,
    cross_msa,
    self_attention_encoder,
    zero_block_outputs,
)
from authformer.model.embedding import (
    ImageSample,
    SequenceSample,
    add_positional,
    patch_embed,
    receptive_field,
    seq_embed,
    tcn_extract,
)
from authformer.model.fusion import (
    CrossBlockParams,
    FusionState,
    GRNParams,
    close_gate,
    fuse_images,
    fuse_images_stage1,
    fuse_images_stage2,
    glu,
    grn_fuse,
)
from authformer.model.params import AuthFormerParams, HeadParams, init_params
from authformer.model.router import (
    ModalityBundle,
    Prediction,
    RoutePlan,
    embed_bundle,
    forward,
    plan_route,
    predict,
    predict_from_logits,
)

__all__ = [
    "AttentionBlockParams",
    "AttentionParams",
    "AuthFormerParams",
    "CrossBlockParams",
    "FusionState",
    "GRNParams",
    "HeadParams",
    "ImageSample",
    "ModalityBundle",
    "Prediction",
    "RoutePlan",
    "SequenceSample",
    "add_positional",
    "attention_weights",
    "close_gate",
    "cross_msa",
    "embed_bundle",
    "forward",
    "fuse_images",
    "fuse_images_stage1",
    "fuse_images_stage2",
    "glu",
    "grn_fuse",
    "init_params",
    "patch_embed",
    "plan_route",
    "predict",
    "predict_from_logits",
    "receptive_field",
    "self_attention_encoder",
    "seq_embed",
    "tcn_extract",
    "zero_block_outputs",
]
