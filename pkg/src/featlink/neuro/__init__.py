"""Inference-only neural feature operators."""

from .modules import (
    channel_aware_block,
    fc_compress,
    fc_decompress,
    fusion_block,
    hff_forward,
    hfs_forward,
    mcd_forward,
    mce_forward,
    split_block,
)
from .pyramid import FeaturePyramid, synth_pyramid, volume_ratio
from .weights import ArchConfig, WeightBundle, init_weights, manifest

__all__ = [
    "ArchConfig",
    "FeaturePyramid",
    "WeightBundle",
    "channel_aware_block",
    "fc_compress",
    "fc_decompress",
    "fusion_block",
    "hff_forward",
    "hfs_forward",
    "init_weights",
    "manifest",
    "mcd_forward",
    "mce_forward",
    "split_block",
    "synth_pyramid",
    "volume_ratio",
]
