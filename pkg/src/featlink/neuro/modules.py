"""Forward passes of the pyramid fusion/split stacks and the channel-aware
encoder/decoder."""

import numpy as np

from ..channel import SNR_FLOOR_DB
from . import ops
from .pyramid import FeaturePyramid, WIDTH

SNR_SCALE_DB = 20.0


def _conv(x, w, prefix, stride=1, padding=None):
    kernel = w[f"{prefix}.weight"]
    if padding is None:
        padding = kernel.shape[-1] // 2 if stride == 1 else 0
    return ops.conv2d(x, kernel, w[f"{prefix}.bias"], stride=stride, padding=padding)


def _bn(x, w, prefix):
    return ops.batchnorm_infer(x, w[f"{prefix}.mean"], w[f"{prefix}.var"],
                               w[f"{prefix}.scale"], w[f"{prefix}.shift"])


def _se(x, w, prefix):
    return ops.se_block(x, w[f"{prefix}.fc1.weight"], w[f"{prefix}.fc1.bias"],
                        w[f"{prefix}.fc2.weight"], w[f"{prefix}.fc2.bias"])


def fusion_block(x, w, prefix):
    """3x3 conv -> GELU -> BN -> SE -> 1x1 conv halving the channels."""
    y = ops.gelu(_conv(x, w, f"{prefix}.conv3"))
    y = _se(_bn(y, w, f"{prefix}.bn"), w, f"{prefix}.se")
    return _conv(y, w, f"{prefix}.conv1")


def split_block(x, w, prefix):
    """Mirror of :func:`fusion_block`: 1x1 conv doubling the channels -> SE
    -> BN -> GELU -> 3x3 conv."""
    y = _se(_conv(x, w, f"{prefix}.conv1"), w, f"{prefix}.se")
    y = ops.gelu(_bn(y, w, f"{prefix}.bn"))
    return _conv(y, w, f"{prefix}.conv3")


def hff_forward(pyr, w):
    """Fuse P2..P5 into one (256, H/16, W/16) map. P6 is not used."""
    down = _conv(pyr.p2, w, "hff.down1", stride=2)
    carry = fusion_block(np.concatenate([down, pyr.p3]), w, "hff.fuse1")
    down = _conv(carry, w, "hff.down2", stride=2)
    carry = fusion_block(np.concatenate([down, pyr.p4]), w, "hff.fuse2")
    up5 = ops.bilinear_upsample(pyr.p5)
    return fusion_block(np.concatenate([carry, up5]), w, "hff.fuse3")


def hfs_forward(p_prime, w):
    """Split a (256, H/16, W/16) map back into a five-level pyramid.

    Each split block yields 512 channels; the second half becomes a pyramid
    level (after resizing), the first half feeds the next block.
    """
    p_prime = np.asarray(p_prime)
    if p_prime.ndim != 3 or p_prime.shape[0] != WIDTH:
        raise ValueError(f"expected a ({WIDTH}, H/16, W/16) map, got {p_prime.shape}")
    h16, w16 = p_prime.shape[1:]
    if h16 % 4 or w16 % 4:
        raise ValueError(f"map size {h16}x{w16} does not come from an image divisible by 64")

    y = split_block(p_prime, w, "hfs.split3")
    carry, half = y[:WIDTH], y[WIDTH:]
    p5 = ops.max_pool2(half)

    y = split_block(carry, w, "hfs.split2")
    carry, p4 = y[:WIDTH], y[WIDTH:]

    y = split_block(ops.bilinear_upsample(carry), w, "hfs.split1")
    carry, p3 = y[:WIDTH], y[WIDTH:]
    p2 = ops.bilinear_upsample(carry)

    return FeaturePyramid(p2=p2, p3=p3, p4=p4, p5=p5, p6=ops.max_pool2(p5))


def snr_features(eq_snrs_db):
    """Clip at the dead-channel floor and rescale dB values for the MLP."""
    snrs = np.maximum(np.asarray(eq_snrs_db, np.float64), SNR_FLOOR_DB)
    return snrs / SNR_SCALE_DB


def channel_aware_block(x, eq_snrs_db, w, prefix, return_gate=False):
    """One residual block gated by joint image/channel attention."""
    first = _conv(x, w, f"{prefix}.conv1")
    trunk = _bn(ops.gelu(first), w, f"{prefix}.bn1")
    trunk = _bn(ops.gelu(_conv(trunk, w, f"{prefix}.conv2")), w, f"{prefix}.bn2")

    image_feat = first.astype(np.float64).mean(axis=(1, 2))
    s = snr_features(eq_snrs_db)[:, None]
    hidden = ops.gelu(ops.linear(s, w[f"{prefix}.snr.fc1.weight"], w[f"{prefix}.snr.fc1.bias"]))
    embed = ops.linear(hidden, w[f"{prefix}.snr.fc2.weight"], w[f"{prefix}.snr.fc2.bias"])
    chan_feat = embed.reshape(-1)

    joint = np.concatenate([image_feat, chan_feat])
    a = ops.gelu(ops.linear(joint, w[f"{prefix}.att.fc1.weight"], w[f"{prefix}.att.fc1.bias"]))
    gate = ops.sigmoid(ops.linear(a, w[f"{prefix}.att.fc2.weight"], w[f"{prefix}.att.fc2.bias"]))

    out = (x.astype(np.float64) + gate[:, None, None] * trunk).astype(np.float32)
    if return_gate:
        return out, gate
    return out


def _channel_aware_stack(p, eq_snrs_db, w, prefix, arch, return_gates):
    p = np.asarray(p, np.float32)
    if p.ndim != 3 or p.shape[0] != WIDTH:
        raise ValueError(f"expected a ({WIDTH}, h, w) map, got {p.shape}")
    eq_snrs_db = np.asarray(eq_snrs_db, np.float64).reshape(-1)
    if eq_snrs_db.size != arch.n_antennas:
        raise ValueError(
            f"got {eq_snrs_db.size} sub-channel SNRs for {arch.n_antennas} antennas")
    gates = []
    for b in range(arch.depth):
        p, g = channel_aware_block(p, eq_snrs_db, w, f"{prefix}.{b}", return_gate=True)
        gates.append(g)
    return (p, gates) if return_gates else p


def mce_forward(p, eq_snrs_db, w, arch=None, return_gates=False):
    """Channel-aware encoder: ``depth`` stacked residual blocks, shape preserving."""
    return _channel_aware_stack(p, eq_snrs_db, w, "mce", arch or w.arch, return_gates)


def mcd_forward(p, eq_snrs_db, w, arch=None, return_gates=False):
    """Channel-aware decoder, same structure as the encoder with its own weights."""
    return _channel_aware_stack(p, eq_snrs_db, w, "mcd", arch or w.arch, return_gates)


def fc_compress(p_m, w):
    """Per-pixel 256 -> C channel reduction."""
    return ops.pointwise_fc(p_m, w["fc.compress.weight"], w["fc.compress.bias"])


def fc_decompress(p_c, w):
    """Per-pixel C -> 256 channel expansion."""
    return ops.pointwise_fc(p_c, w["fc.decompress.weight"], w["fc.decompress.bias"])
