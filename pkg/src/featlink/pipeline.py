"""End-to-end feature transport: pyramid -> link -> reconstructed pyramid."""

from . import baseband
from .channel import draw_channel, equivalent_snrs
from .metrics import DistortionReport, noise_stats, pyramid_mse
from .neuro import modules
from .neuro.weights import ArchConfig, init_weights


def resolve_weights(weights, arch, weight_seed):
    if weights is None:
        return init_weights(weight_seed, arch)
    if weights.arch != arch:
        raise ValueError(
            f"weight bundle was built for {weights.arch}, run needs {arch}")
    return weights


def run_transport(pyramid, snr_db, n_antennas, quant_bits, feature_channels, seed,
                  weights=None, depth=6, weight_seed=0, bit_coding="natural",
                  eps_singular=1e-12, return_pyramid=False):
    """Send one pyramid over one channel draw and measure the distortion.

    The channel and the noise come from independent streams keyed by
    ``seed``. The transmitter and receiver both see the same equivalent
    sub-channel SNRs (closed loop).
    """
    h, w = pyramid.image_size
    cfg = baseband.LinkConfig(
        n_antennas=n_antennas, quant_bits=quant_bits,
        feature_channels=feature_channels, image_height=h, image_width=w,
        eps_singular=eps_singular, bit_coding=bit_coding)
    arch = ArchConfig(n_antennas=n_antennas, depth=depth,
                      feature_channels=feature_channels)
    wb = resolve_weights(weights, arch, weight_seed)

    ch = draw_channel(n_antennas, snr_db, seed)
    snrs = equivalent_snrs(ch)

    p = modules.hff_forward(pyramid, wb)
    p_m = modules.mce_forward(p, snrs, wb)
    p_c = modules.fc_compress(p_m, wb)
    p_c_rx, frame = baseband.transport_frame(p_c, ch, cfg, seed)
    p_m_rx = modules.fc_decompress(p_c_rx, wb)
    p_rx = modules.mcd_forward(p_m_rx, snrs, wb)
    pyr_rx = modules.hfs_forward(p_rx, wb)

    per_level, total = pyramid_mse(pyramid, pyr_rx)
    report = DistortionReport(
        n_antennas=n_antennas,
        snr_db=float(snr_db),
        quant_bits=quant_bits,
        feature_channels=feature_channels,
        per_level_mse=per_level,
        total_mse=total,
        w_stats=noise_stats(frame.noise),
        per_stream_ber=frame.per_stream_ber,
        cr=frame.to_dict()["cr"],
        frame=frame.to_dict(),
    )
    if return_pyramid:
        return report, pyr_rx
    return report
