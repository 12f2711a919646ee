"""Digital transport of a compressed feature map over the SVD-precoded link.

Transmit chain::

    feature (C, h, w) -> N streams -> tanh -> m-bit midrise quantizer
        -> bit packing -> QPSK -> precode

Receive chain::

    combine -> equalize -> hard-decision QPSK -> unpack -> dequantize
        -> feature (C, h, w)
"""

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import channel as chan

BIT_CODINGS = ("natural", "gray")


@dataclass(frozen=True)
class LinkConfig:
    """Shape and precision settings for one transported feature map.

    ``image_height``/``image_width`` are the source image size; the
    transported map has spatial size ``(H/16, W/16)``.
    """

    n_antennas: int = 2
    quant_bits: int = 4
    feature_channels: int = 48
    image_height: int = 256
    image_width: int = 128
    eps_singular: float = chan.DEFAULT_EPS
    bit_coding: str = "natural"

    def __post_init__(self):
        if self.n_antennas < 1:
            raise ValueError("n_antennas must be >= 1")
        if self.quant_bits < 1:
            raise ValueError("quant_bits must be >= 1")
        if self.feature_channels < 1:
            raise ValueError("feature_channels must be >= 1")
        if self.image_height % 64 or self.image_width % 64 or \
                self.image_height < 64 or self.image_width < 64:
            raise ValueError(
                f"image size {self.image_height}x{self.image_width} "
                "must be a positive multiple of 64"
            )
        if self.feature_channels % self.n_antennas:
            raise ValueError(
                f"feature_channels={self.feature_channels} is not divisible "
                f"by n_antennas={self.n_antennas}"
            )
        if self.eps_singular <= 0:
            raise ValueError("eps_singular must be positive")
        if self.bit_coding not in BIT_CODINGS:
            raise ValueError(f"bit_coding must be one of {BIT_CODINGS}")

    @property
    def map_shape(self):
        return (self.feature_channels, self.image_height // 16,
                self.image_width // 16)

    @property
    def stream_length(self):
        """L = C*H*W / (256*N) feature values per stream."""
        c, h, w = self.map_shape
        return c * h * w // self.n_antennas


@dataclass
class BitStreams:
    """Equal-length bit sequences, one row per spatial stream."""

    bits: np.ndarray
    padding_bits: int = 0

    @property
    def n_streams(self):
        return self.bits.shape[0]

    @property
    def payload_bits(self):
        return self.bits.shape[1] - self.padding_bits


def map_to_streams(p_c, cfg):
    """Split channels evenly over the antennas, channel-major then row-major."""
    p_c = np.asarray(p_c)
    if p_c.shape != cfg.map_shape:
        raise ValueError(f"expected feature map {cfg.map_shape}, got {p_c.shape}")
    return p_c.reshape(cfg.n_antennas, cfg.stream_length)


def unmap_from_streams(s, cfg):
    s = np.asarray(s)
    if s.shape != (cfg.n_antennas, cfg.stream_length):
        raise ValueError(
            f"expected streams {(cfg.n_antennas, cfg.stream_length)}, got {s.shape}"
        )
    return s.reshape(cfg.map_shape)


def activate(s):
    return np.tanh(s)


def quantize(x, m):
    """Midrise uniform quantizer on [-1, 1] with ``2**m`` cells."""
    if m < 1:
        raise ValueError("m must be >= 1")
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("cannot quantize non-finite values")
    levels = 1 << m
    idx = np.floor((x + 1.0) * (levels / 2.0))
    return np.clip(idx, 0, levels - 1).astype(np.int64)


def dequantize(index, m):
    """Cell midpoint ``-1 + (index + 0.5) * 2 / 2**m``."""
    step = 2.0 / (1 << m)
    return -1.0 + (np.asarray(index, dtype=np.float64) + 0.5) * step


def _gray(i):
    return i ^ (i >> 1)


def _gray_inverse(g, m):
    i = g.copy()
    shift = 1
    while shift < m:
        i ^= i >> shift
        shift <<= 1
    return i


def pack_bits(indices, m, bit_coding="natural"):
    """Emit ``m`` bits per index, MSB first, one row per stream.

    A single zero bit is appended to every stream when ``m * L`` is odd so
    that the streams fill whole QPSK symbols.
    """
    if bit_coding not in BIT_CODINGS:
        raise ValueError(f"bit_coding must be one of {BIT_CODINGS}")
    idx = np.atleast_2d(np.asarray(indices, dtype=np.int64))
    if idx.size and (idx.min() < 0 or idx.max() >= (1 << m)):
        raise ValueError(f"indices out of range for m={m}")
    if bit_coding == "gray":
        idx = _gray(idx)
    shifts = np.arange(m - 1, -1, -1, dtype=np.int64)
    bits = ((idx[..., None] >> shifts) & 1).astype(np.uint8)
    bits = bits.reshape(idx.shape[0], -1)
    padding = bits.shape[1] % 2
    if padding:
        bits = np.concatenate(
            [bits, np.zeros((bits.shape[0], 1), np.uint8)], axis=1)
    return BitStreams(bits=bits, padding_bits=padding)


def unpack_bits(streams, m, bit_coding="natural"):
    """Inverse of :func:`pack_bits`; returns an (N, L) index array."""
    bits = streams.bits[:, :streams.payload_bits].astype(np.int64)
    if bits.shape[1] % m:
        raise ValueError(f"{bits.shape[1]} payload bits is not a multiple of m={m}")
    bits = bits.reshape(bits.shape[0], -1, m)
    weights = 1 << np.arange(m - 1, -1, -1, dtype=np.int64)
    idx = bits @ weights
    if bit_coding == "gray":
        idx = _gray_inverse(idx, m)
    return idx


def qpsk_modulate(streams):
    """Map bit pairs to Gray QPSK, I from the first bit, scaled by 1/sqrt(N).

    Every output column has unit energy.
    """
    bits = streams.bits if isinstance(streams, BitStreams) else np.asarray(streams)
    n, nbits = bits.shape
    if nbits % 2:
        raise ValueError("stream length must be even; pad before modulating")
    b = bits.reshape(n, -1, 2).astype(np.float64)
    sym = (1.0 - 2.0 * b[..., 0]) + 1j * (1.0 - 2.0 * b[..., 1])
    return sym / np.sqrt(2.0 * n)


def hard_decide(symbols):
    """Quadrant decisions, ``(re < 0, im < 0)`` interleaved; zero decides 0."""
    symbols = np.asarray(symbols)
    out = np.empty(symbols.shape[:-1] + (2 * symbols.shape[-1],), np.uint8)
    out[..., 0::2] = symbols.real < 0
    out[..., 1::2] = symbols.imag < 0
    return out


def qpsk_demodulate(yp, ch, eps=chan.DEFAULT_EPS, padding_bits=0):
    """Hard-decision demodulation of the combined symbols ``Y'``.

    Live rows are decided after equalization; dead rows (singular value below
    ``eps``) are zeroed by the equalizer, so they are decided on the raw
    ``Y'`` instead. Positive row scaling never moves a symbol across a
    quadrant boundary, so both paths give the same decisions.
    """
    x_hat, degenerate = chan.equalize(yp, ch, eps)
    decide_on = np.where(degenerate[:, None], yp, x_hat)
    return BitStreams(bits=hard_decide(decide_on), padding_bits=padding_bits)


def compression_ratio(cfg_or_m, feature_channels=None):
    """Transmitted bits over 24-bit RGB image bits: ``m*C/6144``."""
    if feature_channels is None:
        m, c = cfg_or_m.quant_bits, cfg_or_m.feature_channels
    else:
        m, c = cfg_or_m, feature_channels
    return Fraction(m * c, 6144)


@dataclass
class FrameReport:
    """Outcome of one transported feature frame."""

    n_antennas: int
    snr_db: float
    bits_sent: int
    bit_errors: list
    per_stream_ber: list
    padding_bits: int
    degenerate_streams: list
    equivalent_snrs_db: list
    cr: Fraction
    noise: np.ndarray = field(repr=False, default=None)

    def to_dict(self):
        return {
            "per_stream_ber": self.per_stream_ber,
            "bit_errors": self.bit_errors,
            "bits_sent": self.bits_sent,
            "padding_bits": self.padding_bits,
            "degenerate_streams": self.degenerate_streams,
            "equivalent_snrs_db": self.equivalent_snrs_db,
            "cr": f"{self.cr.numerator}/{self.cr.denominator}",
        }


def transport_frame(p_c, ch, cfg, seed, frame=0):
    """Send one compressed feature map over the link.

    Parameters
    ----------
    p_c : ndarray, shape (C, H/16, W/16)
        Output of the channel-compression layer, before tanh.
    ch : ChannelRealization
    cfg : LinkConfig
    seed : int
        Keys the noise stream for this frame.

    Returns
    -------
    received : ndarray, float32, shape (C, H/16, W/16)
        Dequantized received feature, in the tanh domain.
    report : FrameReport
        ``report.noise`` holds the equivalent noise ``received - tanh(p_c)``.
    """
    if ch.n_antennas != cfg.n_antennas:
        raise ValueError(
            f"channel has {ch.n_antennas} antennas, config expects {cfg.n_antennas}"
        )
    m = cfg.quant_bits
    streams = activate(map_to_streams(np.asarray(p_c, np.float64), cfg))
    idx = quantize(streams, m)
    tx_bits = pack_bits(idx, m, cfg.bit_coding)
    x = chan.precode(qpsk_modulate(tx_bits), ch)
    yp = chan.combine(chan.transmit(x, ch, seed, frame), ch)
    rx_bits = qpsk_demodulate(yp, ch, cfg.eps_singular, tx_bits.padding_bits)

    payload = tx_bits.payload_bits
    errors = np.count_nonzero(
        rx_bits.bits[:, :payload] != tx_bits.bits[:, :payload], axis=1)
    rx_idx = unpack_bits(rx_bits, m, cfg.bit_coding)
    received = unmap_from_streams(dequantize(rx_idx, m), cfg)
    sent = unmap_from_streams(streams, cfg)
    degenerate = ch.sigma < cfg.eps_singular

    report = FrameReport(
        n_antennas=cfg.n_antennas,
        snr_db=ch.snr_db,
        bits_sent=int(payload),
        bit_errors=[int(e) for e in errors],
        per_stream_ber=[float(e) / payload for e in errors],
        padding_bits=int(tx_bits.padding_bits),
        degenerate_streams=[int(i) for i in np.flatnonzero(degenerate)],
        equivalent_snrs_db=[float(s) for s in chan.equivalent_snrs(ch)],
        cr=compression_ratio(cfg),
        noise=(received - sent).astype(np.float32),
    )
    return received.astype(np.float32), report
