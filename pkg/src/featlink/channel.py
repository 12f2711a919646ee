"""Closed-loop N x N MIMO channel with SVD precoding.

The channel is Rayleigh block fading: every entry of ``H`` is a circularly
symmetric complex Gaussian with variance ``1/N`` so that
``E[||H x||^2] = ||x||^2`` for any transmit vector ``x``. The transmitter
precodes with ``V`` and the receiver combines with ``U^H``, which turns the
link into ``N`` parallel scalar sub-channels with gains equal to the singular
values of ``H``.

Conventions
-----------
* Symbol energy per MIMO column is ``E_s = 1``.
* ``noise_var`` is the total complex noise variance per receive antenna,
  half of it on each of I and Q, and ``SNR = E_s / (N * noise_var)``.
"""

from dataclasses import dataclass

import numpy as np

from .rng import keyed_rng

#: Equivalent SNR reported for a sub-channel with a zero singular value.
SNR_FLOOR_DB = -300.0

#: Singular values below this are treated as dead sub-channels.
DEFAULT_EPS = 1e-12


@dataclass(frozen=True)
class ChannelRealization:
    """One block-fading channel draw together with its SVD.

    Attributes
    ----------
    h : ndarray, complex, shape (N, N)
    u : ndarray, complex, shape (N, N)
        Left singular vectors (receive combiner is ``u.conj().T``).
    sigma : ndarray, float, shape (N,)
        Singular values in descending order.
    v : ndarray, complex, shape (N, N)
        Right singular vectors (transmit precoder).
    noise_var : float
        Complex noise variance per receive antenna.
    snr_db : float
    """

    h: np.ndarray
    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray
    noise_var: float
    snr_db: float

    @property
    def n_antennas(self):
        return self.h.shape[0]

    @classmethod
    def from_matrix(cls, h, snr_db):
        """Build a realization around a given channel matrix."""
        h = np.asarray(h, dtype=np.complex128)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ValueError(f"channel matrix must be square, got {h.shape}")
        if not np.all(np.isfinite(h)):
            raise ValueError("channel matrix has non-finite entries")
        u, s, vh = np.linalg.svd(h)
        return cls(
            h=h,
            u=u,
            sigma=s,
            v=vh.conj().T,
            noise_var=noise_variance(snr_db, h.shape[0]),
            snr_db=float(snr_db),
        )

    def to_dict(self):
        """JSON-friendly audit record (complex entries as [re, im] pairs)."""

        def cplx(a):
            return [[[float(z.real), float(z.imag)] for z in row] for row in a]

        return {
            "n_antennas": self.n_antennas,
            "snr_db": self.snr_db,
            "noise_var": self.noise_var,
            "h": cplx(self.h),
            "sigma": [float(x) for x in self.sigma],
        }


def noise_variance(snr_db, n):
    """Per-antenna complex noise variance for unit symbol energy."""
    return 10.0 ** (-float(snr_db) / 10.0) / n


def rayleigh_matrices(rng, count, n):
    """Draw ``count`` i.i.d. N x N Rayleigh matrices, entry variance 1/N."""
    scale = np.sqrt(0.5 / n)
    re = rng.standard_normal((count, n, n))
    im = rng.standard_normal((count, n, n))
    return (re + 1j * im) * scale


def complex_awgn(rng, shape, noise_var):
    """Circularly symmetric complex Gaussian noise of total variance noise_var."""
    scale = np.sqrt(noise_var / 2.0)
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) * scale


def draw_channel(n, snr_db, rng_seed, frame=0):
    """Draw the channel for one frame.

    The matrix comes from the ``channel`` stream keyed by
    ``(rng_seed, frame)``, so it is independent of the noise drawn for the
    same frame.
    """
    if n < 1:
        raise ValueError(f"need at least one antenna, got {n}")
    if not np.isfinite(snr_db):
        raise ValueError(f"snr_db must be finite, got {snr_db}")
    rng = keyed_rng(rng_seed, frame, "channel")
    h = rayleigh_matrices(rng, 1, n)[0]
    return ChannelRealization.from_matrix(h, snr_db)


def equivalent_snrs(ch):
    """Per-sub-channel SNR in dB, ``lambda_i^2 / (N * noise_var)``.

    Dead sub-channels (zero singular value) are reported as ``SNR_FLOOR_DB``.
    """
    lam2 = ch.sigma.astype(np.float64) ** 2
    denom = ch.n_antennas * ch.noise_var
    out = np.full(lam2.shape, SNR_FLOOR_DB)
    live = lam2 > 0
    with np.errstate(divide="ignore"):
        out[live] = 10.0 * np.log10(lam2[live] / denom)
    return np.maximum(out, SNR_FLOOR_DB)


def _check_rows(x, ch, what):
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[0] != ch.n_antennas or x.shape[1] < 1:
        raise ValueError(
            f"{what} must be {ch.n_antennas} x k with k >= 1, got {x.shape}"
        )
    return x


def precode(xp, ch):
    """``X = V X'``."""
    xp = _check_rows(xp, ch, "precoder input")
    return ch.v @ xp


def transmit(x, ch, rng_seed, frame=0):
    """``Y = H X + N`` with noise from the ``noise`` stream of ``(rng_seed, frame)``."""
    x = _check_rows(x, ch, "transmit block")
    rng = keyed_rng(rng_seed, frame, "noise")
    return ch.h @ x + complex_awgn(rng, x.shape, ch.noise_var)


def combine(y, ch):
    """``Y' = U^H Y``."""
    y = _check_rows(y, ch, "received block")
    return ch.u.conj().T @ y


def equalize(yp, ch, eps=DEFAULT_EPS):
    """Scale row ``i`` of ``Y'`` by ``1 / lambda_i``.

    Rows whose singular value is below ``eps`` are zeroed instead.

    Returns
    -------
    x_hat : ndarray, complex, shape (N, k)
    degenerate : ndarray, bool, shape (N,)
        True for rows that were zeroed.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    yp = _check_rows(yp, ch, "combined block")
    degenerate = ch.sigma < eps
    gain = np.zeros_like(ch.sigma)
    gain[~degenerate] = 1.0 / ch.sigma[~degenerate]
    return yp * gain[:, None], degenerate
