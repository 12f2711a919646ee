"""Monte Carlo link BER, feature distortion and sweep reports."""

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from itertools import product

import numpy as np

from . import channel as chan
from .baseband import hard_decide
from .rng import derive_seed, keyed_rng

#: QPSK columns sent per channel draw when estimating link BER.
FRAME_COLUMNS = 32
#: Channel draws generated per keyed RNG block.
FRAMES_PER_BLOCK = 2048

CSV_COLUMNS = ("n", "snr_db", "stream", "ber", "ci95", "bits")

# Sub-channel BER of the SVD-precoded Rayleigh link, QPSK, per-column energy 1.
# Keys are (N, SNR dB); values list streams 1..N then the average. ``None``
# marks the "< 1e-7" entry.
TABLE_III = {
    (1, -5.0): [3.15e-1, 3.15e-1],
    (1, 0.0): [2.13e-1, 2.13e-1],
    (1, 5.0): [1.10e-1, 1.10e-1],
    (1, 10.0): [4.47e-2, 4.47e-2],
    (1, 15.0): [1.43e-2, 1.43e-2],
    (2, -5.0): [2.39e-1, 4.02e-1, 3.21e-1],
    (2, 0.0): [1.12e-1, 3.34e-1, 2.23e-1],
    (2, 5.0): [2.38e-2, 2.33e-1, 1.28e-1],
    (2, 10.0): [1.73e-3, 1.31e-1, 6.63e-2],
    (2, 15.0): [4.46e-5, 5.43e-2, 2.72e-2],
    (4, -5.0): [1.94e-1, 2.81e-1, 3.67e-1, 4.50e-1, 3.23e-1],
    (4, 0.0): [6.52e-2, 1.54e-1, 2.73e-1, 4.13e-1, 2.26e-1],
    (4, 5.0): [5.03e-3, 3.96e-2, 1.48e-1, 3.50e-1, 1.35e-1],
    (4, 10.0): [1.99e-5, 2.02e-3, 4.12e-2, 2.57e-1, 7.51e-2],
    (4, 15.0): [None, 7.67e-6, 3.97e-3, 1.48e-1, 3.81e-2],
}
TABLE_III_UPPER_BOUND = 1e-7
LONG_RUN_BITS = 10 ** 8

REL_TOL = 0.05
SE_TOL = 3.0


def rayleigh_qpsk_ber(snr_db):
    """Closed-form BER of Gray QPSK on a flat Rayleigh channel.

    ``0.5 * (1 - sqrt(g / (1 + g)))`` with ``g`` the mean SNR per bit.
    """
    g = 10.0 ** (np.asarray(snr_db, np.float64) / 10.0) / 2.0
    return 0.5 * (1.0 - np.sqrt(g / (1.0 + g)))


@dataclass
class BerReport:
    n_antennas: int
    snr_db: float
    per_stream_ber: list
    avg_ber: float
    bits_per_stream: int
    trials: int
    ci95_halfwidth: list
    bit_errors: list = field(default_factory=list)

    def stderr(self):
        return [c / 1.96 for c in self.ci95_halfwidth]

    def to_dict(self):
        return asdict(self)


def mean_exact(values):
    return math.fsum(values) / len(values)


def estimate_ber(n, snr_db, bits_target, seed, frame_columns=FRAME_COLUMNS):
    """Monte Carlo per-stream BER of the closed-loop link.

    Every frame draws a fresh channel and sends ``frame_columns`` random QPSK
    columns through precode -> H -> noise -> combine -> hard decision, until
    each stream has seen at least ``bits_target`` bits.

    The 95% interval comes from the spread of per-frame error rates across
    independent channel draws; bits sharing a channel draw are correlated, so
    a per-bit binomial interval would be too narrow.
    """
    if bits_target < 10 ** 4:
        raise ValueError("bits_target must be >= 1e4")
    if n < 1:
        raise ValueError("n must be >= 1")
    bits_per_frame = 2 * frame_columns
    frames = -(-int(bits_target) // bits_per_frame)
    noise_var = chan.noise_variance(snr_db, n)
    per_frame = np.empty((frames, n), np.int64)

    done = 0
    block = 0
    while done < frames:
        count = min(FRAMES_PER_BLOCK, frames - done)
        h = chan.rayleigh_matrices(keyed_rng(seed, block, "channel"), count, n)
        u, _, vh = np.linalg.svd(h)
        bits = keyed_rng(seed, block, "data").integers(
            0, 2, (count, n, bits_per_frame), dtype=np.uint8)
        b = bits.reshape(count, n, frame_columns, 2).astype(np.float64)
        xp = ((1.0 - 2.0 * b[..., 0]) + 1j * (1.0 - 2.0 * b[..., 1])) / np.sqrt(2.0 * n)
        y = h @ (vh.conj().transpose(0, 2, 1) @ xp)
        y += chan.complex_awgn(keyed_rng(seed, block, "noise"), y.shape, noise_var)
        yp = u.conj().transpose(0, 2, 1) @ y
        per_frame[done:done + count] = np.count_nonzero(hard_decide(yp) != bits, axis=2)
        done += count
        block += 1

    bits_per_stream = frames * bits_per_frame
    errors = per_frame.sum(axis=0)
    ber = errors / bits_per_stream
    if frames > 1:
        se = per_frame.std(axis=0, ddof=1) / bits_per_frame / np.sqrt(frames)
    else:
        se = np.sqrt(ber * (1 - ber) / bits_per_stream)
    per_stream = [float(x) for x in ber]
    return BerReport(
        n_antennas=int(n),
        snr_db=float(snr_db),
        per_stream_ber=per_stream,
        avg_ber=mean_exact(per_stream),
        bits_per_stream=int(bits_per_stream),
        trials=int(frames),
        ci95_halfwidth=[float(1.96 * s) for s in se],
        bit_errors=[int(e) for e in errors],
    )


@dataclass
class CellCheck:
    n_antennas: int
    snr_db: float
    stream: str
    reference: float
    estimate: float
    stderr: float
    rule: str
    ok: bool

    def line(self):
        tag = "PASS" if self.ok else ("SKIP" if self.rule == "skipped" else "FAIL")
        ref = "<1e-07" if self.reference is None else f"{self.reference:.3e}"
        return (f"{tag} N={self.n_antennas} SNR={self.snr_db:+g}dB stream={self.stream}: "
                f"est={self.estimate:.4e} ref={ref} se={self.stderr:.2e} [{self.rule}]")


def check_cell(reference, estimate, stderr, bits):
    """Apply the Table III tolerance policy to one entry; returns (rule, ok)."""
    if reference is None:
        if bits < LONG_RUN_BITS:
            return "skipped", True
        return "upper-bound", estimate < 1e-6
    if reference >= 1e-3:
        return "rel5%", abs(estimate / reference - 1.0) <= REL_TOL
    return "3se", abs(estimate - reference) <= SE_TOL * stderr


def compare_table_iii(report):
    """Check a BER report against the matching Table III row.

    Returns an empty list when the (N, SNR) pair is not in the table.
    """
    ref = TABLE_III.get((report.n_antennas, float(report.snr_db)))
    if ref is None:
        return []
    se = report.stderr()
    checks = []
    rows = [(str(i + 1), ref[i], report.per_stream_ber[i], se[i])
            for i in range(report.n_antennas)]
    if report.n_antennas > 1:
        avg_se = math.sqrt(sum(s * s for s in se)) / report.n_antennas
        rows.append(("avg", ref[-1], report.avg_ber, avg_se))
    for stream, r, est, s in rows:
        rule, ok = check_cell(r, est, s, report.bits_per_stream)
        checks.append(CellCheck(report.n_antennas, report.snr_db, stream, r, est, s, rule, ok))
    return checks


def ber_reports_to_csv(reports):
    """Render reports as CSV; floats in 6-significant-digit scientific form."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in reports:
        for i, (ber, ci) in enumerate(zip(r.per_stream_ber, r.ci95_halfwidth)):
            writer.writerow([r.n_antennas, f"{r.snr_db:g}", i + 1,
                             f"{ber:.5e}", f"{ci:.5e}", r.bits_per_stream])
    return buf.getvalue()


def ber_reports_from_csv(text):
    """Parse :func:`ber_reports_to_csv` output back into reports.

    ``trials`` and ``bit_errors`` are not part of the CSV; errors are
    recovered from ``ber * bits`` and trials is left at 0.
    """
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise ValueError(f"unexpected CSV header {reader.fieldnames}")
    grouped = {}
    for row in reader:
        key = (int(row["n"]), float(row["snr_db"]))
        grouped.setdefault(key, []).append(row)
    reports = []
    for (n, snr), rows in grouped.items():
        rows.sort(key=lambda r: int(r["stream"]))
        ber = [float(r["ber"]) for r in rows]
        bits = int(rows[0]["bits"])
        reports.append(BerReport(
            n_antennas=n, snr_db=snr, per_stream_ber=ber, avg_ber=mean_exact(ber),
            bits_per_stream=bits, trials=0,
            ci95_halfwidth=[float(r["ci95"]) for r in rows],
            bit_errors=[int(round(b * bits)) for b in ber],
        ))
    return reports


@dataclass
class DistortionReport:
    n_antennas: int
    snr_db: float
    quant_bits: int
    feature_channels: int
    per_level_mse: list
    total_mse: float
    w_stats: dict
    per_stream_ber: list
    cr: str
    frame: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def pyramid_mse(tx, rx):
    """Per-level mean squared error P2..P6 and their sum."""
    per_level = []
    for name in ("p2", "p3", "p4", "p5", "p6"):
        a = getattr(tx, name).astype(np.float64)
        b = getattr(rx, name).astype(np.float64)
        if a.shape != b.shape:
            raise ValueError(f"{name}: shape {a.shape} vs {b.shape}")
        per_level.append(float(np.mean((a - b) ** 2)))
    return per_level, math.fsum(per_level)


def noise_stats(w):
    w = np.asarray(w, np.float64)
    return {"max_abs": float(np.max(np.abs(w))), "mean": float(np.mean(w)),
            "variance": float(np.var(w))}


@dataclass(frozen=True)
class SweepGrid:
    snr_list: tuple = (-5.0, 0.0, 5.0, 10.0, 15.0)
    n_list: tuple = (1, 2, 4)
    m_list: tuple = (2, 4, 8)
    c_list: tuple = (24, 48, 96)

    def ber_cells(self):
        return [(int(n), float(s)) for n, s in product(self.n_list, self.snr_list)]

    def transport_cells(self):
        return [(float(s), int(n), int(m), int(c)) for s, n, m, c in
                product(self.snr_list, self.n_list, self.m_list, self.c_list)]


def _ber_cell(args):
    n, snr, bits, seed, frame_columns = args
    return estimate_ber(n, snr, bits, seed, frame_columns)


def _transport_cell(args):
    from .pipeline import run_transport
    return run_transport(**args)


def _run(fn, tasks, workers):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def cell_seed(master, *params):
    return derive_seed(master, *params)


def sweep(grid, seed, mode="ber", bits_target=10 ** 7, workers=1,
          frame_columns=FRAME_COLUMNS, long_run=False, **transport):
    """Run every cell of the grid.

    ``mode="ber"`` sweeps N x SNR with :func:`estimate_ber`;
    ``mode="transport"`` sweeps SNR x N x m x C through the full feature
    pipeline (``transport`` carries ``pyramid``, ``weights``, ``depth``).
    Each cell's seed is derived from the master seed and the cell parameters,
    so results do not depend on grid order or worker count.
    """
    if mode == "ber":
        tasks = []
        for n, snr in grid.ber_cells():
            bits = bits_target
            if long_run and TABLE_III.get((n, snr), [0])[0] is None:
                bits = max(bits, LONG_RUN_BITS)
            tasks.append((n, snr, bits, cell_seed(seed, "ber", n, snr), frame_columns))
        return _run(_ber_cell, tasks, workers)
    if mode == "transport":
        tasks = [dict(transport, snr_db=s, n_antennas=n, quant_bits=m,
                      feature_channels=c, seed=cell_seed(seed, "transport", s, n, m, c))
                 for s, n, m, c in grid.transport_cells()]
        return _run(_transport_cell, tasks, workers)
    raise ValueError(f"unknown sweep mode {mode!r}")
