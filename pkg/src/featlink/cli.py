"""``featlink`` command-line runner.

Subcommands
-----------
ber       Monte Carlo sub-channel BER sweep over N x SNR, CSV output.
transmit  End-to-end pyramid transport over SNR x N x m x C, JSON output.
synth     Write a seeded feature pyramid and/or weight bundles.

Exit codes: 0 success, 2 config/usage error, 3 golden tolerance failure,
4 I/O error.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from . import config as cfgmod
from .metrics import ber_reports_to_csv, compare_table_iii, sweep
from .neuro.pyramid import FeaturePyramid, synth_pyramid
from .neuro.store import ContainerError
from .neuro.weights import ArchConfig, WeightBundle, init_weights

log = logging.getLogger("featlink")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_GOLDEN = 3
EXIT_IO = 4

# flag dest -> RunConfig field
_FLAG_FIELDS = {
    "seed": "seed", "out": "out", "workers": "workers", "bits": "bits_target",
    "snr": "snr_list", "n": "n_list", "m": "m_list", "c": "c_list",
    "long_run": "long_run", "weights": "weights", "pyramid": "pyramid",
    "height": "image_height", "width": "image_width", "depth": "depth",
    "frame_columns": "frame_columns", "bit_coding": "bit_coding",
    "what": "synth_what", "distribution": "distribution",
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory (stdout if omitted, except synth)")
    common.add_argument("--workers", type=int)
    common.add_argument("--snr", type=float, nargs="+", metavar="DB")
    common.add_argument("--n", type=int, nargs="+", metavar="N")
    common.add_argument("--m", type=int, nargs="+", metavar="BITS")
    common.add_argument("--c", type=int, nargs="+", metavar="CHANNELS")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="featlink", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    ber = sub.add_parser("ber", parents=[common], help="BER sweep")
    ber.add_argument("--bits", type=int, help="bits per stream per cell")
    ber.add_argument("--frame-columns", type=int, dest="frame_columns",
                     help="QPSK columns per channel draw")
    ber.add_argument("--golden", action="store_true",
                     help="compare against the embedded Table III fixture")
    ber.add_argument("--long-run", action="store_true", default=None, dest="long_run",
                     help="also verify the <1e-7 cell with >=1e8 bits")

    tx = sub.add_parser("transmit", parents=[common], help="end-to-end pyramid transport")
    tx.add_argument("--weights", help="weight bundle (manifest .json or stem)")
    tx.add_argument("--pyramid", help="pyramid container (manifest .json or stem)")
    tx.add_argument("--height", type=int)
    tx.add_argument("--width", type=int)
    tx.add_argument("--depth", type=int)
    tx.add_argument("--bit-coding", choices=("natural", "gray"), dest="bit_coding")

    sy = sub.add_parser("synth", parents=[common], help="write synthetic inputs")
    sy.add_argument("--what", choices=("pyramid", "weights", "all"))
    sy.add_argument("--height", type=int)
    sy.add_argument("--width", type=int)
    sy.add_argument("--depth", type=int)
    sy.add_argument("--distribution", choices=("normal", "uniform"))
    return parser


def resolve_config(args):
    cfg = cfgmod.RunConfig()
    if args.config:
        cfg = cfgmod.from_mapping(cfgmod.load_json(args.config), cfg)
    overrides = {}
    for dest, name in _FLAG_FIELDS.items():
        value = getattr(args, dest, None)
        if value is not None:
            overrides[name] = value
    cfg = cfgmod.from_mapping(overrides, cfg)
    return cfgmod.validate(cfg, args.command)


def _emit(text, cfg, filename):
    if cfg.out is None:
        sys.stdout.write(text)
        return
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / filename).write_text(text)
    log.info("wrote %s", out / filename)


def cmd_ber(cfg, golden=False):
    reports = sweep(cfg.grid, cfg.seed, mode="ber", bits_target=cfg.bits_target,
                    workers=cfg.workers, frame_columns=cfg.frame_columns,
                    long_run=cfg.long_run)
    _emit(ber_reports_to_csv(reports), cfg, "ber.csv")
    if not golden:
        return EXIT_OK
    failed = 0
    for report in reports:
        for check in compare_table_iii(report):
            print(check.line(), file=sys.stderr)
            failed += not check.ok
    if failed:
        print(f"golden: {failed} cell(s) outside tolerance", file=sys.stderr)
        return EXIT_GOLDEN
    return EXIT_OK


def _load_inputs(cfg):
    if cfg.pyramid:
        pyr = FeaturePyramid.load(cfg.pyramid)
    else:
        pyr = synth_pyramid(cfg.image_height, cfg.image_width, cfg.seed, cfg.distribution)
    weights = None
    if cfg.weights:
        weights = WeightBundle.load(cfg.weights)
        for n in cfg.n_list:
            for c in cfg.c_list:
                want = ArchConfig(n_antennas=n, depth=cfg.depth, feature_channels=c)
                if weights.arch != want:
                    raise cfgmod.ConfigError(
                        f"weight bundle {cfg.weights} is for {weights.arch}, "
                        f"but the grid needs {want}")
    return pyr, weights


def cmd_transmit(cfg):
    pyr, weights = _load_inputs(cfg)
    reports = sweep(cfg.grid, cfg.seed, mode="transport", workers=cfg.workers,
                    pyramid=pyr, weights=weights, depth=cfg.depth,
                    weight_seed=cfg.seed, bit_coding=cfg.bit_coding,
                    eps_singular=cfg.eps_singular)
    text = json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n"
    _emit(text, cfg, "distortion.json")
    return EXIT_OK


def cmd_synth(cfg):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.synth_what in ("pyramid", "all"):
        pyr = synth_pyramid(cfg.image_height, cfg.image_width, cfg.seed, cfg.distribution)
        digest = pyr.save(out / "pyramid", meta={"seed": cfg.seed,
                                                 "distribution": cfg.distribution})
        print(f"pyramid {digest}")
    if cfg.synth_what in ("weights", "all"):
        for n in cfg.n_list:
            for c in cfg.c_list:
                arch = ArchConfig(n_antennas=n, depth=cfg.depth, feature_channels=c)
                digest = init_weights(cfg.seed, arch).save(out / f"weights_n{n}_c{c}")
                print(f"weights_n{n}_c{c} {digest}")
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        if args.command == "ber":
            return cmd_ber(cfg, golden=args.golden)
        if args.command == "transmit":
            return cmd_transmit(cfg)
        return cmd_synth(cfg)
    except ContainerError as exc:
        print(f"featlink: bad input file: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"featlink: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"featlink: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
