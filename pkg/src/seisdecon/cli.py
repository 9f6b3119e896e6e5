"""Command line pipeline: generate -> train -> eval / baseline -> deconvolve -> plot.

Exit codes: 0 ok, 2 usage, 3 data or format problem, 4 numeric failure.
"""

import argparse
import logging
import math
import os
import sys

import numpy as np

from . import formats, plotting
from .errors import (ConfigError, FormatError, InvalidArgumentError, NumericError,
                     SeisDeconError)
from .forward import DEFAULT_DT, DEFAULT_FREQ, DEFAULT_HALF_WIDTH, NoiseSpec, build_operator, make_ricker
from .metrics import score
from .processing import DEFAULT_AGC_WINDOW, AgcConfig, agc, mute_and_pad, reassemble
from .solvers import SolverConfig, solve_records
from .synthetic import DatasetRecord, ReflectivitySpec, denormalize, make_dataset, normalize
from .unrolled import ModelConfig, TrainConfig, UnrolledModel, evaluate, train

log = logging.getLogger("seisdecon")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


def _snr(text):
    if text.lower() in ("none", "noiseless", "inf"):
        return None
    value = float(text)
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"SNR must be finite or 'none', got {text}")
    return value


def _add_physics(p):
    p.add_argument("--freq", type=float, default=DEFAULT_FREQ, help="Ricker peak frequency (Hz)")
    p.add_argument("--dt", type=float, default=DEFAULT_DT, help="sampling interval (s)")
    p.add_argument("--half-width", type=int, default=DEFAULT_HALF_WIDTH,
                   help="wavelet half length in samples")


def _operator(args, n):
    return build_operator(make_ricker(args.freq, args.dt, args.half_width), n)


def _data_shape(records):
    shapes = {r.x.shape for r in records}
    if len(shapes) != 1:
        raise ConfigError(f"dataset mixes record shapes {sorted(shapes)}")
    return shapes.pop()


def _report_rows(report):
    rows = list(report.rows())
    agg = report.aggregate()
    rows.append(("mean", agg["mse"], agg["correlation"], agg["quality_db"]))
    return rows


def _write_traces(path, record, estimate, column=0):
    x = record.x[:, column]
    est = estimate[:, column]
    rows = [(i, x[i], est[i], est[i] - x[i]) for i in range(len(x))]
    plotting.write_table(path, plotting.TRACE_COLUMNS, rows)


def cmd_generate(args):
    spec = ReflectivitySpec(n=args.n, m=args.m,
                            sparsity_range=(args.sparsity_min, args.sparsity_max),
                            amplitude_range=(args.amp_min, args.amp_max),
                            min_gap=args.min_gap, lateral_coherence=args.lateral,
                            seed=args.seed)
    noise = NoiseSpec(snr_db=args.snr, seed=args.seed)
    records = make_dataset(spec, noise, args.count, _operator(args, args.n))
    formats.save_dataset(args.out, records)
    log.info("wrote %d records to %s", len(records), args.out)


def cmd_train(args):
    records = formats.load_dataset(args.data)
    if not records:
        raise ConfigError(f"{args.data} holds no records")
    n, m = _data_shape(records)
    if n < args.kappa or (args.dims == 2 and m < args.kappa):
        raise ConfigError(f"records of shape {(n, m)} are smaller than kappa={args.kappa}")
    cfg = ModelConfig(kappa=args.kappa, K=args.k, dims=args.dims, hidden=args.hidden,
                      groups=args.groups, final_relu=args.final_relu,
                      final_norm=not args.no_final_norm)
    physics = formats.Physics(args.freq, args.dt, args.half_width, n)
    model = UnrolledModel(cfg, seed=args.seed, eta_raw_init=args.eta_init)
    tcfg = TrainConfig(epochs=args.epochs, batch_size=args.batch, lr=args.lr, seed=args.seed,
                       schedule=args.schedule, lr_min=args.lr_min)

    def progress(epoch, loss, step):
        log.info("epoch %d  loss %.6g  step %.5f", epoch, loss, step)

    history, opt = train(model, records, physics.operator(), tcfg, callback=progress)
    formats.save_model(args.out, model, physics, opt)
    hist_path = args.history or args.out + ".history.csv"
    plotting.write_table(hist_path, plotting.HISTORY_COLUMNS, history.rows())
    if args.figure:
        rows = history.rows()
        plotting.training_curves(*zip(*rows), args.figure)


def cmd_eval(args):
    records = formats.load_dataset(args.data)
    model, physics, _ = formats.load_model(args.model)
    n, m = _data_shape(records)
    if n != physics.n:
        raise ConfigError(f"model was trained for n={physics.n}, data has n={n}")
    op = physics.operator()
    report = evaluate(model, records, op)
    plotting.write_table(args.out, plotting.REPORT_COLUMNS, _report_rows(report))
    if args.traces_out or args.figure:
        est = denormalize(model.predict(records[:1], op)[0], records[0].mag)
        traces = args.traces_out or os.path.splitext(args.figure)[0] + ".traces.csv"
        _write_traces(traces, records[0], est)
        if args.figure:
            plotting.plot_table(traces, args.figure)


def cmd_baseline(args):
    records = formats.load_dataset(args.data)
    n, _ = _data_shape(records)
    op = _operator(args, n)
    cfg = SolverConfig(gamma=args.gamma, max_iters=args.iters, tol=args.tol,
                       variant=args.solver)
    estimates = solve_records(records, op, cfg)
    report = score((denormalize(xh, r.mag), r.x) for r, xh in zip(records, estimates))
    plotting.write_table(args.out, plotting.REPORT_COLUMNS, _report_rows(report))
    if args.figure:
        traces = os.path.splitext(args.figure)[0] + ".traces.csv"
        _write_traces(traces, records[0], denormalize(estimates[0], records[0].mag))
        plotting.plot_table(traces, args.figure)


def _read_grid(path):
    if path.endswith(".npy"):
        grid = np.load(path)
        if grid.ndim == 1:
            grid = grid[:, None]
        return [grid.astype(float)]
    return [denormalize(r.y, r.mag) for r in formats.load_dataset(path)]


def cmd_deconvolve(args):
    model, physics, _ = formats.load_model(args.model)
    op = physics.operator()
    grids = _read_grid(args.traces)
    out_records = []
    for grid in grids:
        patch_m = args.patch_m or (grid.shape[1] if model.cfg.dims == 1 else physics.n)
        if model.cfg.dims == 2 and patch_m < model.cfg.kappa:
            raise ConfigError(f"patch width {patch_m} smaller than kappa={model.cfg.kappa}")
        patches, layout = mute_and_pad(grid, physics.n, patch_m)
        recon = []
        for tile in patches:
            if not np.any(tile):
                recon.append(np.zeros_like(tile))
                continue
            y, mag = normalize(tile)
            rec = DatasetRecord(x=np.zeros_like(y), y=y, mag=mag)
            recon.append(denormalize(model.predict([rec], op)[0], mag))
        x_hat = reassemble(recon, layout)
        if args.agc_window:
            window = min(args.agc_window, x_hat.shape[0] - (x_hat.shape[0] + 1) % 2)
            x_hat = agc(x_hat, AgcConfig(window=window))
        out_records.append((x_hat, grid))
    if args.out.endswith(".npy"):
        np.save(args.out, out_records[0][0])
    else:
        recs = []
        for x_hat, grid in out_records:
            y, mag = normalize(grid) if np.any(grid) else (grid, 1.0)
            recs.append(DatasetRecord(x=x_hat, y=y, mag=mag))
        formats.save_dataset(args.out, recs)
    if args.figure:
        plotting.section_image(out_records[0][0], args.figure, title="reconstruction")


def cmd_plot(args):
    plotting.plot_table(args.report, args.out)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="seisdecon", description="Sparse seismic deconvolution toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="synthesize a (reflectivity, trace) dataset")
    p.add_argument("--n", type=int, default=352)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--snr", type=_snr, default=None, help="dB, or 'none' for noiseless")
    p.add_argument("--sparsity-min", type=int, default=3)
    p.add_argument("--sparsity-max", type=int, default=40)
    p.add_argument("--amp-min", type=float, default=0.1)
    p.add_argument("--amp-max", type=float, default=1.0)
    p.add_argument("--min-gap", type=int, default=3)
    p.add_argument("--lateral", type=int, default=1, help="spike jitter between traces")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _add_physics(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train an unrolled network")
    p.add_argument("--data", required=True)
    p.add_argument("--k", type=int, default=5, help="number of unrolled blocks")
    p.add_argument("--kappa", type=int, choices=(5, 7), default=5)
    p.add_argument("--dims", type=int, choices=(1, 2), default=1)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--schedule", choices=("constant", "cosine"), default="constant",
                   help="learning-rate schedule over the epochs")
    p.add_argument("--lr-min", type=float, default=0.0, help="final rate for --schedule cosine")
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--groups", type=int, default=8)
    p.add_argument("--eta-init", type=float, default=0.0)
    p.add_argument("--final-relu", action="store_true",
                   help="keep the ReLU after the single-channel layer")
    p.add_argument("--no-final-norm", action="store_true",
                   help="drop the GroupNorm after the single-channel layer")
    p.add_argument("--out", required=True)
    p.add_argument("--history", help="per-epoch CSV (default: <out>.history.csv)")
    p.add_argument("--figure", help="training-curve image")
    _add_physics(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--traces-out", help="CSV of the first record's first trace")
    p.add_argument("--figure", help="trace/residual overlay image")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("baseline", help="score a proximal-gradient solver")
    p.add_argument("--data", required=True)
    p.add_argument("--solver", choices=("ista", "fista", "gd_l2"), default="ista")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--iters", type=int, default=1000)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--out", required=True)
    p.add_argument("--figure")
    _add_physics(p)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("deconvolve", help="reconstruct a field section")
    p.add_argument("--traces", required=True, help=".npy grid or dataset file")
    p.add_argument("--model", required=True)
    p.add_argument("--agc-window", type=int, default=DEFAULT_AGC_WINDOW,
                   help="odd window in samples; 0 disables AGC")
    p.add_argument("--patch-m", type=int, default=0)
    p.add_argument("--out", required=True, help=".npy or dataset file")
    p.add_argument("--figure")
    p.set_defaults(func=cmd_deconvolve)

    p = sub.add_parser("plot", help="render a report CSV")
    p.add_argument("--report", required=True)
    p.add_argument("--out", required=True, help=".svg/.png image or .csv series")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (FormatError, ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InvalidArgumentError, SeisDeconError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
