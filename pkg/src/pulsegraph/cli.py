"""Command-line entry point: ``pulsegraph <command> [options]``."""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import augment, graph, synth
from .baselines import RoiTrace, chrom_signal, pos_signal
from .config import ConfigError, RunConfig, dump_config, load_config
from .metrics import bland_altman, compute_metrics, write_bland_altman, write_metrics
from .signal import (HR_BAND_HZ, BvpSeries, DegeneratePoincareError, InsufficientBeatsError,
                     detect_peaks, estimate_hr, hrv_metrics)
from .tensorio import load_dataset, load_params, read_tensor, save_params, write_tensor

log = logging.getLogger("pulsegraph")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="RNG seed (overrides the config file)")
    p.add_argument("--config", type=Path, default=None, help="INI run configuration")
    p.add_argument("-v", "--verbose", action="store_true")


def _band(p):
    p.add_argument("--lo-hz", type=float, default=HR_BAND_HZ[0])
    p.add_argument("--hi-hz", type=float, default=HR_BAND_HZ[1])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pulsegraph", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    _common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--T", type=int, default=60)
    p.add_argument("--H", type=int, default=32)
    p.add_argument("--W", type=int, default=32)
    p.add_argument("--fps", type=float, default=30.0)
    p.add_argument("--hr-min", type=float, default=72.0)
    p.add_argument("--hr-max", type=float, default=120.0)
    p.add_argument("--pulse-amplitude", type=float, default=0.02)
    p.add_argument("--drift", type=float, default=0.01)
    p.add_argument("--noise-std", type=float, default=0.01)

    p = sub.add_parser("tcm-spectrum", help="analytic vs FFT spectrum of a TCM-mixed sinusoid pair")
    _common(p)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--T", type=int, default=180)
    p.add_argument("--fps", type=float, default=30.0)
    p.add_argument("--f1", type=float, default=1.2)
    p.add_argument("--f2", type=float, default=2.0)
    p.add_argument("--a1", type=float, default=1.0)
    p.add_argument("--a2", type=float, default=1.0)
    p.add_argument("--phi1", type=float, default=0.0)
    p.add_argument("--phi2", type=float, default=0.0)
    p.add_argument("--s", type=int, default=None, help="1-based start of the replaced segment")
    p.add_argument("--L", type=int, default=None, help="replaced segment length")
    p.add_argument("--no-mask", action="store_true", help="spectrum without augmentation")
    p.add_argument("--n-bins", type=int, default=None, help="FFT grid size (default 8*T)")

    p = sub.add_parser("graph-dump", help="write the temporal graph edges as CSV")
    _common(p)
    p.add_argument("--T", type=int, default=180)
    p.add_argument("--P", type=int, default=None)
    p.add_argument("--F", type=int, default=None)
    p.add_argument("--delta-min", type=int, default=None)
    p.add_argument("--delta-max", type=int, default=None)
    p.add_argument("--out", type=Path, default=None, help="edge CSV (stdout if omitted)")

    p = sub.add_parser("train", help="train the model on a dataset")
    _common(p)
    p.add_argument("--dataset", type=Path)
    p.add_argument("--out", type=Path, help="checkpoint directory")
    p.add_argument("--steps", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--sigma-scale", type=float, help="multiplier on the MPOS blur sigma-from-k rule")
    p.add_argument("--timing", action="store_true", help="record wall-clock seconds in history.csv")

    p = sub.add_parser("predict", help="run a checkpoint over a dataset")
    _common(p)
    p.add_argument("--checkpoint", type=Path)
    p.add_argument("--dataset", type=Path)
    p.add_argument("--out", type=Path, help="directory receiving <id>.rptf predictions")

    p = sub.add_parser("eval", help="HR metrics of predictions against the dataset ground truth")
    _common(p)
    _band(p)
    p.add_argument("--pred", type=Path)
    p.add_argument("--dataset", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--bland-altman", type=Path, default=None)

    p = sub.add_parser("baseline", help="POS/CHROM HR metrics on a dataset")
    _common(p)
    _band(p)
    p.add_argument("--method", choices=("pos", "chrom"), required=True)
    p.add_argument("--dataset", type=Path)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("hrv", help="mean IBI, SDNN and SD1/SD2 per clip")
    _common(p)
    p.add_argument("--dataset", type=Path)
    p.add_argument("--pred", type=Path, default=None, help="also analyse predictions in this directory")
    p.add_argument("--out", type=Path, required=True)
    return parser


def _run_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    return cfg.with_seed(args.seed) if args.seed is not None else cfg


def _path(args, cfg: RunConfig, attr: str, key: str | None = None) -> Path:
    val = getattr(args, attr, None)
    if val is None:
        val = cfg.paths.get(key or attr)
    if val is None:
        raise ValueError(f"--{attr} is required (or set [paths] {key or attr})")
    return Path(val)


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def cmd_synth(args, cfg: RunConfig) -> None:
    seed = cfg.train.seed if args.seed is None else args.seed
    base = synth.SynthConfig(T=args.T, H=args.H, W=args.W, fps=args.fps,
                             pulse_amplitude=args.pulse_amplitude, illum_drift_amp=args.drift,
                             noise_std=args.noise_std)
    synth.gen_dataset(args.n, synth.DatasetSpec(base, (args.hr_min, args.hr_max)), seed, args.out)


def cmd_tcm_spectrum(args, cfg: RunConfig) -> None:
    sig1 = augment.SineSpec(args.a1, args.f1, args.phi1)
    sig2 = augment.SineSpec(args.a2, args.f2, args.phi2)
    mask = None
    if not args.no_mask:
        if args.s is None or args.L is None:
            seed = cfg.train.seed if args.seed is None else args.seed
            rng = np.random.default_rng(seed)
            mask = augment.sample_tcm(args.T, replace(cfg.train.tcm, p=1.0), rng)
        if args.L is not None:
            mask = augment.TemporalMask(args.T, args.s if args.s is not None else mask.s, args.L)
        elif args.s is not None:
            mask = augment.TemporalMask(args.T, args.s, mask.L)
    n_bins = args.n_bins or 8 * args.T
    rows = augment.emit_spectrum_csv(args.out, sig1, sig2, mask, args.T, args.fps, n_bins)
    dev = max(abs(a - b) for _, a, b in rows)
    desc = "none" if mask is None else f"s={mask.s} L={mask.L}"
    print(f"mask {desc}; {len(rows)} bins; max |analytic - fft| = {dev:.3e}")


def cmd_graph_dump(args, cfg: RunConfig) -> None:
    m = cfg.model
    pick = lambda a, d: d if a is None else a
    g = graph.build_graph(args.T, pick(args.P, m.P), pick(args.F, m.F),
                          pick(args.delta_min, m.delta_min), pick(args.delta_max, m.delta_max))
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["target", "source", "relation"])
        w.writerows(g.edges())
    finally:
        if args.out:
            out.close()
    print("# degree_stats: relation,min,max,mean")
    for rel, s in graph.degree_stats(g).items():
        print(f"# {rel},{s['min']:g},{s['max']:g},{s['mean']:.6g}")


def cmd_train(args, cfg: RunConfig) -> None:
    from .nn.train import train, write_history

    hyper = cfg.train
    overrides = {k: getattr(args, k) for k in ("steps", "lr", "batch") if getattr(args, k) is not None}
    hyper = replace(hyper, **overrides)
    if args.sigma_scale is not None:
        cfg = RunConfig(replace(cfg.model, sigma_scale=args.sigma_scale), cfg.train, cfg.paths)
    dataset = _path(args, cfg, "dataset")
    out = _path(args, cfg, "out")
    params, history = train(dataset, cfg.model, hyper, record_time=args.timing)
    save_params(out, params)
    (out / "config.ini").write_text(dump_config(RunConfig(cfg.model, hyper, {})))
    write_history(out / "history.csv", history)
    print(f"trained {hyper.steps} steps; final loss {history[-1]['loss']:.4f}" if history else "no steps run")


def cmd_predict(args, cfg: RunConfig) -> None:
    from .nn.train import predict

    ckpt = _path(args, cfg, "checkpoint")
    run = load_config(ckpt / "config.ini")
    params = load_params(ckpt)
    records = load_dataset(_path(args, cfg, "dataset"))
    out = _path(args, cfg, "out", "predictions")
    out.mkdir(parents=True, exist_ok=True)
    for cid, bvp in predict(records, run.model, params).items():
        write_tensor(out / f"{cid}.rptf", bvp.samples)
    print(f"wrote {len(records)} predictions to {out}")


def _hr_pairs(records, signals, lo, hi):
    ids, gt, pred = [], [], []
    for r in records:
        ids.append(r.clip_id)
        gt.append(estimate_hr(r.bvp, lo, hi))
        pred.append(estimate_hr(signals[r.clip_id], lo, hi))
        if r.hr_bpm is not None and abs(gt[-1] - r.hr_bpm) > 6.0:
            log.warning("clip %s: GT BVP HR %.1f disagrees with manifest %.1f", r.clip_id, gt[-1], r.hr_bpm)
    return ids, gt, pred


def _load_predictions(pred_dir: Path, records) -> dict[str, BvpSeries]:
    out = {}
    for r in records:
        path = pred_dir / f"{r.clip_id}.rptf"
        if not path.exists():
            raise FileNotFoundError(f"missing prediction for clip {r.clip_id}: {path}")
        out[r.clip_id] = BvpSeries(read_tensor(path), r.bvp.fps)
    return out


def cmd_eval(args, cfg: RunConfig) -> None:
    records = load_dataset(_path(args, cfg, "dataset"))
    preds = _load_predictions(_path(args, cfg, "pred", "predictions"), records)
    ids, gt, pred = _hr_pairs(records, preds, args.lo_hz, args.hi_hz)
    report = compute_metrics(gt, pred, ids)
    write_metrics(args.out, report)
    if args.bland_altman:
        write_bland_altman(args.bland_altman, bland_altman(gt, pred))
    print(f"MAE {report.mae_bpm:.3f} bpm, RMSE {report.rmse_bpm:.3f} bpm over {len(ids)} clips")


def cmd_baseline(args, cfg: RunConfig) -> None:
    records = load_dataset(_path(args, cfg, "dataset"))
    method = pos_signal if args.method == "pos" else chrom_signal
    signals = {}
    for r in records:
        trace = RoiTrace(synth.skin_trace(np.asarray(r.frames, dtype=np.float64)), r.bvp.fps)
        signals[r.clip_id] = method(trace)
    ids, gt, pred = _hr_pairs(records, signals, args.lo_hz, args.hi_hz)
    report = compute_metrics(gt, pred, ids)
    write_metrics(args.out, report)
    print(f"{args.method}: MAE {report.mae_bpm:.3f} bpm over {len(ids)} clips")


def _hrv_row(cid, source, bvp: BvpSeries, min_sep: int):
    peaks = detect_peaks(bvp, min_sep)
    try:
        m = hrv_metrics(peaks, bvp.fps)
        return [cid, source, len(peaks), repr(m.mean_ibi_ms), repr(m.sdnn_ms), repr(m.sd1_ms),
                repr(m.sd2_ms), repr(m.sd1_sd2), ""]
    except DegeneratePoincareError as exc:
        return [cid, source, len(peaks), repr(exc.mean_ibi_ms), repr(exc.sdnn_ms), "", "", "", str(exc)]
    except InsufficientBeatsError as exc:
        return [cid, source, len(peaks), "", "", "", "", "", str(exc)]


def cmd_hrv(args, cfg: RunConfig) -> None:
    records = load_dataset(_path(args, cfg, "dataset"))
    preds = _load_predictions(args.pred, records) if args.pred else {}
    rows = []
    for r in records:
        dmin, _ = graph.scale_periodicity(cfg.model.delta_min, cfg.model.delta_max, r.bvp.fps)
        rows.append(_hrv_row(r.clip_id, "gt", r.bvp, dmin))
        if r.clip_id in preds:
            rows.append(_hrv_row(r.clip_id, "pred", preds[r.clip_id], dmin))
    _write_rows(args.out, ["clip_id", "source", "n_peaks", "mean_ibi_ms", "sdnn_ms", "sd1_ms",
                           "sd2_ms", "sd1_sd2", "note"], rows)
    print(f"wrote HRV for {len(records)} clips to {args.out}")


COMMANDS = {
    "synth": cmd_synth, "tcm-spectrum": cmd_tcm_spectrum, "graph-dump": cmd_graph_dump,
    "train": cmd_train, "predict": cmd_predict, "eval": cmd_eval,
    "baseline": cmd_baseline, "hrv": cmd_hrv,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _run_config(args)
        COMMANDS[args.command](args, cfg)
    except (ConfigError, ValueError, OSError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
