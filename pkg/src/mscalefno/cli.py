"""Command-line entry point: ``mscalefno {gen,train,eval,spectrum,count}``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import load_checkpoint, model_kind, read_manifest, save_checkpoint
from .config import ConfigError, ExperimentConfig
from .data import PRESETS, SampleSet, SingularSystemError, build_dataset
from .fno import count_parameters, init_params, parameter_breakdown
from .mscale import MscaleParams, branch_contributions, init_mscale, mscale_count
from .spectral import max_modes
from .training import CSV_HEADER, NonFiniteGradientError, predict, sample_errors, train

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


# -- helpers --------------------------------------------------------------------------


def _load_dataset(path: str | Path) -> SampleSet:
    path = Path(path)
    if not (path / "dataset.json").is_file() or not (path / "dataset.bin").is_file():
        raise CliError(f"dataset not found: {path}", EXIT_DATA)
    try:
        return SampleSet.load(path)
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read dataset {path}: {exc}", EXIT_DATA) from exc


def _load_model(path: str | Path):
    stem = Path(path)
    if stem.suffix in (".json", ".bin"):
        stem = stem.with_suffix("")
    manifest = stem.with_name(stem.name + ".json")
    if not manifest.is_file():
        raise CliError(f"checkpoint not found: {manifest}", EXIT_DATA)
    try:
        return load_checkpoint(stem)
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read checkpoint {manifest}: {exc}", EXIT_DATA) from exc


def _check_compatible(model, data: SampleSet) -> None:
    if model.config.k_max > max_modes(data.n_points):
        raise CliError(
            f"grid of {data.n_points} points cannot carry k_max={model.config.k_max} modes",
            EXIT_DATA,
        )


def _dataset_for(cfg: ExperimentConfig) -> SampleSet:
    if cfg.dataset is not None:
        return _load_dataset(cfg.dataset)
    return build_dataset(cfg.preset, cfg.data_seed, cfg.counts, M=cfg.M, L=cfg.L)


def build_model(cfg: ExperimentConfig):
    if cfg.kind == "mscale-fno":
        return init_mscale(cfg.fno, cfg.n_branches, cfg.scales, cfg.model_seed)
    return init_params(cfg.fno, cfg.model_seed)


def count_breakdown(cfg: ExperimentConfig) -> dict[str, int]:
    """Per-section parameter counts; sums to the model total."""
    parts = parameter_breakdown(cfg.fno)
    if cfg.kind == "normal-fno":
        return parts
    n = cfg.n_branches
    out = {name: n * value for name, value in parts.items()}
    out["scales"] = n
    out["weights"] = n
    return out


def total_parameters(cfg: ExperimentConfig) -> int:
    if cfg.kind == "mscale-fno":
        return mscale_count(cfg.fno, cfg.n_branches)
    return count_parameters(cfg.fno)


def _fmt(value: float) -> str:
    return repr(float(value))


# -- spectra --------------------------------------------------------------------------


@dataclass
class SpectrumReport:
    """One-sided DFTs (complex) of a target, a prediction and optional branch terms."""

    target: np.ndarray
    prediction: np.ndarray
    branches: list[np.ndarray] = field(default_factory=list)

    @property
    def modes(self) -> np.ndarray:
        return np.arange(self.target.shape[0])

    def header(self) -> list[str]:
        return ["mode", "target", "prediction"] + [f"branch_{i}" for i in range(len(self.branches))]

    def rows(self):
        columns = [np.abs(c) for c in (self.target, self.prediction, *self.branches)]
        for k in self.modes:
            yield [str(k)] + [_fmt(c[k]) for c in columns]

    def write_csv(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.header())
            writer.writerows(self.rows())


def spectrum_report(model, data: SampleSet, sample: int, with_branches: bool = False) -> SpectrumReport:
    if with_branches and not isinstance(model, MscaleParams):
        raise ValueError("branch spectra are only defined for mscale-fno models")
    if not 0 <= sample < len(data):
        raise IndexError(f"sample {sample} outside dataset of {len(data)}")
    pred = predict(model, data, [sample])[0]
    report = SpectrumReport(np.fft.rfft(data.targets[sample]), np.fft.rfft(pred))
    if with_branches:
        parts = branch_contributions(model, data.grid[:, None], data.inputs[sample][None, :, None])
        report.branches = [np.fft.rfft(p[0, :, 0]) for p in parts]
    return report


# -- commands -------------------------------------------------------------------------


def cmd_gen(args) -> int:
    if args.preset not in PRESETS:
        raise CliError(f"unknown preset {args.preset!r}; valid presets: {', '.join(PRESETS)}", EXIT_CONFIG)
    counts = tuple(int(c) for c in args.counts.split(",")) if args.counts else None
    try:
        data = build_dataset(args.preset, args.seed, counts, M=args.M, L=args.L)
    except SingularSystemError as exc:
        raise CliError(str(exc), EXIT_NUMERIC) from exc
    except ValueError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from exc
    try:
        data.save(args.out)
    except OSError as exc:
        raise CliError(f"cannot write dataset to {args.out}: {exc}", EXIT_DATA) from exc
    sizes = " / ".join(f"{k}={len(v)}" for k, v in data.splits.items())
    print(f"wrote {len(data)} samples on a {data.n_points}-point grid to {args.out} ({sizes})")
    return EXIT_OK


def _load_config(path) -> ExperimentConfig:
    if not Path(path).is_file():
        raise CliError(f"config not found: {path}", EXIT_CONFIG)
    try:
        return ExperimentConfig.load(path)
    except ConfigError as exc:
        raise CliError(f"config error: {exc}", EXIT_CONFIG) from exc


def cmd_train(args) -> int:
    cfg = _load_config(args.config)
    if args.out:
        cfg.output_dir = args.out
    if args.epochs is not None:
        cfg.train = type(cfg.train)(**{**cfg.train.__dict__, "epochs": args.epochs})
    data = _dataset_for(cfg)
    model = build_model(cfg)
    _check_compatible(model, data)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(cfg.to_text())

    metrics_path = out / "metrics.csv"
    with metrics_path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)

        def log(record):
            writer.writerow(record.row())
            fh.flush()
            if not args.quiet:
                print(
                    f"epoch {record.epoch:4d}  train {record.train_loss:.4e}  "
                    f"val {record.val_err:.4e}  test {record.test_err:.4e}  ({record.seconds:.1f}s)"
                )

        try:
            best, records = train(model, data, cfg.train, on_epoch=log)
        except (NonFiniteGradientError, FloatingPointError) as exc:
            raise CliError(f"numerical failure: {exc}", EXIT_NUMERIC) from exc

    save_checkpoint(best, out / "best")
    save_checkpoint(model, out / "final")
    best_row = min(records, key=lambda r: (r.val_err, r.epoch)) if records else None
    train_err = float(np.mean(sample_errors(model, data, "train")))
    manifest = {
        "kind": cfg.kind,
        "config_sha256": cfg.digest(),
        "model_seed": cfg.model_seed,
        "train_seed": cfg.train.seed,
        "dataset": cfg.dataset,
        "dataset_preset": cfg.preset,
        "dataset_seed": cfg.data_seed if cfg.preset else None,
        "activation": cfg.fno.activation,
        "num_parameters": model.num_parameters(),
        "epochs": len(records),
        "model_selection": "best validation error (latest model when no validation split)",
        "best_epoch": best_row.epoch if best_row else None,
        "best_val_err": best_row.val_err if best_row else None,
        "final_train_err": train_err,
        "version": __version__,
    }
    (out / "run.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"parameters: {model.num_parameters()}")
    print(f"wrote {out / 'best.json'}, {out / 'final.json'}, {metrics_path}")
    return EXIT_OK


def cmd_eval(args) -> int:
    model = _load_model(args.checkpoint)
    data = _load_dataset(args.dataset)
    _check_compatible(model, data)
    if args.split not in data.splits or len(data.splits[args.split]) == 0:
        raise CliError(f"split {args.split!r} is empty or missing", EXIT_DATA)
    errors = sample_errors(model, data, args.split)
    summary = {
        "split": args.split,
        "samples": int(errors.size),
        "mean": float(np.mean(errors)),
        "median": float(np.median(errors)),
        "max": float(np.max(errors)),
    }
    print(json.dumps(summary, sort_keys=True))
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if args.per_sample:
        with Path(args.per_sample).open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["sample", "rel_err"])
            for i, e in zip(data.splits[args.split], errors):
                writer.writerow([int(i), _fmt(e)])
    return EXIT_OK


def cmd_spectrum(args) -> int:
    model = _load_model(args.checkpoint)
    data = _load_dataset(args.dataset)
    _check_compatible(model, data)
    if args.branches and model_kind(model) != "mscale-fno":
        raise CliError("--branches requires an mscale-fno checkpoint", EXIT_CONFIG)
    idx = data.splits.get(args.split)
    if idx is None or not 0 <= args.index < len(idx):
        raise CliError(f"no sample {args.index} in split {args.split!r}", EXIT_DATA)
    report = spectrum_report(model, data, int(idx[args.index]), args.branches)
    report.write_csv(args.out)
    print(f"wrote {report.modes.size} modes to {args.out}")
    return EXIT_OK


def cmd_count(args) -> int:
    cfg = _load_config(args.config)
    parts = count_breakdown(cfg)
    total = total_parameters(cfg)
    label = cfg.kind if cfg.kind == "normal-fno" else f"{cfg.kind} (N={cfg.n_branches})"
    print(f"model: {label}, d_v={cfg.fno.d_v}, k_max={cfg.fno.k_max}, layers={cfg.fno.layers}")
    for name, value in parts.items():
        print(f"  {name:<11s}{value:>12d}")
    print(f"total: {total}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mscalefno", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a dataset")
    p.add_argument("--preset", required=True, help=f"one of: {', '.join(PRESETS)}")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--M", type=int, default=None, help="frequency terms (ex4.2)")
    p.add_argument("--L", type=float, default=None, help="domain half-length (ex4.4)")
    p.add_argument("--counts", default=None, help="train,val,test sample counts")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train a model from a config file")
    p.add_argument("config")
    p.add_argument("--out", default=None, help="override [output] dir")
    p.add_argument("--epochs", type=int, default=None, help="override [train] epochs")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="relative L2 errors of a checkpoint on a split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--out", default=None, help="write the summary as JSON")
    p.add_argument("--per-sample", default=None, help="write per-sample errors as CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("spectrum", help="DFT magnitudes of target, prediction and branches")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--index", type=int, default=0, help="sample position within the split")
    p.add_argument("--branches", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("count", help="exact parameter count of a config")
    p.add_argument("config")
    p.set_defaults(func=cmd_count)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except SingularSystemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
