"""Command-line entry point.

Exit codes: 0 success, 1 runtime or I/O failure, 2 invalid input.
"""

import argparse
from typing import Any, Optional, Sequence

from loguru import logger

from authformer.config import RunConfig, resolve_run_config
from authformer.data.checkpoint import load_checkpoint, save_checkpoint
from authformer.data.dataset import Dataset, load_dataset
from authformer.data.synthetic import generate_synthetic
from authformer.errors import AuthFormerError, AuthFormerValidationError, ConfigError
from authformer.logging_setup import configure_logging
from authformer.modalities import combination_label, parse_combination
from authformer.model.params import init_params
from authformer.tensor import default_dtype
from authformer.training import reports
from authformer.training.evaluation import evaluate_classification, evaluate_verification
from authformer.training.harness import ablation_gains, ablation_run, config_for, depth_sweep, parse_layer_counts
from authformer.training.metrics import rates_at_threshold
from authformer.training.trainer import train
from authformer.verification import run_gradcheck

EXIT_OK, EXIT_RUNTIME, EXIT_INVALID = 0, 1, 2


def _shared(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", "-c", type=str, default=None, help="TOML or JSON configuration file")
    parser.add_argument("--seed", type=int, default=None, help="Seed for generation, init and shuffling")
    parser.add_argument("--log-level", type=str, default=None, help="Log level (default: INFO)")
    parser.add_argument("--log-file", type=str, default=None, help="Also log to this rotating file")
    parser.add_argument("--dtype", choices=["float32", "float64"], default=None, help="Training element type")


def _training_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--epochs", type=int, default=None)
    parser.add_argument("--batch-size", type=int, default=None)
    parser.add_argument("--lr", type=float, default=None, help="Learning rate")
    parser.add_argument("--optimizer", choices=["adam", "sgd"], default=None)
    parser.add_argument("--progress", action="store_true", default=None, help="Show progress bars")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="authformer", description="Adaptive multimodal biometric authentication"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="Generate a synthetic multimodal dataset")
    _shared(p)
    p.add_argument("--classes", type=int, default=None)
    p.add_argument("--samples-per-class", type=int, default=None)
    p.add_argument("--noise", type=float, default=None)
    p.add_argument("--test-fraction", type=float, default=None)
    p.add_argument("--out", type=str, required=True, help="Dataset directory")

    p = sub.add_parser("train", help="Train a model on one modality combination")
    _shared(p)
    _training_flags(p)
    p.add_argument("--data", type=str, default=None)
    p.add_argument("--modalities", type=str, default=None, help="e.g. face,finger,voice")
    p.add_argument("--layers", type=int, default=None)
    p.add_argument("--out", type=str, default=None, help="Checkpoint path (.afck)")

    for name, text in (("eval", "Classification metrics"), ("verify", "TAR/FRR/FAR/EER")):
        p = sub.add_parser(name, help=text)
        _shared(p)
        p.add_argument("--ckpt", type=str, default=None)
        p.add_argument("--data", type=str, default=None)
        p.add_argument("--modalities", type=str, default=None, help="Defaults to the checkpoint's combination")
        p.add_argument("--split", choices=["train", "test"], default="test")
        p.add_argument("--out", type=str, default=None, help="CSV report path")
        if name == "eval":
            p.add_argument("--per-class-out", type=str, default=None, help="Per-class CSV report path")
        else:
            p.add_argument("--threshold", type=float, default=None, help="Also report rates at this threshold")
            p.add_argument("--impostors-per-sample", type=int, default=None)

    p = sub.add_parser("ablate", help="Train and evaluate every modality combination")
    _shared(p)
    _training_flags(p)
    p.add_argument("--data", type=str, default=None)
    p.add_argument("--layers", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None, help="Parallel sub-runs (default 1)")
    p.add_argument("--out", type=str, default=None)
    p.add_argument("--gains-out", type=str, default=None, help="CSV of multimodal gains")

    p = sub.add_parser("depth-sweep", help="Accuracy and epoch time per encoder depth")
    _shared(p)
    _training_flags(p)
    p.add_argument("--data", type=str, default=None)
    p.add_argument("--modalities", type=str, default=None)
    p.add_argument("--layers", type=str, default="1..6", help='"1..6" or "1,2,4"')
    p.add_argument("--out", type=str, default=None)

    p = sub.add_parser("gradcheck", help="64-bit finite-difference gradient suite")
    _shared(p)
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--tol", type=float, default=1e-4)
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    get = lambda name: getattr(args, name, None)  # noqa: E731
    layers = get("layers") if isinstance(get("layers"), int) else None
    modalities = parse_combination(args.modalities) if get("modalities") else None
    out_is_checkpoint = args.command == "train"
    return {
        "log_level": get("log_level"),
        "data_dir": get("data") or (get("out") if args.command == "synth" else None),
        "checkpoint": get("ckpt") or (get("out") if out_is_checkpoint else None),
        "out": get("out") if args.command not in ("synth", "train") else None,
        "jobs": get("jobs"),
        "model": {"layers": layers, "modalities": list(modalities) if modalities else None},
        "train": {
            "seed": get("seed"),
            "epochs": get("epochs"),
            "batch_size": get("batch_size"),
            "learning_rate": get("lr"),
            "optimizer": get("optimizer"),
            "dtype": get("dtype"),
            "impostors_per_sample": get("impostors_per_sample"),
            "show_progress": get("progress"),
        },
        "synth": {
            "seed": get("seed"),
            "num_classes": get("classes"),
            "samples_per_class": get("samples_per_class"),
            "noise_level": get("noise"),
            "test_fraction": get("test_fraction"),
        },
    }


def _require(value: Optional[str], flag: str) -> str:
    if not value:
        raise ConfigError(f"{flag} is required")
    return value


def _dataset(config: RunConfig) -> Dataset:
    return load_dataset(_require(config.data_dir, "--data"))


def _emit(table: reports.Table, out: Optional[str] = None) -> None:
    print(reports.format_table(table))
    if out:
        reports.write_csv(out, table)


def cmd_synth(args: argparse.Namespace, config: RunConfig) -> int:
    s = config.synth
    dataset = generate_synthetic(
        config.data_dir, s.num_classes, s.samples_per_class, s.seed, s.noise_level, s.test_fraction,
        config.model.embed,
    )
    manifest = dataset.manifest
    print(f"Dataset: {config.data_dir}")
    print(f"  classes: {manifest.num_classes} x {manifest.samples_per_class} samples (seed {manifest.seed})")
    print(f"  train/test: {len(dataset.train())}/{len(dataset.test())}")
    for d in manifest.modalities:
        print(f"  {d.tag}: {d.blob} {d.shape}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace, config: RunConfig) -> int:
    checkpoint = _require(config.checkpoint, "--out")
    dataset = _dataset(config)
    model_config = config_for(config.model, config.model.modalities, dataset.num_classes)
    with default_dtype(config.train.dtype):
        params = init_params(model_config, seed=config.train.seed)
        result = train(params, dataset.train(), config.train)
    save_checkpoint(result.params, model_config, checkpoint)
    _emit(
        (["epoch", "loss", "seconds"],
         [[e.epoch, reports.metric(e.loss), reports.metric(e.seconds)] for e in result.history])
    )
    if len(dataset.test()):
        report = evaluate_classification(result.params, dataset.test())
        print(f"test accuracy ({combination_label(model_config.modalities)}): {report.accuracy:.4f}")
    return EXIT_OK


def _loaded(config: RunConfig, args: argparse.Namespace):
    params, model_config = load_checkpoint(_require(config.checkpoint, "--ckpt"))
    combination = parse_combination(args.modalities) if args.modalities else model_config.modalities
    split = _dataset(config).split(args.split)
    return params, combination, split


def cmd_eval(args: argparse.Namespace, config: RunConfig) -> int:
    params, combination, split = _loaded(config, args)
    report = evaluate_classification(params, split, combination)
    _emit(reports.metrics_table(report), config.out)
    print()
    _emit(reports.per_class_table(report), args.per_class_out)
    return EXIT_OK


def cmd_verify(args: argparse.Namespace, config: RunConfig) -> int:
    params, combination, split = _loaded(config, args)
    report, _, (genuine, impostor) = evaluate_verification(
        params, split, combination, config.train.impostors_per_sample, config.train.seed
    )
    _emit(reports.metrics_table(report), config.out)
    if args.threshold is not None:
        point = rates_at_threshold(genuine, impostor, args.threshold)
        print()
        _emit(reports.operating_point_table(report.combination, point))
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace, config: RunConfig) -> int:
    rows = ablation_run(_dataset(config), config.model, config.train, jobs=config.jobs)
    _emit(reports.ablation_table(rows), config.out)
    print()
    _emit(reports.gains_table(ablation_gains(rows)), args.gains_out)
    return EXIT_OK


def cmd_depth_sweep(args: argparse.Namespace, config: RunConfig) -> int:
    rows = depth_sweep(_dataset(config), parse_layer_counts(args.layers), config.model, config.train)
    _emit(reports.depth_table(rows), config.out)
    return EXIT_OK


def cmd_gradcheck(args: argparse.Namespace, config: RunConfig) -> int:
    results = run_gradcheck(seeds=args.seeds, tol=args.tol)
    _emit((["target", "max_rel_error", "status"],
           [[r.name, f"{r.max_error:.3e}", "ok" if r.passed else "FAIL"] for r in results]))
    failed = [r.name for r in results if not r.passed]
    if failed:
        logger.error(f"gradcheck failed for: {', '.join(failed)}")
        return EXIT_RUNTIME
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "eval": cmd_eval,
    "verify": cmd_verify,
    "ablate": cmd_ablate,
    "depth-sweep": cmd_depth_sweep,
    "gradcheck": cmd_gradcheck,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level or "INFO", args.log_file)
    try:
        config = resolve_run_config(args.config, _overrides(args))
        configure_logging(config.log_level, args.log_file)
        logger.info(f"Resolved configuration for '{args.command}': {config.model_dump_json()}")
        return COMMANDS[args.command](args, config)
    except AuthFormerValidationError as e:
        logger.error(f"{args.command}: {e}")
        return EXIT_INVALID
    except (AuthFormerError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
