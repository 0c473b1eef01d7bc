"""Command line entry point: ``capsbench <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .autodiff import NumericError
from .baselines.fisherfaces import FisherfacesError
from .bench.config import ConfigError, parse_config
from .checkpoint import CheckpointError
from .data import (CifarFormatError, DatasetNotFound, PGMError, SHAPES, build_pipeline,
                   load_folder, synth_shapes, write_folder)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _overrides(args) -> dict[str, str]:
    out = {}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    for key in ("epochs", "batch_size", "learning_rate", "seed", "output_dir", "dataset", "timing"):
        value = getattr(args, key, None)
        if value is not None:
            out[key] = str(value)
    return out


def cmd_train(args) -> int:
    from .bench.train import train

    cfg = parse_config(args.config, _overrides(args))
    res = train(cfg)
    print(f"{cfg.name}: test accuracy {res.test_accuracy:.4f} "
          f"(best epoch {res.best_epoch}), outputs in {res.output_dir}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .bench.metrics import evaluate_accuracy
    from .bench.models import load_model, predictor

    model, cfg, input_shape, _ = load_model(args.checkpoint)
    samples = load_folder(args.dataset)
    if cfg.preprocess != "none":
        from .bench.train import equalize_policy
        from .data import Sample
        pipe = build_pipeline(cfg.preprocess, equalize_policy(cfg))
        samples = [Sample(pipe(s.image), s.label, s.source_id) for s in samples]
    if samples[0].image.shape[:2] != input_shape:
        raise DatasetNotFound(f"dataset images are {samples[0].image.shape[:2]}, "
                              f"checkpoint expects {input_shape}")
    acc = evaluate_accuracy(predictor(model), samples)
    print(f"accuracy {acc:.4f} on {len(samples)} samples")
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench.metrics import format_duration, format_percent
    from .bench.runner import run_bench

    for s in run_bench(args.config_dir, args.report):
        print(f"{s.dataset:<12} {s.algorithm:<12} {format_percent(s.test_accuracy):>7} "
              f"{format_duration(s.avg_training_time_s)}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from .bench.tools import gradcheck_cli

    overrides = _overrides(args)
    if args.corrupt:
        overrides["gradcheck.corrupt"] = "true"
    outcome = gradcheck_cli(parse_config(args.config, overrides))
    print(outcome.summary())
    if outcome.applicable and not outcome.passed:
        for e in outcome.report.worst(5):
            print(f"  {e.name}{list(e.index)}: analytic {e.analytic:.6e} "
                  f"numeric {e.numeric:.6e} rel {e.rel_error:.2e}")
        return EXIT_NUMERIC
    return EXIT_OK


def parse_synth_spec(text: str) -> dict:
    """``key=value`` pairs separated by ';' or newlines, or a file holding them."""
    path = Path(text)
    if path.is_file():
        text = path.read_text(encoding="utf-8")
    spec = {"n_per_class": 50, "classes": ",".join(SHAPES), "size": 64, "seed": 0, "jitter": 0.1}
    for part in text.replace("\n", ";").split(";"):
        part = part.split("#", 1)[0].strip()
        if not part:
            continue
        key, sep, value = part.partition("=")
        key = key.strip()
        if not sep or key not in spec:
            raise ConfigError(f"bad synth spec entry {part!r}; keys are {sorted(spec)}")
        spec[key] = value.strip()
    return {"n_per_class": int(spec["n_per_class"]),
            "classes": tuple(c.strip() for c in str(spec["classes"]).split(",") if c.strip()),
            "size": int(spec["size"]), "seed": int(spec["seed"]), "jitter": float(spec["jitter"])}


def cmd_synth(args) -> int:
    spec = parse_synth_spec(args.spec)
    samples = synth_shapes(**spec)
    write_folder(samples, args.out_dir)
    print(f"wrote {len(samples)} images of {len(spec['classes'])} classes to {args.out_dir}")
    return EXIT_OK


def cmd_preprocess(args) -> int:
    from .bench.train import equalize_policy
    from .data import Sample

    # the equalize.* keys are validated through an otherwise empty experiment config
    cfg = parse_config(overrides={"model": "fisherfaces", **_overrides(args)})
    pipe = build_pipeline(args.dataset_name, equalize_policy(cfg))
    samples = load_folder(args.input)
    out = []
    for s in samples:
        image = pipe(s.image)
        out.append(Sample(np.clip(np.rint(image * 255), 0, 255) / 255.0, s.label, s.source_id))
    write_folder(out, args.output)
    print(f"{len(out)} images: {' -> '.join(pipe.step_names())}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="capsbench", description="Capsule network benchmark harness.")
    p.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def with_overrides(sp):
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
        sp.add_argument("--epochs", type=int)
        sp.add_argument("--batch-size", dest="batch_size", type=int)
        sp.add_argument("--learning-rate", dest="learning_rate", type=float)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--output-dir", dest="output_dir")
        sp.add_argument("--dataset")
        sp.add_argument("--timing", choices=("wall", "off"))

    sp = sub.add_parser("train", help="train one model from a config file")
    sp.add_argument("config")
    with_overrides(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="accuracy of a checkpoint on a dataset folder")
    sp.add_argument("checkpoint")
    sp.add_argument("dataset")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("bench", help="run every *.cfg in a directory and write a results table")
    sp.add_argument("config_dir")
    sp.add_argument("--report", help="table path (.md or .csv); default <config_dir>/results.md")
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("gradcheck", help="finite-difference check of a model's gradients")
    sp.add_argument("config")
    sp.add_argument("--corrupt", action="store_true", help="use a deliberately wrong conv backward")
    with_overrides(sp)
    sp.set_defaults(func=cmd_gradcheck)

    sp = sub.add_parser("synth", help="render a synthetic shapes dataset to a folder of PGMs")
    sp.add_argument("spec", help="e.g. 'n_per_class=50;size=64;seed=0;jitter=0.1' or a file")
    sp.add_argument("out_dir")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("preprocess", help="apply a dataset's preprocessing chain to a folder")
    sp.add_argument("dataset_name", choices=("yale", "mit", "belgiumts", "cifar100"))
    sp.add_argument("input")
    sp.add_argument("output")
    sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="equalize.* policy keys")
    sp.set_defaults(func=cmd_preprocess)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (DatasetNotFound, CheckpointError, PGMError, CifarFormatError, FisherfacesError,
            OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

if __name__ == "__main__":
    sys.exit(main())
