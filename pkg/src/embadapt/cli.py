"""Command-line front end for every pipeline stage.

Exit codes: 0 success, 1 validation/usage error, 2 I/O or file-format
error. Every run writes a run.json with the resolved configuration and
sha256 checksums of its inputs.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
from typing import Dict, List, Optional

from . import dataio, pipeline
from .adapter import load_adapter, save_adapter
from .errors import (
    ConfigParseError,
    DataFormatError,
    MissingLabels,
    ValidationError,
)
from .pipeline import TrainConfig
from .pseudolabel import save_pseudo_labels
from .synth import SynthConfig, generate_benchmark
from .textspace import build_prototypes

SWEEP_COUNTS = (1, 2, 4, 8, 12, 16)


class UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def parse_config_file(path) -> Dict[str, object]:
    """Flat key = value file; values are bools, ints, floats, or strings."""
    values: Dict[str, object] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigParseError(f"{path}:{lineno}: expected key = value")
            key, _, value = line.partition("=")
            key = key.strip().replace("-", "_")
            value = value.strip().strip('"').strip("'")
            if value.lower() in ("true", "false"):
                values[key] = value.lower() == "true"
                continue
            try:
                values[key] = int(value)
                continue
            except ValueError:
                pass
            try:
                values[key] = float(value)
                continue
            except ValueError:
                pass
            values[key] = value
    return values


def _provided_flags(argv: List[str]) -> set:
    out = set()
    for token in argv:
        if token.startswith("--"):
            out.add(token[2:].split("=", 1)[0].replace("-", "_"))
        elif token == "-o":
            out.add("out")
    return out


_TRAIN_FIELDS = [f.name for f in dataclasses.fields(TrainConfig)]


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    defaults = TrainConfig()
    p.add_argument("--config", default=None, help="flat key=value config file")
    p.add_argument("--seed", type=int, default=defaults.seed)
    p.add_argument("--tau-distill", type=float, default=defaults.tau_distill)
    p.add_argument("--alpha", type=float, default=defaults.alpha)
    p.add_argument("--percentile", type=float, default=defaults.percentile)
    p.add_argument("--epochs", type=int, default=defaults.epochs)
    p.add_argument("--lr", type=float, default=defaults.lr)
    p.add_argument("--weight-decay", type=float, default=defaults.weight_decay)
    p.add_argument("--batch-size", type=int, default=defaults.batch_size)
    p.add_argument("--residual-ratio", type=float, default=defaults.residual_ratio)


def _resolve_train_config(args, provided: set) -> TrainConfig:
    cfg = TrainConfig()
    if args.config:
        file_values = parse_config_file(args.config)
        for key, value in file_values.items():
            if key in _TRAIN_FIELDS:
                setattr(cfg, key, value)
    for key in _TRAIN_FIELDS:
        if key in provided and hasattr(args, key):
            setattr(cfg, key, getattr(args, key))
    cfg.validate()
    return cfg


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_run_json(out_dir, subcommand: str, cfg, inputs: List[str]) -> None:
    os.makedirs(out_dir, exist_ok=True)
    doc = {
        "subcommand": subcommand,
        "config": dataclasses.asdict(cfg) if dataclasses.is_dataclass(cfg) else cfg,
        "argv": sys.argv[1:],
        "input_checksums": {p: _sha256(p) for p in sorted(set(inputs))
                            if os.path.exists(p)},
    }
    with open(os.path.join(out_dir, "run.json"), "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


class Bench:
    """Benchmark directory handle: manifest plus lazily loaded files."""

    def __init__(self, data_dir):
        self.data_dir = data_dir
        self.manifest_path = os.path.join(data_dir, "manifest.json")
        self.manifest = dataio.load_manifest(self.manifest_path)
        self.touched = [self.manifest_path]

    def path(self, key: str) -> str:
        rel = self.manifest.files[key]
        full = os.path.join(self.data_dir, rel)
        self.touched.append(full)
        return full

    def dataset(self, domain: str, space: str) -> dataio.EmbeddingDataset:
        return dataio.load_embeddings(self.path(f"{domain}_{space}"), space)

    def bank(self, space: str):
        return dataio.load_text_bank(self.path(f"bank_{space}"))

    def sidecar(self) -> Dict[str, int]:
        path = os.path.join(self.data_dir, self.manifest.files["target_labels"])
        if not os.path.exists(path):
            raise MissingLabels(f"label sidecar not found: {path}")
        self.touched.append(path)
        return dataio.load_label_sidecar(path)


def _protos_for(bank, cfg: TrainConfig, n_templates: Optional[int] = None):
    tau = pipeline.effective_tau_sim(bank, cfg)
    subset = None if n_templates is None else list(range(n_templates))
    return build_prototypes(bank, subset, tau)


def _cmd_synth(args, provided) -> int:
    cfg = SynthConfig()
    if args.config:
        for key, value in parse_config_file(args.config).items():
            if hasattr(cfg, key):
                setattr(cfg, key, value)
    flag_map = {
        "classes": "classes", "teacher_dim": "teacher_dim",
        "student_dim": "student_dim", "videos_per_class": "videos_per_class",
        "frames": "frames_per_video", "templates": "num_templates",
        "sigma_class": "sigma_class", "sigma_text": "sigma_text",
        "sigma_cross": "sigma_cross", "shift_lambda": "shift_lambda",
        "bias": "bias_magnitude", "seed": "seed",
    }
    for flag, attr in flag_map.items():
        if flag in provided:
            setattr(cfg, attr, getattr(args, flag))
    generate_benchmark(cfg, args.out)
    _write_run_json(args.out, "synth", cfg, [])
    print(f"benchmark written to {args.out}")
    return 0


def _cmd_zeroshot(args, provided) -> int:
    cfg = _resolve_train_config(args, provided)
    bench = Bench(args.data)
    dataset = bench.dataset("target", args.space)
    bank = bench.bank(args.space)
    n_templates = args.templates if "templates" in provided else None
    protos = _protos_for(bank, cfg, n_templates)
    metrics = pipeline.evaluate(dataset, protos, sidecar=bench.sidecar())
    print(f"accuracy {metrics.accuracy * 100:.1f}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        pipeline.save_metrics_csv(metrics, bench.manifest.class_names,
                                  os.path.join(args.out, "metrics.csv"))
        _write_run_json(args.out, "zeroshot", cfg, bench.touched)
    return 0


def _cmd_train_source(args, provided) -> int:
    cfg = _resolve_train_config(args, provided)
    bench = Bench(args.data)
    dataset = bench.dataset("source", "teacher")
    bank = bench.bank("teacher")
    adapter, trace = pipeline.train_source_adapter(dataset, bank, cfg)
    os.makedirs(args.out, exist_ok=True)
    save_adapter(adapter, os.path.join(args.out, "adapter_source.adp"))
    pipeline.save_loss_trace_csv(trace, os.path.join(args.out, "loss_source.csv"))
    _write_run_json(args.out, "train-source", cfg, bench.touched)
    final = trace[-1] if trace else float("nan")
    print(f"source adapter trained, final loss {final:.6f}")
    return 0


def _cmd_adapt_target(args, provided) -> int:
    cfg = _resolve_train_config(args, provided)
    bench = Bench(args.data)
    dataset = bench.dataset("target", "teacher")
    bank = bench.bank("teacher")
    adapter, pls, trace = pipeline.adapt_target(dataset, bank, cfg)
    os.makedirs(args.out, exist_ok=True)
    save_adapter(adapter, os.path.join(args.out, "adapter_target.adp"))
    save_pseudo_labels(pls, os.path.join(args.out, "pseudo_labels.csv"))
    pipeline.save_loss_trace_csv(trace, os.path.join(args.out, "loss_target.csv"))
    _write_run_json(args.out, "adapt-target", cfg, bench.touched)
    print(f"target adapter trained on {pls.kept_count}/{pls.source_count} "
          "pseudo-labeled videos")
    return 0


def _cmd_distill(args, provided) -> int:
    cfg = _resolve_train_config(args, provided)
    bench = Bench(args.data)
    source_adapter = load_adapter(args.source_adapter
                                  or os.path.join(args.out, "adapter_source.adp"))
    target_adapter = load_adapter(args.target_adapter
                                  or os.path.join(args.out, "adapter_target.adp"))
    teacher_bank = bench.bank("teacher")
    bundle = pipeline.TeacherBundle(
        prototypes=_protos_for(teacher_bank, cfg),
        source_adapter=source_adapter,
        target_adapter=target_adapter,
    )
    student_adapter, trace = pipeline.distill(
        bundle,
        bench.dataset("target", "teacher"),
        bench.dataset("target", "student"),
        bench.bank("student"),
        cfg,
    )
    os.makedirs(args.out, exist_ok=True)
    save_adapter(student_adapter, os.path.join(args.out, "adapter_student.adp"))
    pipeline.save_loss_trace_csv(trace, os.path.join(args.out, "loss_distill.csv"))
    _write_run_json(args.out, "distill", cfg, bench.touched)
    final = trace[-1] if trace else float("nan")
    print(f"student adapter distilled, final loss {final:.6f}")
    return 0


def _cmd_eval(args, provided) -> int:
    cfg = _resolve_train_config(args, provided)
    bench = Bench(args.data)
    dataset = bench.dataset("target", args.space)
    bank = bench.bank(args.space)
    adapter = load_adapter(args.adapter) if args.adapter else None
    metrics = pipeline.evaluate(dataset, _protos_for(bank, cfg),
                                adapter=adapter, sidecar=bench.sidecar())
    os.makedirs(args.out, exist_ok=True)
    pipeline.save_metrics_csv(metrics, bench.manifest.class_names,
                              os.path.join(args.out, "metrics.csv"))
    pipeline.save_confusion_csv(metrics, bench.manifest.class_names,
                                os.path.join(args.out, "confusion.csv"))
    _write_run_json(args.out, "eval", cfg, bench.touched)
    print(f"accuracy {metrics.accuracy * 100:.1f}")
    return 0


def _cmd_sweep_templates(args, provided) -> int:
    cfg = _resolve_train_config(args, provided)
    bench = Bench(args.data)
    dataset = bench.dataset("target", args.space)
    bank = bench.bank(args.space)
    sidecar = bench.sidecar()
    rows = []
    for count in SWEEP_COUNTS:
        if count > bank.num_templates:
            continue
        metrics = pipeline.evaluate(dataset, _protos_for(bank, cfg, count),
                                    sidecar=sidecar)
        rows.append((count, metrics.accuracy))
        print(f"templates {count:2d}: accuracy {metrics.accuracy * 100:.1f}")
    os.makedirs(args.out, exist_ok=True)
    import csv as _csv

    with open(os.path.join(args.out, "template_sweep.csv"), "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["n_templates", "accuracy"])
        for count, acc in rows:
            writer.writerow([count, repr(acc)])
    _write_run_json(args.out, "sweep-templates", cfg, bench.touched)
    return 0


def _cmd_export_predictions(args, provided) -> int:
    cfg = _resolve_train_config(args, provided)
    bench = Bench(args.data)
    dataset = bench.dataset(args.domain, args.space)
    bank = bench.bank(args.space)
    adapter = load_adapter(args.adapter) if args.adapter else None
    from .textspace import zeroshot_classify

    preds = zeroshot_classify(dataset, _protos_for(bank, cfg), adapter=adapter)
    os.makedirs(args.out, exist_ok=True)
    pipeline.save_predictions_csv(preds, os.path.join(args.out, "predictions.csv"))
    _write_run_json(args.out, "export-predictions", cfg, bench.touched)
    print(f"wrote {len(preds)} predictions")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="embadapt",
                     description="source-free embedding adaptation pipeline")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    synth_defaults = SynthConfig()
    p = sub.add_parser("synth", help="generate a synthetic benchmark")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=synth_defaults.seed)
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--classes", type=int, default=synth_defaults.classes)
    p.add_argument("--teacher-dim", type=int, default=synth_defaults.teacher_dim)
    p.add_argument("--student-dim", type=int, default=synth_defaults.student_dim)
    p.add_argument("--videos-per-class", type=int,
                   default=synth_defaults.videos_per_class)
    p.add_argument("--frames", type=int, default=synth_defaults.frames_per_video)
    p.add_argument("--templates", type=int, default=synth_defaults.num_templates)
    p.add_argument("--sigma-class", type=float, default=synth_defaults.sigma_class)
    p.add_argument("--sigma-text", type=float, default=synth_defaults.sigma_text)
    p.add_argument("--sigma-cross", type=float, default=synth_defaults.sigma_cross)
    p.add_argument("--shift-lambda", type=float, default=synth_defaults.shift_lambda)
    p.add_argument("--bias", type=float, default=synth_defaults.bias_magnitude)
    p.set_defaults(func=_cmd_synth)

    def stage_parser(name, help_text, needs_out=True):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--data", required=True, help="benchmark directory")
        if needs_out:
            sp.add_argument("-o", "--out", required=True)
        else:
            sp.add_argument("-o", "--out", default=None)
        _add_train_flags(sp)
        return sp

    p = stage_parser("zeroshot", "zero-shot evaluation on the target set",
                     needs_out=False)
    p.add_argument("--space", choices=("teacher", "student"), default="teacher")
    p.add_argument("--templates", type=int, default=16,
                   help="use only the first N templates")
    p.set_defaults(func=_cmd_zeroshot)

    p = stage_parser("train-source", "train the source adapter")
    p.set_defaults(func=_cmd_train_source)

    p = stage_parser("adapt-target", "pseudo-label the target set and train "
                                     "the target adapter")
    p.set_defaults(func=_cmd_adapt_target)

    p = stage_parser("distill", "distill the teacher ensemble into the "
                                "student adapter")
    p.add_argument("--source-adapter", default=None)
    p.add_argument("--target-adapter", default=None)
    p.set_defaults(func=_cmd_distill)

    p = stage_parser("eval", "evaluate a model on the labeled target set")
    p.add_argument("--space", choices=("teacher", "student"), default="teacher")
    p.add_argument("--adapter", default=None, help="optional ADP1 checkpoint")
    p.set_defaults(func=_cmd_eval)

    p = stage_parser("sweep-templates", "zero-shot accuracy vs template count")
    p.add_argument("--space", choices=("teacher", "student"), default="teacher")
    p.set_defaults(func=_cmd_sweep_templates)

    p = stage_parser("export-predictions", "write per-video predictions CSV")
    p.add_argument("--space", choices=("teacher", "student"), default="teacher")
    p.add_argument("--domain", choices=("source", "target"), default="target")
    p.add_argument("--adapter", default=None)
    p.set_defaults(func=_cmd_export_predictions)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args, _provided_flags(argv))
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataFormatError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
