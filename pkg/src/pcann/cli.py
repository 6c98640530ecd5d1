"""Command-line front end for training, evaluating, inspecting and exporting models.

Settings come from flags and/or a ``key = value`` config file given with
``--config``; flags win. Exit codes: 0 success, 1 usage error, 2 data error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, replace

import numpy as np

from pcann.buckets import build_bucketed_model, compute_error_buckets
from pcann.dataset_io import CLASSES, LabeledDataset, load_dataset
from pcann.errors import CountTooLarge, DataError, MissingDiagonal, NumericalFailure, PcannError, UnknownClass
from pcann.export import image_to_gray, neuron_to_gray, write_pgm
from pcann.network import FLAVORS, EvalReport, ModelConfig, RawModel, ScoreBank, argmax_lowest, build_raw_model, evaluate
from pcann.parallel import chunk_slices, pmap
from pcann.persistence import load_model, save_model

log = logging.getLogger("pcann")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3

MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


class UsageError(PcannError):
    pass


@dataclass
class RunConfig:
    train_images: str | None = None
    train_labels: str | None = None
    test_images: str | None = None
    test_labels: str | None = None
    r: float = 0.20
    M: int = 20
    angles_deg: tuple[float, ...] = (-12.0, 0.0, 12.0)
    flavor: str = "bucketed_transformed"
    model: str | None = None
    renormalize_rotated: bool = False
    threads: int | None = None

    @property
    def model_config(self) -> ModelConfig:
        return ModelConfig(self.r, self.M, self.angles_deg)

    def with_mnist_dir(self, directory) -> "RunConfig":
        """Fill the four data paths from a directory of standard MNIST file names."""
        paths = {}
        for key, name in MNIST_FILES.items():
            plain = os.path.join(directory, name)
            paths[key] = plain if os.path.exists(plain) or not os.path.exists(plain + ".gz") else plain + ".gz"
        return replace(self, **paths)


def parse_angles(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(a) for a in str(text).replace(" ", "").split(",") if a)
    except ValueError:
        raise UsageError(f"cannot parse angle list {text!r}") from None


_BOOL = {"1": True, "true": True, "yes": True, "0": False, "false": False, "no": False}

_CONFIG_KEYS = {
    "train_images": str,
    "train_labels": str,
    "test_images": str,
    "test_labels": str,
    "r": float,
    "m": int,
    "angles": parse_angles,
    "angles_deg": parse_angles,
    "flavor": str,
    "model": str,
    "mnist_dir": str,
    "renormalize_rotated": lambda v: _BOOL[v.lower()],
    "threads": int,
}


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            key, value = (p.strip() for p in line.split("=", 1))
            norm = key.lower().replace("-", "_")
            if norm not in _CONFIG_KEYS:
                raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                values[norm] = _CONFIG_KEYS[norm](value)
            except (ValueError, KeyError):
                raise UsageError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
    return values


def build_model(train: LabeledDataset, cfg: RunConfig):
    """Build the requested flavor from a training set."""
    mc = cfg.model_config
    if cfg.flavor not in FLAVORS:
        raise UsageError(f"unknown flavor {cfg.flavor!r}; choose from {', '.join(FLAVORS)}")
    if cfg.flavor in ("raw", "transformed"):
        return build_raw_model(
            train, mc, flavor=cfg.flavor, renormalize_rotated=cfg.renormalize_rotated, threads=cfg.threads
        )
    raw = build_raw_model(train, replace(mc, angles_deg=(0.0,)), threads=cfg.threads)
    buckets = compute_error_buckets(raw, train, cfg.threads)
    log.info("%d non-empty error buckets", len(buckets))
    return build_bucketed_model(
        buckets, mc, flavor=cfg.flavor, renormalize_rotated=cfg.renormalize_rotated, threads=cfg.threads
    )


def model_summary(model) -> list[str]:
    cfg = model.config
    lines = [
        f"flavor {model.flavor}",
        f"r {cfg.r:g}",
        f"M {cfg.M}",
        "angles " + ",".join(f"{a:g}" for a in cfg.angles_deg),
    ]
    if isinstance(model, RawModel):
        for a in sorted(model.sets):
            lines.append(f"K_r class {a} {len(model.sets[a])}")
        ks = [len(s) for s in model.sets.values()]
        lines.append(f"mean K_r {np.mean(ks):.2f}")
        lines.append(f"neurons {sum(ks)}")
    else:
        for key in model.keys():
            lines.append(f"bucket {key[0]}|{key[1]} neurons {len(model.sets[key])}")
        lines.append(f"kept buckets {len(model.sets)}")
        lines.append(f"neurons {sum(len(s) for s in model.sets.values())}")
    lines.append(f"stored sets {len(model.all_sets())}")
    return lines


def cmd_train(cfg: RunConfig, out=sys.stdout):
    _require(cfg, "train_images", "train_labels", "model")
    train = load_dataset(cfg.train_images, cfg.train_labels)
    log.info("loaded %d training images; building %s model", len(train), cfg.flavor)
    model = build_model(train, cfg)
    save_model(cfg.model, model)
    for line in model_summary(model):
        print(line, file=out)
    print(f"wrote {cfg.model}", file=out)
    return model


def format_report(report: EvalReport) -> list[str]:
    lines = [f"samples {report.total}", f"correct {report.correct}", f"accuracy {100 * report.accuracy:.2f}%"]
    lines.append("confusion (rows = supervised, columns = predicted)")
    lines.append("     " + "".join(f"{b:>7d}" for b in CLASSES))
    for a in CLASSES:
        lines.append(f"{a:>5d}" + "".join(f"{int(v):>7d}" for v in report.confusion[a]))
    return lines


def cmd_eval(model_path, images, labels, *, json_out=None, threads=None, out=sys.stdout) -> EvalReport:
    model = load_model(model_path)
    ds = load_dataset(images, labels)
    report = evaluate(model.predict, ds, threads)
    for line in format_report(report):
        print(line, file=out)
    if json_out:
        with open(json_out, "w") as f:
            json.dump({"model": os.fspath(model_path), "flavor": model.flavor, **report.to_dict()}, f, indent=2)
    return report


def cmd_export_neurons(model_path, label, count, out_dir, *, predicted=None, angle=0.0, out=sys.stdout) -> list[str]:
    model = load_model(model_path)
    if isinstance(model, RawModel):
        if label not in model.sets:
            raise UnknownClass(f"model has no neuron set for class {label}")
        nset = model.sets_at((float(angle),), label)[0]
    else:
        key = (label, label if predicted is None else predicted)
        if key not in model.sets:
            raise UnknownClass(f"model has no bucket {key[0]}|{key[1]}")
        nset = model.set_for(key, angle) if angle == 0.0 or angle in model.config.angles_deg else None
        if nset is None:
            raise UsageError(f"model stores no rotated sets at {angle} degrees")
    if count < 1 or count > len(nset):
        raise CountTooLarge(f"requested {count} neurons but the set has {len(nset)}")
    os.makedirs(out_dir, exist_ok=True)
    tag = f"class{label}" if nset.predicted_label is None else f"bucket{nset.class_label}_{nset.predicted_label}"
    paths = []
    for k in range(count):
        path = os.path.join(out_dir, f"{tag}_neuron{k + 1}.pgm")
        write_pgm(path, neuron_to_gray(nset.neurons[k]))
        paths.append(path)
        print(f"wrote {path}", file=out)
    return paths


def cmd_export_bucket_samples(cfg: RunConfig, label, predicted, count, out_dir, out=sys.stdout) -> list[str]:
    """Write training samples supervised ``label`` but predicted ``predicted`` by the raw model."""
    _require(cfg, "train_images", "train_labels")
    train = load_dataset(cfg.train_images, cfg.train_labels)
    raw = build_raw_model(train, replace(cfg.model_config, angles_deg=(0.0,)), threads=cfg.threads)
    samples = compute_error_buckets(raw, train, cfg.threads).get((label, predicted))
    if samples is None:
        raise UnknownClass(f"bucket {label}|{predicted} is empty")
    if count < 1 or count > len(samples):
        raise CountTooLarge(f"requested {count} samples but the bucket has {len(samples)}")
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for k in range(count):
        path = os.path.join(out_dir, f"bucket{label}_{predicted}_sample{k + 1}.pgm")
        write_pgm(path, image_to_gray(samples[k]))
        paths.append(path)
        print(f"wrote {path}", file=out)
    return paths


def angle_grid(bound: float, gap: float) -> list[float]:
    if bound <= 0 or gap <= 0:
        raise UsageError("bound and gap must be positive")
    steps = int(math.floor(bound / gap + 1e-9))
    return [round(m * gap, 10) for m in range(1, steps + 1)]


def candidate_sets(bound: float, gap: float, pairs: bool = False) -> list[tuple[float, ...]]:
    """Symmetric angle sets over the grid.

    Contiguous mode yields {-m*gap, ..., 0, ..., m*gap}; pair mode yields
    {-m*gap, 0, m*gap}. Both start with {0}.
    """
    grid = angle_grid(bound, gap)
    out = [(0.0,)]
    for m, theta in enumerate(grid, 1):
        if pairs:
            out.append((-theta, 0.0, theta))
        else:
            side = grid[:m]
            out.append(tuple([-t for t in reversed(side)] + [0.0] + side))
    return out


def sweep_angles(raw: RawModel, train: LabeledDataset, bound: float, gap: float, *, pairs=False, threads=None):
    """Train accuracy of the transformed classifier for each candidate set."""
    candidates = candidate_sets(bound, gap, pairs)
    angles = sorted({a for c in candidates for a in c})

    def scores_at(g):
        bank = ScoreBank([raw.sets_at((g,), a)[0] for a in sorted(raw.sets)])
        parts = [bank.class_scores(train.images[sl]) for sl in chunk_slices(len(train))]
        return np.vstack(parts)

    per_angle = dict(zip(angles, pmap(scores_at, angles, threads)))
    rows = []
    for cand in candidates:
        best = per_angle[cand[0]]
        for g in cand[1:]:
            best = np.maximum(best, per_angle[g])
        acc = float(np.mean(argmax_lowest(best) == train.labels))
        rows.append((cand, acc))
    return rows


def cmd_sweep_angles(cfg: RunConfig, bound=30.0, gap=3.0, *, pairs=False, out=sys.stdout):
    _require(cfg, "train_images", "train_labels")
    train = load_dataset(cfg.train_images, cfg.train_labels)
    raw = build_raw_model(train, replace(cfg.model_config, angles_deg=(0.0,)), threads=cfg.threads)
    rows = sweep_angles(raw, train, bound, gap, pairs=pairs, threads=cfg.threads)
    best = max(range(len(rows)), key=lambda i: (rows[i][1], -i))
    for i, (cand, acc) in enumerate(rows):
        mark = "  <- best" if i == best else ""
        print(f"{{{', '.join(f'{a:g}' for a in cand)}}}  {100 * acc:.2f}%{mark}", file=out)
    return rows


def cmd_inspect(model_path, out=sys.stdout):
    model = load_model(model_path)
    size = os.path.getsize(model_path)
    print(f"file {model_path} ({size} bytes)", file=out)
    for line in model_summary(model):
        print(line, file=out)
    return model


def _require(cfg: RunConfig, *names):
    missing = [n for n in names if getattr(cfg, n) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise UsageError(f"missing required setting(s): {flags}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_run_options(p: argparse.ArgumentParser, *, flavor=True, model=True):
    p.add_argument("--config", help="key = value settings file (flags override it)")
    p.add_argument("--mnist-dir", help="directory holding the four standard MNIST IDX files")
    for key in MNIST_FILES:
        p.add_argument("--" + key.replace("_", "-"), dest=key)
    p.add_argument("--r", type=float, help="spectral tail fraction (default 0.20)")
    p.add_argument("--M", type=int, dest="M", help="minimum bucket size (default 20)")
    p.add_argument("--angles", type=parse_angles, help="comma-separated angles in degrees, e.g. --angles=-12,0,12 (the default)")
    if flavor:
        p.add_argument("--flavor", choices=FLAVORS)
    if model:
        p.add_argument("--model", help="model file path")
    p.add_argument("--renormalize-rotated", action="store_const", const=True, default=None)
    p.add_argument("--threads", type=int, help="worker threads (default: PCANN_THREADS or auto)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pcann", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="build a model and write it to disk")
    _add_run_options(p)

    p = sub.add_parser("eval", help="report accuracy and confusion of a model")
    p.add_argument("--model", required=True)
    p.add_argument("--config")
    p.add_argument("--mnist-dir")
    p.add_argument("--images")
    p.add_argument("--labels")
    p.add_argument("--split", choices=("train", "test"), default="test", help="which configured split to use")
    p.add_argument("--json", dest="json_out", help="also dump the report as JSON here")
    p.add_argument("--threads", type=int)
    for key in MNIST_FILES:
        p.add_argument("--" + key.replace("_", "-"), dest=key)

    p = sub.add_parser("export-neurons", help="write neurons of one set as PGM images")
    p.add_argument("--model", required=True)
    p.add_argument("--class", dest="label", type=int, required=True)
    p.add_argument("--count", type=int, default=4)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--predicted", type=int, help="bucket's predicted class (bucketed models)")
    p.add_argument("--angle", type=float, default=0.0)

    p = sub.add_parser("export-bucket-samples", help="write training samples of one error bucket as PGM images")
    _add_run_options(p, flavor=False, model=False)
    p.add_argument("--class", dest="label", type=int, required=True)
    p.add_argument("--predicted", type=int, required=True)
    p.add_argument("--count", type=int, default=8)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("sweep-angles", help="train accuracy of symmetric rotation sets")
    _add_run_options(p, flavor=False, model=False)
    p.add_argument("--bound", type=float, default=30.0, help="largest angle considered (degrees)")
    p.add_argument("--gap", type=float, default=3.0, help="grid spacing (degrees)")
    p.add_argument("--pairs", action="store_true", help="try {-t, 0, t} sets instead of contiguous ranges")

    p = sub.add_parser("inspect", help="print a model file's header and summary")
    p.add_argument("model")
    return parser


def resolve_run_config(args: argparse.Namespace) -> RunConfig:
    values = read_config_file(args.config) if getattr(args, "config", None) else {}
    mnist_dir = getattr(args, "mnist_dir", None) or values.pop("mnist_dir", None)
    values.pop("mnist_dir", None)
    cfg = RunConfig()
    if mnist_dir:
        cfg = cfg.with_mnist_dir(mnist_dir)
    renames = {"m": "M", "angles": "angles_deg"}
    values = {renames.get(k, k): v for k, v in values.items()}
    cfg = replace(cfg, **values)
    for name in ("train_images", "train_labels", "test_images", "test_labels", "r", "M", "flavor", "model",
                 "renormalize_rotated", "threads"):
        v = getattr(args, name, None)
        if v is not None:
            cfg = replace(cfg, **{name: v})
    if getattr(args, "angles", None) is not None:
        cfg = replace(cfg, angles_deg=args.angles)
    try:
        cfg.model_config
    except ValueError as e:
        raise UsageError(str(e)) from None
    return cfg


def run(argv=None, out=sys.stdout) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:  # --help or a usage error
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "train":
            cmd_train(resolve_run_config(args), out)
        elif args.command == "eval":
            images, labels = args.images, args.labels
            if images is None or labels is None:
                cfg = resolve_run_config(args)
                images = images or getattr(cfg, f"{args.split}_images")
                labels = labels or getattr(cfg, f"{args.split}_labels")
            if images is None or labels is None:
                raise UsageError("eval needs --images/--labels, --mnist-dir, or a config with data paths")
            cmd_eval(args.model, images, labels, json_out=args.json_out, threads=args.threads, out=out)
        elif args.command == "export-neurons":
            cmd_export_neurons(args.model, args.label, args.count, args.out_dir,
                               predicted=args.predicted, angle=args.angle, out=out)
        elif args.command == "export-bucket-samples":
            cmd_export_bucket_samples(resolve_run_config(args), args.label, args.predicted, args.count,
                                      args.out_dir, out)
        elif args.command == "sweep-angles":
            cmd_sweep_angles(resolve_run_config(args), args.bound, args.gap, pairs=args.pairs, out=out)
        elif args.command == "inspect":
            cmd_inspect(args.model, out)
    except (UsageError, UnknownClass, CountTooLarge, ValueError) as e:
        print(f"pcann: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, MissingDiagonal, OSError) as e:
        print(f"pcann: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except NumericalFailure as e:
        print(f"pcann: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
