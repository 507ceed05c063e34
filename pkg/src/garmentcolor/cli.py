"""Command-line interface.

Every subcommand exits 0 on success. Failures print one line,
``error: <Category>: <detail>``, to stderr and exit with status 2.

Defaults for any option can come from a JSON config file (a flat object of
option names to values). Its path is ``--config`` or, failing that, the
``GARMENTCOLOR_CONFIG`` environment variable; flags on the command line win.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .abstraction import DEFAULT_EDGE_THRESHOLD, LEVELS, transform
from .classify import (
    ANCHOR_SUFFIX,
    HISTOGRAM,
    MULTILABEL,
    SWATCH,
    ClassifierModel,
    FeatureVector,
    anchor_features,
    histogram_features,
    load_model,
    majority_model,
    predict_multilabel,
    predict_top1,
    save_model,
    swatch_features,
    train_multilabel,
    train_softmax,
)
from .errors import EmptyData, GarmentColorError
from .manifest import AnnotationRecord, load_manifest, resolve, save_manifest, split_records
from .metrics import delta_e_stats, f1_scores, lift, precision_at_k, top1_accuracy
from .naming import BK_FAMILIES, DEFAULT_C_MIN, DEFAULT_L_WHITE, css_table, monk_level
from .palette import DEFAULT_MAX_SAMPLES, N_SLOTS, MaskedImage, annotate
from .pipeline import (
    DEFAULT_RADIUS,
    Example,
    PipelineModels,
    RegressorModel,
    compare_stages,
    train_lab_regressor,
    train_pipeline,
)
from .synth import SynthSpec, write_synthetic

REPORT_FORMAT_VERSION = 1
CONFIG_ENV = "GARMENTCOLOR_CONFIG"
TASKS = ("bk", "css", "regress", "multilabel", "anchor", "pipeline")
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")


class CliError(GarmentColorError):
    """Bad command-line usage detected after argument parsing."""


# ---------------------------------------------------------------- features


class FeatureSource:
    """Builds feature vectors for manifest records, loading images lazily."""

    def __init__(self, manifest_path, kind: str = SWATCH, bins: int = 8):
        if kind not in (SWATCH, HISTOGRAM):
            raise CliError(f"unknown feature kind {kind!r}")
        self.manifest_path = Path(manifest_path)
        self.kind = kind
        self.bins = bins

    def __call__(self, rec: AnnotationRecord) -> FeatureVector:
        if self.kind == SWATCH:
            return swatch_features(rec.palette)
        img = MaskedImage.load(resolve(self.manifest_path, rec.image_path), resolve(self.manifest_path, rec.mask_path))
        return histogram_features(img, self.bins)


def slot_label(rec: AnnotationRecord, slot: int) -> str:
    if not 1 <= slot <= N_SLOTS:
        raise CliError(f"slot must be in 1..{N_SLOTS}")
    return rec.css_c1 if slot == 1 else rec.slot_names[slot - 1]


# ---------------------------------------------------------------- config


def load_config(path) -> dict:
    if not path:
        return {}
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise CliError(f"config {path} is not valid JSON: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise CliError("config must be a JSON object")
    return cfg


# ---------------------------------------------------------------- commands


def _write_json(obj, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n", encoding="utf-8")


def _load_metadata(path) -> dict[str, dict]:
    out = {}
    if path is None:
        return out
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if line.strip():
            d = json.loads(line)
            if "id" not in d:
                raise CliError(f"metadata line {lineno} has no id")
            out[str(d["id"])] = d
    return out


def _image_files(directory) -> list[Path]:
    d = Path(directory)
    if not d.is_dir():
        raise CliError(f"not a directory: {d}")
    return sorted(p for p in d.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def _mask_for(masks_dir: Path, image: Path) -> Path:
    for suffix in (".png", image.suffix):
        p = masks_dir / (image.stem + suffix)
        if p.exists():
            return p
    raise CliError(f"no mask for {image.name} in {masks_dir}")


def _rel(path: Path, base: Path) -> str:
    try:
        return os.path.relpath(path.resolve(), base.resolve())
    except ValueError:  # different drive on Windows
        return str(path.resolve())


def cmd_annotate(args) -> None:
    out = Path(args.out)
    meta = _load_metadata(args.metadata)
    records = []
    images = _image_files(args.images)
    if not images:
        raise EmptyData(f"no images in {args.images}")
    for image in images:
        mask = _mask_for(Path(args.masks), image)
        img = MaskedImage.load(image, mask)
        ann = annotate(img, args.seed, max_samples=args.max_samples, c_min=args.c_min, l_white=args.l_white)
        m = meta.get(image.stem, {})
        records.append(
            AnnotationRecord(
                id=image.stem,
                image_path=_rel(image, out.parent),
                mask_path=_rel(mask, out.parent),
                designer=str(m.get("designer", "")),
                season=str(m.get("season", "")),
                year=None if m.get("year") is None else int(m["year"]),
                palette=ann.palette,
                chromatic=ann.chromatic,
                bk_c1=ann.bk_c1,
                css_c1=ann.css_c1,
                monk=m.get("monk"),
                seed=args.seed,
            ).validate(None)
        )
    out.parent.mkdir(parents=True, exist_ok=True)
    save_manifest(records, out)
    print(f"annotated {len(records)} images -> {out}")


def cmd_abstract(args) -> None:
    img = MaskedImage.load(args.input, args.mask)
    res = transform(img, args.level, args.edge_threshold)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    res.save(args.out, args.out_mask)
    print(f"{args.level} -> {args.out}")


def cmd_synth(args) -> None:
    d = load_config(args.spec) if args.spec else {}
    for key in ("records_per_house", "noise", "texture", "seed", "size"):
        v = getattr(args, key)
        if v is not None:
            d[key] = v
    spec = SynthSpec.from_dict(d)
    path = write_synthetic(spec, args.out)
    _write_json({"format_version": REPORT_FORMAT_VERSION, **spec.to_dict()}, Path(args.out) / "spec.json")
    print(f"wrote {len(spec.houses) * spec.records_per_house} records -> {path}")


def _hyper(args) -> dict:
    return {"lr": args.lr, "epochs": args.epochs, "l2": args.l2, "seed": args.seed}


def cmd_train(args) -> None:
    records = split_records(load_manifest(args.manifest, None), args.split, args.test_fraction)
    if not records:
        raise EmptyData(f"no records in the {args.split!r} split")
    feats = FeatureSource(args.manifest, args.features, args.bins)
    X = [feats(r) for r in records]
    info = {
        "task": args.task,
        "features": args.features,
        "bins": args.bins,
        "slot": args.slot,
        "split": args.split,
        "test_fraction": args.test_fraction,
        "seed": args.seed,
    }
    if args.task == "pipeline":
        examples = [Example(f, r.bk_c1, r.css_c1, r.palette.c1) for f, r in zip(X, records)]
        models = train_pipeline(examples, ridge=args.ridge, **_hyper(args))
        models.metadata.update(info)
        models.metadata["bk_majority"] = majority_model([r.bk_c1 for r in records], BK_FAMILIES).to_dict()["bias"]
        models.save(args.out)
        print(f"trained pipeline on {len(records)} records -> {args.out}")
        return
    if args.task == "regress":
        model = train_lab_regressor([(f, r.palette.c1) for f, r in zip(X, records)], args.ridge)
    elif args.task == "bk":
        model = train_softmax([(f, r.bk_c1) for f, r in zip(X, records)], BK_FAMILIES, **_hyper(args))
    elif args.task == "css":
        labels = [slot_label(r, args.slot) for r in records]
        model = train_softmax(list(zip(X, labels)), sorted(set(labels)), **_hyper(args))
    elif args.task == "multilabel":
        sets = [r.present_names for r in records]
        model = train_multilabel(list(zip(X, sets)), sorted(set().union(*sets)), **_hyper(args))
    elif args.task == "anchor":
        slot = args.slot if args.slot > 1 else 2
        # Every CSS name is a valid anchor, so unseen test anchors still encode.
        anchors = sorted(css_table().names)
        XA = [anchor_features(f, r.css_c1, anchors) for f, r in zip(X, records)]
        labels = [slot_label(r, slot) for r in records]
        model = train_softmax(list(zip(XA, labels)), sorted(set(labels)), **_hyper(args))
        info.update(slot=slot, anchor_vocab=anchors)
    else:  # pragma: no cover - argparse restricts choices
        raise CliError(f"unknown task {args.task!r}")
    if isinstance(model, ClassifierModel) and args.task != "multilabel":
        labels = [r.bk_c1 for r in records] if args.task == "bk" else [
            slot_label(r, info["slot"] if args.task == "anchor" else args.slot) for r in records
        ]
        base = majority_model(labels, model.vocab)
        info["majority_label"] = predict_top1(base, [X[0]])[0]
    model.metadata.update(info)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    save_model(model, args.out)
    print(f"trained {args.task} model on {len(records)} records -> {args.out}")


def _evaluate_pipeline(args, records) -> dict:
    models = PipelineModels.load(args.models)
    meta = models.metadata
    feats = FeatureSource(args.manifest, meta.get("features", SWATCH), int(meta.get("bins", 8)))
    examples = [Example(feats(r), r.bk_c1, r.css_c1, r.palette.c1) for r in records]
    radius = DEFAULT_RADIUS if args.radius is None else args.radius
    report = compare_stages(examples, models, radius)
    truth = [r.bk_c1 for r in records]
    pred_bk = predict_top1(models.bk_model, [e.features for e in examples])
    acc = top1_accuracy(pred_bk, truth)
    train_prior = meta.get("bk_majority")
    if train_prior is not None:
        majority_label = BK_FAMILIES[int(np.argmax(train_prior))]
    else:
        majority_label = predict_top1(majority_model(truth, BK_FAMILIES), [examples[0].features])[0]
    maj = top1_accuracy([majority_label] * len(truth), truth)
    return {
        "kind": "pipeline",
        "seed": meta.get("seed"),
        "features": meta.get("features", SWATCH),
        **report.to_dict(),
        "bk": {"accuracy": acc, "majority_label": majority_label, "majority_accuracy": maj, "lift_pp": lift(acc, maj)},
    }


def _evaluate_model(args, records) -> dict:
    model = load_model(args.models)
    meta = model.metadata
    task = meta.get("task")
    feats = FeatureSource(args.manifest, meta.get("features", SWATCH), int(meta.get("bins", 8)))
    X = [feats(r) for r in records]
    out = {"kind": task, "seed": meta.get("seed"), "features": meta.get("features", SWATCH), "n": len(records)}
    if isinstance(model, RegressorModel):
        out.update(delta_e_stats(model.predict_array(X), np.array([r.palette.c1 for r in records])))
        out["kind"] = "regress"
        return out
    if model.kind == MULTILABEL:
        scores = np.array([predict_multilabel(model, f)[0] for f in X])
        # Labels never seen in training cannot be scored; count and drop them.
        known = set(model.vocab)
        truth = [r.present_names & known for r in records]
        out["unseen_labels"] = sum(len(r.present_names - known) for r in records)
        pred_sets = [predict_multilabel(model, f)[1] for f in X]
        k = min(args.k, len(model.vocab))
        out.update(precision_at_k=precision_at_k(scores, truth, k, model.vocab), k=k)
        out.update(f1=f1_scores(pred_sets, truth, model.vocab))
        return out
    if model.schema.endswith(ANCHOR_SUFFIX):
        X = [anchor_features(f, r.css_c1, meta["anchor_vocab"]) for f, r in zip(X, records)]
    if task == "bk":
        truth = [r.bk_c1 for r in records]
    else:
        truth = [slot_label(r, int(meta.get("slot", 1))) for r in records]
    acc = top1_accuracy(predict_top1(model, X), truth)
    out["accuracy"] = acc
    if "majority_label" in meta:
        maj = top1_accuracy([meta["majority_label"]] * len(truth), truth)
        out.update(majority_label=meta["majority_label"], majority_accuracy=maj, lift_pp=lift(acc, maj))
    return out


def cmd_evaluate(args) -> None:
    records = split_records(load_manifest(args.manifest, None), args.split, args.test_fraction)
    if not records:
        raise EmptyData(f"no records in the {args.split!r} split")
    if Path(args.models).is_dir():
        body = _evaluate_pipeline(args, records)
    else:
        body = _evaluate_model(args, records)
    report = {"format_version": REPORT_FORMAT_VERSION, "split": args.split, **body}
    _write_json(report, args.report)
    if "rows" in report:
        from .plotting import stage_figure, write_stage_csv

        if args.csv:
            write_stage_csv(report["rows"], args.csv)
        if args.figure:
            stage_figure(report["rows"], args.figure)
        for r in report["rows"]:
            print(f"{r['name']:<20} mean={r['mean_delta_e']:.3f} median={r['median_delta_e']:.3f} bk={r['bk_accuracy']:.3f}")
    elif args.csv or args.figure:
        raise CliError("--csv and --figure apply only to pipeline reports")
    print(f"report -> {args.report}")


def cmd_name(args) -> None:
    img = MaskedImage.load(args.image, args.mask)
    ann = annotate(img, args.seed, max_samples=args.max_samples, c_min=args.c_min, l_white=args.l_white)
    c1 = ann.palette.c1
    line = f"family={ann.bk_c1} css={ann.css_c1} lab={c1.L:.2f},{c1.a:.2f},{c1.b:.2f} chromatic={ann.chromatic}"
    if args.monk:
        line += f" monk={monk_level(c1)}"
    print(line)


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="garmentcolor", description="Garment color annotation and prediction.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--config", default=os.environ.get(CONFIG_ENV), help=f"JSON defaults file (env {CONFIG_ENV})")
    sub = p.add_subparsers(dest="command", required=True)

    def naming_opts(sp):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--max-samples", type=int, default=DEFAULT_MAX_SAMPLES)
        sp.add_argument("--c-min", type=float, default=DEFAULT_C_MIN)
        sp.add_argument("--l-white", type=float, default=DEFAULT_L_WHITE)

    sp = sub.add_parser("annotate", help="extract palettes and names for a directory of images")
    sp.add_argument("--images", required=True)
    sp.add_argument("--masks", required=True)
    sp.add_argument("--out", required=True, help="manifest path (JSON Lines)")
    sp.add_argument("--metadata", help="JSON Lines with id, designer, season, year")
    naming_opts(sp)
    sp.set_defaults(func=cmd_annotate)

    sp = sub.add_parser("abstract", help="render one abstraction level of a masked image")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--mask")
    sp.add_argument("--level", choices=LEVELS, required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--out-mask")
    sp.add_argument("--edge-threshold", type=float, default=DEFAULT_EDGE_THRESHOLD)
    sp.set_defaults(func=cmd_abstract)

    sp = sub.add_parser("synth", help="generate a synthetic corpus")
    sp.add_argument("--spec", help="JSON synthetic spec; the built-in three-house regime if omitted")
    sp.add_argument("--out", required=True)
    sp.add_argument("--records-per-house", type=int)
    sp.add_argument("--noise", type=float)
    sp.add_argument("--texture")
    sp.add_argument("--size", type=int)
    sp.add_argument("--seed", type=int)
    sp.set_defaults(func=cmd_synth)

    def split_opts(sp, default):
        sp.add_argument("--split", choices=("all", "train", "test"), default=default)
        sp.add_argument("--test-fraction", type=float, default=0.2)

    sp = sub.add_parser("train", help="train a classifier, regressor or full pipeline")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out", required=True, help="model file, or a directory for --task pipeline")
    sp.add_argument("--task", choices=TASKS, required=True)
    sp.add_argument("--features", choices=(SWATCH, HISTOGRAM), default=SWATCH)
    sp.add_argument("--bins", type=int, default=8)
    sp.add_argument("--slot", type=int, default=1, help="palette slot for css/anchor targets")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--lr", type=float, default=2.0)
    sp.add_argument("--epochs", type=int, default=500)
    sp.add_argument("--l2", type=float, default=1e-4)
    sp.add_argument("--ridge", type=float, default=1e-3)
    split_opts(sp, "train")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("evaluate", help="score models on a manifest and write a JSON report")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--models", required=True, help="pipeline directory or single model file")
    sp.add_argument("--radius", type=float)
    sp.add_argument("--report", required=True)
    sp.add_argument("--csv", help="stage rows as CSV (pipeline only)")
    sp.add_argument("--figure", help="stage comparison PNG (pipeline only)")
    sp.add_argument("--k", type=int, default=3, help="k for precision@k (multilabel)")
    split_opts(sp, "test")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("name", help="name the dominant color of one masked image")
    sp.add_argument("--image", required=True)
    sp.add_argument("--mask")
    sp.add_argument("--monk", action="store_true", help="also print the nearest Monk level")
    naming_opts(sp)
    sp.set_defaults(func=cmd_name)
    return p


def _apply_config(parser: argparse.ArgumentParser, argv) -> argparse.Namespace:
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config", default=os.environ.get(CONFIG_ENV))
    pre, _ = probe.parse_known_args(argv)
    cfg = load_config(pre.config)
    if cfg:
        subs = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
        for sp in subs.choices.values():
            dests = {a.dest for a in sp._actions}
            sp.set_defaults(**{k.replace("-", "_"): v for k, v in cfg.items() if k.replace("-", "_") in dests})
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        args.func(args)
    except GarmentColorError as exc:
        print(f"error: {exc.category}: {exc}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as exc:
        detail = f"{exc.strerror}: {exc.filename}" if isinstance(exc, OSError) and exc.filename else str(exc)
        print(f"error: IOError: {detail}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: ValueError: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
