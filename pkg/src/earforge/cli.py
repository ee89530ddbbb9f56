"""Command-line interface.

``EARFORGE_THREADS`` caps numerical parallelism: it is exported to the BLAS
thread variables before numpy loads, which is why the heavy imports sit
inside functions here.
"""

from __future__ import annotations

import argparse
import os
import sys

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS")


def _apply_thread_cap():
    cap = os.environ.get("EARFORGE_THREADS")
    if cap:
        for var in _THREAD_VARS:
            os.environ.setdefault(var, cap)


_apply_thread_cap()


def _add_common(parser, manifest=True, out_dir=True, seed=True):
    if manifest:
        parser.add_argument("--manifest", required=True,
                            help="dataset manifest CSV")
    if out_dir:
        parser.add_argument("--out-dir", default="earforge_out",
                            help="artifact directory")
    if seed:
        parser.add_argument("--seed", type=int, default=0)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="earforge",
        description="Ear recognition toolkit: landmarks, normalization, "
                    "descriptors, fusion, evaluation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("normalize", help="geometrically normalize ears to 128x128")
    _add_common(p)
    p.add_argument("--config", help="pipeline config JSON (for weights paths)")

    p = sub.add_parser("augment", help="emit an expanded landmark-training manifest")
    _add_common(p)
    p.add_argument("--stage", choices=["1", "2"], default="1")
    p.add_argument("--out-size", type=int, default=96)

    p = sub.add_parser("train-landmarks", help="train the two-stage detector")
    _add_common(p)
    p.add_argument("--scale-factor", type=int, default=4)
    p.add_argument("--input-size", type=int, default=48)
    p.add_argument("--epochs", type=int, default=40)
    p.add_argument("--learning-rate", type=float, default=0.01)
    p.add_argument("--batch-size", type=int, default=128)

    p = sub.add_parser("detect", help="run the landmark detector over a manifest")
    _add_common(p)
    p.add_argument("--config", required=True, help="pipeline config JSON")

    p = sub.add_parser("train-descriptor", help="train the descriptor network")
    _add_common(p)
    p.add_argument("--scale-factor", type=int, default=8)
    p.add_argument("--input-size", type=int, default=64)
    p.add_argument("--softmax-epochs", type=int, default=40)
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--augment-per-image", type=int, default=0)

    p = sub.add_parser("train-side", help="train the left/right classifier")
    _add_common(p)
    p.add_argument("--scale-factor", type=int, default=8)
    p.add_argument("--input-size", type=int, default=48)
    p.add_argument("--epochs", type=int, default=30)

    p = sub.add_parser("extract", help="extract descriptors from normalized images")
    _add_common(p)
    p.add_argument("--descriptor", action="append", required=True,
                   help="descriptor kind (repeatable)")
    p.add_argument("--config", help="pipeline config JSON")
    p.add_argument("--allow-random-bsif", action="store_true")

    p = sub.add_parser("match", help="compute all-vs-all score matrices")
    _add_common(p)
    p.add_argument("--descriptor", action="append", required=True)

    p = sub.add_parser("fuse", help="min-max normalize and fuse score matrices")
    _add_common(p)
    p.add_argument("--descriptor", action="append", required=True)
    p.add_argument("--rule", choices=["sum", "min", "max", "product"],
                   default="sum")

    p = sub.add_parser("evaluate", help="run an evaluation protocol")
    _add_common(p)
    p.add_argument("--protocol", default="subject-split-allvsall",
                   choices=["awe-10fold", "subject-split-allvsall",
                            "uerc-overall", "uerc-scalability"])
    p.add_argument("--first-n", type=int, default=1800)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--side-policy", default="any-side",
                   choices=["any-side", "same-side-only"])

    p = sub.add_parser("pipeline", help="run the configured stage chain")
    _add_common(p)
    p.add_argument("--config", required=True, help="pipeline config JSON")

    p = sub.add_parser("make-fixture", help="generate a synthetic demo dataset")
    _add_common(p, manifest=False)
    p.add_argument("--subjects", type=int, default=8)
    p.add_argument("--per-subject", type=int, default=5)
    p.add_argument("--size", type=int, default=160)
    p.add_argument("--split", default="train", choices=["train", "test", "none"])

    return parser


def _config_from_args(args, stages, extra=None):
    from .pipeline import PipelineConfig

    if getattr(args, "config", None):
        config = PipelineConfig.from_json(args.config)
        config.stages = tuple(stages)
        config.out_dir = args.out_dir
        config.seed = args.seed
        config.__post_init__()
    else:
        config = PipelineConfig(stages=tuple(stages), out_dir=args.out_dir,
                                seed=args.seed, **(extra or {}))
    return config


def cmd_normalize(args):
    from .manifest import load_manifest
    from .pipeline import run_pipeline

    config = _config_from_args(args, ["normalize"])
    run_pipeline(config, load_manifest(args.manifest))
    print(f"normalized images written to {os.path.join(args.out_dir, 'normalized')}")
    return 0


def cmd_augment(args):
    import json
    from dataclasses import replace

    from .augmentation import (STAGE1_SPEC, STAGE2_SPEC,
                               augment_landmark_training, derive_seed)
    from .geometry import load_landmarks
    from .image import load_image
    from .manifest import load_manifest

    spec = STAGE1_SPEC if args.stage == "1" else STAGE2_SPEC
    spec = replace(spec, out_size=args.out_size)
    rows = load_manifest(args.manifest)
    os.makedirs(os.path.join(args.out_dir, "targets"), exist_ok=True)
    out_path = os.path.join(args.out_dir, f"augmented_stage{args.stage}.jsonl")
    count = 0
    with open(out_path, "w", encoding="utf-8") as fh:
        for i, row in enumerate(rows):
            if not row.get("landmarks_path"):
                continue
            img = load_image(row["image_path"])
            lm = load_landmarks(row["landmarks_path"])
            seed = derive_seed(args.seed, "augment", args.stage, i)
            samples = augment_landmark_training(img, lm, spec, seed)
            for k, (_, target) in enumerate(samples):
                target_path = os.path.join(
                    args.out_dir, "targets", f"{row['image_id']}_{k:03d}.json")
                with open(target_path, "w", encoding="utf-8") as tf:
                    json.dump([float(v) for v in target], tf)
                fh.write(json.dumps({
                    "source": row["image_path"],
                    "image_id": row["image_id"],
                    "rotation_index": k,
                    "rng_seed": seed,
                    "target_path": target_path,
                }, sort_keys=True) + "\n")
                count += 1
    print(f"{count} augmented samples indexed in {out_path}")
    return 0


def _training_inputs(args, need_landmarks):
    from .geometry import load_landmarks
    from .image import load_image
    from .manifest import load_manifest

    rows = load_manifest(args.manifest)
    train_rows = [r for r in rows if r.get("split") == "train"] or rows
    images, landmarks = [], []
    for row in train_rows:
        if need_landmarks and not row.get("landmarks_path"):
            continue
        images.append(load_image(row["image_path"]))
        if need_landmarks:
            landmarks.append(load_landmarks(row["landmarks_path"]))
    return train_rows, images, landmarks


def cmd_train_landmarks(args):
    import json

    from .estimators import TwoStageLandmarkDetector
    from .nn import save_history_csv

    _, images, landmarks = _training_inputs(args, need_landmarks=True)
    if not images:
        print("no training rows carry landmarks_path", file=sys.stderr)
        return 2
    detector = TwoStageLandmarkDetector(
        scale_factor=args.scale_factor, input_size=args.input_size,
        epochs=args.epochs, learning_rate=args.learning_rate,
        batch_size=args.batch_size, seed=args.seed)
    detector.fit(images, landmarks)
    os.makedirs(args.out_dir, exist_ok=True)
    s1 = os.path.join(args.out_dir, "stage1.earn")
    s2 = os.path.join(args.out_dir, "stage2.earn")
    detector.save(s1, s2)
    meta = {"scale_factor": args.scale_factor, "input_size": args.input_size}
    for path in (s1, s2):
        with open(path + ".meta.json", "w", encoding="utf-8") as fh:
            json.dump(meta, fh, sort_keys=True)
    save_history_csv(detector.history_["stage1"],
                     os.path.join(args.out_dir, "stage1_loss.csv"))
    save_history_csv(detector.history_["stage2"],
                     os.path.join(args.out_dir, "stage2_loss.csv"))
    print(f"trained detector saved to {s1} and {s2}")
    return 0


def cmd_detect(args):
    from .manifest import load_manifest
    from .pipeline import run_pipeline

    config = _config_from_args(args, ["detect"])
    run_pipeline(config, load_manifest(args.manifest))
    print(f"landmarks written to {os.path.join(args.out_dir, 'landmarks')}")
    return 0


def cmd_train_descriptor(args):
    import json

    from .estimators import CnnDescriptorExtractor
    from .image import load_image
    from .manifest import load_manifest
    from .nn import save_history_csv

    rows = load_manifest(args.manifest)
    train_rows = [r for r in rows if r.get("split") == "train"] or rows
    normalized_dir = os.path.join(args.out_dir, "normalized")
    images, labels = [], []
    for row in train_rows:
        png = os.path.join(normalized_dir, row["image_id"] + ".png")
        images.append(load_image(png if os.path.exists(png) else row["image_path"]))
        labels.append(row["subject_id"])
    extractor = CnnDescriptorExtractor(
        scale_factor=args.scale_factor, input_size=args.input_size,
        softmax_epochs=args.softmax_epochs, patience_epochs=args.patience,
        learning_rate=args.learning_rate, batch_size=args.batch_size,
        augment_per_image=args.augment_per_image, seed=args.seed)
    extractor.fit(images, labels)
    path = os.path.join(args.out_dir, "descriptor.earn")
    extractor.save(path)
    with open(path + ".meta.json", "w", encoding="utf-8") as fh:
        json.dump({"scale_factor": args.scale_factor,
                   "input_size": args.input_size}, fh, sort_keys=True)
    save_history_csv(extractor.history_,
                     os.path.join(args.out_dir, "descriptor_loss.csv"))
    print(f"descriptor network saved to {path}")
    return 0


def cmd_train_side(args):
    import json

    from .estimators import EarSideClassifier
    from .image import load_image
    from .manifest import load_manifest

    rows = load_manifest(args.manifest)
    train_rows = [r for r in rows if r.get("split") == "train"] or rows
    usable = [r for r in train_rows if r["side"] in ("L", "R")]
    if not usable:
        print("no rows with known side labels", file=sys.stderr)
        return 2
    images = [load_image(r["image_path"]) for r in usable]
    clf = EarSideClassifier(scale_factor=args.scale_factor,
                            input_size=args.input_size, epochs=args.epochs,
                            seed=args.seed)
    clf.fit(images, [r["side"] for r in usable])
    path = os.path.join(args.out_dir, "side.earn")
    os.makedirs(args.out_dir, exist_ok=True)
    clf.save(path)
    with open(path + ".meta.json", "w", encoding="utf-8") as fh:
        json.dump({"scale_factor": args.scale_factor,
                   "input_size": args.input_size}, fh, sort_keys=True)
    print(f"side classifier saved to {path}")
    return 0


def cmd_extract(args):
    from .manifest import load_manifest
    from .pipeline import run_pipeline

    config = _config_from_args(args, ["describe"],
                               extra={"descriptors": tuple(args.descriptor)})
    config.descriptors = tuple(args.descriptor)
    config.allow_random_bsif = args.allow_random_bsif or config.allow_random_bsif
    config.__post_init__()
    run_pipeline(config, load_manifest(args.manifest))
    print(f"descriptor stores written to {os.path.join(args.out_dir, 'descriptors')}")
    return 0


def cmd_match(args):
    from .manifest import load_manifest
    from .pipeline import PipelineConfig, run_pipeline

    config = PipelineConfig(stages=("match",), descriptors=tuple(args.descriptor),
                            out_dir=args.out_dir, seed=args.seed)
    run_pipeline(config, load_manifest(args.manifest))
    print(f"score matrices written to {os.path.join(args.out_dir, 'matrices')}")
    return 0


def cmd_fuse(args):
    from .manifest import load_manifest
    from .pipeline import PipelineConfig, run_pipeline

    config = PipelineConfig(stages=("fuse",), descriptors=tuple(args.descriptor),
                            fusion_rule=args.rule, out_dir=args.out_dir,
                            seed=args.seed)
    run_pipeline(config, load_manifest(args.manifest))
    print(f"fused matrix written to {os.path.join(args.out_dir, 'matrices')}")
    return 0


def cmd_evaluate(args):
    from .manifest import load_manifest
    from .pipeline import PipelineConfig, run_pipeline

    params = {}
    if args.protocol == "uerc-overall":
        params["first_n"] = args.first_n
    if args.protocol == "awe-10fold":
        params["k"] = args.folds
    config = PipelineConfig(stages=("evaluate",), protocol=args.protocol,
                            protocol_params=params, side_policy=args.side_policy,
                            out_dir=args.out_dir, seed=args.seed)
    report = run_pipeline(config, load_manifest(args.manifest))
    print(report.to_json(), end="")
    return 0


def cmd_pipeline(args):
    from .manifest import load_manifest
    from .pipeline import PipelineConfig, run_pipeline

    config = PipelineConfig.from_json(args.config)
    config.out_dir = args.out_dir
    config.seed = args.seed
    config.__post_init__()
    report = run_pipeline(config, load_manifest(args.manifest))
    if report is not None:
        print(f"rank1={report.rank1:.4f} rank5={report.rank5:.4f} "
              f"eer={report.eer:.4f} auc={report.auc:.4f}")
        print(f"report at {os.path.join(args.out_dir, 'report.json')}")
    return 0


def cmd_make_fixture(args):
    from .synthetic import build_fixture

    manifest = build_fixture(args.out_dir, n_subjects=args.subjects,
                             per_subject=args.per_subject, seed=args.seed,
                             size=args.size, split=args.split)
    print(f"fixture manifest at {manifest}")
    return 0


COMMANDS = {
    "normalize": cmd_normalize,
    "augment": cmd_augment,
    "train-landmarks": cmd_train_landmarks,
    "detect": cmd_detect,
    "train-descriptor": cmd_train_descriptor,
    "train-side": cmd_train_side,
    "extract": cmd_extract,
    "match": cmd_match,
    "fuse": cmd_fuse,
    "evaluate": cmd_evaluate,
    "pipeline": cmd_pipeline,
    "make-fixture": cmd_make_fixture,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except Exception as exc:  # contract and IO errors exit nonzero with a message
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
