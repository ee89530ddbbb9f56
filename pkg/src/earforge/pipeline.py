"""End-to-end pipeline: stage orchestration, artifacts, resume.

Stages run in the fixed order detect -> normalize -> describe -> match ->
fuse -> evaluate; an enabled set must be contiguous (a run may start at any
stage, loading its inputs from ``out_dir``, but may not skip a stage in the
middle).  Every artifact write is atomic (temp file + rename) and every
byte is a deterministic function of (inputs, config, seed).
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .evaluation import IdentityLabels, export_curve_csv, run_protocol
from .exceptions import (
    MissingArtifactError,
    ProtocolConfigError,
    StageFailureError,
)
from .geometry import load_landmarks, save_landmarks
from .image import flip_horizontal, load_image, save_image
from .manifest import load_manifest
from .matching import (
    ScoreMatrix,
    export_score_csv,
    fuse,
    load_score_matrix,
    minmax_normalize,
    save_score_matrix,
    score_matrix,
)
from .augmentation import derive_seed
from .descriptors import (
    BsifParams,
    Descriptor,
    FAMILY_METRICS,
    HANDCRAFTED_KINDS,
    default_params,
    extract_handcrafted,
    pca_fit,
    pca_project,
)
from .normalization import CropWindow, crop_detector_input, landmark_crop_window, normalize_geometric

STAGE_ORDER = ("detect", "normalize", "describe", "match", "fuse", "evaluate")
DESCRIPTOR_KINDS = HANDCRAFTED_KINDS + ("pca", "cnn")


@dataclass
class PipelineConfig:
    stages: tuple = STAGE_ORDER[1:]  # detect is optional when truth landmarks exist
    descriptors: tuple = ("hog",)
    fusion_rule: str = "sum"
    fusion_weights: tuple = None
    protocol: str = "subject-split-allvsall"
    protocol_params: dict = field(default_factory=dict)
    seed: int = 0
    out_dir: str = "earforge_out"
    weights: dict = field(default_factory=dict)   # stage1/stage2/descriptor/side
    net_options: dict = field(default_factory=dict)  # scale_factor, input sizes
    allow_random_bsif: bool = False
    side_policy: str = "any-side"

    def __post_init__(self):
        self.stages = tuple(self.stages)
        self.descriptors = tuple(self.descriptors)
        unknown = [s for s in self.stages if s not in STAGE_ORDER]
        if unknown:
            raise ProtocolConfigError(f"unknown stages: {unknown}")
        idx = sorted(STAGE_ORDER.index(s) for s in self.stages)
        if not idx:
            raise ProtocolConfigError("no stages enabled")
        if idx != list(range(idx[0], idx[-1] + 1)):
            missing = [STAGE_ORDER[i] for i in range(idx[0], idx[-1] + 1)
                       if i not in idx]
            raise ProtocolConfigError(
                f"stages must form a contiguous chain; missing {missing}")
        bad = [d for d in self.descriptors if d not in DESCRIPTOR_KINDS]
        if bad:
            raise ProtocolConfigError(f"unknown descriptors: {bad}")

    @staticmethod
    def from_json(path):
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        return PipelineConfig(**data)

    def to_json(self, path):
        data = {
            "stages": list(self.stages),
            "descriptors": list(self.descriptors),
            "fusion_rule": self.fusion_rule,
            "fusion_weights": list(self.fusion_weights) if self.fusion_weights else None,
            "protocol": self.protocol,
            "protocol_params": self.protocol_params,
            "seed": self.seed,
            "out_dir": self.out_dir,
            "weights": self.weights,
            "net_options": self.net_options,
            "allow_random_bsif": self.allow_random_bsif,
            "side_policy": self.side_policy,
        }
        write_text_atomic(path, json.dumps(data, sort_keys=True, indent=2) + "\n")


def write_bytes_atomic(path, data):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def write_text_atomic(path, text):
    write_bytes_atomic(path, text.encode("utf-8"))


def _path(config, *parts):
    return os.path.join(config.out_dir, *parts)


def _detector_from_config(config):
    from .estimators import TwoStageLandmarkDetector

    w = config.weights
    if "stage1" not in w or "stage2" not in w:
        raise MissingArtifactError(
            "detect stage needs weights.stage1 and weights.stage2 paths")
    opts = config.net_options
    det = TwoStageLandmarkDetector(
        scale_factor=opts.get("landmark_scale_factor", 4),
        input_size=opts.get("landmark_input_size", 48))
    return det.load(w["stage1"], w["stage2"])


def _crop_window_for_row(row, img, truth_lm):
    if row.get("bbox"):
        x, y, w, h = row["bbox"]
        return CropWindow(center=(x + w / 2.0, y + h / 2.0), size=max(w, h))
    if truth_lm is not None:
        return landmark_crop_window(truth_lm, margin=1.3)
    h, w = img.shape
    return CropWindow(center=((w - 1) / 2.0, (h - 1) / 2.0), size=float(max(w, h)))


def stage_detect(config, rows):
    detector = _detector_from_config(config)
    size = detector.input_size
    for row in rows:
        img = load_image(row["image_path"])
        truth = load_landmarks(row["landmarks_path"]) if row.get("landmarks_path") else None
        window = _crop_window_for_row(row, img, truth)
        crop, crop_map = crop_detector_input(img, window, out_size=size,
                                             return_map=True)
        [lm] = detector.predict([crop], [crop_map])
        out = _path(config, "landmarks", row["image_id"] + ".json")
        os.makedirs(os.path.dirname(out), exist_ok=True)
        save_landmarks(lm, out)


def _landmarks_for_row(config, row, detect_enabled):
    detected = _path(config, "landmarks", row["image_id"] + ".json")
    if os.path.exists(detected):
        return load_landmarks(detected)
    if detect_enabled:
        raise MissingArtifactError(f"no detected landmarks for {row['image_id']}")
    if row.get("landmarks_path"):
        return load_landmarks(row["landmarks_path"])
    raise MissingArtifactError(
        f"{row['image_id']}: no landmarks (enable detect or provide "
        "landmarks_path)")


def _side_classifier(config):
    from .estimators import EarSideClassifier

    path = config.weights.get("side")
    if not path:
        return None
    opts = config.net_options
    clf = EarSideClassifier(scale_factor=opts.get("side_scale_factor", 8),
                            input_size=opts.get("side_input_size", 48))
    return clf.load(path)


def stage_normalize(config, rows, detect_enabled):
    classifier = _side_classifier(config)
    for row in rows:
        img = load_image(row["image_path"])
        lm = _landmarks_for_row(config, row, detect_enabled)
        normalized, amap = normalize_geometric(img, lm, return_map=True)
        side = row["side"]
        classified = None
        if side == "U" and classifier is not None:
            window = landmark_crop_window(lm, margin=1.3)
            crop = crop_detector_input(img, window,
                                       out_size=classifier.input_size)
            classified = str(classifier.predict([crop])[0])
            side = classified
        elif side == "U":
            side = "L"  # documented fallback: assume canonical orientation
        flipped = side == "R"
        if flipped:
            normalized = flip_horizontal(normalized)
        png = _path(config, "normalized", row["image_id"] + ".png")
        os.makedirs(os.path.dirname(png), exist_ok=True)
        save_image(normalized, png)
        sidecar = {
            "affine_matrix": amap.matrix.tolist(),
            "affine_translation": amap.translation.tolist(),
            "source_side": row["side"],
            "classified_side": classified,
            "flipped": flipped,
            "canonical_side": "left",
        }
        write_text_atomic(_path(config, "normalized",
                                row["image_id"] + ".transform.json"),
                          json.dumps(sidecar, sort_keys=True) + "\n")


def _load_normalized(config, row):
    png = _path(config, "normalized", row["image_id"] + ".png")
    sidecar = png.replace(".png", ".transform.json")
    if not os.path.exists(png) or not os.path.exists(sidecar):
        raise MissingArtifactError(f"no normalized image for {row['image_id']}")
    with open(sidecar, "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    if meta.get("canonical_side") != "left":
        raise StageFailureError("describe", ValueError(
            f"{row['image_id']}: normalized image is not canonical-left"))
    return load_image(png)


def _cnn_extractor(config):
    from .estimators import CnnDescriptorExtractor

    path = config.weights.get("descriptor")
    if not path:
        raise MissingArtifactError("cnn descriptor requested but no "
                                   "weights.descriptor path configured")
    meta_path = path + ".meta.json"
    opts = {}
    if os.path.exists(meta_path):
        with open(meta_path, "r", encoding="utf-8") as fh:
            opts = json.load(fh)
    extractor = CnnDescriptorExtractor(
        scale_factor=opts.get("scale_factor",
                              config.net_options.get("descriptor_scale_factor", 8)),
        input_size=opts.get("input_size",
                            config.net_options.get("descriptor_input_size", 64)))
    return extractor.load(path)


def stage_describe(config, rows):
    from .nn.weights import save_weights

    images = {row["image_id"]: _load_normalized(config, row) for row in rows}
    train_rows = [r for r in rows if r.get("split") == "train"] or rows
    for kind in config.descriptors:
        store = {}
        if kind == "pca":
            model = pca_fit([images[r["image_id"]] for r in train_rows])
            for row in rows:
                store[row["image_id"]] = pca_project(model,
                                                     images[row["image_id"]]).values
        elif kind == "cnn":
            extractor = _cnn_extractor(config)
            ids = [row["image_id"] for row in rows]
            feats = extractor.transform([images[i] for i in ids])
            store = dict(zip(ids, feats))
        else:
            params = default_params(kind)
            if kind == "bsif":
                params = BsifParams(allow_random=config.allow_random_bsif,
                                    filter_path=config.weights.get("bsif"))
            for row in rows:
                store[row["image_id"]] = extract_handcrafted(
                    kind, images[row["image_id"]], params).values
        base = _path(config, "descriptors", kind)
        os.makedirs(os.path.dirname(base), exist_ok=True)
        save_weights(base + ".earn", store)
        write_text_atomic(base + ".meta.json", json.dumps(
            {"kind": kind, "metric": FAMILY_METRICS[kind]}, sort_keys=True) + "\n")


def _load_descriptors(config, kind, ids):
    from .nn.weights import load_weights

    base = _path(config, "descriptors", kind)
    if not os.path.exists(base + ".earn"):
        raise MissingArtifactError(f"descriptor store missing for {kind!r}")
    with open(base + ".meta.json", "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    tensors = load_weights(base + ".earn")
    missing = [i for i in ids if i not in tensors]
    if missing:
        raise MissingArtifactError(f"{kind} store lacks ids: {missing[:5]}")
    return [Descriptor(values=np.asarray(tensors[i], dtype=np.float64),
                       metric=meta["metric"], kind=kind) for i in ids]


def eval_ids(rows):
    """Images entering matching/evaluation: the test split when present."""
    test = [r["image_id"] for r in rows if r.get("split") == "test"]
    return test or [r["image_id"] for r in rows]


def stage_match(config, rows):
    ids = eval_ids(rows)
    for kind in config.descriptors:
        descs = _load_descriptors(config, kind, ids)
        matrix = score_matrix(ids, descs, ids, descs, kind=kind)
        base = _path(config, "matrices", kind)
        os.makedirs(os.path.dirname(base), exist_ok=True)
        save_score_matrix(matrix, base)
        export_score_csv(matrix, base + ".csv")


def stage_fuse(config, rows):
    matrices = []
    for kind in config.descriptors:
        base = _path(config, "matrices", kind)
        if not os.path.exists(base + ".earn"):
            raise MissingArtifactError(f"score matrix missing for {kind!r}")
        matrices.append(minmax_normalize(load_score_matrix(base)))
    fused = fuse(matrices, rule=config.fusion_rule,
                 weights=config.fusion_weights)
    base = _path(config, "matrices", "fused")
    save_score_matrix(fused, base)
    export_score_csv(fused, base + ".csv")


def stage_evaluate(config, rows):
    base = _path(config, "matrices", "fused")
    if not os.path.exists(base + ".earn"):
        raise MissingArtifactError("fused score matrix missing")
    matrix = load_score_matrix(base)
    labels = IdentityLabels.from_rows(rows)
    params = dict(config.protocol_params)
    folds = {r["image_id"]: r["fold"] for r in rows if r.get("fold") is not None}
    if folds and "folds" not in params and config.protocol == "awe-10fold":
        params["folds"] = folds
    report = run_protocol(config.protocol, matrix, labels,
                          side_policy=config.side_policy,
                          seed=derive_seed(config.seed, "evaluate"), **params)
    write_text_atomic(_path(config, "report.json"), report.to_json())
    export_curve_csv(_path(config, "cmc.csv"), ["rank", "fraction"],
                     [(k + 1, v) for k, v in enumerate(report.cmc)])
    export_curve_csv(_path(config, "roc.csv"), ["far", "frr"], report.roc)
    return report


def run_pipeline(config: PipelineConfig, manifest_rows):
    """Execute the configured stage chain; returns the EvalReport (or None).

    Failures inside a stage are wrapped in StageFailureError carrying the
    stage name; artifacts written before the failure stay on disk for resume.
    """
    os.makedirs(config.out_dir, exist_ok=True)
    rows = list(manifest_rows)
    report = None
    for stage in STAGE_ORDER:
        if stage not in config.stages:
            continue
        try:
            if stage == "detect":
                stage_detect(config, rows)
            elif stage == "normalize":
                stage_normalize(config, rows, "detect" in config.stages)
            elif stage == "describe":
                stage_describe(config, rows)
            elif stage == "match":
                stage_match(config, rows)
            elif stage == "fuse":
                stage_fuse(config, rows)
            elif stage == "evaluate":
                report = stage_evaluate(config, rows)
        except StageFailureError:
            raise
        except Exception as exc:
            raise StageFailureError(stage, exc) from exc
    return report


def run_pipeline_from_paths(config_path, manifest_path, overrides=None):
    config = PipelineConfig.from_json(config_path)
    if overrides:
        for key, val in overrides.items():
            setattr(config, key, val)
        config.__post_init__()
    rows = load_manifest(manifest_path)
    return run_pipeline(config, rows)
