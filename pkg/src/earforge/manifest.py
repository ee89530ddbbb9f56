"""Dataset manifest: one CSV row per image, sidecar files for annotations.

Required columns: image_path, image_id, subject_id, side (L|R|U).  Optional:
split (train|test|none), fold (int), bbox_x/bbox_y/bbox_w/bbox_h,
landmarks_path.  Relative paths resolve against the manifest's directory so
fixtures stay relocatable.
"""

from __future__ import annotations

import csv
import os

from .exceptions import DuplicateIdError, ManifestParseError, MissingFileError

REQUIRED_COLUMNS = ("image_path", "image_id", "subject_id", "side")
OPTIONAL_COLUMNS = ("split", "fold", "bbox_x", "bbox_y", "bbox_w", "bbox_h",
                    "landmarks_path")
SIDES = ("L", "R", "U")
SPLITS = ("train", "test", "none")


def load_manifest(path, check_files=True):
    """Parse and validate a manifest CSV into a list of row dicts."""
    base = os.path.dirname(os.path.abspath(path))
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise ManifestParseError("empty manifest", line=1)
            missing = [c for c in REQUIRED_COLUMNS if c not in reader.fieldnames]
            if missing:
                raise ManifestParseError(
                    f"missing required columns: {', '.join(missing)}", line=1)
            raw_rows = [(reader.line_num, row) for row in reader]
    except OSError as exc:
        raise MissingFileError(f"cannot read manifest {path}: {exc}")

    if not raw_rows:
        raise ManifestParseError("manifest has a header but no rows", line=2)

    rows = []
    seen = {}
    for line, raw in raw_rows:
        row = _parse_row(raw, line, base)
        if row["image_id"] in seen:
            raise DuplicateIdError(
                f"duplicate image_id {row['image_id']!r} "
                f"(lines {seen[row['image_id']]} and {line})")
        seen[row["image_id"]] = line
        if check_files:
            if not os.path.exists(row["image_path"]):
                raise MissingFileError(
                    f"line {line}: image file not found: {row['image_path']}")
            lp = row.get("landmarks_path")
            if lp and not os.path.exists(lp):
                raise MissingFileError(
                    f"line {line}: landmark file not found: {lp}")
        rows.append(row)
    return rows


def _parse_row(raw, line, base):
    def need(col):
        val = (raw.get(col) or "").strip()
        if not val:
            raise ManifestParseError(f"missing value for {col!r}", line=line,
                                     column=col)
        return val

    side = need("side").upper()
    if side not in SIDES:
        raise ManifestParseError(f"side must be one of {SIDES}, got {side!r}",
                                 line=line, column="side")
    split = (raw.get("split") or "none").strip() or "none"
    if split not in SPLITS:
        raise ManifestParseError(f"split must be one of {SPLITS}, got {split!r}",
                                 line=line, column="split")

    fold_raw = (raw.get("fold") or "").strip()
    try:
        fold = int(fold_raw) if fold_raw else None
    except ValueError:
        raise ManifestParseError(f"fold must be an integer, got {fold_raw!r}",
                                 line=line, column="fold")

    bbox = None
    bbox_vals = [(raw.get(f"bbox_{k}") or "").strip() for k in "xywh"]
    if any(bbox_vals):
        if not all(bbox_vals):
            raise ManifestParseError("bbox needs all of bbox_x/y/w/h", line=line,
                                     column="bbox_x")
        try:
            bbox = tuple(float(v) for v in bbox_vals)
        except ValueError:
            raise ManifestParseError(f"bbox values must be numbers: {bbox_vals}",
                                     line=line, column="bbox_x")
        if bbox[2] <= 0 or bbox[3] <= 0:
            raise ManifestParseError("bbox width/height must be > 0", line=line,
                                     column="bbox_w")

    lm_raw = (raw.get("landmarks_path") or "").strip()
    return {
        "image_path": _resolve(base, need("image_path")),
        "image_id": need("image_id"),
        "subject_id": need("subject_id"),
        "side": side,
        "split": split,
        "fold": fold,
        "bbox": bbox,
        "landmarks_path": _resolve(base, lm_raw) if lm_raw else None,
    }


def _resolve(base, path):
    return path if os.path.isabs(path) else os.path.normpath(os.path.join(base, path))


def save_manifest(rows, path):
    """Write rows back to CSV (paths as given; bbox re-split into columns)."""
    columns = list(REQUIRED_COLUMNS) + list(OPTIONAL_COLUMNS)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            bbox = row.get("bbox") or ("", "", "", "")
            writer.writerow([
                row["image_path"], row["image_id"], row["subject_id"], row["side"],
                row.get("split", "none"),
                "" if row.get("fold") is None else row["fold"],
                *bbox,
                row.get("landmarks_path") or "",
            ])
