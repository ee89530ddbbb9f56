"""Genuine/impostor labeling, CMC, ROC/EER/AUC, folds and protocols.

Rank statistics use the optimistic tie rule (an impostor must score strictly
below the best genuine score to outrank it).  Verification sweeps thresholds
over the observed score values with genuine accepted iff score < threshold.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .exceptions import (
    MissingArtifactError,
    NoGalleryError,
    OneClassOnlyError,
    ProtocolConfigError,
    TooFewImagesError,
    UnlabeledIdError,
)
from .matching import ScoreMatrix

SIDE_POLICIES = ("any-side", "same-side-only")
PROTOCOLS = ("awe-10fold", "subject-split-allvsall", "uerc-overall", "uerc-scalability")


@dataclass
class IdentityLabels:
    """Per-image subject and side labels keyed by unique image id."""

    subjects: dict
    sides: dict

    @staticmethod
    def from_rows(rows):
        subjects, sides = {}, {}
        for row in rows:
            iid = row["image_id"]
            subjects[iid] = str(row["subject_id"])
            sides[iid] = str(row.get("side", "U") or "U").upper()[:1]
        return IdentityLabels(subjects=subjects, sides=sides)

    def subject(self, image_id):
        try:
            return self.subjects[image_id]
        except KeyError:
            raise UnlabeledIdError(f"image id {image_id!r} has no identity label")

    def side(self, image_id):
        return self.sides.get(image_id, "U")


@dataclass
class PairLabels:
    genuine: np.ndarray  # bool (probes, gallery)
    valid: np.ndarray    # bool; self-pairs and policy-dropped pairs are False


def label_pairs(matrix: ScoreMatrix, labels: IdentityLabels, side_policy="any-side"):
    """Genuine mask under the chosen ear-side policy.

    ``any-side``: same subject is genuine, even across ears.
    ``same-side-only``: genuine needs same subject AND the same known side;
    same-subject pairs that are cross-side or of unknown side are dropped
    from both classes.  Self-pairs are always excluded.
    """
    if side_policy not in SIDE_POLICIES:
        raise ValueError(f"side_policy must be one of {SIDE_POLICIES}")
    p_subj = np.array([labels.subject(i) for i in matrix.probe_ids])
    g_subj = np.array([labels.subject(j) for j in matrix.gallery_ids])
    same_subject = p_subj[:, None] == g_subj[None, :]
    not_self = ~matrix.self_mask
    finite = ~np.isnan(matrix.scores)
    if side_policy == "any-side":
        genuine = same_subject & not_self
        valid = not_self & finite
    else:
        p_side = np.array([labels.side(i) for i in matrix.probe_ids])
        g_side = np.array([labels.side(j) for j in matrix.gallery_ids])
        known = (p_side[:, None] != "U") & (g_side[None, :] != "U")
        same_side = (p_side[:, None] == g_side[None, :]) & known
        genuine = same_subject & same_side & not_self
        dropped = same_subject & ~same_side
        valid = not_self & finite & ~dropped
    return PairLabels(genuine=genuine & valid, valid=valid)


@dataclass
class CmcResult:
    cmc: np.ndarray
    rank1: float
    rank5: float
    skipped_probes: int
    ranks: np.ndarray = None


def cmc(matrix: ScoreMatrix, pairs: PairLabels, max_rank=None):
    """Cumulative match characteristic from per-probe genuine/impostor ranks.

    Probes with no genuine gallery entry are skipped and counted.  The rank
    of a probe is 1 + the number of impostor scores strictly below its best
    genuine score.
    """
    scores = matrix.scores
    n_gallery = scores.shape[1]
    max_rank = max_rank or n_gallery
    ranks = []
    skipped = 0
    for i in range(scores.shape[0]):
        gen = scores[i][pairs.genuine[i]]
        if gen.size == 0:
            skipped += 1
            continue
        imp = scores[i][pairs.valid[i] & ~pairs.genuine[i]]
        best = gen.min()
        ranks.append(1 + int(np.sum(imp < best)))
    if not ranks:
        raise NoGalleryError("no probe has a genuine gallery entry")
    ranks = np.asarray(ranks)
    ks = np.arange(1, max_rank + 1)
    curve = np.array([(ranks <= k).mean() for k in ks])
    rank5 = float(curve[min(4, len(curve) - 1)])
    return CmcResult(cmc=curve, rank1=float(curve[0]), rank5=rank5,
                     skipped_probes=skipped, ranks=ranks)


def split_scores(matrix: ScoreMatrix, pairs: PairLabels):
    """Pooled (genuine, impostor) score vectors over valid pairs."""
    genuine = matrix.scores[pairs.genuine]
    impostor = matrix.scores[pairs.valid & ~pairs.genuine]
    return genuine, impostor


def roc_from_scores(genuine, impostor):
    """EER, AUC and ROC samples from pooled distance scores.

    Threshold sweep accepts a pair iff its score is strictly below the
    threshold; candidate thresholds are every observed value plus both
    infinities.  EER comes from linear interpolation between the bracketing
    sweep points; AUC is the trapezoidal area under (FAR, 1 - FRR).
    """
    g = np.sort(np.asarray(genuine, dtype=np.float64))
    i = np.sort(np.asarray(impostor, dtype=np.float64))
    if g.size == 0 or i.size == 0:
        raise OneClassOnlyError("need both genuine and impostor scores")
    thresholds = np.unique(np.concatenate([g, i]))
    far = np.searchsorted(i, thresholds, side="left") / i.size
    frr = 1.0 - np.searchsorted(g, thresholds, side="left") / g.size
    far = np.concatenate([[0.0], far, [1.0]])
    frr = np.concatenate([[1.0], frr, [0.0]])

    diff = far - frr
    k = int(np.argmax(diff >= 0))
    if diff[k] == 0 or k == 0:
        eer = far[k]
    else:
        alpha = -diff[k - 1] / (diff[k] - diff[k - 1])
        eer = far[k - 1] + alpha * (far[k] - far[k - 1])
    auc = float(np.trapezoid(1.0 - frr, far))
    roc = list(zip(far.tolist(), frr.tolist()))
    return float(eer), auc, roc


def roc_eer_auc(matrix: ScoreMatrix, pairs: PairLabels):
    genuine, impostor = split_scores(matrix, pairs)
    return roc_from_scores(genuine, impostor)


# --- folds and splits ----------------------------------------------------------

def make_folds(labels: IdentityLabels, k, scheme="image-random", seed=0):
    """Assign images to folds or splits.

    ``image-random``: seeded uniform assignment into k folds (sizes within
    one of each other); returns image_id -> fold int.
    ``subject-disjoint-split``: subjects sorted by id, first ceil(n/2) ->
    "train", rest -> "test"; returns image_id -> split string.
    """
    ids = sorted(labels.subjects)
    if scheme == "image-random":
        if k < 2:
            raise ProtocolConfigError("folding needs k >= 2")
        if len(ids) < k:
            raise TooFewImagesError(f"{len(ids)} images cannot fill {k} folds")
        rng = np.random.default_rng(seed)
        perm = rng.permutation(len(ids))
        return {ids[p]: int(pos % k) for pos, p in enumerate(perm)}
    if scheme == "subject-disjoint-split":
        subjects = sorted({labels.subjects[i] for i in ids})
        if len(subjects) < 2:
            raise TooFewImagesError("subject split needs >= 2 subjects")
        n_train = -(-len(subjects) // 2)  # first half rounded up
        train = set(subjects[:n_train])
        return {i: ("train" if labels.subjects[i] in train else "test") for i in ids}
    raise ProtocolConfigError(f"unknown fold scheme {scheme!r}")


def scalability_probe_ids(ids, labels: IdentityLabels, min_images=2):
    """Ids whose subject contributes at least ``min_images`` of ``ids``."""
    counts = {}
    for i in ids:
        counts[labels.subject(i)] = counts.get(labels.subject(i), 0) + 1
    return [i for i in ids if counts[labels.subject(i)] >= min_images]


# --- protocol execution ---------------------------------------------------------

@dataclass
class EvalReport:
    protocol: str
    rank1: float
    rank5: float
    eer: float
    auc: float
    cmc: list
    roc: list
    skipped_probes: int = 0
    n_probes: int = 0
    n_gallery: int = 0
    per_fold: list = None
    rank1_std: float = None
    eer_std: float = None

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())


def _evaluate_matrix(matrix, labels, side_policy):
    pairs = label_pairs(matrix, labels, side_policy)
    cm = cmc(matrix, pairs)
    eer, auc, roc = roc_eer_auc(matrix, pairs)
    return cm, eer, auc, roc


def run_protocol(protocol, matrix: ScoreMatrix, labels: IdentityLabels, *,
                 folds=None, k=10, seed=0, first_n=1800, min_probe_images=2,
                 side_policy="any-side"):
    """Execute one evaluation protocol over an all-vs-all score matrix.

    ``awe-10fold``: per-fold probe rows vs all-other-folds gallery; means and
    standard deviations over folds, pooled ROC.
    ``subject-split-allvsall``: evaluate the matrix as-is.
    ``uerc-overall``: restrict both axes to the first ``first_n`` ids.
    ``uerc-scalability``: probes restricted to subjects with at least
    ``min_probe_images`` images, full gallery.
    """
    if protocol not in PROTOCOLS:
        raise ProtocolConfigError(f"unknown protocol {protocol!r}; "
                                  f"expected one of {PROTOCOLS}")
    if protocol == "awe-10fold":
        if folds is None:
            folds = make_folds(IdentityLabels(
                subjects={i: labels.subject(i) for i in matrix.probe_ids},
                sides={i: labels.side(i) for i in matrix.probe_ids}),
                k, "image-random", seed)
        fold_ids = sorted({folds[i] for i in matrix.probe_ids if i in folds})
        if len(fold_ids) < 2:
            raise ProtocolConfigError("need at least 2 folds")
        per_fold = []
        all_gen, all_imp = [], []
        curves = []
        for f in fold_ids:
            probe_idx = [i for i, pid in enumerate(matrix.probe_ids) if folds.get(pid) == f]
            gal_idx = [j for j, gid in enumerate(matrix.gallery_ids) if folds.get(gid) != f]
            if not probe_idx or not gal_idx:
                raise ProtocolConfigError(f"fold {f} is empty on one side")
            sub = matrix.take(probe_idx, gal_idx)
            pairs = label_pairs(sub, labels, side_policy)
            cm = cmc(sub, pairs)
            gen, imp = split_scores(sub, pairs)
            eer, auc, _ = roc_from_scores(gen, imp)
            all_gen.append(gen)
            all_imp.append(imp)
            curves.append(cm.cmc)
            per_fold.append({"fold": int(f), "rank1": cm.rank1, "rank5": cm.rank5,
                             "eer": eer, "auc": auc,
                             "skipped_probes": cm.skipped_probes})
        pooled_eer, pooled_auc, roc = roc_from_scores(
            np.concatenate(all_gen), np.concatenate(all_imp))
        min_len = min(len(c) for c in curves)
        mean_cmc = np.mean([c[:min_len] for c in curves], axis=0)
        rank1s = np.array([pf["rank1"] for pf in per_fold])
        eers = np.array([pf["eer"] for pf in per_fold])
        return EvalReport(
            protocol=protocol,
            rank1=float(rank1s.mean()),
            rank5=float(np.mean([pf["rank5"] for pf in per_fold])),
            eer=float(eers.mean()),
            auc=float(np.mean([pf["auc"] for pf in per_fold])),
            cmc=mean_cmc.tolist(),
            roc=roc,
            skipped_probes=int(sum(pf["skipped_probes"] for pf in per_fold)),
            n_probes=len(matrix.probe_ids),
            n_gallery=len(matrix.gallery_ids),
            per_fold=per_fold,
            rank1_std=float(rank1s.std(ddof=0)),
            eer_std=float(eers.std(ddof=0)),
        )

    if protocol == "uerc-overall":
        if matrix.probe_ids != matrix.gallery_ids:
            raise ProtocolConfigError(
                "uerc-overall expects an all-vs-all matrix (probe ids == gallery ids)")
        keep = list(range(min(first_n, len(matrix.probe_ids))))
        work = matrix.take(keep, keep)
    elif protocol == "uerc-scalability":
        probe_ids = scalability_probe_ids(matrix.gallery_ids, labels,
                                          min_probe_images)
        probe_set = {pid for pid in probe_ids}
        keep = [i for i, pid in enumerate(matrix.probe_ids) if pid in probe_set]
        if not keep:
            raise MissingArtifactError("no probe qualifies for the scalability protocol")
        work = matrix.take(keep, list(range(len(matrix.gallery_ids))))
    else:  # subject-split-allvsall
        work = matrix

    cm, eer, auc, roc = _evaluate_matrix(work, labels, side_policy)
    return EvalReport(
        protocol=protocol,
        rank1=cm.rank1,
        rank5=cm.rank5,
        eer=eer,
        auc=auc,
        cmc=cm.cmc.tolist(),
        roc=roc,
        skipped_probes=cm.skipped_probes,
        n_probes=len(work.probe_ids),
        n_gallery=len(work.gallery_ids),
    )


def export_curve_csv(path, header, rows):
    """Write a two-column curve (threshold/fraction style) as CSV."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])
