"""Ground-truth assignment from a speech classifier and an image classifier.

Each sample gets the label of whichever classifier is more confident, if
that confidence reaches the threshold; otherwise it is discarded. Ties go to
the image classifier. Source labels ``excitement`` and ``disgust`` are folded
into ``happy`` and ``hate``.
"""

from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

CLASSES = ("anger", "happy", "hate", "sad")
RELABEL = {"excitement": "happy", "disgust": "hate"}
DEFAULT_THRESHOLD = 0.5


class LabelError(ValueError):
    pass


def relabel(label: str) -> str:
    key = label.strip().lower()
    if key in RELABEL:
        return RELABEL[key]
    if key in CLASSES:
        return key
    raise LabelError(f"unknown emotion label {label!r}")


@dataclass(frozen=True)
class LabelDecision:
    assigned: bool
    label: str | None
    label_index: int | None  # argmax index in the winning vector
    max1: float  # speech classifier confidence
    max2: float  # image classifier confidence
    winner: str  # "speech" or "image"

    @property
    def outcome(self):
        return "assigned" if self.assigned else "discarded"


def _probs(vec, name):
    vec = np.asarray(vec, dtype=np.float64)
    if vec.ndim != 1 or vec.size == 0:
        raise LabelError(f"{name} must be a non-empty vector")
    if not np.all(np.isfinite(vec)) or vec.min() < 0 or abs(vec.sum() - 1.0) > 1e-6:
        raise LabelError(f"{name} is not a probability vector (sum {vec.sum():.6g})")
    return vec


def assign_label(ser_probs, ier_probs, threshold=DEFAULT_THRESHOLD, classes: Sequence[str] = CLASSES,
                 require_agreement=False) -> LabelDecision:
    """Decide the label for one sample.

    ``classes`` names the positions of both probability vectors (the source
    classifiers may use ``excitement``/``disgust``). ``require_agreement``
    additionally discards samples whose two argmax labels differ.
    """
    ser = _probs(ser_probs, "speech probabilities")
    ier = _probs(ier_probs, "image probabilities")
    if ser.size != ier.size or ser.size != len(classes):
        raise LabelError(f"expected {len(classes)} probabilities per classifier, got {ser.size} and {ier.size}")
    max1, max2 = float(ser.max()), float(ier.max())
    winner = "image" if max2 >= max1 else "speech"
    vec = ier if winner == "image" else ser
    idx = int(np.argmax(vec))
    label = relabel(classes[idx])
    assigned = max(max1, max2) >= threshold
    if assigned and require_agreement:
        assigned = relabel(classes[int(np.argmax(ser))]) == relabel(classes[int(np.argmax(ier))])
    if not assigned:
        return LabelDecision(False, None, None, max1, max2, winner)
    return LabelDecision(True, label, idx, max1, max2, winner)


def corpus_stats(decisions: Iterable[LabelDecision], classes: Sequence[str] = CLASSES):
    counts = Counter()
    discarded = total = 0
    for d in decisions:
        total += 1
        if d.assigned:
            counts[d.label] += 1
        else:
            discarded += 1
    return {"counts": {c: counts.get(c, 0) for c in classes}, "discarded": discarded, "total": total}


def format_stats(stats):
    """Stable JSON rendering of :func:`corpus_stats` output."""
    return json.dumps(stats, indent=2, sort_keys=True) + "\n"


def parse_stats(text):
    raw = json.loads(text)
    return {
        "counts": {str(k): int(v) for k, v in raw["counts"].items()},
        "discarded": int(raw["discarded"]),
        "total": int(raw["total"]),
    }


def stats_table(stats):
    """Human-readable per-class counts."""
    width = max(len(c) for c in stats["counts"]) if stats["counts"] else 5
    lines = [f"{c:<{width}}  {n:>8,d}" for c, n in stats["counts"].items()]
    lines.append(f"{'discarded':<{width}}  {stats['discarded']:>8,d}")
    lines.append(f"{'total':<{width}}  {stats['total']:>8,d}")
    return "\n".join(lines) + "\n"


@dataclass
class RowError:
    line: int
    sample_id: str
    message: str


def label_csv(in_path, out_path, threshold=DEFAULT_THRESHOLD, classes=CLASSES, require_agreement=False):
    """Label every row of ``sample_id, ser_p1..ser_pK, ier_p1..ier_pK``.

    Writes ``sample_id, outcome, label, max1, max2, winner`` for the rows that
    parse and returns ``(decisions, errors)``.
    """
    k = len(classes)
    decisions, errors, out_rows = [], [], []
    with open(in_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise LabelError(f"{in_path}: empty file")
        if len(header) != 1 + 2 * k:
            raise LabelError(f"{in_path}: header has {len(header)} columns, expected {1 + 2 * k} for {k} classes")
        for line, row in enumerate(reader, 2):
            if not row or all(not c.strip() for c in row):
                continue
            sid = row[0].strip() if row else ""
            try:
                if len(row) != 1 + 2 * k:
                    raise LabelError(f"expected {1 + 2 * k} columns, got {len(row)}")
                values = [float(v) for v in row[1:]]
                d = assign_label(values[:k], values[k:], threshold, classes, require_agreement)
            except (LabelError, ValueError) as exc:
                errors.append(RowError(line, sid, str(exc)))
                continue
            decisions.append(d)
            out_rows.append([sid, d.outcome, d.label or "", repr(d.max1), repr(d.max2), d.winner])
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sample_id", "outcome", "label", "max1", "max2", "winner"])
        writer.writerows(out_rows)
    return decisions, errors
