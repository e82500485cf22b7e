"""Divide-and-conquer Shapley attribution for two-input classifiers.

The model is treated as a black box ``predict(image, speech) -> probs``.
Everything is scored on the probability of the class predicted for the
untouched inputs, and "absent" means overwritten with a constant baseline
(zero by default).

Modality level
    image and speech are the two players of a game valued by the predicted
    class probability; their closed-form Shapley values are ``score_1`` and
    ``score_2``.

Region level
    each modality's raster is bisected recursively. At a node, the two
    halves play a two-player game in which the rest of the input (outside
    the node, and the other modality) keeps its original values. The raw
    pair is then adjusted to add up to the node's own score:
    ``child = raw + (parent - raw_a - raw_b) * |raw| / (|raw_a| + |raw_b|)``,
    or half the parent each when both raws are zero. A half that never
    changes the output therefore keeps a zero score, and when raws already
    sum to the parent (additive models) nothing moves.

Leaves spread their score uniformly over their pixels, so every map sums to
its modality score and ``score_1 + score_2 == pred_f - pred_b``.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np

from . import formats
from .shapley import two_player_shapley

PredictFn = Callable[[np.ndarray, np.ndarray], np.ndarray]

DEFAULT_TIMES = 6
MODALITIES = ("img", "spc")


class AttributionError(ValueError):
    pass


class Region(NamedTuple):
    """Half-open rectangle ``rows [r0, r1) x cols [c0, c1)``."""

    r0: int
    r1: int
    c0: int
    c1: int

    @property
    def height(self):
        return self.r1 - self.r0

    @property
    def width(self):
        return self.c1 - self.c0

    @property
    def area(self):
        return max(self.height, 0) * max(self.width, 0)

    def can_split(self):
        return max(self.height, self.width) >= 2

    def split(self):
        """Bisect the longer side (rows on ties); the first half gets the
        extra pixel when the length is odd."""
        if self.height >= self.width:
            mid = self.r0 + (self.height + 1) // 2
            return Region(self.r0, mid, self.c0, self.c1), Region(mid, self.r1, self.c0, self.c1)
        mid = self.c0 + (self.width + 1) // 2
        return Region(self.r0, self.r1, self.c0, mid), Region(self.r0, self.r1, mid, self.c1)

    @classmethod
    def full(cls, array):
        return cls(0, array.shape[0], 0, array.shape[1])


def mask_region(x, region, baseline=0.0):
    """Copy of ``x`` with ``region`` (over the first two axes) set to ``baseline``."""
    x = np.asarray(x)
    r0, r1, c0, c1 = region
    if not (0 <= r0 <= r1 <= x.shape[0] and 0 <= c0 <= c1 <= x.shape[1]):
        raise AttributionError(f"region {tuple(region)} outside array of shape {x.shape[:2]}")
    out = np.array(x, dtype=np.float64, copy=True)
    out[r0:r1, c0:c1] = baseline
    return out


def split_scores(parent, raw_a, raw_b):
    """Adjust a raw child pair so it sums to ``parent``."""
    total = abs(raw_a) + abs(raw_b)
    if total == 0.0:
        half = 0.5 * parent
        return half, parent - half
    a = raw_a + (parent - (raw_a + raw_b)) * (abs(raw_a) / total)
    return a, parent - a


@dataclass
class ModalityScores:
    arg_max: int
    pred_f: float
    pred_b: float
    pred_1: float
    pred_2: float
    score_1: float
    score_2: float
    probs: np.ndarray = field(repr=False)


@dataclass
class AttributionResult:
    arg_max: int
    pred_f: float
    pred_b: float
    pred_1: float
    pred_2: float
    score_1: float
    score_2: float
    shap_img: np.ndarray = field(repr=False)
    shap_speech: np.ndarray = field(repr=False)
    eval_count: int
    effective_depth: int
    probs: np.ndarray = field(repr=False)

    def summary(self):
        return {
            "arg_max": self.arg_max,
            "pred_f": self.pred_f,
            "pred_b": self.pred_b,
            "pred_1": self.pred_1,
            "pred_2": self.pred_2,
            "score_1": self.score_1,
            "score_2": self.score_2,
            "eval_count": self.eval_count,
            "effective_depth": self.effective_depth,
        }


def _check_probs(probs):
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 1 or probs.size == 0:
        raise AttributionError(f"model must return a 1-D probability vector, got shape {probs.shape}")
    if not np.all(np.isfinite(probs)) or probs.min() < -1e-12 or abs(probs.sum() - 1.0) > 1e-6:
        raise AttributionError("model output is not a probability vector")
    return probs


def _as_speech(speech):
    speech = np.asarray(speech, dtype=np.float64)
    if speech.ndim == 2:
        speech = speech[..., None]
    if speech.ndim != 3 or speech.shape[2] != 1:
        raise AttributionError(f"speech must be (H, W) or (H, W, 1), got {speech.shape}")
    return speech


def _as_image(image):
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[2] != 3:
        raise AttributionError(f"image must be (H, W, 3), got {image.shape}")
    return image


def _check_model_shapes(model, image, speech):
    want_img = getattr(model, "img_shape", None)
    want_spc = getattr(model, "spc_shape", None)
    if want_img is not None and tuple(image.shape) != tuple(want_img):
        raise AttributionError(f"image shape {image.shape} does not match model input {tuple(want_img)}")
    if want_spc is not None and tuple(speech.shape) != tuple(want_spc):
        raise AttributionError(f"speech shape {speech.shape} does not match model input {tuple(want_spc)}")


def resolve_jobs(jobs=None):
    if jobs is None:
        jobs = int(os.environ.get("DNC_ATTRIB_JOBS", "1") or 1)
    if jobs < 1:
        raise ValueError("jobs must be >= 1")
    return jobs


class _Evaluator:
    """Memoized model calls keyed by which modality/region is blanked."""

    def __init__(self, model, image, speech, baseline, jobs):
        self.model = model
        self.inputs = {"img": image, "spc": speech}
        self.baseline = baseline
        self.jobs = jobs
        self.cls = None
        self.values: dict = {}

    def _inputs_for(self, key):
        img, spc = self.inputs["img"], self.inputs["spc"]
        if key == ("full",):
            return img, spc
        if key == ("blank",):
            return np.full_like(img, self.baseline), np.full_like(spc, self.baseline)
        modality, region = key
        if modality == "img":
            return mask_region(img, region, self.baseline), spc
        return img, mask_region(spc, region, self.baseline)

    def _call(self, key):
        return _check_probs(self.model(*self._inputs_for(key)))

    def first(self):
        probs = self._call(("full",))
        self.cls = int(np.argmax(probs))
        self.values[("full",)] = float(probs[self.cls])
        return probs

    def evaluate(self, keys):
        todo = list(dict.fromkeys(k for k in keys if k not in self.values))
        if not todo:
            return
        if self.jobs > 1 and len(todo) > 1:
            with ThreadPoolExecutor(max_workers=min(self.jobs, len(todo))) as pool:
                outputs = list(pool.map(self._call, todo))
        else:
            outputs = [self._call(k) for k in todo]
        for key, probs in zip(todo, outputs):
            self.values[key] = float(probs[self.cls])

    def __getitem__(self, key):
        return self.values[key]


def _anchors(ev, image, speech):
    probs = ev.first()
    full_img, full_spc = ("img", Region.full(image)), ("spc", Region.full(speech))
    ev.evaluate([("blank",), full_spc, full_img])
    pred_f, pred_b = ev[("full",)], ev[("blank",)]
    pred_1 = ev[full_spc]  # image only
    pred_2 = ev[full_img]  # speech only
    score_1, score_2 = two_player_shapley(pred_b, pred_1, pred_2, pred_f)
    return ModalityScores(ev.cls, pred_f, pred_b, pred_1, pred_2, score_1, score_2, probs)


def modality_scores(model: PredictFn, image, speech, baseline=0.0) -> ModalityScores:
    """Predicted class and the image/speech Shapley pair (``score_1``, ``score_2``)."""
    image, speech = _as_image(image), _as_speech(speech)
    _check_model_shapes(model, image, speech)
    return _anchors(_Evaluator(model, image, speech, baseline, 1), image, speech)


def dnc_shap(model: PredictFn, image, speech, times=DEFAULT_TIMES, baseline=0.0, jobs=None) -> AttributionResult:
    """Modality scores plus per-pixel Shapley maps for both inputs.

    ``times`` is the number of bisection rounds; a region that is already a
    single pixel stops early and ``effective_depth`` records the deepest
    round actually performed. With ``jobs > 1`` the model calls of a round
    run on a thread pool; results do not depend on ``jobs``.
    """
    if times < 0:
        raise ValueError("times must be >= 0")
    image, speech = _as_image(image), _as_speech(speech)
    _check_model_shapes(model, image, speech)
    ev = _Evaluator(model, image, speech, baseline, resolve_jobs(jobs))
    ms = _anchors(ev, image, speech)
    nodes = {
        "img": [(Region.full(image), ms.score_1)],
        "spc": [(Region.full(speech), ms.score_2)],
    }
    depth = 0
    for _ in range(times):
        splits = [(m, reg) for m in MODALITIES for reg, _ in nodes[m] if reg.can_split()]
        if not splits:
            break
        ev.evaluate([(m, half) for m, reg in splits for half in reg.split()])
        for m in MODALITIES:
            nxt = []
            for reg, score in nodes[m]:
                if not reg.can_split():
                    nxt.append((reg, score))
                    continue
                a, b = reg.split()
                # v(a only) blanks b, v(b only) blanks a
                raw_a, raw_b = two_player_shapley(ev[(m, reg)], ev[(m, b)], ev[(m, a)], ms.pred_f)
                sa, sb = split_scores(score, raw_a, raw_b)
                nxt += [(a, sa), (b, sb)]
            nodes[m] = nxt
        depth += 1
    maps = {}
    for m, arr in (("img", image), ("spc", speech)):
        out = np.zeros(arr.shape[:2])
        for reg, score in nodes[m]:
            out[reg.r0:reg.r1, reg.c0:reg.c1] = score / reg.area
        maps[m] = out
    return AttributionResult(
        ms.arg_max, ms.pred_f, ms.pred_b, ms.pred_1, ms.pred_2, ms.score_1, ms.score_2,
        maps["img"], maps["spc"], len(ev.values), depth, ms.probs,
    )


def max_evaluations(times):
    """Upper bound on model calls: 4 anchors + 2 per split per modality."""
    return 4 + 2 * 2 * (2 ** times - 1)


# -- rendering / persistence ----------------------------------------------------

def heatmap_pixels(values):
    """Min-max scale to 0..255 (floored); a constant map renders as 128."""
    values = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise AttributionError("heatmap input must be finite")
    lo, hi = values.min(), values.max()
    if hi == lo:
        return np.full(values.shape, 128, dtype=np.uint8)
    scaled = np.floor((values - lo) / (hi - lo) * 255.0)
    return np.clip(scaled, 0, 255).astype(np.uint8)


def render_heatmap(values, out):
    """Write ``values`` as an 8-bit grayscale PGM: brightest = most important."""
    formats.write_pgm(out, heatmap_pixels(values))


def write_attribution(result: AttributionResult, out_dir, stem, extra=None):
    """Write ``<stem>.json``, ``<stem>.img.csv/.pgm`` and ``<stem>.spc.csv/.pgm``.

    Returns the list of written paths.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = result.summary()
    summary["probs"] = [float(p) for p in result.probs]
    if extra:
        summary.update(extra)
    paths = []
    for tag, values in (("img", result.shap_img), ("spc", result.shap_speech)):
        csv_path, pgm_path = out_dir / f"{stem}.{tag}.csv", out_dir / f"{stem}.{tag}.pgm"
        formats.write_matrix_csv(csv_path, values)
        render_heatmap(values, pgm_path)
        paths += [csv_path, pgm_path]
    json_path = out_dir / f"{stem}.json"
    formats.write_json(json_path, summary)
    return [json_path, *paths]


def efficiency_gap(result: AttributionResult):
    """Largest violation among the three efficiency identities."""
    return max(
        abs(result.score_1 + result.score_2 - (result.pred_f - result.pred_b)),
        abs(float(result.shap_img.sum()) - result.score_1),
        abs(float(result.shap_speech.sum()) - result.score_2),
    )


__all__ = [
    "AttributionError", "AttributionResult", "DEFAULT_TIMES", "ModalityScores", "PredictFn", "Region",
    "dnc_shap", "efficiency_gap", "heatmap_pixels", "mask_region", "max_evaluations", "modality_scores",
    "render_heatmap", "resolve_jobs", "split_scores", "write_attribution",
]
