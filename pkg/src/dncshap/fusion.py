"""Miniature hybrid-fusion classifier for (image, spectrogram) pairs.

Each modality has two streams that produce an embedding: a plain conv/max-pool
stack (``plain_*``) and a backbone (``backbone_*``, a seeded conv stack
standing in for a pretrained network). Both end in batchnorm, flatten and a
dense embedding. The speech spectrogram goes through a 1x1 convolution with
three filters (``stem``) before its backbone.

Intermediate fusion adds embeddings across modalities (criss-cross) and
multiplies the two sums; late fusion mixes the three heads' logits with
softmax-normalized learned weights.

Topologies:

``proposed``
    criss-cross after the backbones, ``vgg``-style backbone.
``baseline1_two_crisscross``
    adds a shallow conv per modality whose maps are added to the other
    modality's backbone input, and keeps the usual criss-cross after.
``baseline2_crisscross_before``
    only the front crossing; backbone outputs are fused directly.
``baseline3_crisscross_after``
    same wiring as ``proposed`` with the ``compact`` backbone.
``image_only`` / ``speech_only``
    unimodal ablations: both streams of one modality and a single head. The
    other input is accepted and ignored.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .nn import checkpoint
from .nn.layers import (
    BatchNorm,
    Conv2D,
    Dense,
    Flatten,
    MaxPool2D,
    ReLU,
    Sequential,
    ShapeError,
    output_shape,
    softmax,
    softmax_backward,
    to_f32_grid,
)

TOPOLOGIES = (
    "proposed",
    "baseline1_two_crisscross",
    "baseline2_crisscross_before",
    "baseline3_crisscross_after",
    "image_only",
    "speech_only",
)
_CROSS_BEFORE = {"baseline1_two_crisscross", "baseline2_crisscross_before"}
_CROSS_AFTER = {"proposed", "baseline1_two_crisscross", "baseline3_crisscross_after"}
BACKBONES = ("vgg", "compact")


class ConfigError(ValueError):
    pass


def resolve_topology(name):
    """Full topology name from itself or a unique prefix (``baseline3``)."""
    if name in TOPOLOGIES:
        return name
    hits = [t for t in TOPOLOGIES if t.startswith(str(name))] if name else []
    if len(hits) != 1:
        raise ConfigError(f"unknown topology {name!r}; choose from {', '.join(TOPOLOGIES)}")
    return hits[0]


@dataclass(frozen=True)
class FusionConfig:
    """Architecture description. Defaults are the full-size layout; use
    :meth:`mini` for something that trains on a CPU in seconds."""

    topology: str = "proposed"
    height: int = 128
    width: int = 128
    plain_filters: tuple = (64, 128, 256)
    backbone: str = "auto"
    backbone_filters: tuple = (64, 128, 256)
    embed_width: int = 512
    head_width: int = 1024
    n_classes: int = 4
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "topology", resolve_topology(self.topology))
        if self.backbone not in (*BACKBONES, "auto"):
            raise ConfigError(f"unknown backbone {self.backbone!r}")
        for name in ("height", "width", "embed_width", "head_width", "n_classes"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if min(self.height, self.width) < 8:
            raise ConfigError("inputs must be at least 8x8 (three 2x2 poolings)")
        object.__setattr__(self, "plain_filters", tuple(int(f) for f in self.plain_filters))
        object.__setattr__(self, "backbone_filters", tuple(int(f) for f in self.backbone_filters))

    @classmethod
    def mini(cls, size=32, **overrides):
        base = dict(height=size, width=size, plain_filters=(4, 8, 8), backbone_filters=(4, 8, 8),
                    embed_width=16, head_width=32)
        base.update(overrides)
        return cls(**base)

    @property
    def resolved_backbone(self):
        if self.backbone != "auto":
            return self.backbone
        return "vgg" if self.topology in ("proposed", "image_only", "speech_only") else "compact"

    def to_text(self):
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text, **overrides):
        """Parse ``key = value`` lines; ``#`` starts a comment."""
        known = {f.name: f for f in fields(cls)}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in known:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            default = getattr(cls, key, None)
            try:
                if isinstance(default, tuple):
                    values[key] = tuple(int(v) for v in value.split(",") if v.strip())
                elif isinstance(default, int):
                    values[key] = int(value)
                else:
                    values[key] = value
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: bad value for {key}: {value!r}") from exc
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


def intermediate_fusion(plain_img, plain_spc, backbone_img, backbone_spc):
    """Criss-cross adds and the multiplicative gate.

    Returns ``(img_sum, spc_sum, product)`` where ``img_sum = plain_img +
    backbone_spc``, ``spc_sum = plain_spc + backbone_img`` and ``product`` is
    their elementwise product. Works on single vectors or batches (last axis
    is the embedding).
    """
    arrays = [np.asarray(a, dtype=np.float64) for a in (plain_img, plain_spc, backbone_img, backbone_spc)]
    widths = {a.shape for a in arrays}
    if len(widths) != 1:
        raise ShapeError("intermediate_fusion", "embedding", arrays[0].shape, sorted(widths))
    plain_img, plain_spc, backbone_img, backbone_spc = arrays
    f_i = plain_img + backbone_spc
    f_s = plain_spc + backbone_img
    return f_i, f_s, f_i * f_s


def fused_logits(o_sp, o_img, o_mul, w):
    """``O = sum(softmax(w)_k * O_k)`` for the speech, image and product heads."""
    heads = [np.asarray(o, dtype=np.float64) for o in (o_sp, o_img, o_mul)]
    if len({h.shape for h in heads}) != 1:
        raise ShapeError("late_fusion", "logits", heads[0].shape, [h.shape for h in heads])
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (3,):
        raise ShapeError("late_fusion", "weights", 3, w.shape)
    wn = softmax(w)
    return wn[0] * heads[0] + wn[1] * heads[1] + wn[2] * heads[2]


def late_fusion(o_sp, o_img, o_mul, w1, w2, w3):
    """Class probabilities from three logit vectors and raw fusion weights."""
    return softmax(fused_logits(o_sp, o_img, o_mul, [w1, w2, w3]))


class FusionWeights:
    """Pseudo-layer holding the three raw late-fusion weights."""

    kind = "fusion_weights"

    def __init__(self, rng):
        self.name = "fusion"
        self.params = {"w": to_f32_grid(rng.uniform(-0.5, 0.5, size=3))}
        self.buffers = {}

    def tensors(self):
        return [self.params["w"]]


class FusionModel:
    """The assembled network. ``predict`` is pure and safe to call from
    several threads at once."""

    def __init__(self, config: FusionConfig):
        self.config = config
        self.n_classes = config.n_classes
        self.parts: dict[str, Sequential] = {}
        seeds = np.random.SeedSequence(config.seed).spawn(16)
        rngs = iter(np.random.default_rng(s) for s in seeds)
        c = config
        topo = c.topology
        img_shape, spc_shape = (c.height, c.width, 3), (c.height, c.width, 1)

        def add(name, layers):
            self.parts[name] = Sequential(layers, name)

        uses_image = topo != "speech_only"
        uses_speech = topo != "image_only"
        if uses_speech:
            add("stem", [Conv2D(1, 3, kernel_size=1, padding="valid", rng=next(rngs))])
        else:
            next(rngs)
        if topo in _CROSS_BEFORE:
            add("pre_i", [Conv2D(3, 3, rng=next(rngs)), ReLU()])
            add("pre_s", [Conv2D(1, 3, rng=next(rngs)), ReLU()])
        else:
            next(rngs), next(rngs)
        for m, in_shape, used in (("img", img_shape, uses_image), ("spc", img_shape, uses_speech)):
            rng_backbone = next(rngs)
            if used:
                add(f"backbone_{m}", self._embedder(self._backbone(3, rng_backbone), in_shape, rng_backbone))
        unimodal = topo in ("image_only", "speech_only")
        for m, ch, used in (("img", 3, uses_image), ("spc", 1, uses_speech)):
            rng_plain = next(rngs)
            if used and (topo in _CROSS_AFTER or unimodal):
                add(f"plain_{m}", self._embedder(self._conv_stack(ch, c.plain_filters, 2, rng_plain),
                                              (c.height, c.width, ch), rng_plain))
        head_names = ["head"] if unimodal else ["head_sp", "head_img", "head_mul"]
        for name in head_names:
            rng_h = next(rngs)
            add(name, [Dense(c.embed_width, c.head_width, rng_h), ReLU(),
                       Dense(c.head_width, c.head_width, rng_h), ReLU(),
                       Dense(c.head_width, c.n_classes, rng_h)])
        self.fusion = None if unimodal else FusionWeights(next(rngs))
        self.spc_shape = spc_shape
        self.img_shape = img_shape

    # -- construction helpers -------------------------------------------------
    @staticmethod
    def _conv_stack(in_ch, filters, per_block, rng):
        layers, ch = [], in_ch
        for f in filters:
            for _ in range(per_block):
                layers += [Conv2D(ch, f, rng=rng), ReLU()]
                ch = f
            layers.append(MaxPool2D(2))
        return layers

    def _backbone(self, in_ch, rng):
        per_block = 2 if self.config.resolved_backbone == "vgg" else 1
        return self._conv_stack(in_ch, self.config.backbone_filters, per_block, rng)

    def _embedder(self, conv_layers, in_shape, rng):
        trunk = Sequential(conv_layers)
        h, w, ch = output_shape(trunk, in_shape)
        return conv_layers + [BatchNorm(ch), Flatten(), Dense(h * w * ch, self.config.embed_width, rng), ReLU()]

    # -- parameters -----------------------------------------------------------
    def layers(self):
        for seq in self.parts.values():
            yield from seq.layers
        if self.fusion is not None:
            yield self.fusion

    def parameters(self):
        """Live parameter arrays keyed by ``<layer name>.<param>``."""
        return {f"{layer.name}.{k}": v for layer in self.layers() for k, v in layer.params.items()}

    # -- forward / backward ---------------------------------------------------
    def _check_inputs(self, images, speech):
        for arr, shape, label in ((images, self.img_shape, "image"), (speech, self.spc_shape, "speech")):
            if arr.ndim != 4:
                raise ShapeError(f"input.{label}", "ndim", 4, arr.ndim)
            for axis, (want, got) in enumerate(zip(shape, arr.shape[1:]), 1):
                if want != got:
                    raise ShapeError(f"input.{label}", axis, want, got)
        if len(images) != len(speech):
            raise ShapeError("input", "batch", len(images), len(speech))

    def _forward(self, images, speech, train):
        caches = {}

        def run(name, x):
            seq = self.parts[name]
            if train:
                y, caches[name] = seq.forward_train(x)
                return y
            return seq.forward(x)

        topo = self.config.topology
        if topo == "image_only":
            f = run("plain_img", images) + run("backbone_img", images)
            logits = run("head", f)
            probs = softmax(logits)
            return probs, caches | {"probs": probs}
        if topo == "speech_only":
            f = run("plain_spc", speech) + run("backbone_spc", run("stem", speech))
            probs = softmax(run("head", f))
            return probs, caches | {"probs": probs}

        x_i, x_s = images, run("stem", speech)
        if topo in _CROSS_BEFORE:
            x_i = x_i + run("pre_s", speech)
            x_s = x_s + run("pre_i", images)
        e2i, e2s = run("backbone_img", x_i), run("backbone_spc", x_s)
        if topo in _CROSS_AFTER:
            f_i, f_s, f_mul = intermediate_fusion(run("plain_img", images), run("plain_spc", speech), e2i, e2s)
        else:
            f_i, f_s, f_mul = e2i, e2s, e2i * e2s
        heads = (run("head_sp", f_s), run("head_img", f_i), run("head_mul", f_mul))
        w = self.fusion.params["w"]
        probs = softmax(fused_logits(*heads, w))
        caches.update(f_i=f_i, f_s=f_s, heads=heads, wn=softmax(w), probs=probs)
        return probs, caches

    def predict_batch(self, images, speech):
        images = np.asarray(images, dtype=np.float64)
        speech = np.asarray(speech, dtype=np.float64)
        self._check_inputs(images, speech)
        return self._forward(images, speech, train=False)[0]

    def predict(self, image, speech):
        """Probabilities for one ``(H, W, 3)`` image and ``(H, W, 1)`` spectrogram."""
        return self.predict_batch(np.asarray(image)[None], np.asarray(speech)[None])[0]

    __call__ = predict

    def forward_train(self, images, speech):
        images = np.asarray(images, dtype=np.float64)
        speech = np.asarray(speech, dtype=np.float64)
        self._check_inputs(images, speech)
        return self._forward(images, speech, train=True)

    def backward(self, caches, dprobs):
        grads = {}

        def back(name, dy):
            dx, g = self.parts[name].backward(caches[name], dy)
            grads.update(g)
            return dx

        topo = self.config.topology
        dlogits = softmax_backward(caches["probs"], dprobs)
        if topo in ("image_only", "speech_only"):
            df = back("head", dlogits)
            if topo == "image_only":
                back("plain_img", df)
                back("backbone_img", df)
            else:
                back("plain_spc", df)
                back("stem", back("backbone_spc", df))
            return grads

        wn, heads = caches["wn"], caches["heads"]
        dwn = np.array([np.sum(dlogits * h) for h in heads])
        grads["fusion.w"] = softmax_backward(wn, dwn)
        df_s = back("head_sp", wn[0] * dlogits)
        df_i = back("head_img", wn[1] * dlogits)
        df_mul = back("head_mul", wn[2] * dlogits)
        f_i, f_s = caches["f_i"], caches["f_s"]
        df_i = df_i + df_mul * f_s
        df_s = df_s + df_mul * f_i
        if topo in _CROSS_AFTER:
            back("plain_img", df_i)
            back("plain_spc", df_s)
            de2i, de2s = df_s, df_i
        else:
            de2i, de2s = df_i, df_s
        dx_i = back("backbone_img", de2i)
        dx_s = back("backbone_spc", de2s)
        back("stem", dx_s)
        if topo in _CROSS_BEFORE:
            back("pre_s", dx_i)
            back("pre_i", dx_s)
        return grads

    # -- persistence ----------------------------------------------------------
    def to_records(self):
        return [checkpoint.LayerRecord(layer.kind, layer.name, layer.tensors()) for layer in self.layers()]

    def save(self, path):
        checkpoint.write(path, self.config.to_text(), self.to_records())

    def to_bytes(self):
        return checkpoint.dumps(self.config.to_text(), self.to_records())


def _restore(config_text, records):
    model = FusionModel(FusionConfig.from_text(config_text))
    layers = list(model.layers())
    if len(layers) != len(records):
        raise checkpoint.CheckpointError(f"checkpoint has {len(records)} layers, config builds {len(layers)}")
    for layer, rec in zip(layers, records):
        if (layer.kind, layer.name) != (rec.kind, rec.name):
            raise checkpoint.CheckpointError(f"layer mismatch: expected {layer.kind} {layer.name}, got {rec.kind} {rec.name}")
        slots = [*layer.params.items(), *[(k, v) for k, v in layer.buffers.items()]]
        if len(slots) != len(rec.tensors):
            raise checkpoint.CheckpointError(f"{layer.name}: tensor count mismatch")
        for (key, current), loaded in zip(slots, rec.tensors):
            if current.shape != loaded.shape:
                raise checkpoint.CheckpointError(f"{layer.name}.{key}: shape {loaded.shape} != {current.shape}")
            target = layer.params if key in layer.params else layer.buffers
            target[key] = np.array(loaded)
    return model


def load_model(path):
    return _restore(*checkpoint.read(path))


def model_from_bytes(buf):
    return _restore(*checkpoint.loads(buf))

