"""From-scratch numerical core for the weight-estimation model.

The model is a three-layer dense head (5 -> 64 -> 32 -> 1, ReLU between
layers) over a five-element input [alpha, FT, A, AR, API], where alpha comes
from a small trainable image->scalar backbone (average-pooled patches into a
linear map).  Training is plain minibatch Adam on mean squared error with
exact analytic gradients; a finite-difference harness (`gradient_check`)
keeps the backward pass honest.

Everything is deterministic given a seed: parameter init, epoch shuffles,
and flip draws all consume one `random.Random` stream in a fixed order.
"""

import json
import math
import random
from array import array
from dataclasses import asdict, dataclass
from typing import Sequence

from ._kernels import (
    accumulate_outer,
    adam_update,
    add_scaled,
    dense_forward as _k_dense_forward,
    dot as _k_dot,
    matvec_transpose,
    relu as _k_relu,
    relu_backward,
)
from .errors import (
    DimensionMismatch,
    EmptyBatch,
    EmptyDataset,
)
from .features import FeatureScaler, extract_features, fit_scaler, raw_engineered
from .geometry import clamp_to_image
from ._kernels import sum_and_sumsq
from .imaging import (
    Image,
    crop as crop_image,
    decode,
    flip_horizontal,
    normalize,
    pool_backbone_input,
    resize,
)

HEAD_LAYER_SHAPES = ((64, 5), (32, 64), (1, 32))
DEFAULT_INPUT_SIZE = 224
DEFAULT_POOL_SIZE = 16
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8
CHECKPOINT_FORMAT_VERSION = 1


def _zeros(n: int) -> array:
    return array("d", bytes(8 * n))


class DenseLayer:
    """Fully connected layer: row-major (out_dim x in_dim) weights plus bias."""

    __slots__ = ("out_dim", "in_dim", "weights", "bias")

    def __init__(self, out_dim: int, in_dim: int, weights: array, bias: array):
        if out_dim <= 0 or in_dim <= 0:
            raise DimensionMismatch(f"bad layer dims ({out_dim}, {in_dim})")
        if len(weights) != out_dim * in_dim:
            raise DimensionMismatch(
                f"weight buffer {len(weights)} != {out_dim}x{in_dim}"
            )
        if len(bias) != out_dim:
            raise DimensionMismatch(f"bias length {len(bias)} != {out_dim}")
        self.out_dim = out_dim
        self.in_dim = in_dim
        self.weights = weights
        self.bias = bias

    @classmethod
    def random_init(cls, out_dim: int, in_dim: int, rng: random.Random) -> "DenseLayer":
        """Uniform fan-in init: entries in [-sqrt(1/in_dim), +sqrt(1/in_dim)]."""
        bound = math.sqrt(1.0 / in_dim)
        weights = array(
            "d", (rng.uniform(-bound, bound) for _ in range(out_dim * in_dim))
        )
        bias = array("d", (rng.uniform(-bound, bound) for _ in range(out_dim)))
        return cls(out_dim, in_dim, weights, bias)

    def forward(self, x: Sequence[float]) -> array:
        if len(x) != self.in_dim:
            raise DimensionMismatch(
                f"input length {len(x)} != layer in_dim {self.in_dim}"
            )
        xa = x if isinstance(x, array) else array("d", x)
        out = _zeros(self.out_dim)
        _k_dense_forward(self.weights, self.bias, xa, out, self.out_dim, self.in_dim)
        return out


class ToyBackbone:
    """Trainable image->scalar map standing in for a CNN backbone.

    The normalized square input is average-pooled onto a (pool_size x
    pool_size) grid per channel, flattened, and mapped through one linear
    unit to the single alpha value the head consumes.
    """

    __slots__ = ("pool_size", "channels", "weights", "bias")

    def __init__(self, pool_size: int, channels: int, weights: array, bias: array):
        if pool_size <= 0:
            raise DimensionMismatch(f"pool_size must be positive, got {pool_size}")
        expected = pool_size * pool_size * channels
        if len(weights) != expected:
            raise DimensionMismatch(
                f"backbone weight buffer {len(weights)} != {expected}"
            )
        if len(bias) != 1:
            raise DimensionMismatch("backbone bias must hold exactly one value")
        self.pool_size = pool_size
        self.channels = channels
        self.weights = weights
        self.bias = bias

    @property
    def input_dim(self) -> int:
        return self.pool_size * self.pool_size * self.channels

    @classmethod
    def random_init(
        cls, pool_size: int, channels: int, rng: random.Random
    ) -> "ToyBackbone":
        dim = pool_size * pool_size * channels
        bound = math.sqrt(1.0 / dim)
        weights = array("d", (rng.uniform(-bound, bound) for _ in range(dim)))
        bias = array("d", [rng.uniform(-bound, bound)])
        return cls(pool_size, channels, weights, bias)

    def forward(self, pooled: array) -> float:
        if len(pooled) != self.input_dim:
            raise DimensionMismatch(
                f"pooled input length {len(pooled)} != {self.input_dim}"
            )
        return _k_dot(self.weights, pooled, self.input_dim) + self.bias[0]


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 32
    epochs: int = 10
    seed: int = 0
    flip_probability: float = 0.5

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive: {self.learning_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1: {self.batch_size}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1: {self.epochs}")
        if not 0.0 <= self.flip_probability <= 1.0:
            raise ValueError(
                f"flip_probability must be in [0, 1]: {self.flip_probability}"
            )


class WeightModel:
    """Backbone plus the fixed-shape dense head and its preprocessing state.

    Layer shapes are pinned to (64, 5), (32, 64), (1, 32); construction and
    checkpoint loading reject anything else.
    """

    def __init__(
        self,
        backbone: ToyBackbone,
        layers: Sequence[DenseLayer],
        scaler: FeatureScaler,
        registry: Sequence[str],
        pixel_mean: float = 0.0,
        pixel_std: float = 1.0,
        input_size: int = DEFAULT_INPUT_SIZE,
        train_config: TrainConfig | None = None,
    ):
        layers = list(layers)
        shapes = tuple((layer.out_dim, layer.in_dim) for layer in layers)
        if shapes != HEAD_LAYER_SHAPES:
            raise DimensionMismatch(
                f"head layer shapes {shapes} != required {HEAD_LAYER_SHAPES}"
            )
        if input_size < backbone.pool_size:
            raise DimensionMismatch(
                f"input_size {input_size} smaller than pool grid {backbone.pool_size}"
            )
        if not pixel_std > 0:
            raise ValueError(f"pixel_std must be positive: {pixel_std}")
        self.backbone = backbone
        self.layers = layers
        self.scaler = scaler
        self.registry = list(registry)
        self.pixel_mean = pixel_mean
        self.pixel_std = pixel_std
        self.input_size = input_size
        self.train_config = train_config

    @classmethod
    def initialize(
        cls,
        registry: Sequence[str],
        channels: int = 1,
        pool_size: int = DEFAULT_POOL_SIZE,
        seed: int = 0,
        input_size: int = DEFAULT_INPUT_SIZE,
    ) -> "WeightModel":
        """Seeded uniform fan-in init; draw order is backbone then layers 1-3."""
        rng = random.Random(seed)
        backbone = ToyBackbone.random_init(pool_size, channels, rng)
        layers = [
            DenseLayer.random_init(out_dim, in_dim, rng)
            for out_dim, in_dim in HEAD_LAYER_SHAPES
        ]
        return cls(backbone, layers, FeatureScaler.identity(), registry)

    def parameter_blocks(self) -> dict:
        """Named flat views of every trainable buffer, in a fixed order."""
        blocks = {
            "backbone.weights": self.backbone.weights,
            "backbone.bias": self.backbone.bias,
        }
        for i, layer in enumerate(self.layers, start=1):
            blocks[f"layer{i}.weights"] = layer.weights
            blocks[f"layer{i}.bias"] = layer.bias
        return blocks

    def prepare_backbone_input(self, crop: Image, flip: bool = False) -> array:
        """Resize to the square input, optionally flip, normalize, pool."""
        resized = resize(crop, self.input_size, self.input_size)
        if flip:
            resized = flip_horizontal(resized)
        normalized = normalize(resized, self.pixel_mean, self.pixel_std)
        return pool_backbone_input(normalized, self.backbone.pool_size)

    def head_forward(self, x: Sequence[float]) -> float:
        y, _ = self._head_forward_cached(
            x if isinstance(x, array) else array("d", x)
        )
        return y

    def _head_forward_cached(self, x: array):
        l1, l2, l3 = self.layers
        if len(x) != l1.in_dim:
            raise DimensionMismatch(f"head input length {len(x)} != {l1.in_dim}")
        z1 = _zeros(l1.out_dim)
        _k_dense_forward(l1.weights, l1.bias, x, z1, l1.out_dim, l1.in_dim)
        a1 = _zeros(l1.out_dim)
        _k_relu(z1, a1, l1.out_dim)
        z2 = _zeros(l2.out_dim)
        _k_dense_forward(l2.weights, l2.bias, a1, z2, l2.out_dim, l2.in_dim)
        a2 = _zeros(l2.out_dim)
        _k_relu(z2, a2, l2.out_dim)
        z3 = _zeros(l3.out_dim)
        _k_dense_forward(l3.weights, l3.bias, a2, z3, l3.out_dim, l3.in_dim)
        return z3[0], (x, z1, a1, z2, a2)

    def forward(self, crop: Image, label: str) -> float:
        """Predicted weight in grams for one raw detection crop."""
        pooled = self.prepare_backbone_input(crop)
        alpha = self.backbone.forward(pooled)
        fv = extract_features(crop, label, alpha, self.registry, self.scaler)
        return self.head_forward(fv.as_array())

    # -- checkpoint serialization ------------------------------------------

    def to_checkpoint_dict(self) -> dict:
        def nested(layer: DenseLayer):
            return [
                list(layer.weights[r * layer.in_dim : (r + 1) * layer.in_dim])
                for r in range(layer.out_dim)
            ]

        return {
            "format_version": CHECKPOINT_FORMAT_VERSION,
            "registry": list(self.registry),
            "scaler": {"shift": list(self.scaler.shift), "scale": list(self.scaler.scale)},
            "backbone": {
                "pool_size": self.backbone.pool_size,
                "channels": self.backbone.channels,
                "weights": list(self.backbone.weights),
                "bias": self.backbone.bias[0],
            },
            "layers": [
                {"weights": nested(layer), "bias": list(layer.bias)}
                for layer in self.layers
            ],
            "pixel_normalization": {"mean": self.pixel_mean, "std": self.pixel_std},
            "input_size": self.input_size,
            "train_config": asdict(self.train_config) if self.train_config else None,
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_checkpoint_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_checkpoint_dict(cls, doc: dict) -> "WeightModel":
        if doc.get("format_version") != CHECKPOINT_FORMAT_VERSION:
            raise DimensionMismatch(
                f"unsupported checkpoint format_version {doc.get('format_version')!r}"
            )
        try:
            bb = doc["backbone"]
            backbone = ToyBackbone(
                int(bb["pool_size"]),
                int(bb["channels"]),
                array("d", bb["weights"]),
                array("d", [bb["bias"]]),
            )
            layers = []
            for entry in doc["layers"]:
                rows = entry["weights"]
                out_dim = len(rows)
                in_dim = len(rows[0]) if rows else 0
                flat = array("d", (v for row in rows for v in row))
                if any(len(row) != in_dim for row in rows):
                    raise DimensionMismatch("ragged weight rows in checkpoint")
                layers.append(DenseLayer(out_dim, in_dim, flat, array("d", entry["bias"])))
            scaler = FeatureScaler(
                shift=tuple(doc["scaler"]["shift"]),
                scale=tuple(doc["scaler"]["scale"]),
            )
            norm = doc["pixel_normalization"]
            tc = doc.get("train_config")
            config = TrainConfig(**tc) if tc else None
            model = cls(
                backbone,
                layers,
                scaler,
                doc["registry"],
                pixel_mean=float(norm["mean"]),
                pixel_std=float(norm["std"]),
                input_size=int(doc.get("input_size", DEFAULT_INPUT_SIZE)),
                train_config=config,
            )
        except (KeyError, TypeError, IndexError) as exc:
            raise DimensionMismatch(f"malformed checkpoint: {exc}") from exc
        for name, block in model.parameter_blocks().items():
            if any(not math.isfinite(v) for v in block):
                raise DimensionMismatch(f"non-finite values in checkpoint block {name}")
        return model

    @classmethod
    def load(cls, path) -> "WeightModel":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_checkpoint_dict(json.load(fh))


# -- public functional ops ---------------------------------------------------


def dense_forward(layer: DenseLayer, x: Sequence[float]) -> list:
    """W @ x + b as a plain list."""
    return list(layer.forward(x))


def relu(values: Sequence[float]) -> list:
    """Element-wise max(0, v)."""
    return [v if v > 0.0 else 0.0 for v in values]


def mse_loss(pred: Sequence[float], target: Sequence[float]) -> float:
    """Mean squared error (1/n) * sum((target_i - pred_i)^2)."""
    if len(pred) != len(target):
        raise DimensionMismatch(f"length mismatch {len(pred)} vs {len(target)}")
    if len(pred) == 0:
        raise EmptyBatch("mse_loss needs at least one element")
    acc = 0.0
    for p, t in zip(pred, target):
        d = t - p
        acc += d * d
    return acc / len(pred)


def forward(model: WeightModel, crop: Image, label: str) -> float:
    return model.forward(crop, label)


def predict(model: WeightModel, crop: Image, label: str) -> float:
    """Deterministic inference; identical preprocessing to forward()."""
    return model.forward(crop, label)


def closed_form_head_output(model: WeightModel, x: Sequence[float]) -> float:
    """Reference head evaluation as one nested expression.

    Kept deliberately independent of the layered kernel path; tests check
    the two agree to tight tolerance on random inputs.
    """
    l1, l2, l3 = model.layers
    w1, b1 = l1.weights, l1.bias
    w2, b2 = l2.weights, l2.bias
    w3, b3 = l3.weights, l3.bias
    h1 = [
        max(0.0, sum(w1[r * 5 + c] * x[c] for c in range(5)) + b1[r])
        for r in range(64)
    ]
    h2 = [
        max(0.0, sum(w2[r * 64 + c] * h1[c] for c in range(64)) + b2[r])
        for r in range(32)
    ]
    return sum(w3[c] * h2[c] for c in range(32)) + b3[0]


# -- prepared-sample plumbing (shared by train / backward / gradient_check) --


@dataclass
class PreparedSample:
    """Sample with preprocessing already applied: the pooled backbone input,
    the scaled engineered features, and the target weight in grams."""

    backbone_input: array
    engineered: tuple
    target: float


def prepare_sample(
    model: WeightModel, crop: Image, label: str, target: float, flip: bool = False
) -> PreparedSample:
    pooled = model.prepare_backbone_input(crop, flip=flip)
    raw = raw_engineered(crop, label, model.registry)
    return PreparedSample(pooled, model.scaler.transform(raw), float(target))


class _Scratch:
    """Reusable per-batch work buffers for forward/backward passes."""

    def __init__(self, model: WeightModel):
        l1, l2, l3 = model.layers
        self.da2 = _zeros(l2.out_dim)
        self.d2 = _zeros(l2.out_dim)
        self.da1 = _zeros(l1.out_dim)
        self.d1 = _zeros(l1.out_dim)
        self.dx = _zeros(l1.in_dim)
        self.dy = _zeros(1)


def _forward_prepared(model: WeightModel, sample: PreparedSample) -> float:
    alpha = model.backbone.forward(sample.backbone_input)
    x = array("d", (alpha,) + sample.engineered)
    y, _ = model._head_forward_cached(x)
    return y


def _batch_loss(model: WeightModel, batch: Sequence[PreparedSample]) -> float:
    acc = 0.0
    for sample in batch:
        r = _forward_prepared(model, sample) - sample.target
        acc += r * r
    return acc / len(batch)


def _batch_loss_and_relu_signs(model, batch):
    """Loss plus per-sample bitmasks of which ReLU units are active.

    Used by gradient_check to recognize finite-difference probes that step
    across a ReLU kink (where the loss is not differentiable and central
    differences are meaningless).
    """
    acc = 0.0
    masks = []
    for sample in batch:
        alpha = model.backbone.forward(sample.backbone_input)
        x = array("d", (alpha,) + sample.engineered)
        y, (_, z1, _, z2, _) = model._head_forward_cached(x)
        m1 = 0
        for j, v in enumerate(z1):
            if v > 0.0:
                m1 |= 1 << j
        m2 = 0
        for j, v in enumerate(z2):
            if v > 0.0:
                m2 |= 1 << j
        masks.append((m1, m2))
        r = y - sample.target
        acc += r * r
    return acc / len(batch), tuple(masks)


def _zero_gradients(model: WeightModel) -> dict:
    return {name: _zeros(len(block)) for name, block in model.parameter_blocks().items()}


def _backward_prepared(
    model: WeightModel, batch: Sequence[PreparedSample]
) -> tuple[float, dict]:
    """Batch MSE and exact analytic gradients for every parameter block."""
    if not batch:
        raise EmptyBatch("backward needs at least one sample")
    grads = _zero_gradients(model)
    l1, l2, l3 = model.layers
    s = _Scratch(model)
    n = len(batch)
    loss_acc = 0.0
    g_bw = grads["backbone.weights"]
    g_bb = grads["backbone.bias"]
    g_w1, g_b1 = grads["layer1.weights"], grads["layer1.bias"]
    g_w2, g_b2 = grads["layer2.weights"], grads["layer2.bias"]
    g_w3, g_b3 = grads["layer3.weights"], grads["layer3.bias"]
    for sample in batch:
        u = sample.backbone_input
        alpha = model.backbone.forward(u)
        x = array("d", (alpha,) + sample.engineered)
        y, (_, z1, a1, z2, a2) = model._head_forward_cached(x)
        r = y - sample.target
        loss_acc += r * r
        dy = 2.0 * r / n
        s.dy[0] = dy
        # layer 3
        accumulate_outer(g_w3, s.dy, a2, l3.out_dim, l3.in_dim)
        g_b3[0] += dy
        matvec_transpose(l3.weights, s.dy, s.da2, l3.out_dim, l3.in_dim)
        relu_backward(z2, s.da2, s.d2, l2.out_dim)
        # layer 2
        accumulate_outer(g_w2, s.d2, a1, l2.out_dim, l2.in_dim)
        add_scaled(g_b2, s.d2, 1.0, l2.out_dim)
        matvec_transpose(l2.weights, s.d2, s.da1, l2.out_dim, l2.in_dim)
        relu_backward(z1, s.da1, s.d1, l1.out_dim)
        # layer 1
        accumulate_outer(g_w1, s.d1, x, l1.out_dim, l1.in_dim)
        add_scaled(g_b1, s.d1, 1.0, l1.out_dim)
        matvec_transpose(l1.weights, s.d1, s.dx, l1.out_dim, l1.in_dim)
        # backbone receives the gradient of alpha = x[0]
        dalpha = s.dx[0]
        add_scaled(g_bw, u, dalpha, model.backbone.input_dim)
        g_bb[0] += dalpha
    return loss_acc / n, grads


def backward(model: WeightModel, batch) -> dict:
    """Analytic gradients of batch MSE for a batch of (crop, label, weight)."""
    prepared = [
        prepare_sample(model, crop, label, weight) for crop, label, weight in batch
    ]
    _, grads = _backward_prepared(model, prepared)
    return grads


# -- Adam --------------------------------------------------------------------


class AdamState:
    """Per-block first/second moment accumulators and the step counter."""

    def __init__(
        self,
        model: WeightModel,
        learning_rate: float,
        beta1: float = ADAM_BETA1,
        beta2: float = ADAM_BETA2,
        epsilon: float = ADAM_EPSILON,
    ):
        if not learning_rate > 0:
            raise ValueError(f"learning_rate must be positive: {learning_rate}")
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.step = 0
        # running beta^t products, updated incrementally for determinism
        self.beta1_pow = 1.0
        self.beta2_pow = 1.0
        self.m = {name: _zeros(len(b)) for name, b in model.parameter_blocks().items()}
        self.v = {name: _zeros(len(b)) for name, b in model.parameter_blocks().items()}


def adam_step(params: dict, grads: dict, state: AdamState) -> None:
    """One bias-corrected Adam update, in place, over all parameter blocks."""
    if set(params) != set(state.m) or set(grads) != set(state.m):
        raise DimensionMismatch("parameter/gradient blocks do not match Adam state")
    state.step += 1
    state.beta1_pow *= state.beta1
    state.beta2_pow *= state.beta2
    bc1 = 1.0 - state.beta1_pow
    bc2 = 1.0 - state.beta2_pow
    for name, p in params.items():
        g = grads[name]
        if len(g) != len(p):
            raise DimensionMismatch(f"gradient block {name} length {len(g)} != {len(p)}")
        adam_update(
            p,
            g,
            state.m[name],
            state.v[name],
            len(p),
            state.learning_rate,
            state.beta1,
            state.beta2,
            state.epsilon,
            bc1,
            bc2,
        )


# -- training ------------------------------------------------------------------


def _load_crop(record):
    with open(record.image_path, "rb") as fh:
        img = decode(fh.read())
    box = clamp_to_image(record.gt_box, img.width, img.height)
    return crop_image(img, box)


def _pipeline_stats(crops, input_size):
    """Pixel mean/std pooled over the resized crops, computed streaming."""
    total = 0.0
    total_sq = 0.0
    count = 0
    for c in crops:
        resized = resize(c, input_size, input_size)
        s, ss = sum_and_sumsq(resized.pixels, resized.pixel_count)
        total += s
        total_sq += ss
        count += resized.pixel_count
    mean = total / count
    var = total_sq / count - mean * mean
    if var < 0.0:
        var = 0.0
    std = math.sqrt(var)
    return mean, (std if std > 0.0 else 1.0)


def train(
    model: WeightModel,
    records,
    config: TrainConfig,
    scaler_mode: str = "standardize",
    threads: int = 1,
) -> tuple[WeightModel, list]:
    """Fit the model on SampleRecords; returns (model, per-epoch loss history).

    Preprocessing fitted here and persisted with the model: the feature
    scaler (unless scaler_mode == "identity") and the pixel normalization
    statistics of the resized training crops.  The output layer bias starts
    at the mean training weight so the gram-scale offset does not have to be
    climbed at the Adam step size; all other parameters keep their seeded
    init.  Shuffling and flip draws consume the config-seeded RNG in a fixed
    order, so equal seeds give bit-identical models.
    """
    records = list(records)
    if not records:
        raise EmptyDataset("train needs at least one record")
    if scaler_mode not in ("standardize", "identity"):
        raise ValueError(f"scaler_mode must be standardize or identity: {scaler_mode}")
    rng = random.Random(config.seed)

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            crops = list(pool.map(_load_crop, records))
    else:
        crops = [_load_crop(rec) for rec in records]

    raws = [raw_engineered(c, rec.label, model.registry) for c, rec in zip(crops, records)]
    if scaler_mode == "standardize":
        model.scaler = fit_scaler(raws)
    else:
        model.scaler = FeatureScaler.identity()

    model.pixel_mean, model.pixel_std = _pipeline_stats(crops, model.input_size)

    prepared = []
    for c, rec, raw in zip(crops, records, raws):
        engineered = model.scaler.transform(raw)
        plain = model.prepare_backbone_input(c, flip=False)
        flipped = model.prepare_backbone_input(c, flip=True)
        prepared.append(
            (
                PreparedSample(plain, engineered, rec.weight_grams),
                PreparedSample(flipped, engineered, rec.weight_grams),
            )
        )
    del crops

    n = len(prepared)
    mean_target = sum(p[0].target for p in prepared) / n
    model.layers[2].bias[0] = mean_target

    params = model.parameter_blocks()
    state = AdamState(model, config.learning_rate)
    history = []
    for _ in range(config.epochs):
        order = list(range(n))
        rng.shuffle(order)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            chunk = order[start : start + config.batch_size]
            batch = []
            for idx in chunk:
                use_flip = rng.random() < config.flip_probability
                batch.append(prepared[idx][1 if use_flip else 0])
            loss, grads = _backward_prepared(model, batch)
            adam_step(params, grads, state)
            epoch_loss += loss * len(batch)
        history.append(epoch_loss / n)
    model.train_config = config
    return model, history


# -- gradient checking ---------------------------------------------------------


@dataclass
class GradientCheckReport:
    """Finite-difference audit of the analytic gradients.

    max_rel_error maps block name -> worst relative error among comparable
    entries; flagged lists blocks whose error exceeded the tolerance.
    Two kinds of probe are excluded from comparison and counted instead:
    kink_crossings (the +/-h evaluations straddled a ReLU kink, where the
    loss is not differentiable) and noise_limited (the analytic/numeric
    difference sits inside the rounding-noise bound of the central
    difference itself, so the method cannot resolve the entry either way).
    """

    h: float
    tol: float
    max_rel_error: dict
    flagged: list
    kink_crossings: int
    noise_limited: int = 0

    @property
    def passed(self) -> bool:
        return not self.flagged

    @property
    def worst(self) -> float:
        return max(self.max_rel_error.values(), default=0.0)


def gradient_check(
    model: WeightModel, batch, h: float = 1e-5, tol: float = 1e-4
) -> GradientCheckReport:
    """Compare analytic gradients to central differences per parameter block.

    batch holds (crop, label, weight) triples.  h must be in (0, 1e-3].
    """
    if not 0.0 < h <= 1e-3:
        raise ValueError(f"h must be in (0, 1e-3], got {h}")
    prepared = [
        prepare_sample(model, crop, label, weight) for crop, label, weight in batch
    ]
    return gradient_check_prepared(model, prepared, h=h, tol=tol)


def gradient_check_prepared(
    model: WeightModel, prepared, h: float = 1e-5, tol: float = 1e-4
) -> GradientCheckReport:
    """Central-difference audit over every parameter entry.

    Two kinds of probe are excluded rather than compared: entries whose
    analytic/numeric difference sits below the rounding-noise floor of the
    central difference itself (|L+ - L-| is then pure cancellation), and
    probes whose +/-h evaluations straddle a ReLU kink.
    """
    _, analytic = _backward_prepared(model, prepared)
    params = model.parameter_blocks()
    loss0 = _batch_loss(model, prepared)
    machine_eps = 2.220446049250313e-16
    # Each loss evaluation chains hundreds of floating ops (the 64-wide and
    # 256-wide dot products dominate), so its rounding error is a few
    # hundred ulps of the loss scale; the central difference divides the
    # cancellation of two such values by 2h.
    noise_floor = 256.0 * machine_eps * max(1.0, abs(loss0)) / h
    max_rel = {}
    flagged = []
    crossings = 0
    noise_limited = 0
    for name, block in params.items():
        worst = 0.0
        ana_block = analytic[name]
        for i in range(len(block)):
            orig = block[i]
            block[i] = orig + h
            loss_plus = _batch_loss(model, prepared)
            block[i] = orig - h
            loss_minus = _batch_loss(model, prepared)
            block[i] = orig
            numeric = (loss_plus - loss_minus) / (2.0 * h)
            ana = ana_block[i]
            diff = abs(numeric - ana)
            if diff <= noise_floor:
                if diff != 0.0:
                    noise_limited += 1
                continue
            rel = diff / max(abs(numeric), abs(ana))
            if rel > tol and _is_kink_crossing(model, prepared, block, i, orig, h):
                crossings += 1
                continue
            if rel > worst:
                worst = rel
        max_rel[name] = worst
        if worst > tol:
            flagged.append(name)
    return GradientCheckReport(
        h=h,
        tol=tol,
        max_rel_error=max_rel,
        flagged=flagged,
        kink_crossings=crossings,
        noise_limited=noise_limited,
    )


def _is_kink_crossing(model, prepared, block, index, orig, h) -> bool:
    """True when the +/-h probes activate different ReLU unit sets, i.e. the
    central difference straddles a non-differentiable point."""
    block[index] = orig + h
    _, masks_plus = _batch_loss_and_relu_signs(model, prepared)
    block[index] = orig - h
    _, masks_minus = _batch_loss_and_relu_signs(model, prepared)
    block[index] = orig
    return masks_plus != masks_minus
