"""Self-contained MLP trainer with real backpropagation on synthetic data.

Small enough to run hundreds of trials on a laptop, real enough to exhibit
the classic failure modes on demand: vanishing and exploding gradients, dead
ReLU layers, stalled optimization, and early convergence. Each epoch emits
the same trace records a production training loop would.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np

from .errors import InvalidInput
from .runner import EpochPayload
from .space import HpConfig, SearchSpace
from .stats import compute_stat_vector
from .trace import EpochRecord, LayerRecord, TraceFinal, TraceMeta, TrialTrace

ACTIVATIONS = ("relu", "sigmoid", "tanh")
GENERATORS = ("gaussian_blobs", "two_spirals")


@dataclass(frozen=True)
class MlpSpec:
    depth: int = 2  # hidden layers
    width: int = 16
    activation: str = "relu"
    init_scale: float = 1.0  # multiplier on 1/sqrt(fan_in) init std
    learning_rate: float = 0.1
    momentum: float = 0.0
    batch_size: int = 32
    max_epoch: int = 20
    bias_init: float = 0.0  # constant bias offset; strongly negative kills ReLUs

    def __post_init__(self):
        if not 1 <= self.depth <= 8:
            raise InvalidInput(f"depth {self.depth} outside 1..8")
        if not 4 <= self.width <= 256:
            raise InvalidInput(f"width {self.width} outside 4..256")
        if self.activation not in ACTIVATIONS:
            raise InvalidInput(f"unknown activation {self.activation!r}")
        if self.init_scale <= 0:
            raise InvalidInput("init_scale must be positive")
        if self.learning_rate < 0:
            raise InvalidInput("learning_rate must be nonnegative")
        if not 0 <= self.momentum < 1:
            raise InvalidInput("momentum must be in [0,1)")
        if self.batch_size < 1:
            raise InvalidInput("batch_size must be positive")
        if self.max_epoch < 1:
            raise InvalidInput("max_epoch must be positive")

    @classmethod
    def from_config(cls, config: HpConfig) -> "MlpSpec":
        return cls(**config.values)


@dataclass(frozen=True)
class SyntheticDataset:
    n_samples: int = 600
    n_features: int = 12
    n_classes: int = 4
    generator: str = "gaussian_blobs"
    seed: int = 0

    def __post_init__(self):
        if self.generator not in GENERATORS:
            raise InvalidInput(f"unknown generator {self.generator!r}")
        if self.n_classes > self.n_samples:
            raise InvalidInput("more classes than samples")
        if self.generator == "two_spirals" and self.n_classes != 2:
            raise InvalidInput("two_spirals is a 2-class problem")


def generate_dataset(spec: SyntheticDataset) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic, class-balanced features/labels, standardized per column."""
    rng = np.random.default_rng(spec.seed)
    base = spec.n_samples // spec.n_classes
    counts = [base + (1 if c < spec.n_samples % spec.n_classes else 0) for c in range(spec.n_classes)]
    xs, ys = [], []
    if spec.generator == "gaussian_blobs":
        centers = rng.normal(0.0, 3.0, size=(spec.n_classes, spec.n_features))
        for c, cnt in enumerate(counts):
            xs.append(centers[c] + rng.normal(0.0, 1.0, size=(cnt, spec.n_features)))
            ys.append(np.full(cnt, c, dtype=np.int64))
    else:  # two_spirals
        for c, cnt in enumerate(counts):
            t = rng.uniform(0.25, 3.0 * math.pi, size=cnt)
            sign = 1.0 if c == 0 else -1.0
            core = np.stack([sign * t * np.cos(t), sign * t * np.sin(t)], axis=1)
            core += rng.normal(0.0, 0.1, size=core.shape)
            if spec.n_features > 2:
                extra = rng.normal(0.0, 1.0, size=(cnt, spec.n_features - 2))
                core = np.concatenate([core, extra], axis=1)
            elif spec.n_features < 2:
                core = core[:, : spec.n_features]
            xs.append(core)
            ys.append(np.full(cnt, c, dtype=np.int64))
    X = np.concatenate(xs, axis=0)
    y = np.concatenate(ys, axis=0)
    order = rng.permutation(len(y))
    X, y = X[order], y[order]
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std[std == 0] = 1.0
    X = (X - mean) / std
    return X, y


@dataclass
class TrainData:
    X_train: np.ndarray
    y_train: np.ndarray
    X_val: np.ndarray
    y_val: np.ndarray

    @property
    def n_features(self) -> int:
        return self.X_train.shape[1]

    @property
    def n_classes(self) -> int:
        return int(max(self.y_train.max(), self.y_val.max())) + 1


def split_holdout(X: np.ndarray, y: np.ndarray, seed: int, val_fraction: float = 0.2) -> TrainData:
    """Fixed 80/20 split, deterministic in the seed."""
    rng = np.random.default_rng(seed + 0x5EED)
    order = rng.permutation(len(y))
    n_val = max(1, int(round(len(y) * val_fraction)))
    val_idx, train_idx = order[:n_val], order[n_val:]
    return TrainData(X[train_idx], y[train_idx], X[val_idx], y[val_idx])


@dataclass
class ModelState:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    vel_w: list[np.ndarray]
    vel_b: list[np.ndarray]

    @property
    def n_layers(self) -> int:
        return len(self.weights)


def init_model(spec: MlpSpec, n_features: int, n_classes: int, rng: np.random.Generator) -> ModelState:
    sizes = [n_features] + [spec.width] * spec.depth + [n_classes]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        std = spec.init_scale / math.sqrt(fan_in)
        weights.append(rng.normal(0.0, std, size=(fan_in, fan_out)))
        biases.append(np.full(fan_out, spec.bias_init, dtype=np.float64))
    return ModelState(
        weights=weights,
        biases=biases,
        vel_w=[np.zeros_like(w) for w in weights],
        vel_b=[np.zeros_like(b) for b in biases],
    )


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "sigmoid":
        with np.errstate(over="ignore"):
            return 1.0 / (1.0 + np.exp(-z))
    return np.tanh(z)


def _activate_grad(a: np.ndarray, z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return (z > 0.0).astype(np.float64)
    if kind == "sigmoid":
        return a * (1.0 - a)
    return 1.0 - a * a


def forward(model: ModelState, X: np.ndarray, spec: MlpSpec):
    """Returns (post-activations per hidden layer, pre-activations, logits)."""
    acts = [X]
    pres = []
    a = X
    with np.errstate(all="ignore"):
        for l in range(spec.depth):
            z = a @ model.weights[l] + model.biases[l]
            pres.append(z)
            a = _activate(z, spec.activation)
            acts.append(a)
        logits = a @ model.weights[spec.depth] + model.biases[spec.depth]
    return acts, pres, logits


def softmax_cross_entropy(logits: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean loss and gradient w.r.t. logits (already divided by batch size)."""
    with np.errstate(all="ignore"):
        shifted = logits - logits.max(axis=1, keepdims=True)
        exp = np.exp(shifted)
        denom = exp.sum(axis=1, keepdims=True)
        logp = shifted - np.log(denom)
        loss = float(-logp[np.arange(len(y)), y].mean())
        probs = exp / denom
        grad = probs
        grad[np.arange(len(y)), y] -= 1.0
        grad /= len(y)
    return loss, grad


def loss_only(model: ModelState, X: np.ndarray, y: np.ndarray, spec: MlpSpec) -> float:
    _, _, logits = forward(model, X, spec)
    return softmax_cross_entropy(logits, y)[0]


def loss_and_grads(model: ModelState, X: np.ndarray, y: np.ndarray, spec: MlpSpec):
    """Analytic backprop; returns (loss, dW list, db list, hidden activations)."""
    acts, pres, logits = forward(model, X, spec)
    loss, dlogits = softmax_cross_entropy(logits, y)
    dws = [None] * model.n_layers
    dbs = [None] * model.n_layers
    with np.errstate(all="ignore"):
        dws[spec.depth] = acts[spec.depth].T @ dlogits
        dbs[spec.depth] = dlogits.sum(axis=0)
        da = dlogits @ model.weights[spec.depth].T
        for l in range(spec.depth - 1, -1, -1):
            dz = da * _activate_grad(acts[l + 1], pres[l], spec.activation)
            dws[l] = acts[l].T @ dz
            dbs[l] = dz.sum(axis=0)
            if l > 0:
                da = dz @ model.weights[l].T
    return loss, dws, dbs, acts[1:]


def _layer_name(index: int, depth: int) -> str:
    return "out" if index == depth else f"h{index}"


def train_epoch(
    model: ModelState,
    data: TrainData,
    spec: MlpSpec,
    rng: np.random.Generator,
    trial_id: str = "trial",
    epoch: int = 0,
) -> tuple[ModelState, EpochRecord, list[LayerRecord]]:
    """One full pass over shuffled minibatches with momentum SGD.

    The epoch record carries the epoch-mean training loss and holdout
    accuracy; layer records summarize gradients and activations of the last
    minibatch and the weights after the epoch's final update. A non-finite
    loss is recorded faithfully rather than raised.
    """
    n = len(data.y_train)
    order = rng.permutation(n)
    loss_sum = 0.0
    last_grads: tuple | None = None
    last_acts: list[np.ndarray] | None = None
    with np.errstate(all="ignore"):
        for start in range(0, n, spec.batch_size):
            idx = order[start : start + spec.batch_size]
            Xb, yb = data.X_train[idx], data.y_train[idx]
            loss, dws, dbs, acts = loss_and_grads(model, Xb, yb, spec)
            loss_sum += loss * len(idx)
            last_grads = (dws, dbs)
            last_acts = acts
            for l in range(model.n_layers):
                model.vel_w[l] = spec.momentum * model.vel_w[l] - spec.learning_rate * dws[l]
                model.vel_b[l] = spec.momentum * model.vel_b[l] - spec.learning_rate * dbs[l]
                model.weights[l] = model.weights[l] + model.vel_w[l]
                model.biases[l] = model.biases[l] + model.vel_b[l]
        train_loss = loss_sum / n
        _, _, val_logits = forward(model, data.X_val, spec)
        pred = val_logits.argmax(axis=1)
        val_metric = float((pred == data.y_val).mean())
        if not np.isfinite(val_logits).all():
            # argmax over nan rows is meaningless; count them as wrong
            bad = ~np.isfinite(val_logits).all(axis=1)
            val_metric = float(((pred == data.y_val) & ~bad).mean())

    layers: list[LayerRecord] = []
    dws, dbs = last_grads
    for l in range(model.n_layers):
        gvals = np.concatenate([dws[l].ravel(), dbs[l].ravel()])
        layers.append(
            LayerRecord(trial_id, epoch, l, _layer_name(l, spec.depth), "grad", compute_stat_vector(gvals))
        )
    for l in range(model.n_layers):
        wvals = np.concatenate([model.weights[l].ravel(), model.biases[l].ravel()])
        layers.append(
            LayerRecord(trial_id, epoch, l, _layer_name(l, spec.depth), "weight", compute_stat_vector(wvals))
        )
    for l, act in enumerate(last_acts):
        layers.append(
            LayerRecord(trial_id, epoch, l, _layer_name(l, spec.depth), "act", compute_stat_vector(act))
        )
    record = EpochRecord(
        trial_id=trial_id,
        epoch=epoch,
        train_loss=train_loss,
        val_metric=val_metric,
        metric_mode="maximize",
        wall_ms=0,
    )
    return model, record, layers


# ---------------------------------------------------------------------------
# pathology recipes


@dataclass(frozen=True)
class Recipe:
    name: str
    overrides: dict
    expected: tuple[str, ...]
    dataset: SyntheticDataset | None = None  # None: use the corpus default


BASE_RECIPE_SPEC = MlpSpec(
    depth=2,
    width=16,
    activation="relu",
    init_scale=1.0,
    learning_rate=0.2,
    momentum=0.0,
    batch_size=32,
    max_epoch=20,
)

# An underfit-able task: the convergence recipe needs an irreducible loss
# floor, which separable blobs do not have (cross-entropy keeps shrinking
# through margin growth, so the loss minimum keeps renewing).
CONVERGED_DATASET = SyntheticDataset(
    n_samples=600, n_features=2, n_classes=2, generator="two_spirals", seed=7
)


def pathology_recipes() -> list[Recipe]:
    """Named MlpSpec overrides that reproduce one training pathology each."""
    return [
        Recipe(
            "vanishing",
            {"depth": 8, "activation": "sigmoid", "init_scale": 0.3, "learning_rate": 0.05},
            ("ERG",),
        ),
        Recipe(
            "exploding",
            {"depth": 5, "width": 64, "init_scale": 5.0, "learning_rate": 0.005},
            ("AGV", "EAG"),
        ),
        Recipe("dead_relu", {"bias_init": -3.0, "init_scale": 0.5}, ("LAR",)),
        Recipe("no_learning", {"learning_rate": 1e-9}, ("PLC",)),
        Recipe(
            "converged_early",
            {"depth": 1, "width": 8, "learning_rate": 0.5, "batch_size": 64, "max_epoch": 30},
            ("NMG",),
            dataset=CONVERGED_DATASET,
        ),
    ]


def recipe_spec(recipe: Recipe) -> MlpSpec:
    return replace(BASE_RECIPE_SPEC, **recipe.overrides)


def recipe_dataset(recipe: Recipe, default: SyntheticDataset | None = None) -> SyntheticDataset:
    if recipe.dataset is not None:
        return recipe.dataset
    return default if default is not None else DEFAULT_DATASET


def run_trial_trace(
    spec: MlpSpec,
    dataset: SyntheticDataset,
    train_seed: int,
    trial_id: str = "trial",
    config: dict | None = None,
    epochs: int | None = None,
) -> TrialTrace:
    """Train to max_epoch (or ``epochs``) and collect the full trace in memory."""
    X, y = generate_dataset(dataset)
    data = split_holdout(X, y, dataset.seed)
    rng = np.random.default_rng(train_seed)
    model = init_model(spec, data.n_features, data.n_classes, rng)
    n_epochs = spec.max_epoch if epochs is None else min(epochs, spec.max_epoch)
    meta = TraceMeta(
        trial_id=trial_id,
        config=config if config is not None else {},
        max_epoch=spec.max_epoch,
        created_unix_ms=0,
    )
    trace = TrialTrace(meta=meta)
    wall = 0
    for e in range(n_epochs):
        model, rec, layers = train_epoch(model, data, spec, rng, trial_id, e)
        wall += epoch_cost_ms(spec, len(data.y_train), data.n_features, data.n_classes)
        rec = replace(rec, wall_ms=wall)
        trace.epochs.append(rec)
        trace.layers.extend(layers)
    trace.final = TraceFinal(
        status="completed",
        reason="",
        best_val_metric=trace.best_val_metric(),
        epochs_run=n_epochs,
    )
    return trace.canonical()


# ---------------------------------------------------------------------------
# scheduler integration


def epoch_cost_ms(spec: MlpSpec, n_train: int, n_features: int, n_classes: int) -> int:
    """Deterministic simulated cost of one epoch, roughly proportional to flops."""
    per_sample = n_features * spec.width + (spec.depth - 1) * spec.width**2 + spec.width * n_classes
    return max(1, round(3 * n_train * per_sample / 5e6))


DEFAULT_DATASET = SyntheticDataset(n_samples=600, n_features=12, n_classes=4, generator="gaussian_blobs", seed=20240801)

_SPACE_RESOURCE = "spaces/toy_mlp.json"


def builtin_space() -> SearchSpace:
    from importlib.resources import files

    text = files("btt").joinpath(_SPACE_RESOURCE).read_text(encoding="utf-8")
    import json

    return SearchSpace.from_dict(json.loads(text))


class _ToyProgram:
    def __init__(self, runner: "ToyMlpRunner", trial_id: str, spec: MlpSpec, seed: int):
        self._runner = runner
        self._trial_id = trial_id
        self._spec = spec
        self._seed = seed
        self.max_epoch = spec.max_epoch

    def epochs(self) -> Iterator[EpochPayload]:
        data = self._runner.data
        spec = self._spec
        rng = np.random.default_rng(self._seed)
        model = init_model(spec, data.n_features, data.n_classes, rng)
        cost = epoch_cost_ms(spec, len(data.y_train), data.n_features, data.n_classes)
        for e in range(spec.max_epoch):
            model, rec, layers = train_epoch(model, data, spec, rng, self._trial_id, e)
            yield EpochPayload(
                train_loss=rec.train_loss,
                val_metric=rec.val_metric,
                cost_ms=cost,
                layers=tuple(layers),
            )


class ToyMlpRunner:
    """Built-in trial runner training MLPs on a fixed synthetic task."""

    name = "toy_mlp"
    metric_mode = "maximize"

    def __init__(self, dataset: SyntheticDataset = DEFAULT_DATASET):
        self.dataset = dataset
        X, y = generate_dataset(dataset)
        self.data = split_holdout(X, y, dataset.seed)

    def space(self) -> SearchSpace:
        return builtin_space()

    def start(self, trial_id: str, config: HpConfig, seed: int) -> _ToyProgram:
        spec = MlpSpec.from_config(config)
        return _ToyProgram(self, trial_id, spec, seed)


from .runner import register_runner

register_runner(ToyMlpRunner.name, ToyMlpRunner)
