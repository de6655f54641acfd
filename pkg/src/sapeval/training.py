"""Small multi-label classifier and the training schemata compared in the
long-tail study.

The model is a two-layer feature extractor (tanh between the layers)
feeding a per-category logistic head. Gradients are written out by hand so
they can be validated against finite differences. The training variants:

* ``baseline_plain``       single stage, original distribution
* ``naive_balanced``       single stage on the oversampled multiset
* ``focal``                single stage with the focusing loss
* ``two_stage``            extractor on head categories, then a frozen-
                           extractor head retrained on the balanced set
* ``stage1_all``           stage one on all categories instead of the head
* ``stage2_finetune_all``  stage two updates the extractor as well
* ``stage2_unbalanced``    stage two on the original distribution
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .datasets import FeatureDataset, HeadTailSplit, oversample_balance
from .errors import CategoryMismatch, DimMismatch, EmptyHead, NonFiniteLoss
from .metrics import average_precision, mean_ap, CategoryScore
from .pools import pools_from_scores
from .sampling import SapConfig, SapResult, mix_seed, msap, sampled_ap

#: Probabilities are kept this far from {0, 1} before any logarithm.
PROB_EPS = 1e-7

ABLATION_VARIANTS = (
    "baseline_plain",
    "naive_balanced",
    "focal",
    "two_stage",
    "stage1_all",
    "stage2_finetune_all",
    "stage2_unbalanced",
)


@dataclass(frozen=True)
class StagePlan:
    """Learning-rate schedule and epoch budget for one training stage.

    ``step`` holds ``lr_start`` and drops to ``lr_end`` at 90% of the step
    budget; ``linear`` interpolates from ``lr_start`` to ``lr_end``.
    """

    lr_start: float
    lr_end: float
    schedule: str = "step"
    epochs: int = 1

    def __post_init__(self):
        if self.lr_start <= 0 or self.lr_end <= 0:
            raise ValueError("learning rates must be positive")
        if self.schedule not in ("step", "linear"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")

    def learning_rate(self, step: int, total_steps: int) -> float:
        if self.schedule == "linear":
            if total_steps <= 1:
                return self.lr_start
            t = step / (total_steps - 1)
            return self.lr_start + (self.lr_end - self.lr_start) * t
        return self.lr_start if step < 0.9 * total_steps else self.lr_end


@dataclass(frozen=True)
class TrainConfig:
    hidden_dim: int = 32
    embedding_dim: int = 16
    batch_size: int = 128
    seed: int = 0
    loss: str = "bce"  # "bce" | "focal"
    focal_gamma: float = 2.0
    stage1: StagePlan = StagePlan(0.05, 0.005, "step", 12)
    stage2: StagePlan = StagePlan(0.001, 0.0001, "linear", 1)
    stage2_freeze: bool = True
    stage2_balance: bool = True
    stage2_warm_start: bool = False

    def __post_init__(self):
        if self.loss not in ("bce", "focal"):
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.focal_gamma < 0:
            raise ValueError("focal_gamma must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")


@dataclass
class ModelParams:
    """Extractor weights (w1, b1, w2, b2) plus the linear head (head_w rows
    are per-category weight vectors)."""

    w1: np.ndarray  # (feature_dim, hidden_dim)
    b1: np.ndarray  # (hidden_dim,)
    w2: np.ndarray  # (hidden_dim, embedding_dim)
    b2: np.ndarray  # (embedding_dim,)
    head_w: np.ndarray  # (n_categories, embedding_dim)
    head_b: np.ndarray  # (n_categories,)

    @property
    def dims(self) -> dict[str, int]:
        return {
            "feature_dim": self.w1.shape[0],
            "hidden_dim": self.w1.shape[1],
            "embedding_dim": self.w2.shape[1],
            "n_categories": self.head_w.shape[0],
        }

    def copy(self) -> "ModelParams":
        return ModelParams(*(getattr(self, f.name).copy() for f in dataclasses.fields(self)))

    def backbone_arrays(self) -> tuple[np.ndarray, ...]:
        return self.w1, self.b1, self.w2, self.b2


@dataclass(frozen=True)
class LossValue:
    """A scalar loss together with its gradient for every parameter."""

    value: float
    grads: ModelParams


def init_params(
    feature_dim: int,
    hidden_dim: int,
    embedding_dim: int,
    n_categories: int,
    seed: int = 0,
) -> ModelParams:
    rng = np.random.default_rng(mix_seed(seed, 11))
    scale = lambda fan_in: 1.0 / np.sqrt(fan_in)
    return ModelParams(
        w1=rng.normal(0.0, scale(feature_dim), size=(feature_dim, hidden_dim)),
        b1=np.zeros(hidden_dim),
        w2=rng.normal(0.0, scale(hidden_dim), size=(hidden_dim, embedding_dim)),
        b2=np.zeros(embedding_dim),
        head_w=rng.normal(0.0, scale(embedding_dim), size=(n_categories, embedding_dim)),
        head_b=np.zeros(n_categories),
    )


def reinit_head(params: ModelParams, seed: int) -> ModelParams:
    rng = np.random.default_rng(mix_seed(seed, 13))
    fresh = params.copy()
    fresh.head_w = rng.normal(
        0.0, 1.0 / np.sqrt(params.w2.shape[1]), size=params.head_w.shape
    )
    fresh.head_b = np.zeros_like(params.head_b)
    return fresh


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def embed(params: ModelParams, features: np.ndarray) -> np.ndarray:
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if features.shape[1] != params.w1.shape[0]:
        raise DimMismatch(
            f"feature dim {features.shape[1]} != model input dim {params.w1.shape[0]}"
        )
    hidden = np.tanh(features @ params.w1 + params.b1)
    return hidden @ params.w2 + params.b2


def head_probabilities(params: ModelParams, embeddings: np.ndarray) -> np.ndarray:
    z = embeddings @ params.head_w.T + params.head_b
    return np.clip(_sigmoid(z), PROB_EPS, 1.0 - PROB_EPS)


def forward(params: ModelParams, features: np.ndarray) -> np.ndarray:
    """Per-category probabilities, shape (n_examples, n_categories)."""
    return head_probabilities(params, embed(params, features))


def bce_loss(
    probabilities: np.ndarray, targets: np.ndarray
) -> tuple[float, np.ndarray]:
    """Per-category binary cross-entropy, averaged over every entry.

    Returns the loss and its gradient with respect to the probabilities.
    """
    p = np.clip(np.asarray(probabilities, dtype=np.float64), PROB_EPS, 1.0 - PROB_EPS)
    y = np.asarray(targets, dtype=np.float64)
    loss = float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log1p(-p))))
    dloss = (p - y) / (p * (1.0 - p)) / p.size
    return loss, dloss


def focal_loss(
    probabilities: np.ndarray, targets: np.ndarray, gamma: float = 2.0
) -> tuple[float, np.ndarray]:
    """Focusing loss: cross-entropy scaled by (1 - p_t)^gamma, which
    down-weights well-classified entries. Reduces exactly to
    :func:`bce_loss` at gamma = 0."""
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    p = np.clip(np.asarray(probabilities, dtype=np.float64), PROB_EPS, 1.0 - PROB_EPS)
    y = np.asarray(targets, dtype=np.float64)
    p_t = np.where(y > 0.5, p, 1.0 - p)
    focus = (1.0 - p_t) ** gamma
    loss = float(np.mean(-focus * np.log(p_t)))
    dl_dpt = gamma * (1.0 - p_t) ** (gamma - 1.0) * np.log(p_t) - focus / p_t
    dloss = np.where(y > 0.5, dl_dpt, -dl_dpt) / p.size
    return loss, dloss


def model_loss(
    params: ModelParams,
    features: np.ndarray,
    targets: np.ndarray,
    loss: str = "bce",
    gamma: float = 2.0,
    category_mask: Sequence[int] | None = None,
) -> LossValue:
    """Loss over a batch plus analytic gradients for all parameters.

    With a category mask, the loss averages over the masked categories only
    and every other category receives an exactly zero gradient.
    """
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    hidden = np.tanh(features @ params.w1 + params.b1)
    embeddings = hidden @ params.w2 + params.b2
    probs = head_probabilities(params, embeddings)
    y = np.atleast_2d(np.asarray(targets, dtype=np.float64))

    cols = np.arange(probs.shape[1]) if category_mask is None else np.asarray(
        sorted(category_mask), dtype=np.intp
    )
    p_used, y_used = probs[:, cols], y[:, cols]
    if loss == "bce":
        value, dloss_used = bce_loss(p_used, y_used)
    elif loss == "focal":
        value, dloss_used = focal_loss(p_used, y_used, gamma)
    else:
        raise ValueError(f"unknown loss {loss!r}")

    dz = np.zeros_like(probs)
    dz[:, cols] = dloss_used * p_used * (1.0 - p_used)

    g_head_w = dz.T @ embeddings
    g_head_b = dz.sum(axis=0)
    d_emb = dz @ params.head_w
    g_w2 = hidden.T @ d_emb
    g_b2 = d_emb.sum(axis=0)
    d_hidden = (d_emb @ params.w2.T) * (1.0 - hidden**2)
    g_w1 = features.T @ d_hidden
    g_b1 = d_hidden.sum(axis=0)
    return LossValue(
        value, ModelParams(g_w1, g_b1, g_w2, g_b2, g_head_w, g_head_b)
    )


def labels_to_multihot(
    label_sets: Sequence[Iterable[int]], n_categories: int
) -> np.ndarray:
    y = np.zeros((len(label_sets), n_categories), dtype=np.float64)
    for i, labels in enumerate(label_sets):
        for c in labels:
            y[i, c] = 1.0
    return y


def sgd_train(
    params: ModelParams,
    features: np.ndarray,
    targets: np.ndarray,
    plan: StagePlan,
    batch_size: int = 128,
    seed: int = 0,
    category_mask: Sequence[int] | None = None,
    head_only: bool = False,
    loss: str = "bce",
    gamma: float = 2.0,
    history: list | None = None,
) -> ModelParams:
    """Mini-batch SGD over seeded shuffles; pure function of its inputs.

    ``head_only`` freezes the extractor: embeddings are computed once and
    only the linear head is updated.
    """
    features = np.asarray(features, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if len(features) == 0:
        raise ValueError("training set is empty")
    params = params.copy()
    cached = embed(params, features) if head_only else None

    n = len(features)
    batches = -(-n // batch_size)
    total_steps = plan.epochs * batches
    step = 0
    for epoch in range(plan.epochs):
        order = np.random.default_rng(mix_seed(seed, 101 + epoch)).permutation(n)
        epoch_loss = 0.0
        for b in range(batches):
            rows = order[b * batch_size : (b + 1) * batch_size]
            lr = plan.learning_rate(step, total_steps)
            if head_only:
                e_batch = cached[rows]
                probs = head_probabilities(params, e_batch)
                y_batch = targets[rows]
                cols = (
                    np.arange(probs.shape[1])
                    if category_mask is None
                    else np.asarray(sorted(category_mask), dtype=np.intp)
                )
                if loss == "bce":
                    value, dloss = bce_loss(probs[:, cols], y_batch[:, cols])
                else:
                    value, dloss = focal_loss(probs[:, cols], y_batch[:, cols], gamma)
                if not np.isfinite(value):
                    raise NonFiniteLoss(
                        f"non-finite loss at epoch {epoch}, step {step}, lr {lr}"
                    )
                dz = np.zeros_like(probs)
                dz[:, cols] = dloss * probs[:, cols] * (1.0 - probs[:, cols])
                params.head_w -= lr * (dz.T @ e_batch)
                params.head_b -= lr * dz.sum(axis=0)
            else:
                result = model_loss(
                    params, features[rows], targets[rows], loss, gamma, category_mask
                )
                value = result.value
                if not np.isfinite(value):
                    raise NonFiniteLoss(
                        f"non-finite loss at epoch {epoch}, step {step}, lr {lr}"
                    )
                g = result.grads
                params.w1 -= lr * g.w1
                params.b1 -= lr * g.b1
                params.w2 -= lr * g.w2
                params.b2 -= lr * g.b2
                params.head_w -= lr * g.head_w
                params.head_b -= lr * g.head_b
            epoch_loss += value
            step += 1
        if history is not None:
            history.append(
                {
                    "epoch": epoch,
                    "loss": epoch_loss / batches,
                    "lr": plan.learning_rate(step - 1, total_steps),
                }
            )
    return params


def _dataset_arrays(dataset: FeatureDataset) -> tuple[np.ndarray, np.ndarray]:
    x = dataset.feature_matrix()
    y = labels_to_multihot([e.labels for e in dataset.examples], dataset.n_categories)
    return x, y


def two_stage_train(
    dataset: FeatureDataset,
    split: HeadTailSplit,
    config: TrainConfig = TrainConfig(),
    stage1_head_only: bool = True,
    history: list | None = None,
) -> ModelParams:
    """Head-to-tail transfer: fit extractor and head on head-category
    examples, then freeze the extractor and retrain a fresh head on the
    balanced full dataset.

    ``config.stage2_freeze`` / ``stage2_balance`` / ``stage2_warm_start``
    select the ablation behaviors.
    """
    if split.categories != frozenset(range(dataset.n_categories)):
        raise CategoryMismatch(
            "head/tail split does not cover the dataset's categories"
        )
    x, y = _dataset_arrays(dataset)

    if stage1_head_only:
        if not split.head:
            raise EmptyHead("split has no head categories")
        head = sorted(split.head)
        keep = [
            i for i, e in enumerate(dataset.examples) if e.label_set & split.head
        ]
        if not keep:
            raise EmptyHead("no training examples carry a head category")
        x1, y1, mask1 = x[keep], y[keep], head
    else:
        x1, y1, mask1 = x, y, None

    params = init_params(
        x.shape[1],
        config.hidden_dim,
        config.embedding_dim,
        dataset.n_categories,
        seed=config.seed,
    )
    stage1_history = [] if history is not None else None
    params = sgd_train(
        params,
        x1,
        y1,
        config.stage1,
        batch_size=config.batch_size,
        seed=mix_seed(config.seed, 1),
        category_mask=mask1,
        loss=config.loss,
        gamma=config.focal_gamma,
        history=stage1_history,
    )

    if config.stage2_balance:
        rows = oversample_balance(dataset, seed=mix_seed(config.seed, 2))
        x2, y2 = x[rows], y[rows]
    else:
        x2, y2 = x, y
    if not config.stage2_warm_start:
        params = reinit_head(params, seed=config.seed)
    stage2_history = [] if history is not None else None
    params = sgd_train(
        params,
        x2,
        y2,
        config.stage2,
        batch_size=config.batch_size,
        seed=mix_seed(config.seed, 3),
        head_only=config.stage2_freeze,
        loss=config.loss,
        gamma=config.focal_gamma,
        history=stage2_history,
    )
    if history is not None:
        history.extend({"stage": 1, **h} for h in stage1_history)
        history.extend({"stage": 2, **h} for h in stage2_history)
    return params


def run_ablation(
    dataset: FeatureDataset,
    split: HeadTailSplit | None,
    variant: str,
    config: TrainConfig = TrainConfig(),
    history: list | None = None,
) -> ModelParams:
    """Train one of the compared schemata; all variants share the config and
    seed so their results are directly comparable."""
    if variant not in ABLATION_VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {ABLATION_VARIANTS}")

    if variant in ("baseline_plain", "naive_balanced", "focal"):
        x, y = _dataset_arrays(dataset)
        if variant == "naive_balanced":
            rows = oversample_balance(dataset, seed=mix_seed(config.seed, 2))
            x, y = x[rows], y[rows]
        loss = "focal" if variant == "focal" else config.loss
        params = init_params(
            x.shape[1],
            config.hidden_dim,
            config.embedding_dim,
            dataset.n_categories,
            seed=config.seed,
        )
        stage_history = [] if history is not None else None
        params = sgd_train(
            params,
            x,
            y,
            config.stage1,
            batch_size=config.batch_size,
            seed=mix_seed(config.seed, 1),
            loss=loss,
            gamma=config.focal_gamma,
            history=stage_history,
        )
        if history is not None:
            history.extend({"stage": 1, **h} for h in stage_history)
        return params

    if split is None:
        raise EmptyHead(f"variant {variant!r} needs a head/tail split")
    if variant == "two_stage":
        return two_stage_train(dataset, split, config, history=history)
    if variant == "stage1_all":
        return two_stage_train(
            dataset, split, config, stage1_head_only=False, history=history
        )
    if variant == "stage2_finetune_all":
        cfg = dataclasses.replace(config, stage2_freeze=False)
        return two_stage_train(dataset, split, cfg, history=history)
    # stage2_unbalanced
    cfg = dataclasses.replace(config, stage2_balance=False)
    return two_stage_train(dataset, split, cfg, history=history)


@dataclass(frozen=True)
class CategoryEvaluation:
    category: int
    n_pos: int
    n_neg: int
    ap: float | None
    sap: SapResult | None

    def to_dict(self, store_trials: bool = False) -> dict:
        record: dict = {
            "category": self.category,
            "n_pos": self.n_pos,
            "n_neg": self.n_neg,
            "ap": self.ap,
            "sap_mean": self.sap.mean if self.sap else None,
            "sap_std": self.sap.std if self.sap else None,
            "degenerate": self.sap.degenerate if self.sap else None,
        }
        if store_trials and self.sap:
            record["trial_aps"] = list(self.sap.trial_aps)
        return record


@dataclass(frozen=True)
class EvalReport:
    categories: tuple[CategoryEvaluation, ...]
    aggregates: dict[str, dict]

    def to_dict(self) -> dict:
        return {
            "categories": [c.to_dict() for c in self.categories],
            "aggregates": self.aggregates,
        }

    def ap_by_category(self) -> dict[int, float]:
        return {c.category: c.ap for c in self.categories if c.ap is not None}


def _group_aggregate(
    evals: Sequence[CategoryEvaluation], min_examples: int
) -> dict:
    sap_results = [e.sap for e in evals if e.sap is not None]
    ap_scores = [
        CategoryScore(e.category, e.ap, e.n_pos, e.n_neg)
        for e in evals
        if e.ap is not None
    ]
    eligible = [r for r in sap_results if r.n_pos >= min_examples]
    return {
        "msap": msap(sap_results, min_examples) if eligible else None,
        "map": mean_ap(ap_scores, min_examples) if eligible else None,
        "categories": len(evals),
        "eligible": len(eligible),
    }


def evaluate_model(
    params: ModelParams,
    dataset: FeatureDataset,
    sap_config: SapConfig = SapConfig(),
    split: HeadTailSplit | None = None,
    min_examples: int = 1,
    batch_size: int = 4096,
) -> EvalReport:
    """Score a dataset and report AP and sampled AP per category, with
    unweighted aggregates over all categories and, when a split is given,
    over head and tail separately.

    Categories without positives in the split are listed but carry null
    metrics.
    """
    if params.head_w.shape[0] < dataset.n_categories:
        raise DimMismatch(
            f"model scores {params.head_w.shape[0]} categories, "
            f"dataset has {dataset.n_categories}"
        )
    x = dataset.feature_matrix()
    scores = np.vstack(
        [forward(params, x[i : i + batch_size]) for i in range(0, len(x), batch_size)]
    )
    pools = pools_from_scores(scores, dataset.label_sets())
    evals = []
    for c in range(dataset.n_categories):
        pool = pools[c]
        if pool.n_pos == 0:
            evals.append(CategoryEvaluation(c, 0, pool.n_neg, None, None))
            continue
        trial_config = SapConfig(
            n_trials=sap_config.n_trials,
            seed=mix_seed(sap_config.seed, 1000 + c),
            include_background=sap_config.include_background,
        )
        evals.append(
            CategoryEvaluation(
                c,
                pool.n_pos,
                pool.n_neg,
                average_precision(pool),
                sampled_ap(pool, trial_config),
            )
        )

    aggregates = {"all": _group_aggregate(evals, min_examples)}
    if split is not None:
        aggregates["head"] = _group_aggregate(
            [e for e in evals if e.category in split.head], min_examples
        )
        aggregates["tail"] = _group_aggregate(
            [e for e in evals if e.category in split.tail], min_examples
        )
    return EvalReport(tuple(evals), aggregates)


def config_hash(config: TrainConfig) -> str:
    canonical = json.dumps(dataclasses.asdict(config), sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def save_checkpoint(path: str | Path, params: ModelParams, training: dict) -> None:
    payload = {
        "format_version": 1,
        "dims": params.dims,
        "weights": {
            f.name: getattr(params, f.name).tolist()
            for f in dataclasses.fields(params)
        },
        "training": training,
    }
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True), encoding="utf-8")


def load_checkpoint(path: str | Path) -> tuple[ModelParams, dict]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    weights = payload["weights"]
    params = ModelParams(
        **{name: np.asarray(weights[name], dtype=np.float64) for name in weights}
    )
    return params, payload.get("training", {})
