"""Inter-image saliency: a small batch-normalized MLP over segment descriptors.

The network is ``affine -> BN -> ReLU -> affine -> BN -> ReLU -> affine -> softmax(2)``.
Training minimizes a per-sample weighted cross-entropy where the weight grows with
the disagreement between intra-image saliency and the ground-truth co-saliency.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import imagio
from .errors import DimMismatch, FormatError, InvalidData
from .graph import RankingSolver, intra_graph, propagate

BN_EPS = 1e-5
MODEL_FORMAT = "cosaliency-ieis-mlp"
MODEL_VERSION = 1

# parameter order used for serialization and gradient dictionaries
PARAM_NAMES = ("W1", "b1", "g1", "beta1", "W2", "b2", "g2", "beta2", "W3", "b3")
STAT_NAMES = ("mean1", "var1", "mean2", "var2")


@dataclass(eq=False)
class MlpModel:
    params: dict
    stats: dict

    @classmethod
    def init(cls, input_dim: int, hidden=(256, 64), seed: int = 0) -> "MlpModel":
        rng = np.random.default_rng(seed)
        h1, h2 = hidden
        p = {
            "W1": rng.normal(0, math.sqrt(2.0 / input_dim), (input_dim, h1)),
            "b1": np.zeros(h1), "g1": np.ones(h1), "beta1": np.zeros(h1),
            "W2": rng.normal(0, math.sqrt(2.0 / h1), (h1, h2)),
            "b2": np.zeros(h2), "g2": np.ones(h2), "beta2": np.zeros(h2),
            "W3": rng.normal(0, math.sqrt(1.0 / h2), (h2, 2)),
            "b3": np.zeros(2),
        }
        s = {"mean1": np.zeros(h1), "var1": np.ones(h1), "mean2": np.zeros(h2), "var2": np.ones(h2)}
        return cls(p, s)

    @property
    def input_dim(self) -> int:
        return self.params["W1"].shape[0]

    @property
    def hidden(self) -> tuple:
        return self.params["W1"].shape[1], self.params["W2"].shape[1]

    def logits(self, x: np.ndarray) -> np.ndarray:
        """Inference-mode forward pass using the stored batch-norm statistics."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.input_dim:
            raise DimMismatch(f"descriptor dim {x.shape[1]} != model input dim {self.input_dim}")
        p, s = self.params, self.stats
        h = x
        for k in (1, 2):
            a = h @ p[f"W{k}"] + p[f"b{k}"]
            z = p[f"g{k}"] * (a - s[f"mean{k}"]) / np.sqrt(s[f"var{k}"] + BN_EPS) + p[f"beta{k}"]
            h = np.maximum(z, 0.0)
        return h @ p["W3"] + p["b3"]


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(z: np.ndarray) -> np.ndarray:
    m = z.max(axis=-1, keepdims=True)
    return z - m - np.log(np.exp(z - m).sum(axis=-1, keepdims=True))


def score_segments(model: MlpModel, descriptors: np.ndarray) -> np.ndarray:
    """Probability of the co-salient class per segment."""
    return softmax(model.logits(descriptors))[:, 1]


def sample_weights(labels, iris, gt, rho: float = 0.7, gamma: float = 3.0) -> np.ndarray:
    labels = np.asarray(labels)
    base = np.where(labels == 1, rho, 1.0 - rho)
    return base * gamma ** np.abs(np.asarray(iris, dtype=np.float64) - np.asarray(gt, dtype=np.float64))


def weighted_loss(logits: np.ndarray, labels, weights) -> tuple[float, np.ndarray]:
    """Weighted cross-entropy and its gradient with respect to the logits."""
    logits = np.atleast_2d(logits)
    labels = np.asarray(labels, dtype=np.int64)
    weights = np.asarray(weights, dtype=np.float64)
    n = logits.shape[0]
    lsm = log_softmax(logits)
    loss = -float(np.sum(weights * lsm[np.arange(n), labels])) / n
    grad = np.exp(lsm)
    grad[np.arange(n), labels] -= 1.0
    grad *= (weights / n)[:, None]
    return loss, grad


def forward_backward(model: MlpModel, x: np.ndarray, labels, weights):
    """Training-mode pass (batch statistics). Returns loss, gradients and batch moments."""
    p = model.params
    cache = []
    h = x
    moments = {}
    for k in (1, 2):
        a = h @ p[f"W{k}"] + p[f"b{k}"]
        mu = a.mean(0)
        var = a.var(0)
        inv = 1.0 / np.sqrt(var + BN_EPS)
        xhat = (a - mu) * inv
        z = p[f"g{k}"] * xhat + p[f"beta{k}"]
        cache.append((h, xhat, inv, z))
        moments[k] = (mu, var)
        h = np.maximum(z, 0.0)
    logits = h @ p["W3"] + p["b3"]
    loss, dz = weighted_loss(logits, labels, weights)

    g = {"W3": h.T @ dz, "b3": dz.sum(0)}
    dh = dz @ p["W3"].T
    for k in (2, 1):
        h_in, xhat, inv, z = cache[k - 1]
        dz_k = dh * (z > 0)
        g[f"g{k}"] = (dz_k * xhat).sum(0)
        g[f"beta{k}"] = dz_k.sum(0)
        dxhat = dz_k * p[f"g{k}"]
        n = dxhat.shape[0]
        da = inv / n * (n * dxhat - dxhat.sum(0) - xhat * (dxhat * xhat).sum(0))
        g[f"W{k}"] = h_in.T @ da
        g[f"b{k}"] = da.sum(0)
        dh = da @ p[f"W{k}"].T
    return loss, g, moments


def batch_loss(model: MlpModel, x, labels, weights) -> float:
    return forward_backward(model, x, labels, weights)[0]


@dataclass
class TrainConfig:
    rho: float = 0.7
    gamma: float = 3.0
    lr: float = 0.001
    momentum: float = 0.9
    weight_decay: float = 0.0005
    epochs: int = 100
    batch_size: int = 32
    hidden: tuple = (256, 64)
    bn_momentum: float = 0.9
    seed: int = 0


@dataclass
class TrainResult:
    model: MlpModel
    loss_trace: list = field(default_factory=list)


def train(x, labels, iris, gt, config: TrainConfig | None = None) -> TrainResult:
    """Minibatch SGD with momentum and weight decay on the weighted loss."""
    cfg = config or TrainConfig()
    x = np.asarray(x, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if x.shape[0] < 2 or len(np.unique(labels)) < 2:
        raise InvalidData("training needs at least two samples covering both labels")
    weights = sample_weights(labels, iris, gt, cfg.rho, cfg.gamma)
    rng = np.random.default_rng(cfg.seed)
    model = MlpModel.init(x.shape[1], cfg.hidden, seed=cfg.seed)
    velocity = {k: np.zeros_like(v) for k, v in model.params.items()}
    n = x.shape[0]
    trace = []
    for _ in range(cfg.epochs):
        # equal-sized batches, so no tiny remainder batch skews the BN statistics
        batches = np.array_split(rng.permutation(n), math.ceil(n / cfg.batch_size))
        for b in batches:
            _, grads, moments = forward_backward(model, x[b], labels[b], weights[b])
            for k, g in grads.items():
                velocity[k] = cfg.momentum * velocity[k] - cfg.lr * (g + cfg.weight_decay * model.params[k])
                model.params[k] += velocity[k]
            for k, (mu, var) in moments.items():
                unbiased = var * len(b) / max(len(b) - 1, 1)
                model.stats[f"mean{k}"] = cfg.bn_momentum * model.stats[f"mean{k}"] + (1 - cfg.bn_momentum) * mu
                model.stats[f"var{k}"] = cfg.bn_momentum * model.stats[f"var{k}"] + (1 - cfg.bn_momentum) * unbiased
        # the trace is the objective over the whole training set at the end of each epoch
        trace.append(batch_loss(model, x, labels, weights))
    return TrainResult(model, trace)


def save_model(model: MlpModel, path, extra: dict | None = None) -> Path:
    """Parameters and BN statistics as one CSGT vector plus a JSON sidecar of shapes."""
    path = Path(path)
    names = PARAM_NAMES + STAT_NAMES
    arrays = [model.params[k] if k in model.params else model.stats[k] for k in names]
    flat = np.concatenate([a.ravel() for a in arrays]).astype(np.float32)
    imagio.save_tensor(flat.reshape(-1, 1, 1), path)
    header = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "bn_eps": BN_EPS,
        "layers": [{"name": k, "shape": list(a.shape)} for k, a in zip(names, arrays)],
    }
    if extra:
        header.update(extra)
    sidecar = path.with_suffix(path.suffix + ".json")
    sidecar.write_text(json.dumps(header, indent=2, sort_keys=True))
    return sidecar


def load_model(path) -> MlpModel:
    path = Path(path)
    sidecar = path.with_suffix(path.suffix + ".json")
    try:
        header = json.loads(sidecar.read_text())
    except (OSError, ValueError) as exc:
        raise FormatError(f"missing or unreadable model header {sidecar}: {exc}") from exc
    if header.get("format") != MODEL_FORMAT or header.get("version") != MODEL_VERSION:
        raise FormatError(f"{sidecar}: unsupported model format/version")
    flat = imagio.load_tensor(path).ravel().astype(np.float64)
    params, stats, pos = {}, {}, 0
    for layer in header["layers"]:
        size = int(np.prod(layer["shape"]))
        arr = flat[pos:pos + size].reshape(layer["shape"])
        pos += size
        (stats if layer["name"] in STAT_NAMES else params)[layer["name"]] = arr
    if pos != flat.size or set(params) != set(PARAM_NAMES):
        raise FormatError(f"{path}: parameter payload does not match header")
    return MlpModel(params, stats)


class HeuristicScorer:
    """Model-free stand-in for the trained network.

    Scores a segment by the cosine similarity of its own color histogram (and
    high-level features when present) to the group foreground pool, passed
    through a logistic. Not a learned model; used when no weights are supplied.
    """

    def __init__(self, layout, center: float = 0.5, gain: float = 10.0):
        self.layout = layout
        self.center = center
        self.gain = gain

    def _parts(self, x):
        lay = self.layout
        sl = lay.slices()
        seg = x[:, sl["seg"]]
        gfg = x[:, sl["gfg"]]
        hd = lay.high_dim
        hist_seg = seg[:, hd + 5:hd + 5 + 256]
        hist_gfg = gfg[:, hd + 7:hd + 7 + 256]
        parts = [(hist_seg, hist_gfg)]
        if hd:
            parts.append((seg[:, :hd], gfg[:, :hd]))
        return parts

    def similarity(self, x: np.ndarray) -> np.ndarray:
        sims = []
        for a, b in self._parts(np.atleast_2d(x)):
            na = np.linalg.norm(a, axis=1)
            nb = np.linalg.norm(b, axis=1)
            den = na * nb
            sims.append(np.where(den > 0, (a * b).sum(1) / np.where(den > 0, den, 1.0), 0.0))
        return np.mean(sims, axis=0)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-self.gain * (self.similarity(x) - self.center)))


def top_fraction(values: np.ndarray, fraction: float = 0.1) -> np.ndarray:
    """Indices of the top ``ceil(fraction * n)`` values, ties broken by ascending index."""
    values = np.asarray(values)
    k = int(math.ceil(fraction * values.size - 1e-9))
    order = np.lexsort((np.arange(values.size), -values))
    return np.sort(order[:k])


def refine_scores(solver: RankingSolver, raw: np.ndarray, background: np.ndarray,
                  alpha: float = 0.95, eta: float = 2.0) -> np.ndarray:
    """Smooth raw scores over a graph: confident top scores against background seeds."""
    raw = np.asarray(raw, dtype=np.float64)
    top = top_fraction(raw, 0.1)
    fg = top[raw[top] > 0.5]
    if fg.size == 0:
        return raw.copy()
    y_f = np.zeros(raw.size)
    y_f[fg] = 1.0
    y_b = np.asarray(background, dtype=np.float64)
    return propagate(solver, y_f, y_b, eta)


def refine_ieis(seg, raw: np.ndarray, alpha: float = 0.95, eta: float = 2.0,
                solver: RankingSolver | None = None) -> np.ndarray:
    solver = solver or RankingSolver(intra_graph(seg), alpha)
    return refine_scores(solver, raw, seg.boundary, alpha, eta)
