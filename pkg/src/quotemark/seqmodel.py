"""Sequential speaker prediction from the characters mentioned around a quote.

Each quotation becomes a short token sequence: the five most recent character
mentions before it, a separator, the first mention after it and, optionally,
the mentions inside it.  Characters are replaced by recency slots (slot 0 is
the character mentioned last before the quote), so the model only ever sees
patterns of mentions and never character identities.  A one-layer tanh RNN
reads the sequence and a softmax over slots (plus OTHER) picks the speaker.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .attrib import UNRESOLVED, Attribution
from .corpus import UNKNOWN, Quotation
from .errors import DivergenceDetected, EmptyDataset, QuotemarkError, ShapeMismatch
from .mentions import CandidateInventory

logger = logging.getLogger(__name__)

MODEL_FORMAT = "quotemark.seqrnn"
MODEL_VERSION = 1
PARAM_NAMES = ("E", "Wx", "Wh", "bh", "Wy", "by")


@dataclass(frozen=True)
class SeqConfig:
    max_slots: int = 10
    n_pre: int = 5
    n_post: int = 1
    n_internal: int = 4
    include_internal: bool = False
    dim_embed: int = 32
    dim_hidden: int = 64
    learning_rate: float = 0.05
    momentum: float = 0.9
    batch_size: int = 32
    epochs: int = 50
    patience: int = 5
    dev_fraction: float = 0.1
    clip_norm: float = 5.0
    init_scale: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_pre + self.n_post + (self.n_internal if self.include_internal else 0) > self.max_slots:
            raise ValueError("mention window larger than the slot budget")

    # special token ids follow the slot ids
    @property
    def PAD(self) -> int:
        return self.max_slots

    @property
    def SEP_PRE(self) -> int:
        return self.max_slots + 1

    @property
    def SEP_POST(self) -> int:
        return self.max_slots + 2

    @property
    def SEP_INT(self) -> int:
        return self.max_slots + 3

    @property
    def OTHER(self) -> int:
        return self.max_slots

    @property
    def vocab_size(self) -> int:
        return self.max_slots + 4

    @property
    def n_classes(self) -> int:
        return self.max_slots + 1

    @property
    def seq_len(self) -> int:
        n = self.n_pre + 1 + self.n_post
        if self.include_internal:
            n += 1 + self.n_internal
        return n

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "SeqConfig":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in obj.items() if k in known})


@dataclass(frozen=True)
class ContextEncoding:
    tokens: tuple[int, ...]
    slot_map: tuple[int, ...]  # slot id -> char_id
    label: int

    def char_for(self, slot: int) -> int | None:
        return self.slot_map[slot] if 0 <= slot < len(self.slot_map) else None


def encode_context(
    q: Quotation,
    inventory: CandidateInventory,
    include_internal: bool | None = None,
    config: SeqConfig | None = None,
) -> ContextEncoding:
    config = config or SeqConfig()
    if include_internal is not None and include_internal != config.include_internal:
        config = replace(config, include_internal=include_internal)
    mentions = inventory.mentions

    pre_end = inventory.index_before(q.start)
    pre = [m.char_id for m in mentions[max(0, pre_end - config.n_pre):pre_end]]

    post: list[int] = []
    i = inventory.index_from(q.sub_spans[0][1])
    while i < len(mentions) and len(post) < config.n_post:
        if not q.covers(mentions[i].start, mentions[i].end):
            post.append(mentions[i].char_id)
        i += 1

    internal: list[int] = []
    if config.include_internal:
        for m in inventory.within(q.start, q.end):
            if q.covers(m.start, m.end):
                internal.append(m.char_id)
                if len(internal) == config.n_internal:
                    break

    slots: dict[int, int] = {}
    for cid in reversed(pre):
        slots.setdefault(cid, len(slots))
    for cid in internal + post:
        slots.setdefault(cid, len(slots))

    pad = config.PAD
    tokens = [pad] * (config.n_pre - len(pre)) + [slots[c] for c in pre]
    if config.include_internal:
        tokens += [config.SEP_INT] + [slots[c] for c in internal] + [pad] * (config.n_internal - len(internal))
    tokens += [config.SEP_POST] + [slots[c] for c in post] + [pad] * (config.n_post - len(post))

    slot_map = tuple(cid for cid, _ in sorted(slots.items(), key=lambda kv: kv[1]))
    label = slots.get(q.speaker_id, config.OTHER) if q.speaker_id != UNKNOWN else config.OTHER
    return ContextEncoding(tuple(tokens), slot_map, label)


# --------------------------------------------------------------------------
# parameters and maths

@dataclass
class SeqModelParams:
    config: SeqConfig
    E: np.ndarray
    Wx: np.ndarray
    Wh: np.ndarray
    bh: np.ndarray
    Wy: np.ndarray
    by: np.ndarray

    def __post_init__(self) -> None:
        c = self.config
        want = {
            "E": (c.vocab_size, c.dim_embed),
            "Wx": (c.dim_embed, c.dim_hidden),
            "Wh": (c.dim_hidden, c.dim_hidden),
            "bh": (c.dim_hidden,),
            "Wy": (c.dim_hidden, c.n_classes),
            "by": (c.n_classes,),
        }
        for name, shape in want.items():
            arr = getattr(self, name)
            if arr.shape != shape:
                raise ShapeMismatch(f"parameter {name} has shape {arr.shape}, config expects {shape}")

    def blocks(self) -> dict[str, np.ndarray]:
        return {n: getattr(self, n) for n in PARAM_NAMES}

    def copy(self) -> "SeqModelParams":
        return SeqModelParams(self.config, *(getattr(self, n).copy() for n in PARAM_NAMES))

    def freeze(self) -> "SeqModelParams":
        for n in PARAM_NAMES:
            getattr(self, n).setflags(write=False)
        return self

    def is_finite(self) -> bool:
        return all(np.isfinite(a).all() for a in self.blocks().values())

    @classmethod
    def init(cls, config: SeqConfig, rng: np.random.Generator | None = None) -> "SeqModelParams":
        rng = rng if rng is not None else np.random.default_rng(config.seed)
        s = config.init_scale
        u = lambda *shape: rng.uniform(-s, s, size=shape)
        return cls(
            config,
            u(config.vocab_size, config.dim_embed),
            u(config.dim_embed, config.dim_hidden),
            u(config.dim_hidden, config.dim_hidden),
            u(config.dim_hidden),
            u(config.dim_hidden, config.n_classes),
            u(config.n_classes),
        )


def forward(params: SeqModelParams, X: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Class probabilities for token matrix ``X`` (N x T), plus hidden states h_0..h_T."""
    N, T = X.shape
    emb = params.E[X]
    h = np.zeros((N, params.config.dim_hidden))
    hs = [h]
    for t in range(T):
        h = np.tanh(emb[:, t] @ params.Wx + h @ params.Wh + params.bh)
        hs.append(h)
    logits = h @ params.Wy + params.by
    logits -= logits.max(axis=1, keepdims=True)
    p = np.exp(logits)
    p /= p.sum(axis=1, keepdims=True)
    return p, hs


def _loss(p: np.ndarray, y: np.ndarray) -> float:
    return float(-np.mean(np.log(np.maximum(p[np.arange(len(y)), y], 1e-300))))


def loss_and_grads(params: SeqModelParams, X: np.ndarray, y: np.ndarray) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy and its gradient for every parameter block (BPTT)."""
    N, T = X.shape
    p, hs = forward(params, X)
    loss = _loss(p, y)
    dlogits = p.copy()
    dlogits[np.arange(N), y] -= 1.0
    dlogits /= N
    g = {n: np.zeros_like(a) for n, a in params.blocks().items()}
    g["Wy"] = hs[-1].T @ dlogits
    g["by"] = dlogits.sum(axis=0)
    dh = dlogits @ params.Wy.T
    emb = params.E[X]
    for t in range(T - 1, -1, -1):
        da = dh * (1.0 - hs[t + 1] ** 2)
        g["Wx"] += emb[:, t].T @ da
        g["Wh"] += hs[t].T @ da
        g["bh"] += da.sum(axis=0)
        np.add.at(g["E"], X[:, t], da @ params.Wx.T)
        dh = da @ params.Wh.T
    return loss, g


def as_arrays(dataset: Sequence[ContextEncoding], config: SeqConfig) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray([e.tokens for e in dataset], dtype=np.int64).reshape(len(dataset), -1)
    y = np.asarray([e.label for e in dataset], dtype=np.int64)
    if X.shape[1] != config.seq_len:
        raise ShapeMismatch(f"encodings have length {X.shape[1]}, model expects {config.seq_len}")
    if X.size and (X.min() < 0 or X.max() >= config.vocab_size):
        raise ShapeMismatch("token id outside the model vocabulary")
    if y.size and (y.min() < 0 or y.max() >= config.n_classes):
        raise ShapeMismatch("label outside the model classes")
    return X, y


# --------------------------------------------------------------------------
# training

@dataclass
class TrainResult:
    params: SeqModelParams
    trace: list[tuple[int, float, float | None]] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.trace[-1][1]

    def trace_csv(self) -> str:
        lines = ["epoch,train_loss,dev_loss"]
        for epoch, tr, dv in self.trace:
            lines.append(f"{epoch},{tr!r},{'' if dv is None else repr(dv)}")
        return "\n".join(lines) + "\n"


def train_model(
    dataset: Sequence[ContextEncoding],
    config: SeqConfig | None = None,
    dev: Sequence[ContextEncoding] | None = None,
) -> TrainResult:
    """Mini-batch gradient descent (with momentum) on mean cross-entropy.

    Without an explicit ``dev`` set, ``config.dev_fraction`` of the data is
    held out for early stopping when there are at least 20 examples.  The
    returned parameters are those with the best dev loss (or the last epoch
    when there is no dev set).
    """
    config = config or SeqConfig()
    if not dataset:
        raise EmptyDataset("cannot train on an empty dataset")
    rng = np.random.default_rng(config.seed)
    params = SeqModelParams.init(config, rng)
    X, y = as_arrays(dataset, config)
    if dev is None and config.dev_fraction > 0 and len(dataset) >= 20:
        order = rng.permutation(len(dataset))
        n_dev = max(1, int(round(config.dev_fraction * len(dataset))))
        Xd, yd = X[order[:n_dev]], y[order[:n_dev]]
        X, y = X[order[n_dev:]], y[order[n_dev:]]
    elif dev:
        Xd, yd = as_arrays(dev, config)
    else:
        Xd = yd = None

    velocity = {n: np.zeros_like(a) for n, a in params.blocks().items()}
    trace: list[tuple[int, float, float | None]] = []
    best = (np.inf, params.copy())
    stale = 0
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(X))
        for b in range(0, len(X), config.batch_size):
            idx = order[b:b + config.batch_size]
            loss, grads = loss_and_grads(params, X[idx], y[idx])
            if not np.isfinite(loss):
                raise DivergenceDetected(
                    f"non-finite loss at epoch {epoch}",
                    {"epoch": epoch, "batch": b // config.batch_size, "grad_norms": {k: float(np.linalg.norm(v)) for k, v in grads.items()}},
                )
            norm = np.sqrt(sum(float((v * v).sum()) for v in grads.values()))
            scale = config.clip_norm / norm if config.clip_norm and norm > config.clip_norm else 1.0
            for n, gr in grads.items():
                velocity[n] = config.momentum * velocity[n] - config.learning_rate * scale * gr
                getattr(params, n)[...] += velocity[n]
        train_loss = _loss(forward(params, X)[0], y)
        dev_loss = _loss(forward(params, Xd)[0], yd) if Xd is not None else None
        if not np.isfinite(train_loss) or not params.is_finite():
            raise DivergenceDetected(f"non-finite loss after epoch {epoch}", {"epoch": epoch, "train_loss": train_loss})
        trace.append((epoch, train_loss, dev_loss))
        logger.debug("epoch %d train %.4f dev %s", epoch, train_loss, dev_loss)
        if dev_loss is not None:
            if dev_loss < best[0] - 1e-12:
                best = (dev_loss, params.copy())
                stale = 0
            else:
                stale += 1
                if stale >= config.patience:
                    break
    final = best[1] if Xd is not None else params
    return TrainResult(final.freeze(), trace)


# --------------------------------------------------------------------------
# prediction

def predict_classes(params: SeqModelParams, encodings: Sequence[ContextEncoding]) -> list[int]:
    """Arg-max class per encoding, restricted to occupied slots and OTHER."""
    if not encodings:
        return []
    X, _ = as_arrays([replace(e, label=0) for e in encodings], params.config)
    p, _ = forward(params, X)
    out = []
    other = params.config.OTHER
    for row, enc in zip(p, encodings):
        allowed = list(range(len(enc.slot_map))) + [other]
        out.append(max(allowed, key=lambda k: (row[k], -k)))
    return out


def _to_attribution(q: Quotation, enc: ContextEncoding, cls: int, config: SeqConfig) -> Attribution:
    if cls == config.OTHER or not enc.slot_map:
        return Attribution(q.quote_id, UNRESOLVED, "seq_model")
    return Attribution(q.quote_id, enc.char_for(cls), "seq_model")


def predict_speaker(
    params: SeqModelParams,
    q: Quotation,
    inventory: CandidateInventory,
    include_internal: bool | None = None,
) -> Attribution:
    config = params.config
    if include_internal is not None and include_internal != config.include_internal:
        raise ShapeMismatch(f"model trained with include_internal={config.include_internal}")
    enc = encode_context(q, inventory, config=config)
    return _to_attribution(q, enc, predict_classes(params, [enc])[0], config)


def predict_batch(params: SeqModelParams, quotations: Sequence[Quotation], inventory: CandidateInventory) -> list[Attribution]:
    encs = [encode_context(q, inventory, config=params.config) for q in quotations]
    classes = predict_classes(params, encs)
    return [_to_attribution(q, e, c, params.config) for q, e, c in zip(quotations, encs, classes)]


# --------------------------------------------------------------------------
# gradient check

GradFn = Callable[[SeqModelParams, np.ndarray, np.ndarray], tuple[float, dict[str, np.ndarray]]]


def gradient_check(
    params: SeqModelParams,
    example: Sequence[ContextEncoding] | tuple[np.ndarray, np.ndarray],
    epsilon: float = 1e-5,
    grad_fn: GradFn = loss_and_grads,
) -> float:
    """Largest per-block relative error between ``grad_fn`` and central differences.

    The error of a block is ``|a - n| / (|a| + |n|)`` in the Frobenius norm;
    blocks whose gradients are both zero count as exact.
    """
    if not 1e-6 <= epsilon <= 1e-3:
        raise ValueError("epsilon must lie in [1e-6, 1e-3]")
    if isinstance(example, tuple) and len(example) == 2 and isinstance(example[0], np.ndarray):
        X, y = example
    else:
        X, y = as_arrays(list(example), params.config)
    work = params.copy()
    _, analytic = grad_fn(work, X, y)
    worst = 0.0
    for name, arr in work.blocks().items():
        numeric = np.zeros_like(arr)
        flat = arr.reshape(-1)
        nflat = numeric.reshape(-1)
        for k in range(flat.size):
            old = flat[k]
            flat[k] = old + epsilon
            up = _loss(forward(work, X)[0], y)
            flat[k] = old - epsilon
            down = _loss(forward(work, X)[0], y)
            flat[k] = old
            nflat[k] = (up - down) / (2 * epsilon)
        a = analytic[name]
        denom = np.linalg.norm(a) + np.linalg.norm(numeric)
        if denom == 0.0:
            continue
        worst = max(worst, float(np.linalg.norm(a - numeric) / denom))
    return worst


# --------------------------------------------------------------------------
# persistence

def save_model(params: SeqModelParams, path: str | Path) -> None:
    obj = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "config": params.config.to_json(),
        "params": {n: {"shape": list(a.shape), "data": a.reshape(-1).tolist()} for n, a in params.blocks().items()},
    }
    Path(path).write_text(json.dumps(obj) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> SeqModelParams:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    if obj.get("format") != MODEL_FORMAT:
        raise QuotemarkError(f"{path}: not a {MODEL_FORMAT} file")
    if obj.get("version") != MODEL_VERSION:
        raise QuotemarkError(f"{path}: unsupported model version {obj.get('version')}")
    config = SeqConfig.from_json(obj["config"])
    arrays = {}
    for n in PARAM_NAMES:
        block = obj["params"][n]
        data = np.asarray(block["data"], dtype=np.float64)
        if data.size != int(np.prod(block["shape"])):
            raise ShapeMismatch(f"{path}: block {n} has {data.size} values for shape {block['shape']}")
        arrays[n] = data.reshape(block["shape"])
    return SeqModelParams(config, **arrays).freeze()
