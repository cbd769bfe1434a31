"""Training: metric-learning objectives, optimizers, the loop, checkpoints.

Entity pairs (or triplets) are sampled from the train synsets each epoch,
their contexts retrieved and encoded in one batched pass, matched and scored,
and the siamese or triplet loss backpropagated through the whole stack.
Validation AUC on held-out synsets picks the parameters to keep.

Checkpoints are canonical JSON: sorted keys, parameters as base64-encoded
little-endian float64 blocks, so saving the same model twice gives the same
bytes.
"""

import base64
import copy
import json
import logging
from dataclasses import dataclass, fields, replace

import numpy as np

from . import autodiff as ad
from . import corpus, encoder, evaluation, matcher
from .errors import DataError, NumericError
from .rng import stream_rng

log = logging.getLogger(__name__)

OBJECTIVES = ("siamese", "triplet")
ENCODERS = ("anchored", "bilstm")
OPTIMIZERS = ("adam", "rmsprop", "adagrad", "adadelta")

CHECKPOINT_FORMAT = "synmatch-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    objective: str = "siamese"
    encoder: str = "anchored"
    leaky: bool = True
    leaky_trainable: bool = False
    contexts_per_entity: int = 20
    max_context_len: int = 50
    d_ce: int = 256
    margin: float = 0.75
    optimizer: str = "adam"
    batch_size: int = 16
    learning_rate: float = 0.0003
    epochs: int = 40
    seed: int = 0
    neg_ratio: float = 1.0
    clip_norm: float = 5.0
    fine_tune_embeddings: bool = False
    resample_contexts: bool = True
    pairs_per_epoch: int = 0

    def validate(self):
        if self.objective not in OBJECTIVES:
            raise DataError(f"objective must be one of {OBJECTIVES}, got {self.objective!r}")
        if self.encoder not in ENCODERS:
            raise DataError(f"encoder must be one of {ENCODERS}, got {self.encoder!r}")
        if self.optimizer not in OPTIMIZERS:
            raise DataError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if self.contexts_per_entity < 1:
            raise DataError("contexts_per_entity must be at least 1")
        if self.max_context_len < 1:
            raise DataError("max_context_len must be at least 1")
        if self.d_ce < 2 or self.d_ce % 2:
            raise DataError(f"d_ce must be a positive even number, got {self.d_ce}")
        if self.margin <= 0:
            raise DataError(f"margin must be positive, got {self.margin}")
        if self.learning_rate < 0:
            raise DataError(f"learning rate must be non-negative, got {self.learning_rate}")
        if self.batch_size < 1:
            raise DataError("batch_size must be at least 1")
        if self.epochs < 0:
            raise DataError("epochs must be non-negative")
        if self.neg_ratio < 0:
            raise DataError("neg_ratio must be non-negative")
        return self

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def to_text(self):
        out = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool):
                value = "true" if value else "false"
            out.append(f"{f.name}={value}")
        return "\n".join(out) + "\n"


def _coerce(field, raw):
    if field.type == "bool" or field.type is bool:
        low = raw.strip().lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise DataError(f"config key {field.name}: cannot read {raw!r} as a boolean")
    try:
        if field.type == "int" or field.type is int:
            return int(raw)
        if field.type == "float" or field.type is float:
            return float(raw)
    except ValueError:
        raise DataError(f"config key {field.name}: cannot read {raw!r} as {field.type}")
    return raw.strip()


def parse_config_text(text, base=None):
    """Apply key=value lines (blank lines and # comments allowed) to a config."""
    config = base if base is not None else TrainConfig()
    by_name = {f.name: f for f in fields(TrainConfig)}
    updates = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataError(f"config line {lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in by_name:
            raise DataError(f"config line {lineno}: unknown key {key!r}")
        updates[key] = _coerce(by_name[key], value)
    return replace(config, **updates)


# ---------------------------------------------------------------------------
# losses

def siamese_from_score(s, y, margin):
    """Eq-style contrastive loss on one cosine score."""
    if y:
        return 0.25 * (1.0 - s) ** 2
    return max(s - margin, 0.0) ** 2


def siamese_loss(h_bar, g_bar, y, margin):
    s = matcher.score(matcher.MatchResult(None, None, None, None,
                                          h_bar=np.asarray(h_bar, float),
                                          g_bar=np.asarray(g_bar, float)))
    return siamese_from_score(s, y, margin)


def triplet_from_scores(s_pos, s_neg, margin):
    return max(s_neg - s_pos + margin, 0.0)


def triplet_loss(h_bar, g_bar_pos, g_bar_neg, margin):
    res = matcher.MatchResult(None, None, None, None)
    res.h_bar = np.asarray(h_bar, float)
    res.g_bar = np.asarray(g_bar_pos, float)
    s_pos = matcher.score(res)
    res.g_bar = np.asarray(g_bar_neg, float)
    s_neg = matcher.score(res)
    return triplet_from_scores(s_pos, s_neg, margin)


def siamese_term_var(s, y, margin):
    if y:
        return ad.scale(ad.square(1.0 - s), 0.25)
    return ad.square(ad.relu(s - margin))


def triplet_term_var(s_pos, s_neg, margin):
    return ad.relu(s_neg - s_pos + margin)


# ---------------------------------------------------------------------------
# optimizers

class _SlotOptimizer:
    """Shared bookkeeping: one or two moment arrays per parameter name."""

    def __init__(self, lr):
        self.lr = lr
        self.slots = {}

    def slot(self, name, like, which=0):
        key = (name, which)
        if key not in self.slots:
            self.slots[key] = np.zeros_like(like)
        return self.slots[key]


class Adam(_SlotOptimizer):
    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        super().__init__(lr)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for name, g in grads.items():
            m = self.slot(name, g, 0)
            v = self.slot(name, g, 1)
            m += (1 - b1) * (g - m)
            v += (1 - b2) * (g * g - v)
            m_hat = m / (1 - b1 ** self.t)
            v_hat = v / (1 - b2 ** self.t)
            params[name] = params[name] - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class RMSProp(_SlotOptimizer):
    def __init__(self, lr, rho=0.9, eps=1e-8):
        super().__init__(lr)
        self.rho, self.eps = rho, eps

    def step(self, params, grads):
        for name, g in grads.items():
            acc = self.slot(name, g)
            acc += (1 - self.rho) * (g * g - acc)
            params[name] = params[name] - self.lr * g / (np.sqrt(acc) + self.eps)


class Adagrad(_SlotOptimizer):
    def __init__(self, lr, eps=1e-8):
        super().__init__(lr)
        self.eps = eps

    def step(self, params, grads):
        for name, g in grads.items():
            acc = self.slot(name, g)
            acc += g * g
            params[name] = params[name] - self.lr * g / (np.sqrt(acc) + self.eps)


class Adadelta(_SlotOptimizer):
    def __init__(self, lr, rho=0.95, eps=1e-8):
        super().__init__(lr)
        self.rho, self.eps = rho, eps

    def step(self, params, grads):
        for name, g in grads.items():
            acc_g = self.slot(name, g, 0)
            acc_d = self.slot(name, g, 1)
            acc_g += (1 - self.rho) * (g * g - acc_g)
            delta = -np.sqrt(acc_d + self.eps) / np.sqrt(acc_g + self.eps) * g
            acc_d += (1 - self.rho) * (delta * delta - acc_d)
            params[name] = params[name] + self.lr * delta


def make_optimizer(name, lr):
    table = {"adam": Adam, "rmsprop": RMSProp, "adagrad": Adagrad, "adadelta": Adadelta}
    if name not in table:
        raise DataError(f"unknown optimizer {name!r}")
    return table[name](lr)


def clip_gradients(grads, max_norm):
    """Scale all gradients down to a global norm cap; 0 or less disables."""
    total = np.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if max_norm > 0 and total > max_norm:
        factor = max_norm / total
        for name in grads:
            grads[name] = grads[name] * factor
    return total


# ---------------------------------------------------------------------------
# model assembly

def init_model_params(config, table, rng):
    """Named parameter dict for the configured model."""
    params = encoder.init_encoder_params(table.dim, config.d_ce, rng)
    # identity start: matching an entity against itself then scores exactly 1
    params["match.w_bm"] = np.eye(config.d_ce)
    if config.leaky and config.leaky_trainable:
        params["match.leak"] = np.zeros((1, config.d_ce))
    if config.fine_tune_embeddings:
        params["embed.table"] = table.matrix.copy()
    return params


def _leak_arg(config, v):
    if not config.leaky:
        return None
    if config.leaky_trainable:
        return v["match.leak"]
    return "zero"


def _item_entities(item):
    if isinstance(item, corpus.TrainingTriplet):
        return (item.anchor, item.positive, item.negative)
    return (item.a, item.b)


def batch_loss_builder(items, contexts, config, frozen_emb):
    """Builder for ad.grad: mean loss over a batch of pairs or triplets.

    contexts maps entity id -> list of ContextWindow (length P); all windows
    in the batch are encoded in a single pass and sliced back per entity.
    """
    order = sorted({eid for item in items for eid in _item_entities(item)})
    spans = {}
    windows = []
    for eid in order:
        spans[eid] = (len(windows), len(windows) + len(contexts[eid]))
        windows.extend(contexts[eid])

    def builder(v):
        emb = v["embed.table"] if "embed.table" in v else frozen_emb
        encoded = encoder.encode_batch_vars(windows, v, emb, config.encoder)
        enc = {eid: ad.rows(encoded, a, b) for eid, (a, b) in spans.items()}
        w_bm = v["match.w_bm"]
        leak = _leak_arg(config, v)
        total = None
        for item in items:
            if isinstance(item, corpus.TrainingTriplet):
                s_pos = matcher.pair_score_vars(enc[item.anchor], enc[item.positive], w_bm, leak)
                s_neg = matcher.pair_score_vars(enc[item.anchor], enc[item.negative], w_bm, leak)
                term = triplet_term_var(s_pos, s_neg, config.margin)
            else:
                s = matcher.pair_score_vars(enc[item.a], enc[item.b], w_bm, leak)
                term = siamese_term_var(s, item.label, config.margin)
            total = term if total is None else total + term
        return ad.scale(total, 1.0 / len(items))

    return builder


def gradcheck_model(seed=0, eps=1e-5):
    """Finite-difference check of the whole model on a small random setup.

    Covers both objectives, both encoder variants, and the leaky unit on and
    off (trainable when on, so its gradient is checked too).  Returns a list
    of (label, FiniteDiffReport), one per combination.
    """
    n_vocab, d_embed, n_entities = 20, 4, 4
    base = stream_rng(seed, "init", 99)
    table = base.normal(scale=0.5, size=(n_vocab, d_embed))
    table[corpus.PAD] = 0.0
    ents = list(range(2, 2 + n_entities))
    reports = []
    for objective in OBJECTIVES:
        for variant in ENCODERS:
            for leaky in (False, True):
                config = TrainConfig(
                    objective=objective, encoder=variant, leaky=leaky,
                    leaky_trainable=leaky, d_ce=4, contexts_per_entity=2,
                    max_context_len=5, fine_tune_embeddings=True,
                    seed=seed).validate()
                rng = stream_rng(seed, "init", len(reports))
                ctx = {}
                for eid in ents:
                    wins = []
                    for _ in range(config.contexts_per_entity):
                        ids = rng.integers(2, n_vocab, size=5)
                        pos = int(rng.integers(5))
                        ids[pos] = eid
                        wins.append(corpus.ContextWindow(tuple(int(t) for t in ids), pos, -1))
                    ctx[eid] = wins
                if objective == "triplet":
                    items = [corpus.TrainingTriplet(ents[0], ents[1], ents[2]),
                             corpus.TrainingTriplet(ents[1], ents[0], ents[3])]
                else:
                    items = [corpus.TrainingPair(ents[0], ents[1], 1),
                             corpus.TrainingPair(ents[2], ents[3], 0)]

                class _T:
                    dim = d_embed
                    matrix = table

                params = init_model_params(config, _T(), rng)
                builder = batch_loss_builder(items, ctx, config, table)
                report = ad.finite_diff_check(builder, params, eps=eps)
                label = f"{objective}/{variant}/leaky={'on' if leaky else 'off'}"
                reports.append((label, report))
    return reports


def _param_norms(params):
    return ", ".join(f"{k}={np.linalg.norm(v):.3e}" for k, v in sorted(params.items()))


def _auto_items_per_epoch(store, config):
    pool = 0
    for si in store.synset_ids("train"):
        n = len(store.synsets[si])
        pool += n * (n - 1) // 2
    if config.objective == "triplet":
        return max(pool, 1)
    return max(round(pool * (1.0 + config.neg_ratio)), 1)


def train(config, data, table):
    """Run the training loop; returns (params, history).

    History holds one record per epoch: mean training loss and validation
    AUC (None when there is no valid split).  The returned parameters are
    the best-validation snapshot, or the final epoch's when no validation
    pairs exist.
    """
    config.validate()
    store = data.store
    if not store.split:
        # no split assigned: train on everything
        store = corpus.SynsetStore(synsets=list(store.synsets),
                                   split={i: "train" for i in range(len(store.synsets))})
    if not store.synset_ids("train"):
        raise DataError("train split is empty")

    P = config.contexts_per_entity
    T = config.max_context_len
    params = init_model_params(config, table, stream_rng(config.seed, "init"))
    frozen_emb = table.matrix
    opt = make_optimizer(config.optimizer, config.learning_rate)

    valid_pairs = evaluation.make_eval_pairs(store, "valid", stream_rng(config.seed, "eval", 1))
    valid_ctx = {}
    if valid_pairs:
        valid_ids = sorted({eid for p in valid_pairs for eid in (p.a, p.b)})
        valid_ctx = evaluation.eval_contexts(data, valid_ids, P, T, config.seed)

    n_items = config.pairs_per_epoch or _auto_items_per_epoch(store, config)
    history = []
    best_auc = None
    best_params = None
    fixed_ctx = None

    for epoch in range(config.epochs):
        ep_rng = stream_rng(config.seed, "train", epoch)
        if config.objective == "triplet":
            items = corpus.sample_triplets(store, n_items, ep_rng)
        else:
            items = corpus.sample_pairs(store, n_items, config.neg_ratio, ep_rng)

        if config.resample_contexts or fixed_ctx is None:
            ctx_rng = ep_rng if config.resample_contexts else stream_rng(config.seed, "train")
            needed = sorted({eid for item in items for eid in _item_entities(item)})
            fixed_ctx = {eid: corpus.retrieve_contexts(data, eid, P, T, ctx_rng)
                         for eid in needed}
        else:
            # fixed contexts: top up entities not seen in earlier epochs
            ctx_rng = stream_rng(config.seed, "train")
            for item in items:
                for eid in _item_entities(item):
                    if eid not in fixed_ctx:
                        fixed_ctx[eid] = corpus.retrieve_contexts(data, eid, P, T, ctx_rng)

        epoch_loss = 0.0
        for batch_no in range(0, len(items), config.batch_size):
            batch = items[batch_no:batch_no + config.batch_size]
            builder = batch_loss_builder(batch, fixed_ctx, config, frozen_emb)
            try:
                value, grads = ad.grad(builder, params)
            except NumericError as err:
                raise NumericError(
                    f"{err} (epoch {epoch}, batch {batch_no // config.batch_size}; "
                    f"parameter norms: {_param_norms(params)})") from err
            clip_gradients(grads, config.clip_norm)
            opt.step(params, grads)
            epoch_loss += value * len(batch)
        epoch_loss /= len(items)

        valid_auc = None
        if valid_pairs:
            emb = params.get("embed.table", frozen_emb)
            scores = evaluation.pair_scores(params, config, valid_pairs, valid_ctx, emb)
            valid_auc = evaluation.auc([(s, p.label) for s, p in zip(scores, valid_pairs)])
            if best_auc is None or valid_auc > best_auc:
                best_auc = valid_auc
                best_params = copy.deepcopy(params)
        history.append({"epoch": epoch, "loss": epoch_loss, "valid_auc": valid_auc})
        log.info("epoch %d: loss %.6f%s", epoch, epoch_loss,
                 "" if valid_auc is None else f", valid auc {valid_auc:.4f}")

    if best_params is not None:
        params = best_params
    return params, history


# ---------------------------------------------------------------------------
# checkpoints

def save_checkpoint(path, params, config, meta=None):
    """Canonical JSON checkpoint; identical models always produce identical bytes."""
    blob = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": config.to_dict(),
        "meta": dict(meta or {}),
        "params": {
            name: {
                "shape": list(arr.shape),
                "data": base64.b64encode(
                    np.ascontiguousarray(arr, dtype="<f8").tobytes()).decode("ascii"),
            }
            for name, arr in sorted(params.items())
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(blob, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_checkpoint(path):
    """Read a checkpoint; returns (params, config, meta)."""
    with open(path, encoding="utf-8") as fh:
        try:
            blob = json.load(fh)
        except json.JSONDecodeError as err:
            raise DataError(f"checkpoint {path} is not valid JSON: {err}") from err
    if blob.get("format") != CHECKPOINT_FORMAT:
        raise DataError(f"{path} is not a model checkpoint")
    if blob.get("version") != CHECKPOINT_VERSION:
        raise DataError(f"checkpoint version {blob.get('version')} unsupported "
                        f"(expected {CHECKPOINT_VERSION})")
    known = {f.name for f in fields(TrainConfig)}
    cfg_dict = blob.get("config", {})
    unknown = set(cfg_dict) - known
    if unknown:
        raise DataError(f"checkpoint config has unknown keys: {sorted(unknown)}")
    config = TrainConfig(**cfg_dict).validate()
    params = {}
    for name, entry in blob.get("params", {}).items():
        shape = tuple(int(x) for x in entry["shape"])
        raw = base64.b64decode(entry["data"])
        count = int(np.prod(shape)) if shape else 1
        if len(raw) != count * 8:
            raise DataError(
                f"parameter {name}: data block holds {len(raw) // 8} values "
                f"but shape {list(shape)} needs {count}")
        params[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
    return params, config, blob.get("meta", {})
