"""Synonym discovery and the evaluation harness.

Discovery is the four-step inference pipeline: sample contexts for the query,
shortlist candidates by embedding cosine, rescore each candidate with the
full context-matching model, keep those above a threshold.

Evaluation reports AUC over labeled entity pairs plus ranking metrics
(MAP, P@K, R@K, F1@K) over per-entity discovery runs against held-out
synsets.  All context sampling is keyed by (seed, entity), so a metric run
is a pure function of (model, data, seed).
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from . import corpus, embeddings, encoder, matcher
from .errors import MetricError
from .rng import stream_rng

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# metrics

def auc(scored):
    """Rank-based (Mann-Whitney) AUC over (score, label) pairs; ties count half."""
    scores = np.array([s for s, _ in scored], dtype=float)
    labels = np.array([y for _, y in scored], dtype=int)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise MetricError(f"AUC needs both classes, got {n_pos} positives "
                          f"and {n_neg} negatives")
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores))
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        # ranks are 1-based; tied scores share the average rank
        ranks[order[i:j + 1]] = (i + 1 + j + 1) / 2.0
        i = j + 1
    rank_sum = ranks[labels == 1].sum()
    u = rank_sum - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def average_precision(ranked, relevant):
    """AP with the standard denominator: the number of relevant items."""
    if not relevant:
        raise MetricError("average precision needs at least one relevant item")
    hits = 0
    total = 0.0
    for i, item in enumerate(ranked, start=1):
        if item in relevant:
            hits += 1
            total += hits / i
    return total / len(relevant)


def precision_at(ranked, relevant, k):
    if k < 1:
        raise MetricError(f"K must be positive, got {k}")
    return sum(1 for item in ranked[:k] if item in relevant) / k


def recall_at(ranked, relevant, k):
    if not relevant:
        raise MetricError("recall needs at least one relevant item")
    return sum(1 for item in ranked[:k] if item in relevant) / len(relevant)


def f1_at(ranked, relevant, k):
    p = precision_at(ranked, relevant, k)
    r = recall_at(ranked, relevant, k)
    if p + r == 0.0:
        return 0.0
    return 2.0 * p * r / (p + r)


@dataclass
class EvalReport:
    auc: float
    map: float
    p_at_k: dict = field(default_factory=dict)
    r_at_k: dict = field(default_factory=dict)
    f1_at_k: dict = field(default_factory=dict)

    def to_text(self):
        lines = [f"auc {self.auc:.6f}", f"map {self.map:.6f}"]
        for k in sorted(self.p_at_k):
            lines.append(f"p@{k} {self.p_at_k[k]:.6f}")
            lines.append(f"r@{k} {self.r_at_k[k]:.6f}")
            lines.append(f"f1@{k} {self.f1_at_k[k]:.6f}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# pair construction and scoring

def make_eval_pairs(store, split, rng):
    """Labeled pairs for one split: every within-synset pair as a positive,
    the same number of seeded cross-synset negatives."""
    synset_ids = store.synset_ids(split)
    positives = []
    for si in synset_ids:
        members = store.synsets[si]
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                positives.append(corpus.TrainingPair(members[i], members[j], 1))
    entities = store.entities(split)
    negatives = []
    seen = set()
    tries = 0
    while len(negatives) < len(positives) and tries < 100 * (len(positives) + 1):
        tries += 1
        a = entities[rng.integers(len(entities))]
        b = entities[rng.integers(len(entities))]
        if a == b or store.are_synonyms(a, b):
            continue
        key = (min(a, b), max(a, b))
        if key in seen and tries < 20 * (len(positives) + 1):
            continue  # prefer distinct pairs while the space allows
        seen.add(key)
        negatives.append(corpus.TrainingPair(a, b, 0))
    return positives + negatives


def eval_contexts(data, entity_ids, P, T, seed):
    """Context windows per entity, keyed by (seed, entity) for reproducibility."""
    out = {}
    for eid in entity_ids:
        rng = stream_rng(seed, "eval", 0, int(eid))
        out[eid] = corpus.retrieve_contexts(data, eid, P, T, rng)
    return out


def _leaky(params, config):
    if not config.leaky:
        return None
    if config.leaky_trainable and "match.leak" in params:
        return matcher.LeakyUnit(params["match.leak"], "trainable")
    return matcher.fixed_zero_leaky(config.d_ce)


def encode_entity_set(params, config, ctx, emb):
    """Encode each entity's windows in one batched pass; id -> (P, d_CE)."""
    order = sorted(ctx)
    windows = []
    spans = {}
    for eid in order:
        spans[eid] = (len(windows), len(windows) + len(ctx[eid]))
        windows.extend(ctx[eid])
    if not windows:
        return {}
    out = encoder.encode_batch(windows, params, emb, config.encoder)
    return {eid: out[a:b] for eid, (a, b) in spans.items()}


def pair_scores(params, config, pairs, ctx, emb):
    """Model score for each labeled pair, with entity encodings shared."""
    enc = encode_entity_set(params, config, ctx, emb)
    leaky = _leaky(params, config)
    w_bm = params["match.w_bm"]
    return [matcher.match_score(enc[p.a], enc[p.b], w_bm, leaky).score for p in pairs]


def score_pair(params, config, data, emb, a, b, seed=0, P=None):
    """Score one entity pair from scratch: sample contexts, encode, match."""
    P = P or config.contexts_per_entity
    ida, idb = data.entity_id(a), data.entity_id(b)
    ctx = eval_contexts(data, {ida, idb}, P, config.max_context_len, seed)
    enc = encode_entity_set(params, config, ctx, emb)
    return matcher.match_score(enc[ida], enc[idb],
                               params["match.w_bm"], _leaky(params, config)).score


# ---------------------------------------------------------------------------
# discovery

@dataclass
class DiscoveryResult:
    query: int
    ranked: list                # (candidate id, model score), best first
    threshold: float
    candidates: list = field(default_factory=list)  # (id, embedding cosine)
    accepted: list = field(default_factory=list)

    def __post_init__(self):
        if not self.accepted:
            self.accepted = [(c, s) for c, s in self.ranked if s > self.threshold]


def discover(params, config, data, table, query, k=50, threshold=0.8,
             seed=0, universe=None):
    """KNN-then-rerank synonym discovery for one query entity.

    Candidates come from cosine neighbors in the embedding space (cheap),
    the model score reranks them (expensive but accurate), and candidates
    strictly above the threshold are accepted.
    """
    qid = data.entity_id(query)
    if universe is None:
        universe = data.store.entities()
    if k <= 0:
        return DiscoveryResult(qid, [], threshold)
    neighbors = embeddings.nearest_neighbors(table, qid, k, universe)
    cand_ids = [eid for eid, _ in neighbors.neighbors]
    emb = params.get("embed.table", table.matrix)
    ctx = eval_contexts(data, [qid] + cand_ids, config.contexts_per_entity,
                        config.max_context_len, seed)
    enc = encode_entity_set(params, config, ctx, emb)
    leaky = _leaky(params, config)
    w_bm = params["match.w_bm"]
    scored = [(eid, matcher.match_score(enc[qid], enc[eid], w_bm, leaky).score)
              for eid in cand_ids]
    scored.sort(key=lambda t: (-t[1], t[0]))
    return DiscoveryResult(qid, scored, threshold,
                           candidates=list(neighbors.neighbors))


# ---------------------------------------------------------------------------
# full evaluation

def evaluate(params, config, data, table, split="test", seed=0,
             ks=(1, 5, 10), knn_k=50, threshold=0.8):
    """EvalReport over one split: pair AUC plus per-entity ranking metrics.

    Ranking metrics run the discovery pipeline for every entity of the split
    that has at least one synonym there, against the split's entities as the
    candidate universe.
    """
    store = data.store
    pairs = make_eval_pairs(store, split, stream_rng(seed, "eval", 1))
    if not pairs:
        raise MetricError(f"split {split!r} yields no evaluation pairs")
    entity_ids = sorted(store.entities(split))
    ctx = eval_contexts(data, entity_ids, config.contexts_per_entity,
                        config.max_context_len, seed)
    emb = params.get("embed.table", table.matrix)
    enc = encode_entity_set(params, config, ctx, emb)
    leaky = _leaky(params, config)
    w_bm = params["match.w_bm"]

    scores = [matcher.match_score(enc[p.a], enc[p.b], w_bm, leaky).score for p in pairs]
    auc_value = auc([(s, p.label) for s, p in zip(scores, pairs)])

    ap_values = []
    p_at = {k: [] for k in ks}
    r_at = {k: [] for k in ks}
    f1_at_scores = {k: [] for k in ks}
    for qid in entity_ids:
        si = store.synset_of(qid)
        relevant = set(store.synsets[si]) - {qid}
        if not relevant:
            continue
        neighbors = embeddings.nearest_neighbors(table, qid, knn_k, entity_ids)
        cand_ids = [eid for eid, _ in neighbors.neighbors]
        reranked = sorted(((eid, matcher.match_score(enc[qid], enc[eid], w_bm,
                                                     leaky).score)
                           for eid in cand_ids), key=lambda t: (-t[1], t[0]))
        ranked_ids = [eid for eid, _ in reranked]
        ap_values.append(average_precision(ranked_ids, relevant))
        for k in ks:
            p_at[k].append(precision_at(ranked_ids, relevant, k))
            r_at[k].append(recall_at(ranked_ids, relevant, k))
            f1_at_scores[k].append(f1_at(ranked_ids, relevant, k))
    if not ap_values:
        raise MetricError(f"split {split!r} has no entity with a synonym")

    mean = lambda xs: float(np.mean(xs))
    return EvalReport(
        auc=float(auc_value),
        map=mean(ap_values),
        p_at_k={k: mean(v) for k, v in p_at.items()},
        r_at_k={k: mean(v) for k, v in r_at.items()},
        f1_at_k={k: mean(v) for k, v in f1_at_scores.items()},
    )
