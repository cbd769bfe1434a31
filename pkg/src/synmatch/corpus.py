"""Corpus ingestion: vocabulary, per-entity context retrieval, synset splits, pair sampling.

The corpus is plain text, one tokenized sentence per line, tokens separated by
whitespace.  Multi-word entities must already be joined into single tokens
(e.g. "new_york_city").  Synsets live in a separate file, one group per line,
entity tokens separated by tabs.
"""

import logging
from dataclasses import dataclass, field

from .errors import DataError, NoContextError, UnknownEntityError

log = logging.getLogger(__name__)

UNK = 0
PAD = 1
UNK_TOKEN = "<unk>"
PAD_TOKEN = "<pad>"


class Vocabulary:
    """Token <-> id map. Ids 0 and 1 are reserved for <unk> and <pad>."""

    def __init__(self):
        self.token_to_id = {UNK_TOKEN: UNK, PAD_TOKEN: PAD}
        self.id_to_token = [UNK_TOKEN, PAD_TOKEN]

    def add(self, token):
        tid = self.token_to_id.get(token)
        if tid is None:
            tid = len(self.id_to_token)
            self.token_to_id[token] = tid
            self.id_to_token.append(token)
        return tid

    def get(self, token):
        """Id for token, UNK if the token was never added."""
        return self.token_to_id.get(token, UNK)

    def token(self, tid):
        return self.id_to_token[tid]

    def __contains__(self, token):
        return token in self.token_to_id

    def __len__(self):
        return len(self.id_to_token)


@dataclass(frozen=True)
class ContextWindow:
    """One occurrence of an entity with surrounding tokens, at most T of them."""

    token_ids: tuple
    entity_pos: int
    source_line: int

    def __post_init__(self):
        if not 0 <= self.entity_pos < len(self.token_ids):
            raise DataError(
                f"entity_pos {self.entity_pos} outside window of "
                f"length {len(self.token_ids)}")

    @property
    def entity_id(self):
        return self.token_ids[self.entity_pos]

    def __len__(self):
        return len(self.token_ids)


@dataclass
class SynsetStore:
    """Groups of synonym entity ids plus an optional train/valid/test split."""

    synsets: list = field(default_factory=list)   # list of tuples of entity ids
    split: dict = field(default_factory=dict)     # synset index -> "train"|"valid"|"test"

    def __post_init__(self):
        seen = {}
        for si, members in enumerate(self.synsets):
            for e in members:
                if e in seen:
                    raise DataError(
                        f"entity id {e} appears in synsets {seen[e]} and {si}")
                seen[e] = si
        self._synset_of = seen

    def synset_of(self, entity_id):
        """Index of the synset holding entity_id, or None."""
        return self._synset_of.get(entity_id)

    def are_synonyms(self, a, b):
        sa = self._synset_of.get(a)
        return sa is not None and sa == self._synset_of.get(b)

    def entities(self, split=None):
        """All entity ids, or only those whose synset is in the given split."""
        out = []
        for si, members in enumerate(self.synsets):
            if split is None or self.split.get(si) == split:
                out.extend(members)
        return out

    def synset_ids(self, split):
        return [si for si in range(len(self.synsets)) if self.split.get(si) == split]

    def __len__(self):
        return len(self.synsets)


@dataclass(frozen=True)
class TrainingPair:
    a: int
    b: int
    label: int  # 1 = synonym, 0 = not


@dataclass(frozen=True)
class TrainingTriplet:
    anchor: int
    positive: int
    negative: int


@dataclass
class CorpusData:
    """Everything ingest() produces: vocabulary, token lines, occurrence index, synsets."""

    vocab: Vocabulary
    lines: list               # list of tuples of token ids
    occurrences: dict         # token id -> list of (line index, position)
    store: SynsetStore

    def entity_id(self, entity):
        """Resolve a surface form (or pass through an id) to a token id."""
        if isinstance(entity, str):
            if entity not in self.vocab:
                raise UnknownEntityError(f"unknown entity {entity!r}")
            return self.vocab.get(entity)
        return int(entity)

    def frequency(self, entity):
        return len(self.occurrences.get(self.entity_id(entity), ()))


def read_corpus_lines(path):
    """Read, tokenize and exact-deduplicate corpus lines, keeping first occurrences."""
    seen = set()
    lines = []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            toks = tuple(raw.split())
            if not toks or toks in seen:
                continue
            seen.add(toks)
            lines.append(toks)
    return lines


def read_synset_lines(path):
    """Read the synset file: one group per line, entity tokens tab-separated."""
    groups = []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            members = [t for t in raw.rstrip("\n").split("\t") if t]
            if members:
                groups.append(members)
    return groups


def ingest(corpus_path, synset_path, min_count=5):
    """Build a CorpusData from a corpus file and a synset file.

    Duplicate corpus lines are dropped.  Synset entities that never occur in
    the corpus, or occur fewer than min_count times, are dropped from the
    store (with a warning); their contexts would be too thin to encode.
    """
    token_lines = read_corpus_lines(corpus_path)
    vocab = Vocabulary()
    lines = []
    occurrences = {}
    for li, toks in enumerate(token_lines):
        ids = tuple(vocab.add(t) for t in toks)
        lines.append(ids)
        for pos, tid in enumerate(ids):
            occurrences.setdefault(tid, []).append((li, pos))

    synsets = []
    for members in read_synset_lines(synset_path):
        kept = []
        for surface in members:
            if surface not in vocab:
                log.warning("synset entity %r never occurs in the corpus; dropped", surface)
                continue
            tid = vocab.get(surface)
            freq = len(occurrences.get(tid, ()))
            if freq < min_count:
                log.warning("entity %r occurs %d time(s), fewer than min_count=%d; dropped",
                            surface, freq, min_count)
                continue
            kept.append(tid)
        if kept:
            synsets.append(tuple(kept))

    return CorpusData(vocab=vocab, lines=lines, occurrences=occurrences,
                      store=SynsetStore(synsets=synsets))


def window_around(token_ids, pos, T, source_line=-1):
    """Cut a window of at most T tokens around position pos.

    The entity keeps floor((T-1)/2) tokens on its left and the remainder on
    its right; when the sentence boundary cuts one side short, the budget
    shifts to the other side so the window stays full whenever possible.
    """
    n = len(token_ids)
    if n <= T:
        return ContextWindow(tuple(token_ids), pos, source_line)
    left = (T - 1) // 2
    start = pos - left
    end = start + T
    if start < 0:
        start, end = 0, T
    elif end > n:
        start, end = n - T, n
    return ContextWindow(tuple(token_ids[start:end]), pos - start, source_line)


def retrieve_contexts(data, entity, P, T, rng):
    """Sample P context windows for an entity.

    Occurrences are drawn uniformly, without replacement when the entity has
    at least P of them, with replacement otherwise.
    """
    eid = data.entity_id(entity)
    occ = data.occurrences.get(eid, ())
    if not occ:
        raise NoContextError(f"entity id {eid} has no occurrences in the corpus")
    replace = len(occ) < P
    picks = rng.choice(len(occ), size=P, replace=replace)
    out = []
    for i in picks:
        li, pos = occ[i]
        out.append(window_around(data.lines[li], pos, T, source_line=li))
    return out


def split_synsets(store, valid_frac, test_frac, rng):
    """Assign each synset to train, valid or test.

    Splitting whole synsets keeps evaluation entities disjoint from training
    entities.  A fraction of exactly 0 yields an empty split; a positive
    fraction that rounds to zero synsets is an error.
    """
    n = len(store.synsets)
    for name, frac in (("valid", valid_frac), ("test", test_frac)):
        if not 0.0 <= frac < 1.0:
            raise DataError(f"{name} fraction {frac} outside [0, 1)")
    n_valid = round(n * valid_frac)
    n_test = round(n * test_frac)
    if valid_frac > 0 and n_valid == 0:
        raise DataError(f"valid fraction {valid_frac} of {n} synsets rounds to zero")
    if test_frac > 0 and n_test == 0:
        raise DataError(f"test fraction {test_frac} of {n} synsets rounds to zero")
    n_train = n - n_valid - n_test
    if n_train <= 0:
        raise DataError(f"no synsets left for training ({n} total, "
                        f"{n_valid} valid, {n_test} test)")
    order = rng.permutation(n)
    split = {}
    for si in order[:n_test]:
        split[int(si)] = "test"
    for si in order[n_test:n_test + n_valid]:
        split[int(si)] = "valid"
    for si in order[n_test + n_valid:]:
        split[int(si)] = "train"
    return SynsetStore(synsets=list(store.synsets), split=split)


def _positive_pool(store, split="train"):
    pool = []
    for si in store.synset_ids(split):
        members = store.synsets[si]
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                pool.append((members[i], members[j]))
    return pool


def _random_non_synonym(store, entities, anchor, rng):
    for _ in range(1000):
        k = entities[rng.integers(len(entities))]
        if k != anchor and not store.are_synonyms(anchor, k):
            return k
    raise DataError("could not sample a non-synonym entity; "
                    "the train split has no usable negatives")


def sample_pairs(store, n, neg_ratio, rng):
    """Sample n labeled pairs from the train split.

    Positives come from within train synsets, negatives pair a train entity
    with a uniformly random non-synonym train entity.  neg_ratio negatives
    are drawn per positive; n is split as n_pos = round(n / (1 + neg_ratio)).
    """
    pool = _positive_pool(store)
    if not pool:
        raise DataError("train split contains no positive pair")
    entities = store.entities("train")
    n_pos = round(n / (1.0 + neg_ratio))
    pairs = []
    for i in rng.integers(len(pool), size=n_pos):
        a, b = pool[i]
        if rng.integers(2):
            a, b = b, a
        pairs.append(TrainingPair(a, b, 1))
    for _ in range(n - n_pos):
        a = entities[rng.integers(len(entities))]
        pairs.append(TrainingPair(a, _random_non_synonym(store, entities, a, rng), 0))
    rng.shuffle(pairs)
    return pairs


def sample_triplets(store, n, rng):
    """Sample n (anchor, positive, negative) triplets from the train split."""
    pool = _positive_pool(store)
    if not pool:
        raise DataError("train split contains no positive pair")
    entities = store.entities("train")
    out = []
    for i in rng.integers(len(pool), size=n):
        a, p = pool[i]
        if rng.integers(2):
            a, p = p, a
        out.append(TrainingTriplet(a, p, _random_non_synonym(store, entities, a, rng)))
    return out
