import numpy as np
import pytest

from synmatch import embeddings
from synmatch.corpus import PAD, UNK, Vocabulary
from synmatch.errors import DataError, ShapeError, UnknownEntityError


def make_vocab(tokens):
    v = Vocabulary()
    for t in tokens:
        v.add(t)
    return v


def test_load_with_header(tmp_path):
    path = tmp_path / "emb.txt"
    path.write_text("2 3\napple 1 2 3\npear 4 5 6\n")
    vocab = make_vocab(["apple", "pear"])
    table = embeddings.load_embeddings(str(path), vocab)
    assert table.dim == 3
    assert np.array_equal(table.vector("apple"), [1, 2, 3])
    assert np.array_equal(table.vector("pear"), [4, 5, 6])


def test_load_without_header(tmp_path):
    path = tmp_path / "emb.txt"
    path.write_text("apple 1 2 3\npear 4 5 6\n")
    table = embeddings.load_embeddings(str(path), make_vocab(["apple", "pear"]))
    assert table.dim == 3
    assert np.array_equal(table.vector("apple"), [1, 2, 3])


def test_missing_token_gets_mean_and_pad_zero(tmp_path):
    path = tmp_path / "emb.txt"
    path.write_text("apple 1 2 3\npear 3 4 5\n")
    vocab = make_vocab(["apple", "pear", "plum"])
    table = embeddings.load_embeddings(str(path), vocab)
    assert np.array_equal(table.vector("plum"), [2, 3, 4])   # mean of file rows
    assert np.array_equal(table.matrix[UNK], [2, 3, 4])
    assert np.array_equal(table.matrix[PAD], [0, 0, 0])


def test_dim_mismatch_cites_line(tmp_path):
    path = tmp_path / "emb.txt"
    rows = [f"w{i} 1 2 3" for i in range(6)] + ["w6 1 2"]
    path.write_text("\n".join(rows) + "\n")
    with pytest.raises(DataError) as err:
        embeddings.load_embeddings(str(path), make_vocab([f"w{i}" for i in range(7)]))
    assert "line 7" in str(err.value)


def test_empty_file_errors(tmp_path):
    path = tmp_path / "emb.txt"
    path.write_text("")
    with pytest.raises(DataError):
        embeddings.load_embeddings(str(path), make_vocab(["a"]))


def test_save_load_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    vocab = make_vocab([f"tok{i}" for i in range(10)])
    src = tmp_path / "src.txt"
    lines = [f"tok{i} " + " ".join("%.8f" % x for x in rng.normal(size=5))
             for i in range(10)]
    src.write_text("\n".join(lines) + "\n")
    table = embeddings.load_embeddings(str(src), vocab)
    out = tmp_path / "out.txt"
    embeddings.save_embeddings(str(out), table)
    again = embeddings.load_embeddings(str(out), vocab)
    assert np.max(np.abs(again.matrix - table.matrix)) <= 1e-6


def unit_table(vectors):
    vocab = make_vocab(sorted(vectors))
    dim = len(next(iter(vectors.values())))
    matrix = np.zeros((len(vocab), dim))
    for tok, vec in vectors.items():
        matrix[vocab.get(tok)] = vec
    return embeddings.EmbeddingTable(matrix=matrix, vocab=vocab)


def test_knn_duplicate_vector_ranks_first():
    table = unit_table({"a": [1, 0], "b": [1, 0], "c": [0, 1]})
    ids = [table.vocab.get(t) for t in ("a", "b", "c")]
    nl = embeddings.nearest_neighbors(table, "a", k=2, universe=ids)
    assert nl.neighbors[0][0] == table.vocab.get("b")
    assert nl.neighbors[0][1] == pytest.approx(1.0)


def test_knn_orthogonal_zero_similarity():
    table = unit_table({"a": [1, 0], "c": [0, 1]})
    nl = embeddings.nearest_neighbors(table, "a", k=1,
                                      universe=[table.vocab.get("a"), table.vocab.get("c")])
    assert nl.neighbors == [(table.vocab.get("c"), 0.0)]


def test_knn_sorted_and_excludes_query():
    rng = np.random.default_rng(1)
    vocab = make_vocab([f"e{i}" for i in range(40)])
    matrix = rng.normal(size=(len(vocab), 8))
    table = embeddings.EmbeddingTable(matrix=matrix, vocab=vocab)
    universe = list(range(2, len(vocab)))
    nl = embeddings.nearest_neighbors(table, "e7", k=14, universe=universe)
    assert len(nl.neighbors) == 14
    assert nl.query not in [eid for eid, _ in nl.neighbors]
    sims = [s for _, s in nl.neighbors]
    assert all(sims[i] >= sims[i + 1] for i in range(len(sims) - 1))
    # brute-force double check of the top hit
    best = max((eid for eid in universe if eid != nl.query),
               key=lambda eid: embeddings.cosine(matrix[nl.query], matrix[eid]))
    assert nl.neighbors[0][0] == best


def test_cosine_symmetric():
    rng = np.random.default_rng(2)
    for _ in range(50):
        u = rng.normal(size=6)
        v = rng.normal(size=6)
        assert abs(embeddings.cosine(u, v) - embeddings.cosine(v, u)) < 1e-12


def test_cosine_zero_norm():
    assert embeddings.cosine(np.zeros(4), np.ones(4)) == 0.0


def test_baseline_identity_unit_vector():
    table = unit_table({"a": [0.6, 0.8], "b": [0.0, 1.0]})
    assert embeddings.baseline_score(table, "a", "a", np.eye(2)) == pytest.approx(1.0)
    assert embeddings.baseline_score(table, "a", "b", np.zeros((2, 2))) == 0.0


def test_baseline_matches_loop_oracle():
    rng = np.random.default_rng(3)
    table = unit_table({"a": rng.normal(size=5), "b": rng.normal(size=5)})
    W = rng.normal(size=(5, 5))
    xu = table.vector("a")
    xv = table.vector("b")
    want = 0.0
    for i in range(5):
        for j in range(5):
            want += xu[i] * W[i, j] * xv[j]
    got = embeddings.baseline_score(table, "a", "b", W)
    assert got == pytest.approx(want, rel=1e-12)


def test_baseline_shape_and_unknown_errors():
    table = unit_table({"a": [1.0, 0.0]})
    with pytest.raises(ShapeError):
        embeddings.baseline_score(table, "a", "a", np.eye(3))
    with pytest.raises(UnknownEntityError):
        table.vector("nope")
