"""Context encoders: entity-anchored bidirectional LSTM and a plain Bi-LSTM.

A context window is encoded into a single d_CE vector.  The anchored variant
runs the forward cell from the start of the window up to the entity token and
the backward cell from the end of the window down to the entity token, then
concatenates the two states taken at the entity position.  The plain variant
runs both cells over the whole window and concatenates the final states.

Both variants are batched: all windows step through the cells together, and
each row's state is picked out at its own stop position with a 0/1 mask, so
padding past a row's stop position never reaches the output.
"""

import numpy as np

from . import autodiff as ad
from .corpus import PAD
from .errors import ShapeError

GATES = ("i", "f", "o", "g")
DIRECTIONS = ("fw", "bw")


def init_encoder_params(d_embed, d_ce, rng, prefix="enc"):
    """Fresh LSTM weights for both directions.

    Weights are uniform in [-0.08, 0.08]; biases start at zero except the
    forget gate's, which starts at 1.0 so early training does not wipe the
    cell state.
    """
    if d_ce % 2 != 0:
        raise ShapeError(f"d_ce must be even, got {d_ce}")
    d_h = d_ce // 2
    params = {}
    for direction in DIRECTIONS:
        for gate in GATES:
            key = f"{prefix}.{direction}"
            params[f"{key}.Wx_{gate}"] = rng.uniform(-0.08, 0.08, size=(d_embed, d_h))
            params[f"{key}.Wh_{gate}"] = rng.uniform(-0.08, 0.08, size=(d_h, d_h))
            bias = np.zeros((1, d_h))
            if gate == "f":
                bias += 1.0
            params[f"{key}.b_{gate}"] = bias
    return params


def encoder_dims(params, prefix="enc"):
    """(d_embed, d_ce) recovered from the parameter shapes."""
    wx = params[f"{prefix}.fw.Wx_i"]
    shape = wx.shape if not isinstance(wx, ad.Var) else wx.value.shape
    return shape[0], 2 * shape[1]


def _step(P, x, h, c):
    """One LSTM step. P maps gate names to (Wx, Wh, b); x, h, c are (B, *)."""
    i = ad.sigmoid(ad.matmul(x, P["Wx_i"]) + ad.matmul(h, P["Wh_i"]) + P["b_i"])
    f = ad.sigmoid(ad.matmul(x, P["Wx_f"]) + ad.matmul(h, P["Wh_f"]) + P["b_f"])
    o = ad.sigmoid(ad.matmul(x, P["Wx_o"]) + ad.matmul(h, P["Wh_o"]) + P["b_o"])
    g = ad.tanh(ad.matmul(x, P["Wx_g"]) + ad.matmul(h, P["Wh_g"]) + P["b_g"])
    c = f * c + i * g
    h = o * ad.tanh(c)
    return h, c


def _direction_params(params, prefix, direction):
    out = {}
    for gate in GATES:
        for part in ("Wx", "Wh", "b"):
            out[f"{part}_{gate}"] = params[f"{prefix}.{direction}.{part}_{gate}"]
    return out


def _run(P, embed_col, ids, select_idx, d_h):
    """Run one direction over the id matrix and pick each row's state.

    ids is (B, L) with PAD fill; row b's state is taken at step select_idx[b].
    Steps past a row's own stop index cannot influence its selected state, so
    the loop only runs to max(select_idx).
    """
    B = ids.shape[0]
    n_steps = int(select_idx.max()) + 1
    h = ad.Var(np.zeros((B, d_h)))
    c = ad.Var(np.zeros((B, d_h)))
    selected = None
    for t in range(n_steps):
        h, c = _step(P, embed_col(ids[:, t]), h, c)
        mask = (select_idx == t).astype(float).reshape(B, 1)
        if mask.any():
            picked = h * mask
            selected = picked if selected is None else selected + picked
    return selected


def _id_matrix(windows):
    B = len(windows)
    L = max(len(w) for w in windows)
    ids = np.full((B, L), PAD, dtype=np.intp)
    rev = np.full((B, L), PAD, dtype=np.intp)
    for b, w in enumerate(windows):
        ids[b, :len(w)] = w.token_ids
        rev[b, :len(w)] = w.token_ids[::-1]
    return ids, rev


def encode_batch_vars(windows, params, emb, variant="anchored", prefix="enc"):
    """Encode a batch of ContextWindows into a (B, d_CE) Var.

    `params` maps names to Vars (training) or arrays (inference); `emb` is the
    (vocab, d_embed) embedding matrix, again Var or array.  variant is
    "anchored" (stop each direction at the entity token) or "bilstm" (run to
    the ends and keep the final states).
    """
    if variant not in ("anchored", "bilstm"):
        raise ValueError(f"unknown encoder variant {variant!r}")
    _, d_ce = encoder_dims(params, prefix)
    d_h = d_ce // 2
    if not windows:
        return ad.Var(np.zeros((0, d_ce)))

    lengths = np.array([len(w) for w in windows], dtype=np.intp)
    t_e = np.array([w.entity_pos for w in windows], dtype=np.intp)
    ids, rev_ids = _id_matrix(windows)

    if isinstance(emb, ad.Var):
        embed_col = lambda col: ad.take_rows(emb, col)
    else:
        matrix = emb
        embed_col = lambda col: matrix[col]

    if variant == "anchored":
        fw_stop = t_e                  # forward halts on the entity token
        bw_stop = lengths - 1 - t_e    # ditto walking in from the right
    else:
        fw_stop = lengths - 1
        bw_stop = lengths - 1

    fw = _run(_direction_params(params, prefix, "fw"), embed_col, ids, fw_stop, d_h)
    bw = _run(_direction_params(params, prefix, "bw"), embed_col, rev_ids, bw_stop, d_h)
    return ad.concat_cols(fw, bw)


def encode_batch(windows, params, emb, variant="anchored", prefix="enc"):
    """encode_batch_vars for inference: plain (B, d_CE) array out."""
    out = encode_batch_vars(windows, params, emb, variant, prefix)
    return out.value


def encode_anchored(window, params, emb, prefix="enc"):
    """Encode one window with the entity-anchored encoder; returns (d_CE,)."""
    return encode_batch([window], params, emb, "anchored", prefix)[0]


def encode_full(window, params, emb, prefix="enc"):
    """Encode one window with the full-sequence Bi-LSTM; returns (d_CE,)."""
    return encode_batch([window], params, emb, "bilstm", prefix)[0]
