"""Bilateral matching between two sets of encoded contexts.

Given H (P x d_CE) for one entity and G (Q x d_CE) for another, a single
bilinear logit matrix L = H W_BM G^T drives both matching directions: a
softmax down each column gives the H-side match strengths for each g_q, a
softmax along each row gives the G-side strengths for each h_p.  An optional
leaky unit joins each softmax pool as one extra slot so uninformative
contexts can dump their probability mass somewhere harmless; the leak never
participates in aggregation.

Each context's informativeness is its best match strength on the other side;
the global context vector is the informativeness-weighted sum of the context
encodings, and the final score is the cosine of the two global vectors.
"""

import logging
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import DataError, ShapeError

log = logging.getLogger(__name__)


@dataclass
class LeakyUnit:
    """Extra matching slot. vector is (1, d_CE); zero unless trainable."""

    vector: np.ndarray
    mode: str = "fixed-zero"

    def __post_init__(self):
        self.vector = ad.as_matrix(self.vector)
        if self.mode not in ("fixed-zero", "trainable"):
            raise DataError(f"unknown leaky unit mode {self.mode!r}")
        if self.mode == "fixed-zero" and np.any(self.vector != 0.0):
            raise DataError("fixed-zero leaky unit must have an all-zero vector")


def fixed_zero_leaky(d_ce):
    return LeakyUnit(np.zeros((1, d_ce)), "fixed-zero")


@dataclass
class MatchResult:
    m_fwd: np.ndarray           # (P, Q), column p-softmax, leak slot removed
    m_bwd: np.ndarray           # (P, Q), row q-softmax, leak slot removed
    leak_fwd: np.ndarray        # (Q,) leak share per column; zeros when no leaky
    leak_bwd: np.ndarray        # (P,) leak share per row
    a_h: np.ndarray = None      # (P,) informativeness of each h_p
    a_g: np.ndarray = None      # (Q,)
    h_bar: np.ndarray = None    # (d_CE,) global context for H
    g_bar: np.ndarray = None
    score: float = None


def _check_dims(H, G, w_bm):
    if H.ndim != 2 or G.ndim != 2 or H.shape[0] < 1 or G.shape[0] < 1:
        raise ShapeError(f"need non-empty context matrices, got {H.shape} and {G.shape}")
    d = H.shape[1]
    if G.shape[1] != d:
        raise ShapeError(f"context dims differ: {H.shape} vs {G.shape}")
    if w_bm.shape != (d, d):
        raise ShapeError(f"bilinear matrix is {w_bm.shape}, expected {(d, d)}")


def bilateral_match(H, G, w_bm, leaky=None):
    """Match two context sets; returns a MatchResult with the m-fields filled."""
    H = np.asarray(H, dtype=float)
    G = np.asarray(G, dtype=float)
    w_bm = np.asarray(w_bm, dtype=float)
    _check_dims(H, G, w_bm)
    P, Q = H.shape[0], G.shape[0]
    L = H @ w_bm @ G.T
    if leaky is None:
        m_fwd = ad.softmax_cols(L)
        m_bwd = ad.softmax_rows(L)
        return MatchResult(m_fwd, m_bwd, np.zeros(Q), np.zeros(P))
    l = leaky.vector
    leak_row = l @ w_bm @ G.T               # (1, Q) logits of the leak slot
    leak_col = H @ w_bm @ l.T               # (P, 1)
    fwd = ad.softmax_cols(np.concatenate([L, leak_row], axis=0))
    bwd = ad.softmax_rows(np.concatenate([L, leak_col], axis=1))
    return MatchResult(fwd[:P], bwd[:, :Q], fwd[P], bwd[:, Q])


def aggregate(result, H, G):
    """Fill informativeness weights and global context vectors in place.

    A context's weight is its strongest match on the other side; the weights
    are used as-is, with no renormalisation, and the leak shares never enter.
    """
    H = np.asarray(H, dtype=float)
    G = np.asarray(G, dtype=float)
    result.a_h = result.m_bwd.max(axis=1)
    result.a_g = result.m_fwd.max(axis=0)
    result.h_bar = result.a_h @ H
    result.g_bar = result.a_g @ G
    return result


def score(result):
    """Cosine similarity of the two global context vectors; fills result.score."""
    nh = np.linalg.norm(result.h_bar)
    ng = np.linalg.norm(result.g_bar)
    if nh == 0.0 or ng == 0.0:
        log.warning("zero-norm global context; score set to 0")
        result.score = 0.0
    else:
        raw = float(result.h_bar @ result.g_bar / (nh * ng))
        result.score = min(1.0, max(-1.0, raw))  # keep rounding inside [-1, 1]
    return result.score


def match_score(H, G, w_bm, leaky=None):
    """Full pipeline: match, aggregate, score. Returns a complete MatchResult."""
    result = bilateral_match(H, G, w_bm, leaky)
    aggregate(result, H, G)
    score(result)
    return result


# ---------------------------------------------------------------------------
# autodiff path used during training

def match_vars(Hv, Gv, wv, leak=None):
    """Var version of bilateral_match.

    leak is None, the string "zero" (fixed-zero unit: its bilinear logits are
    exactly zero, so a constant zero row/column is the same computation), or
    a (1, d_CE) Var for the trainable unit.  Returns (m_fwd, m_bwd) with the
    leak slot already removed.
    """
    L = ad.matmul(ad.matmul(Hv, wv), ad.transpose(Gv))
    P, Q = L.shape
    if leak is None:
        return ad.softmax_cols(L), ad.softmax_rows(L)
    if isinstance(leak, ad.Var):
        leak_row = ad.matmul(ad.matmul(leak, wv), ad.transpose(Gv))
        leak_col = ad.matmul(ad.matmul(Hv, wv), ad.transpose(leak))
    elif leak == "zero":
        leak_row = ad.Var(np.zeros((1, Q)))
        leak_col = ad.Var(np.zeros((P, 1)))
    else:
        raise ValueError(f"bad leak argument {leak!r}")
    fwd = ad.softmax_cols(ad.concat_rows(L, leak_row))
    bwd = ad.softmax_rows(ad.concat_cols(L, leak_col))
    return ad.rows(fwd, 0, P), ad.cols(bwd, 0, Q)


def cosine_var(u, v):
    """Cosine of two (1, d) Vars."""
    dot = ad.sum_all(u * v)
    nu = ad.sqrt(ad.sum_all(ad.square(u)))
    nv = ad.sqrt(ad.sum_all(ad.square(v)))
    return ad.div(dot, nu * nv)


def pair_score_vars(Hv, Gv, wv, leak=None):
    """Differentiable match-aggregate-score for one entity pair."""
    m_fwd, m_bwd = match_vars(Hv, Gv, wv, leak)
    a_h = ad.max_axis(m_bwd, axis=1)            # (P, 1)
    a_g = ad.max_axis(m_fwd, axis=0)            # (1, Q)
    h_bar = ad.matmul(ad.transpose(a_h), Hv)    # (1, d)
    g_bar = ad.matmul(a_g, Gv)
    return cosine_var(h_bar, g_bar)
