"""Anchor/non-anchor tallies and the global aggregation functions.

Counts are array-backed over a fixed vocabulary so the anytime driver can
rescore every candidate after each document in one vectorized pass. The
aggregation kinds:

- ``sq``: square root of the anchor count.
- ``av``: anchor count over total occurrences (optionally excluding words
  below a frequency bar).
- ``h``: ``sq`` damped by the entropy of the word's per-class anchor profile.
- ``pr``: maximum-likelihood anchor-emission probability of a two-source
  generative mixture, Laplace-smoothed to a proper distribution.
- ``base``: class share of the documents containing the word (no anchors).
- ``pr_inverse``: reciprocal of ``pr``, a sanity-check baseline.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from .anchor import AnchorDecision
from .corpus import WordStats

__all__ = [
    "AnchorCounts",
    "ProbModelParams",
    "update_counts",
    "g_sq",
    "g_av",
    "g_h",
    "g_pr",
    "g_base",
    "g_pr_inverse",
    "mle_params",
    "laplace_smooth",
    "log_likelihood",
    "Aggregation",
    "make_aggregation",
    "AGGREGATION_KINDS",
    "rank_words",
    "dump_scores",
]


class AnchorCounts:
    """Per-(word, class) anchor and non-anchor occurrence tallies.

    Array-backed over a fixed, sorted vocabulary. Documents are ingested
    once each; the per-class document counter tracks how many documents of
    each class have been processed so far.
    """

    def __init__(self, vocabulary: Iterable[str], classes: Sequence[str]):
        self.words: tuple[str, ...] = tuple(sorted(set(vocabulary)))
        if not self.words:
            raise ValueError("empty vocabulary")
        self.index: dict[str, int] = {w: i for i, w in enumerate(self.words)}
        self.classes: tuple[str, ...] = tuple(classes)
        size = len(self.words)
        self.a_plus: dict[str, np.ndarray] = {
            c: np.zeros(size, dtype=np.int64) for c in self.classes}
        self.a_minus: dict[str, np.ndarray] = {
            c: np.zeros(size, dtype=np.int64) for c in self.classes}
        self.docs_processed: dict[str, int] = {c: 0 for c in self.classes}
        self._ingested: set[str] = set()

    def plus(self, word: str, c: str) -> int:
        return int(self.a_plus[c][self.index[word]])

    def minus(self, word: str, c: str) -> int:
        return int(self.a_minus[c][self.index[word]])

    def total_plus(self, c: str) -> int:
        return int(self.a_plus[c].sum())

    def total_minus(self, c: str) -> int:
        return int(self.a_minus[c].sum())

    def seen_mask(self, c: str) -> np.ndarray:
        """Words observed so far in processed documents of class c."""
        return (self.a_plus[c] + self.a_minus[c]) > 0

    def ingest(self, decisions: Sequence[AnchorDecision], c: str, doc_id: str) -> None:
        if doc_id in self._ingested:
            raise ValueError(f"document {doc_id!r} already ingested")
        if c not in self.a_plus:
            raise ValueError(f"unknown class {c!r}")
        plus, minus = self.a_plus[c], self.a_minus[c]
        for decision in decisions:
            j = self.index.get(decision.token.word)
            if j is None:
                raise ValueError(f"word {decision.token.word!r} outside vocabulary")
            if decision.is_anchor:
                plus[j] += 1
            else:
                minus[j] += 1
        self._ingested.add(doc_id)
        self.docs_processed[c] += 1


def update_counts(counts: AnchorCounts, decisions: Sequence[AnchorDecision],
                  c: str, doc_id: str) -> AnchorCounts:
    """Tally one document's decisions into the counts (in place)."""
    counts.ingest(decisions, c, doc_id)
    return counts


# -- probabilistic model ----------------------------------------------------


@dataclass(frozen=True)
class ProbModelParams:
    """Closed-form estimates of the two-source generative mixture.

    ``q_raw`` is the anchor-source estimate, which may dip below zero;
    ``q_star`` is its Laplace-smoothed version (a proper distribution that
    preserves the raw ordering). ``p`` is the background source.
    """

    alpha: float
    words: tuple[str, ...]
    p: dict[str, float]
    q_raw: dict[str, float]
    q_star: dict[str, float]
    q_min: float


def _q_raw_vector(a_plus: np.ndarray, a_minus: np.ndarray, alpha: float
                  ) -> tuple[np.ndarray, np.ndarray]:
    """Raw estimates (q, p) over the given count vectors; totals must be > 0."""
    total_plus = a_plus.sum()
    total_minus = a_minus.sum()
    if total_plus <= 0 or total_minus <= 0:
        raise ValueError("model undefined: both anchor and non-anchor totals "
                         "must be positive")
    p = a_minus / total_minus
    q = (1.0 / alpha) * (a_plus / total_plus) - (1.0 / alpha - 1.0) * p
    return q, p


def _smooth_vector(q: np.ndarray) -> tuple[np.ndarray, float]:
    """Additive shift by |min| then renormalize; identity when min >= 0."""
    q_min = float(q.min())
    if q_min >= 0:
        return q.copy(), q_min
    beta = abs(q_min)
    return (q + beta) / (1.0 + q.size * beta), q_min


def mle_params(counts: AnchorCounts, alpha: float, c: str) -> ProbModelParams:
    """Mixture estimates for class c over the words seen in that class."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha out of (0, 1]: {alpha}")
    seen = counts.seen_mask(c)
    if not seen.any():
        raise ValueError(f"no processed occurrences for class {c!r}")
    words = tuple(w for w, keep in zip(counts.words, seen) if keep)
    q, p = _q_raw_vector(counts.a_plus[c][seen], counts.a_minus[c][seen], alpha)
    q_star, q_min = _smooth_vector(q)
    return ProbModelParams(
        alpha=alpha,
        words=words,
        p=dict(zip(words, p.tolist())),
        q_raw=dict(zip(words, q.tolist())),
        q_star=dict(zip(words, q_star.tolist())),
        q_min=q_min,
    )


def laplace_smooth(params: ProbModelParams) -> ProbModelParams:
    """Return params with ``q_star`` recomputed from ``q_raw``.

    ``mle_params`` already smooths; this entry point exists so the smoothing
    step can be applied (and tested) in isolation.
    """
    q = np.asarray([params.q_raw[w] for w in params.words])
    q_star, q_min = _smooth_vector(q)
    return ProbModelParams(
        alpha=params.alpha, words=params.words, p=params.p,
        q_raw=params.q_raw, q_star=dict(zip(params.words, q_star.tolist())),
        q_min=q_min,
    )


def log_likelihood(a_plus: Mapping[str, int] | Sequence[int],
                   a_minus: Mapping[str, int] | Sequence[int],
                   alpha: float,
                   q: Mapping[str, float] | Sequence[float],
                   p: Mapping[str, float] | Sequence[float]) -> float:
    """Log-probability of the observed tallies under the generative mixture.

    sum_w  A+(w) * log(alpha*q(w) + (1-alpha)*p(w)) + A-(w) * log p(w),
    with -inf when a positively-counted term has zero probability.
    """
    if isinstance(a_plus, Mapping):
        keys = sorted(a_plus)
        ap = np.asarray([a_plus[k] for k in keys], dtype=np.float64)
        am = np.asarray([a_minus[k] for k in keys], dtype=np.float64)
        qv = np.asarray([q[k] for k in keys], dtype=np.float64)
        pv = np.asarray([p[k] for k in keys], dtype=np.float64)
    else:
        ap = np.asarray(a_plus, dtype=np.float64)
        am = np.asarray(a_minus, dtype=np.float64)
        qv = np.asarray(q, dtype=np.float64)
        pv = np.asarray(p, dtype=np.float64)
    mix = alpha * qv + (1.0 - alpha) * pv
    total = 0.0
    for count, prob in ((ap, mix), (am, pv)):
        active = count > 0
        if np.any(prob[active] <= 0):
            return -math.inf
        total += float(np.sum(count[active] * np.log(prob[active])))
    return total


# -- scalar aggregation functions -------------------------------------------


def g_sq(counts: AnchorCounts, word: str, c: str) -> float:
    return math.sqrt(counts.plus(word, c))


def g_av(counts: AnchorCounts, word: str, c: str,
         min_freq: int | None = None, stats: WordStats | None = None) -> float | None:
    """Anchor share of the word's occurrences; None when excluded/unseen."""
    if min_freq is not None:
        if stats is None:
            raise ValueError("min_freq filtering requires word statistics")
        if stats.n_w(word) < min_freq:
            return None
    plus = counts.plus(word, c)
    minus = counts.minus(word, c)
    if plus + minus == 0:
        return None
    return plus / (plus + minus)


def _entropy_rows(gsq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-word entropy of the class profile; defined where the row sum > 0."""
    rowsum = gsq.sum(axis=1)
    defined = rowsum > 0
    h = np.zeros(gsq.shape[0])
    if defined.any():
        share = gsq[defined] / rowsum[defined, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(share > 0, share * np.log(share), 0.0)
        h[defined] = -terms.sum(axis=1)
    return h, defined


def g_h(counts: AnchorCounts, word: str, c: str,
        words: Iterable[str] | None = None) -> float | None:
    """Entropy-damped square-root score.

    The entropy normalization range is computed across ``words`` (defaults
    to the whole vocabulary of the counts); when the range degenerates the
    damping factor is 1 so single-class tasks still score.
    """
    scored = tuple(words) if words is not None else counts.words
    idx = np.asarray([counts.index[w] for w in scored], dtype=np.intp)
    gsq = np.sqrt(np.column_stack([counts.a_plus[cc][idx] for cc in counts.classes]))
    h, defined = _entropy_rows(gsq)
    pos = list(scored).index(word) if word in scored else None
    if pos is None or not defined[pos]:
        return None
    h_def = h[defined]
    h_min, h_max = float(h_def.min()), float(h_def.max())
    if h_max == h_min:
        factor = 1.0
    else:
        factor = 1.0 - (h[pos] - h_min) / (h_max - h_min)
    return factor * float(gsq[pos, counts.classes.index(c)])


def g_pr(counts: AnchorCounts, alpha: float, word: str, c: str) -> float | None:
    """Smoothed anchor-emission probability; None when the model is undefined."""
    try:
        params = mle_params(counts, alpha, c)
    except ValueError:
        return None
    return params.q_star.get(word)


def g_base(stats: WordStats, word: str, c: str) -> float:
    """Share of the word's containing documents that belong to class c."""
    total = stats.doc_freq_total.get(word, 0)
    if total == 0:
        raise ValueError(f"word {word!r} does not occur in any document")
    return stats.doc_freq_class[c].get(word, 0) / total


def g_pr_inverse(counts: AnchorCounts, alpha: float, word: str, c: str) -> float | None:
    """Reciprocal of the probabilistic score; zero-score words are excluded."""
    score = g_pr(counts, alpha, word, c)
    if score is None or score == 0.0:
        return None
    return 1.0 / score


# -- aggregation kinds for the anytime driver --------------------------------


class Aggregation:
    """A named aggregation with vectorized scoring over a counts table.

    ``rank_values`` returns one value per word of the counts vocabulary with
    NaN marking words excluded from ranking; undefined-but-rankable scores
    fall back to 0 so a ranking always exists. ``upper_bounds`` evaluates
    the same aggregation under the optimistic assumption that each word's
    remaining occurrences all land as anchors (other words unchanged); where
    nothing remains the bound equals the current rank value.
    """

    name: str
    needs_anchors: bool = True
    filterable: bool = True

    def __init__(self, stats: WordStats | None = None):
        self.stats = stats

    def rank_values(self, counts: AnchorCounts, c: str) -> np.ndarray:
        raise NotImplementedError

    def _raw_bounds(self, counts: AnchorCounts, c: str,
                    remaining: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def upper_bounds(self, counts: AnchorCounts, c: str,
                     remaining: np.ndarray) -> np.ndarray:
        bounds = self._raw_bounds(counts, c, remaining)
        current = self.rank_values(counts, c)
        return np.where(remaining == 0, current, bounds)

    def params(self) -> dict:
        return {}

    def describe(self) -> str:
        extra = self.params()
        if not extra:
            return self.name
        return self.name + "(" + ", ".join(f"{k}={v}" for k, v in sorted(extra.items())) + ")"


class GSq(Aggregation):
    name = "sq"

    def rank_values(self, counts, c):
        return np.sqrt(counts.a_plus[c].astype(np.float64))

    def _raw_bounds(self, counts, c, remaining):
        return np.sqrt((counts.a_plus[c] + remaining).astype(np.float64))


class GAv(Aggregation):

    def __init__(self, stats: WordStats | None = None, min_freq: int | None = None):
        super().__init__(stats)
        self.min_freq = min_freq
        self._excluded_cache: tuple[int, np.ndarray] | None = None

    @property
    def name(self):  # type: ignore[override]
        return "av" if self.min_freq is None else "av_minfreq"

    def _excluded(self, counts) -> np.ndarray | None:
        if self.min_freq is None:
            return None
        if self.stats is None:
            raise ValueError("min_freq filtering requires word statistics")
        if self._excluded_cache is None or self._excluded_cache[0] != id(counts):
            freq = np.asarray([self.stats.n_w(w) for w in counts.words])
            self._excluded_cache = (id(counts), freq < self.min_freq)
        return self._excluded_cache[1]

    def rank_values(self, counts, c):
        plus = counts.a_plus[c].astype(np.float64)
        denom = plus + counts.a_minus[c]
        with np.errstate(divide="ignore", invalid="ignore"):
            values = np.where(denom > 0, plus / np.maximum(denom, 1), 0.0)
        excluded = self._excluded(counts)
        if excluded is not None:
            values = np.where(excluded, np.nan, values)
        return values

    def _raw_bounds(self, counts, c, remaining):
        plus = (counts.a_plus[c] + remaining).astype(np.float64)
        denom = plus + counts.a_minus[c]
        with np.errstate(divide="ignore", invalid="ignore"):
            values = np.where(denom > 0, plus / np.maximum(denom, 1), 0.0)
        excluded = self._excluded(counts)
        if excluded is not None:
            values = np.where(excluded, np.nan, values)
        return values

    def params(self):
        return {} if self.min_freq is None else {"min_freq": self.min_freq}


class GH(Aggregation):
    name = "h"

    def _gsq_matrix(self, counts) -> np.ndarray:
        return np.sqrt(np.column_stack(
            [counts.a_plus[c] for c in counts.classes]).astype(np.float64))

    def rank_values(self, counts, c):
        gsq = self._gsq_matrix(counts)
        h, defined = _entropy_rows(gsq)
        col = counts.classes.index(c)
        values = np.zeros(len(counts.words))
        if defined.any():
            h_def = h[defined]
            h_min, h_max = float(h_def.min()), float(h_def.max())
            if h_max == h_min:
                factor = np.ones_like(h)
            else:
                factor = 1.0 - (h - h_min) / (h_max - h_min)
            values = np.where(defined, factor * gsq[:, col], 0.0)
        return values

    def _raw_bounds(self, counts, c, remaining):
        gsq = self._gsq_matrix(counts)
        col = counts.classes.index(c)
        h, defined = _entropy_rows(gsq)
        boosted = gsq.copy()
        boosted[:, col] = np.sqrt((counts.a_plus[c] + remaining).astype(np.float64))
        h_new, defined_new = _entropy_rows(boosted)
        if defined.any():
            h_def = h[defined]
            h_min, h_max = float(h_def.min()), float(h_def.max())
        else:
            h_min = h_max = 0.0
        if h_max == h_min:
            factor = np.ones(len(counts.words))
        else:
            factor = 1.0 - np.clip((h_new - h_min) / (h_max - h_min), 0.0, 1.0)
        return np.where(defined_new, factor * boosted[:, col], 0.0)


class GPr(Aggregation):
    name = "pr"

    def __init__(self, stats: WordStats | None = None, alpha: float = 0.5):
        super().__init__(stats)
        if not 0.0 < alpha <= 1.0:
            raise ValueError(f"alpha out of (0, 1]: {alpha}")
        self.alpha = alpha

    def _model(self, counts, c):
        """(q_star over full vocab, beta, n_seen, totals) or None if undefined."""
        seen = counts.seen_mask(c)
        total_plus = int(counts.a_plus[c].sum())
        total_minus = int(counts.a_minus[c].sum())
        if total_plus == 0 or total_minus == 0:
            return None
        q, _ = _q_raw_vector(counts.a_plus[c][seen], counts.a_minus[c][seen],
                             self.alpha)
        q_star_seen, q_min = _smooth_vector(q)
        q_star = np.zeros(len(counts.words))
        q_star[seen] = q_star_seen
        beta = abs(q_min) if q_min < 0 else 0.0
        return q_star, beta, int(seen.sum()), total_plus, total_minus, seen

    def rank_values(self, counts, c):
        model = self._model(counts, c)
        if model is None:
            return np.zeros(len(counts.words))
        q_star, _, _, _, _, seen = model
        return np.where(seen, q_star, 0.0)

    def _raw_bounds(self, counts, c, remaining):
        # Optimistic raw estimate with the word's remaining occurrences all
        # anchors (its own numerator and the anchor total both grow), mapped
        # through the current table's smoothing so the comparison against the
        # current k-th pseudo-score is order-consistent.
        model = self._model(counts, c)
        if model is None:
            return np.full(len(counts.words), np.inf)
        _, beta, n_seen, total_plus, total_minus, _ = model
        plus = counts.a_plus[c].astype(np.float64)
        minus = counts.a_minus[c].astype(np.float64)
        boosted_plus = plus + remaining
        boosted_total = total_plus + remaining
        inv_alpha = 1.0 / self.alpha
        with np.errstate(divide="ignore", invalid="ignore"):
            q = inv_alpha * boosted_plus / boosted_total \
                - (inv_alpha - 1.0) * minus / total_minus
        return (q + beta) / (1.0 + n_seen * beta)

    def params(self):
        return {"alpha": self.alpha}


class GBase(Aggregation):
    name = "base"
    needs_anchors = False

    def __init__(self, stats: WordStats | None = None):
        super().__init__(stats)
        self._cache: tuple[int, str, np.ndarray] | None = None

    def rank_values(self, counts, c):
        if self.stats is None:
            raise ValueError("base aggregation requires word statistics")
        if self._cache is not None and self._cache[:2] == (id(counts), c):
            return self._cache[2]
        df_class = self.stats.doc_freq_class[c]
        values = np.empty(len(counts.words))
        for i, w in enumerate(counts.words):
            total = self.stats.doc_freq_total.get(w, 0)
            values[i] = df_class.get(w, 0) / total if total else np.nan
        self._cache = (id(counts), c, values)
        return values

    def _raw_bounds(self, counts, c, remaining):
        return self.rank_values(counts, c)


class GPrInverse(GPr):
    name = "pr_inverse"
    filterable = False

    def rank_values(self, counts, c):
        model = self._model(counts, c)
        if model is None:
            return np.full(len(counts.words), np.nan)
        q_star, _, _, _, _, seen = model
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = np.where(seen & (q_star > 0), 1.0 / np.maximum(q_star, 1e-300), np.nan)
        return inv

    def _raw_bounds(self, counts, c, remaining):
        # Assuming remaining occurrences are anchors is not optimistic for an
        # inverse score, so this kind opts out of candidate filtering.
        return np.full(len(counts.words), np.inf)


AGGREGATION_KINDS = ("sq", "av", "av_minfreq", "h", "pr", "base", "pr_inverse")


def make_aggregation(kind: str, *, stats: WordStats | None = None,
                     alpha: float = 0.5, min_freq: int = 5) -> Aggregation:
    """Build an aggregation by name; parameters apply where the kind uses them."""
    if kind == "sq":
        return GSq(stats)
    if kind == "av":
        return GAv(stats)
    if kind == "av_minfreq":
        return GAv(stats, min_freq=min_freq)
    if kind == "h":
        return GH(stats)
    if kind == "pr":
        return GPr(stats, alpha=alpha)
    if kind == "base":
        return GBase(stats)
    if kind == "pr_inverse":
        return GPrInverse(stats, alpha=alpha)
    raise ValueError(f"unknown aggregation kind {kind!r} "
                     f"(expected one of {AGGREGATION_KINDS})")


def rank_words(words: Sequence[str], values: np.ndarray, k: int | None = None
               ) -> list[tuple[str, float]]:
    """Top-k (word, score) pairs by descending score, ties lexicographic.

    NaN values mark excluded words and never rank.
    """
    scored = [(w, float(v)) for w, v in zip(words, values) if not math.isnan(v)]
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored if k is None else scored[:k]


def dump_scores(handle: IO[str], counts: AnchorCounts, c: str,
                aggregation: Aggregation,
                words: Sequence[str] | None = None) -> int:
    """Write one JSONL row per scored word; returns the number of rows."""
    values = aggregation.rank_values(counts, c)
    chosen = set(words) if words is not None else None
    rows = 0
    for i, word in enumerate(counts.words):
        if chosen is not None and word not in chosen:
            continue
        value = values[i]
        row = {
            "word": word,
            "class": c,
            "a_plus": int(counts.a_plus[c][i]),
            "a_minus": int(counts.a_minus[c][i]),
            "score": None if math.isnan(value) else float(value),
            "agg": aggregation.describe(),
        }
        handle.write(json.dumps(row) + "\n")
        rows += 1
    return rows
