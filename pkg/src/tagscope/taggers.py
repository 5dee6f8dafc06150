"""The nine tagger variants over a shared embedding/LSTM/CRF core.

Word-only systems: a case-preserving lookup table and a per-token logistic
regression over the word vector.  CRF-headed systems vary the feature fed to
the emission layer: the raw word vector (fixed or fine-tuned), forward /
backward / bidirectional context-only LSTM states that exclude the current
word, the standard BiLSTM state, and a gated combination of a projected
word vector with the context-only vector.

All gradients are hand-derived and validated by finite differences; training
is per-sentence SGD with per-epoch shuffling driven by the run seed.
"""
from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.special import expit as sigmoid

from . import crf as crfmod
from .corpus import Corpus, LabelSet, Sentence, OUTSIDE
from .embeddings import EmbeddingTable
from .nn import (DimensionMismatch, GradCheckReport, LstmParams, ParamTensor,
                 RngState, dropout_mask, grad_check, init_lstm, init_params,
                 log_softmax, lstm_forward, lstm_backward, sgd_step, softmax,
                 zero_grads)

ARCH_LOOKUP = "lookup"
ARCH_LOGREG = "logreg"
ARCH_WORD_FIXED = "word-fixed-crf"
ARCH_WORD_TUNED = "word-tuned-crf"
ARCH_FW_CONTEXT = "fw-context-crf"
ARCH_BW_CONTEXT = "bw-context-crf"
ARCH_BI_CONTEXT = "bi-context-crf"
ARCH_FULL = "full-bilstm-crf"
ARCH_GATED = "gated-bilstm-crf"

ARCHITECTURES = (ARCH_LOOKUP, ARCH_LOGREG, ARCH_WORD_FIXED, ARCH_WORD_TUNED,
                 ARCH_FW_CONTEXT, ARCH_BW_CONTEXT, ARCH_BI_CONTEXT, ARCH_FULL,
                 ARCH_GATED)
TRAINABLE_ARCHITECTURES = ARCHITECTURES[1:]

_NEEDS_FW = {ARCH_FW_CONTEXT, ARCH_BI_CONTEXT, ARCH_FULL, ARCH_GATED}
_NEEDS_BW = {ARCH_BW_CONTEXT, ARCH_BI_CONTEXT, ARCH_FULL, ARCH_GATED}


class TaggerError(Exception):
    pass


class EmptyCorpus(TaggerError):
    pass


class UnsupportedOperation(TaggerError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    """Training defaults: 10 epochs of per-sentence SGD, lr 0.01, weight
    decay 1e-4, dropout 0.5 on the embeddings, LSTM hidden size 100."""

    epochs: int = 10
    lr: float = 0.01
    weight_decay: float = 1e-4
    dropout: float = 0.5
    hidden_dim: int = 100
    embedding_dim: int = 300
    seed: int = 0
    # decay fine-tuned embedding rows only when touched by the current
    # update ("touched"), or decay the whole matrix every step ("all")
    embedding_decay: str = "touched"
    # keep every loaded vector instead of just the training vocabulary
    retain_all_embeddings: bool = False

    def hash(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class VocabSnapshot:
    """Embedding rows for the training vocabulary plus one shared UNK row.

    The UNK row starts as the table average and is the single trainable
    fallback in fine-tuned mode; `mask_vector` keeps a frozen copy of the
    load-time average for masked inference.
    """

    index: dict[str, int]
    matrix: ParamTensor  # (V + 1, dim); last row = UNK
    mask_vector: np.ndarray

    @property
    def unk_row(self) -> int:
        return self.matrix.values.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.matrix.values.shape[1]

    def row(self, surface: str) -> int:
        return self.index.get(surface, self.unk_row)


def build_vocab_snapshot(corpus: Corpus, table: EmbeddingTable, *,
                         trainable: bool, config: TrainConfig) -> VocabSnapshot:
    if config.retain_all_embeddings:
        words = sorted(table.vectors)
    else:
        seen = {tok.surface for sent in corpus for tok in sent.tokens}
        words = sorted(w for w in seen if w in table.vectors)
    rows = [table.vectors[w] for w in words] + [table.average]
    matrix = ParamTensor("embeddings", np.stack(rows), trainable=trainable,
                         decay=True, sparse_decay=(config.embedding_decay == "touched"))
    return VocabSnapshot(index={w: i for i, w in enumerate(words)},
                         matrix=matrix,
                         mask_vector=np.array(table.average, dtype=np.float64))


@dataclass
class GatedParams:
    """Word projection plus the two scalar gate maps over [x_w; x_c]."""

    w_w: ParamTensor   # (d_wc, emb_dim)
    w_gw: ParamTensor  # (2 * d_wc,)
    w_gc: ParamTensor  # (2 * d_wc,)

    def tensors(self) -> list[ParamTensor]:
        return [self.w_w, self.w_gw, self.w_gc]


def gated_combine(x_w: np.ndarray, x_c: np.ndarray,
                  gparams: GatedParams) -> tuple[np.ndarray, float, float]:
    """Combine word and context vectors with scalar sigmoid gates:
    g_w = sigma(w_gw . [x_w; x_c]), g_c likewise, x_wc = g_w*x_w + g_c*x_c."""
    if x_w.shape != x_c.shape:
        raise DimensionMismatch(f"x_w {x_w.shape} != x_c {x_c.shape}")
    cat = np.concatenate([x_w, x_c])
    if cat.shape != gparams.w_gw.values.shape:
        raise DimensionMismatch(f"gate input {cat.shape} != {gparams.w_gw.values.shape}")
    g_w = float(sigmoid(gparams.w_gw.values @ cat))
    g_c = float(sigmoid(gparams.w_gc.values @ cat))
    return g_w * x_w + g_c * x_c, g_w, g_c


class LookupTagger:
    """Most-frequent-tag table; ties and unseen words resolve to O."""

    arch = ARCH_LOOKUP

    def __init__(self, label_set: LabelSet, table: dict[str, str],
                 config: TrainConfig | None = None):
        self.label_set = label_set
        self.table = dict(table)
        self.config = config or TrainConfig()

    def predict_tags(self, sentence: Sentence,
                     mask_position: int | None = None) -> tuple[list[str], None]:
        if mask_position is not None:
            raise UnsupportedOperation("lookup tagger has no embeddings to mask")
        return [self.table.get(tok.surface, OUTSIDE) for tok in sentence.tokens], None

    def trainable_params(self) -> list[ParamTensor]:
        return []


def lookup_train(corpus: Corpus, config: TrainConfig | None = None) -> LookupTagger:
    """Count (surface, gold) frequencies; keep the strict most-frequent tag."""
    if len(corpus) == 0:
        raise EmptyCorpus("lookup training needs at least one sentence")
    counts: dict[str, dict[str, int]] = {}
    for sent in corpus:
        for tok, tag in zip(sent.tokens, sent.gold):
            per = counts.setdefault(tok.surface, {})
            per[tag] = per.get(tag, 0) + 1
    table = {}
    for surface, per in counts.items():
        best = max(per.values())
        winners = [tag for tag, c in per.items() if c == best]
        table[surface] = winners[0] if len(winners) == 1 else OUTSIDE
    assert corpus.label_set is not None
    return LookupTagger(corpus.label_set, table, config)


@dataclass
class _FeatureCache:
    xs: np.ndarray
    fw_cache: object = None
    bw_cache: object = None
    hs_fw: np.ndarray | None = None
    hs_bw: np.ndarray | None = None  # aligned to original positions
    x_w: np.ndarray | None = None
    x_c: np.ndarray | None = None
    cat: np.ndarray | None = None
    g_w: np.ndarray | None = None
    g_c: np.ndarray | None = None


class SequenceTagger:
    """Gradient-trained tagger; the architecture picks the feature extractor."""

    def __init__(self, arch: str, label_set: LabelSet, config: TrainConfig,
                 vocab: VocabSnapshot, rng: RngState):
        if arch not in TRAINABLE_ARCHITECTURES:
            raise ValueError(f"unknown architecture: {arch}")
        self.arch = arch
        self.label_set = label_set
        self.config = config
        self.vocab = vocab
        dim = vocab.dim
        hidden = config.hidden_dim
        self.lstm_fw: LstmParams | None = None
        self.lstm_bw: LstmParams | None = None
        self.gated: GatedParams | None = None
        if arch in _NEEDS_FW:
            self.lstm_fw = init_lstm("lstm_fw", dim, hidden, rng)
        if arch in _NEEDS_BW:
            self.lstm_bw = init_lstm("lstm_bw", dim, hidden, rng)
        if arch == ARCH_GATED:
            d_wc = 2 * hidden  # d_w == d_c, required by x_wc = g_w*x_w + g_c*x_c
            self.gated = GatedParams(
                w_w=init_params("gated.w_w", (d_wc, dim), rng),
                w_gw=init_params("gated.w_gw", (2 * d_wc,), rng),
                w_gc=init_params("gated.w_gc", (2 * d_wc,), rng),
            )
        feat_dim = {ARCH_LOGREG: dim, ARCH_WORD_FIXED: dim, ARCH_WORD_TUNED: dim,
                    ARCH_FW_CONTEXT: hidden, ARCH_BW_CONTEXT: hidden,
                    ARCH_BI_CONTEXT: 2 * hidden, ARCH_FULL: 2 * hidden,
                    ARCH_GATED: 2 * hidden}[arch]
        num_tags = len(label_set)
        self.w_out = init_params("emit.w", (num_tags, feat_dim), rng)
        self.b_out = init_params("emit.b", (num_tags,), rng, kind="bias")
        self.crf = None if arch == ARCH_LOGREG else crfmod.init_crf("crf", num_tags)

    # -- parameter bookkeeping ------------------------------------------------

    def parameters(self) -> list[ParamTensor]:
        out = [self.vocab.matrix]
        for lstm in (self.lstm_fw, self.lstm_bw):
            if lstm is not None:
                out.extend(lstm.tensors())
        if self.gated is not None:
            out.extend(self.gated.tensors())
        out.extend([self.w_out, self.b_out])
        if self.crf is not None:
            out.extend(self.crf.tensors())
        return out

    def trainable_params(self) -> list[ParamTensor]:
        return [p for p in self.parameters() if p.trainable]

    # -- forward / backward ---------------------------------------------------

    def _embed(self, sentence: Sentence,
               mask_position: int | None = None) -> tuple[np.ndarray, list[int]]:
        if mask_position is not None and not (0 <= mask_position < len(sentence)):
            raise IndexError(f"mask position {mask_position} out of range")
        rows = [self.vocab.row(tok.surface) for tok in sentence.tokens]
        xs = self.vocab.matrix.values[rows].copy()
        if mask_position is not None:
            xs[mask_position] = self.vocab.mask_vector
        return xs, rows

    def _features(self, xs: np.ndarray) -> tuple[np.ndarray, _FeatureCache]:
        n = xs.shape[0]
        hidden = self.config.hidden_dim
        cache = _FeatureCache(xs=xs)
        if self.arch in (ARCH_LOGREG, ARCH_WORD_FIXED, ARCH_WORD_TUNED):
            return xs, cache
        if self.lstm_fw is not None:
            cache.hs_fw, cache.fw_cache = lstm_forward(self.lstm_fw, xs)
        if self.lstm_bw is not None:
            hs_rev, cache.bw_cache = lstm_forward(self.lstm_bw, xs[::-1])
            cache.hs_bw = hs_rev[::-1]  # hs_bw[i] = state after consuming tokens n-1..i
        if self.arch == ARCH_FW_CONTEXT:
            return _shift_forward(cache.hs_fw), cache
        if self.arch == ARCH_BW_CONTEXT:
            return _shift_backward(cache.hs_bw), cache
        if self.arch == ARCH_FULL:
            return np.hstack([cache.hs_fw, cache.hs_bw]), cache
        x_c = np.hstack([_shift_forward(cache.hs_fw), _shift_backward(cache.hs_bw)])
        if self.arch == ARCH_BI_CONTEXT:
            return x_c, cache
        # gated: project the word, gate word against context
        g = self.gated
        x_w = xs @ g.w_w.values.T
        cat = np.hstack([x_w, x_c])
        g_w = sigmoid(cat @ g.w_gw.values)
        g_c = sigmoid(cat @ g.w_gc.values)
        cache.x_w, cache.x_c, cache.cat = x_w, x_c, cat
        cache.g_w, cache.g_c = g_w, g_c
        return g_w[:, None] * x_w + g_c[:, None] * x_c, cache

    def _features_backward(self, cache: _FeatureCache, d_feats: np.ndarray) -> np.ndarray:
        if self.arch in (ARCH_LOGREG, ARCH_WORD_FIXED, ARCH_WORD_TUNED):
            return d_feats
        hidden = self.config.hidden_dim
        if self.arch == ARCH_FW_CONTEXT:
            return self._fw_backward(cache, _unshift_forward(d_feats))
        if self.arch == ARCH_BW_CONTEXT:
            return self._bw_backward(cache, _unshift_backward(d_feats))
        if self.arch == ARCH_FULL:
            d_xs = self._fw_backward(cache, d_feats[:, :hidden])
            return d_xs + self._bw_backward(cache, d_feats[:, hidden:])
        if self.arch == ARCH_BI_CONTEXT:
            return self._context_backward(cache, d_feats)
        # gated
        g = self.gated
        x_w, x_c, cat = cache.x_w, cache.x_c, cache.cat
        g_w, g_c = cache.g_w, cache.g_c
        d_gw = np.einsum("nd,nd->n", d_feats, x_w)
        d_gc = np.einsum("nd,nd->n", d_feats, x_c)
        d_xw = g_w[:, None] * d_feats
        d_xc = g_c[:, None] * d_feats
        d_logit_w = d_gw * g_w * (1.0 - g_w)
        d_logit_c = d_gc * g_c * (1.0 - g_c)
        g.w_gw.grad += cat.T @ d_logit_w
        g.w_gc.grad += cat.T @ d_logit_c
        d_cat = np.outer(d_logit_w, g.w_gw.values) + np.outer(d_logit_c, g.w_gc.values)
        d_wc = x_w.shape[1]
        d_xw += d_cat[:, :d_wc]
        d_xc += d_cat[:, d_wc:]
        g.w_w.grad += d_xw.T @ cache.xs
        return d_xw @ g.w_w.values + self._context_backward(cache, d_xc)

    def _fw_backward(self, cache: _FeatureCache, d_hs: np.ndarray) -> np.ndarray:
        return lstm_backward(self.lstm_fw, cache.fw_cache, d_hs)

    def _bw_backward(self, cache: _FeatureCache, d_hs_bw: np.ndarray) -> np.ndarray:
        # hs_bw was the reversed output of the bw LSTM; mirror the gradient
        return lstm_backward(self.lstm_bw, cache.bw_cache, d_hs_bw[::-1])[::-1]

    def _context_backward(self, cache: _FeatureCache, d_xc: np.ndarray) -> np.ndarray:
        hidden = self.config.hidden_dim
        d_xs = self._fw_backward(cache, _unshift_forward(d_xc[:, :hidden]))
        return d_xs + self._bw_backward(cache, _unshift_backward(d_xc[:, hidden:]))

    def _emissions(self, feats: np.ndarray) -> np.ndarray:
        return feats @ self.w_out.values.T + self.b_out.values

    def loss_and_grads(self, sentence: Sentence,
                       masks: np.ndarray | None = None) -> float:
        """One example's loss; gradients accumulate into the parameters
        (zeroed first).  `masks` is a precomputed scaled dropout mask."""
        zero_grads(self.parameters())
        xs, rows = self._embed(sentence)
        if masks is not None:
            xs = xs * masks
        feats, cache = self._features(xs)
        logits = self._emissions(feats)
        gold = [self.label_set.index(tag) for tag in sentence.gold]
        if self.arch == ARCH_LOGREG:
            logp = log_softmax(logits)
            loss = -float(logp[np.arange(len(gold)), gold].sum())
            d_logits = softmax(logits)
            d_logits[np.arange(len(gold)), gold] -= 1.0
        else:
            loss, d_logits = crfmod.crf_nll_grad(logits, self.crf, gold)
        self.w_out.grad += d_logits.T @ feats
        self.b_out.grad += d_logits.sum(axis=0)
        d_xs = self._features_backward(cache, d_logits @ self.w_out.values)
        if self.vocab.matrix.trainable:
            if masks is not None:
                d_xs = d_xs * masks
            np.add.at(self.vocab.matrix.grad, rows, d_xs)
        return loss

    def loss(self, sentence: Sentence, masks: np.ndarray | None = None) -> float:
        """Forward-only loss; shares no gradient code with loss_and_grads, so
        finite differences over this path check the backward pass end to end."""
        xs, _ = self._embed(sentence)
        if masks is not None:
            xs = xs * masks
        feats, _ = self._features(xs)
        logits = self._emissions(feats)
        gold = [self.label_set.index(tag) for tag in sentence.gold]
        if self.arch == ARCH_LOGREG:
            logp = log_softmax(logits)
            return -float(logp[np.arange(len(gold)), gold].sum())
        return max(crfmod.log_partition(logits, self.crf)
                   - crfmod.path_score(logits, self.crf, gold), 0.0)

    def predict_tags(self, sentence: Sentence,
                     mask_position: int | None = None
                     ) -> tuple[list[str], tuple[np.ndarray, np.ndarray] | None]:
        """Deterministic inference (dropout off, no RNG).  Returns tags and,
        for the gated model, the per-token (g_w, g_c) arrays."""
        xs, _ = self._embed(sentence, mask_position)
        feats, cache = self._features(xs)
        logits = self._emissions(feats)
        if self.arch == ARCH_LOGREG:
            idx = list(np.argmax(logits, axis=1))
        else:
            idx, _ = crfmod.viterbi(logits, self.crf)
        tags = [self.label_set.labels[k] for k in idx]
        gates = None
        if self.arch == ARCH_GATED:
            gates = (cache.g_w.copy(), cache.g_c.copy())
        return tags, gates


def _shift_forward(hs: np.ndarray) -> np.ndarray:
    """Feature at i is the forward state after token i-1; zeros at i=0."""
    out = np.zeros_like(hs)
    out[1:] = hs[:-1]
    return out


def _unshift_forward(d_feats: np.ndarray) -> np.ndarray:
    out = np.zeros_like(d_feats)
    out[:-1] = d_feats[1:]
    return out


def _shift_backward(hs_bw: np.ndarray) -> np.ndarray:
    """Feature at i is the backward state after token i+1; zeros at i=n-1."""
    out = np.zeros_like(hs_bw)
    out[:-1] = hs_bw[1:]
    return out


def _unshift_backward(d_feats: np.ndarray) -> np.ndarray:
    out = np.zeros_like(d_feats)
    out[1:] = d_feats[:-1]
    return out


# ---------------------------------------------------------------------------
# Feature extractors exposed for probing (eval mode, dropout-free).
# ---------------------------------------------------------------------------

def _eval_embed(model: SequenceTagger, sentence: Sentence) -> np.ndarray:
    xs, _ = model._embed(sentence)
    return xs


def features_fw(model: SequenceTagger, sentence: Sentence) -> np.ndarray:
    """Per-position forward-context features h_{i-1}; zero vector at i=0."""
    if model.lstm_fw is None:
        raise UnsupportedOperation(f"{model.arch} has no forward LSTM")
    hs, _ = lstm_forward(model.lstm_fw, _eval_embed(model, sentence))
    return _shift_forward(hs)


def features_bw(model: SequenceTagger, sentence: Sentence) -> np.ndarray:
    """Per-position backward-context features h_{i+1}; zero vector at i=n-1."""
    if model.lstm_bw is None:
        raise UnsupportedOperation(f"{model.arch} has no backward LSTM")
    hs_rev, _ = lstm_forward(model.lstm_bw, _eval_embed(model, sentence)[::-1])
    return _shift_backward(hs_rev[::-1])


def features_bi_context(model: SequenceTagger, sentence: Sentence) -> np.ndarray:
    """Concatenated context-only features, independent of the current word."""
    return np.hstack([features_fw(model, sentence), features_bw(model, sentence)])


def features_full(model: SequenceTagger, sentence: Sentence) -> np.ndarray:
    """Standard BiLSTM features: both states include the current word."""
    if model.lstm_fw is None or model.lstm_bw is None:
        raise UnsupportedOperation(f"{model.arch} is not bidirectional")
    xs = _eval_embed(model, sentence)
    hs_fw, _ = lstm_forward(model.lstm_fw, xs)
    hs_rev, _ = lstm_forward(model.lstm_bw, xs[::-1])
    return np.hstack([hs_fw, hs_rev[::-1]])


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

AnyTagger = LookupTagger | SequenceTagger


def train(arch: str, corpus: Corpus, table: EmbeddingTable | None = None,
          config: TrainConfig | None = None,
          log_sink: Callable[[dict], None] | None = None) -> AnyTagger:
    """Train any architecture on a normalized corpus.

    Emits one run-log record per epoch: {"epoch", "loss", "seconds"}.
    """
    config = config or TrainConfig()
    if len(corpus) == 0:
        raise EmptyCorpus("training corpus is empty")
    if corpus.label_set is None:
        raise TaggerError("corpus must be IO-normalized before training")
    if arch == ARCH_LOOKUP:
        return lookup_train(corpus, config)
    if table is None:
        raise TaggerError(f"{arch} requires an embedding table")
    if table.dim != config.embedding_dim:
        config = TrainConfig(**{**asdict(config), "embedding_dim": table.dim})
    rng = RngState(config.seed)
    vocab = build_vocab_snapshot(corpus, table,
                                 trainable=(arch == ARCH_WORD_TUNED), config=config)
    model = SequenceTagger(arch, corpus.label_set, config, vocab, rng)
    sentences = list(corpus)
    trainables = model.trainable_params()
    for epoch in range(1, config.epochs + 1):
        started = time.perf_counter()
        order = rng.permutation(len(sentences))
        total = 0.0
        for si in order:
            sent = sentences[si]
            masks = None
            if config.dropout > 0.0:
                masks = dropout_mask((len(sent), vocab.dim), config.dropout, rng)
            total += model.loss_and_grads(sent, masks)
            sgd_step(trainables, config.lr, config.weight_decay)
        if log_sink is not None:
            log_sink({"epoch": epoch, "loss": total / len(sentences),
                      "seconds": round(time.perf_counter() - started, 3)})
    return model


def logreg_train(corpus: Corpus, table: EmbeddingTable,
                 config: TrainConfig | None = None) -> SequenceTagger:
    return train(ARCH_LOGREG, corpus, table, config)


# ---------------------------------------------------------------------------
# Gradient checking on real architectures
# ---------------------------------------------------------------------------

def grad_check_model(model: SequenceTagger, sentence: Sentence, *,
                     eps: float = 1e-5, rng: RngState | None = None) -> GradCheckReport:
    """Finite-difference check of one example's gradients.  A dropout mask is
    drawn once and frozen so the loss is deterministic during the check."""
    masks = None
    if rng is not None and model.config.dropout > 0.0:
        masks = dropout_mask((len(sentence), model.vocab.dim), model.config.dropout, rng)
    return grad_check(lambda: model.loss(sentence, masks),
                      lambda: model.loss_and_grads(sentence, masks),
                      model.trainable_params(), eps=eps)


def gradcheck_suite(arch: str, seed: int, *, trials: int = 3, n_tokens: int = 4,
                    eps: float = 1e-5) -> list[GradCheckReport]:
    """Run `trials` random small-instance checks for one architecture."""
    from .embeddings import table_from_arrays

    if arch == ARCH_LOOKUP:
        raise UnsupportedOperation("lookup has no gradients to check")
    rng = RngState(seed)
    dim, hidden = 7, 5
    labels = LabelSet()
    words = [f"w{i}" for i in range(12)]
    table = table_from_arrays({w: rng.normal((dim,)) for w in words})
    config = TrainConfig(hidden_dim=hidden, embedding_dim=dim, seed=seed)
    reports = []
    for trial in range(trials):
        surfaces = [words[rng.integers(0, len(words))] for _ in range(n_tokens)]
        gold = [labels.labels[rng.integers(0, len(labels))] for _ in range(n_tokens)]
        sentence = _make_sentence(surfaces, gold)
        corpus = Corpus("gradcheck", (sentence,), labels)
        vocab = build_vocab_snapshot(corpus, table,
                                     trainable=(arch == ARCH_WORD_TUNED), config=config)
        model = SequenceTagger(arch, labels, config, vocab,
                               RngState(seed * 1000 + trial))
        reports.append(grad_check_model(model, sentence, eps=eps, rng=rng))
    return reports


def _make_sentence(surfaces: list[str], gold: list[str]) -> Sentence:
    from .corpus import Token
    return Sentence(tuple(Token(s, i) for i, s in enumerate(surfaces)), tuple(gold))


# ---------------------------------------------------------------------------
# Checkpoints: canonical JSON of named tensors + architecture tag + config.
# Layout: {"format", "version", "arch", "config", "config_hash", "label_set",
#          "lookup_table"?, "vocab_words"?, "mask_vector"?, "tensors"?}
# Floats serialize via repr and round-trip bit-exactly.
# ---------------------------------------------------------------------------

CHECKPOINT_FORMAT = "tagscope-checkpoint"
CHECKPOINT_VERSION = 1


def save_checkpoint(model: AnyTagger, path: str | Path) -> None:
    doc: dict = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "arch": model.arch,
        "config": asdict(model.config),
        "config_hash": model.config.hash(),
        "label_set": list(model.label_set.labels),
    }
    if isinstance(model, LookupTagger):
        doc["lookup_table"] = dict(sorted(model.table.items()))
    else:
        words = sorted(model.vocab.index, key=model.vocab.index.get)
        doc["vocab_words"] = words
        doc["mask_vector"] = model.vocab.mask_vector.tolist()
        doc["tensors"] = {
            p.name: {"shape": list(p.values.shape),
                     "values": p.values.reshape(-1).tolist(),
                     "trainable": p.trainable, "decay": p.decay,
                     "sparse_decay": p.sparse_decay}
            for p in model.parameters()
        }
    Path(path).write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n",
                          encoding="utf-8")


def load_checkpoint(path: str | Path) -> AnyTagger:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise TaggerError(f"{path}: not a tagscope checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise TaggerError(f"{path}: unsupported checkpoint version {doc.get('version')}")
    label_set = LabelSet(tuple(doc["label_set"]))
    config = TrainConfig(**doc["config"])
    arch = doc["arch"]
    if arch == ARCH_LOOKUP:
        return LookupTagger(label_set, doc["lookup_table"], config)
    words = doc["vocab_words"]
    tensors = doc["tensors"]
    emb = tensors["embeddings"]
    matrix = ParamTensor("embeddings",
                         np.array(emb["values"]).reshape(emb["shape"]),
                         trainable=emb["trainable"], decay=emb["decay"],
                         sparse_decay=emb["sparse_decay"])
    vocab = VocabSnapshot(index={w: i for i, w in enumerate(words)},
                          matrix=matrix,
                          mask_vector=np.array(doc["mask_vector"]))
    model = SequenceTagger(arch, label_set, config, vocab, RngState(0))
    for p in model.parameters():
        spec = tensors[p.name]
        p.values[:] = np.array(spec["values"]).reshape(spec["shape"])
        p.trainable = spec["trainable"]
        p.decay = spec["decay"]
        p.sparse_decay = spec["sparse_decay"]
        p.grad[:] = 0.0
    return model
