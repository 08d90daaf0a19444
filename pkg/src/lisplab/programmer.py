"""The programmer: a GRU seq2seq that writes programs token by token.

The encoder reads the question with entity spans abstracted to "ENT".
Each resolved entity becomes a variable holding its singleton set, paired
with a neural key: the average encoder output over the entity's span.
The decoder emits program tokens under the assist mask; its vocabulary is
the static program tokens plus one token per memory variable. When an
expression closes, the machine executes it and the result joins the
memory, keyed by the decoder output of the step that read ")".

Search and sampling run on plain numpy (no tape); training replays a
chosen program through the tape to get exact gradients of its log
probability.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from . import nnkernel as nn
from .assist import DecodingState
from .interpreter import CLOSE, FUNCS, MAX_EXPRESSIONS, OPEN, RETURN, variable_index
from .kb import EntitySet, KnowledgeBase, canon

GO = "GO"
UNK = "<unk>"
ENT = "ENT"

_RESERVED = (GO, OPEN, CLOSE, RETURN) + tuple(FUNCS)
_VARISH = re.compile(r"^R\d+$")


@dataclass(frozen=True)
class QAItem:
    """One weakly supervised example: question, entity spans, answers."""

    qid: str
    tokens: tuple[str, ...]
    entities: tuple[tuple[tuple[int, int], str], ...]
    answers: EntitySet

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(
            self, "entities", tuple(((s, e), eid) for (s, e), eid in self.entities)
        )
        object.__setattr__(self, "answers", canon(self.answers))
        last = 0
        for (start, end), eid in self.entities:
            if not (0 <= start < end <= len(self.tokens)):
                raise ValueError(f"entity span ({start}, {end}) out of bounds")
            if start < last:
                raise ValueError("entity spans overlap or are unsorted")
            if not eid:
                raise ValueError("empty entity id")
            last = end

    def abstracted(self) -> list[str]:
        """Question tokens with every entity-span token replaced by ENT."""
        out = list(self.tokens)
        for (start, end), _ in self.entities:
            for i in range(start, end):
                out[i] = ENT
        return out

    def initial_vars(self) -> list[EntitySet]:
        return [(eid,) for _, eid in self.entities]


@dataclass
class Model:
    """Vocabularies plus parameters; everything a checkpoint must restore."""

    word_vocab: list[str]
    static_tokens: list[str]
    params: nn.ModelParams

    def __post_init__(self):
        self.word_index = {w: i for i, w in enumerate(self.word_vocab)}
        self.token_index = {t: i for i, t in enumerate(self.static_tokens)}

    @property
    def n_static(self) -> int:
        return len(self.static_tokens)

    def token_to_id(self, token: str) -> int:
        idx = self.token_index.get(token)
        if idx is not None:
            return idx
        var = variable_index(token)
        if var is not None:
            return self.n_static + var
        raise KeyError(f"unknown program token {token!r}")

    def id_to_token(self, tid: int) -> str:
        if tid < self.n_static:
            return self.static_tokens[tid]
        return f"R{tid - self.n_static}"


def static_token_list(kb: KnowledgeBase) -> list[str]:
    props = sorted(kb.properties)
    for prop in props:
        if prop in _RESERVED or _VARISH.match(prop):
            raise ValueError(f"property name {prop!r} collides with a program token")
    return list(_RESERVED) + props


def build_model(
    kb: KnowledgeBase,
    train_items: list[QAItem],
    embed_dim: int = 32,
    hidden_dim: int = 64,
    seed: int = 0,
) -> Model:
    """Vocabulary from the training questions, parameters from the seed."""
    words = sorted({w for item in train_items for w in item.abstracted()})
    word_vocab = [UNK] + words
    static_tokens = static_token_list(kb)
    rng = np.random.default_rng(seed)
    params = nn.ModelParams.init(rng, len(word_vocab), len(static_tokens), embed_dim, hidden_dim)
    return Model(word_vocab, static_tokens, params)


def save_model(path, model: Model) -> None:
    meta = {
        "embed_dim": model.params.embed_dim,
        "hidden_dim": model.params.hidden_dim,
        "word_vocab": model.word_vocab,
        "static_tokens": model.static_tokens,
    }
    nn.save_checkpoint(path, nn.params_to_arrays(model.params), meta)


def load_model(path) -> Model:
    meta, arrays = nn.load_checkpoint(path)
    params = nn.params_from_arrays(arrays)
    model = Model(list(meta["word_vocab"]), list(meta["static_tokens"]), params)
    if params.embed_dim != meta["embed_dim"] or params.hidden_dim != meta["hidden_dim"]:
        raise ValueError("checkpoint dims inconsistent with stored tensors")
    return model


# ---------------------------------------------------------------------------
# encoding


@dataclass
class Encoding:
    enc: nn.Tensor  # (T, hidden)
    last: nn.Tensor  # (hidden,)
    keys: list[nn.Tensor]  # one per initial entity variable


def encode(model: Model, item: QAItem) -> Encoding:
    """Encoder GRU over the abstracted question; span-mean entity keys."""
    tokens = item.abstracted()
    if not tokens:
        raise ValueError("empty question")
    params = model.params
    h = nn.leaf(np.zeros(params.hidden_dim))
    steps = []
    for word in tokens:
        wid = model.word_index.get(word, 0)
        h = nn.gru_step(params.encoder, h, nn.row(params.word_emb, wid))
        steps.append(h)
    enc = nn.stack(steps)
    keys = [nn.span_mean(enc, start, end) for (start, end), _ in item.entities]
    return Encoding(enc=enc, last=steps[-1], keys=keys)


# ---------------------------------------------------------------------------
# search-side decoding (plain numpy)


class _Lane:
    """One decoding hypothesis in the numpy search path."""

    __slots__ = ("state", "dec_h", "keys", "tokens", "token_ids", "logprob", "done")

    def __init__(self, state, dec_h, keys):
        self.state = state
        self.dec_h = dec_h
        self.keys = keys
        self.tokens: tuple[str, ...] = ()
        self.token_ids: tuple[int, ...] = ()
        self.logprob = 0.0
        self.done = False

    def clone(self) -> "_Lane":
        lane = _Lane(self.state, self.dec_h, list(self.keys))
        lane.tokens = self.tokens
        lane.token_ids = self.token_ids
        lane.logprob = self.logprob
        lane.done = self.done
        return lane


@dataclass(frozen=True)
class Candidate:
    """A terminated hypothesis, ready for reward or reporting."""

    tokens: tuple[str, ...]
    token_ids: tuple[int, ...]
    logprob: float
    denotation: EntitySet

    def text(self) -> str:
        return " ".join(self.tokens)


def _encode_np(model: Model, item: QAItem):
    with nn.no_grad():
        encoding = encode(model, item)
    return (
        encoding.enc.data,
        encoding.last.data,
        [k.data for k in encoding.keys],
    )


def _start_lane(model: Model, kb: KnowledgeBase, item: QAItem, max_expressions, enc_np):
    _, last, keys = enc_np
    params = model.params
    state = DecodingState(kb, item.initial_vars(), max_expressions)
    dec_h = nn.gru_step_np(params.decoder, last, params.token_emb.data[model.token_index[GO]])
    return _Lane(state, dec_h, list(keys))


def _lane_scores(model: Model, enc: np.ndarray, lanes: list[_Lane]):
    """Valid ids and their log probabilities for every lane, batched."""
    params = model.params
    u = np.stack([lane.dec_h for lane in lanes])
    att = nn.attention_np(params.attention, u, enc)
    static = att @ params.w_out.data.T
    proj = att @ params.w_key.data.T
    out = []
    for b, lane in enumerate(lanes):
        logits = static[b]
        if lane.keys:
            logits = np.concatenate([logits, np.stack(lane.keys) @ proj[b]])
        valid_ids = np.array(
            sorted(model.token_to_id(t) for t in lane.state.valid_tokens()), dtype=np.int64
        )
        out.append((valid_ids, nn.log_probs_over(logits, valid_ids)))
    return out


def _advance(model: Model, lane: _Lane, token_id: int, logp: float) -> None:
    """Mutate lane: consume the chosen token."""
    params = model.params
    token = model.id_to_token(token_id)
    lane.state = lane.state.feed(token)
    lane.tokens = lane.tokens + (token,)
    lane.token_ids = lane.token_ids + (token_id,)
    lane.logprob += logp
    if token == RETURN:
        lane.done = True
        return
    if token_id >= model.n_static:
        x = lane.keys[token_id - model.n_static]
    else:
        x = params.token_emb.data[token_id]
    lane.dec_h = nn.gru_step_np(params.decoder, lane.dec_h, x)
    if token == CLOSE:
        lane.keys.append(lane.dec_h)


def _finish(lane: _Lane) -> Candidate:
    return Candidate(lane.tokens, lane.token_ids, lane.logprob, lane.state.denotation())


def beam_search(
    model: Model,
    kb: KnowledgeBase,
    item: QAItem,
    beam_size: int,
    max_expressions: int = MAX_EXPRESSIONS,
) -> list[Candidate]:
    """Length-unnormalized beam over assist-valid tokens.

    Ties break lexicographically on token-id sequences, so results are
    a deterministic function of (model, kb, item). The finished pool is
    never pruned during search, which makes the beam exhaustive whenever
    beam_size is at least the number of live prefixes at every depth.
    """
    if beam_size < 1:
        raise ValueError("beam_size must be >= 1")
    enc_np = _encode_np(model, item)
    live = [_start_lane(model, kb, item, max_expressions, enc_np)]
    finished: list[Candidate] = []
    while live:
        scored = _lane_scores(model, enc_np[0], live)
        expanded: list[_Lane] = []
        for lane, (valid_ids, logps) in zip(live, scored):
            for tid, lp in zip(valid_ids, logps):
                branch = lane.clone()
                _advance(model, branch, int(tid), float(lp))
                if branch.done:
                    finished.append(_finish(branch))
                else:
                    expanded.append(branch)
        expanded.sort(key=lambda l: (-l.logprob, l.token_ids))
        live = expanded[:beam_size]
    finished.sort(key=lambda c: (-c.logprob, c.token_ids))
    return finished[:beam_size]


def greedy_decode(
    model: Model,
    kb: KnowledgeBase,
    item: QAItem,
    max_expressions: int = MAX_EXPRESSIONS,
) -> Candidate:
    return beam_search(model, kb, item, 1, max_expressions)[0]


def sample_programs(
    model: Model,
    kb: KnowledgeBase,
    item: QAItem,
    n_samples: int,
    rng: np.random.Generator,
    max_expressions: int = MAX_EXPRESSIONS,
) -> list[Candidate]:
    """Ancestral sampling, n_samples lanes in lockstep.

    Randomness is consumed one uniform draw per unfinished lane per step,
    in lane order, so results depend only on the rng state and arguments.
    """
    enc_np = _encode_np(model, item)
    lanes = [
        _start_lane(model, kb, item, max_expressions, enc_np) for _ in range(n_samples)
    ]
    while True:
        active = [lane for lane in lanes if not lane.done]
        if not active:
            break
        scored = _lane_scores(model, enc_np[0], active)
        for lane, (valid_ids, logps) in zip(active, scored):
            u = rng.random()
            probs = np.exp(logps)
            acc = 0.0
            pick = len(valid_ids) - 1
            for j, p in enumerate(probs):
                acc += p
                if u < acc:
                    pick = j
                    break
            _advance(model, lane, int(valid_ids[pick]), float(logps[pick]))
    return [_finish(lane) for lane in lanes]


def next_token_distribution(
    model: Model,
    kb: KnowledgeBase,
    item: QAItem,
    prefix: list[str] | tuple[str, ...] = (),
    max_expressions: int = MAX_EXPRESSIONS,
) -> dict[str, float]:
    """Model probabilities over the valid next tokens after a prefix."""
    enc_np = _encode_np(model, item)
    lane = _start_lane(model, kb, item, max_expressions, enc_np)
    for token in prefix:
        if lane.done:
            raise ValueError("prefix continues past RETURN")
        lane_scores = _lane_scores(model, enc_np[0], [lane])[0]
        tid = model.token_to_id(token)
        pos = np.nonzero(lane_scores[0] == tid)[0]
        if pos.size != 1:
            raise ValueError(f"prefix token {token!r} not valid at its position")
        _advance(model, lane, tid, float(lane_scores[1][pos[0]]))
    if lane.done:
        return {}
    valid_ids, logps = _lane_scores(model, enc_np[0], [lane])[0]
    return {model.id_to_token(int(t)): float(np.exp(lp)) for t, lp in zip(valid_ids, logps)}


# ---------------------------------------------------------------------------
# training-side decoding (tape)


def program_logprob(
    model: Model,
    kb: KnowledgeBase,
    item: QAItem,
    tokens: tuple[str, ...] | list[str],
    max_expressions: int = MAX_EXPRESSIONS,
) -> nn.Tensor:
    """log p(tokens | question) as a tape scalar, for gradient ascent.

    Replays the decoder over the given program with the same masking the
    search used; the returned Tensor backpropagates into every parameter
    and through keys created mid-decode.
    """
    params = model.params
    encoding = encode(model, item)
    keys = list(encoding.keys)
    state = DecodingState(kb, item.initial_vars(), max_expressions)
    dec_h = nn.gru_step(
        params.decoder, encoding.last, nn.row(params.token_emb, model.token_index[GO])
    )
    step_lps = []
    for token in tokens:
        if state.terminated:
            raise ValueError("program continues past RETURN")
        att = nn.attention(params.attention, dec_h, encoding.enc)
        logits = nn.matvec(params.w_out, att)
        if keys:
            logits = nn.concat(logits, nn.var_logits(params.w_key, att, keys))
        valid_ids = np.array(
            sorted(model.token_to_id(t) for t in state.valid_tokens()), dtype=np.int64
        )
        tid = model.token_to_id(token)
        step_lps.append(nn.masked_log_prob(logits, valid_ids, tid))
        state = state.feed(token)
        if token == RETURN:
            continue
        x = keys[tid - model.n_static] if tid >= model.n_static else nn.row(
            params.token_emb, tid
        )
        dec_h = nn.gru_step(params.decoder, dec_h, x)
        if token == CLOSE:
            keys.append(dec_h)
    if not state.terminated:
        raise ValueError("program does not end with RETURN")
    return nn.addn(step_lps)
