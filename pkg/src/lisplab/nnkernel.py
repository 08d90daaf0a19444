"""Deterministic numeric core: tensors, GRU, attention, exact gradients.

A tiny tape: every op returns a Tensor that remembers its inputs and a
closure computing input gradients from the output gradient. backward()
walks the tape once in reverse topological order. Layers that matter for
speed (GRU step, attention, the masked log-likelihood) are single tape
nodes with hand-derived backward passes; everything is float64 so
finite-difference checks are meaningful.

No GPU, no graph compiler, no broadcasting zoo. Shapes are vectors and
matrices, which is all a one-layer seq2seq needs.
"""

from __future__ import annotations

import json
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable tape recording inside the block (forward values only)."""
    global _grad_enabled
    saved = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = saved


def grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    """A float64 array plus its place in the tape."""

    __slots__ = ("data", "grad", "_prev", "_bw")

    def __init__(self, data, prev=(), bw=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        if _grad_enabled:
            self._prev = prev
            self._bw = bw
        else:
            self._prev = ()
            self._bw = None

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"


def leaf(data) -> Tensor:
    return Tensor(data)


def _acc(t: Tensor, g) -> None:
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _acc_rows(t: Tensor, idx, g) -> None:
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad[idx] += g


def backward(loss: Tensor) -> None:
    """Reverse accumulation from a scalar loss; fills .grad on the tape."""
    if loss.data.shape != ():
        raise ValueError("backward needs a scalar loss")
    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, int]] = [(loss, 0)]
    visited.add(id(loss))
    while stack:
        node, child = stack[-1]
        if child < len(node._prev):
            stack[-1] = (node, child + 1)
            nxt = node._prev[child]
            if id(nxt) not in visited:
                visited.add(id(nxt))
                stack.append((nxt, 0))
        else:
            stack.pop()
            topo.append(node)
    loss.grad = np.ones((), dtype=np.float64)
    for node in reversed(topo):
        if node._bw is not None and node.grad is not None:
            node._bw(node.grad)


# ---------------------------------------------------------------------------
# generic ops


def add(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data + b.data, (a, b))
    if _grad_enabled:
        def bw(g):
            _acc(a, g)
            _acc(b, g)
        out._bw = bw
    return out


def addn(ts: list[Tensor]) -> Tensor:
    ts = tuple(ts)
    if not ts:
        raise ValueError("addn of nothing")
    data = ts[0].data.copy()
    for t in ts[1:]:
        data = data + t.data
    out = Tensor(data, tuple(ts))
    if _grad_enabled:
        def bw(g):
            for t in ts:
                _acc(t, g)
        out._bw = bw
    return out


def scale(t: Tensor, c: float) -> Tensor:
    out = Tensor(t.data * c, (t,))
    if _grad_enabled:
        def bw(g):
            _acc(t, g * c)
        out._bw = bw
    return out


def matvec(w: Tensor, v: Tensor) -> Tensor:
    """w (out_dim, in_dim) @ v (in_dim)."""
    vd = v.data
    out = Tensor(w.data @ vd, (w, v))
    if _grad_enabled:
        def bw(g):
            _acc(w, np.outer(g, vd))
            _acc(v, w.data.T @ g)
        out._bw = bw
    return out


def row(table: Tensor, idx: int) -> Tensor:
    out = Tensor(table.data[idx], (table,))
    if _grad_enabled:
        def bw(g):
            _acc_rows(table, idx, g)
        out._bw = bw
    return out


def stack(vecs: list[Tensor]) -> Tensor:
    """Rows -> matrix; gradient scatters back per row."""
    vecs = tuple(vecs)
    if not vecs:
        raise ValueError("stack of nothing")
    out = Tensor(np.stack([v.data for v in vecs]), tuple(vecs))
    if _grad_enabled:
        def bw(g):
            for i, v in enumerate(vecs):
                _acc(v, g[i])
        out._bw = bw
    return out


def span_mean(mat: Tensor, start: int, end: int) -> Tensor:
    """Mean of rows start..end-1."""
    if not 0 <= start < end <= mat.data.shape[0]:
        raise ValueError(f"bad span ({start}, {end})")
    width = end - start
    out = Tensor(mat.data[start:end].mean(axis=0), (mat,))
    if _grad_enabled:
        def bw(g):
            _acc_rows(mat, slice(start, end), g / width)
        out._bw = bw
    return out


def concat(a: Tensor, b: Tensor) -> Tensor:
    na = a.data.shape[0]
    out = Tensor(np.concatenate([a.data, b.data]), (a, b))
    if _grad_enabled:
        def bw(g):
            _acc(a, g[:na])
            _acc(b, g[na:])
        out._bw = bw
    return out


def vsum(t: Tensor) -> Tensor:
    out = Tensor(t.data.sum(), (t,))
    if _grad_enabled:
        def bw(g):
            _acc(t, np.full_like(t.data, float(g)))
        out._bw = bw
    return out


def tanh(t: Tensor) -> Tensor:
    od = np.tanh(t.data)
    out = Tensor(od, (t,))
    if _grad_enabled:
        def bw(g):
            _acc(t, g * (1.0 - od * od))
        out._bw = bw
    return out


def sigmoid(t: Tensor) -> Tensor:
    od = _sigmoid_np(t.data)
    out = Tensor(od, (t,))
    if _grad_enabled:
        def bw(g):
            _acc(t, g * od * (1.0 - od))
        out._bw = bw
    return out


# ---------------------------------------------------------------------------
# parameter bundles


@dataclass
class GRUParams:
    """Update gate z, reset gate r, candidate c; weights (hidden, in)."""

    wxz: Tensor
    whz: Tensor
    bz: Tensor
    wxr: Tensor
    whr: Tensor
    br: Tensor
    wxc: Tensor
    whc: Tensor
    bc: Tensor

    @classmethod
    def init(cls, rng: np.random.Generator, in_dim: int, hidden: int) -> "GRUParams":
        def w(rows, cols):
            return leaf(rng.uniform(-0.1, 0.1, (rows, cols)))

        def b():
            return leaf(rng.uniform(-0.1, 0.1, hidden))

        return cls(
            wxz=w(hidden, in_dim), whz=w(hidden, hidden), bz=b(),
            wxr=w(hidden, in_dim), whr=w(hidden, hidden), br=b(),
            wxc=w(hidden, in_dim), whc=w(hidden, hidden), bc=b(),
        )

    def named(self, prefix: str):
        for name in ("wxz", "whz", "bz", "wxr", "whr", "br", "wxc", "whc", "bc"):
            yield f"{prefix}.{name}", getattr(self, name)


@dataclass
class AttentionParams:
    w_score: Tensor  # (hidden, hidden)
    w_combine: Tensor  # (hidden, 2*hidden)

    @classmethod
    def init(cls, rng: np.random.Generator, hidden: int) -> "AttentionParams":
        return cls(
            w_score=leaf(rng.uniform(-0.1, 0.1, (hidden, hidden))),
            w_combine=leaf(rng.uniform(-0.1, 0.1, (hidden, 2 * hidden))),
        )

    def named(self, prefix: str):
        yield f"{prefix}.w_score", self.w_score
        yield f"{prefix}.w_combine", self.w_combine


@dataclass
class ModelParams:
    """Every learnable tensor of the programmer, in one bundle.

    word_emb embeds question words for the encoder; token_emb embeds the
    static program tokens the decoder consumes; w_out projects attention
    output to static-token logits; w_key projects it before dotting with
    memory keys for variable-token logits.
    """

    word_emb: Tensor  # (n_words, embed_dim)
    token_emb: Tensor  # (n_static, hidden)
    encoder: GRUParams
    decoder: GRUParams
    attention: AttentionParams
    w_out: Tensor  # (n_static, hidden)
    w_key: Tensor  # (hidden, hidden)

    @classmethod
    def init(
        cls,
        rng: np.random.Generator,
        n_words: int,
        n_static: int,
        embed_dim: int,
        hidden: int,
    ) -> "ModelParams":
        return cls(
            word_emb=leaf(rng.uniform(-0.1, 0.1, (n_words, embed_dim))),
            token_emb=leaf(rng.uniform(-0.1, 0.1, (n_static, hidden))),
            encoder=GRUParams.init(rng, embed_dim, hidden),
            decoder=GRUParams.init(rng, hidden, hidden),
            attention=AttentionParams.init(rng, hidden),
            w_out=leaf(rng.uniform(-0.1, 0.1, (n_static, hidden))),
            w_key=leaf(rng.uniform(-0.1, 0.1, (hidden, hidden))),
        )

    def named_tensors(self) -> list[tuple[str, Tensor]]:
        out = [("word_emb", self.word_emb), ("token_emb", self.token_emb)]
        out.extend(self.encoder.named("encoder"))
        out.extend(self.decoder.named("decoder"))
        out.extend(self.attention.named("attention"))
        out.append(("w_out", self.w_out))
        out.append(("w_key", self.w_key))
        return out

    def zero_grad(self) -> None:
        for _, t in self.named_tensors():
            t.grad = None

    @property
    def embed_dim(self) -> int:
        return self.word_emb.data.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.token_emb.data.shape[1]


# ---------------------------------------------------------------------------
# fused layers


def gru_step(gp: GRUParams, h: Tensor, x: Tensor) -> Tensor:
    """One GRU step: update/reset gates, candidate, interpolation.

    The update gate keeps the old state: h' = z*h + (1-z)*c, with the
    reset gate applied to the hidden path before the candidate.
    """
    hd, xd = h.data, x.data
    if hd.shape[0] != gp.whz.data.shape[1] or xd.shape[0] != gp.wxz.data.shape[1]:
        raise ValueError("gru_step shape mismatch")
    z = _sigmoid_np(gp.wxz.data @ xd + gp.whz.data @ hd + gp.bz.data)
    r = _sigmoid_np(gp.wxr.data @ xd + gp.whr.data @ hd + gp.br.data)
    rh = r * hd
    c = np.tanh(gp.wxc.data @ xd + gp.whc.data @ rh + gp.bc.data)
    out = Tensor(
        z * hd + (1.0 - z) * c,
        (h, x, gp.wxz, gp.whz, gp.bz, gp.wxr, gp.whr, gp.br, gp.wxc, gp.whc, gp.bc),
    )
    if _grad_enabled:
        def bw(g):
            dz = g * (hd - c)
            dh = g * z
            dc_pre = g * (1.0 - z) * (1.0 - c * c)
            dz_pre = dz * z * (1.0 - z)
            drh = gp.whc.data.T @ dc_pre
            dr_pre = drh * hd * r * (1.0 - r)
            dh += drh * r
            dh += gp.whz.data.T @ dz_pre + gp.whr.data.T @ dr_pre
            dx = gp.wxz.data.T @ dz_pre + gp.wxr.data.T @ dr_pre + gp.wxc.data.T @ dc_pre
            _acc(gp.wxz, np.outer(dz_pre, xd))
            _acc(gp.whz, np.outer(dz_pre, hd))
            _acc(gp.bz, dz_pre)
            _acc(gp.wxr, np.outer(dr_pre, xd))
            _acc(gp.whr, np.outer(dr_pre, hd))
            _acc(gp.br, dr_pre)
            _acc(gp.wxc, np.outer(dc_pre, xd))
            _acc(gp.whc, np.outer(dc_pre, rh))
            _acc(gp.bc, dc_pre)
            _acc(x, dx)
            _acc(h, dh)
        out._bw = bw
    return out


def attention(ap: AttentionParams, u: Tensor, enc: Tensor) -> Tensor:
    """Dot-product attention, tanh-combined.

    scores s_t = u . (W_score @ enc_t); weights = softmax(s);
    context = sum_t w_t enc_t; output = tanh(W_combine @ [u; context]).
    """
    ud, encd = u.data, enc.data
    if encd.ndim != 2 or encd.shape[0] == 0:
        raise ValueError("attention needs at least one encoder output")
    q = ap.w_score.data.T @ ud
    s = encd @ q
    s = s - s.max()
    w = np.exp(s)
    w /= w.sum()
    ctx = encd.T @ w
    cat = np.concatenate([ud, ctx])
    comb = ap.w_combine.data @ cat
    od = np.tanh(comb)
    out = Tensor(od, (u, enc, ap.w_score, ap.w_combine))
    if _grad_enabled:
        def bw(g):
            dcomb = g * (1.0 - od * od)
            _acc(ap.w_combine, np.outer(dcomb, cat))
            dcat = ap.w_combine.data.T @ dcomb
            hidden = ud.shape[0]
            du = dcat[:hidden].copy()
            dctx = dcat[hidden:]
            dw = encd @ dctx
            denc = np.outer(w, dctx)
            ds = w * (dw - w @ dw)
            dq = encd.T @ ds
            denc += np.outer(ds, q)
            du += ap.w_score.data @ dq
            _acc(ap.w_score, np.outer(ud, dq))
            _acc(u, du)
            _acc(enc, denc)
        out._bw = bw
    return out


def var_logits(w_key: Tensor, a: Tensor, keys: list[Tensor]) -> Tensor:
    """One logit per memory key: key_i . (W_key @ a)."""
    keys = tuple(keys)  # snapshot: callers may grow their list afterwards
    if not keys:
        raise ValueError("no keys")
    ad = a.data
    proj = w_key.data @ ad
    kmat = np.stack([k.data for k in keys])
    out = Tensor(kmat @ proj, (w_key, a, *keys))
    if _grad_enabled:
        def bw(g):
            dproj = kmat.T @ g
            for i, k in enumerate(keys):
                _acc(k, g[i] * proj)
            _acc(w_key, np.outer(dproj, ad))
            _acc(a, w_key.data.T @ dproj)
        out._bw = bw
    return out


def masked_log_prob(logits: Tensor, valid_ids: np.ndarray, chosen: int) -> Tensor:
    """log p(chosen) under a softmax restricted to valid_ids.

    chosen must be one of valid_ids; invalid logits contribute nothing to
    the normalizer, implementing exact-zero probability for them.
    """
    valid_ids = np.asarray(valid_ids, dtype=np.int64)
    ld = logits.data
    sub = ld[valid_ids]
    m = sub.max()
    lse = m + np.log(np.exp(sub - m).sum())
    pos = np.nonzero(valid_ids == chosen)[0]
    if pos.size != 1:
        raise ValueError(f"chosen id {chosen} not among valid ids")
    out = Tensor(ld[chosen] - lse, (logits,))
    if _grad_enabled:
        def bw(g):
            p = np.exp(sub - lse)
            gl = np.zeros_like(ld)
            np.add.at(gl, valid_ids, -float(g) * p)
            gl[chosen] += float(g)
            _acc(logits, gl)
        out._bw = bw
    return out


def masked_softmax(logits: Tensor, mask) -> Tensor:
    """Probabilities over the unmasked slots; masked slots exactly 0."""
    od = masked_softmax_np(logits.data, mask)
    mask = np.asarray(mask, dtype=bool)
    out = Tensor(od, (logits,))
    if _grad_enabled:
        def bw(g):
            pv = od[mask]
            gv = g[mask]
            dl = np.zeros_like(logits.data)
            dl[mask] = pv * (gv - pv @ gv)
            _acc(logits, dl)
        out._bw = bw
    return out


# ---------------------------------------------------------------------------
# plain-numpy twins (no tape; used by search and sampling)


def _sigmoid_np(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def gru_step_np(gp: GRUParams, h: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Batched twin of gru_step: h, x may be (H,)/(E,) or (B,H)/(B,E)."""
    z = _sigmoid_np(x @ gp.wxz.data.T + h @ gp.whz.data.T + gp.bz.data)
    r = _sigmoid_np(x @ gp.wxr.data.T + h @ gp.whr.data.T + gp.br.data)
    c = np.tanh(x @ gp.wxc.data.T + (r * h) @ gp.whc.data.T + gp.bc.data)
    return z * h + (1.0 - z) * c


def attention_np(ap: AttentionParams, u: np.ndarray, enc: np.ndarray) -> np.ndarray:
    """Batched twin of attention: u may be (H,) or (B,H); enc is (T,H)."""
    single = u.ndim == 1
    if single:
        u = u[None]
    q = u @ ap.w_score.data
    s = q @ enc.T
    s = s - s.max(axis=1, keepdims=True)
    w = np.exp(s)
    w /= w.sum(axis=1, keepdims=True)
    ctx = w @ enc
    cat = np.concatenate([u, ctx], axis=1)
    out = np.tanh(cat @ ap.w_combine.data.T)
    return out[0] if single else out


def masked_softmax_np(logits: np.ndarray, mask) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)
    if logits.shape != mask.shape:
        raise ValueError("logits/mask shape mismatch")
    if not mask.any():
        raise ValueError("all tokens masked")
    out = np.zeros_like(logits, dtype=np.float64)
    sub = logits[mask]
    sub = np.exp(sub - sub.max())
    out[mask] = sub / sub.sum()
    return out


def log_probs_over(logits: np.ndarray, valid_ids: np.ndarray) -> np.ndarray:
    """log softmax over just the valid ids; aligned with valid_ids."""
    sub = logits[valid_ids]
    m = sub.max()
    lse = m + np.log(np.exp(sub - m).sum())
    return sub - lse


# ---------------------------------------------------------------------------
# checkpoints

_CHECKPOINT_FORMAT = "lisplab-checkpoint"


def save_checkpoint(path, named_arrays: list[tuple[str, np.ndarray]], meta: dict) -> None:
    """One JSON header line, then raw little-endian float64 buffers."""
    header = {
        "format": _CHECKPOINT_FORMAT,
        "version": 1,
        "meta": meta,
        "tensors": [{"name": n, "shape": list(a.shape)} for n, a in named_arrays],
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        for _, arr in named_arrays:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    blob = Path(path).read_bytes()
    nl = blob.index(b"\n")
    header = json.loads(blob[:nl].decode("utf-8"))
    if header.get("format") != _CHECKPOINT_FORMAT or header.get("version") != 1:
        raise ValueError("not a recognized checkpoint file")
    arrays: dict[str, np.ndarray] = {}
    offset = nl + 1
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = offset + 8 * count
        arrays[entry["name"]] = (
            np.frombuffer(blob[offset:end], dtype="<f8").reshape(shape).copy()
        )
        offset = end
    if offset != len(blob):
        raise ValueError("checkpoint has trailing bytes")
    return header["meta"], arrays


def params_to_arrays(params: ModelParams) -> list[tuple[str, np.ndarray]]:
    return [(n, t.data) for n, t in params.named_tensors()]


def params_from_arrays(arrays: dict[str, np.ndarray]) -> ModelParams:
    """Rebuild a ModelParams bundle from checkpoint arrays."""

    def take(name):
        return leaf(arrays[name].astype(np.float64, copy=True))

    def gru(prefix):
        return GRUParams(
            **{f: take(f"{prefix}.{f}") for f in
               ("wxz", "whz", "bz", "wxr", "whr", "br", "wxc", "whc", "bc")}
        )

    params = ModelParams(
        word_emb=take("word_emb"),
        token_emb=take("token_emb"),
        encoder=gru("encoder"),
        decoder=gru("decoder"),
        attention=AttentionParams(
            w_score=take("attention.w_score"), w_combine=take("attention.w_combine")
        ),
        w_out=take("w_out"),
        w_key=take("w_key"),
    )
    expected = {n for n, _ in params.named_tensors()}
    if set(arrays) != expected:
        raise ValueError("checkpoint tensors do not match model")
    return params


def load_params_into(params: ModelParams, arrays: dict[str, np.ndarray]) -> None:
    named = dict(params.named_tensors())
    if set(named) != set(arrays):
        raise ValueError("checkpoint tensors do not match model")
    for name, tensor in named.items():
        if tensor.data.shape != arrays[name].shape:
            raise ValueError(f"shape mismatch for {name}")
        tensor.data = arrays[name].astype(np.float64, copy=True)


# ---------------------------------------------------------------------------
# gradient checking


def _scripted_loss(params: ModelParams, scenario: dict) -> Tensor:
    """Unrolled encode/decode used only by grad_check.

    Mirrors the programmer's wiring: encoder GRU over word ids, span-mean
    keys, decoder GRU fed by previous-token embeddings (memory keys for
    variable tokens), attention, static+variable logits, masked log
    probability per step.
    """
    hidden = params.hidden_dim
    n_static = params.token_emb.data.shape[0]
    h = leaf(np.zeros(hidden))
    enc_steps = []
    for wid in scenario["word_ids"]:
        h = gru_step(params.encoder, h, row(params.word_emb, int(wid)))
        enc_steps.append(h)
    enc = stack(enc_steps)
    keys = [span_mean(enc, s, e) for s, e in scenario["spans"]]

    def decode_logprob(script) -> Tensor:
        dec_keys = list(keys)
        dec_h = gru_step(params.decoder, enc_steps[-1], row(params.token_emb, 0))
        lps = []
        for step in script:
            a = attention(params.attention, dec_h, enc)
            logits = matvec(params.w_out, a)
            if dec_keys:
                logits = concat(logits, var_logits(params.w_key, a, dec_keys))
            lps.append(masked_log_prob(logits, step["valid"], step["chosen"]))
            chosen = step["chosen"]
            if chosen >= n_static:
                x = dec_keys[chosen - n_static]
            else:
                x = row(params.token_emb, chosen)
            dec_h = gru_step(params.decoder, dec_h, x)
            if step["creates_key"]:
                dec_keys.append(dec_h)
        if not lps:
            return leaf(0.0)
        return addn(lps)

    terms = [
        scale(decode_logprob(script), weight)
        for script, weight in zip(scenario["scripts"], scenario["weights"])
    ]
    return addn(terms)


def _make_scenario(
    rng: np.random.Generator, n_static: int, n_words: int, objective: str, n_steps: int
) -> dict:
    word_ids = rng.integers(0, n_words, size=7)
    spans = [(1, 3), (4, 6)]

    def make_script(length, force_var_steps=()):
        script = []
        n_keys = len(spans)
        for t in range(length):
            creates = t == 1 and length > 2
            if t in force_var_steps:
                # newest key: covers gradients through keys created mid-decode
                chosen = n_static + n_keys - 1
            else:
                chosen = int(rng.integers(1, n_static))
            total = n_static + n_keys
            others = rng.permutation(total)
            valid = {chosen}
            for o in others:
                if len(valid) >= 6:
                    break
                valid.add(int(o))
            script.append(
                {"chosen": chosen, "valid": np.array(sorted(valid)), "creates_key": creates}
            )
            if creates:
                n_keys += 1
        return script

    if objective == "likelihood":
        scripts = [make_script(n_steps, force_var_steps=(0, 3) if n_steps > 3 else ())]
        weights = [1.0]
    elif objective == "policy":
        scripts = [
            make_script(n_steps, force_var_steps=(2,) if n_steps > 2 else ()),
            make_script(max(n_steps - 2, 0)),
        ]
        # fixed rewards 1.0 and 0.0 against a fixed baseline of 0.4
        weights = [1.0 - 0.4, 0.0 - 0.4]
    else:
        raise ValueError(f"unknown objective {objective!r}")
    return {"word_ids": word_ids, "spans": spans, "scripts": scripts, "weights": weights}


def grad_check(
    embed_dim: int = 8,
    hidden: int = 12,
    vocab: int = 20,
    seed: int = 0,
    objective: str = "likelihood",
    n_steps: int = 5,
    epsilon: float = 1e-5,
) -> float:
    """Max relative error between tape gradients and central differences.

    The relative error of coordinate pairs (a, b) is |a-b| divided by
    max(|a|, |b|, 1e-3); the floor keeps near-zero coordinates from
    exploding the ratio. Returns the max over every parameter coordinate.
    """
    rng = np.random.default_rng(seed)
    params = ModelParams.init(rng, vocab, vocab, embed_dim, hidden)
    scenario = _make_scenario(rng, vocab, vocab, objective, n_steps)

    params.zero_grad()
    loss = _scripted_loss(params, scenario)
    backward(loss)

    worst = 0.0
    for _, tensor in params.named_tensors():
        analytic = tensor.grad if tensor.grad is not None else np.zeros_like(tensor.data)
        flat = tensor.data.reshape(-1)
        aflat = analytic.reshape(-1)
        for i in range(flat.shape[0]):
            saved = flat[i]
            flat[i] = saved + epsilon
            with no_grad():
                up = float(_scripted_loss(params, scenario).data)
            flat[i] = saved - epsilon
            with no_grad():
                down = float(_scripted_loss(params, scenario).data)
            flat[i] = saved
            fd = (up - down) / (2.0 * epsilon)
            err = abs(aflat[i] - fd) / max(abs(aflat[i]), abs(fd), 1e-3)
            if err > worst:
                worst = err
    return worst
