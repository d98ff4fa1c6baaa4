"""The CAMD network: channel compensation, embedding, antenna attention,
temporal LSTM, and the ablation variants.

All forward methods are batch-first and operate on diffcore Tensors:
received signals are [B, Nr, L, 2], feature maps [B, A, L_e, C].
"""

from __future__ import annotations

import math

import numpy as np

from ..diffcore import (
    NumericError,
    Tensor,
    add,
    conv1d,
    expand,
    layer_norm,
    linear,
    lstm_update,
    matmul,
    mul,
    relu,
    reshape,
    scale,
    softmax,
    stack,
    take,
    tmean,
    transpose,
    tsum,
)
from .config import ModelConfig


def _stack_shapes(prefix: str, width: int, cfg: ModelConfig, attn_layers: int,
                  lstm_layers: int, with_attention: bool, with_lstm: bool):
    """Named parameter shapes of one embed/attention/LSTM stack, in forward order."""
    shapes = [
        (f"{prefix}.proj.w", (2, width), "fanin"),
        (f"{prefix}.proj.b", (width,), "zeros"),
    ]
    for k in range(cfg.conv_layers):
        shapes += [
            (f"{prefix}.conv{k}.w", (cfg.kernel, width, width), "fanin"),
            (f"{prefix}.conv{k}.b", (width,), "zeros"),
        ]
    if with_attention:
        hidden = cfg.ffn_mult * width
        for k in range(attn_layers):
            blk = f"{prefix}.block{k}"
            shapes += [
                (f"{blk}.ln1.g", (width,), "ones"),
                (f"{blk}.ln1.b", (width,), "zeros"),
                (f"{blk}.attn.wq", (width, width), "fanin"),
                (f"{blk}.attn.bq", (width,), "zeros"),
                (f"{blk}.attn.wk", (width, width), "fanin"),
                (f"{blk}.attn.bk", (width,), "zeros"),
                (f"{blk}.attn.wv", (width, width), "fanin"),
                (f"{blk}.attn.bv", (width,), "zeros"),
                (f"{blk}.attn.wo", (width, width), "fanin"),
                (f"{blk}.attn.bo", (width,), "zeros"),
                (f"{blk}.ln2.g", (width,), "ones"),
                (f"{blk}.ln2.b", (width,), "zeros"),
                (f"{blk}.ffn.w1", (width, hidden), "fanin"),
                (f"{blk}.ffn.b1", (hidden,), "zeros"),
                (f"{blk}.ffn.w2", (width, hidden), "fanin"),
                (f"{blk}.ffn.b2", (hidden,), "zeros"),
                (f"{blk}.ffn.w3", (hidden, width), "fanin"),
                (f"{blk}.ffn.b3", (width,), "zeros"),
            ]
    if with_lstm:
        for k in range(lstm_layers):
            shapes += [
                (f"{prefix}.lstm{k}.wx", (width, 4 * width), "fanin"),
                (f"{prefix}.lstm{k}.wh", (width, 4 * width), "fanin"),
                (f"{prefix}.lstm{k}.b", (4 * width,), "lstm_bias"),
            ]
    return shapes


def parameter_shapes(cfg: ModelConfig):
    """Canonical (name, shape, init) list; defines serialization order."""
    shapes = []
    if cfg.has_cc:
        shapes += _stack_shapes("cc", cfg.cc_channels, cfg, cfg.attn_layers,
                                cfg.lstm_layers, True, True)
        shapes += [
            (f"cc.head.w", (cfg.cc_channels, cfg.nt * 2), "zeros"),
            (f"cc.head.b", (cfg.nt * 2,), "zeros"),
        ]
    shapes += _stack_shapes("ext", cfg.channels, cfg, cfg.effective_attn_layers,
                            cfg.effective_lstm_layers, cfg.has_attention, cfg.has_lstm)
    shapes += [
        ("cls.w", (cfg.channels, cfg.num_classes), "fanin"),
        ("cls.b", (cfg.num_classes,), "zeros"),
    ]
    return shapes


def _init_array(shape, kind, rng, dtype):
    if kind == "fanin":
        limit = 1.0 / math.sqrt(shape[0] if len(shape) == 2 else shape[0] * shape[1])
        return rng.uniform(-limit, limit, size=shape).astype(dtype)
    if kind == "zeros":
        return np.zeros(shape, dtype=dtype)
    if kind == "ones":
        return np.ones(shape, dtype=dtype)
    if kind == "lstm_bias":
        b = np.zeros(shape, dtype=dtype)
        width = shape[0] // 4
        b[width:2 * width] = 1.0     # forget gate opens at initialization
        return b
    raise ValueError(kind)


class CamdModel:
    """Parameter store plus the forward pass for every variant."""

    def __init__(self, config: ModelConfig, seed: int = 0, dtype=np.float32):
        self.config = config
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(seed)
        self.params: dict[str, Tensor] = {}
        for name, shape, kind in parameter_shapes(config):
            self.params[name] = Tensor(_init_array(shape, kind, rng, self.dtype),
                                       requires_grad=True)
        self.last_attention: list[np.ndarray] = []

    # -- parameter plumbing -------------------------------------------------

    def parameters(self):
        return list(self.params.values())

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.params.items()}

    def load_state_arrays(self, state: dict[str, np.ndarray]):
        for name, arr in state.items():
            if name not in self.params:
                raise KeyError(f"unknown parameter {name!r}")
            if self.params[name].data.shape != arr.shape:
                raise ValueError(
                    f"parameter {name!r}: shape {arr.shape} != {self.params[name].data.shape}")
            self.params[name].data = arr.astype(self.dtype, copy=True)

    def to_dtype(self, dtype) -> "CamdModel":
        """In-place dtype switch (float64 for gradient checking)."""
        self.dtype = np.dtype(dtype)
        for p in self.params.values():
            p.data = p.data.astype(self.dtype)
        return self

    # -- building blocks ----------------------------------------------------

    def _p(self, name: str) -> Tensor:
        return self.params[name]

    def embed(self, x: Tensor, prefix: str = "ext") -> Tensor:
        """[B, A, L, 2] -> [B, A, L_e, C]: pointwise 2->C projection, then
        stride-2 conv/ReLU stages shared across the antenna axis."""
        cfg = self.config
        b, a, length, _ = x.shape
        h = reshape(x, (b * a, length, 2))
        h = linear(h, self._p(f"{prefix}.proj.w"), self._p(f"{prefix}.proj.b"))
        for k in range(cfg.conv_layers):
            h = conv1d(h, self._p(f"{prefix}.conv{k}.w"), self._p(f"{prefix}.conv{k}.b"),
                       stride=2, pad=cfg.kernel // 2)
            h = relu(h)
        return reshape(h, (b, a, h.shape[1], h.shape[2]))

    def _mhsa(self, x: Tensor, blk: str, heads: int) -> Tensor:
        b, a, t, c = x.shape
        d = c // heads

        def split_heads(y):
            return transpose(reshape(y, (b, a, t, heads, d)), (0, 2, 3, 1, 4))

        q = split_heads(linear(x, self._p(f"{blk}.attn.wq"), self._p(f"{blk}.attn.bq")))
        k = split_heads(linear(x, self._p(f"{blk}.attn.wk"), self._p(f"{blk}.attn.bk")))
        v = split_heads(linear(x, self._p(f"{blk}.attn.wv"), self._p(f"{blk}.attn.bv")))
        scores = scale(matmul(q, transpose(k, (0, 1, 2, 4, 3))), 1.0 / math.sqrt(d))
        probs = softmax(scores)                      # [B, T, h, A, A]
        self.last_attention.append(probs.data)
        out = matmul(probs, v)                       # [B, T, h, A, d]
        out = reshape(transpose(out, (0, 3, 1, 2, 4)), (b, a, t, c))
        return linear(out, self._p(f"{blk}.attn.wo"), self._p(f"{blk}.attn.bo"))

    def _reglu_ffn(self, x: Tensor, blk: str) -> Tensor:
        gate = relu(linear(x, self._p(f"{blk}.ffn.w1"), self._p(f"{blk}.ffn.b1")))
        value = linear(x, self._p(f"{blk}.ffn.w2"), self._p(f"{blk}.ffn.b2"))
        return linear(mul(gate, value), self._p(f"{blk}.ffn.w3"), self._p(f"{blk}.ffn.b3"))

    def antenna_block(self, x: Tensor, index: int, prefix: str = "ext",
                      heads: int | None = None) -> Tensor:
        """Pre-norm transformer block attending across antennas per time slot."""
        blk = f"{prefix}.block{index}"
        if heads is None:
            heads = self.config.heads if prefix == "ext" else self.config.cc_heads
        h = layer_norm(x, self._p(f"{blk}.ln1.g"), self._p(f"{blk}.ln1.b"))
        x = add(x, self._mhsa(h, blk, heads))
        h = layer_norm(x, self._p(f"{blk}.ln2.g"), self._p(f"{blk}.ln2.b"))
        return add(x, self._reglu_ffn(h, blk))

    def _lstm_final(self, x: Tensor, prefix: str, layers: int) -> Tensor:
        """Run stacked LSTMs along time; return final hidden state [B, A, C]."""
        b, a, t, c = x.shape
        h_seq = reshape(x, (b * a, t, c))
        final = None
        for k in range(layers):
            wx = self._p(f"{prefix}.lstm{k}.wx")
            wh = self._p(f"{prefix}.lstm{k}.wh")
            bias = self._p(f"{prefix}.lstm{k}.b")
            # input-side gate projections for the whole sequence in one matmul;
            # the time loop only carries the recurrent projection
            xg = reshape(linear(reshape(h_seq, (b * a * t, c)), wx, bias),
                         (b * a, t, 4 * c))
            zeros = Tensor(np.zeros((b * a, c), dtype=h_seq.dtype))
            h, cell = zeros, zeros
            outputs = []
            for step in range(t):
                gates = add(take(xg, (slice(None), step)), linear(h, wh))
                h, cell = lstm_update(gates, cell)
                outputs.append(h)
            h_seq = stack(outputs, axis=1)
            final = h
        return reshape(final, (b, a, c))

    def temporal_stage(self, x: Tensor, prefix: str = "ext") -> Tensor:
        """Stacked LSTM over time, final state mean-pooled across antennas,
        then the linear classifier: [B, A, T, C] -> logits [B, K]."""
        final = self._lstm_final(x, prefix, self.config.effective_lstm_layers)
        pooled = tmean(final, axis=1)
        return linear(pooled, self._p("cls.w"), self._p("cls.b"))

    # -- channel compensation ----------------------------------------------

    def cc_predict(self, r: Tensor) -> Tensor:
        """Predict the compensation tensor [B, Nr, Nt, L, 2].

        The lightweight stack summarizes each receive stream; a shared
        zero-initialized head emits per-(j, i) complex offsets added to the
        identity pattern, broadcast along L (temporal averaging via the
        final LSTM state)."""
        cfg = self.config
        b, nr, length, _ = r.shape
        feats = self.embed(r, "cc")
        for k in range(cfg.attn_layers):
            feats = self.antenna_block(feats, k, "cc", cfg.cc_heads)
        summary = self._lstm_final(feats, "cc", cfg.lstm_layers)      # [B, Nr, C_cc]
        offsets = linear(summary, self._p("cc.head.w"), self._p("cc.head.b"))
        offsets = reshape(offsets, (b, nr, cfg.nt, 2))
        ident = np.zeros((nr, cfg.nt, 2), dtype=r.dtype)
        for j in range(min(nr, cfg.nt)):
            ident[j, j, 0] = 1.0
        base = add(offsets, Tensor(np.broadcast_to(ident, (b, nr, cfg.nt, 2)).copy()))
        return expand(base, axis=3, n=length)                          # [B, Nr, Nt, L, 2]

    def cc_apply(self, comp: Tensor, r: Tensor) -> Tensor:
        """Complex-domain compensation: sum over receive antennas j of
        comp[j, i] * r[j], per time slot. [B,Nr,Nt,L,2] x [B,Nr,L,2] -> [B,Nt,L,2]."""
        b, nr, nt, length, _ = comp.shape
        if r.shape != (b, nr, length, 2):
            raise ValueError(f"cc_apply: signal shape {r.shape} incompatible with "
                             f"compensation shape {comp.shape}")
        h_i = take(comp, (Ellipsis, 0))
        h_q = take(comp, (Ellipsis, 1))
        r_i = expand(take(r, (Ellipsis, 0)), axis=2, n=nt)
        r_q = expand(take(r, (Ellipsis, 1)), axis=2, n=nt)
        out_i = tsum(add(mul(h_i, r_i), neg_mul(h_q, r_q)), axis=1)
        out_q = tsum(add(mul(h_q, r_i), mul(h_i, r_q)), axis=1)
        return stack([out_i, out_q], axis=3)

    # -- full forward -------------------------------------------------------

    def forward(self, r) -> Tensor:
        """Received frames -> logits [B, K]; accepts [B, Nr, L, 2] or [Nr, L, 2]."""
        cfg = self.config
        if not isinstance(r, Tensor):
            r = Tensor(np.asarray(r, dtype=self.dtype))
        squeeze = r.data.ndim == 3
        if squeeze:
            r = reshape(r, (1,) + r.shape)
        if r.shape[1:] != (cfg.nr, cfg.length, 2):
            raise ValueError(f"forward: frame shape {r.shape[1:]} does not match config "
                             f"({cfg.nr}, {cfg.length}, 2)")
        if not np.all(np.isfinite(r.data)):
            raise NumericError("forward: non-finite input")
        self.last_attention = []

        if cfg.has_cc:
            comp = self.cc_predict(r)
            x = self.cc_apply(comp, r)                  # [B, Nt, L, 2]
            x = reshape(x, (x.shape[0], cfg.nt, cfg.length, 2))
        else:
            x = r
        feats = self.embed(x, "ext")
        if cfg.has_attention:
            for k in range(cfg.effective_attn_layers):
                feats = self.antenna_block(feats, k, "ext")
        if cfg.has_lstm:
            logits = self.temporal_stage(feats)
        else:
            pooled = tmean(tmean(feats, axis=2), axis=1)    # over time then antennas
            logits = linear(pooled, self._p("cls.w"), self._p("cls.b"))
        if squeeze:
            logits = reshape(logits, (self.config.num_classes,))
        return logits

    __call__ = forward


def neg_mul(a: Tensor, b: Tensor) -> Tensor:
    return scale(mul(a, b), -1.0)
