"""Parameter and FLOP accounting from closed-form per-layer expressions.

FLOPs count one forward pass of a single frame as multiply-adds x 2;
normalization layers and activations are omitted (sub-percent terms).
"""

from __future__ import annotations

import math

import numpy as np

from .config import ModelConfig
from .network import parameter_shapes


def count_params(cfg: ModelConfig) -> int:
    """Exact trainable-scalar count; equals the serialized checkpoint total."""
    return sum(int(np.prod(shape, dtype=np.int64)) for _, shape, _ in parameter_shapes(cfg))


def _conv_lengths(length: int, stages: int) -> list[int]:
    out = []
    for _ in range(stages):
        length = length // 2
        out.append(length)
    return out


def _stack_flops(cfg: ModelConfig, width: int, antennas: int, attn_layers: int,
                 lstm_layers: int, with_attention: bool, with_lstm: bool) -> int:
    c = width
    total = antennas * cfg.length * 2 * 2 * c                      # 2->C projection
    for lout in _conv_lengths(cfg.length, cfg.conv_layers):
        total += antennas * lout * 2 * cfg.kernel * c * c
    t = cfg.embedded_length
    if with_attention:
        hidden = cfg.ffn_mult * c
        per_block = (
            4 * antennas * t * 2 * c * c                           # Q, K, V, output proj
            + 4 * t * antennas * antennas * c                      # QK^T and probs @ V
            + antennas * t * 2 * c * hidden * 2                    # ReGLU gate and value
            + antennas * t * 2 * hidden * c                        # FFN output proj
        )
        total += attn_layers * per_block
    if with_lstm:
        total += lstm_layers * antennas * t * 2 * 2 * c * 4 * c    # x and h gate matmuls
    return total


def estimate_flops(cfg: ModelConfig) -> int:
    total = 0
    if cfg.has_cc:
        total += _stack_flops(cfg, cfg.cc_channels, cfg.nr, cfg.attn_layers,
                              cfg.lstm_layers, True, True)
        total += cfg.nr * 2 * cfg.cc_channels * cfg.nt * 2         # compensation head
        total += cfg.length * cfg.nt * cfg.nr * 8                  # complex compensation
    total += _stack_flops(cfg, cfg.channels, cfg.antenna_axis, cfg.effective_attn_layers,
                          cfg.effective_lstm_layers, cfg.has_attention, cfg.has_lstm)
    total += 2 * cfg.channels * cfg.num_classes                    # classifier
    return total
