"""Architecture hyperparameters."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

VARIANTS = ("full", "no_cc", "transformer_only", "lstm_only", "cnn_only")


class ConfigError(ValueError):
    pass


@dataclass
class ModelConfig:
    num_classes: int
    nt: int = 2
    nr: int = 2
    length: int = 256
    channels: int = 64          # extractor width C
    cc_channels: int = 32       # compensation-module width
    conv_layers: int = 2        # strided conv stages in the embedding
    attn_layers: int = 2        # antenna-attention blocks
    lstm_layers: int = 2        # temporal LSTM layers
    heads: int = 4
    ffn_mult: int = 2
    kernel: int = 3
    variant: str = "full"

    def __post_init__(self):
        if self.num_classes < 2:
            raise ConfigError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant {self.variant!r} not in {VARIANTS}")
        if self.channels % self.heads:
            raise ConfigError(f"channels {self.channels} not divisible by heads {self.heads}")
        if self.kernel % 2 == 0 or self.kernel < 1:
            raise ConfigError(f"kernel must be odd and positive, got {self.kernel}")
        if self.nr < self.nt:
            raise ConfigError(f"Nr ({self.nr}) must be >= Nt ({self.nt})")
        if self.cc_channels % self.cc_heads:
            raise ConfigError(
                f"cc_channels {self.cc_channels} not divisible by cc heads {self.cc_heads}")
        if self.length < 2 ** self.conv_layers * self.kernel:
            raise ConfigError(
                f"length {self.length} too short for {self.conv_layers} stride-2 stages")

    @property
    def cc_heads(self) -> int:
        # keep the per-head width of the lightweight module equal to the extractor's
        return max(1, self.cc_channels * self.heads // self.channels)

    @property
    def embedded_length(self) -> int:
        return self.length // 2 ** self.conv_layers

    @property
    def effective_attn_layers(self) -> int:
        # single-domain variants are deepened to roughly match full-model size
        return 2 * self.attn_layers if self.variant == "transformer_only" else self.attn_layers

    @property
    def effective_lstm_layers(self) -> int:
        return 2 * self.lstm_layers if self.variant == "lstm_only" else self.lstm_layers

    @property
    def has_cc(self) -> bool:
        return self.variant == "full"

    @property
    def has_attention(self) -> bool:
        return self.variant in ("full", "no_cc", "transformer_only")

    @property
    def has_lstm(self) -> bool:
        return self.variant in ("full", "no_cc", "lstm_only")

    @property
    def antenna_axis(self) -> int:
        # streams seen by the extractor: Nt after compensation, else Nr
        return self.nt if self.has_cc else self.nr

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)
