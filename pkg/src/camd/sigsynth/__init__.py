from .constellation import (
    Constellation,
    ModulationError,
    constellation_by_name,
    demodulate,
    known_class_names,
    make_constellation,
    modulate,
)
from .channel import ChannelError, ChannelRealization, add_awgn, apply_channel, draw_channel
from .dataset import (
    BadMagicError,
    DatasetFile,
    DatasetFormatError,
    DatasetSpec,
    SignalFrame,
    TruncatedFileError,
    VersionMismatchError,
    generate_dataset,
    read_dataset,
    write_dataset,
)

__all__ = [
    "Constellation", "ModulationError", "constellation_by_name", "demodulate",
    "known_class_names", "make_constellation", "modulate",
    "ChannelError", "ChannelRealization", "add_awgn", "apply_channel", "draw_channel",
    "BadMagicError", "DatasetFile", "DatasetFormatError", "DatasetSpec",
    "SignalFrame", "TruncatedFileError", "VersionMismatchError",
    "generate_dataset", "read_dataset", "write_dataset",
]
