"""MIMO automatic modulation recognition toolkit.

Subpackages: ``diffcore`` (reverse-mode array engine), ``sigsynth``
(dataset synthesis and serialization), ``model`` (the classifier network),
``traineval`` (splitting, training, evaluation), ``cli``.
"""

from . import diffcore, model, sigsynth, traineval

__version__ = "0.1.0"

__all__ = ["diffcore", "model", "sigsynth", "traineval", "__version__"]
