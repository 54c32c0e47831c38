"""Neural knowledge language model: pipeline bindings."""

from nklm._core import (
    NklmError,
    __version__,
    evaluate,
    fold_word,
    run,
    sha256_hex,
    softmax,
)

__all__ = [
    "NklmError",
    "__version__",
    "evaluate",
    "fold_word",
    "run",
    "sha256_hex",
    "softmax",
]
