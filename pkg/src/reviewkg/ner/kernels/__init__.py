"""Sequence-model kernels: compiled extension when available, pure NumPy
otherwise.

Set REVIEWKG_PURE_KERNELS=1 to force the fallback (useful for the
benchmark and for debugging a suspected extension issue).
"""

import os

from reviewkg.ner.kernels import pure

_impl = pure
if not os.environ.get("REVIEWKG_PURE_KERNELS"):
    try:
        from reviewkg.ner.kernels import _speedups as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = pure

forward_logz = _impl.forward_logz
forward_backward = _impl.forward_backward
viterbi = _impl.viterbi


def backend() -> str:
    return "pure" if _impl is pure else "compiled"
