"""Hot byte-level kernels with backend selection at import.

The compiled Cython module is preferred; the pure-Python module is the
fallback and the behavioural reference.  Set ``CHAINSHARE_PURE_KERNELS=1``
to force the pure backend (used by the benchmark and for debugging).
"""

import os

from . import _pure

if os.environ.get("CHAINSHARE_PURE_KERNELS") == "1":
    _impl = _pure
    BACKEND = "pure"
else:
    try:
        from . import _speed as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = _pure
        BACKEND = "pure"

xor_bytes = _impl.xor_bytes
counter_blocks = _impl.counter_blocks
offset_counters = _impl.offset_counters
xor_fold = _impl.xor_fold
byte_histogram = _impl.byte_histogram
count_consistent_toy_keys = _impl.count_consistent_toy_keys

__all__ = [
    "BACKEND",
    "xor_bytes",
    "counter_blocks",
    "offset_counters",
    "xor_fold",
    "byte_histogram",
    "count_consistent_toy_keys",
]
