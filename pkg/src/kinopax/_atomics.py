"""Atomic counter/bitset primitives shared by the decomposition module.

Backed by real __atomic builtins when the compiled kernel is present; the
pure-Python fallback guards the same operations with one process-wide lock,
trading lock-freedom for portability.
"""

from __future__ import annotations

import threading

try:  # pragma: no cover - exercised only when the extension is built
    from ._kernel import atomic_add_i64, atomic_exchange_u8

    COMPILED = True
except ImportError:  # pragma: no cover
    COMPILED = False
    _lock = threading.Lock()

    def atomic_add_i64(arr, idx: int, delta: int = 1) -> int:
        with _lock:
            old = int(arr[idx])
            arr[idx] = old + delta
            return old

    def atomic_exchange_u8(arr, idx: int, value: int) -> int:
        with _lock:
            old = int(arr[idx])
            arr[idx] = value
            return old
