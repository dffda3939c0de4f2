"""
Thread-safe cache of OPF batch results keyed by the distillation iterate.

One iteration of the bilevel solver evaluates the OPF batch at up to three
points and needs the sensitivities at one of them; the same point is often
revisited (trace rows, fallback steps, stage-two warm starts). Entries are keyed
by a digest of the iterate's bytes and evicted least-recently-used.

Uses threading.RLock so batch workers and the outer loop can share one cache.
"""

import hashlib
import logging
from collections import OrderedDict
from threading import RLock
from typing import Generic, Optional, TypeVar

import numpy as np

logger = logging.getLogger(__name__)

V = TypeVar("V")

DEFAULT_MAX_ENTRIES = 16


def array_key(W: np.ndarray) -> str:
    """Digest identifying an array by shape and exact contents."""
    arr = np.ascontiguousarray(W, dtype=float)
    digest = hashlib.sha256(arr.tobytes())
    digest.update(str(arr.shape).encode())
    return digest.hexdigest()


class IterateCache(Generic[V]):
    """
    Bounded LRU mapping from iterates to computed values.

    Example:
        >>> cache: IterateCache[list] = IterateCache(max_entries=4)
        >>> cache.put(W, solutions)
        >>> cache.get(W) is solutions
        True
    """

    def __init__(self, max_entries: int = DEFAULT_MAX_ENTRIES) -> None:
        self._entries: "OrderedDict[str, V]" = OrderedDict()
        self._lock = RLock()
        self._max_entries = max(1, max_entries)
        self.hits = 0
        self.misses = 0

    def get(self, W: np.ndarray) -> Optional[V]:
        key = array_key(W)
        with self._lock:
            value = self._entries.get(key)
            if value is None:
                self.misses += 1
                return None
            self._entries.move_to_end(key)
            self.hits += 1
            return value

    def put(self, W: np.ndarray, value: V) -> None:
        key = array_key(W)
        with self._lock:
            self._entries[key] = value
            self._entries.move_to_end(key)
            while len(self._entries) > self._max_entries:
                self._entries.popitem(last=False)

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()
            self.hits = 0
            self.misses = 0

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)
