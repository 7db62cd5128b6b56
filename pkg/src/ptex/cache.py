from __future__ import annotations

import logging
import time
from collections import OrderedDict
from collections.abc import Hashable
from typing import Any

logger = logging.getLogger(__name__)

DEFAULT_TTL = 900  # 15 minutes
DEFAULT_MAX_ENTRIES = 256


class FitCache:
    """In-memory fit results keyed by (dataset digest, method, ...), per-key TTL.

    The oldest entry is evicted once ``max_entries`` is reached.
    """

    def __init__(self, default_ttl: float = DEFAULT_TTL, max_entries: int = DEFAULT_MAX_ENTRIES) -> None:
        if max_entries < 1:
            raise ValueError(f"max_entries must be >= 1, got {max_entries}")
        self._default_ttl = default_ttl
        self._max_entries = max_entries
        self._store: OrderedDict[tuple[Hashable, ...], tuple[float, Any]] = OrderedDict()

    def __len__(self) -> int:
        return len(self._store)

    def get(self, key: tuple[Hashable, ...]) -> Any | None:
        entry = self._store.get(key)
        if entry is None:
            return None
        expires_at, value = entry
        if time.monotonic() > expires_at:
            del self._store[key]
            return None
        logger.debug("Cache hit for %s", key)
        return value

    def set(self, key: tuple[Hashable, ...], value: Any, ttl: float | None = None) -> None:
        expires_at = time.monotonic() + (ttl if ttl is not None else self._default_ttl)
        self._store.pop(key, None)
        self._store[key] = (expires_at, value)
        while len(self._store) > self._max_entries:
            self._store.popitem(last=False)

    def invalidate(self, digest: str | None = None) -> None:
        """Drop every entry for one dataset digest; no digest clears all."""
        if digest is None:
            self._store.clear()
        else:
            for k in [k for k in self._store if k[0] == digest]:
                del self._store[k]
