"""ULID-style id generation: lexicographically sortable, opaque strings."""

from __future__ import annotations

import os
import threading
import time

_CROCKFORD = "0123456789ABCDEFGHJKMNPQRSTVWXYZ"

_lock = threading.Lock()
_last: tuple[int, int] | None = None  # (timestamp_ms, 80-bit randomness)


def _encode(value: int, length: int) -> str:
    chars = []
    for _ in range(length):
        chars.append(_CROCKFORD[value & 0x1F])
        value >>= 5
    return "".join(reversed(chars))


def new_id() -> str:
    """26-char ULID: 48-bit ms timestamp + 80-bit randomness.

    Ids generated by one process are strictly increasing even within the
    same millisecond (randomness is bumped on collision).
    """
    global _last
    with _lock:
        now_ms = time.time_ns() // 1_000_000
        rand = int.from_bytes(os.urandom(10), "big")
        if _last is not None and now_ms <= _last[0]:
            now_ms = _last[0]
            rand = (_last[1] + 1) & ((1 << 80) - 1)
        _last = (now_ms, rand)
    return _encode(now_ms, 10) + _encode(rand, 16)
