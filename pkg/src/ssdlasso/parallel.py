"""Deterministic parallel map and stable seed derivation.

Reproducibility contract: every stochastic computation derives its RNG stream
from ``derive_seed(base, *tags)`` where the tags identify the logical task
(support, sign index, randomization index, ...), never the scheduling order.
Results are reduced in submission order, so outputs are identical for any
worker count.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")

_MASK64 = (1 << 64) - 1


def derive_seed(base: int, *tags: object) -> int:
    """Derive a 64-bit seed from a base seed and a tuple of hashable tags.

    Uses blake2b over the repr of the tags, which is stable across processes
    and Python invocations (unlike the builtin salted ``hash``).
    """
    h = hashlib.blake2b(repr(tags).encode("utf-8"), digest_size=8)
    return (int(base) ^ int.from_bytes(h.digest(), "little")) & _MASK64


def parallel_map(
    fn: Callable[[T], R],
    items: Sequence[T] | Iterable[T],
    workers: int | None = None,
) -> list[R]:
    """Map ``fn`` over ``items`` preserving order.

    ``workers <= 1`` (or a short input) runs sequentially. Thread-based because
    the heavy lifting inside is numpy/scipy, which releases the GIL.
    """
    items = list(items)
    if workers is None or workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
