"""Deterministic seed splitting.

A master seed is expanded into independent named streams by hashing the
master seed together with a label path::

    derive_seed(master, "mask", "2,1") == int.from_bytes(sha256(b"<master>/mask/2,1")[:8], "big")

Streams are keyed by name, so adding a node or a judge never shifts the
draws of any other stream.
"""

from __future__ import annotations

import hashlib
import random


def derive_seed(master: int, *labels: object) -> int:
    path = "/".join([str(int(master))] + [str(x) for x in labels])
    return int.from_bytes(hashlib.sha256(path.encode()).digest()[:8], "big")


class RngStreams:
    def __init__(self, master: int):
        self.master = int(master)
        self._streams: dict[tuple, random.Random] = {}

    def get(self, *labels: object) -> random.Random:
        key = tuple(str(x) for x in labels)
        rng = self._streams.get(key)
        if rng is None:
            rng = self._streams[key] = random.Random(derive_seed(self.master, *key))
        return rng

    def seed(self, *labels: object) -> int:
        return derive_seed(self.master, *labels)
