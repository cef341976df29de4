"""Deterministic stand-ins for signatures, shared keys and MACs.

Nothing here is secure against a real attacker: every node's secret is
derived from the scenario seed. Within the simulation, though, a node
can only produce valid signatures or MACs by going through the provider
with its own id, which is all the protocol logic needs.
"""

from __future__ import annotations

import hashlib
from functools import lru_cache
from typing import Protocol

TAG_SIZE = 8


class CryptoProvider(Protocol):
    def sign(self, node: int, data: bytes) -> bytes: ...

    def verify(self, node: int, data: bytes, signature: bytes) -> bool: ...

    def shared_key(self, a: int, b: int) -> bytes: ...

    def mac(self, key: bytes, data: bytes) -> bytes: ...


class SimulatedCrypto:
    """Keyed BLAKE2b under per-node secrets derived from ``seed``."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self._secret = lru_cache(maxsize=None)(self._derive_secret)

    def _derive_secret(self, node: int) -> bytes:
        material = b"node-secret" + self.seed.to_bytes(8, "big", signed=False) + node.to_bytes(4, "big")
        return hashlib.blake2b(material, digest_size=32).digest()

    def sign(self, node: int, data: bytes) -> bytes:
        return hashlib.blake2b(data, key=self._secret(node), digest_size=16).digest()

    def verify(self, node: int, data: bytes, signature: bytes) -> bool:
        return self.sign(node, data) == signature

    def shared_key(self, a: int, b: int) -> bytes:
        lo, hi = sorted((a, b))
        return hashlib.blake2b(self._secret(lo) + self._secret(hi), digest_size=16).digest()

    def mac(self, key: bytes, data: bytes) -> bytes:
        return hashlib.blake2b(data, key=key, digest_size=TAG_SIZE).digest()


class NullCrypto:
    """Accepts everything. Used by the unsecured baseline and by fault-injection tests."""

    def sign(self, node: int, data: bytes) -> bytes:
        return b""

    def verify(self, node: int, data: bytes, signature: bytes) -> bool:
        return True

    def shared_key(self, a: int, b: int) -> bytes:
        return bytes(16)

    def mac(self, key: bytes, data: bytes) -> bytes:
        return bytes(TAG_SIZE)
