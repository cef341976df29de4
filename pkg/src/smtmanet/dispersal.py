"""Message dispersal: any ``m`` of ``n`` shares rebuild the message.

The code is a systematic maximum-distance-separable code over GF(256).
The generator is a Vandermonde matrix on the points ``0 .. n-1``
normalised so that its top ``m`` rows are the identity; every ``m``-row
submatrix of it stays invertible, which is what gives the any-m-of-n
property.

The padded message is ``len(message)`` as a 4-byte big-endian prefix
followed by the message and zero fill up to a multiple of ``m``.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import numpy as np

from . import gf256

LENGTH_HEADER = 4
_WIRE_HEAD = struct.Struct(">QBBBH")


class DispersalError(Exception):
    """Base class for dispersal failures."""


class ConfigurationError(DispersalError, ValueError):
    pass


class InsufficientSharesError(DispersalError):
    pass


class InconsistentSharesError(DispersalError):
    pass


@dataclass(frozen=True)
class DispersalConfig:
    n: int
    m: int

    def __post_init__(self):
        if not isinstance(self.n, int) or not isinstance(self.m, int):
            raise ConfigurationError("n and m must be integers")
        if not 1 <= self.n <= 255:
            raise ConfigurationError(f"n must be in [1, 255], got {self.n}")
        if not 1 <= self.m <= self.n:
            raise ConfigurationError(f"m must be in [1, n={self.n}], got {self.m}")

    @property
    def redundancy(self) -> float:
        return self.n / self.m


def share_checksum(dispersal_id: int, index: int, payload: bytes) -> int:
    return zlib.crc32(dispersal_id.to_bytes(8, "big") + bytes([index]) + payload)


@dataclass(frozen=True)
class MessageShare:
    dispersal_id: int
    index: int
    n: int
    m: int
    payload: bytes
    checksum: int

    @property
    def valid(self) -> bool:
        return share_checksum(self.dispersal_id, self.index, self.payload) == self.checksum

    def to_bytes(self) -> bytes:
        """Wire layout: id(8) | index(1) | n(1) | m(1) | len(2) | payload | crc(4)."""
        head = _WIRE_HEAD.pack(self.dispersal_id, self.index, self.n, self.m, len(self.payload))
        return head + self.payload + self.checksum.to_bytes(4, "big")

    @classmethod
    def from_bytes(cls, data: bytes) -> "MessageShare":
        if len(data) < _WIRE_HEAD.size + 4:
            raise ValueError("share record too short")
        did, index, n, m, plen = _WIRE_HEAD.unpack_from(data)
        if len(data) != _WIRE_HEAD.size + plen + 4:
            raise ValueError(f"share record length {len(data)} does not match payload_len {plen}")
        payload = bytes(data[_WIRE_HEAD.size:_WIRE_HEAD.size + plen])
        checksum = int.from_bytes(data[-4:], "big")
        return cls(did, index, n, m, payload, checksum)


@lru_cache(maxsize=None)
def generator_matrix(n: int, m: int) -> np.ndarray:
    """n x m systematic generator; rows ``0..m-1`` are the identity."""
    vander = np.array([[gf256.power(x, j) for j in range(m)] for x in range(n)], dtype=np.uint8)
    top_inv = gf256.invert(vander[:m])
    gen = gf256.matmul(vander, top_inv)
    gen.setflags(write=False)
    return gen


@lru_cache(maxsize=4096)
def _decode_matrix(n: int, m: int, rows: tuple[int, ...]) -> np.ndarray:
    return gf256.invert(generator_matrix(n, m)[list(rows)])


def disperse(message: bytes, config: DispersalConfig, dispersal_id: int) -> list[MessageShare]:
    if not message:
        raise ValueError("message must be non-empty")
    if not isinstance(config, DispersalConfig):
        raise ConfigurationError("config must be a DispersalConfig")
    if not 0 <= dispersal_id < 2**64:
        raise ValueError("dispersal_id must fit in 8 bytes")
    n, m = config.n, config.m
    framed = len(message).to_bytes(LENGTH_HEADER, "big") + bytes(message)
    stripe = -(-len(framed) // m)
    if stripe > 0xFFFF:
        raise ValueError("message too long for a 16-bit share payload")
    buf = np.zeros(stripe * m, dtype=np.uint8)
    buf[:len(framed)] = np.frombuffer(framed, dtype=np.uint8)
    chunks = buf.reshape(m, stripe)

    gen = generator_matrix(n, m)
    shares = []
    for i in range(n):
        if i < m:
            payload = chunks[i].tobytes()
        else:
            payload = gf256.matmul(gen[i:i + 1], chunks)[0].tobytes()
        shares.append(MessageShare(dispersal_id, i, n, m, payload,
                                   share_checksum(dispersal_id, i, payload)))
    return shares


def reconstruct(shares: Iterable[MessageShare]) -> bytes:
    """Rebuild the message from any ``m`` intact shares.

    Shares failing their checksum are dropped before counting, so a
    corrupted share can cost availability but never correctness.
    """
    good: dict[int, MessageShare] = {}
    for share in shares:
        if share.valid:
            good.setdefault(share.index, share)
    if not good:
        raise InsufficientSharesError("no valid shares")

    first = next(iter(good.values()))
    ident = (first.dispersal_id, first.n, first.m)
    for share in good.values():
        if (share.dispersal_id, share.n, share.m) != ident:
            raise InconsistentSharesError(
                f"share {share.index} belongs to {(share.dispersal_id, share.n, share.m)}, expected {ident}")
        if len(share.payload) != len(first.payload):
            raise InconsistentSharesError("share payload lengths differ")
        if not 0 <= share.index < share.n:
            raise InconsistentSharesError(f"share index {share.index} out of range")
    _, n, m = ident
    try:
        DispersalConfig(n, m)
    except ConfigurationError as exc:
        raise InconsistentSharesError(str(exc)) from None
    if len(good) < m:
        raise InsufficientSharesError(f"need {m} distinct valid shares, have {len(good)}")

    rows = tuple(sorted(good)[:m])
    stacked = np.stack([np.frombuffer(good[r].payload, dtype=np.uint8) for r in rows])
    if rows == tuple(range(m)):
        data = stacked
    else:
        data = gf256.matmul(_decode_matrix(n, m, rows), stacked)
    framed = data.tobytes()
    length = int.from_bytes(framed[:LENGTH_HEADER], "big")
    if length > len(framed) - LENGTH_HEADER:
        raise InconsistentSharesError("embedded length exceeds decoded data")
    return framed[LENGTH_HEADER:LENGTH_HEADER + length]
