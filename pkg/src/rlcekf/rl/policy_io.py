"""Binary policy files.

Layout (all little-endian)::

    b"RLCEKF01"
    uint32 n, int32[n]      actor layer sizes
    uint32 m, int32[m]      critic layer sizes (shared by the target critic)
    float64 u_max, float64 gamma
    float32[...]            actor, critic, target critic; per layer W (row-major, out x in) then b
    uint32                  CRC32 of everything between the magic and the checksum
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError, PolicyFormatError
from .policy import CompensatorPolicy, layer_sizes

MAGIC = b"RLCEKF01"
_FAMILY = MAGIC[:6]


def _pack_sizes(sizes) -> bytes:
    return struct.pack("<I", len(sizes)) + struct.pack(f"<{len(sizes)}i", *sizes)


def to_bytes(policy: CompensatorPolicy) -> bytes:
    parts = [_pack_sizes(layer_sizes(policy.actor)), _pack_sizes(layer_sizes(policy.critic)),
             struct.pack("<dd", policy.u_max, policy.gamma)]
    for net in (policy.actor, policy.critic, policy.target_critic):
        for W, b in net:
            parts.append(np.ascontiguousarray(W, dtype="<f4").tobytes())
            parts.append(np.ascontiguousarray(b, dtype="<f4").tobytes())
    payload = b"".join(parts)
    return MAGIC + payload + struct.pack("<I", zlib.crc32(payload))


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise PolicyFormatError("policy file is truncated")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def sizes(self) -> list[int]:
        (n,) = struct.unpack("<I", self.take(4))
        if not 2 <= n <= 64:
            raise PolicyFormatError(f"implausible layer count {n}")
        sizes = list(struct.unpack(f"<{n}i", self.take(4 * n)))
        if min(sizes) < 1:
            raise PolicyFormatError("layer sizes must be positive")
        return sizes

    def layers(self, sizes):
        out = []
        for n_in, n_out in zip(sizes[:-1], sizes[1:]):
            W = np.frombuffer(self.take(4 * n_in * n_out), dtype="<f4").reshape(n_out, n_in)
            b = np.frombuffer(self.take(4 * n_out), dtype="<f4")
            out.append((W.astype(np.float32), b.astype(np.float32)))
        return out


def from_bytes(buf: bytes) -> CompensatorPolicy:
    if len(buf) < len(MAGIC):
        raise PolicyFormatError("policy file is truncated")
    magic = buf[:len(MAGIC)]
    if magic != MAGIC:
        if magic.startswith(_FAMILY):
            raise PolicyFormatError(f"unsupported policy file version {magic[6:].decode(errors='replace')!r}")
        raise PolicyFormatError("not a policy file (bad magic bytes)")
    if len(buf) < len(MAGIC) + 4:
        raise PolicyFormatError("policy file is truncated")
    payload, (crc,) = buf[len(MAGIC):-4], struct.unpack("<I", buf[-4:])
    r = _Reader(payload)
    actor_sizes = r.sizes()
    critic_sizes = r.sizes()
    u_max, gamma = struct.unpack("<dd", r.take(16))
    actor = r.layers(actor_sizes)
    critic = r.layers(critic_sizes)
    target = r.layers(critic_sizes)
    if r.pos != len(payload):
        raise PolicyFormatError("trailing bytes after the weights")
    if zlib.crc32(payload) != crc:
        raise PolicyFormatError("checksum mismatch (file corrupted)")
    try:
        policy = CompensatorPolicy(actor, critic, target, u_max, gamma)
    except ConfigurationError as exc:
        raise PolicyFormatError(str(exc)) from exc
    if not (policy.all_finite() and np.isfinite(u_max) and np.isfinite(gamma)):
        raise PolicyFormatError("policy contains non-finite values")
    return policy


def save_policy(policy: CompensatorPolicy, path) -> None:
    Path(path).write_bytes(to_bytes(policy))


def load_policy(path) -> CompensatorPolicy:
    try:
        buf = Path(path).read_bytes()
    except FileNotFoundError as exc:
        raise PolicyFormatError(f"policy file not found: {path}") from exc
    return from_bytes(buf)
