"""Domain-separated BLAKE3 derivations used by every protocol step.

Framing rules (bit-exact, documented in FORMATS.md):

* domain labels are raw ASCII, drawn from a prefix-free set;
* integers are 8-byte little-endian;
* digests are raw 32 bytes;
* variable-length byte strings carry an 8-byte little-endian length prefix.

All functions are pure.  The underlying hasher can be swapped for a counting
or recording variant with :func:`hash_counter` / :func:`recording_hasher`;
hot loops elsewhere fetch it once through :func:`hasher`.
"""

from __future__ import annotations

import contextlib
from typing import Iterator

from blake3 import blake3

DIGEST_SIZE = 32
MAX_COORD_BITS = 63

LABEL_INIT = b"init"
LABEL_CAUSAL = b"causal"
LABEL_ADDR = b"addr"
LABEL_WRITE = b"write"
LABEL_LEAF = b"leaf"
LABEL_NODE = b"node"
LABEL_ROOTLEAF = b"rootleaf"
LABEL_PAD = b"pad"

LABELS = (
    LABEL_INIT, LABEL_CAUSAL, LABEL_ADDR, LABEL_WRITE,
    LABEL_LEAF, LABEL_NODE, LABEL_ROOTLEAF, LABEL_PAD,
)

_hasher = blake3


def hasher():
    """Return the active hash constructor (``hasher()(data).digest()``)."""
    return _hasher


class CountingHasher:
    """Drop-in for the ``blake3`` constructor that counts invocations."""

    def __init__(self) -> None:
        self.calls = 0

    def __call__(self, data: bytes = b""):
        self.calls += 1
        return blake3(data)


class RecordingHasher:
    """Counts invocations and keeps every input, for hash-only replays."""

    def __init__(self) -> None:
        self.inputs: list[bytes] = []

    @property
    def calls(self) -> int:
        return len(self.inputs)

    def __call__(self, data: bytes = b""):
        self.inputs.append(bytes(data))
        return blake3(data)


@contextlib.contextmanager
def _swapped(replacement) -> Iterator:
    global _hasher
    previous = _hasher
    _hasher = replacement
    try:
        yield replacement
    finally:
        _hasher = previous


def hash_counter():
    """Context manager counting every hash evaluated inside it."""
    return _swapped(CountingHasher())


def recording_hasher():
    """Context manager recording the input of every hash evaluated inside it."""
    return _swapped(RecordingHasher())


def H(data: bytes) -> bytes:
    return _hasher(data).digest()


def u64(n: int) -> bytes:
    return n.to_bytes(8, "little")


def _digest(x: bytes, name: str) -> bytes:
    if len(x) != DIGEST_SIZE:
        raise ValueError(f"{name} must be {DIGEST_SIZE} bytes, got {len(x)}")
    return bytes(x)


def coord_from_digest(digest: bytes, d_hc: int) -> int:
    """Low ``d_hc`` bits of the little-endian integer in digest bytes 0..8."""
    return int.from_bytes(digest[:8], "little") & ((1 << d_hc) - 1)


def _check_bits(d_hc: int) -> None:
    if not 0 <= d_hc <= MAX_COORD_BITS:
        raise ValueError(f"d_hc must be in [0, {MAX_COORD_BITS}], got {d_hc}")


def init_data_digest(seed: bytes, i: int, parent_data: bytes | None = None) -> bytes:
    seed = _digest(seed, "seed")
    if (parent_data is None) != (i == 0):
        raise ValueError("parent_data must be given exactly when i >= 1")
    tail = b"" if parent_data is None else _digest(parent_data, "parent_data")
    return H(LABEL_INIT + seed + u64(i) + tail)


def init_causal_digest(seed: bytes, i: int, parent_causal: bytes | None = None) -> bytes:
    seed = _digest(seed, "seed")
    if (parent_causal is None) != (i == 0):
        raise ValueError("parent_causal must be given exactly when i >= 1")
    tail = b"" if parent_causal is None else _digest(parent_causal, "parent_causal")
    return H(LABEL_CAUSAL + seed + u64(i) + tail)


def derive_read_coord(cursor: bytes, j: int, d_hc: int) -> int:
    _check_bits(d_hc)
    return coord_from_digest(H(LABEL_ADDR + _digest(cursor, "cursor") + u64(j)), d_hc)


def derive_write_coord(cursor: bytes, d_hc: int) -> int:
    _check_bits(d_hc)
    return coord_from_digest(H(LABEL_WRITE + _digest(cursor, "cursor")), d_hc)


def chain_cursor(cursor: bytes, data: bytes, causal: bytes) -> bytes:
    return H(_digest(cursor, "cursor") + _digest(data, "data") + _digest(causal, "causal"))


def bind_data(old_data: bytes, cursor: bytes, old_causal: bytes) -> bytes:
    """New data field of a written block: old data, cursor, old causal hash."""
    return H(_digest(old_data, "old_data") + _digest(cursor, "cursor")
             + _digest(old_causal, "old_causal"))


def bind_causal(old_causal: bytes, cursor: bytes, t: int) -> bytes:
    """New causal field of a written block, tied to the step index."""
    return H(_digest(old_causal, "old_causal") + _digest(cursor, "cursor") + u64(t))


def extend_transcript(t_prev: bytes, t: int, cursor: bytes, root: bytes) -> bytes:
    return H(_digest(t_prev, "t_prev") + u64(t) + _digest(cursor, "cursor")
             + _digest(root, "root"))


def initial_transcript(seed: bytes, n: int, r0: bytes) -> bytes:
    return H(_digest(seed, "seed") + u64(n) + _digest(r0, "r0"))


def derive_seed(task_id: bytes, nonce: bytes) -> bytes:
    """Arena seed bound to a task identifier and a nonce (length-prefixed)."""
    task_id, nonce = bytes(task_id), bytes(nonce)
    return H(u64(len(task_id)) + task_id + u64(len(nonce)) + nonce)


def fiat_shamir_sigma(t_final: bytes, commitment: bytes) -> bytes:
    return H(_digest(t_final, "t_final") + _digest(commitment, "commitment"))


def fiat_shamir_step(sigma: bytes, i: int, K: int) -> int:
    """Challenged step in ``[1, K]`` for challenge index ``i``.

    Plain reduction modulo K; the bias is at most K / 2**64.
    """
    if K < 1:
        raise ValueError("K must be >= 1 to draw challenges")
    return int.from_bytes(H(_digest(sigma, "sigma") + u64(i))[:8], "little") % K + 1


def leaf_digest(v: int, block: bytes) -> bytes:
    """Merkle leaf for arena vertex ``v`` holding the 64-byte ``data || causal``."""
    if len(block) != 2 * DIGEST_SIZE:
        raise ValueError("block must be 64 bytes")
    return H(LABEL_LEAF + u64(v) + bytes(block))


def node_digest(left: bytes, right: bytes) -> bytes:
    return H(LABEL_NODE + left + right)


def root_leaf_digest(t: int, root: bytes) -> bytes:
    return H(LABEL_ROOTLEAF + u64(t) + _digest(root, "root"))


def pad_leaf_digest(index: int) -> bytes:
    return H(LABEL_PAD + u64(index))
