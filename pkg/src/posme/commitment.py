"""Merkle commitments over the arena and over the root sequence.

Trees are stored heap-style in one bytearray: node ``i`` has children
``2i`` and ``2i + 1``, the root is node 1 and leaf ``v`` is node ``n + v``.
Single-leaf paths and batched multiproofs are both supported; the batched
form is what proofs carry on the wire.
"""

from __future__ import annotations

import dataclasses
import struct
from typing import Iterable, Mapping, Sequence

from . import hashing
from .hashing import DIGEST_SIZE, LABEL_LEAF, LABEL_NODE, u64

_D = DIGEST_SIZE


class MerkleError(ValueError):
    """Malformed opening material (wrong sibling count, bad index, ...)."""


def _is_pow2(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


def next_pow2(n: int) -> int:
    return 1 if n <= 1 else 1 << (n - 1).bit_length()


class MerkleTree:
    """Complete binary tree over ``n`` (a power of two) leaf digests."""

    __slots__ = ("n", "depth", "heap")

    def __init__(self, leaves: bytes | bytearray) -> None:
        if len(leaves) % _D:
            raise MerkleError("leaf buffer is not a whole number of digests")
        n = len(leaves) // _D
        if not _is_pow2(n):
            raise MerkleError(f"leaf count must be a power of two, got {n}")
        self.n = n
        self.depth = n.bit_length() - 1
        heap = bytearray(2 * n * _D)
        heap[n * _D:] = leaves
        b3 = hashing.hasher()
        for i in range(n - 1, 0, -1):
            o = 2 * i * _D
            heap[i * _D:(i + 1) * _D] = b3(LABEL_NODE + heap[o:o + 2 * _D]).digest()
        self.heap = heap

    @classmethod
    def from_leaves(cls, leaves: Iterable[bytes]) -> "MerkleTree":
        return cls(b"".join(leaves))

    def node(self, i: int) -> bytes:
        return bytes(self.heap[i * _D:(i + 1) * _D])

    @property
    def root(self) -> bytes:
        return self.node(1)

    def leaf(self, v: int) -> bytes:
        return self.node(self.n + v)

    def set_leaf(self, v: int, digest: bytes) -> bytes:
        """Replace leaf ``v`` and refresh its root path; returns the new root."""
        if not 0 <= v < self.n:
            raise IndexError(f"leaf {v} out of range [0, {self.n})")
        heap = self.heap
        b3 = hashing.hasher()
        i = self.n + v
        h = bytes(digest)
        heap[i * _D:(i + 1) * _D] = h
        while i > 1:
            if i & 1:
                h = b3(LABEL_NODE + heap[(i - 1) * _D:i * _D] + h).digest()
            else:
                h = b3(LABEL_NODE + h + heap[(i + 1) * _D:(i + 2) * _D]).digest()
            i >>= 1
            heap[i * _D:(i + 1) * _D] = h
        return h

    def path(self, v: int) -> list[bytes]:
        """Sibling digests of leaf ``v``, bottom-up."""
        if not 0 <= v < self.n:
            raise IndexError(f"leaf {v} out of range [0, {self.n})")
        out = []
        i = self.n + v
        while i > 1:
            out.append(self.node(i ^ 1))
            i >>= 1
        return out

    def multiproof(self, indices: Iterable[int]) -> list[bytes]:
        """Siblings needed to fold the leaf set ``indices`` up to the root.

        Order: level by level from the leaves, ascending index within a level,
        emitting a sibling only when it is not itself derivable.
        """
        level = sorted(set(indices))
        if level and not (0 <= level[0] and level[-1] < self.n):
            raise IndexError("multiproof index out of range")
        out = []
        base = self.n
        for _ in range(self.depth):
            members = set(level)
            for i in level:
                if i ^ 1 not in members:
                    out.append(self.node(base + (i ^ 1)))
            level = sorted({i >> 1 for i in level})
            base >>= 1
        return out

    def audit(self) -> bool:
        """Full recomputation check of every internal node."""
        b3 = hashing.hasher()
        heap = self.heap
        for i in range(1, self.n):
            o = 2 * i * _D
            if heap[i * _D:(i + 1) * _D] != b3(LABEL_NODE + heap[o:o + 2 * _D]).digest():
                return False
        return True


def fold_path(leaf: bytes, index: int, siblings: Sequence[bytes]) -> bytes:
    h = leaf
    for s in siblings:
        h = hashing.node_digest(s, h) if index & 1 else hashing.node_digest(h, s)
        index >>= 1
    return h


def fold_multiproof(
    depth: int, leaves: Mapping[int, bytes], siblings: Sequence[bytes]
) -> tuple[bytes, list[dict[int, bytes]]]:
    """Recompute a root from a leaf set and its multiproof siblings.

    Returns ``(root, levels)`` where ``levels[k]`` maps every node index known
    at height ``k`` (derived or supplied) to its digest, so callers can read
    off any covered leaf's full path.  Raises :class:`MerkleError` when the
    sibling list does not have exactly the required length.
    """
    if not leaves:
        raise MerkleError("empty leaf set")
    if min(leaves) < 0 or max(leaves) >= 1 << depth:
        raise MerkleError("leaf index out of range")
    it = iter(siblings)
    used = 0
    level = dict(leaves)
    levels = []
    for _ in range(depth):
        full = dict(level)
        nxt = {}
        for i in sorted(level):
            if i & 1 and (i ^ 1) in level:
                continue
            sib = level.get(i ^ 1)
            if sib is None:
                try:
                    sib = next(it)
                except StopIteration:
                    raise MerkleError("too few multiproof siblings") from None
                used += 1
                full[i ^ 1] = sib
            left, right = (sib, level[i]) if i & 1 else (level[i], sib)
            nxt[i >> 1] = hashing.node_digest(left, right)
        levels.append(full)
        level = nxt
    levels.append(level)
    if used != len(siblings):
        raise MerkleError("too many multiproof siblings")
    return level[0], levels


def path_from_levels(levels: list[dict[int, bytes]], index: int) -> list[bytes]:
    return [levels[k][(index >> k) ^ 1] for k in range(len(levels) - 1)]


# ---------------------------------------------------------------- arena trees

@dataclasses.dataclass(frozen=True)
class MerklePath:
    coord: int
    siblings: tuple[bytes, ...]

    def to_bytes(self) -> bytes:
        return (u64(self.coord) + struct.pack("<H", len(self.siblings))
                + b"".join(self.siblings))

    @classmethod
    def from_bytes(cls, raw: bytes) -> "MerklePath":
        if len(raw) < 10:
            raise MerkleError("truncated path header")
        coord = int.from_bytes(raw[:8], "little")
        (count,) = struct.unpack_from("<H", raw, 8)
        if len(raw) != 10 + count * _D:
            raise MerkleError("path length does not match sibling count")
        sibs = tuple(bytes(raw[10 + k * _D:10 + (k + 1) * _D]) for k in range(count))
        return cls(coord, sibs)


def _block_bytes(block) -> bytes:
    raw = block.to_bytes() if hasattr(block, "to_bytes") else bytes(block)
    if len(raw) != 2 * _D:
        raise ValueError("block must be 64 bytes")
    return raw


def arena_leaves(arena) -> bytearray:
    """Leaf digests for every vertex of ``arena``, concatenated."""
    mem = arena.mem
    b3 = hashing.hasher()
    out = bytearray(arena.N * _D)
    for v in range(arena.N):
        o = v << 6
        out[v * _D:(v + 1) * _D] = b3(LABEL_LEAF + u64(v) + mem[o:o + 64]).digest()
    return out


def build_tree(arena) -> tuple[MerkleTree, bytes]:
    tree = MerkleTree(arena_leaves(arena))
    return tree, tree.root


def update_leaf(tree: MerkleTree, v: int, block) -> bytes:
    if not 0 <= v < tree.n:
        raise IndexError(f"vertex {v} out of range [0, {tree.n})")
    return tree.set_leaf(v, hashing.leaf_digest(v, _block_bytes(block)))


def open_path(tree: MerkleTree, v: int) -> MerklePath:
    return MerklePath(v, tuple(tree.path(v)))


def verify_path(root: bytes, v: int, block, path: MerklePath) -> bool:
    if path.coord != v or not 0 <= v < 1 << len(path.siblings):
        return False
    leaf = hashing.leaf_digest(v, _block_bytes(block))
    return fold_path(leaf, v, path.siblings) == root


# ------------------------------------------------------- root-sequence commitment

class RootCommitment:
    """Merkle tree over ``(t, r_t)`` leaves, padded to a power of two."""

    __slots__ = ("count", "tree")

    def __init__(self, roots: Sequence[bytes]) -> None:
        count = len(roots)
        if count < 1:
            raise MerkleError("need at least r_0")
        size = next_pow2(count)
        b3 = hashing.hasher()
        buf = bytearray(size * _D)
        for t, r in enumerate(roots):
            buf[t * _D:(t + 1) * _D] = b3(hashing.LABEL_ROOTLEAF + u64(t) + bytes(r)).digest()
        for i in range(count, size):
            buf[i * _D:(i + 1) * _D] = b3(hashing.LABEL_PAD + u64(i)).digest()
        self.count = count
        self.tree = MerkleTree(buf)

    @property
    def root(self) -> bytes:
        return self.tree.root

    @property
    def depth(self) -> int:
        return self.tree.depth


def root_tree_depth(K: int) -> int:
    return next_pow2(K + 1).bit_length() - 1


def commit_roots(roots: Sequence[bytes]) -> tuple[RootCommitment, bytes]:
    rc = RootCommitment(roots)
    return rc, rc.root


def open_root(rc: RootCommitment, t: int) -> MerklePath:
    if not 0 <= t < rc.count:
        raise IndexError(f"root index {t} out of range")
    return MerklePath(t, tuple(rc.tree.path(t)))


def verify_root(commitment: bytes, t: int, root: bytes, path: MerklePath) -> bool:
    if path.coord != t or not 0 <= t < 1 << len(path.siblings):
        return False
    return fold_path(hashing.root_leaf_digest(t, root), t, path.siblings) == commitment


def open_roots(rc: RootCommitment, ts: Iterable[int]) -> list[bytes]:
    ts = list(ts)
    if any(not 0 <= t < rc.count for t in ts):
        raise IndexError("root index out of range")
    return rc.tree.multiproof(ts)


def fold_roots(depth: int, roots: Mapping[int, bytes], siblings: Sequence[bytes]) -> bytes:
    leaves = {t: hashing.root_leaf_digest(t, r) for t, r in roots.items()}
    return fold_multiproof(depth, leaves, siblings)[0]
