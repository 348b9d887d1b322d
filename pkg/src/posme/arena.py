"""The hypercube arena, protocol parameters and skip-link initialization."""

from __future__ import annotations

import dataclasses
from typing import NamedTuple

from . import hashing
from .hashing import DIGEST_SIZE, LABEL_CAUSAL, LABEL_INIT

BLOCK_SIZE = 2 * DIGEST_SIZE


class ParameterError(ValueError):
    """Raised for parameter sets outside the protocol's constraints."""


class Block(NamedTuple):
    data: bytes
    causal: bytes

    def to_bytes(self) -> bytes:
        return self.data + self.causal

    @classmethod
    def from_bytes(cls, raw: bytes) -> "Block":
        if len(raw) != BLOCK_SIZE:
            raise ValueError(f"block must be {BLOCK_SIZE} bytes, got {len(raw)}")
        raw = bytes(raw)
        return cls(raw[:DIGEST_SIZE], raw[DIGEST_SIZE:])


@dataclasses.dataclass(frozen=True)
class Params:
    """Protocol constants.

    Defaults for ``d``, ``Q`` and ``R`` are the recommended production values;
    ``d_hc=24`` with ``K=4N`` is the recommended arena.
    """

    d_hc: int
    K: int
    d: int = 8
    Q: int = 128
    R: int = 3

    @property
    def N(self) -> int:
        return 1 << self.d_hc

    @property
    def rho(self) -> float:
        return self.K / self.N

    @classmethod
    def from_rho(cls, d_hc: int, rho: float, **kw) -> "Params":
        return cls(d_hc=d_hc, K=int(round(rho * (1 << d_hc))), **kw)

    def validate(self, strict: bool = True) -> "Params":
        """Check wire limits always and the recommended floors when ``strict``.

        Returns ``self`` so it can be chained.
        """
        if not 1 <= self.d_hc <= 40:
            raise ParameterError(f"d_hc must be in [1, 40], got {self.d_hc}")
        if not 0 <= self.K < 1 << 64:
            raise ParameterError(f"K out of range: {self.K}")
        if not 1 <= self.d <= 0xFFFF:
            raise ParameterError(f"d must be in [1, 65535], got {self.d}")
        if not 0 <= self.Q <= 0xFFFF:
            raise ParameterError(f"Q must be in [0, 65535], got {self.Q}")
        if not 1 <= self.R <= 0xFF:
            raise ParameterError(f"R must be in [1, 255], got {self.R}")
        if strict:
            problems = []
            if self.K < self.N:
                problems.append(f"K={self.K} < N={self.N} (write density below 1)")
            if self.d < 4:
                problems.append(f"d={self.d} < 4")
            if self.Q < 64:
                problems.append(f"Q={self.Q} < 64")
            if self.R < 2:
                problems.append(f"R={self.R} < 2")
            if problems:
                raise ParameterError(
                    "parameters below recommended floors: " + "; ".join(problems)
                    + " (pass strict=False / --allow-toy for desk-scale runs)"
                )
        return self


class Arena:
    """Dense array of ``2**d_hc`` blocks stored as one contiguous bytearray."""

    __slots__ = ("d_hc", "mem")

    def __init__(self, d_hc: int, mem: bytearray | None = None) -> None:
        if d_hc < 1:
            raise ParameterError("arena dimension must be >= 1")
        size = (1 << d_hc) * BLOCK_SIZE
        if mem is None:
            mem = bytearray(size)
        elif len(mem) != size:
            raise ValueError("arena buffer has the wrong size")
        self.d_hc = d_hc
        self.mem = mem

    @property
    def N(self) -> int:
        return 1 << self.d_hc

    def __len__(self) -> int:
        return self.N

    def raw(self, v: int) -> bytes:
        o = v * BLOCK_SIZE
        return bytes(self.mem[o:o + BLOCK_SIZE])

    def __getitem__(self, v: int) -> Block:
        if not 0 <= v < self.N:
            raise IndexError(v)
        return Block.from_bytes(self.raw(v))

    def __setitem__(self, v: int, block: Block) -> None:
        if not 0 <= v < self.N:
            raise IndexError(v)
        raw = block.to_bytes() if isinstance(block, Block) else bytes(block)
        if len(raw) != BLOCK_SIZE:
            raise ValueError("block must be 64 bytes")
        o = v * BLOCK_SIZE
        self.mem[o:o + BLOCK_SIZE] = raw

    def copy(self) -> "Arena":
        return Arena(self.d_hc, bytearray(self.mem))

    def __eq__(self, other) -> bool:
        return isinstance(other, Arena) and self.d_hc == other.d_hc and self.mem == other.mem


def skip_parent(v: int) -> int:
    if v < 1:
        raise ValueError("vertex 0 has no skip-link parent")
    return v >> 1


def fill_arena(seed: bytes, d_hc: int) -> Arena:
    """Deterministic skip-link initialization of every block, in binary order."""
    if len(seed) != DIGEST_SIZE:
        raise ValueError("seed must be 32 bytes")
    arena = Arena(d_hc)
    mem = arena.mem
    b3 = hashing.hasher()
    pre_d = LABEL_INIT + bytes(seed)
    pre_c = LABEL_CAUSAL + bytes(seed)
    mem[0:32] = b3(pre_d + (0).to_bytes(8, "little")).digest()
    mem[32:64] = b3(pre_c + (0).to_bytes(8, "little")).digest()
    for i in range(1, 1 << d_hc):
        p = (i >> 1) << 6
        o = i << 6
        ib = i.to_bytes(8, "little")
        mem[o:o + 32] = b3(pre_d + ib + mem[p:p + 32]).digest()
        mem[o + 32:o + 64] = b3(pre_c + ib + mem[p + 32:p + 64]).digest()
    return arena


def init_block(seed: bytes, v: int) -> Block:
    """Recompute vertex ``v``'s initial block along its skip chain only.

    Costs ``v.bit_length() + 1`` hashes per field and no arena.
    """
    chain = []
    u = v
    while u:
        chain.append(u)
        u >>= 1
    data = hashing.init_data_digest(seed, 0)
    causal = hashing.init_causal_digest(seed, 0)
    for u in reversed(chain):
        data = hashing.init_data_digest(seed, u, data)
        causal = hashing.init_causal_digest(seed, u, causal)
    return Block(data, causal)


def init_arena(seed: bytes, d_hc: int) -> tuple[Arena, bytes, bytes]:
    """Initialize the arena; returns ``(arena, r_0, T_0)``."""
    from .commitment import build_tree

    arena = fill_arena(seed, d_hc)
    _, r0 = build_tree(arena)
    return arena, r0, hashing.initial_transcript(seed, arena.N, r0)
