"""Proof data types and the versioned binary proof format."""

from __future__ import annotations

import dataclasses
import struct

from .arena import BLOCK_SIZE, Block, Params
from .hashing import DIGEST_SIZE

MAGIC = b"PSME"
VERSION = 1
HEADER = struct.Struct("<4sBBQHHB")

_D = DIGEST_SIZE
_TAG_INIT = 0
_TAG_WRITER = 1


class ProofFormatError(ValueError):
    """Proof bytes that cannot be parsed."""


@dataclasses.dataclass(frozen=True)
class StepWitness:
    """Openings that let a verifier re-execute one step.

    ``pre_siblings`` is a multiproof of the read vertices and the write
    vertex against ``root_pre``; ``chain_siblings`` is a multiproof of the
    root-sequence leaves ``step - 1`` and ``step`` against the commitment.
    """

    step: int
    t_prev: bytes
    root_pre: bytes
    root_post: bytes
    chain_siblings: tuple[bytes, ...]
    reads: tuple[int, ...]
    read_blocks: tuple[Block, ...]
    write: int
    write_block: Block
    post_block: Block
    pre_siblings: tuple[bytes, ...]

    @property
    def opened_blocks(self) -> int:
        return len(self.reads) + 1


@dataclasses.dataclass(frozen=True)
class ProvenanceNode:
    """Lineage of a block some step consumed.

    ``writer`` is ``None`` when the block is still in its initial state.
    """

    vertex: int
    block: Block
    writer: StepWitness | None = None
    children: tuple["ProvenanceNode", ...] = ()

    @property
    def is_init(self) -> bool:
        return self.writer is None

    def opened_blocks(self) -> int:
        if self.writer is None:
            return 0
        return self.writer.opened_blocks + sum(c.opened_blocks() for c in self.children)


@dataclasses.dataclass(frozen=True)
class ChallengeWitness:
    witness: StepWitness
    provenance: tuple[ProvenanceNode, ...] = ()

    def opened_blocks(self) -> int:
        return self.witness.opened_blocks + sum(n.opened_blocks() for n in self.provenance)


@dataclasses.dataclass(frozen=True)
class Proof:
    params: Params
    t_final: bytes
    commitment: bytes
    challenges: tuple[ChallengeWitness, ...]

    def opened_blocks(self) -> list[int]:
        return [cw.opened_blocks() for cw in self.challenges]


def blocks_per_challenge(d: int, R: int) -> int:
    """Upper bound on opened blocks per challenge: sum over levels of d**l * (d + 1)."""
    return sum(d ** level * (d + 1) for level in range(R))


# ------------------------------------------------------------------ encoding

def _enc_step(w: StepWitness, with_step: bool, out: bytearray) -> None:
    if with_step:
        out += w.step.to_bytes(8, "little")
    out += w.t_prev + w.root_pre + w.root_post
    out.append(len(w.chain_siblings))
    for s in w.chain_siblings:
        out += s
    for v, b in zip(w.reads, w.read_blocks):
        out += v.to_bytes(8, "little") + b.data + b.causal
    out += w.write.to_bytes(8, "little") + w.write_block.data + w.write_block.causal
    out += w.post_block.data + w.post_block.causal
    out += struct.pack("<H", len(w.pre_siblings))
    for s in w.pre_siblings:
        out += s


def _enc_node(node: ProvenanceNode, depth: int, R: int, out: bytearray) -> None:
    if node.writer is None:
        out.append(_TAG_INIT)
        return
    out.append(_TAG_WRITER)
    _enc_step(node.writer, True, out)
    if depth < R - 1:
        for child in node.children:
            _enc_node(child, depth + 1, R, out)


def serialize_proof(proof: Proof) -> bytes:
    p = proof.params
    if len(proof.challenges) != p.Q:
        raise ValueError("challenge count does not match Q")
    out = bytearray(HEADER.pack(MAGIC, VERSION, p.d_hc, p.K, p.d, p.Q, p.R))
    out += proof.t_final + proof.commitment
    for cw in proof.challenges:
        body = bytearray()
        _enc_step(cw.witness, False, body)
        if p.R >= 2:
            for node in cw.provenance:
                _enc_node(node, 1, p.R, body)
        out += struct.pack("<I", len(body)) + body
    return bytes(out)


class _Reader:
    __slots__ = ("buf", "pos", "end")

    def __init__(self, buf: bytes, pos: int = 0, end: int | None = None) -> None:
        self.buf = buf
        self.pos = pos
        self.end = len(buf) if end is None else end

    def take(self, n: int) -> bytes:
        if self.pos + n > self.end:
            raise ProofFormatError(f"truncated proof: need {n} bytes at offset {self.pos}")
        b = self.buf[self.pos:self.pos + n]
        self.pos += n
        return b

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return int.from_bytes(self.take(2), "little")

    def u32(self) -> int:
        return int.from_bytes(self.take(4), "little")

    def u64(self) -> int:
        return int.from_bytes(self.take(8), "little")

    def block(self) -> Block:
        return Block.from_bytes(self.take(BLOCK_SIZE))


def _dec_step(r: _Reader, d: int, step: int | None) -> StepWitness:
    if step is None:
        step = r.u64()
    t_prev, root_pre, root_post = r.take(_D), r.take(_D), r.take(_D)
    chain = tuple(r.take(_D) for _ in range(r.u8()))
    reads, blocks = [], []
    for _ in range(d):
        reads.append(r.u64())
        blocks.append(r.block())
    write = r.u64()
    write_block = r.block()
    post_block = r.block()
    pre = tuple(r.take(_D) for _ in range(r.u16()))
    return StepWitness(step, t_prev, root_pre, root_post, chain, tuple(reads), tuple(blocks),
                       write, write_block, post_block, pre)


def _dec_node(r: _Reader, vertex: int, block: Block, depth: int, d: int, R: int) -> ProvenanceNode:
    tag = r.u8()
    if tag == _TAG_INIT:
        return ProvenanceNode(vertex, block)
    if tag != _TAG_WRITER:
        raise ProofFormatError(f"unknown provenance tag {tag}")
    w = _dec_step(r, d, None)
    children: tuple[ProvenanceNode, ...] = ()
    if depth < R - 1:
        children = tuple(_dec_node(r, v, b, depth + 1, d, R)
                         for v, b in zip(w.reads, w.read_blocks))
    return ProvenanceNode(vertex, block, w, children)


def read_header(data: bytes) -> tuple[Params, bytes, bytes]:
    if len(data) < HEADER.size + 2 * _D:
        raise ProofFormatError("truncated proof header")
    magic, version, d_hc, K, d, Q, R = HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise ProofFormatError("bad magic")
    if version != VERSION:
        raise ProofFormatError(f"unsupported proof format version {version}")
    if d == 0 or R == 0 or d_hc == 0:
        raise ProofFormatError("degenerate parameters in header")
    o = HEADER.size
    return Params(d_hc=d_hc, K=K, d=d, Q=Q, R=R), data[o:o + _D], data[o + _D:o + 2 * _D]


def deserialize_proof(data: bytes, challenge_steps: list[int] | None = None) -> Proof:
    """Parse proof bytes.

    Challenge witnesses carry no step index on the wire: the verifier assigns
    the re-derived steps via ``challenge_steps``.  Without it they are left 0.
    """
    data = bytes(data)
    params, t_final, commitment = read_header(data)
    r = _Reader(data, HEADER.size + 2 * _D)
    challenges = []
    for i in range(params.Q):
        length = r.u32()
        body = _Reader(data, r.pos, r.pos + length)
        if body.end > len(data):
            raise ProofFormatError(f"challenge {i + 1} record runs past end of proof")
        step = challenge_steps[i] if challenge_steps is not None else 0
        w = _dec_step(body, params.d, step)
        prov: tuple[ProvenanceNode, ...] = ()
        if params.R >= 2:
            prov = tuple(_dec_node(body, v, b, 1, params.d, params.R)
                         for v, b in zip(w.reads, w.read_blocks))
        if body.pos != body.end:
            raise ProofFormatError(f"challenge {i + 1} record has trailing bytes")
        r.pos = body.end
        challenges.append(ChallengeWitness(w, prov))
    if r.pos != len(data):
        raise ProofFormatError("trailing bytes after last challenge")
    return Proof(params, t_final, commitment, tuple(challenges))
