"""Sequential step execution and full runs.

The step loop is the latency-bound core: every read address is derived from
the cursor produced by the previous read, so reads are issued strictly one
after another.  Nothing here batches, prefetches or predicts addresses.
"""

from __future__ import annotations

import array
import dataclasses
import functools
from typing import NamedTuple

import numpy as np

from . import hashing
from .arena import BLOCK_SIZE, Arena, Block, Params, fill_arena
from .commitment import MerkleTree, build_tree, update_leaf
from .hashing import DIGEST_SIZE, LABEL_ADDR, LABEL_LEAF, LABEL_NODE, LABEL_WRITE

INIT_ORIGIN = 0
"""``last_write_before`` result for a vertex untouched since initialization."""

WRITE_LOG_RECORD = 16 + BLOCK_SIZE + DIGEST_SIZE

_D = DIGEST_SIZE


class ReplayError(RuntimeError):
    """A replay diverged from the roots stored in a run log."""

    def __init__(self, step: int, message: str | None = None) -> None:
        super().__init__(message or f"replay diverged from stored roots at step {step}")
        self.step = step


@dataclasses.dataclass(frozen=True)
class StepRecord:
    t: int
    reads: tuple[int, ...]
    write: int


@dataclasses.dataclass(frozen=True)
class WriteLogEntry:
    t: int
    vertex: int
    old_block: Block
    cursor: bytes

    @property
    def new_block(self) -> Block:
        return Block(
            hashing.bind_data(self.old_block.data, self.cursor, self.old_block.causal),
            hashing.bind_causal(self.old_block.causal, self.cursor, self.t),
        )


class StepTrace(NamedTuple):
    """Everything observed while executing one step, for witness extraction."""

    t: int
    t_prev: bytes
    reads: tuple[int, ...]
    read_blocks: tuple[bytes, ...]
    cursor: bytes
    write: int
    old_block: bytes
    new_block: bytes
    root_before: bytes
    root_after: bytes
    transcript: bytes
    pre_siblings: tuple[bytes, ...]


class RunLog:
    """Execution record of one run.

    ``roots`` and ``transcripts`` hold ``K + 1`` digests each.  ``reads``
    (``K x d``), ``writes`` (``K``), ``old_blocks`` and ``cursors`` are the
    per-step records; in lean runs they are ``None`` until
    :func:`rederive_records` fills them.
    """

    def __init__(self, params: Params, seed: bytes, roots: bytes, transcripts: bytes,
                 reads: np.ndarray | None = None, writes: np.ndarray | None = None,
                 old_blocks: bytes | None = None, cursors: bytes | None = None) -> None:
        K = params.K
        if len(roots) != (K + 1) * _D or len(transcripts) != (K + 1) * _D:
            raise ValueError("roots/transcripts must hold K + 1 digests")
        if reads is not None:
            reads = np.asarray(reads, dtype=np.uint64).reshape(K, params.d)
            writes = np.asarray(writes, dtype=np.uint64).reshape(K)
        if old_blocks is not None and (len(old_blocks) != K * BLOCK_SIZE
                                       or len(cursors) != K * _D):
            raise ValueError("write log has the wrong length")
        self.params = params
        self.seed = bytes(seed)
        self.roots = bytes(roots)
        self.transcripts = bytes(transcripts)
        self.reads = reads
        self.writes = writes
        self.old_blocks = None if old_blocks is None else bytes(old_blocks)
        self.cursors = None if cursors is None else bytes(cursors)

    @property
    def K(self) -> int:
        return self.params.K

    @property
    def lean(self) -> bool:
        return self.reads is None

    @property
    def has_write_log(self) -> bool:
        return self.old_blocks is not None

    def root(self, t: int) -> bytes:
        if not 0 <= t <= self.K:
            raise IndexError(t)
        return self.roots[t * _D:(t + 1) * _D]

    def transcript(self, t: int) -> bytes:
        if not 0 <= t <= self.K:
            raise IndexError(t)
        return self.transcripts[t * _D:(t + 1) * _D]

    @property
    def final_transcript(self) -> bytes:
        return self.transcript(self.K)

    def root_list(self) -> list[bytes]:
        return [self.root(t) for t in range(self.K + 1)]

    def _need_records(self) -> None:
        if self.reads is None:
            raise ValueError("lean run log: call rederive_records() first")

    def record(self, t: int) -> StepRecord:
        self._need_records()
        if not 1 <= t <= self.K:
            raise IndexError(t)
        return StepRecord(t, tuple(int(v) for v in self.reads[t - 1]), int(self.writes[t - 1]))

    def write_entry(self, t: int) -> WriteLogEntry:
        if self.old_blocks is None:
            raise ValueError("run log carries no write log")
        if not 1 <= t <= self.K:
            raise IndexError(t)
        o = (t - 1) * BLOCK_SIZE
        return WriteLogEntry(t, int(self.writes[t - 1]),
                             Block.from_bytes(self.old_blocks[o:o + BLOCK_SIZE]),
                             self.cursors[(t - 1) * _D:t * _D])

    @functools.cached_property
    def _write_index(self) -> tuple[np.ndarray, np.ndarray]:
        self._need_records()
        order = np.argsort(self.writes, kind="stable")
        starts = np.searchsorted(self.writes[order], np.arange(self.params.N + 1, dtype=np.uint64))
        return (order + 1).astype(np.int64), starts

    def write_steps(self, v: int) -> np.ndarray:
        """Ascending steps whose write landed on vertex ``v``."""
        steps, starts = self._write_index
        return steps[starts[v]:starts[v + 1]]

    def last_write_before(self, v: int, t: int) -> int:
        """Largest step ``w < t`` that wrote ``v``, or ``INIT_ORIGIN``."""
        if not 0 <= v < self.params.N:
            raise IndexError(f"vertex {v} out of range")
        ws = self.write_steps(v)
        k = int(np.searchsorted(ws, t, side="left"))
        return int(ws[k - 1]) if k else INIT_ORIGIN

    def audit_transcripts(self) -> bool:
        """Recompute ``T_1..T_K`` from stored cursors and roots."""
        if self.cursors is None:
            raise ValueError("transcript audit needs the write log cursors")
        T = self.transcript(0)
        for t in range(1, self.K + 1):
            T = hashing.extend_transcript(T, t, self.cursors[(t - 1) * _D:t * _D], self.root(t))
            if T != self.transcript(t):
                return False
        return True

    def __eq__(self, other) -> bool:
        if not isinstance(other, RunLog):
            return NotImplemented
        same_records = (self.reads is None) == (other.reads is None) and (
            self.reads is None
            or (np.array_equal(self.reads, other.reads)
                and np.array_equal(self.writes, other.writes)))
        return (self.params == other.params and self.seed == other.seed
                and self.roots == other.roots and self.transcripts == other.transcripts
                and same_records and self.old_blocks == other.old_blocks
                and self.cursors == other.cursors)


def last_write_before(run_log: RunLog, v: int, t: int) -> int:
    return run_log.last_write_before(v, t)


class _Sink:
    """Growable buffers a run appends to."""

    def __init__(self, records: bool, write_log: bool) -> None:
        self.roots = bytearray()
        self.transcripts = bytearray()
        self.reads = array.array("Q") if records else None
        self.writes = array.array("Q") if records else None
        self.old_blocks = bytearray() if write_log else None
        self.cursors = bytearray() if write_log else None


class Machine:
    """Arena, incremental tree and transcript advanced one step at a time."""

    def __init__(self, seed: bytes, params: Params) -> None:
        self.seed = bytes(seed)
        self.params = params
        self.arena = fill_arena(seed, params.d_hc)
        self.tree, r0 = build_tree(self.arena)
        self.T = hashing.initial_transcript(seed, params.N, r0)
        self.t = 0

    @property
    def root(self) -> bytes:
        return self.tree.root

    def advance(self, stop: int, sink: _Sink | None = None,
                expect_roots: bytes | None = None) -> None:
        """Execute steps ``t + 1 .. stop``.

        With ``sink`` the roots, transcripts and records are appended; with
        ``expect_roots`` every new root is compared to the stored one.
        """
        if stop > self.params.K:
            raise ValueError("cannot run past K")
        b3 = hashing.hasher()
        d = self.params.d
        n = self.params.N
        mask = n - 1
        mem = self.arena.mem
        heap = self.tree.heap
        jsuffix = [j.to_bytes(8, "little") for j in range(d)]
        reads_add = writes_add = None
        if sink is not None:
            roots_add = sink.roots.extend
            trans_add = sink.transcripts.extend
            if sink.reads is not None:
                reads_add = sink.reads.append
                writes_add = sink.writes.append
            old_add = sink.old_blocks.extend if sink.old_blocks is not None else None
            cur_add = sink.cursors.extend if sink.cursors is not None else None
        T = self.T
        for t in range(self.t + 1, stop + 1):
            c = T
            for j in range(d):
                v = int.from_bytes(b3(LABEL_ADDR + c + jsuffix[j]).digest()[:8], "little") & mask
                o = v << 6
                c = b3(c + mem[o:o + 64]).digest()
                if reads_add is not None:
                    reads_add(v)
            vw = int.from_bytes(b3(LABEL_WRITE + c).digest()[:8], "little") & mask
            o = vw << 6
            old = bytes(mem[o:o + 64])
            tb = t.to_bytes(8, "little")
            new = (b3(old[:32] + c + old[32:]).digest()
                   + b3(old[32:] + c + tb).digest())
            mem[o:o + 64] = new
            i = n + vw
            h = b3(LABEL_LEAF + vw.to_bytes(8, "little") + new).digest()
            heap[i * 32:i * 32 + 32] = h
            while i > 1:
                if i & 1:
                    h = b3(LABEL_NODE + heap[(i - 1) * 32:i * 32] + h).digest()
                else:
                    h = b3(LABEL_NODE + h + heap[(i + 1) * 32:(i + 2) * 32]).digest()
                i >>= 1
                heap[i * 32:i * 32 + 32] = h
            T = b3(T + tb + c + h).digest()
            if sink is not None:
                roots_add(h)
                trans_add(T)
                if writes_add is not None:
                    writes_add(vw)
                if old_add is not None:
                    old_add(old)
                    cur_add(c)
            if expect_roots is not None and h != expect_roots[t * 32:t * 32 + 32]:
                self.T, self.t = T, t
                raise ReplayError(t)
        if stop > self.t:
            self.T, self.t = T, stop

    def trace_step(self, open_pre: bool = True) -> StepTrace:
        """Execute the next step through the reference hashing functions.

        With ``open_pre`` the multiproof of the read and write vertices is
        taken against the tree *before* the write is applied.
        """
        t = self.t + 1
        if t > self.params.K:
            raise ValueError("no steps left")
        t_prev, root_before = self.T, self.tree.root
        d_hc = self.params.d_hc
        c = t_prev
        reads, blocks = [], []
        for j in range(self.params.d):
            v = hashing.derive_read_coord(c, j, d_hc)
            raw = self.arena.raw(v)
            c = hashing.chain_cursor(c, raw[:32], raw[32:])
            reads.append(v)
            blocks.append(raw)
        vw = hashing.derive_write_coord(c, d_hc)
        old = self.arena.raw(vw)
        pre = tuple(self.tree.multiproof(reads + [vw])) if open_pre else ()
        new = (hashing.bind_data(old[:32], c, old[32:])
               + hashing.bind_causal(old[32:], c, t))
        self.arena[vw] = new
        root = update_leaf(self.tree, vw, new)
        self.T = hashing.extend_transcript(t_prev, t, c, root)
        self.t = t
        return StepTrace(t, t_prev, tuple(reads), tuple(blocks), c, vw, old, new,
                         root_before, root, self.T, pre)


class StepResult(NamedTuple):
    transcript: bytes
    root: bytes
    record: StepRecord
    entry: WriteLogEntry


def step(t: int, arena: Arena, tree: MerkleTree, t_prev: bytes, d: int) -> StepResult:
    """One step on a caller-owned arena and tree (mutated in place).

    The ``d`` reads are sequential: read ``j``'s address is derived from the
    cursor that absorbed read ``j - 1``'s block.  A write to a vertex that was
    also read sees the pre-write value, because all reads precede the write.
    """
    if t < 1:
        raise ValueError("steps are numbered from 1")
    c = t_prev
    reads = []
    for j in range(d):
        v = hashing.derive_read_coord(c, j, arena.d_hc)
        blk = arena[v]
        c = hashing.chain_cursor(c, blk.data, blk.causal)
        reads.append(v)
    vw = hashing.derive_write_coord(c, arena.d_hc)
    old = arena[vw]
    entry = WriteLogEntry(t, vw, old, c)
    new = entry.new_block
    arena[vw] = new
    root = update_leaf(tree, vw, new)
    return StepResult(hashing.extend_transcript(t_prev, t, c, root), root,
                      StepRecord(t, tuple(reads), vw), entry)


def _finish(sink: _Sink, params: Params, seed: bytes) -> RunLog:
    reads = writes = None
    if sink.reads is not None:
        reads = np.frombuffer(sink.reads, dtype=np.uint64).reshape(params.K, params.d).copy()
        writes = np.frombuffer(sink.writes, dtype=np.uint64).copy()
    return RunLog(params, seed, bytes(sink.roots), bytes(sink.transcripts), reads, writes,
                  sink.old_blocks, sink.cursors)


def gen(seed: bytes, params: Params, *, lean: bool = False,
        strict: bool = True) -> tuple[RunLog, Arena]:
    """Initialize the arena and execute all ``K`` steps.

    ``lean`` keeps only roots and transcripts; per-step records are then
    re-derived by a replay when needed.
    """
    params.validate(strict=strict)
    if len(seed) != DIGEST_SIZE:
        raise ValueError("seed must be 32 bytes")
    m = Machine(seed, params)
    sink = _Sink(records=not lean, write_log=not lean)
    sink.roots.extend(m.root)
    sink.transcripts.extend(m.T)
    m.advance(params.K, sink)
    return _finish(sink, params, seed), m.arena


def rederive_records(run_log: RunLog) -> RunLog:
    """Fill a lean run log's step records and write log by one checked replay."""
    if not run_log.lean and run_log.has_write_log:
        return run_log
    m = Machine(run_log.seed, run_log.params)
    if m.root != run_log.root(0):
        raise ReplayError(0, "initial root does not match the run log")
    sink = _Sink(records=True, write_log=True)
    sink.roots.extend(m.root)
    sink.transcripts.extend(m.T)
    m.advance(run_log.K, sink, expect_roots=run_log.roots)
    full = _finish(sink, run_log.params, run_log.seed)
    if full.transcripts != run_log.transcripts:
        raise ReplayError(run_log.K, "replayed transcripts differ from the run log")
    return full
