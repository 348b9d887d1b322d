"""Fiat-Shamir proof generation with depth-R provenance.

Historical openings come from a deterministic replay: the arena and its
tree are rebuilt from the seed and advanced step by step, pausing at every
step that a challenge (or a provenance branch) needs.
"""

from __future__ import annotations

import dataclasses
import logging
from typing import Iterable

from . import hashing
from .arena import Block, Params
from .commitment import (
    RootCommitment,
    commit_roots,
    fold_multiproof,
    fold_path,
    fold_roots,
    open_roots,
    path_from_levels,
)
from .engine import INIT_ORIGIN, Machine, ReplayError, RunLog, StepTrace, rederive_records
from .witness import (
    ChallengeWitness,
    Proof,
    ProofFormatError,
    ProvenanceNode,
    StepWitness,
    blocks_per_challenge,
    deserialize_proof,
    serialize_proof,
)

__all__ = [
    "derive_challenges", "collect_required_steps", "prove", "serialize_proof",
    "deserialize_proof", "ProofFormatError", "blocks_per_challenge", "ProverError",
]

log = logging.getLogger(__name__)


class ProverError(RuntimeError):
    """The prover's self-audit caught an inconsistent witness."""


def derive_challenges(t_final: bytes, commitment: bytes, K: int, Q: int) -> list[int]:
    if Q == 0:
        return []
    sigma = hashing.fiat_shamir_sigma(t_final, commitment)
    return [hashing.fiat_shamir_step(sigma, i, K) for i in range(1, Q + 1)]


def collect_required_steps(challenges: Iterable[int], run_log: RunLog, R: int) -> list[int]:
    """Steps whose openings the proof needs: challenges plus writers of their
    read blocks, expanded ``R - 1`` levels deep."""
    required = set(challenges)
    frontier = set(required)
    for _ in range(R - 1):
        nxt = set()
        for s in frontier:
            for v in run_log.reads[s - 1]:
                w = run_log.last_write_before(int(v), s)
                if w != INIT_ORIGIN:
                    nxt.add(w)
        required |= nxt
        frontier = nxt
    return sorted(required)


def _witness(tr: StepTrace, rc: RootCommitment) -> StepWitness:
    return StepWitness(
        step=tr.t,
        t_prev=tr.t_prev,
        root_pre=tr.root_before,
        root_post=tr.root_after,
        chain_siblings=tuple(open_roots(rc, (tr.t - 1, tr.t))),
        reads=tr.reads,
        read_blocks=tuple(Block.from_bytes(b) for b in tr.read_blocks),
        write=tr.write,
        write_block=Block.from_bytes(tr.old_block),
        post_block=Block.from_bytes(tr.new_block),
        pre_siblings=tr.pre_siblings,
    )


def _audit(w: StepWitness, params: Params, commitment: bytes, root_depth: int) -> None:
    leaves = {}
    for v, b in zip(w.reads + (w.write,), w.read_blocks + (w.write_block,)):
        leaves[v] = hashing.leaf_digest(v, b.to_bytes())
    root, levels = fold_multiproof(params.d_hc, leaves, w.pre_siblings)
    if root != w.root_pre:
        raise ProverError(f"pre-state multiproof of step {w.step} does not reach its root")
    post_leaf = hashing.leaf_digest(w.write, w.post_block.to_bytes())
    if fold_path(post_leaf, w.write, path_from_levels(levels, w.write)) != w.root_post:
        raise ProverError(f"post-state opening of step {w.step} does not reach its root")
    pair = {w.step - 1: w.root_pre, w.step: w.root_post}
    if fold_roots(root_depth, pair, w.chain_siblings) != commitment:
        raise ProverError(f"root-pair opening of step {w.step} does not reach C")
    c = w.t_prev
    for j, (v, b) in enumerate(zip(w.reads, w.read_blocks)):
        if hashing.derive_read_coord(c, j, params.d_hc) != v:
            raise ProverError(f"read coords of step {w.step} do not follow from T_prev")
        c = hashing.chain_cursor(c, b.data, b.causal)


def prove(run_log: RunLog, Q: int, R: int, *, strict: bool = True) -> Proof:
    """Commit to the root sequence, draw ``Q`` challenges and build witnesses.

    Raises :class:`~posme.engine.ReplayError` (with the first divergent step)
    if the replay does not reproduce the stored roots.
    """
    params = dataclasses.replace(run_log.params, Q=Q, R=R).validate(strict=strict)
    if Q and params.K < 1:
        raise ValueError("cannot draw challenges from a run with K = 0")
    if run_log.lean:
        log.info("lean run log: re-deriving step records by replay")
        run_log = rederive_records(run_log)
    rc, commitment = commit_roots(run_log.root_list())
    t_final = run_log.final_transcript
    steps = derive_challenges(t_final, commitment, params.K, Q)
    required = collect_required_steps(steps, run_log, R)
    log.info("replaying to open %d steps for %d challenges", len(required), Q)

    m = Machine(run_log.seed, run_log.params)
    if m.root != run_log.root(0):
        raise ReplayError(0, "initial root does not match the run log")
    witnesses: dict[int, StepWitness] = {}
    for w in required:
        m.advance(w - 1, expect_roots=run_log.roots)
        tr = m.trace_step()
        if tr.root_after != run_log.root(w) or tr.transcript != run_log.transcript(w):
            raise ReplayError(w)
        witnesses[w] = _witness(tr, rc)

    for w in witnesses.values():
        _audit(w, params, commitment, rc.depth)

    def node(v: int, block: Block, consumer: int, depth: int) -> ProvenanceNode:
        w = run_log.last_write_before(v, consumer)
        if w == INIT_ORIGIN:
            return ProvenanceNode(v, block)
        wit = witnesses[w]
        if wit.write != v or wit.post_block != block:
            raise ProverError(f"writer step {w} does not produce the block read at step {consumer}")
        children: tuple[ProvenanceNode, ...] = ()
        if depth < R - 1:
            children = tuple(node(u, b, w, depth + 1) for u, b in zip(wit.reads, wit.read_blocks))
        return ProvenanceNode(v, block, wit, children)

    challenges = []
    for s in steps:
        wit = witnesses[s]
        prov: tuple[ProvenanceNode, ...] = ()
        if R >= 2:
            prov = tuple(node(v, b, s, 1) for v, b in zip(wit.reads, wit.read_blocks))
        challenges.append(ChallengeWitness(wit, prov))
    proof = Proof(params, t_final, commitment, tuple(challenges))
    bound = blocks_per_challenge(params.d, R)
    if any(n > bound for n in proof.opened_blocks()):
        raise ProverError("opened-block count exceeds the per-challenge bound")
    return proof
