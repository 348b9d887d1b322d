"""Classical verification: challenge re-derivation, openings, step replay and
recursive provenance, with first-failure diagnostics.

The verifier never allocates an arena; its memory is bounded by the proof.
"""

from __future__ import annotations

import dataclasses

from . import hashing
from .arena import Params, ParameterError, init_block
from .commitment import (
    MerkleError,
    fold_multiproof,
    fold_path,
    fold_roots,
    path_from_levels,
    root_tree_depth,
)
from .witness import (
    Proof,
    ProofFormatError,
    ProvenanceNode,
    StepWitness,
    deserialize_proof,
    read_header,
)

PARSE = "parse"
PARAMS = "params"
ROOT_MEMBERSHIP = "root_membership"
PRE_STATE = "pre_state"
READ_COORD = "read_coord"
WRITE_COORD = "write_coord"
POST_STATE = "post_state"
ROOT_MATCH = "root_match"
PROVENANCE = "provenance"

CHECKS = (PARSE, PARAMS, ROOT_MEMBERSHIP, PRE_STATE, READ_COORD, WRITE_COORD,
          POST_STATE, ROOT_MATCH, PROVENANCE)


@dataclasses.dataclass(frozen=True)
class VerifyReport:
    accepted: bool
    challenge: int | None = None
    check: str | None = None
    detail: str = ""

    def __bool__(self) -> bool:
        return self.accepted

    def __str__(self) -> str:
        if self.accepted:
            return "accept"
        where = f" (challenge {self.challenge})" if self.challenge is not None else ""
        return f"reject: {self.check}{where}: {self.detail}"


class _Reject(Exception):
    def __init__(self, check: str, detail: str) -> None:
        super().__init__(detail)
        self.check = check
        self.detail = detail


def _verify_step(w: StepWitness, step: int, params: Params, commitment: bytes,
                 root_depth: int) -> None:
    # root pair (step - 1, step) inside the commitment
    try:
        pair = {step - 1: w.root_pre, step: w.root_post}
        ok = fold_roots(root_depth, pair, w.chain_siblings) == commitment
    except MerkleError as e:
        ok, why = False, str(e)
    else:
        why = "root pair does not open against C"
    if not ok:
        raise _Reject(ROOT_MEMBERSHIP, f"step {step}: {why}")

    # pre-state openings of every read vertex and the write vertex
    n = params.N
    leaves: dict[int, bytes] = {}
    for v, b in zip(w.reads + (w.write,), w.read_blocks + (w.write_block,)):
        if v >= n:
            raise _Reject(PRE_STATE, f"step {step}: coordinate {v} outside the arena")
        leaf = hashing.leaf_digest(v, b.to_bytes())
        if leaves.setdefault(v, leaf) != leaf:
            raise _Reject(PRE_STATE, f"step {step}: vertex {v} opened with two values")
    try:
        root, levels = fold_multiproof(params.d_hc, leaves, w.pre_siblings)
    except MerkleError as e:
        raise _Reject(PRE_STATE, f"step {step}: {e}") from None
    if root != w.root_pre:
        raise _Reject(PRE_STATE, f"step {step}: openings do not reach r_{step - 1}")

    # replay the cursor chain
    d_hc = params.d_hc
    c = w.t_prev
    for j, (v, b) in enumerate(zip(w.reads, w.read_blocks)):
        if hashing.derive_read_coord(c, j, d_hc) != v:
            raise _Reject(READ_COORD, f"step {step}: read {j} coordinate does not follow from the cursor")
        c = hashing.chain_cursor(c, b.data, b.causal)
    if hashing.derive_write_coord(c, d_hc) != w.write:
        raise _Reject(WRITE_COORD, f"step {step}: write coordinate does not follow from the cursor")

    # write, post-state and the updated root
    new = (hashing.bind_data(w.write_block.data, c, w.write_block.causal)
           + hashing.bind_causal(w.write_block.causal, c, step))
    siblings = path_from_levels(levels, w.write)
    r_new = fold_path(hashing.leaf_digest(w.write, new), w.write, siblings)
    post = w.post_block.to_bytes()
    if post == new:
        post_ok = r_new == w.root_post
    else:
        post_ok = fold_path(hashing.leaf_digest(w.write, post), w.write, siblings) == w.root_post
    if not post_ok:
        raise _Reject(POST_STATE, f"step {step}: post-write block does not open against r_{step}")
    if r_new != w.root_post:
        raise _Reject(ROOT_MATCH, f"step {step}: replayed root differs from r_{step}")


def _verify_node(node: ProvenanceNode, consumer: int, depth: int, seed: bytes,
                 params: Params, commitment: bytes, root_depth: int) -> None:
    if node.writer is None:
        if init_block(seed, node.vertex) != node.block:
            raise _Reject(PROVENANCE, f"vertex {node.vertex} read at step {consumer} "
                          "claims initial state but differs from the seed-derived block")
        return
    w = node.writer
    if not 1 <= w.step < consumer:
        raise _Reject(PROVENANCE, f"writer step {w.step} does not precede step {consumer}")
    try:
        _verify_step(w, w.step, params, commitment, root_depth)
    except _Reject as e:
        raise _Reject(PROVENANCE, f"writer step {w.step} failed {e.check}: {e.detail}") from None
    if w.write != node.vertex:
        raise _Reject(PROVENANCE, f"writer step {w.step} wrote vertex {w.write}, not {node.vertex}")
    if w.post_block != node.block:
        raise _Reject(PROVENANCE, f"writer step {w.step} did not produce the block read at step {consumer}")
    if depth < params.R - 1:
        for child in node.children:
            _verify_node(child, w.step, depth + 1, seed, params, commitment, root_depth)


def verify_proof(proof: Proof, seed: bytes) -> VerifyReport:
    """Verify an already parsed proof whose challenge steps are set."""
    p = proof.params
    root_depth = root_tree_depth(p.K)
    for i, cw in enumerate(proof.challenges, start=1):
        try:
            _verify_step(cw.witness, cw.witness.step, p, proof.commitment, root_depth)
            if p.R >= 2:
                for node in cw.provenance:
                    _verify_node(node, cw.witness.step, 1, seed, p, proof.commitment, root_depth)
        except _Reject as e:
            return VerifyReport(False, i, e.check, e.detail)
    return VerifyReport(True)


def verify(proof_bytes: bytes, seed: bytes, params: Params | None = None, *,
           strict: bool = True) -> VerifyReport:
    """Verify serialized proof bytes for ``seed``.

    ``params`` pins the expected (d_hc, K, d, Q, R); when omitted the header's
    values are used, still subject to the strict floors unless ``strict`` is off.
    Hostile input never raises: parse problems come back as a ``parse`` rejection.
    """
    try:
        header, t_final, commitment = read_header(proof_bytes)
    except ProofFormatError as e:
        return VerifyReport(False, None, PARSE, str(e))
    if params is not None and params != header:
        return VerifyReport(False, None, PARAMS, f"proof header {header} does not match expected {params}")
    try:
        header.validate(strict=strict)
    except ParameterError as e:
        return VerifyReport(False, None, PARAMS, str(e))
    if header.Q and header.K < 1:
        return VerifyReport(False, None, PARAMS, "K must be >= 1")
    sigma = hashing.fiat_shamir_sigma(t_final, commitment)
    steps = [hashing.fiat_shamir_step(sigma, i, header.K) for i in range(1, header.Q + 1)]
    try:
        proof = deserialize_proof(proof_bytes, steps)
    except ProofFormatError as e:
        return VerifyReport(False, None, PARSE, str(e))
    return verify_proof(proof, seed)


def verify_cost_estimate(params: Params) -> int:
    """Worst-case hash evaluations to verify an honest proof.

    Assumes every provenance branch ends at a writer step and that no two
    openings share a tree node; batched openings and initial-state leaves
    only make the real count smaller.  Grows as Q * d**(R-1) * log N.
    """
    d, d_hc = params.d, params.d_hc
    lc = root_tree_depth(params.K)
    per_step = (2 + 2 * lc) + (d + 1) * (1 + d_hc) + (2 * d + 1) + 2 + (1 + d_hc)
    steps_per_challenge = sum(d ** level for level in range(params.R))
    return 1 + params.Q * (1 + steps_per_challenge * per_step)
