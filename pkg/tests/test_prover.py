import dataclasses

import pytest

from posme import Params, gen, hashing, prove
from posme.commitment import commit_roots
from posme.prover import collect_required_steps, derive_challenges
from posme.witness import (
    HEADER,
    MAGIC,
    ProofFormatError,
    blocks_per_challenge,
    deserialize_proof,
    read_header,
    serialize_proof,
)
from tests.oracles import counting
from tests.oracles import posme_ref as ref

Z = bytes(32)


@pytest.fixture(scope="module")
def tiny():
    log, _ = gen(Z, Params(d_hc=4, K=16, d=4), strict=False)
    return log


def test_challenges_match_reference(tiny):
    _, c = commit_roots(tiny.root_list())
    assert c.hex() == "8d3de2f42b9b3c69c2e926bfedef6cc58fbb828c3edb8ff76958ffb57571aa79"
    steps = derive_challenges(tiny.final_transcript, c, 16, 4)
    assert steps == [2, 15, 9, 2]
    assert steps == ref.challenges(tiny.final_transcript, c, 16, 4)
    assert derive_challenges(tiny.final_transcript, c, 16, 0) == []


def test_required_steps_closure(run8):
    log, _ = run8
    reads, writes = log.reads.tolist(), log.writes.tolist()
    for R in (1, 2, 3):
        got = collect_required_steps([500, 1000], log, R)
        want, frontier = {500, 1000}, {500, 1000}
        for _ in range(R - 1):
            frontier = {w for s in frontier for v in reads[s - 1]
                        if (w := counting.last_writer(writes, v, s))}
            want |= frontier
        assert got == sorted(want)


@pytest.mark.parametrize("fixture", ["proof_r2", "proof_r3"])
def test_serialization_roundtrip(request, fixture):
    proof, data = request.getfixturevalue(fixture)
    steps = [cw.witness.step for cw in proof.challenges]
    assert deserialize_proof(data, steps) == proof
    assert serialize_proof(deserialize_proof(data, steps)) == data


def test_header_layout(proof_r2):
    proof, data = proof_r2
    p = proof.params
    assert data[:4] == MAGIC and data[4] == 1
    assert data[5] == p.d_hc
    assert int.from_bytes(data[6:14], "little") == p.K
    assert int.from_bytes(data[14:16], "little") == p.d
    assert int.from_bytes(data[16:18], "little") == p.Q
    assert data[18] == p.R
    assert data[19:51] == proof.t_final and data[51:83] == proof.commitment
    assert HEADER.size == 19
    assert read_header(data) == (p, proof.t_final, proof.commitment)


def test_golden_proof_digest(proof_r2):
    _, data = proof_r2
    assert hashing.H(data).hex() == GOLDEN_R2


def test_deterministic(run8, proof_r3):
    again = serialize_proof(prove(run8[0], 4, 3, strict=False))
    assert again == proof_r3[1]


def test_opened_blocks_match_counting_oracle(run10):
    log, _ = run10
    proof = prove(log, 32, 2, strict=False)
    reads, writes = log.reads.tolist(), log.writes.tolist()
    B = blocks_per_challenge(8, 2)
    assert B == 81
    full = 0
    for cw, n in zip(proof.challenges, proof.opened_blocks()):
        s = cw.witness.step
        assert n == counting.opened_blocks(reads, writes, s, 2) <= B
        if not counting.hits_init(reads, writes, s, 2):
            assert n == B
            full += 1
    assert full > 0


def test_blocks_per_challenge():
    assert blocks_per_challenge(8, 1) == 9
    assert blocks_per_challenge(8, 2) == 81
    assert blocks_per_challenge(8, 3) == 657


def test_r1_has_no_provenance(run8):
    proof = prove(run8[0], 3, 1, strict=False)
    assert all(cw.provenance == () for cw in proof.challenges)
    assert proof.opened_blocks() == [9, 9, 9]


def test_q_zero(run8):
    proof = prove(run8[0], 0, 2, strict=False)
    data = serialize_proof(proof)
    assert len(data) == HEADER.size + 64
    assert deserialize_proof(data, []) == proof


def test_lean_log_gives_same_proof(run8, seed, proof_r2):
    lean, _ = gen(seed, run8[0].params, lean=True, strict=False)
    assert serialize_proof(prove(lean, 8, 2, strict=False)) == proof_r2[1]


def test_strict_floors(run8):
    with pytest.raises(Exception, match="floors"):
        prove(run8[0], 8, 2)


@pytest.mark.parametrize("cut", [0, 10, 50, 83, 200, -1])
def test_truncation_is_a_parse_error(proof_r2, cut):
    _, data = proof_r2
    with pytest.raises(ProofFormatError):
        deserialize_proof(data[:cut], None)


def test_trailing_bytes_rejected(proof_r2):
    _, data = proof_r2
    with pytest.raises(ProofFormatError, match="trailing"):
        deserialize_proof(data + b"\0", None)


def test_bad_magic_and_version(proof_r2):
    _, data = proof_r2
    with pytest.raises(ProofFormatError, match="magic"):
        read_header(b"XXXX" + data[4:])
    with pytest.raises(ProofFormatError, match="version"):
        read_header(data[:4] + b"\x02" + data[5:])


def test_serialize_checks_challenge_count(proof_r2):
    proof, _ = proof_r2
    with pytest.raises(ValueError):
        serialize_proof(dataclasses.replace(proof, challenges=proof.challenges[:-1]))


# regression fixture: proof bytes for (test-task, nonce-1), d_hc=8, rho=4, Q=8, R=2
GOLDEN_R2 = "0b872d0d813417949dadf5732f0ac6b511394e6af92a6ef2686d0bda89a724d4"
