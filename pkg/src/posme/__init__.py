"""Sequential memory-hard computation over a mutable arena, with
Merkle-committed proofs and a classical verifier."""

__version__ = "0.1.0"

from .arena import Arena, Block, ParameterError, Params, init_arena
from .engine import Machine, ReplayError, RunLog, gen, last_write_before, rederive_records
from .hashing import derive_seed
from .prover import ProverError, derive_challenges, prove
from .verifier import CHECKS, VerifyReport, verify, verify_cost_estimate, verify_proof
from .witness import Proof, ProofFormatError, blocks_per_challenge, deserialize_proof, serialize_proof

__all__ = [
    "Arena", "Block", "ParameterError", "Params", "init_arena",
    "Machine", "ReplayError", "RunLog", "gen", "last_write_before", "rederive_records",
    "derive_seed", "ProverError", "derive_challenges", "prove",
    "CHECKS", "VerifyReport", "verify", "verify_cost_estimate", "verify_proof",
    "Proof", "ProofFormatError", "blocks_per_challenge", "deserialize_proof", "serialize_proof",
]
