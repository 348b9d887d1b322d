"""On-disk run directory: a JSON header plus flat little-endian binaries."""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .arena import BLOCK_SIZE, Params
from .engine import WRITE_LOG_RECORD, RunLog
from .hashing import DIGEST_SIZE

FORMAT_VERSION = 1
HEADER_FILE = "header.json"
ROOTS_FILE = "roots.bin"
TRANSCRIPTS_FILE = "transcripts.bin"
STEPS_FILE = "steps.bin"
WRITELOG_FILE = "writelog.bin"

_WL_HEAD = struct.Struct("<QQ")


class RunDirError(ValueError):
    """Missing, inconsistent or wrong-version run directory."""


def _header(run_log: RunLog, task_id: str | None, nonce: str | None) -> dict:
    p = run_log.params
    return {
        "format_version": FORMAT_VERSION,
        "params": {"d_hc": p.d_hc, "K": p.K, "d": p.d},
        "seed": run_log.seed.hex(),
        "task_id": task_id,
        "nonce": nonce,
        "T_K": run_log.final_transcript.hex(),
        "r_K": run_log.root(run_log.K).hex(),
        "lean": run_log.lean,
    }


def _write_log_bytes(run_log: RunLog) -> bytes:
    out = bytearray()
    ob, cur = run_log.old_blocks, run_log.cursors
    for t in range(1, run_log.K + 1):
        out += _WL_HEAD.pack(t, int(run_log.writes[t - 1]))
        out += ob[(t - 1) * BLOCK_SIZE:t * BLOCK_SIZE]
        out += cur[(t - 1) * DIGEST_SIZE:t * DIGEST_SIZE]
    return bytes(out)


def save_run(run_log: RunLog, path, *, task_id: str | None = None,
             nonce: str | None = None) -> Path:
    d = Path(path)
    d.mkdir(parents=True, exist_ok=True)
    header = _header(run_log, task_id, nonce)
    (d / HEADER_FILE).write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
    (d / ROOTS_FILE).write_bytes(run_log.roots)
    (d / TRANSCRIPTS_FILE).write_bytes(run_log.transcripts)
    for name in (STEPS_FILE, WRITELOG_FILE):
        (d / name).unlink(missing_ok=True)
    if not run_log.lean:
        steps = np.concatenate([run_log.reads, run_log.writes[:, None]], axis=1)
        (d / STEPS_FILE).write_bytes(steps.astype("<u8").tobytes())
        if run_log.has_write_log:
            (d / WRITELOG_FILE).write_bytes(_write_log_bytes(run_log))
    return d


def read_header(path) -> dict:
    f = Path(path) / HEADER_FILE
    try:
        header = json.loads(f.read_text())
    except FileNotFoundError:
        raise RunDirError(f"{f} not found") from None
    except json.JSONDecodeError as e:
        raise RunDirError(f"{f}: {e}") from None
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise RunDirError(f"run directory format version {version!r} is not {FORMAT_VERSION}")
    return header


def _read(path: Path, size: int, what: str) -> bytes:
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        raise RunDirError(f"{path} not found") from None
    if len(data) != size:
        raise RunDirError(f"{what} has {len(data)} bytes, expected {size}")
    return data


def load_run(path) -> RunLog:
    d = Path(path)
    h = read_header(d)
    try:
        params = Params(**h["params"])
        seed = bytes.fromhex(h["seed"])
    except (KeyError, TypeError, ValueError) as e:
        raise RunDirError(f"malformed header: {e}") from None
    K, dd = params.K, params.d
    roots = _read(d / ROOTS_FILE, (K + 1) * DIGEST_SIZE, "roots file")
    transcripts = _read(d / TRANSCRIPTS_FILE, (K + 1) * DIGEST_SIZE, "transcripts file")
    if transcripts[-DIGEST_SIZE:].hex() != h.get("T_K"):
        raise RunDirError("transcripts file does not end in the header's T_K")
    reads = writes = old_blocks = cursors = None
    if not h.get("lean", False):
        raw = _read(d / STEPS_FILE, K * (dd + 1) * 8, "step records file")
        steps = np.frombuffer(raw, dtype="<u8").reshape(K, dd + 1).astype(np.uint64)
        reads, writes = steps[:, :dd].copy(), steps[:, dd].copy()
        wl = d / WRITELOG_FILE
        if wl.exists():
            raw = _read(wl, K * WRITE_LOG_RECORD, "write log")
            ob, cur = bytearray(), bytearray()
            for t in range(1, K + 1):
                o = (t - 1) * WRITE_LOG_RECORD
                tt, v = _WL_HEAD.unpack_from(raw, o)
                if tt != t or v != writes[t - 1]:
                    raise RunDirError(f"write log record {t} disagrees with the step records")
                ob += raw[o + 16:o + 16 + BLOCK_SIZE]
                cur += raw[o + 16 + BLOCK_SIZE:o + WRITE_LOG_RECORD]
            old_blocks, cursors = bytes(ob), bytes(cur)
    return RunLog(params, seed, roots, transcripts, reads, writes, old_blocks, cursors)
