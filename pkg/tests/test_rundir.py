import json

import numpy as np
import pytest

from posme import gen
from posme.engine import WRITE_LOG_RECORD
from posme.rundir import (
    FORMAT_VERSION,
    HEADER_FILE,
    STEPS_FILE,
    WRITELOG_FILE,
    RunDirError,
    load_run,
    read_header,
    save_run,
)


def test_roundtrip(run8, tmp_path):
    log, _ = run8
    save_run(log, tmp_path / "r", task_id="t", nonce="n")
    assert load_run(tmp_path / "r") == log
    h = read_header(tmp_path / "r")
    assert h["format_version"] == FORMAT_VERSION
    assert h["T_K"] == log.final_transcript.hex()
    assert (h["task_id"], h["nonce"], h["lean"]) == ("t", "n", False)


def test_lean_roundtrip(run8, seed, tmp_path):
    lean, _ = gen(seed, run8[0].params, lean=True, strict=False)
    save_run(lean, tmp_path)
    assert not (tmp_path / STEPS_FILE).exists()
    assert load_run(tmp_path) == lean


def test_binary_layouts(run8, tmp_path):
    log, _ = run8
    save_run(log, tmp_path)
    K, d = log.K, log.params.d
    steps = np.frombuffer((tmp_path / STEPS_FILE).read_bytes(), dtype="<u8").reshape(K, d + 1)
    assert np.array_equal(steps[:, :d], log.reads) and np.array_equal(steps[:, d], log.writes)
    wl = (tmp_path / WRITELOG_FILE).read_bytes()
    assert WRITE_LOG_RECORD == 112 and len(wl) == K * 112
    t = 17
    rec = wl[(t - 1) * 112:t * 112]
    e = log.write_entry(t)
    assert int.from_bytes(rec[:8], "little") == t
    assert int.from_bytes(rec[8:16], "little") == e.vertex
    assert rec[16:80] == e.old_block.to_bytes() and rec[80:] == e.cursor


def test_version_gate(run8, tmp_path):
    save_run(run8[0], tmp_path)
    h = json.loads((tmp_path / HEADER_FILE).read_text())
    h["format_version"] = FORMAT_VERSION + 1
    (tmp_path / HEADER_FILE).write_text(json.dumps(h))
    with pytest.raises(RunDirError, match="version"):
        load_run(tmp_path)


@pytest.mark.parametrize("name", ["roots.bin", "transcripts.bin", "steps.bin", "writelog.bin"])
def test_truncated_files(run8, tmp_path, name):
    save_run(run8[0], tmp_path)
    f = tmp_path / name
    f.write_bytes(f.read_bytes()[:-8])
    with pytest.raises(RunDirError):
        load_run(tmp_path)


def test_missing_directory(tmp_path):
    with pytest.raises(RunDirError):
        load_run(tmp_path / "nope")


def test_inconsistent_write_log(run8, tmp_path):
    save_run(run8[0], tmp_path)
    f = tmp_path / WRITELOG_FILE
    raw = bytearray(f.read_bytes())
    raw[8] ^= 1
    f.write_bytes(bytes(raw))
    with pytest.raises(RunDirError, match="disagrees"):
        load_run(tmp_path)
