"""Cross-stack check: the compiled browser client against a live server.

Skipped when the frontend build or node is unavailable (run
`npm install && npm run build` in frontend/ first).
"""
import json
import shutil
import socket
import subprocess
import sys
import time
from pathlib import Path

import pytest

from tagscope.annotation import AnnotationItem, build_batches, read_answer_log
from tagscope.nn import RngState

ROOT = Path(__file__).resolve().parents[1]
DIST = ROOT / "frontend" / "dist"
E2E = ROOT / "frontend" / "test" / "e2e.mjs"

pytestmark = pytest.mark.skipif(
    shutil.which("node") is None or not (DIST / "api.js").exists(),
    reason="needs node and a built frontend/dist")


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


@pytest.fixture()
def live_server(tmp_path):
    options = ("PER", "ORG", "LOC", "MISC", "O")
    items = [AnnotationItem(f"it-{i}", f"sentence {i} hides ___ .", options,
                            "PER", word=f"w{i}", system_pred="O")
             for i in range(8)]
    batches = build_batches(items, RngState(4))
    from tagscope.annotation import write_batches
    items_log = tmp_path / "answers.jsonl"
    write_batches(batches, tmp_path / "batches.json")
    port = free_port()
    code = (
        "from tagscope.annotation import read_batches\n"
        "from tagscope.server import create_app, serve\n"
        f"batches = read_batches({str(tmp_path / 'batches.json')!r})\n"
        f"app = create_app(batches, answer_log={str(items_log)!r}, "
        "annotators_per_batch=3)\n"
        f"serve(app, {port})\n")
    proc = subprocess.Popen([sys.executable, "-c", code],
                            stdout=subprocess.PIPE, stderr=subprocess.PIPE)
    base = f"http://127.0.0.1:{port}"
    try:
        import httpx
        for _ in range(100):
            try:
                httpx.get(base + "/api/batch", timeout=0.3)
                break
            except Exception:
                if proc.poll() is not None:
                    raise RuntimeError(proc.stderr.read().decode())
                time.sleep(0.1)
        yield base, items_log
    finally:
        proc.terminate()
        proc.wait(timeout=10)


def test_compiled_client_against_live_server(live_server):
    base, answer_log = live_server
    result = subprocess.run(["node", str(E2E), base], capture_output=True,
                            text=True, timeout=60)
    assert result.returncode == 0, result.stderr
    out = json.loads(result.stdout)
    assert out["errors"] == []
    assert out["forbidden_seen"] == []          # blinding holds on the wire
    assert out["item_count"] == 10
    assert out["premature_payload_allowed"] is False
    assert out["draft_survives"] is True
    assert out["submit"] == {"ok": True, "accepted": 10}
    assert out["duplicate_status"] == 409
    assert out["completed_after"] == 1
    # the persisted answers match the scripted selections exactly
    answers = {a.item_id: set(a.selected) for a in read_answer_log(answer_log)}
    assert answers == {k: set(v) for k, v in out["selections"].items()}
