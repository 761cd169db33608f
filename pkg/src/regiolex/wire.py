"""Wire-protocol adapter so an external scorer (e.g. a neural model running in
its own process) can fill the classifier role.

Protocol: newline-delimited JSON over standard streams (subprocess) or a TCP
socket. Handshake: the toolkit sends {"op":"hello","manifest":[...]} and the
peer must reply with an identical manifest. Scoring:
{"op":"score","id":n,"texts":[...]} -> {"op":"scores","id":n,"probs":[[...],...]}
with each probability vector summing to 1 within 1e-6. A peer reply of
{"op":"error","id":n,"msg":...} aborts the batch.
"""

from __future__ import annotations

import json
import logging
import math
import queue
import shlex
import socket
import subprocess
import threading

from .classifier import PROB_SUM_TOL, Scorer
from .errors import ScorerProtocolError, ValidationError

logger = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 30.0
DEFAULT_CHUNK_SIZE = 256


class _SubprocessTransport:
    """Line transport over a child process's stdin/stdout. A reader thread
    decouples readline from timeouts."""

    def __init__(self, argv: list[str]):
        self.proc = subprocess.Popen(
            argv,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            encoding="utf-8",
            bufsize=1,
        )
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self) -> None:
        try:
            for line in self.proc.stdout:
                self._lines.put(line)
        finally:
            self._lines.put(None)

    def send_line(self, line: str) -> None:
        try:
            self.proc.stdin.write(line + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError):
            raise ScorerProtocolError("peer process closed its input")

    def recv_line(self, timeout: float) -> str:
        try:
            line = self._lines.get(timeout=timeout)
        except queue.Empty:
            raise ScorerProtocolError(f"timed out after {timeout}s waiting for peer")
        if line is None:
            raise ScorerProtocolError("peer closed the connection")
        return line

    def close(self) -> None:
        # Terminate the child before touching proc.stdout: the reader thread
        # may be blocked on it, and closing a stream mid-read deadlocks on the
        # stream lock. Child exit EOFs the pipe and releases the reader.
        try:
            self.proc.terminate()
        except OSError:
            pass
        try:
            self.proc.stdin.close()
        except OSError:
            pass
        try:
            self.proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self.proc.kill()
            self.proc.wait(timeout=5)
        self._reader.join(timeout=5)
        try:
            self.proc.stdout.close()
        except OSError:
            pass


class _SocketTransport:
    def __init__(self, host: str, port: int, timeout: float):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.rfile = self.sock.makefile("r", encoding="utf-8", newline="\n")

    def send_line(self, line: str) -> None:
        try:
            self.sock.sendall((line + "\n").encode("utf-8"))
        except OSError:
            raise ScorerProtocolError("peer socket closed")

    def recv_line(self, timeout: float) -> str:
        self.sock.settimeout(timeout)
        try:
            line = self.rfile.readline()
        except (socket.timeout, TimeoutError):
            raise ScorerProtocolError(f"timed out after {timeout}s waiting for peer")
        if not line:
            raise ScorerProtocolError("peer closed the connection")
        return line

    def close(self) -> None:
        try:
            self.rfile.close()
        except OSError:
            pass
        try:
            self.sock.close()
        except OSError:
            pass


class ExternalScorer(Scorer):
    """ScorerContract proxy over the wire protocol. Access is serialized;
    large batches are split into protocol chunks with increasing request ids
    and reassembled in input order."""

    parallel_safe = False

    def __init__(self, transport, manifest: list[str], timeout: float, chunk_size: int):
        self.transport = transport
        self.labels = list(manifest)
        self.timeout = timeout
        self.chunk_size = chunk_size
        self._lock = threading.Lock()
        self._next_id = 0
        self._handshake()

    def _handshake(self) -> None:
        self.transport.send_line(json.dumps({"op": "hello", "manifest": self.labels}))
        reply = self._read_message()
        if reply.get("op") != "hello":
            raise ScorerProtocolError(f"expected hello reply, got {reply.get('op')!r}")
        peer_manifest = reply.get("manifest")
        if peer_manifest != self.labels:
            raise ScorerProtocolError(
                f"handshake manifest mismatch: peer advertises {peer_manifest!r}, "
                f"toolkit expects {self.labels!r}"
            )

    def _read_message(self) -> dict:
        line = self.transport.recv_line(self.timeout)
        try:
            msg = json.loads(line)
        except json.JSONDecodeError:
            raise ScorerProtocolError(f"malformed response line: {line[:200]!r}")
        if not isinstance(msg, dict):
            raise ScorerProtocolError("response is not a JSON object")
        return msg

    def _score_chunk(self, texts: list[str], offset: int) -> list[list[float]]:
        self._next_id += 1
        rid = self._next_id
        self.transport.send_line(
            json.dumps({"op": "score", "id": rid, "texts": texts}, ensure_ascii=False)
        )
        msg = self._read_message()
        if msg.get("op") == "error":
            raise ScorerProtocolError(f"peer error: {msg.get('msg')!r}", request_id=rid)
        if msg.get("op") != "scores":
            raise ScorerProtocolError(f"unexpected op {msg.get('op')!r}", request_id=rid)
        if msg.get("id") != rid:
            raise ScorerProtocolError(
                f"response id {msg.get('id')!r} does not match request", request_id=rid
            )
        probs = msg.get("probs")
        if not isinstance(probs, list) or len(probs) != len(texts):
            got = len(probs) if isinstance(probs, list) else "no"
            raise ScorerProtocolError(
                f"peer returned {got} vectors for {len(texts)} texts: "
                f"protocol error at index {offset + (got if isinstance(got, int) else 0)}",
                request_id=rid,
            )
        k = len(self.labels)
        for i, vec in enumerate(probs):
            if not isinstance(vec, list) or len(vec) != k:
                raise ScorerProtocolError(
                    f"probability vector at index {offset + i} has wrong shape",
                    request_id=rid,
                )
            total = 0.0
            for p in vec:
                if not isinstance(p, (int, float)) or not math.isfinite(p):
                    raise ScorerProtocolError(
                        f"non-finite probability at index {offset + i}", request_id=rid
                    )
                total += p
            if abs(total - 1.0) > PROB_SUM_TOL:
                raise ScorerProtocolError(
                    f"probability vector at index {offset + i} sums to {total!r}",
                    request_id=rid,
                )
        return [[float(p) for p in vec] for vec in probs]

    def score_batch(self, texts: list[str]) -> list[list[float]]:
        out: list[list[float]] = []
        with self._lock:
            for start in range(0, len(texts), self.chunk_size):
                chunk = texts[start : start + self.chunk_size]
                out.extend(self._score_chunk(chunk, start))
        return out

    def close(self) -> None:
        self.transport.close()

    def __enter__(self) -> "ExternalScorer":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def _parse_address(target: str) -> tuple[str, int] | None:
    host, sep, port = target.rpartition(":")
    if sep and host and port.isdigit():
        return host, int(port)
    return None


def external_scorer_connect(
    target: str | list[str],
    manifest: list[str],
    timeout: float = DEFAULT_TIMEOUT,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> ExternalScorer:
    """Connect to an external scorer peer and perform the handshake.

    target: an argv list or command string to spawn a subprocess peer, or a
    "host:port" string for a TCP peer.
    """
    if chunk_size <= 0:
        raise ValidationError("chunk_size must be > 0")
    if isinstance(target, list):
        transport = _SubprocessTransport(target)
    else:
        address = _parse_address(target)
        if address is not None:
            transport = _SocketTransport(address[0], address[1], timeout)
        else:
            transport = _SubprocessTransport(shlex.split(target))
    try:
        return ExternalScorer(transport, manifest, timeout, chunk_size)
    except ScorerProtocolError:
        transport.close()
        raise
