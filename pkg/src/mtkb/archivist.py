"""The Archivist: a KRF update service shared by running agents.

Agents post whole KRF files at the end of a session and fetch what others
posted at the start of the next one. The service keeps every update in an
append-only log (same framing as the fact store) and a queue of updates still
to be committed to version control.

Wire protocol: one JSON object per line over TCP, one request and one
response per connection. See docs/formats.md for the field list.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import socket
import socketserver
import threading
from dataclasses import asdict, dataclass
from pathlib import Path, PurePosixPath
from typing import Optional

from .kb import KB, UNIX_TO_UNIVERSAL, universal_now
from .krf import KrfSyntaxError, parse_document
from .store import RecordLog, StorageError

log = logging.getLogger(__name__)

DEFAULT_PORT = 7417
ADDR_ENV = "MTKB_ARCHIVIST_ADDR"
LOG_NAME = "archivist.log"
MANIFEST_NAME = "MANIFEST.tsv"
CURSOR_NAME = "archivist.cursor"
MIRROR_DIR = "archive"


class ValidationError(ValueError):
    pass


class NetworkError(ConnectionError):
    pass


class ArchivistError(RuntimeError):
    """An error reported by the service."""

    def __init__(self, kind: str, message: str):
        super().__init__(f"{kind}: {message}")
        self.kind = kind


@dataclass(frozen=True)
class UpdateRecord:
    seq: int
    file_path: str
    content: str
    content_hash: str
    submitted_by: str
    submitted_at: int


def content_hash(content: str) -> str:
    return hashlib.sha256(content.encode("utf-8")).hexdigest()


def check_path(file_path: str) -> str:
    p = PurePosixPath(file_path)
    if not file_path or p.is_absolute() or ".." in p.parts or "\\" in file_path:
        raise ValidationError(f"file_path must be a relative path without '..': {file_path!r}")
    return str(p)


def parse_addr(addr: Optional[str]) -> tuple[str, int]:
    addr = addr or os.environ.get(ADDR_ENV) or f"127.0.0.1:{DEFAULT_PORT}"
    host, _, port = addr.rpartition(":")
    if not host:
        return addr, DEFAULT_PORT
    return host, int(port)


class Archivist:
    """Service state: update records, the commit queue, and their log."""

    def __init__(self, data_dir, sync: bool = True):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.records: list[UpdateRecord] = []
        self.queue: list[int] = []
        self._latest: dict[str, int] = {}
        self._lock = threading.Lock()
        self._log = RecordLog(self.data_dir / LOG_NAME, sync=sync)
        for tag, payload in self._log.read_all():
            self._replay(tag, json.loads(payload))

    def _replay(self, tag: bytes, obj: dict) -> None:
        if tag == b"U":
            rec = UpdateRecord(**obj)
            if rec.seq != len(self.records) + 1:
                raise StorageError(f"archivist log has a seq gap at {rec.seq}")
            self.records.append(rec)
            self._latest[rec.file_path] = rec.seq
            self.queue.append(rec.seq)
        elif tag == b"C":
            done = set(obj["seqs"])
            self.queue = [s for s in self.queue if s not in done]
        else:
            raise StorageError(f"unknown archivist record {tag!r}")

    @property
    def latest_seq(self) -> int:
        return len(self.records)

    def close(self) -> None:
        self._log.close()

    def post_update(self, agent: str, file_path: str, content: str) -> int:
        file_path = check_path(file_path)
        try:
            parse_document(content, file_path)
        except KrfSyntaxError as e:
            raise ValidationError(str(e)) from None
        digest = content_hash(content)
        with self._lock:
            current = self._latest.get(file_path)
            if current is not None and self.records[current - 1].content_hash == digest:
                return current
            rec = UpdateRecord(len(self.records) + 1, file_path, content, digest,
                               agent, universal_now())
            self._log.append([(b"U", json.dumps(asdict(rec)).encode("utf-8"))])
            self.records.append(rec)
            self._latest[file_path] = rec.seq
            self.queue.append(rec.seq)
            return rec.seq

    def get_updates(self, agent: str, since: int,
                    path_prefix: Optional[str] = None) -> list[UpdateRecord]:
        if since < 0:
            raise ValidationError("since must be >= 0")
        with self._lock:
            recs = self.records[since:]
        if path_prefix:
            recs = [r for r in recs if r.file_path.startswith(path_prefix)]
        return recs

    def pending(self) -> list[int]:
        with self._lock:
            return list(self.queue)

    def drain_commits(self, out_dir) -> list[tuple[str, str, int, int]]:
        """Write queued files (latest version per path) and a manifest, then clear the queue.

        The manifest is written atomically before the queue entries are
        acknowledged, so a crash in between only causes a rewrite next time.
        """
        out = Path(out_dir)
        with self._lock:
            seqs = list(self.queue)
            by_path: dict[str, list[int]] = {}
            for s in seqs:
                by_path.setdefault(self.records[s - 1].file_path, []).append(s)
            manifest = []
            for path in sorted(by_path):
                covered = by_path[path]
                rec = self.records[covered[-1] - 1]
                _atomic_write(out / path, rec.content.encode("utf-8"))
                manifest.append((path, rec.content_hash, covered[0], covered[-1]))
            text = "".join(f"{p}\t{h}\t{lo}\t{hi}\n" for p, h, lo, hi in manifest)
            _atomic_write(out / MANIFEST_NAME, text.encode("utf-8"))
            if seqs:
                self._log.append([(b"C", json.dumps({"seqs": seqs}).encode())])
                done = set(seqs)
                self.queue = [s for s in self.queue if s not in done]
            return manifest

    # -- wire dispatch -----------------------------------------------------------

    def handle(self, req: dict) -> dict:
        op = req.get("op")
        try:
            if op == "post_update":
                seq = self.post_update(req["agent"], req["file_path"], req["content"])
                return {"ok": True, "seq": seq}
            if op == "get_updates":
                recs = self.get_updates(req.get("agent", ""), int(req.get("since", 0)),
                                        req.get("path_prefix"))
                return {"ok": True, "latest": self.latest_seq,
                        "records": [asdict(r) for r in recs]}
            if op == "drain_commits":
                manifest = self.drain_commits(req["out_dir"])
                return {"ok": True, "manifest": [list(m) for m in manifest]}
            if op == "pending":
                return {"ok": True, "seqs": self.pending()}
            if op == "ping":
                return {"ok": True, "latest": self.latest_seq}
            return {"ok": False, "error": "BadRequest", "message": f"unknown op {op!r}"}
        except ValidationError as e:
            return {"ok": False, "error": "ValidationError", "message": str(e)}
        except (KeyError, TypeError, ValueError) as e:
            return {"ok": False, "error": "BadRequest", "message": str(e)}
        except (OSError, StorageError) as e:
            return {"ok": False, "error": "StorageError", "message": str(e)}


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        line = self.rfile.readline()
        if not line:
            return
        try:
            req = json.loads(line)
            resp = self.server.archivist.handle(req)
        except json.JSONDecodeError as e:
            resp = {"ok": False, "error": "BadRequest", "message": str(e)}
        self.wfile.write(json.dumps(resp).encode("utf-8") + b"\n")


class ArchivistServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, archivist: Archivist, host: str = "127.0.0.1", port: int = DEFAULT_PORT):
        self.archivist = archivist
        super().__init__((host, port), _Handler)

    @property
    def port(self) -> int:
        return self.server_address[1]


class ArchivistClient:
    def __init__(self, addr: Optional[str] = None, timeout: float = 10.0):
        self.host, self.port = parse_addr(addr)
        self.timeout = timeout

    def call(self, **req) -> dict:
        try:
            with socket.create_connection((self.host, self.port), timeout=self.timeout) as s:
                s.sendall(json.dumps(req).encode("utf-8") + b"\n")
                buf = b""
                while not buf.endswith(b"\n"):
                    chunk = s.recv(65536)
                    if not chunk:
                        break
                    buf += chunk
        except OSError as e:
            raise NetworkError(f"archivist at {self.host}:{self.port}: {e}") from e
        if not buf:
            raise NetworkError(f"archivist at {self.host}:{self.port} closed the connection")
        resp = json.loads(buf)
        if not resp.get("ok"):
            kind = resp.get("error", "Error")
            if kind == "ValidationError":
                raise ValidationError(resp.get("message", ""))
            raise ArchivistError(kind, resp.get("message", ""))
        return resp

    def post_update(self, agent: str, file_path: str, content: str) -> int:
        return self.call(op="post_update", agent=agent, file_path=file_path, content=content)["seq"]

    def get_updates(self, agent: str, since: int = 0,
                    path_prefix: Optional[str] = None) -> list[UpdateRecord]:
        resp = self.call(op="get_updates", agent=agent, since=since, path_prefix=path_prefix)
        return [UpdateRecord(**r) for r in resp["records"]]

    def drain_commits(self, out_dir) -> list[tuple[str, str, int, int]]:
        resp = self.call(op="drain_commits", out_dir=str(out_dir))
        return [tuple(m) for m in resp["manifest"]]


# -- client side sync ------------------------------------------------------------

def read_cursor(state_dir) -> int:
    p = Path(state_dir) / CURSOR_NAME
    return int(p.read_text().strip() or 0) if p.exists() else 0


def write_cursor(state_dir, cursor: int) -> None:
    _atomic_write(Path(state_dir) / CURSOR_NAME, f"{cursor}\n".encode())


@dataclass
class SyncResult:
    cursor: int
    applied: list[str]
    posted: Optional[int] = None
    reports: list = None


def client_sync(kb: KB, client: ArchivistClient, agent: str, state_dir,
                since: Optional[int] = None, session_event: Optional[int] = None,
                path_prefix: Optional[str] = None) -> SyncResult:
    """Pull updates posted by other agents, then post this agent's session export.

    Each fetched path is mirrored under ``state_dir/archive`` and loaded as a
    file, so a newer version of a path supersedes the older one. The cursor is
    persisted only after everything is applied.
    """
    from .loader import load_file

    state = Path(state_dir)
    cursor = read_cursor(state) if since is None else since
    records = client.get_updates(agent, cursor, path_prefix)
    latest: dict[str, UpdateRecord] = {}
    for rec in records:
        if rec.submitted_by != agent:
            latest[rec.file_path] = rec
    reports = []
    for path in sorted(latest, key=lambda p: latest[p].seq):
        rec = latest[path]
        target = state / MIRROR_DIR / check_path(rec.file_path)
        _atomic_write(target, rec.content.encode("utf-8"))
        unix = rec.submitted_at - UNIX_TO_UNIVERSAL
        os.utime(target, (unix, unix))
        reports.append(load_file(kb, target, mtime=rec.submitted_at))
    new_cursor = max([cursor] + [r.seq for r in records])
    posted = None
    if session_event is not None and kb.prov.pairs_for_event(session_event):
        entity = kb.term(session_event).text
        posted = client.post_update(agent, f"sessions/{agent}/{entity}.krf",
                                    kb.export_event(session_event))
    if new_cursor != cursor or since is None:
        write_cursor(state, new_cursor)
    return SyncResult(new_cursor, [latest[p].file_path for p in latest], posted, reports)


def serve(data_dir, host: str = "127.0.0.1", port: int = DEFAULT_PORT,
          ready: Optional[threading.Event] = None) -> None:
    archivist = Archivist(data_dir)
    with ArchivistServer(archivist, host, port) as server:
        log.info("archivist serving %s on %s:%d", data_dir, host, server.port)
        if ready is not None:
            ready.set()
        try:
            server.serve_forever()
        finally:
            archivist.close()
