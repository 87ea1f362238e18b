"""Command line entry point: ``mtkb <command> ...``.

Exit codes:
  0 success (query: at least one result)
  1 query returned no results
  2 usage error, syntax error, refused or unsupported query
  3 microtheory cycle
  4 unknown event or fact
  5 storage or I/O failure
  6 archivist unreachable
  7 archivist rejected the update
  8 conflicting index or handler declaration
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import shlex
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from . import archivist as arch
from .kb import KB, as_term
from .krf import KrfSyntaxError
from .loader import LoadError, load_directory, load_file
from .mtgraph import CycleError
from .provenance import MetaDepthError, UnknownEvent, UnknownFact
from .query import ConflictingIndex, DuplicateHandler, ScanRefused, UnsupportedPattern
from .store import MissingFact, StorageError
from .terms import TermSyntaxError

STORE_ENV = "MTKB_STORE_DIR"
DEFAULT_STORE = "mtkb-store"

EXIT_OK, EXIT_EMPTY, EXIT_USAGE, EXIT_CYCLE, EXIT_UNKNOWN = 0, 1, 2, 3, 4
EXIT_STORAGE, EXIT_NETWORK, EXIT_VALIDATION, EXIT_CONFLICT = 5, 6, 7, 8

_EXIT_FOR = [
    ((KrfSyntaxError, TermSyntaxError, ScanRefused, UnsupportedPattern, MetaDepthError), EXIT_USAGE),
    ((CycleError,), EXIT_CYCLE),
    ((UnknownEvent, UnknownFact, MissingFact), EXIT_UNKNOWN),
    ((arch.NetworkError,), EXIT_NETWORK),
    ((arch.ValidationError,), EXIT_VALIDATION),
    ((ConflictingIndex, DuplicateHandler), EXIT_CONFLICT),
    ((StorageError, OSError, arch.ArchivistError), EXIT_STORAGE),
]


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, LoadError):
        exc = exc.cause
    for types, code in _EXIT_FOR:
        if isinstance(exc, types):
            return code
    return EXIT_USAGE


@dataclass
class CliConfig:
    store_dir: Path
    default_mt: str = "BaseKB"
    allow_scan: bool = False
    output: str = "text"


class Output:
    def __init__(self, mode: str, stream=None):
        self.mode = mode
        self.stream = stream or sys.stdout

    def emit(self, text: str, record: dict) -> None:
        if self.mode == "jsonl":
            self.stream.write(json.dumps(record, sort_keys=True) + "\n")
        elif text:
            self.stream.write(text + "\n")


def _open_kb(cfg: CliConfig) -> KB:
    return KB(cfg.store_dir, allow_scan=cfg.allow_scan)


def _event_id(kb: KB, ref: str) -> int:
    if ref.isdigit():
        return int(ref)
    eid = kb.lookup(ref)
    if eid is None or eid not in kb.prov:
        raise UnknownEvent(ref)
    return eid


def _event_record(kb: KB, ev) -> dict:
    return {"id": ev.id, "entity": kb.term(ev.id).text, "source": ev.source.text,
            "timestamp": ev.timestamp, "type": ev.event_type.text,
            "meta_event": ev.meta_event, "update": ev.update}


# -- commands ---------------------------------------------------------------

def cmd_query(cfg, args, out) -> int:
    pattern = as_term(args.pattern)
    mt = args.mt or cfg.default_mt
    with _open_kb(cfg) as kb:
        results = kb.ask(pattern, mt, allow_scan=cfg.allow_scan)
    for body, b in results:
        out.emit(body.text, {"result": body.text,
                             "bindings": {k: v.text for k, v in sorted(b.items())}})
    if out.mode == "text":
        names = sorted({k for _, b in results for k in b})
        summary = "; ".join(
            f"{n} in {{{', '.join(sorted({b[n].text for _, b in results if n in b}))}}}"
            for n in names)
        print(f"; {len(results)} result(s)" + (f"; {summary}" if summary else ""),
              file=sys.stderr)
    return EXIT_OK if results else EXIT_EMPTY


def _report(kb, out, report) -> None:
    rec = report.to_json(kb)
    text = (f"loaded {report.path}: event {report.event}, {report.asserted} asserted, "
            f"{len(report.forgotten)} forgotten")
    for p in rec["forgotten"]:
        text += f"\n  forgot {p['text']} in {p['mt_text']}"
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    out.emit(text, {"op": "load", **rec})


def cmd_load(cfg, args, out) -> int:
    with _open_kb(cfg) as kb:
        for path in args.paths:
            kw = dict(default_mt=cfg.default_mt, dry_run=args.dry_run,
                      update=not args.no_update)
            if Path(path).is_dir():
                reports = load_directory(kb, path, **kw)
            else:
                reports = [load_file(kb, path, **kw)]
            for r in reports:
                _report(kb, out, r)
    return EXIT_OK


def cmd_assert(cfg, args, out) -> int:
    body = as_term(args.fact)
    with _open_kb(cfg) as kb:
        with kb.transaction():
            event = kb.begin_session(args.agent, args.session)
            fid = kb.store_fact(body, args.mt or cfg.default_mt, event=event)
        out.emit(f"stored {body.text} as fact {fid} under event {event}",
                 {"op": "assert", "fact": fid, "text": body.text, "event": event,
                  "entity": kb.term(event).text})
    return EXIT_OK


def cmd_provenance(cfg, args, out) -> int:
    with _open_kb(cfg) as kb:
        events = kb.events_for(args.fact, args.mt or cfg.default_mt)
        for ev in events:
            rec = _event_record(kb, ev)
            out.emit(f"{ev.id}\t{rec['entity']}\t{ev.source.text}\t{ev.timestamp}", rec)
    return EXIT_OK if events else EXIT_EMPTY


def cmd_events(cfg, args, out) -> int:
    with _open_kb(cfg) as kb:
        for eid in sorted(kb.store.events):
            ev = kb.store.events[eid]
            rec = _event_record(kb, ev)
            rec["pairs"] = len(kb.prov.pairs_for_event(eid))
            out.emit(f"{eid}\t{rec['entity']}\t{ev.source.text}\t{ev.timestamp}\t{rec['pairs']}",
                     rec)
    return EXIT_OK


def cmd_forget_event(cfg, args, out) -> int:
    with _open_kb(cfg) as kb:
        eid = _event_id(kb, args.event)
        forgotten = kb.retract_event(eid)
        pairs = [{"fact": f, "mt": m, "text": p.text, "mt_text": kb.store.interner.text(m)}
                 for p in forgotten for f, m in [p]]
        text = "\n".join(f"{p['text']}\t{p['mt_text']}" for p in pairs)
        out.emit(text, {"op": "forget-event", "event": eid, "forgotten": pairs})
    return EXIT_OK


def cmd_export(cfg, args, out) -> int:
    with _open_kb(cfg) as kb:
        eid = _event_id(kb, args.event)
        text = kb.export_event(eid)
    if args.path == "-":
        sys.stdout.write(text)
    else:
        Path(args.path).write_text(text, encoding="utf-8")
        out.emit(f"exported event {eid} to {args.path}",
                 {"op": "export", "event": eid, "path": args.path})
    return EXIT_OK


def cmd_declare_index(cfg, args, out) -> int:
    with _open_kb(cfg) as kb:
        kb.declare_index(args.predicate, args.position)
    out.emit(f"indexed {args.predicate} on argument {args.position}",
             {"op": "declare-index", "predicate": args.predicate, "position": args.position})
    return EXIT_OK


def cmd_checkpoint(cfg, args, out) -> int:
    with _open_kb(cfg) as kb:
        kb.checkpoint()
        n = len(kb.store)
    out.emit(f"snapshot written ({n} facts)", {"op": "checkpoint", "facts": n})
    return EXIT_OK


def cmd_serve(cfg, args, out) -> int:
    host, port = arch.parse_addr(args.addr) if args.addr else ("127.0.0.1", arch.DEFAULT_PORT)
    if args.port is not None:
        port = args.port
    data_dir = Path(args.data_dir or (cfg.store_dir / "archivist"))
    try:
        arch.serve(data_dir, host, port)
    except KeyboardInterrupt:
        pass
    return EXIT_OK


def cmd_sync(cfg, args, out) -> int:
    client = arch.ArchivistClient(args.endpoint)
    with _open_kb(cfg) as kb:
        session = None
        if args.session:
            session = kb.lookup(f"Session-{args.session}")
            if session is None or session not in kb.prov:
                raise UnknownEvent(f"Session-{args.session}")
        result = arch.client_sync(kb, client, args.agent, cfg.store_dir,
                                  session_event=session, path_prefix=args.prefix)
        for r in result.reports:
            _report(kb, out, r)
    out.emit(f"cursor {result.cursor}" + (f"; posted seq {result.posted}" if result.posted else ""),
             {"op": "sync", "cursor": result.cursor, "applied": result.applied,
              "posted": result.posted})
    return EXIT_OK


def cmd_post(cfg, args, out) -> int:
    client = arch.ArchivistClient(args.endpoint)
    content = Path(args.path).read_text(encoding="utf-8")
    seq = client.post_update(args.agent, args.as_path or Path(args.path).name, content)
    out.emit(f"posted seq {seq}", {"op": "post", "seq": seq})
    return EXIT_OK


def cmd_drain(cfg, args, out) -> int:
    client = arch.ArchivistClient(args.endpoint)
    manifest = client.drain_commits(Path(args.out_dir).resolve())
    for path, digest, lo, hi in manifest:
        out.emit(f"{path}\t{digest}\t{lo}\t{hi}",
                 {"path": path, "hash": digest, "seq_lo": lo, "seq_hi": hi})
    return EXIT_OK


def cmd_repl(cfg, args, out) -> int:
    parser = build_parser()
    stream = sys.stdin
    while True:
        if stream.isatty():
            sys.stdout.write("mtkb> ")
            sys.stdout.flush()
        line = stream.readline()
        if not line:
            return EXIT_OK
        line = line.strip()
        if not line or line.startswith(";"):
            continue
        if line in ("quit", "exit"):
            return EXIT_OK
        words = shlex.split(line)
        if words[0] == "repl":
            print("already in the repl", file=sys.stderr)
            continue
        argv = ["--store", str(cfg.store_dir), "--format", cfg.output,
                "--default-mt", cfg.default_mt] + words
        try:
            code = run(parser.parse_args(argv))
        except SystemExit as e:
            code = e.code
        if code not in (EXIT_OK, None):
            print(f"; exit {code}", file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mtkb", description="Microtheory knowledge base")
    p.add_argument("--store", default=os.environ.get(STORE_ENV, DEFAULT_STORE),
                   help=f"store directory (env {STORE_ENV})")
    p.add_argument("--format", choices=("text", "jsonl"), default="text")
    p.add_argument("--default-mt", default="BaseKB")
    p.add_argument("--allow-scan", action="store_true",
                   help="permit queries that mention no entity (full scan)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("query", help="ask a pattern in a microtheory")
    q.add_argument("pattern")
    q.add_argument("--mt")
    q.add_argument("--allow-scan", action="store_true", default=argparse.SUPPRESS)
    q.set_defaults(func=cmd_query)

    ld = sub.add_parser("load", help="load KRF files or directories")
    ld.add_argument("paths", nargs="+")
    ld.add_argument("--default-mt", default=argparse.SUPPRESS)
    ld.add_argument("--dry-run", action="store_true")
    ld.add_argument("--no-update", action="store_true",
                    help="do not supersede the previous load of the same file")
    ld.set_defaults(func=cmd_load)

    a = sub.add_parser("assert", help="store a fact under a session event")
    a.add_argument("fact")
    a.add_argument("--mt")
    a.add_argument("--agent", default=os.environ.get("USER", "agent"))
    a.add_argument("--session", help="session name; reused across invocations")
    a.set_defaults(func=cmd_assert)

    pv = sub.add_parser("provenance", help="events supporting a fact in a microtheory")
    pv.add_argument("fact")
    pv.add_argument("--mt")
    pv.set_defaults(func=cmd_provenance)

    ev = sub.add_parser("events", help="list provenance events")
    ev.set_defaults(func=cmd_events)

    fe = sub.add_parser("forget-event", help="retract a provenance event")
    fe.add_argument("event", help="event id or entity name")
    fe.set_defaults(func=cmd_forget_event)

    ex = sub.add_parser("export", help="export an event's facts as KRF")
    ex.add_argument("event")
    ex.add_argument("path", help="output file, or - for stdout")
    ex.set_defaults(func=cmd_export)

    di = sub.add_parser("declare-index", help="index a predicate on one argument")
    di.add_argument("predicate")
    di.add_argument("position", type=int)
    di.set_defaults(func=cmd_declare_index)

    cp = sub.add_parser("checkpoint", help="write a snapshot and truncate the log")
    cp.set_defaults(func=cmd_checkpoint)

    sv = sub.add_parser("serve", help="run the Archivist service")
    sv.add_argument("--addr", default=os.environ.get(arch.ADDR_ENV))
    sv.add_argument("--port", type=int)
    sv.add_argument("--data-dir")
    sv.set_defaults(func=cmd_serve)

    sy = sub.add_parser("sync", help="pull updates from (and post a session to) an Archivist")
    sy.add_argument("endpoint", nargs="?", default=None)
    sy.add_argument("--agent", default=os.environ.get("USER", "agent"))
    sy.add_argument("--session")
    sy.add_argument("--prefix")
    sy.set_defaults(func=cmd_sync)

    po = sub.add_parser("post", help="post a KRF file to an Archivist")
    po.add_argument("path")
    po.add_argument("--as", dest="as_path")
    po.add_argument("--endpoint")
    po.add_argument("--agent", default=os.environ.get("USER", "agent"))
    po.set_defaults(func=cmd_post)

    dr = sub.add_parser("drain", help="write queued Archivist commits to a directory")
    dr.add_argument("out_dir")
    dr.add_argument("--endpoint")
    dr.set_defaults(func=cmd_drain)

    rp = sub.add_parser("repl", help="interactive prompt accepting the commands above")
    rp.set_defaults(func=cmd_repl)
    return p


def run(args: argparse.Namespace, out: Optional[Output] = None) -> int:
    cfg = CliConfig(Path(args.store), args.default_mt, args.allow_scan, args.format)
    out = out or Output(cfg.output)
    try:
        return args.func(cfg, args, out)
    except Exception as e:  # mapped to documented exit codes
        code = exit_code_for(e)
        name = type(e.cause if isinstance(e, LoadError) else e).__name__
        if cfg.output == "jsonl":
            out.emit("", {"error": name, "message": str(e), "exit": code})
        print(f"mtkb: {name}: {e}", file=sys.stderr)
        return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
