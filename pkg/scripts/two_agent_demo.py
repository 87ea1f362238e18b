"""Two agents share a conversation through an in-process Archivist.

    python scripts/two_agent_demo.py --workdir /tmp/demo
"""
from __future__ import annotations

import argparse
import shutil
import threading
from dataclasses import dataclass
from pathlib import Path

from mtkb import KB
from mtkb.archivist import Archivist, ArchivistClient, ArchivistServer, client_sync


@dataclass
class DemoConfig:
    workdir: str = "demo-work"


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--workdir", default=DemoConfig.workdir)
    cfg = DemoConfig(**vars(ap.parse_args()))
    root = Path(cfg.workdir)
    shutil.rmtree(root, ignore_errors=True)

    server = ArchivistServer(Archivist(root / "archivist"), port=0)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    client = ArchivistClient(f"127.0.0.1:{server.port}")
    try:
        alice = KB(root / "alice", sync=False)
        s = alice.begin_session("alice", "breakfast")
        alice.store_fact("(likes User42 GreenTea)", "UserModelMt", event=s)
        alice.store_fact("(isa User42 Student)", "UserModelMt", event=s)
        r = client_sync(alice, client, "alice", root / "alice", session_event=s)
        print(f"alice posted seq {r.posted}")

        bob = KB(root / "bob", sync=False)
        r = client_sync(bob, client, "bob", root / "bob")
        print(f"bob applied {r.applied}, cursor {r.cursor}")
        for body in bob.ask_bodies("(likes User42 ?x)", "UserModelMt"):
            print(f"bob knows {body}")

        for path, digest, lo, hi in client.drain_commits(root / "repo"):
            print(f"drained {path} seq {lo}..{hi} sha256 {digest[:12]}")
        alice.close()
        bob.close()
    finally:
        server.shutdown()
        server.server_close()


if __name__ == "__main__":
    main()
