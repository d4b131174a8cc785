"""Serve the newline-delimited JSON evaluation protocol over stdio.

    -> {"type": "hello", "protocol": 1}
    <- {"type": "hello", "protocol": 1}
    -> {"type": "evaluate", "id", "nc", "rc", "network", "epochs",
        "resume", "checkpoint_id"}
    <- {"type": "result", "id", "val_error", "epochs_trained", "checkpoint_id"}
    <- {"type": "error", "id", "message"}

Build or training failures produce an error record and the session continues.
"""

from __future__ import annotations

import json
import logging
import sys

from .session import BuildError, TrainerSession

logger = logging.getLogger(__name__)

PROTOCOL_VERSION = 1

REQUIRED_FIELDS = ("id", "nc", "rc", "network", "epochs", "resume", "checkpoint_id")


def serve(session: TrainerSession, stdin=None, stdout=None) -> int:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    greeted = False

    def emit(record: dict) -> None:
        stdout.write(json.dumps(record) + "\n")
        stdout.flush()

    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError:
            emit({"type": "error", "id": None, "message": "unparseable request line"})
            continue
        kind = record.get("type")
        if kind == "hello":
            greeted = True
            emit({"type": "hello", "protocol": PROTOCOL_VERSION})
            continue
        if kind != "evaluate":
            emit({"type": "error", "id": record.get("id"),
                  "message": f"unsupported record type {kind!r}"})
            continue
        if not greeted:
            emit({"type": "error", "id": record.get("id"),
                  "message": "handshake required before evaluate"})
            continue
        missing = [name for name in REQUIRED_FIELDS if name not in record]
        if missing:
            emit({"type": "error", "id": record.get("id"),
                  "message": f"request missing field {missing[0]!r}"})
            continue
        try:
            emit(session.evaluate(record))
        except BuildError as exc:
            emit({"type": "error", "id": record.get("id"), "message": str(exc)})
        except Exception as exc:  # keep the session alive on unexpected failures
            logger.exception("evaluation failed")
            emit({"type": "error", "id": record.get("id"),
                  "message": f"internal failure: {exc}"})
    return 0
