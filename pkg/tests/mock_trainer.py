"""Minimal trainer stub speaking the wire protocol, with failure injection.

Modes (argv):
    --val-error X      fixed validation error for every result (default 0.25)
    --mismatch-once    first result carries a wrong id, the retry succeeds
    --mismatch-always  every result carries a wrong id
    --drop-field NAME  omit NAME from result records
    --error-always     answer every evaluate with an error record
    --bad-handshake    reply with an unsupported protocol version
    --crash-after N    exit(1) after N responses
"""

import argparse
import json
import sys


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--val-error", type=float, default=0.25)
    parser.add_argument("--mismatch-once", action="store_true")
    parser.add_argument("--mismatch-always", action="store_true")
    parser.add_argument("--drop-field", default=None)
    parser.add_argument("--error-always", action="store_true")
    parser.add_argument("--bad-handshake", action="store_true")
    parser.add_argument("--crash-after", type=int, default=-1)
    args = parser.parse_args()

    epochs_seen: dict[str, int] = {}
    responses = 0
    mismatched = False

    def emit(record: dict) -> None:
        sys.stdout.write(json.dumps(record) + "\n")
        sys.stdout.flush()

    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError:
            emit({"type": "error", "id": None, "message": "unparseable request"})
            continue
        kind = record.get("type")
        if kind == "hello":
            emit({"type": "hello", "protocol": 99 if args.bad_handshake else 1})
            continue
        if kind != "evaluate":
            emit({"type": "error", "id": record.get("id"), "message": f"unknown type {kind!r}"})
            continue

        missing = [k for k in ("id", "nc", "rc", "network", "epochs", "resume", "checkpoint_id")
                   if k not in record]
        if missing:
            emit({"type": "error", "id": record.get("id"),
                  "message": f"request missing field {missing[0]!r}"})
            continue
        if args.error_always:
            emit({"type": "error", "id": record["id"], "message": "injected failure"})
            continue

        gid = record["id"]
        epochs = int(record["epochs"])
        if record["resume"] and gid not in epochs_seen:
            emit({"type": "error", "id": gid, "message": "resume without checkpoint"})
            continue
        epochs_seen[gid] = epochs

        result = {
            "type": "result",
            "id": gid,
            "val_error": args.val_error,
            "epochs_trained": epochs,
            "checkpoint_id": record["checkpoint_id"],
        }
        if args.mismatch_always or (args.mismatch_once and not mismatched):
            result["id"] = "bogus-" + gid
            mismatched = True
        if args.drop_field:
            result.pop(args.drop_field, None)
        emit(result)
        responses += 1
        if responses == args.crash_after:
            return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
