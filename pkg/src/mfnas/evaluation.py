"""Evaluator contract, checkpoint store, synthetic evaluator, trainer client.

The synthetic evaluator is a deterministic stand-in for real training: each
genome gets an exponential learning curve whose asymptote and time constant
are functions of its architecture (parameter count, path depth, op mix), plus
a small perturbation keyed by (seed, genome id, epoch) so resumed curves are
identical to fresh ones. Rankings under it sharpen as epochs grow, which is
the behavior the fidelity ladder exploits.

External trainers speak newline-delimited JSON over stdin/stdout:

    -> {"type": "hello", "protocol": 1}
    <- {"type": "hello", "protocol": 1}
    -> {"type": "evaluate", "id": ..., "nc": [...], "rc": [...],
        "network": {...}, "epochs": N, "resume": bool, "checkpoint_id": ...}
    <- {"type": "result", "id": ..., "val_error": x,
        "epochs_trained": N, "checkpoint_id": ...}
    <- {"type": "error", "id": ..., "message": ...}

The parameter-count objective is always computed locally by the decoder and
never trusted from a trainer.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import selectors
import shlex
import subprocess
import time
from dataclasses import dataclass, replace

from .decoder import assemble_network, count_parameters, longest_path, network_to_json
from .genome import CONV_OPS, EvalResult, Genome, flatten

PROTOCOL_VERSION = 1


class EvaluationError(RuntimeError):
    """Evaluator failed; carries the genome id so the caller can retry."""

    def __init__(self, message: str, genome_id: str | None = None):
        super().__init__(message)
        self.genome_id = genome_id


class ProtocolError(EvaluationError):
    """External trainer sent something outside the wire contract."""


class MissingCheckpointError(EvaluationError):
    pass


@dataclass(frozen=True)
class EvalRequest:
    genome: Genome
    epochs: int
    resume: bool


@dataclass
class Checkpoint:
    genome_id: str
    epochs_trained: int
    payload: dict | None = None


class CheckpointStore:
    """Per-genome training state keyed by genome id, with a budget ledger.

    Every put() charges the epoch increment over the stored level, so the
    ledger total equals the sum of (target - previously trained) over all
    evaluations with no double counting.
    """

    def __init__(self):
        self._entries: dict[str, Checkpoint] = {}
        self._total_epochs = 0
        self._n_evaluations = 0

    def has(self, genome_id: str) -> bool:
        return genome_id in self._entries

    def epochs_trained(self, genome_id: str) -> int:
        entry = self._entries.get(genome_id)
        return entry.epochs_trained if entry else 0

    def put(self, genome_id: str, epochs_trained: int, payload: dict | None = None) -> Checkpoint:
        stored = self.epochs_trained(genome_id)
        if epochs_trained < stored:
            raise EvaluationError(
                f"checkpoint for {genome_id} already at {stored} epochs, "
                f"cannot drop to {epochs_trained}",
                genome_id,
            )
        self._total_epochs += epochs_trained - stored
        self._n_evaluations += 1
        entry = Checkpoint(genome_id=genome_id, epochs_trained=epochs_trained, payload=payload)
        self._entries[genome_id] = entry
        return entry

    def get(self, genome_id: str) -> Checkpoint:
        if genome_id not in self._entries:
            raise MissingCheckpointError(f"no checkpoint for genome {genome_id}", genome_id)
        return self._entries[genome_id]

    def release(self, genome_id: str, missing_ok: bool = False) -> None:
        if genome_id in self._entries:
            del self._entries[genome_id]
        elif not missing_ok:
            raise MissingCheckpointError(f"no checkpoint for genome {genome_id}", genome_id)

    def usage(self) -> dict:
        return {
            "total_simulated_epochs": self._total_epochs,
            "n_evaluations": self._n_evaluations,
            "per_genome_epochs": {
                gid: entry.epochs_trained for gid, entry in sorted(self._entries.items())
            },
        }

    @property
    def total_epochs(self) -> int:
        return self._total_epochs


def evaluate(req: EvalRequest, evaluator) -> EvalResult:
    """Front door for any evaluator: validates the request, delegates, and
    records the checkpoint under the genome id."""
    if req.epochs < 1:
        raise ValueError(f"target epochs must be >= 1, got {req.epochs}")
    gid = req.genome.id
    stored = evaluator.store.epochs_trained(gid)
    if req.resume and not evaluator.store.has(gid):
        raise MissingCheckpointError(f"resume requested but no checkpoint for {gid}", gid)
    if stored > req.epochs:
        raise EvaluationError(
            f"genome {gid} already trained to {stored} epochs > target {req.epochs}", gid
        )
    result = evaluator.run(req)
    evaluator.store.put(gid, req.epochs)
    return result


class EvaluatorBase:
    """Shared plumbing: local f2 via the decoder, resume bookkeeping."""

    def __init__(self, store: CheckpointStore | None = None, n_repeat: int = 1,
                 base_channels: int = 16, num_classes: int = 10):
        self.store = store if store is not None else CheckpointStore()
        self.n_repeat = n_repeat
        self.base_channels = base_channels
        self.num_classes = num_classes
        self._f2_cache: dict[str, int] = {}

    def network_spec(self, genome: Genome):
        return assemble_network(
            genome,
            n_repeat=self.n_repeat,
            base_channels=self.base_channels,
            num_classes=self.num_classes,
        )

    def param_count(self, genome: Genome) -> int:
        f2 = self._f2_cache.get(genome.id)
        if f2 is None:
            f2 = count_parameters(self.network_spec(genome))
            self._f2_cache[genome.id] = f2
        return f2

    def evaluate(self, genome: Genome, epochs: int) -> Genome:
        req = EvalRequest(genome=genome, epochs=epochs, resume=self.store.has(genome.id))
        return replace(genome, eval=evaluate(req, self))

    def run(self, req: EvalRequest) -> EvalResult:
        raise NotImplementedError

    def close(self) -> None:
        pass


@dataclass(frozen=True)
class CurveCoefficients:
    """The one table behind the synthetic learning curves.

    error(e) = a_inf + (a0 - a_inf) * exp(-e / tau) + noise, clipped to [0, 1]

    a_inf   = floor + param_weight * exp(-params / param_scale)
                    + depth_weight * exp(-depth / depth_scale)
                    - conv_bonus * conv_fraction            (clipped to >= min_error)
    tau     = tau_base + tau_param_weight * (1 - exp(-params / tau_param_scale))
                       + tau_jitter * u(id, "tau")
    noise   = noise_amplitude * (2 * u(id, epoch) - 1)

    u(...) is a uniform [0, 1) hash of (seed, genome id, tag), so results are
    reproducible and independent of evaluation order.
    """

    a0: float = 0.50
    floor: float = 0.05
    min_error: float = 0.02
    param_weight: float = 0.30
    param_scale: float = 250_000.0
    depth_weight: float = 0.06
    depth_scale: float = 5.0
    conv_bonus: float = 0.03
    tau_base: float = 2.0
    tau_param_weight: float = 1.0
    tau_param_scale: float = 200_000.0
    tau_jitter: float = 0.8
    noise_amplitude: float = 0.004


DEFAULT_CURVE = CurveCoefficients()


def _unit_hash(seed: int, *parts) -> float:
    h = hashlib.blake2b(digest_size=8)
    h.update(str(seed).encode())
    for part in parts:
        h.update(b"|")
        h.update(str(part).encode())
    return int.from_bytes(h.digest(), "big") / 2.0**64


@dataclass(frozen=True)
class ArchFeatures:
    params: int
    depth: int
    conv_fraction: float


def architecture_features(genome: Genome, n_repeat: int = 1, base_channels: int = 16,
                          num_classes: int = 10) -> ArchFeatures:
    spec = assemble_network(genome, n_repeat=n_repeat, base_channels=base_channels,
                            num_classes=num_classes)
    depth = sum(longest_path(cell.graph) for cell in spec.cells)
    nodes = list(genome.normal.nodes) + list(genome.reduction.nodes)
    conv_fraction = sum(1 for n in nodes if n.op in CONV_OPS) / len(nodes)
    return ArchFeatures(
        params=count_parameters(spec), depth=depth, conv_fraction=conv_fraction
    )


class SyntheticEvaluator(EvaluatorBase):
    """Deterministic learning-curve evaluator for desk-scale runs."""

    def __init__(self, seed: int = 0, coeffs: CurveCoefficients = DEFAULT_CURVE,
                 store: CheckpointStore | None = None, **net_kwargs):
        super().__init__(store=store, **net_kwargs)
        self.seed = seed
        self.coeffs = coeffs
        self._feature_cache: dict[str, ArchFeatures] = {}

    def features(self, genome: Genome) -> ArchFeatures:
        feats = self._feature_cache.get(genome.id)
        if feats is None:
            feats = architecture_features(
                genome, self.n_repeat, self.base_channels, self.num_classes
            )
            self._feature_cache[genome.id] = feats
            self._f2_cache[genome.id] = feats.params
        return feats

    def asymptotic_error(self, genome: Genome) -> float:
        c = self.coeffs
        feats = self.features(genome)
        a_inf = (
            c.floor
            + c.param_weight * math.exp(-feats.params / c.param_scale)
            + c.depth_weight * math.exp(-feats.depth / c.depth_scale)
            - c.conv_bonus * feats.conv_fraction
        )
        return min(max(a_inf, c.min_error), 0.95)

    def time_constant(self, genome: Genome) -> float:
        c = self.coeffs
        feats = self.features(genome)
        return (
            c.tau_base
            + c.tau_param_weight * (1.0 - math.exp(-feats.params / c.tau_param_scale))
            + c.tau_jitter * _unit_hash(self.seed, genome.id, "tau")
        )

    def curve_error(self, genome: Genome, epochs: int) -> float:
        c = self.coeffs
        a_inf = self.asymptotic_error(genome)
        tau = self.time_constant(genome)
        noise = c.noise_amplitude * (2.0 * _unit_hash(self.seed, genome.id, epochs) - 1.0)
        err = a_inf + (c.a0 - a_inf) * math.exp(-epochs / tau) + noise
        return min(max(err, 0.0), 1.0)

    def run(self, req: EvalRequest) -> EvalResult:
        gid = req.genome.id
        return EvalResult(
            f1=self.curve_error(req.genome, req.epochs),
            f2=self.param_count(req.genome),
            epochs_trained=req.epochs,
            checkpoint_id=gid,
        )


def synthetic_evaluate(genome: Genome, epochs: int, seed: int,
                       coeffs: CurveCoefficients = DEFAULT_CURVE) -> EvalResult:
    """One-shot synthetic evaluation; pure in (genome, epochs, seed)."""
    if epochs < 1:
        raise ValueError(f"epochs must be >= 1, got {epochs}")
    evaluator = SyntheticEvaluator(seed=seed, coeffs=coeffs)
    return evaluator.run(EvalRequest(genome=genome, epochs=epochs, resume=False))


class ExternalEvaluator(EvaluatorBase):
    """Client for a trainer process speaking the wire protocol above.

    The subprocess is spawned on construction, handshaken, and owned for the
    evaluator's lifetime; one request is in flight at a time.
    """

    def __init__(self, command: str | list[str], timeout: float = 3600.0,
                 store: CheckpointStore | None = None, **net_kwargs):
        super().__init__(store=store, **net_kwargs)
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        self.timeout = timeout
        self._proc = subprocess.Popen(
            argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, bufsize=0
        )
        self._buf = b""
        self._selector = selectors.DefaultSelector()
        self._selector.register(self._proc.stdout, selectors.EVENT_READ)
        self._send({"type": "hello", "protocol": PROTOCOL_VERSION})
        hello = self._read_record(self.timeout)
        if hello.get("type") != "hello" or hello.get("protocol") != PROTOCOL_VERSION:
            raise ProtocolError(f"bad handshake from trainer: {hello!r}")

    def _send(self, record: dict) -> None:
        data = json.dumps(record).encode() + b"\n"
        try:
            self._proc.stdin.write(data)
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise EvaluationError(f"trainer pipe closed: {exc}") from exc

    def _read_record(self, timeout: float) -> dict:
        deadline = time.monotonic() + timeout
        while b"\n" not in self._buf:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise EvaluationError(f"trainer response timed out after {timeout}s")
            if not self._selector.select(remaining):
                continue
            chunk = os.read(self._proc.stdout.fileno(), 65536)
            if not chunk:
                code = self._proc.poll()
                raise EvaluationError(f"trainer exited (returncode {code}) mid-session")
            self._buf += chunk
        line, _, self._buf = self._buf.partition(b"\n")
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"unparseable trainer record: {line[:200]!r}") from exc
        if not isinstance(record, dict):
            raise ProtocolError(f"trainer record is not an object: {record!r}")
        return record

    def _request_record(self, req: EvalRequest) -> dict:
        genome = req.genome
        return {
            "type": "evaluate",
            "id": genome.id,
            "nc": flatten(genome.normal),
            "rc": flatten(genome.reduction),
            "network": network_to_json(self.network_spec(genome)),
            "epochs": req.epochs,
            "resume": req.resume,
            "checkpoint_id": genome.id,
        }

    def _check_response(self, record: dict, req: EvalRequest) -> EvalResult | None:
        """Returns the result, or None when the id mismatched (retriable)."""
        gid = req.genome.id
        kind = record.get("type")
        if kind == "error":
            raise EvaluationError(
                f"trainer error for {gid}: {record.get('message', '?')}", gid
            )
        if kind != "result":
            raise ProtocolError(f"unexpected record type {kind!r} for {gid}", gid)
        for name in ("id", "val_error", "epochs_trained", "checkpoint_id"):
            if name not in record:
                raise ProtocolError(f"trainer response missing field {name!r}", gid)
        if record["id"] != gid:
            return None
        val_error = float(record["val_error"])
        if not 0.0 <= val_error <= 1.0:
            raise ProtocolError(f"val_error {val_error} outside [0, 1] for {gid}", gid)
        if int(record["epochs_trained"]) != req.epochs:
            raise ProtocolError(
                f"trainer reported {record['epochs_trained']} epochs, requested {req.epochs}",
                gid,
            )
        return EvalResult(
            f1=val_error,
            f2=self.param_count(req.genome),
            epochs_trained=req.epochs,
            checkpoint_id=str(record["checkpoint_id"]),
        )

    def run(self, req: EvalRequest) -> EvalResult:
        record = self._request_record(req)
        self._send(record)
        result = self._check_response(self._read_record(self.timeout), req)
        if result is None:
            # One mismatched-id retry, then give up.
            self._send(record)
            result = self._check_response(self._read_record(self.timeout), req)
            if result is None:
                raise ProtocolError(
                    f"trainer response id mismatched twice for {req.genome.id}", req.genome.id
                )
        return result

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=10)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
        self._selector.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def external_evaluate(req: EvalRequest, evaluator: ExternalEvaluator) -> EvalResult:
    """Spec'd name for the external path; same front door as evaluate()."""
    return evaluate(req, evaluator)
