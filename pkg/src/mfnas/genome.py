"""Variable-length integer encoding of cell-based architectures.

An architecture is a pair of cells (normal + reduction). Each cell is an
ordered list of nodes; node k carries k+2 link bits (two cell inputs plus
one bit per earlier node) and one operation code, so a cell with N nodes
flattens to N*(N+5)/2 integers.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field

NORMAL = "normal"
REDUCTION = "reduction"

# Operation codes, short names, and the convolution/pooling split.
OP_NAMES = {
    0: "Identity",
    1: "Conv 1*1",
    2: "Conv 3*3",
    3: "Conv 1*3+3*1",
    4: "Conv 1*7+7*1",
    5: "MaxPool 2*2",
    6: "MaxPool 3*3",
    7: "MaxPool 5*5",
    8: "AvgPool 2*2",
    9: "AvgPool 3*3",
    10: "AvgPool 5*5",
}
N_OPS = len(OP_NAMES)
CONV_OPS = (1, 2, 3, 4)
POOL_OPS = (5, 6, 7, 8, 9, 10)


class EncodingError(ValueError):
    """Base class for genome encoding failures."""


class MalformedEncodingError(EncodingError):
    """Flat sequence length/content does not describe any cell."""


class InvalidOpError(EncodingError):
    """Operation code outside the predefined table."""


def cell_encoding_length(n_nodes: int) -> int:
    """Flat length of a cell with ``n_nodes`` nodes: sum of (k+3) for k < N."""
    if n_nodes < 1:
        raise ValueError(f"cell must have at least one node, got {n_nodes}")
    return n_nodes * (n_nodes + 5) // 2


def _node_count_for_length(length: int) -> int:
    # Invert N*(N+5)/2 == length; error when length is not of that form.
    n = 0
    total = 0
    while total < length:
        total += n + 3
        n += 1
    if total != length or n == 0:
        raise MalformedEncodingError(
            f"flat length {length} is not N*(N+5)/2 for any N >= 1"
        )
    return n


@dataclass(frozen=True)
class NodeGene:
    """Link bit-vector plus operation code for one computation node."""

    links: tuple[int, ...]
    op: int


@dataclass(frozen=True)
class CellGenome:
    """Ordered node genes for one cell, tagged normal or reduction."""

    kind: str
    nodes: tuple[NodeGene, ...]

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)


@dataclass(frozen=True)
class Counters:
    """Survival/elimination tallies driving archive ranking.

    ss: survivals through single-fidelity environment selection.
    ms: survivals through multi-fidelity re-selection.
    me: eliminations recorded by multi-fidelity selection.
    """

    ss: int = 0
    ms: int = 0
    me: int = 0


@dataclass(frozen=True)
class EvalResult:
    """Objectives plus training bookkeeping for one evaluated genome."""

    f1: float
    f2: int
    epochs_trained: int
    checkpoint_id: str


@dataclass(frozen=True)
class Genome:
    """One individual: a normal cell, a reduction cell, and its run state."""

    normal: CellGenome
    reduction: CellGenome
    counters: Counters = field(default_factory=Counters)
    eval: EvalResult | None = None

    @property
    def id(self) -> str:
        cached = self.__dict__.get("_id")
        if cached is None:
            cached = genome_id(self)
            object.__setattr__(self, "_id", cached)
        return cached

    def objectives(self) -> tuple[float, float]:
        if self.eval is None:
            raise UnevaluatedGenomeError(f"genome {self.id} has no evaluation")
        return (self.eval.f1, float(self.eval.f2))


class UnevaluatedGenomeError(RuntimeError):
    """An operation needed objectives but the genome was never evaluated."""


def flatten(cell: CellGenome) -> list[int]:
    """Concatenate each node's link bits followed by its op code."""
    flat: list[int] = []
    for node in cell.nodes:
        flat.extend(node.links)
        flat.append(node.op)
    return flat


def parse(flat, kind: str = NORMAL) -> CellGenome:
    """Inverse of :func:`flatten`; the flat form is role-free so the caller
    supplies the cell kind."""
    flat = list(flat)
    n_nodes = _node_count_for_length(len(flat))
    nodes = []
    pos = 0
    for k in range(n_nodes):
        links = tuple(flat[pos : pos + k + 2])
        op = flat[pos + k + 2]
        pos += k + 3
        if any(b not in (0, 1) for b in links):
            raise MalformedEncodingError(f"node {k} link bits must be 0/1, got {links}")
        if not 0 <= op < N_OPS:
            raise InvalidOpError(f"node {k} op code {op} outside [0, {N_OPS - 1}]")
        nodes.append(NodeGene(links=links, op=int(op)))
    return CellGenome(kind=kind, nodes=tuple(nodes))


def validate(cell: CellGenome) -> list[str]:
    """Collect every structural violation; empty list means the cell is ok.

    Never raises: variation output is validated before and after repair.
    """
    violations = []
    for k, node in enumerate(cell.nodes):
        if len(node.links) != k + 2:
            violations.append(
                f"link length: node {k} has {len(node.links)} link bits, expected {k + 2}"
            )
        if any(b not in (0, 1) for b in node.links):
            violations.append(f"link bits: node {k} has non-binary links {node.links}")
        elif not any(node.links):
            violations.append(f"orphan node: node {k} has no incoming link")
        if not 0 <= node.op < N_OPS:
            violations.append(f"op range: node {k} op {node.op} outside [0, {N_OPS - 1}]")
    return violations


def genome_id(genome: Genome) -> str:
    """Seed-free 64-bit digest over the role-tagged flat encodings.

    Stable across runs and platforms (blake2b over the canonical text); the
    birthday collision probability for 1e6 distinct genomes is about 3e-8.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(b"NC:")
    h.update(",".join(map(str, flatten(genome.normal))).encode())
    h.update(b"|RC:")
    h.update(",".join(map(str, flatten(genome.reduction))).encode())
    return h.hexdigest()


_LINE_RE = re.compile(r"^NC=\[(?P<nc>[0-9,]*)\]\s+RC=\[(?P<rc>[0-9,]*)\]$")


def to_line(genome: Genome) -> str:
    """Canonical one-line text form: ``NC=[...] RC=[...]``."""
    nc = ",".join(map(str, flatten(genome.normal)))
    rc = ",".join(map(str, flatten(genome.reduction)))
    return f"NC=[{nc}] RC=[{rc}]"


def from_line(line: str) -> Genome:
    m = _LINE_RE.match(line.strip())
    if m is None:
        raise MalformedEncodingError(f"unparseable genome line: {line!r}")
    nc = [int(x) for x in m.group("nc").split(",") if x != ""]
    rc = [int(x) for x in m.group("rc").split(",") if x != ""]
    return Genome(normal=parse(nc, NORMAL), reduction=parse(rc, REDUCTION))
