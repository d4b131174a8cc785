"""Decode genomes into stacked-cell computation graphs and count parameters.

Vertex numbering inside a cell graph: 0 and 1 are the two cell inputs,
computation node k is vertex k+2, and a single concat vertex collects every
computation node whose output is otherwise unused.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .genome import (
    CellGenome,
    Genome,
    NORMAL,
    OP_NAMES,
    REDUCTION,
    validate,
)

IN0, IN1 = 0, 1

# Convolution kernels applied by each op, in order; empty means parameter-free.
# Every convolution counts kh*kw*C_in*C_out weights plus 2*C_out normalization
# parameters. Factorized ops (codes 3, 4) are two stacked convolutions, each
# with its own normalization term. Pooling and identity contribute nothing.
OP_KERNELS: dict[int, tuple[tuple[int, int], ...]] = {
    0: (),
    1: ((1, 1),),
    2: ((3, 3),),
    3: ((1, 3), (3, 1)),
    4: ((1, 7), (7, 1)),
    5: (),
    6: (),
    7: (),
    8: (),
    9: (),
    10: (),
}


class StructuralDecodeError(ValueError):
    """The cell failed validation and cannot be decoded."""


@dataclass(frozen=True)
class ArchGraph:
    """Per-cell DAG: incoming vertex ids and op code for each node, plus the
    node vertices feeding the concat output."""

    n_nodes: int
    node_inputs: tuple[tuple[int, ...], ...]
    node_ops: tuple[int, ...]
    concat: tuple[int, ...]


@dataclass(frozen=True)
class CellSpec:
    kind: str
    graph: ArchGraph
    in_channels: tuple[int, int]
    node_channels: int
    out_channels: int
    stride: int


@dataclass(frozen=True)
class NetworkSpec:
    """Stem + stacked cells + classifier, with all channel/stride bookkeeping."""

    cells: tuple[CellSpec, ...]
    n_repeat: int
    base_channels: int
    image_channels: int
    num_classes: int
    stem_out: int
    classifier_in: int


def decode_cell(cell: CellGenome) -> ArchGraph:
    """Turn link bits into explicit edges and find the concat member set."""
    violations = validate(cell)
    if violations:
        raise StructuralDecodeError("; ".join(violations))
    node_inputs = []
    consumed = set()
    for k, node in enumerate(cell.nodes):
        incoming = tuple(v for v, bit in enumerate(node.links) if bit)
        node_inputs.append(incoming)
        consumed.update(v for v in incoming if v >= 2)
    concat = tuple(k + 2 for k in range(len(cell.nodes)) if k + 2 not in consumed)
    return ArchGraph(
        n_nodes=len(cell.nodes),
        node_inputs=tuple(node_inputs),
        node_ops=tuple(node.op for node in cell.nodes),
        concat=concat,
    )


def stacking_pattern(n_repeat: int) -> list[str]:
    """N_repeat normals, one reduction, repeated three/two times: 3r+2 cells."""
    return (
        [NORMAL] * n_repeat + [REDUCTION] + [NORMAL] * n_repeat + [REDUCTION] + [NORMAL] * n_repeat
    )


def assemble_network(
    genome: Genome,
    n_repeat: int = 1,
    base_channels: int = 16,
    num_classes: int = 10,
    image_channels: int = 3,
) -> NetworkSpec:
    """Stack cells per the pattern; each cell reads the outputs of the two
    previous cells (the stem stands in for both at the start)."""
    if n_repeat < 1:
        raise ValueError("n_repeat must be >= 1")
    if base_channels < 1:
        raise ValueError("base_channels must be >= 1")
    graphs = {NORMAL: decode_cell(genome.normal), REDUCTION: decode_cell(genome.reduction)}

    cells = []
    width = base_channels
    # (channels of cell k-2 output, channels of cell k-1 output)
    prev_prev, prev = base_channels, base_channels
    for kind in stacking_pattern(n_repeat):
        if kind == REDUCTION:
            width *= 2
        graph = graphs[kind]
        spec = CellSpec(
            kind=kind,
            graph=graph,
            in_channels=(prev_prev, prev),
            node_channels=width,
            out_channels=len(graph.concat) * width,
            stride=2 if kind == REDUCTION else 1,
        )
        cells.append(spec)
        prev_prev, prev = prev, spec.out_channels
    return NetworkSpec(
        cells=tuple(cells),
        n_repeat=n_repeat,
        base_channels=base_channels,
        image_channels=image_channels,
        num_classes=num_classes,
        stem_out=base_channels,
        classifier_in=cells[-1].out_channels,
    )


def op_param_count(op: int, c_in: int, c_out: int) -> int:
    """Learnable parameters contributed by one op for the given widths."""
    total = 0
    c = c_in
    for kh, kw in OP_KERNELS[op]:
        total += kh * kw * c * c_out + 2 * c_out
        c = c_out
    return total


def cell_body_params(spec: CellSpec) -> int:
    """Node-op contributions only (no input projections)."""
    c = spec.node_channels
    return sum(op_param_count(op, c, c) for op in spec.graph.node_ops)


def count_parameters(spec: NetworkSpec) -> int:
    """Deterministic total over stem, per-cell input projections, node ops,
    and the global-pool + linear classifier."""
    total = 3 * 3 * spec.image_channels * spec.stem_out + 2 * spec.stem_out
    for cell in spec.cells:
        for c_in in cell.in_channels:
            total += op_param_count(1, c_in, cell.node_channels)  # 1x1 projection
        total += cell_body_params(cell)
    total += spec.classifier_in * spec.num_classes + spec.num_classes
    return total


def longest_path(graph: ArchGraph) -> int:
    """Computation nodes on the longest input-to-concat chain."""
    depth = {IN0: 0, IN1: 0}
    for k in range(graph.n_nodes):
        preds = graph.node_inputs[k]
        depth[k + 2] = 1 + max(depth[v] for v in preds)
    return max(depth[v] for v in graph.concat)


def network_to_json(spec: NetworkSpec) -> dict:
    """Documented JSON shape consumed by external trainers.

    Node ``inputs`` use the vertex numbering above; ``concat`` lists node
    vertex ids whose outputs are concatenated into the cell output.
    """
    return {
        "image_channels": spec.image_channels,
        "base_channels": spec.base_channels,
        "n_repeat": spec.n_repeat,
        "num_classes": spec.num_classes,
        "stem": {"kernel": [3, 3], "out_channels": spec.stem_out},
        "cells": [
            {
                "kind": cell.kind,
                "stride": cell.stride,
                "in_channels": list(cell.in_channels),
                "node_channels": cell.node_channels,
                "out_channels": cell.out_channels,
                "nodes": [
                    {"inputs": list(cell.graph.node_inputs[k]), "op": cell.graph.node_ops[k]}
                    for k in range(cell.graph.n_nodes)
                ],
                "concat": list(cell.graph.concat),
            }
            for cell in spec.cells
        ],
        "classifier": {"in_channels": spec.classifier_in, "num_classes": spec.num_classes},
    }


def network_json_text(spec: NetworkSpec) -> str:
    return json.dumps(network_to_json(spec), sort_keys=True)


def _cell_dot(name: str, graph: ArchGraph) -> list[str]:
    lines = [f"digraph {name} {{", "  rankdir=LR;"]
    lines.append('  in0 [label="in0" shape=box];')
    lines.append('  in1 [label="in1" shape=box];')
    for k in range(graph.n_nodes):
        label = f"n{k}: {OP_NAMES[graph.node_ops[k]]}"
        lines.append(f'  n{k} [label="{label}"];')
    lines.append('  concat [label="Concat" shape=box];')

    def vname(v: int) -> str:
        return {IN0: "in0", IN1: "in1"}.get(v, f"n{v - 2}")

    for k in range(graph.n_nodes):
        for v in graph.node_inputs[k]:
            lines.append(f"  {vname(v)} -> n{k};")
    for v in graph.concat:
        lines.append(f"  {vname(v)} -> concat;")
    lines.append("}")
    return lines


def to_dot(genome: Genome) -> str:
    """One directed graph per cell, labels from the op short names; output is
    deterministic for a given genome."""
    lines = _cell_dot("normal_cell", decode_cell(genome.normal))
    lines.append("")
    lines.extend(_cell_dot("reduction_cell", decode_cell(genome.reduction)))
    return "\n".join(lines) + "\n"
