"""Population initialization and the variable-length genetic operators.

All operators take an explicit numpy Generator and are pure given it; raw
outputs pass through repair so every returned cell satisfies the node
invariants (no orphan nodes).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .genome import (
    CONV_OPS,
    CellGenome,
    Genome,
    N_OPS,
    NORMAL,
    NodeGene,
    POOL_OPS,
    REDUCTION,
    cell_encoding_length,
    flatten,
    parse,
    validate,
)

logger = logging.getLogger(__name__)


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class VariationConfig:
    """Operator rates; p_link=None means one expected flip per cell (1/length)."""

    p_crossover: float = 0.9
    p_inter_cell: float = 0.5
    p_link: float | None = None
    p_op: float = 0.1
    p_add_node: float = 0.2
    node_cap: int = 20

    def validate(self) -> None:
        probs = {
            "p_crossover": self.p_crossover,
            "p_inter_cell": self.p_inter_cell,
            "p_op": self.p_op,
            "p_add_node": self.p_add_node,
        }
        if self.p_link is not None:
            probs["p_link"] = self.p_link
        for name, p in probs.items():
            if not 0.0 <= p <= 1.0:
                raise ConfigurationError(f"{name} must be in [0, 1], got {p}")
        if self.node_cap < 1:
            raise ConfigurationError(f"node_cap must be >= 1, got {self.node_cap}")


def repair(cell: CellGenome, rng: np.random.Generator) -> CellGenome:
    """Give every all-zero-link node exactly one uniformly chosen link bit."""
    nodes = list(cell.nodes)
    changed = False
    for k, node in enumerate(nodes):
        if not any(node.links):
            links = list(node.links)
            links[int(rng.integers(len(links)))] = 1
            nodes[k] = NodeGene(links=tuple(links), op=node.op)
            changed = True
    return CellGenome(kind=cell.kind, nodes=tuple(nodes)) if changed else cell


def _random_cell(kind: str, n_nodes: int, prob: float, conv_bias: bool,
                 rng: np.random.Generator, op_replace_prob: float) -> CellGenome:
    replacement_ops = CONV_OPS if conv_bias else POOL_OPS
    nodes = []
    for k in range(n_nodes):
        links = [0] * (k + 2)
        # Only ever set bits: the gradient rules and the uniform fill compose
        # by OR, so their application order does not matter.
        if rng.random() < 1.0 - prob:
            links[-1] = 1
        for i in (0, 1):
            if rng.random() < prob:
                links[i] = 1
        for i in range(2, k + 1):  # bits that are neither first-two nor last
            if rng.random() < 0.5:
                links[i] = 1
        op = int(rng.integers(N_OPS))
        if rng.random() < op_replace_prob:
            op = int(rng.choice(replacement_ops))
        nodes.append(NodeGene(links=tuple(links), op=op))
    return repair(CellGenome(kind=kind, nodes=tuple(nodes)), rng)


def initialize_population(
    pop_size: int,
    node_range: tuple[int, int],
    rng: np.random.Generator,
    op_replace_prob: float = 0.5,
) -> list[Genome]:
    """Diversity-gradient initialization: individual i (1-based) sets each of
    the first two link bits with probability i/pop_size and the last link bit
    with probability 1 - i/pop_size, spanning chain-like to input-fan-like
    architectures. Normal-cell ops are biased toward convolutions, reduction
    ops toward pooling.
    """
    lo, hi = node_range
    if pop_size < 1:
        raise ConfigurationError(f"pop_size must be >= 1, got {pop_size}")
    if not 1 <= lo <= hi:
        raise ConfigurationError(f"node_range must satisfy 1 <= lo <= hi, got {node_range}")
    population = []
    for i in range(1, pop_size + 1):
        prob = i / pop_size
        n_nodes = int(rng.integers(lo, hi + 1))
        r_nodes = int(rng.integers(lo, hi + 1))
        nc = _random_cell(NORMAL, n_nodes, prob, True, rng, op_replace_prob)
        rc = _random_cell(REDUCTION, r_nodes, prob, False, rng, op_replace_prob)
        population.append(Genome(normal=nc, reduction=rc))
    return population


def inter_cell_crossover(p1: Genome, p2: Genome) -> tuple[Genome, Genome]:
    """Exchange reduction cells: ({NC1,RC1},{NC2,RC2}) -> ({NC1,RC2},{NC2,RC1})."""
    return (
        Genome(normal=p1.normal, reduction=p2.reduction),
        Genome(normal=p2.normal, reduction=p1.reduction),
    )


def _node_of_position(ri: int) -> int:
    """Node index k whose flat span contains 1-based position ri:
    k*(k+5)/2 < ri <= (k+1)*(k+6)/2."""
    k = 0
    while (k + 1) * (k + 6) // 2 < ri:
        k += 1
    return k


def intra_cell_crossover(
    c1: CellGenome, c2: CellGenome, rng: np.random.Generator
) -> tuple[CellGenome, CellGenome]:
    """Single-point prefix exchange when the cut lands inside the shorter
    cell's span, otherwise a one-way copy: the node containing the cut is
    truncated to the shorter cell's next node width and appended to it.
    """
    if c1.kind != c2.kind:
        raise ValueError(f"cannot cross {c1.kind} with {c2.kind}")
    swapped = False
    a, b = c1, c2
    if a.n_nodes > b.n_nodes:
        a, b = b, a
        swapped = True
    len_a = cell_encoding_length(a.n_nodes)
    len_b = cell_encoding_length(b.n_nodes)
    ri = int(rng.integers(1, len_b + 1))
    if ri <= len_a:
        fa, fb = flatten(a), flatten(b)
        fa[:ri], fb[:ri] = fb[:ri], fa[:ri]
        out_a, out_b = parse(fa, a.kind), parse(fb, b.kind)
    else:
        donor = b.nodes[_node_of_position(ri)]
        new_node = NodeGene(links=donor.links[: a.n_nodes + 2], op=donor.op)
        out_a = CellGenome(kind=a.kind, nodes=a.nodes + (new_node,))
        out_b = b
    out_a = repair(out_a, rng)
    out_b = repair(out_b, rng)
    return (out_b, out_a) if swapped else (out_a, out_b)


def _link_bit_count(n_nodes: int) -> int:
    return n_nodes * (n_nodes + 3) // 2


def single_point_mutation(
    cell: CellGenome, cfg: VariationConfig, rng: np.random.Generator
) -> CellGenome:
    """Flip each link bit with p_link; resample each op (excluding the current
    code) with p_op. The auto rate gives one expected link flip per cell."""
    p_link = cfg.p_link if cfg.p_link is not None else 1.0 / _link_bit_count(cell.n_nodes)
    nodes = []
    for node in cell.nodes:
        links = tuple(b ^ 1 if rng.random() < p_link else b for b in node.links)
        op = node.op
        if rng.random() < cfg.p_op:
            draw = int(rng.integers(N_OPS - 1))
            op = draw if draw < node.op else draw + 1
        nodes.append(NodeGene(links=links, op=op))
    return repair(CellGenome(kind=cell.kind, nodes=tuple(nodes)), rng)


def add_node_mutation(
    cell: CellGenome, rng: np.random.Generator, node_cap: int = 20
) -> CellGenome:
    """Append one node with uniform random links and op; no-op at the cap."""
    n = cell.n_nodes
    if n >= node_cap:
        logger.debug("add-node skipped: cell already at cap %d", node_cap)
        return cell
    links = tuple(int(b) for b in rng.integers(0, 2, size=n + 2))
    node = NodeGene(links=links, op=int(rng.integers(N_OPS)))
    return repair(CellGenome(kind=cell.kind, nodes=cell.nodes + (node,)), rng)


def _mutate_cell(cell: CellGenome, cfg: VariationConfig, rng: np.random.Generator) -> CellGenome:
    cell = single_point_mutation(cell, cfg, rng)
    if rng.random() < cfg.p_add_node:
        cell = add_node_mutation(cell, rng, cfg.node_cap)
    return cell


def make_offspring(
    parents: list[Genome], cfg: VariationConfig, rng: np.random.Generator
) -> list[Genome]:
    """Pair consecutive parents; crossover with p_crossover (inter- vs
    intra-cell chosen by p_inter_cell, intra applied to the NC pair and the RC
    pair independently), then mutate every offspring cell. Offspring counters
    and evaluations start fresh.
    """
    if len(parents) < 2 or len(parents) % 2 != 0:
        raise ConfigurationError(f"parent count must be even and >= 2, got {len(parents)}")
    offspring: list[Genome] = []
    for i in range(0, len(parents), 2):
        p1, p2 = parents[i], parents[i + 1]
        if rng.random() < cfg.p_crossover:
            if rng.random() < cfg.p_inter_cell:
                o1, o2 = inter_cell_crossover(p1, p2)
            else:
                nc1, nc2 = intra_cell_crossover(p1.normal, p2.normal, rng)
                rc1, rc2 = intra_cell_crossover(p1.reduction, p2.reduction, rng)
                o1 = Genome(normal=nc1, reduction=rc1)
                o2 = Genome(normal=nc2, reduction=rc2)
        else:
            o1 = Genome(normal=p1.normal, reduction=p1.reduction)
            o2 = Genome(normal=p2.normal, reduction=p2.reduction)
        for o in (o1, o2):
            child = Genome(
                normal=_mutate_cell(o.normal, cfg, rng),
                reduction=_mutate_cell(o.reduction, cfg, rng),
            )
            assert not validate(child.normal) and not validate(child.reduction)
            offspring.append(child)
    return offspring
