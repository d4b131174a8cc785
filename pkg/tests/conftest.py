import numpy as np
import pytest

from mfnas.genome import CellGenome, Genome, NORMAL, NodeGene, REDUCTION


def make_cell(kind, node_specs):
    """node_specs: list of (links tuple, op)."""
    return CellGenome(
        kind=kind,
        nodes=tuple(NodeGene(links=tuple(links), op=op) for links, op in node_specs),
    )


def one_node_genome(nc_op=2, rc_op=6, nc_links=(1, 0), rc_links=(0, 1)):
    return Genome(
        normal=make_cell(NORMAL, [(nc_links, nc_op)]),
        reduction=make_cell(REDUCTION, [(rc_links, rc_op)]),
    )


def random_valid_cell(rng, kind=NORMAL, lo=1, hi=12):
    n = int(rng.integers(lo, hi + 1))
    nodes = []
    for k in range(n):
        links = [int(b) for b in rng.integers(0, 2, size=k + 2)]
        if not any(links):
            links[int(rng.integers(len(links)))] = 1
        nodes.append((tuple(links), int(rng.integers(11))))
    return make_cell(kind, nodes)


def random_valid_genome(rng, lo=1, hi=12):
    return Genome(
        normal=random_valid_cell(rng, NORMAL, lo, hi),
        reduction=random_valid_cell(rng, REDUCTION, lo, hi),
    )


class ScriptedRng:
    """Replays queued draws; integers() returns queued values verbatim."""

    def __init__(self, integer_draws=(), float_draws=()):
        self._ints = list(integer_draws)
        self._floats = list(float_draws)

    def integers(self, low, high=None, size=None):
        assert size is None, "scripted rng only supports scalar draws"
        return self._ints.pop(0)

    def random(self):
        return self._floats.pop(0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
