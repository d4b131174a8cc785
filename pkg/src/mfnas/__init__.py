"""Multi-fidelity evolutionary architecture search over cell encodings."""

from .genome import CellGenome, Counters, EvalResult, Genome, NodeGene

__all__ = ["CellGenome", "Counters", "EvalResult", "Genome", "NodeGene"]
__version__ = "0.1.0"
