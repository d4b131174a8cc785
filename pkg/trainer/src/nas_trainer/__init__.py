"""Reference trainer speaking the cell-network evaluation protocol."""

__version__ = "0.1.0"
