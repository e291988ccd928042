"""shiftlab: a windowed workbench for binary subshift transitivity checks."""

__version__ = "0.1.0"
