"""Nested lattice codes over Z_p: ensembles, weak* typicality, and coding simulators."""

from .codes import GeneratorNestedCode, ParityNestedCode
from .lattice import LatticeParams
from .measures import FiniteMeasure, prokhorov_distance
from .zp import ZpMatrix, ZpVector

__version__ = "0.1.0"

__all__ = [
    "ZpVector",
    "ZpMatrix",
    "GeneratorNestedCode",
    "ParityNestedCode",
    "LatticeParams",
    "FiniteMeasure",
    "prokhorov_distance",
]
