"""erasurelab: simulation lab for erasure-biased neutral-atom logical qubits."""

__version__ = "0.1.0"
