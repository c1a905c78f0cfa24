"""Simulation laboratory for a measurement-feedback stabilized discrete time crystal.

The package bundles a bit-packed stabilizer tableau engine for large-lattice
Clifford dynamics, exact dense-state engines (statevector and density-matrix
channel oracle), the classical Toom NEC automaton, finite-size-scaling
analysis, and a compiler emitting ancilla-based hardware circuits.
"""

__version__ = "0.1.0"
