"""
UnaryFlow
Deterministic unary-stream multiplication, function evaluation and
matrix multiplication benchmarks against LFSR, Sobol and Halton streams
"""

__version__ = "1.0.0"
