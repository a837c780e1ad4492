"""Explicit Spin(7), G2, SU(3) and SU(4) structures on coordinate charts, with numerical certification."""

__version__ = "0.1.0"
