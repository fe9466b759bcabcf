"""Maximal solutions of the Liouville equation -lap u + 4 e^{2u} = 0 on planar
domains, the hyperbolic radius v = e^{-u}, and a Fuchsian collar toolkit."""

__version__ = "0.1.0"
