"""Channel Navier-Stokes laboratory: boundary vorticity, layer decomposition and separation bounds."""

__version__ = "0.1.0"
