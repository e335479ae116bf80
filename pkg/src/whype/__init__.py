"""Over-the-air majority bundling for scale-out hyperdimensional computing."""

__version__ = "0.1.0"
