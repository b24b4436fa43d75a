"""Discrete-velocity slab solver with Maxwell wall reflection and a
verification harness for its entropy and flux identities."""

__version__ = "0.1.0"
