"""Live parametric-model synchronization over WebSockets."""

__version__ = "0.1.0"
