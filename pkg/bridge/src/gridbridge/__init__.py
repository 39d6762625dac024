"""Environment handles for external RL frameworks.

A handle is created from a benchmark config file and exposes the familiar
reset/step surface plus JSON-negotiated space descriptors. All environment
logic stays on the gridbench side; the bridge only forwards calls and stacks
arrays for vectorized use.
"""

from .handle import EnvHandle, VectorHandle, make

__all__ = ["EnvHandle", "VectorHandle", "make"]
