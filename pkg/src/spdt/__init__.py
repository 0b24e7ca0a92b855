"""Diffusion over dynamic contact networks with direct and delayed-indirect
transmission links.

Subpackages: exposure physics (`exposure`), trace ingestion (`trace`),
network construction and variants (`network`), the stochastic SIR engine
(`epidemic`), analysis metrics (`metrics`), synthetic traces (`synth`),
experiment orchestration (`sweep`) and the command-line interface (`cli`).
"""

from ._kernel import KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
