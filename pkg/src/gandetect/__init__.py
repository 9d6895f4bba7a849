"""GAN-image forensics toolkit: detectors, degradations, metrics and a benchmark harness."""

from .kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"
__all__ = ["KERNEL_BACKEND", "__version__"]
