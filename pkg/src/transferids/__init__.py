"""Black-box transferability of FGSM/PGD traffic across NSL-KDD detectors, plus two defenses."""
from transferids.kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
