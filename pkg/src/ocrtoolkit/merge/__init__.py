"""Weight-space checkpoint merging over safetensors-compatible archives."""
from .archive import DTYPES, FLOAT_CODES, TensorArchive, dtype_code, load_archive, save_archive
from .ops import MergeSpec, alpha_sweep, soup, task_arithmetic

__all__ = [
    "DTYPES",
    "FLOAT_CODES",
    "MergeSpec",
    "TensorArchive",
    "alpha_sweep",
    "dtype_code",
    "load_archive",
    "save_archive",
    "soup",
    "task_arithmetic",
]
