"""Micro-expression recognition with rank-pooled dynamics.

Heavy submodules are imported on demand; keep this module light so the
CLI can configure thread environment variables before NumPy loads.
"""

__version__ = "0.1.0"
