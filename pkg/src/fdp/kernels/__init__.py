"""Hot-loop kernels with backend selection.

Two interchangeable implementations exist: a compiled Cython extension
(``fdp._kernels``) and a NumPy fallback (:mod:`fdp.kernels.fallback`).
The compiled one is preferred when importable; set ``FDP_NO_EXT=1`` to
force the fallback. ``benchmarks/bench_kernels.py`` compares the two.

Exported functions (identical signatures in both backends):

    im2col / col2im          2-D patch gather/scatter for convolution
    vol2col / col2vol        3-D counterparts
    maxpool2d / maxpool2d_backward
"""

import os

from fdp.kernels import fallback

if os.environ.get("FDP_NO_EXT", "") in ("1", "true", "yes"):
    _impl = fallback
else:
    try:
        from fdp import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = fallback

BACKEND = "compiled" if _impl is not fallback else "fallback"

im2col = _impl.im2col
col2im = _impl.col2im
vol2col = _impl.vol2col
col2vol = _impl.col2vol
maxpool2d = _impl.maxpool2d
maxpool2d_backward = _impl.maxpool2d_backward
