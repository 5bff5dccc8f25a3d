"""swinfx: bit-exact Q6.10 model of an FPGA Swin Transformer accelerator.

Subpackages:
    fxp        - saturating fixed-point scalar/array arithmetic
    approx     - shift-add exponential, leading-one division, max tree
    nonlinear  - softmax and GELU pipelines plus double-precision oracles
    mmu        - tiled matrix multiply, K-transpose padding, im2col
    fusion     - BN freezing/folding and full quantization
    model      - window attention blocks, FFN, patch embed/merge
    costmodel  - complexity formulas, invalid-computation ratio, budgets
    cli        - `swinfx` command line (kernels / block / cost / fuse)
"""

from ._backend import backend_name

__version__ = "0.1.0"

__all__ = ["backend_name", "__version__"]
