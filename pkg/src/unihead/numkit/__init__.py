"""Deterministic dense-array substrate.

Conventions used by every higher module:
  feature maps   (H, W, C) row-major float32/float64
  matrices       (rows, cols); token projections multiply on the left
  dense conv     weights (C_out, C_in, k, k), stride 1, zero pad, odd k
  depth-wise     weights (k, k, C)
"""

from . import autodiff, counting, kernels, tensorio
from .autodiff import Tensor, backward
from .kernels import (bilinear_sample, bmm, conv2d, dwconv, grid_sample,
                      layernorm, matmul, relu, sigmoid, softmax, softmax_last)
from .rng import Rng, mix64
from .tensorio import payload_digest, read_tensor, tensor_bytes, write_tensor

__all__ = [
    "Tensor", "backward", "autodiff", "counting", "kernels", "tensorio",
    "matmul", "bmm", "softmax", "softmax_last", "bilinear_sample",
    "grid_sample", "conv2d", "dwconv", "layernorm", "relu", "sigmoid",
    "Rng", "mix64", "read_tensor", "write_tensor", "tensor_bytes",
    "payload_digest",
]
