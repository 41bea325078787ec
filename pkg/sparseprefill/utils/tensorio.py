# -*- coding: utf-8 -*-
# Sparseprefill
# MIT License (view LICENSE file)
# Copyright (c) 2026

"""Binary tensor container shared by every CLI subcommand.

Layout (little-endian): magic "FPT1", u32 version (1), u32 ndim,
ndim x u64 dimensions, u32 dtype code, raw row-major payload.
"""

import struct

import numpy as np
import torch

from sparseprefill.base.errors import TensorFormatException, ValidationException
from sparseprefill.base.types import SequenceBatch
from sparseprefill.utils import file as file_util


MAGIC = b"FPT1"
VERSION = 1
DTYPE_FLOAT32 = 0
DTYPE_INT32 = 1

_NUMPY_DTYPES = {
    DTYPE_FLOAT32: np.dtype("<f4"),
    DTYPE_INT32: np.dtype("<i4"),
}

_HEAD = struct.Struct("<4sII")
_DTYPE = struct.Struct("<I")


def _dtype_code(tensor: torch.Tensor) -> int:
  if tensor.dtype == torch.float32:
    return DTYPE_FLOAT32
  if tensor.dtype in (torch.int32, torch.int64, torch.int16, torch.int8, torch.uint8, torch.bool):
    return DTYPE_INT32
  raise ValidationException(f"Unsupported tensor dtype {tensor.dtype}")


def encode_tensor(tensor: torch.Tensor) -> bytes:
  """
  Serializes a tensor into the container format.

  Float32 tensors are stored with dtype code 0; integer and boolean tensors
  are stored as signed 32-bit integers (code 1).

  Args:
    tensor: Tensor to encode.

  Returns:
    Container bytes.

  Raises:
    ValidationException: If the dtype is unsupported or an integer does not fit in 32 bits.
  """
  code = _dtype_code(tensor)
  array = tensor.detach().cpu()
  if code == DTYPE_INT32:
    wide = array.to(torch.int64)
    if wide.numel() and (wide.min() < -2**31 or wide.max() >= 2**31):
      raise ValidationException("Integer tensor does not fit in 32 bits")
    array = wide
  payload = np.ascontiguousarray(array.numpy(), dtype=_NUMPY_DTYPES[code]).tobytes()
  shape = tuple(tensor.shape)
  header = _HEAD.pack(MAGIC, VERSION, len(shape))
  header += struct.pack(f"<{len(shape)}Q", *shape)
  header += _DTYPE.pack(code)
  return header + payload


def decode_tensor(data: bytes, source: str = "<bytes>") -> torch.Tensor:
  """
  Parses container bytes.

  Args:
    data: Container bytes.
    source: Name used in error messages.

  Returns:
    float32 or int32 tensor with the declared shape.

  Raises:
    TensorFormatException: If the header or the payload size is malformed.
    ValidationException: If a float payload holds NaN or Inf.
  """
  if len(data) < _HEAD.size:
    raise TensorFormatException(f"{source}: truncated header")
  magic, version, ndim = _HEAD.unpack_from(data, 0)
  if magic != MAGIC:
    raise TensorFormatException(f"{source}: bad magic {magic!r}")
  if version != VERSION:
    raise TensorFormatException(f"{source}: unsupported version {version}")
  if ndim < 1:
    raise TensorFormatException(f"{source}: ndim must be >= 1")
  offset = _HEAD.size
  dims_size = 8 * ndim
  if len(data) < offset + dims_size + _DTYPE.size:
    raise TensorFormatException(f"{source}: truncated shape")
  shape = struct.unpack_from(f"<{ndim}Q", data, offset)
  offset += dims_size
  (code,) = _DTYPE.unpack_from(data, offset)
  offset += _DTYPE.size
  if code not in _NUMPY_DTYPES:
    raise TensorFormatException(f"{source}: unknown dtype code {code}")
  if any(dim < 1 for dim in shape):
    raise TensorFormatException(f"{source}: dimensions must be >= 1, got {shape}")
  dtype = _NUMPY_DTYPES[code]
  count = 1
  for dim in shape:
    count *= dim
  if len(data) - offset != count * dtype.itemsize:
    raise TensorFormatException(
        f"{source}: payload holds {len(data) - offset} bytes, expected {count * dtype.itemsize}")
  array = np.frombuffer(data, dtype=dtype, count=count, offset=offset).reshape(shape)
  if code == DTYPE_FLOAT32:
    tensor = torch.from_numpy(array.astype(np.float32))
    if not torch.isfinite(tensor).all():
      raise ValidationException(f"{source}: payload contains NaN or Inf values")
    return tensor
  return torch.from_numpy(array.astype(np.int32))


def save_tensor(path: str, tensor: torch.Tensor):
  """
  Writes a tensor container file atomically.

  Raises:
    ValidationException: If the tensor cannot be encoded.
    OSError: If writing fails.
  """
  file_util.write_bytes(path, encode_tensor(tensor))


def load_tensor(path: str) -> torch.Tensor:
  """
  Reads a tensor container file.

  Raises:
    FileNotFoundError: If the file does not exist.
    TensorFormatException: If the container is malformed.
    ValidationException: If the payload is not finite.
  """
  file_util.require_file(path)
  return decode_tensor(file_util.read_bytes(path), path)


def load_batch(path: str, role: str) -> SequenceBatch:
  """
  Reads a (Z, H, L, d) float container as a SequenceBatch.

  Raises:
    FileNotFoundError: If the file does not exist.
    ValidationException: If the container is malformed or not a float rank 4 tensor.
  """
  tensor = load_tensor(path)
  if tensor.dtype != torch.float32:
    raise ValidationException(f"{path}: {role} tensor must be float32")
  return SequenceBatch(tensor, role)
