# -*- coding: utf-8 -*-
# Sparseprefill
# MIT License (view LICENSE file)
# Copyright (c) 2026

import math
from dataclasses import dataclass

import torch

from sparseprefill.base.errors import ValidationException


ROLE_QUERY = "query"
ROLE_KEY = "key"
ROLE_VALUE = "value"
ROLES = (ROLE_QUERY, ROLE_KEY, ROLE_VALUE)

LOG2E = math.log2(math.e)
LN2 = math.log(2.0)

# -- finite stand-in for -inf in local maxima of non-causal pairs
NEG_SENTINEL = torch.finfo(torch.float32).min


@dataclass(frozen=True)
class SequenceBatch:
  """
  Batched multi-head activations of one role.

  Attributes:
    data: float32 tensor of shape (Z, H, L, d).
    role: One of ROLES.
  """
  data: torch.Tensor
  role: str

  def __post_init__(self):
    if self.role not in ROLES:
      raise ValidationException(f"Unknown role '{self.role}', expected one of {ROLES}")
    if not isinstance(self.data, torch.Tensor) or self.data.dim() != 4:
      raise ValidationException(f"{self.role} must be a rank 4 tensor (Z, H, L, d)")
    if min(self.data.shape) < 1:
      raise ValidationException(f"{self.role} has an empty dimension: {tuple(self.data.shape)}")
    if not self.data.is_floating_point():
      raise ValidationException(f"{self.role} must hold floating point values")
    data = self.data.to(torch.float32).contiguous()
    if not torch.isfinite(data).all():
      raise ValidationException(f"{self.role} contains NaN or Inf values")
    object.__setattr__(self, "data", data)

  @property
  def batch(self) -> int:
    return self.data.shape[0]

  @property
  def heads(self) -> int:
    return self.data.shape[1]

  @property
  def length(self) -> int:
    return self.data.shape[2]

  @property
  def head_dim(self) -> int:
    return self.data.shape[3]


def check_compatible(*batches: SequenceBatch):
  """
  Checks that batches share (Z, H, L, d) and carry distinct, matching roles.

  Args:
    batches: Query, key and optionally value batches, in that order.

  Raises:
    ValidationException: If shapes or roles disagree.
  """
  expected_roles = ROLES[:len(batches)]
  for batch, role in zip(batches, expected_roles):
    if batch.role != role:
      raise ValidationException(f"Expected a {role} batch, got {batch.role}")
  shape = tuple(batches[0].data.shape)
  for batch in batches[1:]:
    if tuple(batch.data.shape) != shape:
      raise ValidationException(
          f"Shape mismatch: {batches[0].role} {shape} vs {batch.role} {tuple(batch.data.shape)}")


@dataclass(frozen=True)
class BlockScoreMap:
  """
  Block level importance map of one discovery method.

  All fields are float32 tensors of shape (Z, H, M, N). Non-causal pairs
  (J > I) hold energy 0, local_max NEG_SENTINEL and score 0.

  Attributes:
    energy: Approximated energy S per block pair.
    local_max: Local maximum m per block pair, base-2 logit units.
    score: Normalized importance Score per block pair.
    method: Name of the discovery method that produced the map.
  """
  energy: torch.Tensor
  local_max: torch.Tensor
  score: torch.Tensor
  method: str = "approx"

  @property
  def num_blocks(self) -> int:
    return self.score.shape[-1]


@dataclass(frozen=True)
class ActiveMask:
  """
  Active block pairs.

  Attributes:
    active: bool tensor of shape (Z, M, N, H).
  """
  active: torch.Tensor

  @property
  def num_blocks(self) -> int:
    return self.active.shape[2]


@dataclass(frozen=True)
class SparseBlockPlan:
  """
  Compacted active key block lists.

  Attributes:
    indices: int32 tensor (Z, M, N, H); the first counts entries of each row
      are the active key blocks, the rest hold the fill value N.
    counts: int32 tensor (Z, M, H) with the number of active blocks per row.
  """
  indices: torch.Tensor
  counts: torch.Tensor

  @property
  def num_blocks(self) -> int:
    return self.indices.shape[2]

  @property
  def fill_value(self) -> int:
    return self.indices.shape[2]


@dataclass(frozen=True)
class AttentionOutput:
  """
  Attention result.

  Attributes:
    output: float32 tensor (Z, H, L, d).
    lse: float32 tensor (Z, H, L), base-2 log-sum-exp of the scaled logits.
  """
  output: torch.Tensor
  lse: torch.Tensor

  def natural_lse(self) -> torch.Tensor:
    """Returns the log-sum-exp in natural log units."""
    return self.lse * LN2
