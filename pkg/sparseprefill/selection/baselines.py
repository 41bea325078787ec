# -*- coding: utf-8 -*-
# Sparseprefill
# MIT License (view LICENSE file)
# Copyright (c) 2026

"""Top-k and Top-p block selection, kept for comparison with thresholding.

Both retain the same sink, window and diagonal blocks as max_threshold_mask so
that only the scoring rule differs. Ties go to the lower block index.
"""

import torch

from sparseprefill.base.config import PipelineConfig
from sparseprefill.base.errors import ValidationException
from sparseprefill.base.types import ActiveMask, BlockScoreMap
from sparseprefill.selection.threshold import causal_mask, selection_scores, structural_mask, max_threshold_mask


METHOD_MAX = "max"
METHOD_TOPK = "topk"
METHOD_TOPP = "topp"
SELECTION_METHODS = (METHOD_MAX, METHOD_TOPK, METHOD_TOPP)

# -- cumulative mass slack for float32 prefix sums
_MASS_TOLERANCE = 1e-6


def _scatter_sorted(order: torch.Tensor, keep_sorted: torch.Tensor) -> torch.Tensor:
  picked = torch.zeros(order.shape, dtype=torch.bool)
  return picked.scatter(2, order, keep_sorted.expand_as(order))


def topk_select(scores: BlockScoreMap, k: int, config: PipelineConfig) -> ActiveMask:
  """
  Keeps the min(k, i + 1) highest scoring causal blocks of every row.

  Args:
    scores: Causal-zeroed score map.
    k: Blocks kept per row (>= 1).
    config: Structural retention sizes.

  Returns:
    ActiveMask (Z, M, N, H).

  Raises:
    ValidationException: If k < 1.
  """
  if k < 1:
    raise ValidationException(f"k must be >= 1, got {k}")
  values = selection_scores(scores)
  num_blocks = values.shape[1]
  causal = causal_mask(num_blocks)
  keys = values.masked_fill(~causal, float("-inf"))
  order = torch.sort(keys, dim=2, descending=True, stable=True).indices
  limit = torch.clamp(torch.arange(num_blocks) + 1, max=k)
  keep_sorted = torch.arange(num_blocks)[None, None, :, None] < limit[None, :, None, None]
  picked = _scatter_sorted(order, keep_sorted)
  return ActiveMask((picked | structural_mask(num_blocks, config)) & causal)


def topp_select(scores: BlockScoreMap, p: float, config: PipelineConfig) -> ActiveMask:
  """
  Keeps the shortest prefix of descending scores whose mass reaches p.

  Each row is renormalized to unit mass first, since normalized rows sum to
  slightly less than one. With p = 1 every causal block with a nonzero score
  is kept.

  Args:
    scores: Causal-zeroed score map.
    p: Cumulative mass in (0, 1].
    config: Structural retention sizes.

  Returns:
    ActiveMask (Z, M, N, H).

  Raises:
    ValidationException: If p is outside (0, 1].
  """
  if not 0 < p <= 1:
    raise ValidationException(f"p must be in (0, 1], got {p}")
  values = selection_scores(scores)
  num_blocks = values.shape[1]
  causal = causal_mask(num_blocks)
  causal_values = values.masked_fill(~causal, 0.0)
  total = causal_values.sum(dim=2, keepdim=True)
  mass = torch.where(total > 0, causal_values / total.clamp_min(torch.finfo(torch.float32).tiny), 0.0)
  sorted_mass, order = torch.sort(mass.masked_fill(~causal, -1.0), dim=2, descending=True, stable=True)
  sorted_mass = sorted_mass.clamp_min(0.0)
  before = torch.cumsum(sorted_mass, dim=2) - sorted_mass
  keep_sorted = sorted_mass > 0
  if p < 1:
    keep_sorted &= before < p - _MASS_TOLERANCE
  picked = _scatter_sorted(order, keep_sorted)
  return ActiveMask((picked | structural_mask(num_blocks, config)) & causal)


def select_with(method: str, scores: BlockScoreMap, config: PipelineConfig,
                k: int | None = None, p: float | None = None) -> ActiveMask:
  """
  Runs a selection method by name.

  Args:
    method: One of SELECTION_METHODS.
    scores: Score map.
    config: Pipeline configuration (alpha and retention sizes).
    k: Blocks per row for "topk".
    p: Mass for "topp".

  Raises:
    ValidationException: If the method is unknown or its parameter is missing.
  """
  if method == METHOD_MAX:
    return max_threshold_mask(scores, config)
  if method == METHOD_TOPK:
    if k is None:
      raise ValidationException("topk selection needs k")
    return topk_select(scores, int(k), config)
  if method == METHOD_TOPP:
    if p is None:
      raise ValidationException("topp selection needs p")
    return topp_select(scores, float(p), config)
  raise ValidationException(f"Unknown selection method '{method}', expected one of {SELECTION_METHODS}")
