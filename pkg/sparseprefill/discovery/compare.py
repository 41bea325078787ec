# -*- coding: utf-8 -*-
# Sparseprefill
# MIT License (view LICENSE file)
# Copyright (c) 2026

import math

import torch
from scipy import stats

from sparseprefill.base.errors import ValidationException
from sparseprefill.base.types import BlockScoreMap


def _check_same_grid(first: BlockScoreMap, second: BlockScoreMap):
  if first.score.shape != second.score.shape:
    raise ValidationException(
        f"Score maps differ in shape: {tuple(first.score.shape)} vs {tuple(second.score.shape)}")


def rank_correlation(first: BlockScoreMap, second: BlockScoreMap, min_entries: int = 3) -> float:
  """
  Mean per-row Spearman correlation between two score maps.

  Only causal entries of rows with at least min_entries of them take part;
  rows where either map is constant are skipped.

  Args:
    first: Score map.
    second: Score map over the same grid.
    min_entries: Minimum causal entries for a row to count.

  Returns:
    Mean correlation, or NaN if no row qualifies.
  """
  _check_same_grid(first, second)
  batch, heads, num_blocks, _ = first.score.shape
  a = first.score.double().numpy()
  b = second.score.double().numpy()
  values = []
  for z in range(batch):
    for h in range(heads):
      for row in range(max(min_entries - 1, 0), num_blocks):
        left = a[z, h, row, :row + 1]
        right = b[z, h, row, :row + 1]
        if left.min() == left.max() or right.min() == right.max():
          continue
        rho = stats.spearmanr(left, right)[0]
        if not math.isnan(rho):
          values.append(rho)
  if not values:
    return float("nan")
  return float(sum(values) / len(values))


def causal_argmax(scores: BlockScoreMap) -> torch.Tensor:
  """
  Row argmax over causal entries, lower block index on ties.

  Returns:
    int64 tensor (Z, H, M).
  """
  # -- non-causal entries are 0 and never beat the (positive) row maximum at a lower index
  return torch.argmax(scores.score, dim=-1)


def argmax_agreement(first: BlockScoreMap, second: BlockScoreMap) -> float:
  """
  Fraction of rows whose causal argmax agrees between two maps.
  """
  _check_same_grid(first, second)
  return float((causal_argmax(first) == causal_argmax(second)).double().mean())
