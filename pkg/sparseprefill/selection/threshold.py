# -*- coding: utf-8 -*-
# Sparseprefill
# MIT License (view LICENSE file)
# Copyright (c) 2026

"""Max-based dynamic thresholding.

A key block survives when its score reaches alpha times the row maximum, or
when it is a sink or local window block; causality bounds everything.
"""

import logging

import torch
from einops import rearrange

from sparseprefill.base.config import PipelineConfig
from sparseprefill.base.errors import ConfigException
from sparseprefill.base.grid import BlockGrid
from sparseprefill.base.types import ActiveMask, BlockScoreMap
from sparseprefill.selection.plan import mask_density


logger = logging.getLogger(__name__)


def selection_scores(scores: BlockScoreMap) -> torch.Tensor:
  """Returns the scores in selection layout (Z, M, N, H)."""
  return rearrange(scores.score, "z h m n -> z m n h")


def causal_mask(num_blocks: int) -> torch.Tensor:
  """Returns the (1, M, N, 1) causal mask j <= i."""
  causal = torch.ones(num_blocks, num_blocks, dtype=torch.bool).tril()
  return causal[None, :, :, None]


def structural_mask(num_blocks: int, config: PipelineConfig) -> torch.Tensor:
  """
  Blocks retained regardless of scores.

  Args:
    num_blocks: Blocks per side of the grid.
    config: Provides sink_blocks and window_blocks (the diagonal is always in the window).

  Returns:
    (1, M, N, 1) boolean mask (sink or window) and causal.
  """
  rows = torch.arange(num_blocks)[:, None]
  cols = torch.arange(num_blocks)[None, :]
  distance = rows - cols
  sink = cols < config.sink_blocks
  window = (distance >= 0) & (distance < config.window_blocks)
  retained = (sink | window) & (distance >= 0)
  return retained[None, :, :, None]


def max_threshold_mask(scores: BlockScoreMap, config: PipelineConfig) -> ActiveMask:
  """
  Selects blocks scoring at least alpha times their row maximum.

  A single max-reduction per row followed by elementwise comparisons; no
  sorting of scores is involved.

  Args:
    scores: Causal-zeroed score map.
    config: Provides alpha and the structural retention sizes.

  Returns:
    ActiveMask (Z, M, N, H).
  """
  values = selection_scores(scores)
  num_blocks = values.shape[1]
  causal = causal_mask(num_blocks)
  row_max = values.masked_fill(~causal, 0.0).amax(dim=2, keepdim=True)
  mask_score = values >= row_max * config.alpha
  active = (mask_score | structural_mask(num_blocks, config)) & causal
  return ActiveMask(active)


def calibrate_alpha(scores: BlockScoreMap, grid: BlockGrid, config: PipelineConfig, target_density: float,
                    tol: float = 0.01, max_iter: int = 40) -> float:
  """
  Finds the alpha whose max-threshold mask has the target density.

  Density does not increase with alpha, so the search bisects [0, 1] and
  returns the closest alpha seen when no midpoint lands within tol. When even
  alpha = 1 keeps more than the target (sink and window blocks), 1 is returned.

  Args:
    scores: Causal-zeroed score map.
    grid: Block grid of the score map.
    config: Provides the structural retention sizes; its alpha is ignored.
    target_density: Wanted density in (0, 1].
    tol: Accepted absolute density error.
    max_iter: Bisection steps.

  Raises:
    ConfigException: If the target or the tolerance is out of range.
  """
  if not 0.0 < target_density <= 1.0:
    raise ConfigException(f"target density must lie in (0, 1], got {target_density}")
  if tol < 0.0:
    raise ConfigException(f"density tolerance must be >= 0, got {tol}")

  def density_at(alpha: float) -> float:
    return mask_density(max_threshold_mask(scores, config.replace(alpha=alpha)), grid)

  floor = density_at(1.0)
  if floor >= target_density - tol:
    if floor > target_density + tol:
      logger.warning("density %.4f at alpha 1 exceeds target %.4f", floor, target_density)
    return 1.0
  low, high = 0.0, 1.0
  best_alpha, best_diff = 1.0, abs(floor - target_density)
  for _ in range(max_iter):
    alpha = (low + high) / 2
    value = density_at(alpha)
    diff = abs(value - target_density)
    if diff < best_diff:
      best_alpha, best_diff = alpha, diff
    if diff <= tol:
      break
    if value > target_density:
      low = alpha
    else:
      high = alpha
  logger.debug("calibrated alpha %.6f for density %.4f (off by %.4f)", best_alpha, target_density, best_diff)
  return best_alpha
