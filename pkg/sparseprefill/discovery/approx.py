# -*- coding: utf-8 -*-
# Sparseprefill
# MIT License (view LICENSE file)
# Copyright (c) 2026

"""Block-approximated pattern discovery.

Every query tile is scored against the pooled key of each causal key block;
the per-query logits are reduced along the query axis into a local maximum
and an energy, then rescaled to a common row maximum and normalized.
"""

import logging

import torch

from sparseprefill.base.grid import BlockGrid
from sparseprefill.base.errors import ValidationException
from sparseprefill.base.types import (LOG2E, NEG_SENTINEL, ROLE_QUERY, BlockScoreMap,
                                      SequenceBatch, check_compatible)
from sparseprefill.discovery import pooling
from sparseprefill.utils.tracking import AllocationTracker, track, untrack


logger = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-10


def approx_block_scores(queries: SequenceBatch, pooled: torch.Tensor, grid: BlockGrid, scale: float,
                        tracker: AllocationTracker | None = None) -> tuple[torch.Tensor, torch.Tensor]:
  """
  Computes the energy S and local maximum m of every causal block pair.

  For query tile I and key block J <= I the base-2 logits are
  qk_i = (q_i . k_J) * scale * log2(e), then m = max_i qk_i and
  S = sum_i 2^(qk_i - m). Every token of tile I follows the first token of a
  causal block J, so no token-level mask is needed. Only one query tile of
  logits is alive at a time.

  Args:
    queries: Query batch (Z, H, L, d).
    pooled: Pooled keys (Z, H, N, d).
    grid: Block grid; query tiles have the block size.
    scale: Softmax temperature tau.
    tracker: Optional allocation accounting.

  Returns:
    Tuple (energy, local_max), both (Z, H, M, N); non-causal pairs hold 0 and NEG_SENTINEL.

  Raises:
    ValidationException: If shapes do not match the grid.
  """
  if queries.role != ROLE_QUERY:
    raise ValidationException(f"approx_block_scores expects a query batch, got {queries.role}")
  batch, heads, length, head_dim = queries.data.shape
  num_blocks = grid.num_blocks
  if length != grid.length or tuple(pooled.shape) != (batch, heads, num_blocks, head_dim):
    raise ValidationException(
        f"Pooled keys {tuple(pooled.shape)} do not match queries {tuple(queries.data.shape)} on the grid")
  energy = track(tracker, "energy", torch.zeros(batch, heads, num_blocks, num_blocks))
  local_max = track(tracker, "local_max", torch.full((batch, heads, num_blocks, num_blocks), NEG_SENTINEL))
  factor = scale * LOG2E
  for tile in range(num_blocks):
    start, end = grid.block_range(tile)
    visible_keys = tile + 1
    logits = torch.matmul(queries.data[:, :, start:end, :], pooled[:, :, :visible_keys, :].transpose(-1, -2))
    track(tracker, "tile_logits", logits)
    logits.mul_(factor)
    tile_max = track(tracker, "tile_max", logits.amax(dim=2))
    logits.sub_(tile_max.unsqueeze(2)).exp2_()
    energy[:, :, tile, :visible_keys] = logits.sum(dim=2)
    local_max[:, :, tile, :visible_keys] = tile_max
    untrack(tracker, "tile_logits")
    untrack(tracker, "tile_max")
  logger.debug("approximated %d causal block pairs", grid.causal_pairs())
  return energy, local_max


def normalize_block_scores(energy: torch.Tensor, local_max: torch.Tensor, grid: BlockGrid,
                           epsilon: float = DEFAULT_EPSILON, method: str = "approx",
                           tracker: AllocationTracker | None = None) -> BlockScoreMap:
  """
  Rescales energies to the row maximum and normalizes them into scores.

  M_I = max_J m_{I,J}; S'_{I,J} = S_{I,J} * 2^(m_{I,J} - M_I);
  Score_{I,J} = S'_{I,J} / (sum_K S'_{I,K} + epsilon).

  Args:
    energy: Energies (Z, H, M, N), 0 on non-causal pairs.
    local_max: Local maxima (Z, H, M, N), NEG_SENTINEL on non-causal pairs.
    grid: Block grid.
    epsilon: Denominator guard.
    method: Method name stored in the map.
    tracker: Optional allocation accounting.

  Returns:
    BlockScoreMap with causal-zeroed scores.
  """
  if energy.shape != local_max.shape or energy.shape[-1] != grid.num_blocks:
    raise ValidationException("Energy and local maxima do not match the grid")
  causal = track(tracker, "causal_blocks", grid.causal_blocks())
  row_max = track(tracker, "row_max", local_max.amax(dim=-1, keepdim=True))
  # -- one M x N buffer turns into the rescaled energy and then the score
  score = track(tracker, "score", local_max - row_max)
  untrack(tracker, "row_max")
  score.exp2_().mul_(energy)
  total = track(tracker, "row_total", score.sum(dim=-1, keepdim=True))
  score.div_(total.add_(epsilon))
  untrack(tracker, "row_total")
  outside = track(tracker, "outside_causal", ~causal)
  score.masked_fill_(outside, 0.0)
  untrack(tracker, "outside_causal")
  untrack(tracker, "causal_blocks")
  return BlockScoreMap(energy=energy, local_max=local_max, score=score, method=method)


def discover(queries: SequenceBatch, keys: SequenceBatch, grid: BlockGrid, scale: float,
             epsilon: float = DEFAULT_EPSILON, tracker: AllocationTracker | None = None) -> BlockScoreMap:
  """
  Discovers the block importance map: pool keys, approximate, normalize.

  Args:
    queries: Query batch (Z, H, L, d).
    keys: Key batch with the same shape.
    grid: Block grid of the sequence.
    scale: Softmax temperature tau.
    epsilon: Normalization guard.
    tracker: Optional allocation accounting.

  Returns:
    BlockScoreMap of method "approx".

  Raises:
    ValidationException: If the batches are incompatible.
  """
  check_compatible(queries, keys)
  pooled = pooling.pool_keys(keys, grid, tracker)
  energy, local_max = approx_block_scores(queries, pooled, grid, scale, tracker)
  untrack(tracker, "pooled_keys")
  return normalize_block_scores(energy, local_max, grid, epsilon, "approx", tracker)
