# -*- coding: utf-8 -*-
# Sparseprefill
# MIT License (view LICENSE file)
# Copyright (c) 2026

"""Comparison discovery methods and method dispatch."""

import torch

from sparseprefill.base.grid import BlockGrid
from sparseprefill.base.errors import ValidationException
from sparseprefill.base.types import LOG2E, NEG_SENTINEL, BlockScoreMap, SequenceBatch, check_compatible
from sparseprefill.discovery import pooling
from sparseprefill.discovery.approx import DEFAULT_EPSILON, discover, normalize_block_scores
from sparseprefill.utils.tracking import AllocationTracker, track


METHOD_APPROX = "approx"
METHOD_POOL_BOTH = "pool-both"
METHOD_EXACT = "exact"
DISCOVERY_METHODS = (METHOD_APPROX, METHOD_POOL_BOTH, METHOD_EXACT)


def discover_pool_both(queries: SequenceBatch, keys: SequenceBatch, grid: BlockGrid, scale: float,
                       epsilon: float = DEFAULT_EPSILON,
                       tracker: AllocationTracker | None = None) -> BlockScoreMap:
  """
  Scores block pairs from pooled queries against pooled keys.

  With one query proxy per tile the energy of every causal pair is 1 and the
  local maximum is the proxy logit itself, so the normalization reduces to a
  row softmax over causal pairs.

  Returns:
    BlockScoreMap of method "pool-both".
  """
  check_compatible(queries, keys)
  pooled_queries = pooling.pool_queries(queries, grid, tracker)
  pooled_keys = pooling.pool_keys(keys, grid, tracker)
  logits = torch.matmul(pooled_queries, pooled_keys.transpose(-1, -2)) * (scale * LOG2E)
  causal = grid.causal_blocks()
  local_max = track(tracker, "local_max", logits.masked_fill(~causal, NEG_SENTINEL))
  energy = track(tracker, "energy", causal.to(torch.float32).expand_as(local_max).contiguous())
  return normalize_block_scores(energy, local_max, grid, epsilon, METHOD_POOL_BOTH, tracker)


def discover_exact(queries: SequenceBatch, keys: SequenceBatch, grid: BlockGrid, scale: float,
                   epsilon: float = DEFAULT_EPSILON,
                   tracker: AllocationTracker | None = None) -> BlockScoreMap:
  """
  Reference discovery without block approximation.

  Every query token takes a causal softmax over the pooled keys it can see
  (blocks starting at or before the token); the probability rows are then
  averaged over the tokens of each query tile. Materializes an L x N matrix.

  Returns:
    BlockScoreMap of method "exact": score is the tile-averaged probability,
    energy the tile-summed probability and local_max the tile maximum logit.
  """
  check_compatible(queries, keys)
  pooled_keys = pooling.pool_keys(keys, grid, tracker)
  logits = torch.matmul(queries.data, pooled_keys.transpose(-1, -2)) * (scale * LOG2E)
  track(tracker, "token_logits", logits)
  key_starts = torch.arange(grid.num_blocks) * grid.block_size
  visible = torch.arange(grid.length)[:, None] >= key_starts[None, :]
  logits = logits.masked_fill(~visible, float("-inf"))
  token_max = logits.amax(dim=-1, keepdim=True)
  weights = torch.exp2(logits - token_max)
  probs = weights / (weights.sum(dim=-1, keepdim=True) + epsilon)
  track(tracker, "token_probs", probs)
  score = pooling.block_means(probs, grid)
  energy = score * grid.block_lengths()[:, None]
  local_max = _block_max(logits.masked_fill(~visible, NEG_SENTINEL), grid)
  causal = grid.causal_blocks()
  return BlockScoreMap(
      energy=energy.masked_fill(~causal, 0.0),
      local_max=local_max.masked_fill(~causal, NEG_SENTINEL),
      score=score.masked_fill(~causal, 0.0),
      method=METHOD_EXACT,
  )


def _block_max(data: torch.Tensor, grid: BlockGrid) -> torch.Tensor:
  rows = []
  for block in range(grid.num_blocks):
    start, end = grid.block_range(block)
    rows.append(data[:, :, start:end, :].amax(dim=2))
  return torch.stack(rows, dim=2)


def discover_with(method: str, queries: SequenceBatch, keys: SequenceBatch, grid: BlockGrid, scale: float,
                  epsilon: float = DEFAULT_EPSILON, tracker: AllocationTracker | None = None) -> BlockScoreMap:
  """
  Runs a discovery method by name.

  Args:
    method: One of DISCOVERY_METHODS.

  Raises:
    ValidationException: If the method is unknown.
  """
  if method == METHOD_APPROX:
    return discover(queries, keys, grid, scale, epsilon, tracker)
  if method == METHOD_POOL_BOTH:
    return discover_pool_both(queries, keys, grid, scale, epsilon, tracker)
  if method == METHOD_EXACT:
    return discover_exact(queries, keys, grid, scale, epsilon, tracker)
  raise ValidationException(f"Unknown discovery method '{method}', expected one of {DISCOVERY_METHODS}")
