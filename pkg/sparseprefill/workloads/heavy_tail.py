# -*- coding: utf-8 -*-
# Sparseprefill
# MIT License (view LICENSE file)
# Copyright (c) 2026

"""Score rows with one dominant block and a long tail of small blocks."""

import torch

from sparseprefill.base.errors import ConfigException
from sparseprefill.base.types import NEG_SENTINEL, BlockScoreMap


def generate_heavy_tail_row(num_blocks: int, head_mass: float, alpha: float, rng_seed: int = 0,
                            head_index: int = 0) -> torch.Tensor:
  """
  Builds a score row whose head block holds head_mass and whose tail blocks
  all stay strictly below alpha * head_mass.

  The tail is uniform (1 - head_mass) / (n - 1) with a seeded multiplicative
  jitter, kept small enough to respect the alpha bound after renormalization.

  Args:
    num_blocks: Row length n (>= 2).
    head_mass: Mass of the head block, in (0, 1).
    alpha: Threshold ratio the tail must stay under, in (0, 1].
    rng_seed: Jitter seed.
    head_index: Position of the head block.

  Returns:
    float32 row of length n summing to 1.

  Raises:
    ConfigException: If the parameters cannot keep the tail under alpha * head_mass.
  """
  if num_blocks < 2:
    raise ConfigException(f"A heavy-tail row needs at least 2 blocks, got {num_blocks}")
  if not 0.0 < head_mass < 1.0:
    raise ConfigException(f"head_mass must lie in (0, 1), got {head_mass}")
  if not 0.0 < alpha <= 1.0:
    raise ConfigException(f"alpha must lie in (0, 1], got {alpha}")
  if not 0 <= head_index < num_blocks:
    raise ConfigException(f"head_index {head_index} outside row of {num_blocks} blocks")
  base = (1.0 - head_mass) / (num_blocks - 1)
  headroom = alpha * head_mass / base
  if headroom <= 1.0:
    raise ConfigException(
        f"Tail block mass {base:.3g} is not below alpha * head_mass = {alpha * head_mass:.3g}")
  jitter = min(1.0 / 3.0, 0.5 * (headroom - 1.0) / (headroom + 1.0))
  generator = torch.Generator().manual_seed(rng_seed)
  noise = torch.rand(num_blocks - 1, generator=generator, dtype=torch.float64) * 2.0 - 1.0
  weights = 1.0 + jitter * noise
  tail = weights / weights.sum() * (1.0 - head_mass)
  row = torch.cat([tail[:head_index], torch.tensor([head_mass], dtype=torch.float64), tail[head_index:]])
  return row.to(torch.float32)


def heavy_tail_score_map(rows: int, num_blocks: int, head_mass: float, alpha: float,
                         rng_seed: int = 0) -> BlockScoreMap:
  """
  Score map of independent heavy-tail rows, one per head.

  Head r uses generate_heavy_tail_row(num_blocks, head_mass, alpha, rng_seed + r)
  with the head at block 0. Query block i keeps the causal prefix of that row,
  renormalized to unit mass, so the tail stays under alpha times the head in
  every row.

  Returns:
    BlockScoreMap with Z = 1, H = rows and M = N = num_blocks.
  """
  if rows < 1:
    raise ConfigException(f"rows must be >= 1, got {rows}")
  full = torch.stack([generate_heavy_tail_row(num_blocks, head_mass, alpha, rng_seed + r)
                      for r in range(rows)]).to(torch.float64)
  causal = torch.ones(num_blocks, num_blocks, dtype=torch.bool).tril()
  prefix = full[:, None, :] * causal[None, :, :]
  score = prefix / prefix.sum(dim=-1, keepdim=True)
  score = score.to(torch.float32)[None]
  local_max = torch.zeros(num_blocks, num_blocks).masked_fill(~causal, NEG_SENTINEL)
  local_max = local_max.expand(1, rows, -1, -1).contiguous()
  return BlockScoreMap(energy=score.clone(), local_max=local_max, score=score, method="heavy-tail")
