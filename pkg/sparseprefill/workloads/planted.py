# -*- coding: utf-8 -*-
# Sparseprefill
# MIT License (view LICENSE file)
# Copyright (c) 2026

"""Synthetic Q/K/V with planted attention structure.

Structure is planted in logit geometry: a planted query and key share a unit
direction u scaled by sqrt(strength / tau), which raises their raw dot product
by strength / tau, i.e. the scaled logit by strength. Directions of different
plantings are orthonormal whenever the head dimension allows it.
"""

import math
from dataclasses import dataclass

import torch

from sparseprefill.base.errors import ConfigException, GridBoundsException
from sparseprefill.base.grid import BlockGrid, make_block_grid
from sparseprefill.base.types import ROLE_KEY, ROLE_QUERY, ROLE_VALUE, ActiveMask, SequenceBatch


PATTERN_VERTICAL = "vertical"
PATTERN_SLASH = "slash"
PATTERN_BLOCK = "block"
PATTERN_NEEDLE = "needle"
PATTERN_KINDS = (PATTERN_VERTICAL, PATTERN_SLASH, PATTERN_BLOCK, PATTERN_NEEDLE)


@dataclass(frozen=True)
class PlantedSpec:
  """
  Description of one planted workload.

  Attributes:
    pattern_kind: One of PATTERN_KINDS.
    strength: Scaled logit boost of planted pairs (0 plants nothing).
    target: vertical: key block; slash: token offset; block: (first query block, key block),
      the cluster covering every query block from the first one on; needle: token index.
    base_noise: Standard deviation of the Gaussian background of Q and K.
    rng_seed: Generator seed.
    alternating_queries: Planted query rows alternate sign token by token.
  """
  pattern_kind: str
  strength: float
  target: int | tuple[int, int]
  base_noise: float = 1.0
  rng_seed: int = 0
  alternating_queries: bool = False

  def __post_init__(self):
    if self.pattern_kind not in PATTERN_KINDS:
      raise ConfigException(f"Unknown pattern '{self.pattern_kind}', expected one of {PATTERN_KINDS}")
    if not math.isfinite(self.strength) or self.strength < 0:
      raise ConfigException(f"strength must be >= 0, got {self.strength}")
    if not math.isfinite(self.base_noise) or self.base_noise < 0:
      raise ConfigException(f"base_noise must be >= 0, got {self.base_noise}")


def _directions(count: int, head_dim: int, generator: torch.Generator) -> torch.Tensor:
  raw = torch.randn(head_dim, count, generator=generator)
  if count <= head_dim:
    q, _ = torch.linalg.qr(raw)
    return q.T.contiguous()
  return (raw / raw.norm(dim=0, keepdim=True)).T.contiguous()


def _check_block(grid: BlockGrid, block: int, what: str):
  if not isinstance(block, int) or block < 0 or block >= grid.num_blocks:
    raise GridBoundsException(f"{what} {block} outside grid of {grid.num_blocks} blocks")


def _check_token(grid: BlockGrid, token: int, what: str):
  if not isinstance(token, int) or token < 0 or token >= grid.length:
    raise GridBoundsException(f"{what} {token} outside sequence of length {grid.length}")


def generate_planted(spec: PlantedSpec, batch: int, heads: int, length: int, head_dim: int,
                     block_size: int, scale: float | None = None
                     ) -> tuple[SequenceBatch, SequenceBatch, SequenceBatch, ActiveMask]:
  """
  Generates Q, K, V with a planted pattern and its ground-truth block mask.

  Args:
    spec: Workload description.
    batch: Z.
    heads: H.
    length: L.
    head_dim: d.
    block_size: B.
    scale: Softmax temperature used to size the boost, None for d^(-1/2).

  Returns:
    Tuple (Q, K, V, truth); truth (Z, M, N, H) marks the planted causal blocks and the diagonal.

  Raises:
    GridBoundsException: If the target is outside the grid or not causal.
    ConfigException: If a dimension is below 1.
  """
  if min(batch, heads, length, head_dim, block_size) < 1:
    raise ConfigException("All dimensions must be >= 1")
  grid = make_block_grid(length, block_size)
  tau = scale if scale is not None else 1.0 / math.sqrt(head_dim)
  generator = torch.Generator().manual_seed(spec.rng_seed)
  queries = torch.randn(batch, heads, length, head_dim, generator=generator) * spec.base_noise
  keys = torch.randn(batch, heads, length, head_dim, generator=generator) * spec.base_noise
  values = torch.randn(batch, heads, length, head_dim, generator=generator)
  planted = torch.eye(grid.num_blocks, dtype=torch.bool)

  _check_target(spec, grid)
  if spec.strength > 0:
    amplitude = math.sqrt(spec.strength / tau)
    sign = torch.ones(length)
    if spec.alternating_queries:
      sign[1::2] = -1.0
    query_dirs = torch.zeros(length, head_dim)
    key_dirs = torch.zeros(length, head_dim)
    _plant(spec, grid, generator, head_dim, query_dirs, key_dirs, planted)
    queries += amplitude * sign[:, None] * query_dirs
    keys += amplitude * key_dirs

  truth = planted[None, :, :, None].expand(batch, -1, -1, heads).contiguous()
  return (SequenceBatch(queries, ROLE_QUERY), SequenceBatch(keys, ROLE_KEY),
          SequenceBatch(values, ROLE_VALUE), ActiveMask(truth))


def _check_target(spec: PlantedSpec, grid: BlockGrid):
  target = spec.target
  if spec.pattern_kind == PATTERN_VERTICAL:
    _check_block(grid, target, "Vertical key block")
  elif spec.pattern_kind == PATTERN_SLASH:
    _check_token(grid, target, "Slash offset")
  elif spec.pattern_kind == PATTERN_NEEDLE:
    _check_token(grid, target, "Needle token")
  else:
    if not isinstance(target, (tuple, list)) or len(target) != 2:
      raise GridBoundsException(f"Block target must be a (query block, key block) pair, got {target}")
    row, col = target
    _check_block(grid, row, "Block query block")
    _check_block(grid, col, "Block key block")
    if col > row:
      raise GridBoundsException(f"Block target ({row}, {col}) is not causal")


def _plant(spec: PlantedSpec, grid: BlockGrid, generator: torch.Generator, head_dim: int,
           query_dirs: torch.Tensor, key_dirs: torch.Tensor, planted: torch.Tensor):
  # -- fills per-token unit directions and marks planted block pairs in place
  num_blocks = grid.num_blocks
  kind = spec.pattern_kind
  if kind == PATTERN_VERTICAL:
    direction = _directions(1, head_dim, generator)[0]
    start, end = grid.block_range(spec.target)
    query_dirs[:] = direction
    key_dirs[start:end] = direction
    planted[spec.target:, spec.target] = True
  elif kind == PATTERN_BLOCK:
    row, col = spec.target
    direction = _directions(1, head_dim, generator)[0]
    q_start, _ = grid.block_range(row)
    k_start, k_end = grid.block_range(col)
    # -- a band of query blocks from row to the end shares the cluster direction
    query_dirs[q_start:] = direction
    key_dirs[k_start:k_end] = direction
    planted[row:, col] = True
  elif kind == PATTERN_NEEDLE:
    direction = _directions(1, head_dim, generator)[0]
    needle_block = grid.block_of(spec.target)
    start, end = grid.block_range(needle_block)
    query_dirs[:] = direction
    # -- the pooled key of the needle block carries the full boost
    key_dirs[spec.target] = direction * (end - start)
    planted[needle_block:, needle_block] = True
  else:
    offset = spec.target
    directions = _directions(num_blocks, head_dim, generator)
    tiles = torch.arange(grid.length) // grid.block_size
    query_dirs[:] = directions[tiles]
    # -- key row t - offset shares the direction of query row t
    key_dirs[:grid.length - offset] = directions[tiles[offset:]]
    for tile in range(num_blocks):
      start, end = grid.block_range(tile)
      first = max(start, offset) - offset
      last = end - 1 - offset
      if last < first:
        continue
      planted[tile, first // grid.block_size:last // grid.block_size + 1] = True
