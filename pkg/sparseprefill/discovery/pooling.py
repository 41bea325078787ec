# -*- coding: utf-8 -*-
# Sparseprefill
# MIT License (view LICENSE file)
# Copyright (c) 2026

import torch
from einops import rearrange

from sparseprefill.base.grid import BlockGrid
from sparseprefill.base.types import ROLE_KEY, ROLE_QUERY, SequenceBatch
from sparseprefill.base.errors import ValidationException
from sparseprefill.utils.tracking import AllocationTracker, track


def block_means(data: torch.Tensor, grid: BlockGrid) -> torch.Tensor:
  """Averages a (Z, H, L, X) tensor over the tokens of every block into (Z, H, M, X)."""
  # -- full blocks are viewed in place, the ragged tail is averaged on its own
  block_size = grid.block_size
  full = grid.length // block_size
  parts = []
  if full:
    head = rearrange(data[:, :, :full * block_size, :], "z h (n b) d -> z h n b d", b=block_size)
    parts.append(head.mean(dim=3))
  if grid.length % block_size:
    parts.append(data[:, :, full * block_size:, :].mean(dim=2, keepdim=True))
  return parts[0] if len(parts) == 1 else torch.cat(parts, dim=2)


def pool_keys(keys: SequenceBatch, grid: BlockGrid, tracker: AllocationTracker | None = None) -> torch.Tensor:
  """
  Averages the keys of every block into one proxy vector.

  Args:
    keys: Key batch (Z, H, L, d).
    grid: Block grid of the sequence.
    tracker: Optional allocation accounting.

  Returns:
    Pooled keys (Z, H, N, d); the partial last block divides by its real length.

  Raises:
    ValidationException: If the batch is not a key batch or the grid does not match.
  """
  if keys.role != ROLE_KEY:
    raise ValidationException(f"pool_keys expects a key batch, got {keys.role}")
  _check_grid(keys, grid)
  return track(tracker, "pooled_keys", block_means(keys.data, grid))


def pool_queries(queries: SequenceBatch, grid: BlockGrid, tracker: AllocationTracker | None = None) -> torch.Tensor:
  """
  Averages the queries of every tile into one proxy vector.

  Returns:
    Pooled queries (Z, H, M, d).
  """
  if queries.role != ROLE_QUERY:
    raise ValidationException(f"pool_queries expects a query batch, got {queries.role}")
  _check_grid(queries, grid)
  return track(tracker, "pooled_queries", block_means(queries.data, grid))


def _check_grid(batch: SequenceBatch, grid: BlockGrid):
  if batch.length != grid.length:
    raise ValidationException(f"Grid built for length {grid.length}, batch has {batch.length}")


def geometric_proxy(logits: torch.Tensor) -> torch.Tensor:
  """
  Pooled-key probing score of a block scaled by its size: n * exp(mean(x)).

  Since q . mean(k) == mean(q . k), this is n times the geometric mean of exp(x_i).

  Args:
    logits: Tensor (..., n) of per-key logits.

  Returns:
    Tensor (...) of proxies.
  """
  count = logits.shape[-1]
  return count * torch.exp(logits.mean(dim=-1))


def arithmetic_energy(logits: torch.Tensor) -> torch.Tensor:
  """
  True block contribution: sum(exp(x_i)), n times the arithmetic mean of exp(x_i).

  Args:
    logits: Tensor (..., n) of per-key logits.

  Returns:
    Tensor (...) of energies, never below geometric_proxy of the same logits.
  """
  return torch.exp(logits).sum(dim=-1)
