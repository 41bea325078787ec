# -*- coding: utf-8 -*-
# Sparseprefill
# MIT License (view LICENSE file)
# Copyright (c) 2026

"""Index compression of active masks and plan accounting."""

import torch

from sparseprefill.base.errors import PlanCorruptionException, ValidationException
from sparseprefill.base.grid import BlockGrid
from sparseprefill.base.types import ActiveMask, SparseBlockPlan


def compress_indices(mask: ActiveMask) -> SparseBlockPlan:
  """
  Compacts every mask row into an ascending list of active key blocks.

  Inactive positions take the fill value N and a stable sort moves them behind
  the active ones.

  Args:
    mask: ActiveMask (Z, M, N, H).

  Returns:
    SparseBlockPlan with int32 indices (Z, M, N, H) and counts (Z, M, H).
  """
  active = mask.active
  num_blocks = active.shape[2]
  counts = active.sum(dim=2, dtype=torch.int32)
  blocks = torch.arange(num_blocks, dtype=torch.int32)[None, None, :, None]
  to_sort = torch.where(active, blocks, num_blocks)
  indices = torch.sort(to_sort, dim=2, stable=True).values.to(torch.int32)
  return SparseBlockPlan(indices=indices, counts=counts)


def _listed(plan: SparseBlockPlan) -> torch.Tensor:
  num_blocks = plan.num_blocks
  slots = torch.arange(num_blocks)[None, None, :, None]
  return slots < plan.counts[:, :, None, :].to(torch.int64)


def expand_indices(plan: SparseBlockPlan) -> ActiveMask:
  """
  Rebuilds the active mask from a plan (inverse of compress_indices).

  Returns:
    ActiveMask (Z, M, N, H).
  """
  num_blocks = plan.num_blocks
  listed = _listed(plan)
  target = torch.where(listed, plan.indices.to(torch.int64), num_blocks)
  batch, rows, _, heads = plan.indices.shape
  active = torch.zeros(batch, rows, num_blocks + 1, heads, dtype=torch.bool)
  active.scatter_(2, target, torch.ones_like(target, dtype=torch.bool))
  return ActiveMask(active[:, :, :num_blocks, :])


def validate_plan(plan: SparseBlockPlan, grid: BlockGrid):
  """
  Checks that a plan lists a valid causal block set for every row.

  The listed entries may come in any order, but must be distinct, causal
  (j <= i), below N, and include the diagonal block.

  Raises:
    PlanCorruptionException: If any row is invalid.
  """
  indices = plan.indices.to(torch.int64)
  counts = plan.counts.to(torch.int64)
  if indices.dim() != 4 or counts.dim() != 3:
    raise PlanCorruptionException("Plan indices must be (Z, M, N, H) and counts (Z, M, H)")
  batch, rows, num_blocks, heads = indices.shape
  if rows != grid.num_blocks or num_blocks != grid.num_blocks:
    raise PlanCorruptionException(f"Plan grid {rows}x{num_blocks} does not match {grid.num_blocks} blocks")
  if tuple(counts.shape) != (batch, rows, heads):
    raise PlanCorruptionException(f"Counts shape {tuple(counts.shape)} does not match indices")
  if (counts < 1).any() or (counts > num_blocks).any():
    raise PlanCorruptionException("Counts must lie in [1, N]")
  listed = _listed(plan)
  if ((indices == num_blocks) & listed).any():
    raise PlanCorruptionException(f"Fill value {num_blocks} inside the listed entries")
  if ((indices < 0) | (indices > num_blocks)).any():
    raise PlanCorruptionException(f"Block index outside [0, {num_blocks}]")
  query_block = torch.arange(rows)[None, :, None, None]
  if ((indices > query_block) & listed).any():
    raise PlanCorruptionException("Plan lists a non-causal key block")
  target = torch.where(listed, indices, num_blocks)
  hits = torch.zeros(batch, rows, num_blocks + 1, heads, dtype=torch.int64)
  hits.scatter_add_(2, target, listed.to(torch.int64))
  hits = hits[:, :, :num_blocks, :]
  if (hits > 1).any():
    raise PlanCorruptionException("Plan lists a key block twice in one row")
  diagonal = torch.diagonal(hits, dim1=1, dim2=2)
  if (diagonal < 1).any():
    raise PlanCorruptionException("Plan row without its diagonal block")


def density(plan: SparseBlockPlan, grid: BlockGrid) -> float:
  """
  Active causal block pairs over all causal block pairs.

  Returns:
    sum(C) / (Z * H * M(M+1)/2).
  """
  batch, rows, heads = plan.counts.shape
  if rows != grid.num_blocks:
    raise ValidationException(f"Plan has {rows} query blocks, grid has {grid.num_blocks}")
  total = batch * heads * grid.causal_pairs()
  return float(plan.counts.to(torch.int64).sum()) / total


def row_density(mask: ActiveMask, query_block: int) -> float:
  """
  Active fraction of one query block row, averaged over batch and heads.
  """
  row = mask.active[:, query_block, :query_block + 1, :]
  return float(row.to(torch.float64).mean())


def mask_density(mask: ActiveMask, grid: BlockGrid) -> float:
  """
  Density of an active mask, equal to density(compress_indices(mask), grid).
  """
  batch, rows, _, heads = mask.active.shape
  if rows != grid.num_blocks:
    raise ValidationException(f"Mask has {rows} query blocks, grid has {grid.num_blocks}")
  return float(mask.active.sum()) / (batch * heads * grid.causal_pairs())
