# -*- coding: utf-8 -*-
# Sparseprefill
# MIT License (view LICENSE file)
# Copyright (c) 2026

"""Block sparse causal attention driven by compacted block indices.

Every (batch, head, query tile) row walks only the C blocks listed in its
plan row, keeping a running maximum, normalizer and accumulator in base 2.
Rows are advanced together one list slot at a time; a row leaves the batch
as soon as its list is exhausted, so no unlisted block is ever loaded.
"""

import logging

import torch
from einops import rearrange

from sparseprefill.base.errors import PlanCorruptionException
from sparseprefill.base.grid import BlockGrid
from sparseprefill.base.types import (LOG2E, ActiveMask, AttentionOutput, SequenceBatch, SparseBlockPlan,
                                      check_compatible)
from sparseprefill.selection.plan import compress_indices, validate_plan
from sparseprefill.utils.tracking import VisitCounter


logger = logging.getLogger(__name__)


def _tiles(data: torch.Tensor, grid: BlockGrid) -> torch.Tensor:
  padding = grid.padded_length - grid.length
  if padding:
    data = torch.nn.functional.pad(data, (0, 0, 0, padding))
  return rearrange(data, "z h (m b) d -> z h m b d", b=grid.block_size)


def block_sparse_attention(queries: SequenceBatch, keys: SequenceBatch, values: SequenceBatch,
                           plan: SparseBlockPlan, grid: BlockGrid, scale: float,
                           counter: VisitCounter | None = None) -> AttentionOutput:
  """
  Evaluates causal attention restricted to the blocks of a plan.

  Within the diagonal block keys after the query token are masked; padded
  key slots of a ragged last block are masked everywhere.

  Args:
    queries: Query batch (Z, H, L, d).
    keys: Key batch (Z, H, L, d).
    values: Value batch (Z, H, L, d).
    plan: Validated block plan (Z, M, N, H) / (Z, M, H).
    grid: Block grid of the sequence.
    scale: Softmax temperature tau.
    counter: Optional visit counter, incremented once per visited block.

  Returns:
    AttentionOutput with base-2 log-sum-exp.

  Raises:
    ValidationException: If the batches are incompatible.
    PlanCorruptionException: If the plan is invalid for the grid or the inputs.
  """
  check_compatible(queries, keys, values)
  validate_plan(plan, grid)
  batch, heads, length, head_dim = queries.data.shape
  if (plan.counts.shape[0], plan.counts.shape[2]) != (batch, heads):
    raise PlanCorruptionException(
        f"Plan covers (Z, H) = ({plan.counts.shape[0]}, {plan.counts.shape[2]}), inputs have ({batch}, {heads})")
  num_blocks = grid.num_blocks
  block_size = grid.block_size
  query_rows = rearrange(_tiles(queries.data, grid), "z h m b d -> (z h m) b d")
  key_blocks = rearrange(_tiles(keys.data, grid), "z h n b d -> (z h) n b d")
  value_blocks = rearrange(_tiles(values.data, grid), "z h n b d -> (z h) n b d")
  indices = rearrange(plan.indices.to(torch.int64), "z m n h -> (z h m) n")
  counts = rearrange(plan.counts.to(torch.int64), "z m h -> (z h m)")
  row_count = counts.shape[0]
  row_head = torch.arange(row_count) // num_blocks
  row_tile = torch.arange(row_count) % num_blocks
  offsets = torch.arange(block_size)
  token_valid = grid.token_valid()
  query_pos = row_tile[:, None] * block_size + offsets[None, :]
  factor = scale * LOG2E

  running_max = torch.full((row_count, block_size), float("-inf"))
  running_sum = torch.zeros(row_count, block_size)
  acc = torch.zeros(row_count, block_size, head_dim)

  for slot in range(int(counts.max())):
    rows = torch.nonzero(counts > slot).squeeze(-1)
    block = indices[rows, slot]
    k_tile = key_blocks[row_head[rows], block]
    v_tile = value_blocks[row_head[rows], block]
    logits = torch.matmul(query_rows[rows], k_tile.transpose(-1, -2)) * factor
    key_pos = block[:, None] * block_size + offsets[None, :]
    is_diag = block == row_tile[rows]
    causal = key_pos[:, None, :] <= query_pos[rows][:, :, None]
    keep = token_valid[block][:, None, :] & (causal | ~is_diag[:, None, None])
    logits = logits.masked_fill(~keep, float("-inf"))

    prev_max = running_max[rows]
    new_max = torch.maximum(prev_max, logits.amax(dim=-1))
    # -- fully masked rows (padded query slots) keep a -inf maximum
    safe_max = torch.where(torch.isinf(new_max), 0.0, new_max)
    weights = torch.exp2(logits - safe_max[:, :, None])
    correction = torch.exp2(prev_max - safe_max)
    running_sum[rows] = running_sum[rows] * correction + weights.sum(dim=-1)
    acc[rows] = acc[rows] * correction[:, :, None] + torch.matmul(weights, v_tile)
    running_max[rows] = new_max
    if counter is not None:
      counter.add(rows.numel())

  logger.debug("visited %d blocks over %d rows", int(counts.sum()), row_count)
  normalizer = running_sum.clamp_min(torch.finfo(torch.float32).tiny)
  output = torch.where(running_sum[:, :, None] > 0, acc / normalizer[:, :, None], 0.0)
  lse = running_max + torch.log2(normalizer)
  output = rearrange(output, "(z h m) b d -> z h (m b) d", z=batch, h=heads)[:, :, :length, :]
  lse = rearrange(lse, "(z h m) b -> z h (m b)", z=batch, h=heads)[:, :, :length]
  return AttentionOutput(output=output.contiguous(), lse=lse.contiguous())


def visit_count(plan: SparseBlockPlan) -> int:
  """
  Number of (query tile, key block) visits the sparse evaluator performs: sum(C).
  """
  return int(plan.counts.to(torch.int64).sum())


def full_causal_plan(grid: BlockGrid, batch: int, heads: int) -> SparseBlockPlan:
  """
  Plan listing every causal key block of every row.
  """
  causal = grid.causal_blocks()[None, :, :, None].expand(batch, -1, -1, heads)
  return compress_indices(ActiveMask(causal.contiguous()))
