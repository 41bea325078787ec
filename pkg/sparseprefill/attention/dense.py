# -*- coding: utf-8 -*-
# Sparseprefill
# MIT License (view LICENSE file)
# Copyright (c) 2026

import torch

from sparseprefill.base.types import LOG2E, AttentionOutput, SequenceBatch, check_compatible


def dense_attention(queries: SequenceBatch, keys: SequenceBatch, values: SequenceBatch,
                    scale: float) -> AttentionOutput:
  """
  Exact causal softmax attention over the full logit matrix.

  Args:
    queries: Query batch (Z, H, L, d).
    keys: Key batch (Z, H, L, d).
    values: Value batch (Z, H, L, d).
    scale: Softmax temperature tau.

  Returns:
    AttentionOutput with the log-sum-exp in base 2.

  Raises:
    ValidationException: If the batches are incompatible.
  """
  check_compatible(queries, keys, values)
  length = queries.length
  logits = torch.matmul(queries.data, keys.data.transpose(-1, -2)) * (scale * LOG2E)
  future = torch.ones(length, length, dtype=torch.bool).triu(diagonal=1)
  logits = logits.masked_fill(future, float("-inf"))
  row_max = logits.amax(dim=-1, keepdim=True)
  weights = torch.exp2(logits - row_max)
  total = weights.sum(dim=-1, keepdim=True)
  output = torch.matmul(weights, values.data) / total
  lse = (row_max + torch.log2(total)).squeeze(-1)
  return AttentionOutput(output=output, lse=lse)
