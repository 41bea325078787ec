# -*- coding: utf-8 -*-
# Sparseprefill
# MIT License (view LICENSE file)
# Copyright (c) 2026

import torch
from einops import rearrange

from sparseprefill.base.errors import ValidationException
from sparseprefill.base.types import ActiveMask, BlockScoreMap


def _check(selected: ActiveMask, truth: ActiveMask):
  if selected.active.shape != truth.active.shape:
    raise ValidationException(
        f"Mask shapes differ: {tuple(selected.active.shape)} vs {tuple(truth.active.shape)}")


def off_diagonal(mask: ActiveMask) -> ActiveMask:
  """Drops the diagonal blocks, which every plan retains anyway."""
  num_blocks = mask.num_blocks
  eye = torch.eye(num_blocks, dtype=torch.bool)[None, :, :, None]
  return ActiveMask(mask.active & ~eye)


def recall(selected: ActiveMask, truth: ActiveMask) -> float:
  """
  Fraction of ground-truth blocks that were selected (1.0 for an empty truth).
  """
  _check(selected, truth)
  total = int(truth.active.sum())
  if total == 0:
    return 1.0
  return int((selected.active & truth.active).sum()) / total


def precision(selected: ActiveMask, truth: ActiveMask) -> float:
  """
  Fraction of selected blocks that belong to the ground truth (1.0 for an empty selection).
  """
  _check(selected, truth)
  total = int(selected.active.sum())
  if total == 0:
    return 1.0
  return int((selected.active & truth.active).sum()) / total


def top1_hit_rate(scores: BlockScoreMap, truth: ActiveMask) -> float:
  """
  Fraction of planted rows whose score argmax is a planted block.

  A row counts when the truth lists at least one off-diagonal block for it.

  Returns:
    Hit rate, or 1.0 when no row holds a planted block.
  """
  planted = off_diagonal(truth).active
  rows = planted.any(dim=2)
  if not rows.any():
    return 1.0
  winner = rearrange(torch.argmax(scores.score, dim=-1), "z h m -> z m h")
  hit = torch.gather(planted, 2, winner.unsqueeze(2)).squeeze(2)
  return int((hit & rows).sum()) / int(rows.sum())
