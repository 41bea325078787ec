# -*- coding: utf-8 -*-
# Sparseprefill
# MIT License (view LICENSE file)
# Copyright (c) 2026

import torch


class AllocationTracker:
  """
  Accounts auxiliary tensor allocations of a computation.

  Attributes:
    live: Live allocations by name (element counts).
    peak: Maximum simultaneous live elements observed.
  """
  def __init__(self):
    self.live = {}
    self.peak = 0

  @property
  def live_elements(self) -> int:
    return sum(self.live.values())

  def allocate(self, name: str, tensor: torch.Tensor) -> torch.Tensor:
    """
    Records a live auxiliary tensor and returns it unchanged.

    Re-allocating a live name replaces its previous size.
    """
    self.live[name] = tensor.numel()
    self.peak = max(self.peak, self.live_elements)
    return tensor

  def release(self, name: str):
    self.live.pop(name, None)


class VisitCounter:
  """
  Counts (query tile, key block) visits of the sparse evaluator.
  """
  def __init__(self):
    self.visits = 0

  def add(self, count: int):
    self.visits += int(count)


def track(tracker: AllocationTracker | None, name: str, tensor: torch.Tensor) -> torch.Tensor:
  """Records an allocation when a tracker is given."""
  if tracker is not None:
    tracker.allocate(name, tensor)
  return tensor


def untrack(tracker: AllocationTracker | None, name: str):
  if tracker is not None:
    tracker.release(name)
