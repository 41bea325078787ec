import os
import sys

import pytest
import torch

repo_root = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
if repo_root not in sys.path:
  sys.path.insert(0, repo_root)

from sparseprefill.base.types import (ROLE_KEY, ROLE_QUERY, ROLE_VALUE, BlockScoreMap,  # noqa: E402
                                      NEG_SENTINEL, SequenceBatch)


@pytest.fixture
def make_qkv():
  """Factory of seeded random (Q, K, V) batches."""
  def factory(batch: int, heads: int, length: int, head_dim: int, seed: int = 0):
    generator = torch.Generator().manual_seed(seed)
    shape = (batch, heads, length, head_dim)
    return (SequenceBatch(torch.randn(shape, generator=generator), ROLE_QUERY),
            SequenceBatch(torch.randn(shape, generator=generator), ROLE_KEY),
            SequenceBatch(torch.randn(shape, generator=generator), ROLE_VALUE))
  return factory


@pytest.fixture
def score_map():
  """Factory wrapping a (Z, H, M, M) score tensor into a causal-zeroed BlockScoreMap."""
  def factory(score):
    score = torch.as_tensor(score, dtype=torch.float32)
    while score.dim() < 4:
      score = score.unsqueeze(0)
    causal = torch.ones(score.shape[-2], score.shape[-1], dtype=torch.bool).tril()
    score = score.masked_fill(~causal, 0.0)
    local_max = torch.zeros(score.shape).masked_fill(~causal, NEG_SENTINEL)
    return BlockScoreMap(energy=score.clone(), local_max=local_max, score=score)
  return factory
