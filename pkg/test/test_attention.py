import math

import pytest
import torch

from sparseprefill.attention.dense import dense_attention
from sparseprefill.attention.sparse import block_sparse_attention, full_causal_plan, visit_count
from sparseprefill.base.errors import PlanCorruptionException, ValidationException
from sparseprefill.base.grid import make_block_grid
from sparseprefill.base.types import LN2, LOG2E, ROLE_KEY, ROLE_QUERY, ROLE_VALUE, ActiveMask, SequenceBatch
from sparseprefill.selection.plan import compress_indices
from sparseprefill.utils.tracking import VisitCounter


# -- (Z, H, L, B, d); ragged lengths included
ORACLE_SHAPES = [
    (1, 1, 8, 4, 4),
    (1, 2, 9, 4, 8),
    (2, 1, 37, 8, 16),
    (1, 4, 64, 16, 4),
    (1, 3, 100, 32, 32),
    (2, 2, 128, 128, 16),
    (1, 1, 130, 128, 64),
    (1, 2, 256, 32, 16),
    (1, 1, 300, 64, 8),
    (2, 4, 255, 16, 8),
    (1, 2, 511, 128, 32),
    (1, 1, 512, 4, 4),
    (1, 3, 777, 64, 16),
    (1, 1, 1000, 100, 64),
    (1, 2, 1024, 128, 64),
    (1, 1, 1500, 32, 8),
    (1, 4, 1536, 128, 16),
    (1, 1, 2000, 128, 32),
    (1, 1, 2047, 64, 4),
    (1, 2, 2048, 128, 64),
]


def random_mask(batch, heads, num_blocks, seed, keep=0.4):
  generator = torch.Generator().manual_seed(seed)
  active = torch.rand(batch, num_blocks, num_blocks, heads, generator=generator) < keep
  causal = torch.ones(num_blocks, num_blocks, dtype=torch.bool).tril()[None, :, :, None]
  eye = torch.eye(num_blocks, dtype=torch.bool)[None, :, :, None]
  return ActiveMask((active & causal) | eye)


def naive_attention(q, k, v, scale):
  length = q.shape[0]
  out = torch.zeros(q.shape, dtype=torch.float64)
  for t in range(length):
    logits = [float(q[t] @ k[s]) * scale for s in range(t + 1)]
    peak = max(logits)
    weights = [math.exp(x - peak) for x in logits]
    total = sum(weights)
    for s in range(t + 1):
      out[t] += weights[s] / total * v[s].double()
  return out


@pytest.mark.parametrize("batch, heads, length, block_size, head_dim", ORACLE_SHAPES)
def test_full_plan_matches_dense(make_qkv, batch, heads, length, block_size, head_dim):
  queries, keys, values = make_qkv(batch, heads, length, head_dim, seed=length)
  grid = make_block_grid(length, block_size)
  scale = 1.0 / math.sqrt(head_dim)
  sparse = block_sparse_attention(queries, keys, values, full_causal_plan(grid, batch, heads), grid, scale)
  dense = dense_attention(queries, keys, values, scale)
  assert sparse.output.shape == (batch, heads, length, head_dim)
  assert sparse.lse.shape == (batch, heads, length)
  assert (sparse.output - dense.output).abs().max().item() <= 1e-4
  assert (sparse.lse - dense.lse).abs().max().item() <= 1e-4


def test_uniform_softmax():
  q = torch.zeros(1, 1, 2, 2)
  k = torch.zeros(1, 1, 2, 2)
  v = torch.tensor([[[[1.0, 0.0], [0.0, 1.0]]]])
  grid = make_block_grid(2, 2)
  result = block_sparse_attention(SequenceBatch(q, ROLE_QUERY), SequenceBatch(k, ROLE_KEY),
                                  SequenceBatch(v, ROLE_VALUE), full_causal_plan(grid, 1, 1), grid, 1.0)
  assert result.output[0, 0, 1].tolist() == pytest.approx([0.5, 0.5])
  assert result.lse[0, 0, 1].item() == pytest.approx(1.0)


def test_single_key(make_qkv):
  queries, keys, values = make_qkv(1, 1, 4, 4, seed=3)
  grid = make_block_grid(4, 2)
  result = block_sparse_attention(queries, keys, values, full_causal_plan(grid, 1, 1), grid, 0.5)
  logit = float(queries.data[0, 0, 0] @ keys.data[0, 0, 0]) * 0.5 * LOG2E
  assert result.lse[0, 0, 0].item() == pytest.approx(logit, abs=1e-5)
  assert torch.allclose(result.output[0, 0, 0], values.data[0, 0, 0], atol=1e-6)
  assert result.natural_lse()[0, 0, 0].item() == pytest.approx(logit * LN2, abs=1e-5)


class TestDense:
  def test_single_token(self, make_qkv):
    queries, keys, values = make_qkv(1, 2, 1, 4)
    result = dense_attention(queries, keys, values, 0.5)
    assert torch.allclose(result.output, values.data)

  def test_first_query_sees_first_key(self, make_qkv):
    queries, keys, values = make_qkv(1, 1, 6, 4, seed=4)
    changed = keys.data.clone()
    changed[:, :, 1:, :] += 10.0
    first = dense_attention(queries, keys, values, 0.5)
    second = dense_attention(queries, SequenceBatch(changed, ROLE_KEY), values, 0.5)
    assert torch.allclose(first.output[0, 0, 0], values.data[0, 0, 0], atol=1e-6)
    assert torch.allclose(first.output[0, 0, 0], second.output[0, 0, 0])

  def test_naive_loop(self, make_qkv):
    queries, keys, values = make_qkv(1, 1, 8, 4, seed=5)
    result = dense_attention(queries, keys, values, 0.5)
    expected = naive_attention(queries.data[0, 0].double(), keys.data[0, 0].double(), values.data[0, 0], 0.5)
    assert torch.allclose(result.output[0, 0].double(), expected, atol=1e-5)

  def test_shape_mismatch(self, make_qkv):
    queries, keys, _ = make_qkv(1, 1, 8, 4)
    _, _, values = make_qkv(1, 1, 8, 2)
    with pytest.raises(ValidationException):
      dense_attention(queries, keys, values, 0.5)


class TestSparse:
  def test_order_invariance(self, make_qkv):
    queries, keys, values = make_qkv(1, 2, 200, 8, seed=6)
    grid = make_block_grid(200, 16)
    plan = compress_indices(random_mask(1, 2, grid.num_blocks, seed=7))
    generator = torch.Generator().manual_seed(8)
    shuffled = plan.indices.clone()
    for row in range(grid.num_blocks):
      for h in range(2):
        count = int(plan.counts[0, row, h])
        permutation = torch.randperm(count, generator=generator)
        shuffled[0, row, :count, h] = plan.indices[0, row, :count, h][permutation]
    first = block_sparse_attention(queries, keys, values, plan, grid, 0.35)
    second = block_sparse_attention(queries, keys, values, type(plan)(indices=shuffled, counts=plan.counts),
                                    grid, 0.35)
    assert (first.output - second.output).abs().max().item() <= 1e-4
    assert (first.lse - second.lse).abs().max().item() <= 1e-4

  def test_monotone_refinement(self, make_qkv):
    queries, keys, values = make_qkv(1, 1, 96, 8, seed=9)
    grid = make_block_grid(96, 16)
    mask = torch.eye(grid.num_blocks, dtype=torch.bool)[None, :, :, None].clone()
    previous = block_sparse_attention(queries, keys, values, compress_indices(ActiveMask(mask.clone())), grid, 0.35)
    for block in range(grid.num_blocks - 1):
      mask[0, grid.num_blocks - 1, block, 0] = True
      current = block_sparse_attention(queries, keys, values, compress_indices(ActiveMask(mask.clone())),
                                       grid, 0.35)
      assert torch.isfinite(current.output).all()
      assert bool((current.lse >= previous.lse - 1e-5).all())
      previous = current

  def test_convex_combination(self, make_qkv):
    queries, keys, values = make_qkv(1, 1, 64, 4, seed=10)
    grid = make_block_grid(64, 16)
    mask = random_mask(1, 1, grid.num_blocks, seed=11)
    result = block_sparse_attention(queries, keys, values, compress_indices(mask), grid, 0.5)
    for t in range(64):
      tile = t // 16
      blocks = torch.nonzero(mask.active[0, tile, :, 0]).flatten().tolist()
      rows = [s for j in blocks for s in range(j * 16, (j + 1) * 16) if s <= t]
      contributing = values.data[0, 0, rows]
      assert bool((result.output[0, 0, t] >= contributing.min(dim=0).values - 1e-5).all())
      assert bool((result.output[0, 0, t] <= contributing.max(dim=0).values + 1e-5).all())

  def test_sparse_plan_matches_masked_dense(self, make_qkv):
    queries, keys, values = make_qkv(1, 2, 70, 8, seed=12)
    grid = make_block_grid(70, 16)
    mask = random_mask(1, 2, grid.num_blocks, seed=13)
    result = block_sparse_attention(queries, keys, values, compress_indices(mask), grid, 0.35)
    token_block = torch.arange(70) // 16
    for h in range(2):
      allowed = mask.active[0, :, :, h][token_block][:, token_block]
      allowed &= torch.ones(70, 70, dtype=torch.bool).tril()
      logits = queries.data[0, h] @ keys.data[0, h].T * 0.35
      logits = logits.masked_fill(~allowed, float("-inf"))
      expected = torch.softmax(logits, dim=-1) @ values.data[0, h]
      assert (result.output[0, h] - expected).abs().max().item() <= 1e-4

  def test_rejects_corrupt_plan(self, make_qkv):
    queries, keys, values = make_qkv(1, 1, 32, 4)
    grid = make_block_grid(32, 8)
    plan = full_causal_plan(grid, 1, 1)
    plan.indices[0, 3, 1, 0] = 4
    with pytest.raises(PlanCorruptionException):
      block_sparse_attention(queries, keys, values, plan, grid, 0.5)

  def test_rejects_plan_for_other_heads(self, make_qkv):
    queries, keys, values = make_qkv(1, 1, 32, 4)
    grid = make_block_grid(32, 8)
    with pytest.raises(PlanCorruptionException):
      block_sparse_attention(queries, keys, values, full_causal_plan(grid, 1, 2), grid, 0.5)


class TestVisits:
  def test_closed_forms(self):
    grid = make_block_grid(100, 10)
    assert visit_count(full_causal_plan(grid, 2, 3)) == 2 * 3 * 55
    diagonal = compress_indices(ActiveMask(torch.eye(10, dtype=torch.bool)[None, :, :, None].expand(2, -1, -1, 3)))
    assert visit_count(diagonal) == 2 * 3 * 10

  @pytest.mark.parametrize("seed", [0, 1, 2])
  def test_counter_matches_plan(self, make_qkv, seed):
    queries, keys, values = make_qkv(2, 2, 150, 8, seed=seed)
    grid = make_block_grid(150, 16)
    plan = compress_indices(random_mask(2, 2, grid.num_blocks, seed=seed))
    counter = VisitCounter()
    block_sparse_attention(queries, keys, values, plan, grid, 0.35, counter)
    assert counter.visits == visit_count(plan)
