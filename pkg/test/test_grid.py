import pytest
import torch

from sparseprefill.base.errors import GridBoundsException, ValidationException
from sparseprefill.base.grid import make_block_grid


@pytest.mark.parametrize("length, block_size, num_blocks, last", [
    (256, 128, 2, 128),
    (130, 128, 2, 2),
    (1, 128, 1, 1),
    (300, 128, 3, 44),
    (7, 1, 7, 1),
])
def test_grid_shape(length, block_size, num_blocks, last):
  grid = make_block_grid(length, block_size)
  assert grid.num_blocks == num_blocks
  assert grid.num_query_blocks == grid.num_key_blocks == num_blocks
  assert grid.last_block_len == last
  assert grid.padded_length == num_blocks * block_size


def test_blocks_partition_tokens():
  grid = make_block_grid(300, 128)
  covered = []
  for block in range(grid.num_blocks):
    start, end = grid.block_range(block)
    covered.extend(range(start, end))
    for token in range(start, end):
      assert grid.block_of(token) == block
  assert covered == list(range(300))


def test_block_lengths_and_valid_slots():
  grid = make_block_grid(300, 128)
  assert grid.block_lengths().tolist() == [128.0, 128.0, 44.0]
  valid = grid.token_valid()
  assert valid.shape == (3, 128)
  assert int(valid.sum()) == 300
  assert not valid[2, 44:].any()


def test_causal_blocks():
  grid = make_block_grid(40, 10)
  causal = grid.causal_blocks()
  assert torch.equal(causal, torch.ones(4, 4, dtype=torch.bool).tril())
  assert grid.causal_pairs() == 10


def test_out_of_range():
  grid = make_block_grid(130, 128)
  with pytest.raises(GridBoundsException):
    grid.block_of(130)
  with pytest.raises(GridBoundsException):
    grid.block_of(-1)
  with pytest.raises(GridBoundsException):
    grid.block_range(2)


@pytest.mark.parametrize("length, block_size", [(0, 128), (10, 0)])
def test_invalid_grid(length, block_size):
  with pytest.raises(ValidationException):
    make_block_grid(length, block_size)
