# -*- coding: utf-8 -*-
# Sparseprefill
# MIT License (view LICENSE file)
# Copyright (c) 2026

from dataclasses import dataclass

import torch

from sparseprefill.base.errors import GridBoundsException, ValidationException


@dataclass(frozen=True)
class BlockGrid:
  """
  Block geometry of a sequence split into fixed size blocks.

  Query tiles and key blocks share the same grid, so M == N. The last block
  may be partial.

  Attributes:
    length: Sequence length L in tokens.
    block_size: Tokens per block B.
    num_blocks: ceil(L / B).
    last_block_len: Tokens in the final block, in [1, B].
  """
  length: int
  block_size: int
  num_blocks: int
  last_block_len: int

  @property
  def num_query_blocks(self) -> int:
    return self.num_blocks

  @property
  def num_key_blocks(self) -> int:
    return self.num_blocks

  @property
  def padded_length(self) -> int:
    return self.num_blocks * self.block_size

  def block_of(self, token: int) -> int:
    """
    Returns the block holding a token.

    Raises:
      GridBoundsException: If the token is outside [0, L).
    """
    if token < 0 or token >= self.length:
      raise GridBoundsException(f"Token {token} outside sequence of length {self.length}")
    return token // self.block_size

  def block_range(self, block: int) -> tuple[int, int]:
    """
    Returns the [start, end) token span of a block.

    Raises:
      GridBoundsException: If the block is outside [0, M).
    """
    if block < 0 or block >= self.num_blocks:
      raise GridBoundsException(f"Block {block} outside grid of {self.num_blocks} blocks")
    start = block * self.block_size
    return start, min(start + self.block_size, self.length)

  def block_lengths(self) -> torch.Tensor:
    """
    Returns the token count of every block as a float32 tensor of shape (M,).
    """
    lengths = torch.full((self.num_blocks,), float(self.block_size), dtype=torch.float32)
    lengths[-1] = float(self.last_block_len)
    return lengths

  def token_valid(self) -> torch.Tensor:
    """
    Returns a (M, B) boolean tensor, True where the padded slot holds a real token.
    """
    positions = torch.arange(self.padded_length).reshape(self.num_blocks, self.block_size)
    return positions < self.length

  def causal_blocks(self) -> torch.Tensor:
    """
    Returns the (M, N) boolean block causality mask (j <= i).
    """
    return torch.ones(self.num_blocks, self.num_blocks, dtype=torch.bool).tril()

  def causal_pairs(self) -> int:
    """Returns the number of causal block pairs, M(M+1)/2."""
    return self.num_blocks * (self.num_blocks + 1) // 2


def make_block_grid(length: int, block_size: int) -> BlockGrid:
  """
  Builds the block grid for a sequence.

  Args:
    length: Sequence length L (>= 1).
    block_size: Block size B (>= 1).

  Returns:
    BlockGrid with M = ceil(L / B) and the final block length.

  Raises:
    ValidationException: If L or B is below 1.
  """
  if length < 1:
    raise ValidationException(f"Sequence length must be >= 1, got {length}")
  if block_size < 1:
    raise ValidationException(f"Block size must be >= 1, got {block_size}")
  num_blocks = -(-length // block_size)
  last_block_len = length - (num_blocks - 1) * block_size
  return BlockGrid(length, block_size, num_blocks, last_block_len)
