# -*- coding: utf-8 -*-
# Sparseprefill
# MIT License (view LICENSE file)
# Copyright (c) 2026

import hashlib
import json
import math
from dataclasses import asdict, dataclass, replace

from sparseprefill.base.errors import ConfigException
from sparseprefill.utils import types


CONFIG_PARAM_BLOCK_SIZE = "block_size"
CONFIG_PARAM_ALPHA = "alpha"
CONFIG_PARAM_SINK_TOKENS = "sink_tokens"
CONFIG_PARAM_WINDOW_TOKENS = "window_tokens"
CONFIG_PARAM_SCALE = "scale"  # -- None: d^(-1/2) resolved at use
CONFIG_PARAM_EPSILON = "epsilon"
CONFIG_PARAM_RNG_SEED = "rng_seed"

DEFAULT_CONFIG = {
    CONFIG_PARAM_BLOCK_SIZE: 128,
    CONFIG_PARAM_ALPHA: 0.12,
    CONFIG_PARAM_SINK_TOKENS: 256,
    CONFIG_PARAM_WINDOW_TOKENS: 512,
    CONFIG_PARAM_SCALE: None,
    CONFIG_PARAM_EPSILON: 1e-10,
    CONFIG_PARAM_RNG_SEED: 0,
}


@dataclass(frozen=True)
class PipelineConfig:
  """
  Parameters shared by discovery, selection and attention.

  Attributes:
    block_size: Tokens per block (B).
    alpha: Threshold factor applied to the row maximum score.
    sink_tokens: Leading tokens always retained.
    window_tokens: Trailing tokens (local window) always retained, >= 1 so the diagonal survives.
    scale: Softmax temperature tau, None for d^(-1/2).
    epsilon: Guard added to the normalization denominator.
    rng_seed: Seed for generated workloads.
  """
  block_size: int = DEFAULT_CONFIG[CONFIG_PARAM_BLOCK_SIZE]
  alpha: float = DEFAULT_CONFIG[CONFIG_PARAM_ALPHA]
  sink_tokens: int = DEFAULT_CONFIG[CONFIG_PARAM_SINK_TOKENS]
  window_tokens: int = DEFAULT_CONFIG[CONFIG_PARAM_WINDOW_TOKENS]
  scale: float | None = DEFAULT_CONFIG[CONFIG_PARAM_SCALE]
  epsilon: float = DEFAULT_CONFIG[CONFIG_PARAM_EPSILON]
  rng_seed: int = DEFAULT_CONFIG[CONFIG_PARAM_RNG_SEED]

  def __post_init__(self):
    if self.block_size < 1:
      raise ConfigException(f"block_size must be >= 1, got {self.block_size}")
    if not math.isfinite(self.alpha) or self.alpha < 0:
      raise ConfigException(f"alpha must be >= 0, got {self.alpha}")
    if self.sink_tokens < 0:
      raise ConfigException(f"sink_tokens must be >= 0, got {self.sink_tokens}")
    if self.window_tokens < 1:
      raise ConfigException(f"window_tokens must be >= 1, got {self.window_tokens}")
    if self.scale is not None and (not math.isfinite(self.scale) or self.scale <= 0):
      raise ConfigException(f"scale must be > 0, got {self.scale}")
    if not self.epsilon > 0:
      raise ConfigException(f"epsilon must be > 0, got {self.epsilon}")

  @staticmethod
  def from_dict(params: dict | None) -> "PipelineConfig":
    """
    Builds a configuration from user parameters merged over DEFAULT_CONFIG.

    Args:
      params: Parameter map; missing or None entries take the default.

    Returns:
      Validated configuration.

    Raises:
      ConfigException: If a value cannot be converted or is out of range.
    """
    merged = types.merge_dicts(params, DEFAULT_CONFIG)
    unknown = set(merged) - set(DEFAULT_CONFIG)
    if unknown:
      raise ConfigException(f"Unknown configuration parameters: {sorted(unknown)}")
    scale = merged[CONFIG_PARAM_SCALE]
    return PipelineConfig(
        block_size=types.to_int(merged[CONFIG_PARAM_BLOCK_SIZE], CONFIG_PARAM_BLOCK_SIZE),
        alpha=types.to_float(merged[CONFIG_PARAM_ALPHA], CONFIG_PARAM_ALPHA),
        sink_tokens=types.to_int(merged[CONFIG_PARAM_SINK_TOKENS], CONFIG_PARAM_SINK_TOKENS),
        window_tokens=types.to_int(merged[CONFIG_PARAM_WINDOW_TOKENS], CONFIG_PARAM_WINDOW_TOKENS),
        scale=None if scale is None else types.to_float(scale, CONFIG_PARAM_SCALE),
        epsilon=types.to_float(merged[CONFIG_PARAM_EPSILON], CONFIG_PARAM_EPSILON),
        rng_seed=types.to_int(merged[CONFIG_PARAM_RNG_SEED], CONFIG_PARAM_RNG_SEED),
    )

  def to_dict(self) -> dict:
    return asdict(self)

  def replace(self, **changes) -> "PipelineConfig":
    """Returns a validated copy with some fields changed."""
    return replace(self, **changes)

  def config_hash(self) -> str:
    """
    Returns the SHA-256 of the canonical JSON form of the configuration.
    """
    canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

  @property
  def sink_blocks(self) -> int:
    return -(-self.sink_tokens // self.block_size)

  @property
  def window_blocks(self) -> int:
    return -(-self.window_tokens // self.block_size)

  def resolve_scale(self, head_dim: int) -> float:
    """
    Returns tau for a head dimension.

    Args:
      head_dim: Head dimension d.

    Returns:
      Configured scale, or d^(-1/2) when unset.
    """
    if self.scale is not None:
      return float(self.scale)
    return 1.0 / math.sqrt(head_dim)
