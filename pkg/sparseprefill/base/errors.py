# -*- coding: utf-8 -*-
# Sparseprefill
# MIT License (view LICENSE file)
# Copyright (c) 2026


class SparsePrefillException(Exception):
  """
  Base exception for the sparse prefill pipeline.
  """
  pass


class UsageException(SparsePrefillException):
  """
  Invalid command line usage (empty sweep lists, no input source...).
  """
  pass


class ValidationException(SparsePrefillException):
  """
  Input values violate a precondition (NaN/Inf, shape mismatch...).
  """
  pass


class TensorFormatException(ValidationException):
  """
  Malformed tensor container (magic, version, shape, dtype or payload size).
  """
  pass


class ConfigException(ValidationException):
  """
  Pipeline or generator configuration is out of range or infeasible.
  """
  pass


class GridBoundsException(ValidationException):
  """
  A block or token target lies outside the block grid.
  """
  pass


class PlanCorruptionException(ValidationException):
  """
  A sparse block plan does not describe a valid causal block list.
  """
  pass
