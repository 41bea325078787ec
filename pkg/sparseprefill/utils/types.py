# -*- coding: utf-8 -*-
# Sparseprefill
# MIT License (view LICENSE file)
# Copyright (c) 2026

from decimal import Decimal

from sparseprefill.base.errors import ConfigException, UsageException


def to_int(obj: any, name: str) -> int:
  """
  Converts a configuration value to int.

  Args:
    obj: Value to convert (int, integral float, Decimal or numeric string).
    name: Parameter name used in error messages.

  Returns:
    Resulting int.

  Raises:
    ConfigException: If the value is not an integral number.
  """
  if isinstance(obj, bool):
    raise ConfigException(f"{name}: boolean is not a valid integer")
  if isinstance(obj, int):
    return int(obj)
  if isinstance(obj, (float, Decimal)):
    if float(obj).is_integer():
      return int(obj)
    raise ConfigException(f"{name}: {obj} is not an integer")
  if isinstance(obj, str):
    try:
      return int(obj.strip())
    except ValueError:
      pass
  raise ConfigException(f"{name}: cannot convert {obj!r} to integer")


def to_float(obj: any, name: str) -> float:
  """
  Converts a configuration value to float.

  Args:
    obj: Value to convert.
    name: Parameter name used in error messages.

  Returns:
    Resulting float.

  Raises:
    ConfigException: If the value is not numeric.
  """
  if isinstance(obj, bool):
    raise ConfigException(f"{name}: boolean is not a valid number")
  if isinstance(obj, (int, float, Decimal)):
    return float(obj)
  if isinstance(obj, str):
    try:
      return float(obj.strip())
    except ValueError:
      pass
  raise ConfigException(f"{name}: cannot convert {obj!r} to number")


def split_no_empty(string: str, sep: str = ',') -> list:
  """
  Splits a string and removes empty elements.

  Args:
    string: String to split.
    sep: Separator.

  Returns:
    List of non-empty elements, trimmed.
  """
  olist = []
  for item in string.split(sep):
    item = item.strip()
    if item:
      olist.append(item)
  return olist


def parse_number_list(values: list | str | None, name: str, integer: bool = False) -> list:
  """
  Parses a sweep list given as repeated flags or a comma separated string.

  Args:
    values: List of strings (each may hold several comma separated items) or a string.
    name: Flag name used in error messages.
    integer: If True, items are converted to int, otherwise to float.

  Returns:
    List of numbers in the given order.

  Raises:
    UsageException: If the list is empty or an item is not a number.
  """
  if values is None:
    return []
  if isinstance(values, str):
    values = [values]
  items = []
  for value in values:
    items.extend(split_no_empty(str(value)))
  if not items:
    raise UsageException(f"{name}: empty list")
  converter = to_int if integer else to_float
  try:
    return [converter(item, name) for item in items]
  except ConfigException as e:
    raise UsageException(str(e)) from e


def merge_dicts(dict1: dict | None, dict2: dict | None) -> dict:
  """
  Merges dictionaries without overwriting existing keys.

  Args:
    dict1: Base dictionary (wins on conflicts unless its value is None).
    dict2: Dictionary with fallback values.

  Returns:
    Merged dictionary.
  """
  dict3 = {}
  if dict1:
    for item, value in dict1.items():
      dict3[item] = value
  if dict2 is not None:
    for item, value in dict2.items():
      if dict3.get(item) is None:
        dict3[item] = value
  return dict3
