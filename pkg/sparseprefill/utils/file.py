# -*- coding: utf-8 -*-
# Sparseprefill
# MIT License (view LICENSE file)
# Copyright (c) 2026

import os
import tempfile


def is_file(file: str) -> bool:
  return os.path.isfile(file)


def ensure_directory(directory: str):
  """
  Creates a directory (and parents) if it does not exist.

  Raises:
    OSError: If the directory cannot be created or a file is in the way.
  """
  os.makedirs(directory, exist_ok=True)


def require_file(file: str):
  """
  Checks that an input file exists.

  Raises:
    FileNotFoundError: If the path is not an existing file.
  """
  if not is_file(file):
    raise FileNotFoundError(f"Input file not found: {file}")


def read_bytes(file: str) -> bytes:
  """
  Reads the binary contents of a file.

  Args:
    file: File path.

  Returns:
    Read bytes.

  Raises:
    FileNotFoundError: If the file does not exist.
    OSError: If read errors occur.
  """
  with open(file, "rb") as handler:
    return handler.read()


def write_bytes(file: str, data: bytes):
  """
  Writes bytes to a file atomically.

  The data goes to a temporary file in the destination directory which then
  replaces the target, so readers never observe a partial file.

  Args:
    file: File path.
    data: Binary content to write.

  Raises:
    OSError: If write errors occur.
  """
  directory = os.path.dirname(os.path.abspath(file))
  (handle, name) = tempfile.mkstemp(suffix=".tmp", dir=directory)
  try:
    with os.fdopen(handle, "wb") as handler:
      handler.write(data)
    os.replace(name, file)
  except BaseException:
    remove_file(name)
    raise


def write_text(file: str, text: str, encoding: str = "UTF-8"):
  """
  Writes a text file atomically.

  Raises:
    OSError: If write errors occur.
  """
  write_bytes(file, text.encode(encoding))


def remove_file(filename: str):
  """
  Removes a file if it exists.

  Args:
    filename: File path.

  Raises:
    OSError: If it cannot be removed.
  """
  if os.path.exists(filename):
    os.remove(filename)
