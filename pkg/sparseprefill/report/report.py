# -*- coding: utf-8 -*-
# Sparseprefill
# MIT License (view LICENSE file)
# Copyright (c) 2026

"""Run reports: per-cell measurements plus the configuration that produced them.

JSON is nested and canonical (sorted keys); CSV is flat with one row per
cell. Both emit floats through repr, so the two formats of one run carry the
same numbers. NaN values are emitted as null / empty.
"""

import csv
import io
import json
import math
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields

from sparseprefill.base.config import PipelineConfig
from sparseprefill.base.errors import UsageException
from sparseprefill.utils import file as file_util


FORMAT_JSON = "json"
FORMAT_CSV = "csv"
REPORT_FORMATS = (FORMAT_JSON, FORMAT_CSV)


@dataclass
class ReportCell:
  """
  Measurements of one (method, parameter, length) cell.

  Unmeasured fields stay None.
  """
  method: str
  parameter: float | int | None
  length: int
  density: float | None = None
  visits: int | None = None
  full_visits: int | None = None
  recall: float | None = None
  precision: float | None = None
  top1_hit_rate: float | None = None
  head_retention: float | None = None
  rank_correlation: float | None = None
  max_abs_error: float | None = None
  mean_abs_error: float | None = None
  lse_max_abs_error: float | None = None


CELL_FIELDS = tuple(f.name for f in fields(ReportCell))
CSV_FIELDS = ("command", "config_hash", "rng_seed") + CELL_FIELDS


def _clean(value):
  if isinstance(value, float) and math.isnan(value):
    return None
  return value


class Stopwatch:
  """
  Accumulates wall-clock seconds per named stage.
  """
  def __init__(self):
    self.durations = {}

  @contextmanager
  def stage(self, name: str):
    start = time.perf_counter()
    try:
      yield
    finally:
      self.durations[name] = self.durations.get(name, 0.0) + time.perf_counter() - start


@dataclass
class RunReport:
  """
  Report of one CLI command.

  Attributes:
    command: Subcommand name.
    config: Resolved pipeline configuration.
    workload: Workload description (generator parameters or input paths).
    durations: Wall-clock seconds per stage.
    cells: Measurement cells.
  """
  command: str
  config: PipelineConfig
  workload: dict = field(default_factory=dict)
  durations: dict = field(default_factory=dict)
  cells: list = field(default_factory=list)

  def add_cell(self, cell: ReportCell) -> ReportCell:
    self.cells.append(cell)
    return cell

  def to_dict(self) -> dict:
    return {
        "command": self.command,
        "config": self.config.to_dict(),
        "config_hash": self.config.config_hash(),
        "rng_seed": self.config.rng_seed,
        "workload": self.workload,
        "durations": self.durations,
        "cells": [{name: _clean(value) for name, value in asdict(cell).items()} for cell in self.cells],
    }

  def to_json(self) -> str:
    return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

  def to_csv(self) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    config_hash = self.config.config_hash()
    for cell in self.cells:
      row = {"command": self.command, "config_hash": config_hash, "rng_seed": self.config.rng_seed}
      row.update({name: _clean(value) for name, value in asdict(cell).items()})
      writer.writerow(row)
    return buffer.getvalue()

  def render(self, fmt: str) -> str:
    """
    Returns the report text in the given format.

    Raises:
      UsageException: If the format is unknown.
    """
    if fmt == FORMAT_JSON:
      return self.to_json()
    if fmt == FORMAT_CSV:
      return self.to_csv()
    raise UsageException(f"Unknown report format '{fmt}', expected one of {REPORT_FORMATS}")

  def write(self, path: str, fmt: str):
    file_util.write_text(path, self.render(fmt))
