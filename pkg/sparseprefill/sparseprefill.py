"""Sparseprefill CLI entrypoint and high-level pipeline driver.

This module runs block importance discovery, block selection and block sparse
attention on tensor container files or on generated workloads, and emits run
reports (JSON or CSV) with density, visit, recall and error measurements.
"""

import argparse
import os
import sys

if __package__ in (None, ""):
  repo_root = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
  if repo_root not in sys.path:
    sys.path.insert(0, repo_root)

import torch

from sparseprefill.attention.dense import dense_attention
from sparseprefill.attention.sparse import block_sparse_attention, full_causal_plan, visit_count
from sparseprefill.base import config as config_util
from sparseprefill.base.config import PipelineConfig
from sparseprefill.base.errors import PlanCorruptionException, UsageException, ValidationException
from sparseprefill.base.grid import BlockGrid, make_block_grid
from sparseprefill.base.types import (NEG_SENTINEL, ROLE_KEY, ROLE_QUERY, ROLE_VALUE, ActiveMask, AttentionOutput,
                                      BlockScoreMap, SequenceBatch, SparseBlockPlan, check_compatible)
from sparseprefill.discovery.compare import rank_correlation
from sparseprefill.discovery.methods import DISCOVERY_METHODS, METHOD_APPROX, METHOD_EXACT, discover_with
from sparseprefill.report.report import REPORT_FORMATS, ReportCell, RunReport, Stopwatch
from sparseprefill.selection import metrics
from sparseprefill.selection.baselines import METHOD_MAX, METHOD_TOPK, METHOD_TOPP, SELECTION_METHODS, select_with
from sparseprefill.selection.plan import compress_indices, density
from sparseprefill.selection.threshold import calibrate_alpha, max_threshold_mask
from sparseprefill.utils import file as file_util
from sparseprefill.utils import tensorio
from sparseprefill.utils import types
from sparseprefill.utils.tracking import VisitCounter
from sparseprefill.workloads.heavy_tail import heavy_tail_score_map
from sparseprefill.workloads.planted import (PATTERN_BLOCK, PATTERN_KINDS, PATTERN_SLASH, PATTERN_VERTICAL,
                                             PlantedSpec, generate_planted)


GEN_HEAVY_TAIL = "heavy-tail"

DEFAULT_LENGTH = 2048
DEFAULT_HEAD_DIM = 64
DEFAULT_STRENGTH = 5.0
DEFAULT_NOISE = 1.0
DEFAULT_HEAD_MASS = 0.7
DEFAULT_TAIL_BLOCKS = 64
DEFAULT_DENSITY_TOL = 0.01
METHOD_CALIBRATED = "max-calibrated"


class Workload:
  """Inputs of one run, loaded from files or generated."""
  def __init__(self, queries: SequenceBatch, keys: SequenceBatch, values: SequenceBatch,
               truth: ActiveMask | None, description: dict):
    self.queries = queries
    self.keys = keys
    self.values = values
    self.truth = truth
    self.description = description

  @property
  def length(self) -> int:
    return self.queries.length


class SparsePrefill:
  """High-level driver running the pipeline stages under one configuration."""
  def __init__(self, config: PipelineConfig, verbose: bool = False):
    self.config = config
    self.verbose = verbose
    self.stopwatch = Stopwatch()

  @staticmethod
  def _verbose_print(verbose: bool, message: str):
    """Print a message only when verbose mode is enabled."""
    if verbose:
      print(message, file=sys.stderr)

  def grid(self, length: int) -> BlockGrid:
    return make_block_grid(length, self.config.block_size)

  def scale(self, head_dim: int) -> float:
    return self.config.resolve_scale(head_dim)

  def discover(self, queries: SequenceBatch, keys: SequenceBatch, method: str = METHOD_APPROX) -> BlockScoreMap:
    """Return the block score map of a discovery method."""
    grid = self.grid(queries.length)
    SparsePrefill._verbose_print(self.verbose, f"  Discover ({method}): {grid.num_blocks} blocks of {grid.block_size}")
    with self.stopwatch.stage("discover"):
      return discover_with(method, queries, keys, grid, self.scale(queries.head_dim), self.config.epsilon)

  def select(self, scores: BlockScoreMap, method: str = METHOD_MAX, k: int | None = None,
             p: float | None = None, config: PipelineConfig | None = None) -> tuple[ActiveMask, SparseBlockPlan]:
    """Return the active mask and its compacted plan."""
    config = config or self.config
    with self.stopwatch.stage("select"):
      mask = select_with(method, scores, config, k, p)
      plan = compress_indices(mask)
    return mask, plan

  def attend(self, workload: Workload, plan: SparseBlockPlan) -> tuple[AttentionOutput, int]:
    """Return the sparse attention output and the instrumented visit count."""
    counter = VisitCounter()
    grid = self.grid(workload.length)
    with self.stopwatch.stage("attend"):
      output = block_sparse_attention(workload.queries, workload.keys, workload.values, plan, grid,
                                      self.scale(workload.queries.head_dim), counter)
    SparsePrefill._verbose_print(self.verbose, f"  Attend: {counter.visits} block visits")
    return output, counter.visits

  def dense(self, workload: Workload) -> AttentionOutput:
    with self.stopwatch.stage("dense"):
      return dense_attention(workload.queries, workload.keys, workload.values,
                             self.scale(workload.queries.head_dim))

  def score_mask(self, scores: BlockScoreMap) -> ActiveMask:
    """Return the alpha threshold mask without sink and window retention."""
    return max_threshold_mask(scores, self.config.replace(sink_tokens=0, window_tokens=1))

  @staticmethod
  def measure_plan(cell: ReportCell, plan: SparseBlockPlan, grid: BlockGrid):
    batch, _, heads = plan.counts.shape
    cell.density = density(plan, grid)
    cell.visits = visit_count(plan)
    cell.full_visits = batch * heads * grid.causal_pairs()

  @staticmethod
  def measure_recall(cell: ReportCell, selected: ActiveMask, truth: ActiveMask | None):
    if truth is None:
      return
    planted = metrics.off_diagonal(truth)
    chosen = metrics.off_diagonal(selected)
    cell.recall = metrics.recall(chosen, planted)
    cell.precision = metrics.precision(chosen, planted)

  @staticmethod
  def measure_error(cell: ReportCell, output: AttentionOutput, oracle: AttentionOutput):
    error = (output.output - oracle.output).abs()
    cell.max_abs_error = float(error.max())
    cell.mean_abs_error = float(error.mean())
    cell.lse_max_abs_error = float((output.lse - oracle.lse).abs().max())

  @staticmethod
  def measure_top1(cell: ReportCell, scores: BlockScoreMap, truth: ActiveMask | None):
    if truth is not None:
      cell.top1_hit_rate = metrics.top1_hit_rate(scores, truth)

  def calibrate(self, scores: BlockScoreMap, grid: BlockGrid, target: float, tol: float) -> PipelineConfig:
    """Return the configuration whose alpha reaches the target density."""
    with self.stopwatch.stage("calibrate"):
      alpha = calibrate_alpha(scores, grid, self.config, target, tol)
    SparsePrefill._verbose_print(self.verbose, f"  Calibrate: alpha={alpha:.6f} for density {target}")
    return self.config.replace(alpha=alpha)


def _error(message: str):
  """Print a user-facing error message."""
  print(f"ERROR: {message}", file=sys.stderr)


class _UsageParser(argparse.ArgumentParser):
  """Argument parser whose errors surface as UsageException."""
  def error(self, message: str):
    raise UsageException(message)


def _config_from_args(args) -> PipelineConfig:
  return PipelineConfig.from_dict({
      config_util.CONFIG_PARAM_BLOCK_SIZE: args.block_size,
      config_util.CONFIG_PARAM_ALPHA: args.alpha,
      config_util.CONFIG_PARAM_SINK_TOKENS: args.sink_tokens,
      config_util.CONFIG_PARAM_WINDOW_TOKENS: args.window_tokens,
      config_util.CONFIG_PARAM_SCALE: args.scale,
      config_util.CONFIG_PARAM_RNG_SEED: args.seed,
  })


def _parse_target(text: str | None, kind: str, grid: BlockGrid):
  if text is None:
    if kind == PATTERN_VERTICAL:
      return 0
    if kind == PATTERN_SLASH:
      return min(grid.block_size, grid.length - 1)
    if kind == PATTERN_BLOCK:
      return (min(2, grid.num_blocks - 1), 0)
    return grid.length // 2
  items = [types.to_int(item, "--target") for item in types.split_no_empty(text)]
  if kind == PATTERN_BLOCK:
    if len(items) != 2:
      raise UsageException("--target for a block pattern must be 'query_block,key_block'")
    return tuple(items)
  if len(items) != 1:
    raise UsageException(f"--target for a {kind} pattern must be a single integer")
  return items[0]


def _generate(args, processor: SparsePrefill, length: int) -> Workload:
  kind = args.gen
  if kind not in PATTERN_KINDS:
    raise UsageException(f"--gen {kind} does not produce Q/K/V, expected one of {PATTERN_KINDS}")
  grid = processor.grid(length)
  spec = PlantedSpec(
      pattern_kind=kind,
      strength=args.strength,
      target=_parse_target(args.target, kind, grid),
      base_noise=args.noise,
      rng_seed=processor.config.rng_seed,
      alternating_queries=args.alternating,
  )
  SparsePrefill._verbose_print(processor.verbose, f"  Generate {kind}: L={length} target={spec.target}")
  with processor.stopwatch.stage("generate"):
    queries, keys, values, truth = generate_planted(spec, args.batch, args.heads, length, args.head_dim,
                                                    processor.config.block_size, processor.config.scale)
  description = {
      "gen": kind, "L": length, "Z": args.batch, "H": args.heads, "d": args.head_dim,
      "strength": spec.strength, "target": list(spec.target) if kind == PATTERN_BLOCK else spec.target,
      "noise": spec.base_noise, "alternating": spec.alternating_queries,
  }
  return Workload(queries, keys, values, truth, description)


def _load_inputs(args, processor: SparsePrefill, need_values: bool = True) -> Workload:
  """Return the workload named by --gen or by the --q/--k/--v files."""
  if args.gen is not None:
    return _generate(args, processor, args.length)
  paths = [args.q, args.k] + ([args.v] if need_values else [])
  if any(path is None for path in paths):
    raise UsageException("Give --gen or the input tensors (--q, --k" + (", --v)" if need_values else ")"))
  queries = tensorio.load_batch(args.q, ROLE_QUERY)
  keys = tensorio.load_batch(args.k, ROLE_KEY)
  values = tensorio.load_batch(args.v, ROLE_VALUE) if need_values else None
  if values is not None:
    check_compatible(queries, keys, values)
  else:
    check_compatible(queries, keys)
  SparsePrefill._verbose_print(processor.verbose, f"  Loaded inputs: {tuple(queries.data.shape)}")
  description = {"q": args.q, "k": args.k}
  if need_values:
    description["v"] = args.v
  return Workload(queries, keys, values, None, description)


def _load_scores(path: str) -> BlockScoreMap:
  score = tensorio.load_tensor(path)
  if score.dtype != torch.float32 or score.dim() != 4 or score.shape[2] != score.shape[3]:
    raise ValidationException(f"{path}: score map must be a float32 (Z, H, M, M) tensor")
  if (score < 0).any():
    raise ValidationException(f"{path}: score map holds negative values")
  causal = torch.ones(score.shape[2], score.shape[3], dtype=torch.bool).tril()
  local_max = torch.zeros(score.shape).masked_fill(~causal, NEG_SENTINEL)
  return BlockScoreMap(energy=score, local_max=local_max, score=score, method="file")


def _load_plan(directory: str) -> SparseBlockPlan:
  indices = tensorio.load_tensor(os.path.join(directory, "indices.fpt"))
  counts = tensorio.load_tensor(os.path.join(directory, "counts.fpt"))
  if indices.dtype != torch.int32 or counts.dtype != torch.int32:
    raise PlanCorruptionException(f"{directory}: plan tensors must be int32")
  return SparseBlockPlan(indices=indices, counts=counts)


def _selection_args(args) -> tuple[str, int | None, float | None]:
  method = args.select
  if method == METHOD_TOPK and args.top_k is None:
    raise UsageException("--select topk needs --top-k")
  if method == METHOD_TOPP and args.top_p is None:
    raise UsageException("--select topp needs --top-p")
  if args.target_density is not None and method != METHOD_MAX:
    raise UsageException("--target-density calibrates alpha and needs --select max")
  return method, args.top_k, args.top_p


def _parameter(method: str, config: PipelineConfig, k: int | None, p: float | None):
  if method == METHOD_TOPK:
    return k
  if method == METHOD_TOPP:
    return p
  return config.alpha


def _selection_config(args, processor: SparsePrefill, scores: BlockScoreMap, grid: BlockGrid) -> PipelineConfig:
  if args.target_density is None:
    return processor.config
  return processor.calibrate(scores, grid, args.target_density, args.density_tol)


def _emit(args, report: RunReport, outputs: dict, processor: SparsePrefill) -> int:
  """Write tensors and report once every stage has succeeded."""
  report.durations = dict(processor.stopwatch.durations)
  if args.out is None:
    sys.stdout.write(report.render(args.format))
    return 0
  file_util.ensure_directory(args.out)
  for name, tensor in outputs.items():
    path = os.path.join(args.out, f"{name}.fpt")
    tensorio.save_tensor(path, tensor)
    SparsePrefill._verbose_print(processor.verbose, f"Generated: {path}")
  report_path = os.path.join(args.out, f"report.{args.format}")
  report.write(report_path, args.format)
  SparsePrefill._verbose_print(processor.verbose, f"Generated: {report_path}")
  return 0


def cmd_discover(args, processor: SparsePrefill) -> int:
  """Discover the block score map and report recall and rank correlation."""
  workload = _load_inputs(args, processor, need_values=False)
  grid = processor.grid(workload.length)
  scores = processor.discover(workload.queries, workload.keys, args.method)
  report = RunReport("discover", processor.config, workload.description)
  cell = report.add_cell(ReportCell(method=args.method, parameter=processor.config.alpha, length=workload.length))
  mask = processor.score_mask(scores)
  SparsePrefill.measure_plan(cell, compress_indices(mask), grid)
  SparsePrefill.measure_recall(cell, mask, workload.truth)
  SparsePrefill.measure_top1(cell, scores, workload.truth)
  if args.compare and args.method != METHOD_EXACT:
    reference = processor.discover(workload.queries, workload.keys, METHOD_EXACT)
    cell.rank_correlation = rank_correlation(scores, reference)
  outputs = {"scores": scores.score, "energy": scores.energy, "local_max": scores.local_max}
  return _emit(args, report, outputs, processor)


def cmd_select(args, processor: SparsePrefill) -> int:
  """Select active blocks from a score map and write the compacted plan."""
  method, k, p = _selection_args(args)
  truth = None
  if args.scores is not None:
    scores = _load_scores(args.scores)
    grid = make_block_grid(scores.num_blocks, 1)
    description = {"scores": args.scores}
    length = scores.num_blocks
  else:
    workload = _load_inputs(args, processor, need_values=False)
    grid = processor.grid(workload.length)
    scores = processor.discover(workload.queries, workload.keys, args.method)
    truth = workload.truth
    description = workload.description
    length = workload.length
  config = _selection_config(args, processor, scores, grid)
  mask, plan = processor.select(scores, method, k, p, config=config)
  report = RunReport("select", processor.config, description)
  cell = report.add_cell(ReportCell(method=method, parameter=_parameter(method, config, k, p), length=length))
  SparsePrefill.measure_plan(cell, plan, grid)
  SparsePrefill.measure_recall(cell, mask, truth)
  SparsePrefill.measure_top1(cell, scores, truth)
  outputs = {"indices": plan.indices, "counts": plan.counts}
  return _emit(args, report, outputs, processor)


def cmd_attend(args, processor: SparsePrefill) -> int:
  """Run sparse attention (and/or the dense oracle) and write O and LSE."""
  workload = _load_inputs(args, processor)
  grid = processor.grid(workload.length)
  report = RunReport("attend", processor.config, workload.description)
  if args.dense:
    output = processor.dense(workload)
    cell = report.add_cell(ReportCell(method="dense", parameter=None, length=workload.length))
    SparsePrefill.measure_plan(cell, full_causal_plan(grid, workload.queries.batch, workload.queries.heads), grid)
  else:
    if args.plan_dir is not None:
      plan = _load_plan(args.plan_dir)
      method, parameter = "file", None
    else:
      method, k, p = _selection_args(args)
      scores = processor.discover(workload.queries, workload.keys, args.method)
      config = _selection_config(args, processor, scores, grid)
      mask, plan = processor.select(scores, method, k, p, config=config)
      parameter = _parameter(method, config, k, p)
    output, visits = processor.attend(workload, plan)
    cell = report.add_cell(ReportCell(method=method, parameter=parameter, length=workload.length))
    SparsePrefill.measure_plan(cell, plan, grid)
    cell.visits = visits
    if args.plan_dir is None:
      SparsePrefill.measure_recall(cell, mask, workload.truth)
      SparsePrefill.measure_top1(cell, scores, workload.truth)
    if args.check:
      SparsePrefill.measure_error(cell, output, processor.dense(workload))
  lse = output.natural_lse() if args.natural_log else output.lse
  outputs = {"o": output.output, "lse": lse}
  return _emit(args, report, outputs, processor)


def _sweep_methods(args, config: PipelineConfig) -> list:
  methods = []
  if args.alphas is not None:
    methods += [(METHOD_MAX, alpha) for alpha in types.parse_number_list(args.alphas, "--alphas")]
  if args.topk is not None:
    methods += [(METHOD_TOPK, k) for k in types.parse_number_list(args.topk, "--topk", integer=True)]
  if args.topp is not None:
    methods += [(METHOD_TOPP, p) for p in types.parse_number_list(args.topp, "--topp")]
  if args.target_density is not None:
    methods.append((METHOD_CALIBRATED, args.target_density))
  if not methods:
    methods = [(METHOD_MAX, config.alpha)]
  return methods


def _sweep_select(args, processor: SparsePrefill, scores: BlockScoreMap, grid: BlockGrid, method: str, parameter):
  """Return the mask, the plan and the reported parameter of one sweep cell."""
  if method == METHOD_CALIBRATED:
    config = processor.calibrate(scores, grid, float(parameter), args.density_tol)
    return (*processor.select(scores, METHOD_MAX, config=config), config.alpha)
  if method == METHOD_MAX:
    return (*processor.select(scores, method, config=processor.config.replace(alpha=float(parameter))), parameter)
  if method == METHOD_TOPK:
    return (*processor.select(scores, method, k=int(parameter)), parameter)
  return (*processor.select(scores, method, p=float(parameter)), parameter)


def cmd_sweep(args, processor: SparsePrefill) -> int:
  """Measure every (method, parameter, length) cell of a workload."""
  if args.gen is None:
    raise UsageException("sweep needs a generated workload (--gen)")
  methods = _sweep_methods(args, processor.config)
  report = RunReport("sweep", processor.config, {"gen": args.gen})
  if args.gen == GEN_HEAVY_TAIL:
    sizes = types.parse_number_list(args.blocks, "--blocks", integer=True) if args.blocks is not None \
        else [DEFAULT_TAIL_BLOCKS]
    report.workload.update({"H": args.heads, "head_mass": args.head_mass, "blocks": sizes})
    for size in sizes:
      SparsePrefill._verbose_print(processor.verbose, f"  Heavy-tail rows: n={size}")
      scores = heavy_tail_score_map(args.heads, size, args.head_mass, processor.config.alpha,
                                    processor.config.rng_seed)
      grid = make_block_grid(size, 1)
      for method, parameter in methods:
        mask, plan, reported = _sweep_select(args, processor, scores, grid, method, parameter)
        cell = report.add_cell(ReportCell(method=method, parameter=reported, length=size))
        SparsePrefill.measure_plan(cell, plan, grid)
        cell.head_retention = float(mask.active[:, :, 0, :].to(torch.float64).mean())
    return _emit(args, report, {}, processor)

  lengths = types.parse_number_list(args.lengths, "--lengths", integer=True) if args.lengths is not None \
      else [args.length]
  report.workload.update({"lengths": lengths})
  for length in lengths:
    workload = _generate(args, processor, length)
    grid = processor.grid(length)
    scores = processor.discover(workload.queries, workload.keys, args.method)
    oracle = processor.dense(workload)
    for method, parameter in methods:
      mask, plan, reported = _sweep_select(args, processor, scores, grid, method, parameter)
      output, visits = processor.attend(workload, plan)
      cell = report.add_cell(ReportCell(method=method, parameter=reported, length=length))
      SparsePrefill.measure_plan(cell, plan, grid)
      cell.visits = visits
      SparsePrefill.measure_recall(cell, mask, workload.truth)
      SparsePrefill.measure_top1(cell, scores, workload.truth)
      SparsePrefill.measure_error(cell, output, oracle)
  return _emit(args, report, {}, processor)


def cmd_gen(args, processor: SparsePrefill) -> int:
  """Write a generated workload as tensor containers."""
  if args.gen is None:
    raise UsageException("gen needs --gen")
  if args.out is None:
    raise UsageException("gen needs --out")
  report = RunReport("gen", processor.config, {"gen": args.gen})
  if args.gen == GEN_HEAVY_TAIL:
    size = types.parse_number_list(args.blocks, "--blocks", integer=True)[0] if args.blocks is not None \
        else DEFAULT_TAIL_BLOCKS
    with processor.stopwatch.stage("generate"):
      scores = heavy_tail_score_map(args.heads, size, args.head_mass, processor.config.alpha,
                                    processor.config.rng_seed)
    report.workload.update({"H": args.heads, "head_mass": args.head_mass, "blocks": size})
    return _emit(args, report, {"scores": scores.score}, processor)
  workload = _generate(args, processor, args.length)
  report.workload = workload.description
  outputs = {"q": workload.queries.data, "k": workload.keys.data, "v": workload.values.data,
             "truth": workload.truth.active}
  return _emit(args, report, outputs, processor)


def _build_parser() -> argparse.ArgumentParser:
  shared = _UsageParser(add_help=False)
  shared.add_argument("--block-size", "--B", dest="block_size", default=None, help="Tokens per block")
  shared.add_argument("--alpha", default=None, help="Threshold factor on the row maximum score")
  shared.add_argument("--sink-tokens", dest="sink_tokens", default=None, help="Leading tokens always kept")
  shared.add_argument("--window-tokens", dest="window_tokens", default=None, help="Local window tokens always kept")
  shared.add_argument("--scale", default=None, help="Softmax temperature (default d^-1/2)")
  shared.add_argument("--seed", default=None, help="Workload seed")
  shared.add_argument("--format", choices=REPORT_FORMATS, default="json", help="Report format")
  shared.add_argument("--out", default=None, help="Output directory (report on stdout if omitted)")
  shared.add_argument("-v", "--verbose", action="store_true", help="Enable verbose output")

  workload = _UsageParser(add_help=False)
  workload.add_argument("--gen", default=None, help=f"Generated workload: {', '.join(PATTERN_KINDS)}")
  workload.add_argument("--L", dest="length", type=int, default=DEFAULT_LENGTH, help="Sequence length")
  workload.add_argument("--Z", dest="batch", type=int, default=1, help="Batch size")
  workload.add_argument("--H", dest="heads", type=int, default=1, help="Heads")
  workload.add_argument("--d", dest="head_dim", type=int, default=DEFAULT_HEAD_DIM, help="Head dimension")
  workload.add_argument("--strength", type=float, default=DEFAULT_STRENGTH, help="Planted logit boost")
  workload.add_argument("--target", default=None,
                        help="Key block (vertical), token offset (slash), 'I,J' (block) or token (needle)")
  workload.add_argument("--noise", type=float, default=DEFAULT_NOISE, help="Background noise std")
  workload.add_argument("--alternating", action="store_true", help="Alternate the sign of planted queries")
  workload.add_argument("--method", choices=DISCOVERY_METHODS, default=METHOD_APPROX, help="Discovery method")

  inputs = _UsageParser(add_help=False)
  inputs.add_argument("--q", default=None, help="Query tensor file")
  inputs.add_argument("--k", default=None, help="Key tensor file")
  inputs.add_argument("--v", default=None, help="Value tensor file")

  selection = _UsageParser(add_help=False)
  selection.add_argument("--select", choices=SELECTION_METHODS, default=METHOD_MAX, help="Selection method")
  selection.add_argument("--top-k", dest="top_k", type=int, default=None, help="Blocks per row for topk")
  selection.add_argument("--top-p", dest="top_p", type=float, default=None, help="Mass for topp")
  selection.add_argument("--target-density", dest="target_density", type=float, default=None,
                         help="Calibrate alpha to this density (max selection)")
  selection.add_argument("--density-tol", dest="density_tol", type=float, default=DEFAULT_DENSITY_TOL,
                         help="Accepted density error of the calibration")

  parser = _UsageParser(prog="sparseprefill", description="Block sparse attention prefill pipeline",
                        allow_abbrev=False)
  commands = parser.add_subparsers(dest="command", metavar="command")
  commands.required = True

  discover = commands.add_parser("discover", parents=[shared, workload, inputs], allow_abbrev=False,
                                 help="Compute the block score map")
  discover.add_argument("--compare", action="store_true", help="Rank correlation against exact discovery")
  discover.set_defaults(handler=cmd_discover)

  select = commands.add_parser("select", parents=[shared, workload, inputs, selection], allow_abbrev=False,
                               help="Select active blocks and write the plan")
  select.add_argument("--scores", default=None, help="Score map tensor file (Z, H, M, M)")
  select.set_defaults(handler=cmd_select)

  attend = commands.add_parser("attend", parents=[shared, workload, inputs, selection], allow_abbrev=False,
                               help="Run block sparse attention")
  attend.add_argument("--plan-dir", dest="plan_dir", default=None, help="Directory with indices.fpt and counts.fpt")
  attend.add_argument("--dense", action="store_true", help="Run the dense oracle only")
  attend.add_argument("--check", action="store_true", help="Compare against the dense oracle")
  attend.add_argument("--natural-log", dest="natural_log", action="store_true", help="Write LSE in natural log")
  attend.set_defaults(handler=cmd_attend)

  sweep = commands.add_parser("sweep", parents=[shared, workload], allow_abbrev=False,
                              help="Measure density, recall and error over parameter lists")
  sweep.add_argument("--alphas", default=None, help="Comma separated alpha list")
  sweep.add_argument("--topk", default=None, help="Comma separated k list")
  sweep.add_argument("--topp", default=None, help="Comma separated p list")
  sweep.add_argument("--target-density", dest="target_density", type=float, default=None,
                     help="Add a max cell at the alpha calibrated to this density")
  sweep.add_argument("--density-tol", dest="density_tol", type=float, default=DEFAULT_DENSITY_TOL,
                     help="Accepted density error of the calibration")
  sweep.add_argument("--lengths", default=None, help="Comma separated sequence lengths")
  sweep.add_argument("--blocks", default=None, help="Comma separated row lengths (heavy-tail)")
  sweep.add_argument("--head-mass", dest="head_mass", type=float, default=DEFAULT_HEAD_MASS,
                     help="Head block mass (heavy-tail)")
  sweep.set_defaults(handler=cmd_sweep)

  gen = commands.add_parser("gen", parents=[shared, workload], allow_abbrev=False,
                            help="Write a generated workload")
  gen.add_argument("--blocks", default=None, help="Row length (heavy-tail)")
  gen.add_argument("--head-mass", dest="head_mass", type=float, default=DEFAULT_HEAD_MASS,
                   help="Head block mass (heavy-tail)")
  gen.set_defaults(handler=cmd_gen)
  return parser


def main(argv: list | None = None) -> int:
  """CLI entrypoint for sparseprefill."""
  try:
    args = _build_parser().parse_args(argv)
    processor = SparsePrefill(_config_from_args(args), args.verbose)
    SparsePrefill._verbose_print(args.verbose, f"Command: {args.command}")
    SparsePrefill._verbose_print(args.verbose, f"Config: {processor.config.to_dict()}")
    return args.handler(args, processor)
  except UsageException as e:
    _error(str(e))
    return 1
  except ValidationException as e:
    _error(str(e))
    return 2
  except OSError as e:
    _error(str(e))
    return 3


if __name__ == "__main__":
  ret = main()
  sys.exit(ret)
