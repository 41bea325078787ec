import csv
import io
import json
import math
import os

import torch

from sparseprefill.sparseprefill import main
from sparseprefill.utils import tensorio


SMALL = ["--L", "256", "--B", "32", "--d", "16"]


def read_report(directory):
  with open(os.path.join(directory, "report.json"), encoding="UTF-8") as handler:
    return json.load(handler)


def test_gen_writes_workload(tmp_path):
  out = str(tmp_path / "gen")
  assert main(["gen", "--gen", "slash", *SMALL, "--H", "2", "--out", out]) == 0
  assert sorted(os.listdir(out)) == ["k.fpt", "q.fpt", "report.json", "truth.fpt", "v.fpt"]
  truth = tensorio.load_tensor(os.path.join(out, "truth.fpt"))
  assert truth.dtype == torch.int32
  assert tuple(truth.shape) == (1, 8, 8, 2)
  assert tensorio.load_tensor(os.path.join(out, "q.fpt")).shape == (1, 2, 256, 16)


def test_discover_generated(tmp_path):
  out = str(tmp_path / "discover")
  assert main(["discover", "--gen", "vertical", "--L", "2048", "--B", "128", "--seed", "7", "--out", out]) == 0
  report = read_report(out)
  cell = report["cells"][0]
  assert report["rng_seed"] == 7
  assert cell["method"] == "approx"
  assert cell["recall"] >= 0.9
  scores = tensorio.load_tensor(os.path.join(out, "scores.fpt"))
  assert tuple(scores.shape) == (1, 1, 16, 16)
  assert "discover" in report["durations"]


def test_discover_methods(tmp_path):
  for method in ("pool-both", "exact", "approx"):
    out = str(tmp_path / method)
    assert main(["discover", "--gen", "block", *SMALL, "--method", method, "--out", out]) == 0
    assert read_report(out)["cells"][0]["method"] == method


def test_discover_compare(tmp_path):
  out = str(tmp_path / "compare")
  assert main(["discover", "--gen", "vertical", *SMALL, "--compare", "--out", out]) == 0
  assert read_report(out)["cells"][0]["rank_correlation"] is not None


def test_missing_input_leaves_no_outputs(tmp_path, capsys):
  out = str(tmp_path / "never")
  code = main(["discover", "--q", str(tmp_path / "q.fpt"), "--k", str(tmp_path / "k.fpt"), "--out", out])
  assert code == 3
  assert not os.path.exists(out)
  assert "ERROR" in capsys.readouterr().err


def test_usage_errors(tmp_path):
  assert main([]) == 1
  assert main(["discover", "--no-such-flag"]) == 1
  assert main(["discover", "--out", str(tmp_path)]) == 1
  assert main(["sweep", "--gen", "vertical", *SMALL, "--alphas", ""]) == 1
  assert main(["select", "--gen", "vertical", *SMALL, "--select", "topk"]) == 1


def test_validation_errors(tmp_path):
  assert main(["discover", "--gen", "vertical", *SMALL, "--block-size", "0"]) == 2
  assert main(["discover", "--gen", "vertical", *SMALL, "--target", "99"]) == 2
  assert main(["gen", "--gen", "vertical", *SMALL, "--strength", "-1", "--out", str(tmp_path)]) == 2


def test_attend_check_full_density(tmp_path):
  out = str(tmp_path / "attend")
  assert main(["attend", "--gen", "vertical", *SMALL, "--H", "2", "--alpha", "0", "--check", "--out", out]) == 0
  cell = read_report(out)["cells"][0]
  assert cell["density"] == 1.0
  assert cell["max_abs_error"] <= 1e-4
  assert cell["lse_max_abs_error"] <= 1e-4
  assert cell["visits"] == cell["full_visits"]


def test_attend_dense_single_token(tmp_path):
  values = torch.tensor([[[[0.25, -1.5, 2.0]]]])
  for name, tensor in (("q", torch.ones(1, 1, 1, 3)), ("k", torch.ones(1, 1, 1, 3)), ("v", values)):
    tensorio.save_tensor(str(tmp_path / f"{name}.fpt"), tensor)
  out = str(tmp_path / "dense")
  args = ["attend", "--dense", "--q", str(tmp_path / "q.fpt"), "--k", str(tmp_path / "k.fpt"),
          "--v", str(tmp_path / "v.fpt"), "--out", out]
  assert main(args) == 0
  assert torch.equal(tensorio.load_tensor(os.path.join(out, "o.fpt")), values)


def test_natural_log(tmp_path):
  base = str(tmp_path / "base2")
  natural = str(tmp_path / "natural")
  common = ["attend", "--gen", "block", *SMALL]
  assert main([*common, "--out", base]) == 0
  assert main([*common, "--natural-log", "--out", natural]) == 0
  lse = tensorio.load_tensor(os.path.join(base, "lse.fpt"))
  converted = tensorio.load_tensor(os.path.join(natural, "lse.fpt"))
  assert torch.allclose(converted, lse * math.log(2.0), atol=1e-5)


def test_select_and_corrupt_plan(tmp_path):
  data = str(tmp_path / "data")
  plan_dir = str(tmp_path / "plan")
  assert main(["gen", "--gen", "vertical", *SMALL, "--out", data]) == 0
  inputs = ["--q", os.path.join(data, "q.fpt"), "--k", os.path.join(data, "k.fpt")]
  assert main(["select", *inputs, "--B", "32", "--alpha", "0", "--out", plan_dir]) == 0
  report = read_report(plan_dir)
  assert report["cells"][0]["density"] == 1.0
  attend = ["attend", *inputs, "--v", os.path.join(data, "v.fpt"), "--B", "32", "--plan-dir", plan_dir]
  assert main([*attend, "--check", "--out", str(tmp_path / "ok")]) == 0
  assert read_report(str(tmp_path / "ok"))["cells"][0]["max_abs_error"] <= 1e-4

  indices_path = os.path.join(plan_dir, "indices.fpt")
  indices = tensorio.load_tensor(indices_path)
  indices[0, 3, 1, 0] = indices.shape[2]
  tensorio.save_tensor(indices_path, indices)
  out = str(tmp_path / "bad")
  assert main([*attend, "--out", out]) == 2
  assert not os.path.exists(out)


def test_select_from_score_file(tmp_path):
  scores = torch.tensor([[0.5, 0.0, 0.0, 0.0],
                         [0.5, 0.5, 0.0, 0.0],
                         [0.4, 0.3, 0.3, 0.0],
                         [0.50, 0.30, 0.05, 0.15]]).reshape(1, 1, 4, 4)
  path = str(tmp_path / "scores.fpt")
  tensorio.save_tensor(path, scores)
  out = str(tmp_path / "plan")
  args = ["select", "--scores", path, "--alpha", "0.5", "--B", "1", "--sink-tokens", "0", "--window-tokens", "1",
          "--out", out]
  assert main(args) == 0
  indices = tensorio.load_tensor(os.path.join(out, "indices.fpt"))
  counts = tensorio.load_tensor(os.path.join(out, "counts.fpt"))
  assert indices[0, 3, :, 0].tolist() == [0, 1, 3, 4]
  assert counts[0, :, 0].tolist() == [1, 2, 3, 3]


def test_sweep_alpha_monotone(tmp_path, capsys):
  args = ["sweep", "--gen", "slash", *SMALL, "--alphas", "0,0.12,1", "--format", "csv"]
  assert main(args) == 0
  rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
  densities = [float(row["density"]) for row in rows]
  assert len(densities) == 3
  assert densities[0] == 1.0
  assert densities == sorted(densities, reverse=True)
  assert all(row["visits"] for row in rows)


def test_sweep_lengths_and_baselines(tmp_path):
  out = str(tmp_path / "sweep")
  args = ["sweep", "--gen", "vertical", "--B", "32", "--d", "16", "--lengths", "128,256",
          "--alphas", "0.12", "--topk", "2", "--topp", "0.9", "--out", out]
  assert main(args) == 0
  cells = read_report(out)["cells"]
  assert [(cell["method"], cell["length"]) for cell in cells] == [
      ("max", 128), ("topk", 128), ("topp", 128), ("max", 256), ("topk", 256), ("topp", 256)]
  for cell in cells:
    assert cell["max_abs_error"] is not None
    assert cell["recall"] is not None


def test_sweep_heavy_tail(tmp_path):
  out = str(tmp_path / "tail")
  args = ["sweep", "--gen", "heavy-tail", "--H", "4", "--blocks", "64", "--alpha", "0.2", "--B", "1",
          "--sink-tokens", "0", "--window-tokens", "1", "--alphas", "0.2", "--topk", "8", "--topp", "0.9",
          "--out", out]
  assert main(args) == 0
  cells = {cell["method"]: cell for cell in read_report(out)["cells"]}
  assert cells["max"]["density"] < cells["topp"]["density"]
  assert cells["max"]["density"] < cells["topk"]["density"]
  assert cells["max"]["head_retention"] == 1.0
  assert cells["max"]["max_abs_error"] is None


def test_json_and_csv_runs_agree(tmp_path):
  common = ["sweep", "--gen", "block", *SMALL, "--alphas", "0.05,0.5", "--seed", "3"]
  assert main([*common, "--out", str(tmp_path / "j")]) == 0
  assert main([*common, "--format", "csv", "--out", str(tmp_path / "c")]) == 0
  cells = read_report(str(tmp_path / "j"))["cells"]
  with open(tmp_path / "c" / "report.csv", encoding="UTF-8") as handler:
    rows = list(csv.DictReader(handler))
  for cell, row in zip(cells, rows):
    for name in ("density", "visits", "recall", "precision", "max_abs_error", "mean_abs_error"):
      if cell[name] is None:
        assert row[name] == ""
      else:
        assert float(row[name]) == cell[name]


def test_sweep_top1_shows_pooled_query_loss(tmp_path):
  rates = {}
  for method in ("approx", "pool-both"):
    out = str(tmp_path / method)
    args = ["sweep", "--gen", "slash", "--alternating", "--B", "128", "--H", "4", "--method", method,
            "--alphas", "0.12", "--out", out]
    assert main(args) == 0
    cell = read_report(out)["cells"][0]
    assert cell["recall"] is not None
    rates[method] = cell["top1_hit_rate"]
  assert rates["approx"] > rates["pool-both"]


def test_select_target_density(tmp_path):
  out = str(tmp_path / "plan")
  args = ["select", "--gen", "vertical", *SMALL, "--H", "2", "--sink-tokens", "0", "--window-tokens", "1",
          "--target-density", "0.6", "--density-tol", "0.05", "--out", out]
  assert main(args) == 0
  cell = read_report(out)["cells"][0]
  assert abs(cell["density"] - 0.6) <= 0.05
  assert 0.0 <= cell["parameter"] <= 1.0
  assert cell["top1_hit_rate"] is not None


def test_sweep_calibrated_cell(tmp_path):
  out = str(tmp_path / "sweep")
  args = ["sweep", "--gen", "block", *SMALL, "--H", "2", "--sink-tokens", "0", "--window-tokens", "1",
          "--alphas", "0.5", "--target-density", "0.5", "--density-tol", "0.05", "--out", out]
  assert main(args) == 0
  cells = read_report(out)["cells"]
  assert [cell["method"] for cell in cells] == ["max", "max-calibrated"]
  assert abs(cells[1]["density"] - 0.5) <= 0.05
  assert cells[1]["max_abs_error"] is not None


def test_target_density_errors():
  common = ["select", "--gen", "vertical", *SMALL]
  assert main([*common, "--select", "topk", "--top-k", "2", "--target-density", "0.5"]) == 1
  assert main([*common, "--target-density", "1.5"]) == 2
