import json
import math

import numpy as np
import pytest

import folint
import formulas
from errors import InapplicableError, InputError

SMALL = ["--grid", "4", "--sphere", "4", "--leaf-grid", "4"]


def _check(*extra, manifold="flat-torus-3-1-1"):
    return ["check", "--manifold", manifold, *extra]


def test_list(capsys):
    assert folint.main(["list"]) == folint.EXIT_OK
    assert "subriemannian-4-2-1" in capsys.readouterr().out


def test_describe(capsys):
    assert folint.main(["describe", "twisted-normal"]) == folint.EXIT_OK
    out = capsys.readouterr().out
    assert '"name": "twisted-normal"' in out
    assert "rank_D" in out


def test_check_writes_report(tmp_path, capsys):
    path = tmp_path / "report.json"
    assert folint.main(_check("--formula", "pw", *SMALL, "--json", str(path))) == folint.EXIT_OK
    document = json.loads(path.read_text(encoding="utf-8"))
    assert document["tool_version"] == folint.settings.TOOL_VERSION
    assert document["manifest"]["name"] == "flat-torus-3-1-1"
    assert document["structure"]["tilde_axes"] == ["x3"]
    assert [r["status"] for r in document["reports"]] == ["pass"]
    assert document["summary"] == {"checks": 1, "failed": 0, "exit_status": 0}
    assert "ALL CHECKS PASSED" in capsys.readouterr().out


def test_reports_are_byte_identical(tmp_path, single_thread):
    texts = []
    for k in range(2):
        path = tmp_path / f"run{k}.json"
        args = _check("--formula", "closed-general", "--grid", "6", "--sphere", "4", "--no-timings", "--json", str(path))
        assert folint.main(args) == folint.EXIT_OK
        texts.append(path.read_bytes())
    assert texts[0] == texts[1]
    assert b"wall_time" not in texts[0]


def test_json_to_stdout(capsys):
    assert folint.main(_check("--formula", "codazzi", "--json", "-")) == folint.EXIT_OK
    captured = capsys.readouterr()
    assert json.loads(captured.out)["reports"][0]["formula_id"] == "codazzi"
    assert "[1/3] Loading manifold" in captured.err


def test_every_check_on_a_flat_torus(capsys):
    assert folint.main(_check("--all", *SMALL)) == folint.EXIT_OK
    out = capsys.readouterr().out
    for check_id in folint.CHECK_IDS:
        assert check_id in out


def test_manifest_path(tmp_path):
    manifest = folint.manifolds.builtin("warped-torus").to_dict()
    path = tmp_path / "warped.json"
    path.write_text(json.dumps(manifest), encoding="utf-8")
    args = ["check", "--manifest", str(path), "--formula", "leafwise", "--leaf", "0,0", "--leaf-grid", "16"]
    assert folint.main(args) == folint.EXIT_OK


def test_unknown_manifold(capsys):
    assert folint.main(_check("--formula", "pw", manifold="moebius")) == folint.EXIT_INPUT
    assert "unknown builtin manifold" in capsys.readouterr().out


def test_bad_grid_is_an_input_error(capsys):
    assert folint.main(_check("--formula", "pw", "--grid", "3")) == folint.EXIT_INPUT
    assert "at least 4 nodes" in capsys.readouterr().out


def test_missing_formula_is_a_usage_error():
    with pytest.raises(SystemExit) as info:
        folint.main(["check", "--manifold", "warped-torus"])
    assert info.value.code == 2


def test_inapplicable_checks_do_not_fail(tmp_path):
    path = tmp_path / "codim1.json"
    args = _check("--formula", "codim1", "--json", str(path), manifold="full-tangent-3")
    assert folint.main(args) == folint.EXIT_OK
    (report,) = json.loads(path.read_text(encoding="utf-8"))["reports"]
    assert report["status"] == "inapplicable"
    assert "p = 1" in report["message"]


def test_failing_residual_sets_exit_status(monkeypatch, capsys):
    def failing(structure, check_id, options):
        return [formulas.FormulaReport(check_id, residual=1.0, normalizer=1.0).classify()]

    monkeypatch.setattr(folint, "_dispatch", failing)
    assert folint.main(_check("--formula", "reeb")) == folint.EXIT_RESIDUAL
    assert "1 check(s) failed" in capsys.readouterr().out


def test_run_check_rejects_unknown_ids(build):
    with pytest.raises(InputError):
        folint.run_check(build("warped-torus"), "gauss-bonnet", folint.CheckOptions())


def test_sweep(tmp_path):
    path = tmp_path / "sweep.json"
    args = ["sweep", "--manifold", "flat-torus-3-1-1", "--formula", "pw", "--grids", "4,8", "--sphere", "4", "--json", str(path)]
    assert folint.main(args) == folint.EXIT_OK
    sweep = json.loads(path.read_text(encoding="utf-8"))["sweep"]
    assert sweep["levels"] == [4, 8]
    assert sweep["monotone"] == {"pw": True}
    assert [row["level"] for row in sweep["table"]] == [4, 8]


def test_sweep_needs_two_levels(build):
    with pytest.raises(InapplicableError):
        folint.run_sweep(build("warped-torus"), "pw", [8], folint.CheckOptions())


@pytest.mark.parametrize("check_id", ["closed-newton", "closed-general"])
def test_closed_sweeps_converge(build, check_id):
    table, verdicts = folint.run_sweep(build("generic-3-2-1"), check_id, [8, 16, 24], folint.CheckOptions(sphere=4))
    assert verdicts and all(verdicts.values())
    for _, group in table.groupby("formula_id"):
        assert list(group["level"]) == [8, 16, 24]
        assert group["relative_residual"].iloc[-1] < 1e-8


def _rising(structure, check_id, options):
    return [formulas.FormulaReport(check_id, residual=options.grid * 1e-6, normalizer=1.0).classify()]


def test_sweep_flags_growing_residuals(monkeypatch, capsys):
    monkeypatch.setattr(folint, "run_check", _rising)
    table, verdicts = folint.run_sweep(None, "pw", [4, 8, 16], folint.CheckOptions())
    assert verdicts == {"pw": False}
    assert list(table["relative_residual"]) == pytest.approx([4e-6, 8e-6, 16e-6])
    args = ["sweep", "--manifold", "flat-torus-3-1-1", "--formula", "pw", "--grids", "4,8"]
    assert folint.main(args) == folint.EXIT_RESIDUAL
    assert "pw: not monotone" in capsys.readouterr().out


def test_leafwise_levels_set_the_leaf_grid():
    options = folint.at_level(folint.CheckOptions(), "leafwise", 12)
    assert options.grid == options.leaf_grid == 12
    assert folint.at_level(options, "pw", 20).leaf_grid == 12


def test_jsonable():
    value = {1: [np.float64(0.1), math.nan, math.inf], "flag": np.bool_(True), "n": np.int64(3)}
    assert folint._jsonable(value) == {"1": [0.1, None, None], "flag": True, "n": 3}
    assert folint.to_json({"x": 1.0 / 3.0}) == '{\n  "x": 0.3333333333333333\n}\n'
