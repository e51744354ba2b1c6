import pytest

from riemgossip.cli import SCENARIOS, XL_SCENARIOS, main
from riemgossip.metrics import read_csv


@pytest.fixture(scope="module")
def instance(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "inst.txt"
    assert main(["generate", "--m", "30", "--n", "100", "--rank", "2", "--os", "5", "--agents", "5", "--seed", "3", "--out", str(path)]) == 0
    return path


def run_cli(tmp_path, *extra, name="t"):
    out = tmp_path / f"{name}.csv"
    code = main(["run", "--out", str(out), *extra])
    return code, out


def test_parallel_summary_lists_rounds(instance, tmp_path, capsys):
    code, out = run_cli(tmp_path, "--data", str(instance), "--variant", "parallel", "--agents", "5", "--slots", "20", "--gamma0", "0.05", "--rho", "10")
    assert code == 0
    summary = out.with_suffix(".summary.txt").read_text()
    assert "rounds: {(1,2), (3,4)} {(2,3), (4,5)}" in summary
    assert summary == capsys.readouterr().out
    for key in ("final_cost:", "final_distance:", "update_counts:", "wall_time_s:"):
        assert key in summary


def test_csv_written_and_deterministic(instance, tmp_path):
    args = ("--data", str(instance), "--slots", "30", "--seed", "4", "--rho", "10", "--gamma0", "0.05")
    _, a = run_cli(tmp_path, *args, name="a")
    _, b = run_cli(tmp_path, *args, name="b")
    assert a.read_bytes() == b.read_bytes()
    trace = read_csv(a)
    assert trace.n_agents == 5 and trace.slots()[-1] == 30


def test_seed_changes_output(instance, tmp_path):
    _, a = run_cli(tmp_path, "--data", str(instance), "--slots", "10", "--seed", "1", name="a")
    _, b = run_cli(tmp_path, "--data", str(instance), "--slots", "10", "--seed", "2", name="b")
    assert a.read_bytes() != b.read_bytes()


def test_figure_and_report(instance, tmp_path):
    fig = tmp_path / "run.png"
    code, out = run_cli(tmp_path, "--data", str(instance), "--slots", "20", "--figure", str(fig))
    assert code == 0 and fig.stat().st_size > 0
    assert main(["report", str(out), "--figure", str(tmp_path / "again.pdf")]) == 0
    assert (tmp_path / "again.pdf").read_bytes().startswith(b"%PDF")


def test_gamma0_grid_reports_choice(instance, tmp_path):
    code, out = run_cli(tmp_path, "--data", str(instance), "--slots", "40", "--rho", "10", "--gamma0-grid", "1e-4,0.05")
    assert code == 0
    summary = out.with_suffix(".summary.txt").read_text()
    assert "gamma0: 0.05 (chosen from 0.0001, 0.05)" in summary


def test_ratings_file(tmp_path):
    ratings = tmp_path / "ratings.csv"
    assert main(["generate", "--ratings", "--users", "80", "--movies", "40", "--count", "1500", "--out", str(ratings)]) == 0
    code, out = run_cli(tmp_path, "--data", str(ratings), "--agents", "4", "--rank", "3", "--slots", "20", "--rho", "100", "--gamma0", "1e-3")
    assert code == 0
    summary = out.with_suffix(".summary.txt").read_text()
    assert "final_test_nmae:" in summary and "size: 40 x 80" in summary


@pytest.mark.parametrize(
    "argv",
    [
        ["--data", "/nonexistent/file.csv"],
        ["--variant", "parallel", "--agents", "2", "--slots", "1"],
        ["--gamma0-grid", "a,b"],
        ["--rho", "-1", "--slots", "1"],
    ],
)
def test_errors_exit_nonzero(argv, instance, tmp_path, capsys):
    if argv[:1] != ["--data"]:
        argv = ["--data", str(instance)] + argv
    code, _ = run_cli(tmp_path, *argv)
    assert code == 2
    assert "error" in capsys.readouterr().err


def test_bad_flag_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["run", "--variant", "nope"])
    assert exc.value.code == 2


def test_presets():
    assert set(SCENARIOS) == set(XL_SCENARIOS)
    case1 = SCENARIOS["case1-small"]
    assert (case1.synthetic.m, case1.synthetic.n, case1.synthetic.r, case1.synthetic.os, case1.agents) == (500, 5000, 5, 6.0, 6)
    assert XL_SCENARIOS["case1-small"].synthetic.n == 100_000
    # large rho caps the default initial stepsize
    assert case1.default_gamma0(1e3) == 1e-2
    assert case1.default_gamma0(1e10) == pytest.approx(1e-8)


def test_xl_ratings_requires_data(tmp_path, capsys):
    code, _ = run_cli(tmp_path, "--scenario", "case5-small", "--xl")
    assert code == 2
    assert "--data" in capsys.readouterr().err
