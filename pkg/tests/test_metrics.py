import numpy as np
import pytest

from riemgossip.completion import SparseObservations
from riemgossip.gossip import AgentState, ProtocolConfig, init_agents, run
from riemgossip.datagen import SyntheticSpec, generate
from riemgossip.metrics import RunTrace, TraceRow, format_float, read_csv, record, write_csv


def test_empty_trace_is_header_only(tmp_path):
    trace = RunTrace(3, [(1, 2), (2, 3)])
    write_csv(trace, tmp_path / "t.csv")
    text = (tmp_path / "t.csv").read_text()
    assert text == (
        "slot,stepsize,cost_1,cost_2,cost_3,test_rmse_1,test_rmse_2,test_rmse_3,"
        "test_mae_1,test_mae_2,test_mae_3,dist_1_2,dist_2_3\n"
    )


def test_format_float():
    assert format_float(0.1) == "0.1"
    assert format_float(1 / 3) == "0.333333333333"
    assert format_float(None) == ""


@pytest.fixture(scope="module")
def trace():
    inst = generate(SyntheticSpec(20, 45, 2, 3.0, n_agents=3, seed=2))
    agents = init_agents(inst.blocks, inst.heldout, 2, rng=0)
    tr, _ = run(agents, ProtocolConfig(rho=10.0, gamma0=0.05, max_slots=30, trace_every=10))
    return tr


def test_column_count(trace, tmp_path):
    write_csv(trace, tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert len(lines) == 1 + len(trace.rows)
    width = 2 + 3 * 3 + 2
    assert all(len(line.split(",")) == width for line in lines)


def test_round_trip(trace, tmp_path):
    write_csv(trace, tmp_path / "t.csv")
    back = read_csv(tmp_path / "t.csv")
    assert back.n_agents == 3 and back.pairs == [(1, 2), (2, 3)]
    np.testing.assert_array_equal(back.slots(), trace.slots())
    np.testing.assert_allclose(back.costs(), trace.costs(), rtol=1e-11)
    np.testing.assert_allclose(back.distances(), trace.distances(), rtol=1e-11)
    write_csv(back, tmp_path / "u.csv")
    assert (tmp_path / "t.csv").read_bytes() == (tmp_path / "u.csv").read_bytes()


def test_undefined_cells(tmp_path):
    # no held-out entries and antipodal subspaces give empty cells
    e1, e2 = np.array([[1.0], [0.0]]), np.array([[0.0], [1.0]])
    empty = SparseObservations.empty(2, 1)
    agents = [AgentState(1, e1, empty, empty), AgentState(2, e2, empty, empty)]
    trace = RunTrace(2, [(1, 2)])
    row = record(trace, 0, agents)
    assert row.rmse == [None, None] and row.distances == [None]
    write_csv(trace, tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text().splitlines()[1] == "0,0,0,0,,,,,"
    back = read_csv(tmp_path / "t.csv")
    assert np.isnan(back.distances()[0, 0])


def test_missing_cost_rejected(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("slot,stepsize,cost_1,test_rmse_1,test_mae_1\n0,0,,,\n")
    with pytest.raises(ValueError):
        read_csv(path)
