import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deltaloc.cli import main
from deltaloc.config import ExperimentConfig, KnnConfig, load_config, save_config
from deltaloc.datasets import (
    TrajectoryFormatError,
    corridor_cells,
    parse_trajectories,
    project_latlon,
    random_walk_chain,
    read_pois,
    synthetic_scenario,
    write_cell_csv,
    write_pois,
)
from deltaloc.experiment import knn_eval, knn_table, read_release_log, run_experiment
from deltaloc.grid import GridConfig
from deltaloc.markov import load_transition

SMALL = GridConfig(0.0, 0.0, 0.34, 8, 8)


def _cfg(tmp_path=None, **kw):
    base = dict(grid=SMALL, seed=3, repetitions=1)
    base.update(kw)
    cfg = ExperimentConfig(**base)
    cfg.synthetic.n_trajectories = 2
    cfg.synthetic.length = 15
    if tmp_path is not None:
        cfg.base_dir = str(tmp_path)
    return cfg


# --- config ---------------------------------------------------------------


def test_config_round_trip(tmp_path):
    cfg = _cfg(epsilon=0.5, mechanism="LM", initial="first", knn=KnnConfig(3, [3, 6]))
    cfg.data.alpha = 0.25
    cfg.projection.ref_lat = 39.9
    save_config(cfg, tmp_path / "c.toml")
    back = load_config(tmp_path / "c.toml")
    assert back == cfg
    assert back.base_dir == str(tmp_path)


@settings(max_examples=50, deadline=None)
@given(
    st.floats(0.01, 10), st.floats(0, 0.5), st.sampled_from(["PIM", "LM"]),
    st.integers(0, 2**63), st.integers(1, 50),
)
def test_config_round_trip_property(eps, delta, mech, seed, reps):
    cfg = _cfg(epsilon=eps, delta=delta, mechanism=mech, seed=seed, repetitions=reps)
    assert ExperimentConfig.from_toml(cfg.to_toml()) == cfg


@pytest.mark.parametrize("bad", [
    'epsilon = -1\n', 'mechanism = "XM"\n', 'colour = 1\n', 'initial = "random"\n',
])
def test_config_rejects(bad, tmp_path):
    text = bad + '[grid]\nmin_x = 0.0\nmin_y = 0.0\ncell_size = 1.0\nrows = 2\ncols = 2\n'
    with pytest.raises(ValueError):
        ExperimentConfig.from_toml(text)


# --- parsing --------------------------------------------------------------


def test_parse_cell_csv(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("timestamp,cell\n0,0\n1,1\n2,2\n")
    np.testing.assert_array_equal(parse_trajectories(p, "cell-csv", SMALL).cells, [0, 1, 2])


def test_parse_drops_off_grid(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("0,0\n1,999\n2,2\n")
    with pytest.warns(UserWarning, match="dropped 1"):
        parsed = parse_trajectories(p, "cell-csv", SMALL)
    assert parsed.dropped == 1
    np.testing.assert_array_equal(parsed.cells, [0, 2])


def test_parse_rejects_non_monotone(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("timestamp,cell\n0,0\n5,1\n4,2\n")
    with pytest.raises(TrajectoryFormatError, match=":4:"):
        parse_trajectories(p, "cell-csv", SMALL)


def test_parse_rejects_bad_rows(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("0,0,7\n")
    with pytest.raises(TrajectoryFormatError, match="expected 2 fields"):
        parse_trajectories(p, "cell-csv", SMALL)
    p.write_text("0,abc\n")
    with pytest.raises(TrajectoryFormatError):
        parse_trajectories(p, "cell-csv", SMALL)


def test_parse_latlon_iso(tmp_path):
    g = GridConfig(0.0, 0.0, 1.0, 5, 5)
    # 0.01 deg of latitude is about 1.11 km
    p = tmp_path / "t.csv"
    p.write_text(
        "time,lat,lon\n"
        "2008-10-23T02:53:04,40.005,116.005\n"
        "2008-10-23T02:53:10,40.025,116.005\n"
        "2008-10-23T02:53:15,41.0,116.0\n"
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        parsed = parse_trajectories(p, "latlon-csv", g, origin_lat=40.0, origin_lon=116.0)
    np.testing.assert_array_equal(parsed.cells, [0, 10])
    assert parsed.dropped == 1


def test_projection_scale():
    xy = project_latlon([1.0], [1.0], 0.0, 0.0, 0.0)[0]
    np.testing.assert_allclose(xy, [111.195, 111.195], rtol=1e-4)
    # longitude shrinks with the cosine of the reference latitude
    xy60 = project_latlon([0.0], [1.0], 0.0, 0.0, 60.0)[0]
    assert xy60[0] == pytest.approx(0.5 * xy[0])


def test_poi_round_trip(tmp_path):
    pts = np.array([[0.1, 2.0], [3.5, -1.25]])
    write_pois(tmp_path / "p.csv", pts)
    np.testing.assert_array_equal(read_pois(tmp_path / "p.csv"), pts)


# --- synthetic scenarios --------------------------------------------------


def test_random_walk_chain_structure():
    M = random_walk_chain(SMALL, stay=0.2)
    np.testing.assert_allclose(np.asarray(M.sum(axis=1)).ravel(), 1.0)
    assert M[0, 0] == pytest.approx(0.2) and M[0, 1] == pytest.approx(0.4)
    assert M[0, 9] == 0.0


def test_corridor_stays_in_band(rng):
    M, trajs, support = synthetic_scenario("corridor", SMALL, 3, 40, 0.2, rng)
    assert set(support.tolist()) == set(corridor_cells(SMALL).tolist())
    for t in trajs:
        assert set(t.tolist()) <= set(support.tolist())
    with pytest.raises(ValueError):
        synthetic_scenario("spiral", SMALL, 1, 5, 0.2, rng)


# --- kNN ------------------------------------------------------------------


def test_knn_identity(rng):
    pois = rng.random((30, 2))
    assert knn_eval((0.5, 0.5), (0.5, 0.5), pois, 5, 5) == (1.0, 1.0)


def test_knn_all_pois(rng):
    pois = rng.random((30, 2))
    p, r = knn_eval((0.1, 0.9), (0.5, 0.5), pois, 5, 30)
    assert r == 1.0 and p == pytest.approx(5 / 30)


def test_knn_tie_goes_to_lower_index():
    pois = np.array([[1.0, 0.0], [-1.0, 0.0], [5.0, 5.0]])
    assert knn_eval((0, 0), (-1.0, 0.1), pois, 1, 1) == (0.0, 0.0)
    assert knn_eval((0, 0), (1.0, 0.1), pois, 1, 1) == (1.0, 1.0)


def test_knn_argument_checks(rng):
    pois = rng.random((4, 2))
    with pytest.raises(ValueError):
        knn_eval((0, 0), (0, 0), pois, 3, 2)
    with pytest.raises(ValueError):
        knn_eval((0, 0), (0, 0), pois, 2, 5)


# --- experiment -----------------------------------------------------------


def test_run_writes_outputs(tmp_path):
    report, rows = run_experiment(_cfg(), tmp_path)
    assert (tmp_path / "metrics.json").exists()
    log = read_release_log(tmp_path / "releases.jsonl")
    assert log == json.loads(json.dumps(rows))
    assert report.n_steps == len(rows) == 30
    drift = np.mean([r["drifted"] for r in log])
    assert report.drift_ratio == pytest.approx(drift)


def test_run_csv_format(tmp_path):
    run_experiment(_cfg(), tmp_path, "csv")
    lines = (tmp_path / "metrics.csv").read_text().splitlines()
    assert lines[0] == "t,n,mean_delta_size,drift_ratio,mean_distance"
    assert len(lines) == 16


def test_run_from_files(tmp_path):
    write_cell_csv(tmp_path / "a.csv", [0, 1, 9, 10, 2])
    write_cell_csv(tmp_path / "b.csv", [3, 4, 4, 5])
    write_pois(tmp_path / "pois.csv", np.random.default_rng(0).random((25, 2)) * 2.7)
    cfg = _cfg(tmp_path, knn=KnnConfig(2, [2, 4]))
    cfg.data.trajectories = ["[ab].csv"]
    cfg.data.pois = "pois.csv"
    report, rows = run_experiment(cfg)
    assert report.n_trajectories == 2 and report.n_steps == 9
    assert [k["k_prime"] for k in report.knn] == [2, 4]
    assert report.knn[0]["recall"] <= report.knn[1]["recall"]


def test_zero_delta_full_support_no_drift():
    report, _ = run_experiment(_cfg(delta=0.0))
    assert report.drift_ratio == 0.0


def test_pim_beats_lm_on_corridor():
    res = {}
    for mech in ("PIM", "LM"):
        cfg = _cfg(mechanism=mech, delta=0.01, repetitions=3)
        cfg.synthetic.kind = "corridor"
        cfg.synthetic.n_trajectories = 3
        cfg.synthetic.length = 40
        res[mech] = run_experiment(cfg)[0].mean_distance
    assert res["PIM"] < res["LM"]


def test_runs_are_reproducible(tmp_path):
    run_experiment(_cfg(repetitions=2), tmp_path / "a")
    run_experiment(_cfg(repetitions=2), tmp_path / "b")
    for name in ("metrics.json", "releases.jsonl"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_knn_table_shape():
    rows = [{"z_x": 0.0, "z_y": 0.0, "true_x": 0.0, "true_y": 0.0}]
    pois = np.random.default_rng(1).random((10, 2))
    assert knn_table(rows, pois, 2, [2, 3])[0]["precision"] == 1.0


# --- CLI ------------------------------------------------------------------


def test_cli_learn(tmp_path, capsys):
    (tmp_path / "t.csv").write_text("timestamp,cell\n0,0\n1,1\n2,2\n")
    assert main(["learn", str(tmp_path / "t.csv"), "--out", str(tmp_path)]) == 0
    M = load_transition(tmp_path / "transition.txt")
    assert M.shape == (3, 3)
    np.testing.assert_allclose(np.asarray(M.sum(axis=1)).ravel(), 1.0)


def test_cli_run_twice_identical(tmp_path):
    save_config(_cfg(), tmp_path / "c.toml")
    for out in ("a", "b"):
        assert main(["run", "--config", str(tmp_path / "c.toml"), "--seed", "7",
                     "--out", str(tmp_path / out)]) == 0
    assert (tmp_path / "a" / "metrics.json").read_bytes() == \
        (tmp_path / "b" / "metrics.json").read_bytes()


def test_cli_audit_pass_and_sabotage(tmp_path):
    common = ["audit", "--cells", "0,1", "--samples", "200000", "--seed", "1"]
    assert main(common + ["--out", str(tmp_path / "ok")]) == 0
    assert json.loads((tmp_path / "ok" / "audit.json").read_text())["passed"] is True
    assert main(common + ["--mechanism-epsilon", "2", "--out", str(tmp_path / "bad")]) == 1


def test_cli_knn(tmp_path):
    save_config(_cfg(), tmp_path / "c.toml")
    main(["run", "--config", str(tmp_path / "c.toml"), "--out", str(tmp_path)])
    write_pois(tmp_path / "p.csv", np.random.default_rng(0).random((30, 2)) * 2.7)
    assert main(["knn", "--log", str(tmp_path / "releases.jsonl"), "--pois",
                 str(tmp_path / "p.csv"), "--k", "3", "--k-prime", "3,6",
                 "--format", "csv", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "knn.csv").read_text().splitlines()
    assert lines[0] == "k,k_prime,precision,recall" and len(lines) == 3


def test_cli_usage_errors():
    for argv in (["frobnicate"], ["run", "--bogus"], []):
        with pytest.raises(SystemExit) as info:
            main(argv)
        assert info.value.code == 2


def test_cli_runtime_error(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "missing.toml")]) == 1
    assert "error" in capsys.readouterr().err
