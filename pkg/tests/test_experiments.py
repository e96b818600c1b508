"""实验流程测试（小网格配置）"""
import json

import numpy as np
import pytest

from torus2poles.config import parse_config_text
from torus2poles.errors import EXIT_CONFIG_ERROR, EXIT_OK
from torus2poles.experiments import (
    SELFTEST_CASES,
    ExperimentRunner,
    plateau_interval,
    run_experiment,
    sample_spacetime_pool,
    snap_to_max_locus,
)
from torus2poles.profile import ProfileFn, build_theorem_profile

FAST_SOLVER = """
[solver]
scan_nodes = 64
max_refinements = 4
"""


def make_config(text: str):
    return parse_config_text(text + FAST_SOLVER)


def test_snap_to_max_locus():
    f = build_theorem_profile(0.5)
    assert snap_to_max_locus(f, 0.1) == pytest.approx(0.25)
    assert snap_to_max_locus(f, 0.5) == 0.5
    assert snap_to_max_locus(f, 1.9) == pytest.approx(1.75)
    assert snap_to_max_locus(ProfileFn.constant(1.0), 0.3) == 0.3


def test_classify_flat(tmp_path):
    config = make_config("[experiment]\nname = classify\n[profile]\nkind = constant\n")
    report = run_experiment(config, tmp_path)
    assert report.passed
    assert report.exit_code == EXIT_OK
    manifest = json.loads((tmp_path / "results.json").read_text(encoding="utf-8"))
    assert manifest["status"] == "pass"
    assert manifest["values"]["pole_fraction"] == 1.0
    assert "rotation.csv" in manifest["artifacts"]
    assert "classify_null.svg" in manifest["artifacts"]


def test_results_are_reproducible(tmp_path):
    config = make_config("[experiment]\nname = classify\nseed = 5\n[profile]\nkind = cosine\n")
    run_experiment(config, tmp_path)
    first = (tmp_path / "results.json").read_bytes()
    rotation = (tmp_path / "rotation.csv").read_bytes()
    run_experiment(config, tmp_path)
    assert (tmp_path / "results.json").read_bytes() == first
    assert (tmp_path / "rotation.csv").read_bytes() == rotation


def test_distance_flat(tmp_path):
    config = make_config(
        "[experiment]\nname = distance\n[profile]\nkind = constant\n"
        "[distance]\npairs = 0,0 -> 2,1; 0,0 -> 1,2\noracle_resolution = 8\n"
    )
    report = run_experiment(config, tmp_path)
    assert report.passed, [c.name for c in report.failed]
    names = {c.name for c in report.checks}
    assert {"flat-oracle[0]", "flat-oracle[1]", "distance-oracle[0]"} <= names
    assert "distance-oracle[1]" not in names
    assert (tmp_path / "distance.csv").exists()


def test_displacement_map_plateau(tmp_path):
    config = make_config(
        "[experiment]\nname = displacement-map\n"
        "[lattice]\nmap_classes = 1,0\ngrid_t = 2\ngrid_x = 8\naxis_periods = 2\nsolved_rows = 1\n"
    )
    report = run_experiment(config, tmp_path)
    assert report.passed, [c.name for c in report.failed]
    assert report.values["displacement(1,0)"]["max"] == pytest.approx(2.0, abs=1e-9)
    assert (tmp_path / "displacement-map_k1_0.csv").exists()
    assert (tmp_path / "displacement-map_k1_0.svg").exists()
    assert (tmp_path / "axes.csv").exists()


def test_busemann_requires_base_on_plateau(tmp_path):
    config = make_config("[experiment]\nname = busemann\n[busemann]\nbase = 0, 0\n")
    report = run_experiment(config, tmp_path)
    assert report.exit_code == EXIT_CONFIG_ERROR
    manifest = json.loads((tmp_path / "results.json").read_text(encoding="utf-8"))
    assert manifest["status"] == "error"


def test_selftest_unknown_case(tmp_path):
    config = make_config("[selftest]\ncases = class-a, warp-drive\n")
    report = ExperimentRunner(config, tmp_path).run()
    assert report.exit_code == EXIT_CONFIG_ERROR
    assert "warp-drive" in report.error


def test_selftest_flat_subset(tmp_path):
    config = make_config(
        "[profile]\nkind = constant\n[pole]\npoint = 0, 0\n[busemann]\nbase = 0, 0\n"
        "[selftest]\ncases = class-a, flat-distance, clairaut-conservation\n"
        "flat_pairs = 20\nclairaut_samples = 2\nclairaut_horizon = 20\n"
    )
    report = run_experiment(config, tmp_path)
    assert report.passed, [c.name for c in report.failed]
    names = {c.name for c in report.checks}
    assert {"class-a", "flat-oracle", "flat-boundary-zero", "clairaut-drift", "reversibility"} <= names


def test_selftest_case_names():
    assert len(SELFTEST_CASES) == len(set(SELFTEST_CASES)) == 11
    for case in SELFTEST_CASES:
        assert hasattr(ExperimentRunner, "_case_" + case.replace("-", "_"))


def test_certify_pole_small(tmp_path):
    config = make_config(
        "[experiment]\nname = certify-pole\n"
        "[pole]\nhorizon = 5\nn_angles = 8\ncut_probes = 2\nprobe_times = 2\n"
    )
    report = run_experiment(config, tmp_path)
    assert report.passed, [c.name for c in report.failed]
    assert "pole-volume" in {c.name for c in report.checks}
    assert report.values["pole_fraction"] >= 0.5
    assert (tmp_path / "pole_evidence.csv").exists()


def test_spacetime_pool_covers_whole_circle():
    rng = np.random.default_rng(7)
    pool = sample_spacetime_pool(rng, 200)
    ts = [t for t, _ in pool]
    xs = np.array([x for _, x in pool])
    assert ts == sorted(ts)
    assert all(0.0 <= t < 2.0 for t in ts)
    assert np.all((xs >= 0.0) & (xs < 1.0))
    lo, hi = plateau_interval(build_theorem_profile(0.5))
    assert np.count_nonzero((xs < lo) | (xs > hi)) >= 50
