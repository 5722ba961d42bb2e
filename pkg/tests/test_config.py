"""Sweep-file parsing, validation diagnostics, and the physics fingerprint."""

import pytest

from monfermi.config import config_hash, load_run_config, parse_config
from monfermi.errors import ParameterError


def write(tmp_path, text):
    path = tmp_path / "run.txt"
    path.write_text(text)
    return str(path)


GOOD = """\
# sweep over measurement strength
gamma = 0.1, 0.2, 0.3
W = 0.0
L = 32, 64   # two sizes
master_seed = 7
t_total = 100.0
t_sat = 60.0
record_interval = 2.0
n_traj = 50
nnn = false
out = results
"""


def test_parse_round_trip(tmp_path):
    cfg = load_run_config(write(tmp_path, GOOD))
    assert cfg.gamma == (0.1, 0.2, 0.3)
    assert cfg.L == (32, 64)
    assert cfg.n_traj == 50 and cfg.n_disorder == 1
    assert cfg.out == "results"
    assert cfg.dt == 0.05  # default
    # cells enumerate gamma x W x L in order; index = seeding cell
    cells = cfg.cells()
    assert len(cells) == 6
    assert cells[0] == (0.1, 0.0, 32)
    assert cells[1] == (0.1, 0.0, 64)
    assert cells[2] == (0.2, 0.0, 32)


def test_unknown_key_reports_line(tmp_path):
    bad = GOOD + "bogus = 3\n"
    with pytest.raises(ParameterError, match=r"line 12.*bogus"):
        parse_config(write(tmp_path, bad))


def test_duplicate_key_rejected(tmp_path):
    bad = GOOD + "W = 1.0\n"
    with pytest.raises(ParameterError, match="duplicate"):
        parse_config(write(tmp_path, bad))


def test_malformed_line_rejected(tmp_path):
    with pytest.raises(ParameterError, match="line 1"):
        parse_config(write(tmp_path, "gamma 0.1\n"))


def test_missing_required_keys(tmp_path):
    with pytest.raises(ParameterError, match="missing required"):
        parse_config(write(tmp_path, "gamma = 0.1\n"))


def test_bad_scalar_and_bool(tmp_path):
    with pytest.raises(ParameterError, match="line 5"):
        parse_config(
            write(
                tmp_path,
                "gamma = 0.1\nW = 0\nL = 8\nmaster_seed = 1\nt_total = soon\n"
                "t_sat = 1\nrecord_interval = 1\n",
            )
        )
    with pytest.raises(ParameterError, match="boolean"):
        parse_config(
            write(
                tmp_path,
                "gamma = 0.1\nW = 0\nL = 8\nmaster_seed = 1\nt_total = 4\n"
                "t_sat = 1\nrecord_interval = 1\nnnn = maybe\n",
            )
        )


def test_negative_values_rejected(tmp_path):
    bad = GOOD.replace("gamma = 0.1, 0.2, 0.3", "gamma = -0.1")
    with pytest.raises(ParameterError, match="gamma"):
        load_run_config(write(tmp_path, bad))


def test_hash_ignores_execution_fields(tmp_path):
    cfg_a = load_run_config(write(tmp_path, GOOD))
    cfg_b = load_run_config(
        write(tmp_path, GOOD.replace("out = results", "out = elsewhere\nworkers = 4"))
    )
    assert config_hash(cfg_a) == config_hash(cfg_b)


def test_hash_tracks_physics_fields(tmp_path):
    cfg_a = load_run_config(write(tmp_path, GOOD))
    cfg_b = load_run_config(write(tmp_path, GOOD.replace("master_seed = 7", "master_seed = 8")))
    cfg_c = load_run_config(write(tmp_path, GOOD.replace("n_traj = 50", "n_traj = 51")))
    assert config_hash(cfg_a) != config_hash(cfg_b)
    assert config_hash(cfg_a) != config_hash(cfg_c)
