import os
from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from nsac1d.config import ConfigError, RunConfig, load_config, parse_config, serialize_config
from nsac1d.initial import BUILTINS

MINIMAL = 'n_cells = 128\nepsilon = 0.1\nbeta = 1.0\nt_end = 0.5\nic = "equilibrium"\n'


def test_minimal_config_filled_with_defaults(tmp_path):
    cfg = parse_config(MINIMAL, base_dir=tmp_path)
    assert cfg.n_cells == 128 and cfg.epsilon == 0.1 and cfg.t_end == 0.5
    assert cfg.nu == cfg.gas_const == cfg.c_v == cfg.kappa_tilde == 1.0
    assert cfg.cfl_safety == 0.4 and cfg.picard_tol == 1e-10 and cfg.picard_max_iter == 50
    assert cfg.dt_min == 1e-12
    assert cfg.snapshot_every == 100 and cfg.snapshot_interval is None
    assert cfg.output_dir == os.path.join(str(tmp_path), "output")
    assert not cfg.fail_fast and cfg.seed == 0
    assert cfg.params.epsilon == 0.1 and cfg.step.dt_init == 1e-3


def test_negative_epsilon_names_key():
    with pytest.raises(ConfigError, match="epsilon") as info:
        parse_config(MINIMAL.replace("epsilon = 0.1", "epsilon = -1"))
    assert info.value.key == "epsilon"


def test_unknown_key():
    with pytest.raises(ConfigError, match="unknwon_key") as info:
        parse_config(MINIMAL + "unknwon_key = 3\n")
    assert info.value.key == "unknwon_key"


def test_syntax_error_has_line_number():
    with pytest.raises(ConfigError, match="line 3") as info:
        parse_config("n_cells = 8\nepsilon = 0.1\nbeta = = 1\n")
    assert info.value.line == 3


def test_missing_required_key():
    with pytest.raises(ConfigError, match="t_end"):
        parse_config(MINIMAL.replace("t_end = 0.5\n", ""))


@pytest.mark.parametrize("line, key", [
    ("n_cells = 1", "n_cells"),
    ("n_cells = 2.5", "n_cells"),
    ("t_end = 0", "t_end"),
    ("beta = -0.1", "beta"),
    ("cfl_safety = 2.0", "cfl_safety"),
    ("fail_fast = 1", "fail_fast"),
    ('ic = "no_such_profile"', "ic"),
    ("seed = -1", "seed"),
    ("snapshot_every = 0", "snapshot_every"),
    ("ic_amplitude = 0.7", "ic_amplitude"),
])
def test_constraint_violations_name_their_key(line, key):
    text = "\n".join(l for l in MINIMAL.splitlines() if not l.startswith(line.split()[0] + " "))
    with pytest.raises(ConfigError) as info:
        parse_config(text + "\n" + line + "\n")
    assert info.value.key == key


def test_both_cadences_rejected():
    with pytest.raises(ConfigError, match="snapshot"):
        parse_config(MINIMAL + "snapshot_every = 3\nsnapshot_interval = 0.1\n")


def test_file_initial_condition_resolved(tmp_path):
    (tmp_path / "ic.csv").write_text("index,v,u,theta,phi\n")
    cfg = parse_config(MINIMAL.replace('"equilibrium"', '"ic.csv"'), base_dir=tmp_path)
    assert cfg.ic == str(tmp_path / "ic.csv")
    assert not cfg.ic_is_builtin


def test_load_config_resolves_relative_to_file(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(MINIMAL + 'output_dir = "out"\n')
    assert load_config(path).output_dir == str(tmp_path / "out")
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.toml")


configs = st.builds(
    RunConfig,
    n_cells=st.integers(2, 10**6),
    epsilon=st.floats(1e-6, 10),
    beta=st.floats(0, 5),
    t_end=st.floats(1e-6, 100),
    ic=st.sampled_from(BUILTINS),
    nu=st.floats(1e-3, 10),
    cfl_safety=st.floats(1e-3, 1.0),
    picard_max_iter=st.integers(1, 1000),
    dt_fixed=st.none() | st.floats(1e-8, 1),
    extrapolate=st.booleans(),
    ic_amplitude=st.floats(1e-3, 0.499),
    normalize_energy=st.booleans(),
    fail_fast=st.booleans(),
    seed=st.integers(0, 2**64 - 1),
    output_dir=st.just("/tmp/nsac1d-out"),
)


@given(configs, st.booleans())
def test_parse_serialize_round_trip(cfg, by_interval):
    if by_interval:
        cfg = replace(cfg, snapshot_every=None, snapshot_interval=0.25)
    else:
        cfg = replace(cfg, snapshot_every=7)
    assert parse_config(serialize_config(cfg)) == cfg
