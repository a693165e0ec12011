import pytest

from brinkman.config import ENV_DATA_DIR, ENV_THREADS, RunConfig, from_yaml, load_config
from brinkman.errors import ConfigError


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    monkeypatch.delenv(ENV_DATA_DIR, raising=False)
    monkeypatch.delenv(ENV_THREADS, raising=False)


def test_defaults_reproduce_first_study_row():
    config = load_config()
    assert config.command == "convergence"
    assert config.mesh_spec() == ("diagonal", 2)
    assert (config.k, config.mu, config.a_star, config.levels) == (1, 1e-3, 10.0, 1)
    study = config.study()
    assert (study.family, study.start, study.levels, study.degree, study.boundary) == ("diagonal", 2, 1, 1, "mixed")


def test_environment(monkeypatch):
    monkeypatch.setenv(ENV_DATA_DIR, "/tmp/brinkman-data")
    monkeypatch.setenv(ENV_THREADS, "4")
    config = load_config()
    assert config.data_dir == "/tmp/brinkman-data"
    assert config.threads == 4


def test_yaml_overrides_environment_and_flags_override_yaml(tmp_path, monkeypatch):
    monkeypatch.setenv(ENV_THREADS, "4")
    path = tmp_path / "run.yaml"
    path.write_text("threads: 2\nk: 2\nmu: 0.01\nreconstruct: false\nmesh: crisscross:4\n")
    config = load_config({"k": 3, "mu": None}, path)
    assert config.threads == 2
    assert config.k == 3
    assert config.mu == 0.01
    assert config.reconstruct is False
    assert config.mesh_spec() == ("crisscross", 4)


@pytest.mark.parametrize("text", ["levels: [1, 2]\n", "solver: cg\nwarp: 9\n", "- a\n- b\n", "k: [\n"])
def test_bad_yaml(tmp_path, text):
    path = tmp_path / "bad.yaml"
    path.write_text(text)
    with pytest.raises(ConfigError):
        from_yaml(path)


def test_empty_yaml_keeps_defaults(tmp_path):
    path = tmp_path / "empty.yaml"
    path.write_text("")
    assert from_yaml(path).as_dict() == RunConfig().as_dict()


@pytest.mark.parametrize("mesh, spec", [
    ("diagonal:8", ("diagonal", 8)),
    ("trisect:3", ("trisect", 3)),
    ("file:meshes/a.mesh", ("file", "meshes/a.mesh", False)),
    ("file:a.mesh:trisect", ("file", "a.mesh", True)),
])
def test_mesh_spec(mesh, spec):
    assert RunConfig(mesh=mesh).mesh_spec() == spec


@pytest.mark.parametrize("mesh", ["diagonal", "hex:4", "diagonal:x", "diagonal:0", "file:", "file:a:b"])
def test_bad_mesh_spec(mesh):
    with pytest.raises(ConfigError):
        RunConfig(mesh=mesh).mesh_spec()


@pytest.mark.parametrize("kappa, spec", [
    ("constant:0.5", ("constant", 0.5)),
    ("contrast:1e6", ("contrast", 1e6)),
    ("file:kappa.txt", ("file", "kappa.txt")),
    ("inclusions:7", ("inclusions", 7)),
    ("inclusions", ("inclusions", 0)),
])
def test_kappa_spec(kappa, spec):
    assert RunConfig(kappa=kappa).kappa_spec() == spec


@pytest.mark.parametrize("kappa", ["constant:0", "constant:abc", "contrast:0.5", "inclusions:x", "file", "wood:1"])
def test_bad_kappa_spec(kappa):
    with pytest.raises(ConfigError):
        RunConfig(kappa=kappa).kappa_spec()


@pytest.mark.parametrize("changes", [
    dict(command="plot"), dict(k=0), dict(k=5), dict(mu=-1.0), dict(a_star=0.0), dict(tol=0.0),
    dict(boundary="periodic"), dict(case="cavity"), dict(command="convergence", case="channel"),
    dict(solver="gmres"), dict(preconditioner="ilu"), dict(levels=0), dict(quad_bump=-1), dict(threads=0),
    dict(family="hex"),
])
def test_validation(changes):
    with pytest.raises(ConfigError):
        RunConfig(**changes).validate()


def test_channel_case_is_allowed_for_solve():
    assert RunConfig(command="solve", case="channel", boundary="channel").validate().case == "channel"


def test_bad_flag_value_type():
    with pytest.raises(ConfigError):
        load_config({"k": "two"})


def test_study_from_contrast():
    study = RunConfig(kappa="contrast:100", mesh="crisscross:4", levels=3).study()
    assert (study.case, study.contrast, study.family, study.start) == ("heterogeneous", 100.0, "crisscross", 4)
    assert study.sizes() == [4, 8, 16]


def test_study_from_constant_kappa():
    assert RunConfig(kappa="constant:0.25").study().kappa == 0.25


@pytest.mark.parametrize("changes", [dict(kappa="inclusions:3"), dict(mesh="file:a.mesh")])
def test_study_rejects_unrefinable_settings(changes):
    with pytest.raises(ConfigError):
        RunConfig(**changes).study()
