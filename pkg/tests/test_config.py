"""Tests for run configuration: defaults, environment, config files and overrides."""
import pytest

from elastica_obstacle.config import RunConfig, read_config_file
from elastica_obstacle.exceptions import ConfigError
from elastica_obstacle.solver import Obstacle


def test_defaults(monkeypatch):
    for name in ("ELASTICA_GRID_N", "ELASTICA_TOL", "ELASTICA_MAX_ITER", "ELASTICA_WORKERS"):
        monkeypatch.delenv(name, raising=False)
    config = RunConfig.from_sources("threshold")
    assert config.p == 2.0
    assert config.N == 512
    assert config.tol == 5e-7
    assert config.max_iter == 20000
    assert config.workers == 4
    assert config.G == "eu_p"


def test_environment_overrides_defaults(monkeypatch):
    monkeypatch.setenv("ELASTICA_GRID_N", "256")
    monkeypatch.setenv("ELASTICA_WORKERS", "2")
    config = RunConfig.from_sources("threshold")
    assert config.N == 256
    assert config.workers == 2


def test_bad_environment_value(monkeypatch):
    monkeypatch.setenv("ELASTICA_GRID_N", "many")
    with pytest.raises(ConfigError):
        RunConfig.from_sources("threshold")


def test_config_file_and_precedence(tmp_path, monkeypatch):
    """CLI flag > config file > environment."""
    monkeypatch.setenv("ELASTICA_GRID_N", "1024")
    path = tmp_path / "run.cfg"
    path.write_text("p=3\nobstacle.h=0.5\ngrid.N=128\nsymmetric=true\nepsilon_schedule=1e-2,1e-4\n")
    config = RunConfig.from_sources("solve", {"p": 2.5, "tol": None}, str(path))
    assert config.p == 2.5
    assert config.height == 0.5
    assert config.N == 128
    assert config.symmetric is True
    assert config.epsilon_schedule == (1e-2, 1e-4)
    options = config.solver_options()
    assert options.N == 128 and options.symmetric
    resolved = config.resolved()
    assert resolved["epsilon_schedule"] == [1e-2, 1e-4]
    assert resolved["config_file"] == str(path)


def test_unknown_config_key(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("p=2\nobstacle.width=3\n")
    with pytest.raises(ConfigError, match="obstacle.width"):
        read_config_file(str(path))
    with pytest.raises(ConfigError):
        read_config_file(str(tmp_path / "missing.cfg"))


def test_unparsable_values(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("symmetric=maybe\n")
    with pytest.raises(ConfigError):
        RunConfig.from_sources("threshold", config_file=str(path))
    with pytest.raises(ConfigError):
        RunConfig.from_sources("threshold", {"p": "two"})


@pytest.mark.parametrize(
    "command,overrides",
    [
        ("solve", {}),
        ("solve", {"height": 0.4, "N": 32}),
        ("solve", {"height": 0.4, "N": 129, "symmetric": True}),
        ("threshold", {"p": 1.0}),
        ("curve", {"lam": -1.0}),
        ("threshold", {"fmt": "xml"}),
        ("sweep", {"p_list": ()}),
        ("launch", {}),
    ],
)
def test_invalid_configurations(command, overrides):
    with pytest.raises(ConfigError):
        RunConfig.from_sources(command, overrides)


def test_obstacle_and_shape_builders():
    config = RunConfig.from_sources("solve", {"height": 0.3, "obstacle_kind": "cone", "theta": 0.4, "G": "tanh"})
    psi = config.obstacle()
    assert psi.kind == "cone"
    assert psi(0.4) == pytest.approx(0.3)
    assert config.shape_function().name == "tanh"
    with pytest.raises(ConfigError):
        RunConfig.from_sources("solve", {"height": 0.3, "G": "cubic"}).shape_function()


def test_sampled_obstacle_from_file(tmp_path):
    path = tmp_path / "bump.csv"
    Obstacle.symmetric_cone(0.3).to_frame().to_csv(path, index=False)
    config = RunConfig.from_sources("solve", {"obstacle_kind": "sampled", "obstacle_file": str(path)})
    psi = config.obstacle()
    assert psi.kind == "sampled"
    assert psi(0.5) == pytest.approx(0.3)
    with pytest.raises(ConfigError):
        RunConfig.from_sources("solve", {"obstacle_kind": "sampled"})

    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"obstacle.kind=sampled\nobstacle.file={path}\n")
    assert RunConfig.from_sources("solve", config_file=str(cfg)).obstacle_file == str(path)

    bad = tmp_path / "bad.csv"
    bad.write_text("t,value\n0,-0.25\n0.5,0.3\n1,-0.25\n")
    with pytest.raises(ConfigError):
        RunConfig.from_sources("solve", {"obstacle_kind": "sampled", "obstacle_file": str(bad)}).obstacle()
    with pytest.raises(ConfigError):
        RunConfig.from_sources(
            "solve", {"obstacle_kind": "sampled", "obstacle_file": str(tmp_path / "missing.csv")}
        ).obstacle()
