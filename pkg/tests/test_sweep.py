import pytest

from experiment import storage
from experiment.reproduce import PRESET_ALIASES, preset_names, reproduce, resolve_preset
from experiment.sweep import FPT_COLUMNS, parse_initial_state, sweep_fpt
from utils.config import Config, InitialStateSpec
from utils.errors import ConfigError


@pytest.fixture
def sweep_config():
    return Config.from_dict({
        "model": {"hq_grid": [-0.5, -1.0]},
        "evolution": {"t_max": 1.5, "dt": 0.05, "chi_q": 8},
        "dmrg": {"chi_dmrg": 8},
        "sweep": {"geometries": ["2x2", "4x1"], "initial_states": ["product_fv", "excited1"],
                  "workers": 2},
    })


def test_parse_initial_state():
    assert parse_initial_state("excited2") == InitialStateSpec(kind="excited", k=2)
    base = InitialStateSpec(kind="fv_ground", target=0.3, chi=4)
    spec = parse_initial_state("random_entropy", base)
    assert (spec.kind, spec.target, spec.chi) == ("random_entropy", 0.3, 4)
    with pytest.raises(ConfigError):
        parse_initial_state("thermal")


def test_sweep_table_is_sorted(sweep_config, tmp_path):
    seen = []
    rows = sweep_fpt(sweep_config, str(tmp_path), on_progress=lambda done, total: seen.append(total))
    assert len(rows) == 8
    assert seen == [8] * 8
    assert all(row.status == "ok" for row in rows)
    header, table = storage.read_table(str(tmp_path / "fpt.csv"))
    assert header == list(FPT_COLUMNS)
    assert [float(r[0]) for r in table] == sorted(float(r[0]) for r in table)
    _, partial = storage.read_table(str(tmp_path / "fpt_partial.csv"))
    assert sorted(map(tuple, partial)) == sorted(map(tuple, table))
    reached = [r.result.t_fpt for r in rows if r.result.reached]
    assert all(0.0 <= t <= 1.5 for t in reached)


def test_sweep_tables_record_the_seed(sweep_config, tmp_path):
    sweep_config.set("sampling.seed", 42)
    sweep_fpt(sweep_config, str(tmp_path), hq_grid=[-0.5], geometries=["2x2"],
              initial_states=["product_fv"], workers=1)
    assert storage.table_seed(str(tmp_path / "fpt.csv")) == 42
    assert storage.table_seed(str(tmp_path / "fpt_partial.csv")) == 42


def test_failed_points_do_not_stop_the_sweep(sweep_config, tmp_path):
    sweep_config.set("initial_state.target", 10.0)
    rows = sweep_fpt(sweep_config, str(tmp_path), geometries=["2x2"],
                     initial_states=["product_fv", "random_entropy"], workers=1)
    status = {(r.hq, r.initial_state): r.status for r in rows}
    assert status[(-0.5, "random_entropy")] == "failed"
    assert status[(-0.5, "product_fv")] == "ok"
    _, table = storage.read_table(str(tmp_path / "fpt.csv"))
    assert sum(r[-1] == "failed" for r in table) == 2


def test_empty_grid_is_rejected(sweep_config, tmp_path):
    with pytest.raises(ConfigError):
        sweep_fpt(sweep_config, str(tmp_path), hq_grid=[])


def test_presets(tmp_path):
    assert preset_names() == ["bubbles", "excited", "fpt", "quench"]
    assert resolve_preset("fig3") == "fpt"
    assert {resolve_preset(alias) for alias in PRESET_ALIASES} == set(preset_names())
    with pytest.raises(ConfigError):
        reproduce("fig9", str(tmp_path))
    with pytest.raises(ConfigError):
        reproduce("quench", str(tmp_path), scale=0)


@pytest.mark.slow
def test_quench_preset_at_small_scale(tmp_path):
    manifests = reproduce("quench", str(tmp_path), scale=2)
    assert set(manifests) == {"product_fv", "fv_ground"}
    assert (tmp_path / "fv_ground" / "trajectory.csv").exists()


@pytest.mark.slow
def test_strong_field_fpt_ignores_geometry(tmp_path):
    # deep in the transverse-field regime the decay is set by the site count alone
    config = Config.from_dict({
        "model": {"g": 4.0, "h0": 0.1, "hq_grid": [-0.2]},
        "evolution": {"t_max": 0.3, "dt": 0.005, "chi_q": 32},
        "sweep": {"geometries": ["4x4", "16x1"], "initial_states": ["product_fv"], "workers": 2},
    })
    rows = sweep_fpt(config, str(tmp_path))
    times = {row.geometry: row.result for row in rows}
    assert times["4x4"].reached and times["16x1"].reached
    assert times["4x4"].t_fpt == pytest.approx(times["16x1"].t_fpt, rel=0.1)
    assert times["4x4"].t_fpt == pytest.approx(0.125, rel=0.1)
