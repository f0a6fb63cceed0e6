"""
アブレーション・スイープのテスト
"""

import json

import pytest

from errors import ConfigError
from run_config import SimConfig, with_section
from sweep_runner import (
    ABLATIONS,
    SweepCell,
    SweepRunner,
    apply_ablation,
    cell_config,
    ordering_verdict,
    sweep,
    write_report,
)


@pytest.fixture
def short_config():
    config = with_section(SimConfig(), "sim", duration=1.0)
    return with_section(config, "analysis", trim_seconds=0.2)


def _quiet(message):
    pass


def test_apply_ablation_switches_components():
    for name, (fkm, lqr) in ABLATIONS.items():
        config = apply_ablation(SimConfig(), name)
        assert config.fkm.enabled is fkm
        assert config.lqr.enabled is lqr
    with pytest.raises(ConfigError):
        apply_ablation(SimConfig(), "lqr_only")


def test_cell_config():
    cell = SweepCell("stairs", 1.2, "fkm", 4)
    config = cell_config(SimConfig(), cell)
    assert config.terrain.kind == "stairs"
    assert config.turn.omega == 1.2
    assert config.sim.seed == 4
    assert config.fkm.enabled and not config.lqr.enabled
    assert cell.label == "stairs_w1.2_fkm_s4"


def test_ordering_verdict():
    verdict = ordering_verdict({"baseline": 0.017, "fkm": 0.003, "asc": 0.0012})
    assert verdict["holds"] is True
    assert verdict["fkm_over_asc"] == pytest.approx(1.5)

    assert ordering_verdict({"baseline": 0.017, "fkm": 0.003, "asc": 0.0029})["holds"] is False
    assert ordering_verdict({"baseline": 0.017, "fkm": 0.003})["holds"] is None


def test_empty_ablation_list_gives_empty_report(short_config):
    report = SweepRunner(short_config).run([], seeds=[1, 2], progress_callback=_quiet)
    assert report["cells"] == []
    assert report["summary"] == []
    assert report["ordering"] == []
    assert report["units"]["spin_radius"] == "m"


def test_unknown_ablation_is_rejected(short_config):
    with pytest.raises(ConfigError):
        SweepRunner(short_config).run(["baseline", "magic"], seeds=[1])


def test_report_structure(short_config, tmp_path):
    messages = []
    report = SweepRunner(short_config, log_dir=str(tmp_path / "logs")).run(
        ["baseline", "fkm", "asc"], seeds=[1, 2, 3, 4, 5], progress_callback=messages.append
    )

    assert len(report["cells"]) == 15
    assert len(messages) == 15
    assert all(cell["status"] == "ok" for cell in report["cells"])
    assert [c["seed"] for c in report["cells"][:5]] == [1, 2, 3, 4, 5]
    assert len(list((tmp_path / "logs").glob("*.csv"))) == 15

    assert len(report["summary"]) == 3
    for entry in report["summary"]:
        assert entry["n_ok"] == 5 and entry["n_failed"] == 0
        assert set(entry["metrics"]["spin_radius"]) == {"mean", "sd"}

    assert len(report["ordering"]) == 1
    assert report["ordering"][0]["holds"] in (True, False)
    assert report["omega_trend"] == []

    path = tmp_path / "report.json"
    write_report(report, str(path))
    assert json.loads(path.read_text(encoding="utf-8"))["seeds"] == [1, 2, 3, 4, 5]


def test_omega_trend_is_reported(short_config):
    report = sweep(short_config, ["baseline"], [1], omegas=[1.2, 0.8], progress_callback=_quiet)
    assert len(report["omega_trend"]) == 1
    trend = report["omega_trend"][0]
    assert trend["omegas"] == [0.8, 1.2]
    assert len(trend["mean_error"]) == 2


def test_failed_cell_is_recorded(short_config):
    config = with_section(short_config, "analysis", trim_seconds=10.0)
    report = SweepRunner(config).run(["asc"], seeds=[1, 2], progress_callback=_quiet)
    assert [c["status"] for c in report["cells"]] == ["failed", "failed"]
    assert report["cells"][0]["error_type"] == "InsufficientDataError"
    assert report["summary"][0]["n_failed"] == 2
    assert report["summary"][0]["metrics"] == {}
    assert report["ordering"] == []


def test_should_stop_skips_remaining_cells(short_config):
    report = SweepRunner(short_config).run(
        ["baseline"], seeds=[1, 2, 3],
        progress_callback=_quiet,
        should_stop_callback=lambda: True,
    )
    assert report["cells"] == []


@pytest.mark.slow
def test_parallel_workers_match_sequential(short_config):
    sequential = SweepRunner(short_config).run(["fkm"], seeds=[1, 2], progress_callback=_quiet)
    parallel = SweepRunner(short_config, workers=2).run(["fkm"], seeds=[1, 2], progress_callback=_quiet)
    assert parallel["cells"] == sequential["cells"]
