import json
import math
from dataclasses import replace

import numpy as np
import pytest

from ergosearch.config import ConfigError, load_config, parse_config, phase_windows
from ergosearch.flowgen import scale_flow
from ergosearch.metrics import lambda_ratio
from ergosearch.scenario import (
    MissionClock,
    build_domain,
    build_flow,
    build_m0,
    run,
    sweep_lambda,
)
from ergosearch.transport import diffusion_coefficient

from .conftest import config_path, small_cavity_text


def test_shipped_configs_parse():
    cav = load_config(config_path("cavity"))
    assert cav.agents.count == 3 and cav.targets.count == 1000
    assert cav.mission.end == 900.0
    g = build_domain(cav)
    assert g.shape == (100, 100)
    assert lambda_ratio(cav.agents.speed, build_flow(cav, g)) == pytest.approx(50.0, rel=1e-9)
    assert build_m0(cav, g).integral() == pytest.approx(1.0, abs=1e-12)

    un = load_config(config_path("unije"))
    assert un.agents.count == 5
    assert un.transport.diffusion == pytest.approx(diffusion_coefficient(330, 10800))
    assert build_domain(un).shape == (80, 200)


def test_unije_phase_windows():
    un = load_config(config_path("unije"))
    phases = un.mission.phases
    assert len(phases) == 6
    assert phases[0][0] == 10800.0
    start, dur = phases[-1]
    assert start + dur == 10800 + 6 * 1500 + 5 * 300
    assert phase_windows(10800, 6, 1500, 300) == phases


def test_mission_clock():
    clock = MissionClock(phase_windows(100, 2, 50, 10))
    assert clock.phase_at(0) == -1
    assert clock.phase_at(100) == 0
    assert clock.phase_at(155) == -1
    assert clock.phase_at(160) == 1
    assert clock.phase_at(210) == -1


@pytest.mark.parametrize("bad", [
    ("h = 0.02", "h = -1"),
    ("edges = wall wall wall wall", "edges = wall wall wall"),
    ("source = cavity_like", "source = vortex"),
    ("[agents]", "[robots]"),
    ("weight = 0.2", "weight = -0.2"),
])
def test_bad_configs_rejected(bad):
    text = small_cavity_text().replace(*bad, 1)
    with pytest.raises(ConfigError):
        parse_config(text)


def test_zero_agents_gives_nothing(tmp_path):
    text = small_cavity_text().replace("count = 3", "count = 0").replace(
        "bases = 0.3 0.05 90, 0.5 0.05 90, 0.6 0.05 90", "bases =")
    res = run(parse_config(text, "idle"), write=False)
    assert abs(res.summary["eta"]) <= 1e-9
    assert res.summary["kappa"] == 0.0


def test_run_outputs_and_record_count(tmp_path):
    cfg = parse_config(small_cavity_text(), "tiny")
    res = run(cfg, out_dir=tmp_path / "out")
    assert len(res.records) == 100
    out = res.output
    for name in ("metrics.csv", "timings.csv", "agents.csv", "targets.csv", "summary.json", "mask.bin", "metrics.png"):
        assert (out / name).exists(), name
    assert (out / "fields" / "m_000050.bin").exists()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["steps"] == 100 and summary["lambda"] == pytest.approx(50.0)
    # agents are still climbing towards the targets after 20 s
    assert abs(summary["eta"]) < 1e-9 and summary["kappa"] == 0.0
    lines = (out / "agents.csv").read_text().splitlines()
    assert len(lines) == 1 + 100 * 3


def test_full_cavity_record_count():
    cfg = load_config(config_path("cavity"))
    res = run(cfg, write=False, horizon=4.0)
    assert len(res.records) == 20
    # the full mission would give 900 / 0.2 steps
    assert int(round(cfg.mission.end / cfg.agents.dt)) == 4500


def test_runs_are_deterministic(tmp_path):
    cfg = parse_config(small_cavity_text(), "tiny")
    a = run(cfg, out_dir=tmp_path / "a")
    b = run(cfg, out_dir=tmp_path / "b")
    assert (a.output / "metrics.csv").read_bytes() == (b.output / "metrics.csv").read_bytes()
    assert (a.output / "targets.csv").read_bytes() == (b.output / "targets.csv").read_bytes()


def test_static_and_dynamic_share_target_paths():
    cfg = parse_config(small_cavity_text(), "tiny")
    dyn = run(cfg, write=False)
    sta = run(cfg.with_mode("static"), write=False)
    np.testing.assert_array_equal(dyn.targets.y, sta.targets.y)
    # static never transports the planning field, so its eta is pure sensing
    assert sta.records[-1].eta_true <= 1.0


def test_unit_scale_reproduces_plain_run():
    cfg = parse_config(small_cavity_text(duration=6.0), "tiny")
    g = build_domain(cfg)
    plain = run(cfg, write=False)
    scaled = run(cfg, write=False, flow=scale_flow(build_flow(cfg, g), 1.0))
    assert [r.eta for r in plain.records] == [r.eta for r in scaled.records]
    assert [r.kappa for r in plain.records] == [r.kappa for r in scaled.records]


def test_sweep_row_count():
    cfg = parse_config(small_cavity_text(duration=4.0, targets=50), "tiny")
    rows = sweep_lambda(cfg, [1000, 50, 10, 1, 0.25], [1.0, 2.0, 4.0])
    assert len(rows) == 5 * 2 * 3
    assert {r["mode"] for r in rows} == {"dynamic", "static"}
    assert sorted({r["lambda"] for r in rows}) == [0.25, 1.0, 10.0, 50.0, 1000.0]
    for r in rows:
        assert 0.0 <= r["kappa"] <= 1.0 and -1e-9 <= r["eta"] <= 1.0


def test_sweep_flow_speed_matches_lambda():
    cfg = parse_config(small_cavity_text(), "tiny")
    g = build_domain(cfg)
    lam0 = lambda_ratio(cfg.agents.speed, build_flow(cfg, g))
    s = lam0 / 0.25
    c2 = replace(cfg, flow=replace(cfg.flow, scale=s))
    assert lambda_ratio(c2.agents.speed, build_flow(c2, g)) == pytest.approx(0.25)
    assert math.isclose(s, 200.0)
