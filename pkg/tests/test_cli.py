import numpy as np
import pytest

from efnet.cli import (CONTINUATION_COLUMNS, PORTRAIT_COLUMNS, TEMPORAL_COLUMNS, ConfigError,
                       load_config, main)


def write_ini(path, body):
    path.write_text(body, encoding="utf-8")
    return path


def data_lines(path):
    lines = path.read_text(encoding="utf-8").splitlines()
    return [ln for ln in lines if not ln.startswith("#")]


@pytest.fixture
def temporal_ini(tmp_path):
    return write_ini(tmp_path / "t.ini", f"""
[experiment]
mode = temporal
output = {tmp_path / 'temporal.csv'}
[network]
n_nodes = 400
[epidemic]
p_si_sweep = 0.5, 0.10
[temporal]
t_max = 20
""")


def test_temporal_output_schema(temporal_ini, tmp_path):
    assert main([str(temporal_ini)]) == 0
    out = tmp_path / "temporal.csv"
    rows = data_lines(out)
    assert rows[0] == ",".join(TEMPORAL_COLUMNS)
    assert len(rows) == 1 + 2 * 2 * 21
    p, label, t, s, i, r = rows[1].split(",")
    assert (p, label, t) == ("0.5", "high", "0")
    assert float(s) + float(i) + float(r) == pytest.approx(1.0)
    text = out.read_text()
    assert text.startswith("# efnet ") and text.endswith("# status: complete\n")


def test_output_header_reproduces_the_file(temporal_ini, tmp_path):
    assert main([str(temporal_ini), "temporal.run_seed=4"]) == 0
    first = tmp_path / "temporal.csv"
    saved = tmp_path / "saved.csv"
    saved.write_bytes(first.read_bytes())
    first.unlink()
    assert main([str(saved)]) == 0
    assert first.read_bytes() == saved.read_bytes()


def test_overrides_take_precedence(temporal_ini):
    cfg = load_config(temporal_ini, ["epidemic.p_si=0.3", "network.graph_seed=9"])
    assert cfg.epidemic.p_si == 0.3 and cfg.graph_seed == 9


@pytest.mark.parametrize("override", ["nosection=1", "network.bogus=1", "network.n_nodes=abc",
                                      "experiment.mode=movie", "epidemic.p_si=2",
                                      "temporal.initial_infected=0.5"])
def test_configuration_errors_exit_with_1(temporal_ini, override, capsys):
    assert main([str(temporal_ini), override]) == 1
    assert "configuration error" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.ini")
    assert main([str(tmp_path / "absent.ini")]) == 1


def test_unwritable_output_exits_with_1(temporal_ini, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main([str(temporal_ini), f"experiment.output={blocker / 'x.csv'}"]) == 1


def test_portrait_output(tmp_path):
    ini = write_ini(tmp_path / "p.ini", f"""
[experiment]
mode = portrait
output = {tmp_path / 'portrait.csv'}
[network]
n_nodes = 400
[portrait]
n_trajectories = 3
t_max = 5
""")
    assert main([str(ini)]) == 0
    rows = data_lines(tmp_path / "portrait.csv")
    assert rows[0] == ",".join(PORTRAIT_COLUMNS)
    assert len(rows) == 1 + 3 * 6
    si0 = [float(r.split(",")[4]) for r in rows[1:] if r.split(",")[1] == "0"]
    assert si0 == sorted(si0) and si0[0] < si0[-1]


def continuation_ini(tmp_path, extra=""):
    return write_ini(tmp_path / "c.ini", f"""
[experiment]
mode = continuation
output = {tmp_path / 'branch.csv'}
[network]
n_nodes = 400
[coarse]
ensemble = 2
[heal]
max_rounds = 2
[continuation]
p_start = 0.3
p_step = -0.01
s_guess = 0.25
i_guess = 0.4
ds = 0.02
n_points = 2
newton_tol = 0.05
p_max = 0.35
{extra}
""")


TINY_NETWORK_NOISE = pytest.mark.filterwarnings("ignore::efnet.numerics.NoiseFloorWarning")


@TINY_NETWORK_NOISE
def test_continuation_output(tmp_path):
    assert main([str(continuation_ini(tmp_path))]) == 0
    out = tmp_path / "branch.csv"
    rows = data_lines(out)
    assert rows[0] == ",".join(CONTINUATION_COLUMNS)
    assert len(rows) == 1 + 4
    assert [r.split(",")[0] for r in rows[1:]] == ["0", "1", "2", "3"]
    assert out.read_text().splitlines()[-1] in ("# status: complete",
                                                "# status: left parameter window")


@TINY_NETWORK_NOISE
def test_solver_failure_exits_with_2_and_keeps_partial_output(tmp_path, capsys):
    ini = continuation_ini(tmp_path, "newton_max_iter = 1")
    assert main([str(ini), "continuation.newton_tol=1e-9"]) == 2
    text = (tmp_path / "branch.csv").read_text()
    assert "# status: aborted" in text
    assert ",".join(CONTINUATION_COLUMNS) in text
    assert "aborted" in capsys.readouterr().err


def test_mode_sections_are_validated_up_front(tmp_path):
    ini = continuation_ini(tmp_path)
    with pytest.raises(ConfigError):
        load_config(ini, ["continuation.p_step=0"])
    assert np.isfinite(load_config(ini).epidemic.p_si)
