import json
import logging
import os
from pathlib import Path

import pytest

from torcanard import cli

RECIPES = Path(__file__).resolve().parents[1] / "recipes"


def _ini(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


SINGULAR = """
[run]
command = singular
model = canonical
name = maxtc

[params]
k = 1

[singular]
family = singular-maximal-TC
"""

HUNT = """
[run]
command = hunt
model = leidenator
name = h

[params]
eps = 0.0100
alpha = 0.20

[hunt]
k_lo = 0.79
k_hi = 0.81
predicate = tonic|bursting
tol_k = 1e-4
"""

SIMULATE = """
[run]
command = simulate
model = canonical
name = sim

[params]
eps = 0.01
k = 2

[simulate]
horizon = 1500
transient = 300
stride = 5
"""


def test_singular_command(tmp_path):
    out = tmp_path / "out"
    assert cli.run(_ini(tmp_path, SINGULAR), out) == cli.EXIT_OK
    doc = json.loads((out / "maxtc.json").read_text())
    assert doc["classification"] == "singular-maximal-TC"
    assert doc["segments"][0]["points"][-1] == [0.0, 0.0]
    assert doc["provenance"]["version"] == cli.__version__
    assert (out / "maxtc.ini").exists()


def test_simulate_command(tmp_path):
    assert cli.run(_ini(tmp_path, SIMULATE), tmp_path) == cli.EXIT_OK
    lines = (tmp_path / "sim.csv").read_text().splitlines()
    assert "# classification: tonic" in lines
    header_end = next(i for i, ln in enumerate(lines) if not ln.startswith("#"))
    assert lines[header_end] == "t,r,theta,mu"
    assert float(lines[-1].split(",")[0]) == 1500.0


def test_simulate_inconclusive_exit(tmp_path):
    text = SIMULATE.replace("k = 2", "k = 0.3\nalpha = 0.2").replace("canonical", "leidenator") \
        .replace("eps = 0.01", "eps = 0.001").replace("horizon = 1500", "horizon = 4500") \
        .replace("transient = 300", "transient = 3000")
    assert cli.run(_ini(tmp_path, text), tmp_path) == cli.EXIT_INCONCLUSIVE
    assert "# classification: inconclusive" in (tmp_path / "sim.csv").read_text()


def test_hunt_preserves_decimal_strings(tmp_path):
    assert cli.run(_ini(tmp_path, HUNT), tmp_path) == cli.EXIT_OK
    doc = json.loads((tmp_path / "h.json").read_text())
    assert doc["provenance"]["config"]["params"] == {"eps": "0.0100", "alpha": "0.20"}
    assert doc["width"] <= 1e-4
    assert 0.79 < doc["k_star"] < 0.81
    assert doc["provenance"]["tol_k"] == 1e-4


def test_tol_k_flag_overrides(tmp_path):
    assert cli.main(["--config", str(_ini(tmp_path, HUNT)), "--out", str(tmp_path), "--tol-k", "1e-3"]) == 0
    doc = json.loads((tmp_path / "h.json").read_text())
    assert doc["provenance"]["tol_k"] == 1e-3
    assert 5e-4 < doc["width"] <= 1e-3


@pytest.mark.parametrize("text", [SINGULAR, SIMULATE])
def test_echo_reruns_to_identical_outputs(tmp_path, text):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.run(_ini(tmp_path, text), a) == 0
    name = next(p for p in a.iterdir() if p.suffix == ".ini")
    assert cli.run(name, b) == 0
    files = sorted(p.name for p in a.iterdir())
    assert files == sorted(p.name for p in b.iterdir())
    for f in files:
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_no_temporary_files_left(tmp_path):
    cli.run(_ini(tmp_path, SINGULAR), tmp_path / "o")
    assert not [p for p in (tmp_path / "o").iterdir() if p.name.startswith(".")]


def test_outputs_respect_umask(tmp_path):
    old = os.umask(0o022)
    try:
        cli.run(_ini(tmp_path, SINGULAR), tmp_path / "o")
    finally:
        os.umask(old)
    assert (tmp_path / "o" / "maxtc.json").stat().st_mode & 0o777 == 0o644


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    assert cli.main(["--config", str(_ini(tmp_path, SINGULAR))]) == 0
    assert (tmp_path / "env" / "maxtc.json").exists()


def test_fastbif_command(tmp_path):
    text = "[run]\ncommand = fastbif\nmodel = canonical\n\n[fastbif]\nn = 50\n"
    assert cli.run(_ini(tmp_path, text), tmp_path) == 0
    special = json.loads((tmp_path / "fastbif.special.json").read_text())["special_points"]
    assert {sp["type"] for sp in special} == {"HB", "SN-of-cycles"}
    lines = (tmp_path / "fastbif.csv").read_text().splitlines()
    assert ",".join(cli.fastbif.BRANCH_COLUMNS) in lines


def test_sweep_command(tmp_path):
    text = ("[run]\ncommand = sweep\nmodel = canonical\n\n[params]\neps = 0.01\n\n"
            "[sweep]\nk_start = 1.5\nk_stop = 2\nk_num = 2\n")
    assert cli.run(_ini(tmp_path, text), tmp_path) == 0
    rows = [ln for ln in (tmp_path / "sweep.csv").read_text().splitlines() if not ln.startswith("#")]
    assert [r.split(",")[3] for r in rows[1:]] == ["tonic", "tonic"]


@pytest.mark.parametrize("edit, needle", [
    (("[singular]", "[singular]\ncolour = red"), "colour"),
    (("[params]", "[extra]\na = 1\n\n[params]"), "[extra]"),
    (("k = 1", "k = one"), "k"),
    (("k = 1", "k = 1\nalpha = 0.2"), "alpha"),
    (("model = canonical", "model = hodgkin"), "model"),
    (("command = singular", "command = plot"), "command"),
    (("family = singular-maximal-TC", "family = singular-bursting"), "singular"),
    (("[run]", "[run]\nspeed = 3"), "speed"),
])
def test_invalid_configs_exit_2_naming_key(tmp_path, caplog, edit, needle):
    text = SINGULAR.replace(*edit)
    with caplog.at_level(logging.ERROR, logger="torcanard"):
        assert cli.run(_ini(tmp_path, text), tmp_path) == cli.EXIT_INVALID
    assert needle in caplog.text


def test_hunt_with_agreeing_ends_exits_2(tmp_path, caplog):
    text = HUNT.replace("k_lo = 0.79", "k_lo = 1.0").replace("k_hi = 0.81", "k_hi = 1.2")
    with caplog.at_level(logging.ERROR, logger="torcanard"):
        assert cli.run(_ini(tmp_path, text), tmp_path) == cli.EXIT_INVALID
    assert "hunt" in caplog.text


def test_missing_file_and_bad_flags(tmp_path):
    assert cli.run(tmp_path / "nope.ini", tmp_path) == cli.EXIT_INVALID
    cfg = str(_ini(tmp_path, SINGULAR))
    assert cli.main(["--config", cfg, "--workers", "0"]) == cli.EXIT_INVALID
    assert cli.main(["--config", cfg, "--tol-k", "1e-15"]) == cli.EXIT_INVALID


@pytest.mark.parametrize("recipe", sorted(p.name for p in RECIPES.glob("*.ini")))
def test_shipped_recipes_validate(recipe):
    cfg = cli.load_config(RECIPES / recipe)
    assert cfg.command in cli.COMMANDS


def test_figure_recipes_present():
    names = {p.stem for p in RECIPES.glob("*.ini")}
    assert {"fig1", "fig2a", "fig2b", "fig2c", "fig2d", "fig5", "fig6"} <= names


def test_cheap_recipes_run(tmp_path):
    assert cli.run(RECIPES / "singular_maximal_tc.ini", tmp_path) == 0
    assert cli.run(RECIPES / "fastbif_wc.ini", tmp_path) == 0
