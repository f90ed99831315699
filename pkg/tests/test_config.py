import dataclasses

import pytest

from spinrelax.config import ConfigError, RunConfig, defaults, load_config, parse_config

MINIMAL = """
[spin]
S = 2
D = -1

[grid]
temperatures = 0.5, 1.0
"""

FULL = """
[spin]
S = 1.5
D = -2.5
E = 0.1
g = 2.1
field_direction = 0, 0.5, 1
extra_terms = 0.5*Sp^4 + 0.5*Sm^4:0.001
pairing_threshold = 0.3

[bath]
form = ohmic
alpha = 2e-4
cutoff = 7.5
couplings = Sx*Sz + Sz*Sx; Sx*Sx - Sy*Sy
strength = 1.5

[grid]
temperatures = linspace(0.2, 2, 4)
temperature_unit = kelvin
fields = 0, 0.01

[methods]
methods = nonsecular, reduced, secular_eigen
basis = both
order = 3

[tolerances]
overlap_threshold = 0.4
sc_tol = 1e-9
max_iter = 50
damping = 0.5
term_tol = 1e-8
max_order = 6
bracket = false

[tunneling]
temperature = 0.3
pair = 1
bias = -0.01, 0.01, 5

[output]
csv = out.csv
plot_prefix = p_
"""


def test_minimal_gets_defaults():
    cfg = parse_config(MINIMAL)
    d = defaults()
    assert cfg.temperatures == (0.5, 1.0)
    for name, value in d.items():
        if name not in ("S", "D", "temperatures"):
            assert getattr(cfg, name) == value, name
    want = dataclasses.replace(RunConfig(), S=2.0, D=-1.0, temperatures=(0.5, 1.0))
    assert cfg.echo() == want.echo()
    assert "alpha = 0.001" in cfg.echo()


def test_unknown_key_rejected_by_name():
    text = MINIMAL.replace("temperatures", "tempratures")
    with pytest.raises(ConfigError, match="tempratures"):
        parse_config(text)


def test_unknown_key_warns_when_lenient():
    text = MINIMAL + "\n[bath]\ncolour = blue\n"
    with pytest.warns(UserWarning, match="colour"):
        cfg = parse_config(text, strict=False)
    assert cfg.warnings == ("unknown key 'colour' in section [bath]",)


def test_full_round_trip():
    cfg = parse_config(FULL)
    assert cfg.temperatures == (0.2, 0.8, 1.4, 2.0)
    assert cfg.extra_terms == (("0.5*Sp^4 + 0.5*Sm^4", 0.001),)
    assert cfg.bracket is False and cfg.order == "3"
    again = parse_config(cfg.echo())
    assert again == cfg
    assert again.echo() == cfg.echo()


@pytest.mark.parametrize("grid", ["", "1, 0.5", "0.5, 0.5", "-1, 1", "a, b"])
def test_invalid_temperature_grid(grid):
    with pytest.raises(ConfigError):
        parse_config(MINIMAL.replace("0.5, 1.0", grid))


@pytest.mark.parametrize("section,line", [
    ("methods", "methods = nonsecular, magic"),
    ("methods", "basis = diagonal"),
    ("methods", "order = -1"),
    ("tolerances", "damping = 0"),
    ("tolerances", "bracket = maybe"),
    ("spin", "field_direction = 0, 0, 0"),
    ("grid", "fields = 0.01, 0"),
    ("bath", "form = tabulated"),
])
def test_invalid_values(section, line):
    text = MINIMAL + f"\n[{section}]\n{line}\n" if section not in ("spin", "grid") else \
        MINIMAL.replace(f"[{section}]\n", f"[{section}]\n{line}\n")
    with pytest.raises(ConfigError):
        parse_config(text)


def test_malformed_text():
    with pytest.raises(ConfigError):
        parse_config("temperatures = 1\n")


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.ini")


def test_load_file(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text(MINIMAL, encoding="utf-8")
    assert load_config(p) == parse_config(MINIMAL)


def test_reduced_bases():
    assert parse_config(FULL).reduced_bases() == ("localized", "eigen")
    assert parse_config(MINIMAL).reduced_bases() == ("localized",)
