import numpy as np
import pytest

from rdlab.config import (ConfigError, ExpressionError, compile_expression,
                          parse_config, serialize_config)

MINIMAL_RD = """
[scenario]
kind = rd
id = minimal

[network]
alpha = 1 1 0 0
beta = 0 0 1 1

[initial]
species_1 = 1
species_2 = 1
species_3 = 1
species_4 = 1
"""


class TestExpressions:
    def test_profile_evaluates_on_grid(self):
        expr = compile_expression("1 + 0.3*cos(pi*x)")
        x = (np.arange(200) + 0.5) / 200.0
        values = expr(x)
        assert values.shape == (200,)
        assert np.allclose(values, 1.0 + 0.3 * np.cos(np.pi * x))
        assert expr.uses_x

    def test_caret_means_power(self):
        expr = compile_expression("2 + x^2")
        assert expr(np.array([3.0]))[0] == 11.0

    def test_constants_and_functions(self):
        expr = compile_expression("exp(1) - e + sin(0)")
        assert abs(expr(np.array([0.0]))[0]) <= 1e-15
        assert not expr.uses_x

    def test_constant_broadcasts(self):
        expr = compile_expression("0.25")
        assert np.array_equal(expr(np.zeros(5)), np.full(5, 0.25))

    @pytest.mark.parametrize("bad", [
        "foo(x)", "x + y", "__import__('os')", "x @ x", "lambda: 1",
        "sin(x, 2)", "'text'",
    ])
    def test_rejects_unknown_syntax(self, bad):
        with pytest.raises(ExpressionError):
            compile_expression(bad)


class TestParseConfig:
    def test_minimal_config_gets_defaults(self):
        cfg = parse_config(MINIMAL_RD)
        assert cfg.kind == "rd"
        assert cfg.dt == 1e-3
        assert cfg.n_cells == 200
        assert cfg.tol == 1e-10
        assert cfg.domain_length == 1.0
        assert cfg.sample_every == 10
        assert cfg.reactants == (1, 1, 0, 0)
        assert cfg.products == (0, 0, 1, 1)
        assert cfg.rate_forward == 1.0

    def test_catalyzer_reported_with_code(self):
        text = MINIMAL_RD.replace("beta = 0 0 1 1", "beta = 0 1 1 1")
        with pytest.raises(ConfigError) as err:
            parse_config(text)
        codes = {issue.code for issue in err.value.issues}
        assert "catalyzer-species" in codes

    def test_sign_change_required(self):
        text = MINIMAL_RD.replace("alpha = 1 1 0 0", "alpha = 1 1 1 1") \
                         .replace("beta = 0 0 1 1", "beta = 2 3 2 2")
        with pytest.raises(ConfigError) as err:
            parse_config(text)
        assert "no-sign-change" in {issue.code for issue in err.value.issues}

    def test_all_errors_collected(self):
        text = """
[scenario]
kind = rd

[network]
alpha = 1 1 0
beta = 0 1 1
l = -1

[initial]
species_1 = 1
species_2 = nope(
species_3 = 1

[mystery]
value = 2
"""
        with pytest.raises(ConfigError) as err:
            parse_config(text)
        codes = [issue.code for issue in err.value.issues]
        assert "catalyzer-species" in codes
        assert "bad-value" in codes
        assert "bad-expression" in codes
        assert "unknown-key" in codes
        assert len(codes) >= 4

    def test_issue_paths_point_at_fields(self):
        text = MINIMAL_RD.replace("species_4 = 1", "species_4 = sin(")
        with pytest.raises(ConfigError) as err:
            parse_config(text)
        paths = [issue.path for issue in err.value.issues]
        assert "initial.species_4" in paths

    def test_missing_species_reported(self):
        text = MINIMAL_RD.replace("species_4 = 1\n", "")
        with pytest.raises(ConfigError) as err:
            parse_config(text)
        assert any(i.code == "missing-field" and "species_4" in i.path
                   for i in err.value.issues)

    def test_ode_requires_constant_initial(self):
        text = MINIMAL_RD.replace("kind = rd", "kind = ode") \
                         .replace("species_1 = 1", "species_1 = 1 + x")
        with pytest.raises(ConfigError) as err:
            parse_config(text)
        assert "nonconstant-initial" in {i.code for i in err.value.issues}

    def test_unknown_kind(self):
        with pytest.raises(ConfigError) as err:
            parse_config(MINIMAL_RD.replace("kind = rd", "kind = magic"))
        assert any(i.path == "scenario.kind" for i in err.value.issues)

    def test_sweep_needs_parameter_and_values(self):
        text = MINIMAL_RD.replace("kind = rd", "kind = sweep") + """
[sweep]
parameter = mass_scale
values = 0.5 2.0
"""
        cfg = parse_config(text)
        assert cfg.sweep_parameter == "mass_scale"
        assert cfg.sweep_values == (0.5, 2.0)
        with pytest.raises(ConfigError):
            parse_config(MINIMAL_RD.replace("kind = rd", "kind = sweep"))

    def test_round_trip(self):
        cfg = parse_config(MINIMAL_RD)
        assert parse_config(serialize_config(cfg)) == cfg

    def test_round_trip_with_all_sections(self):
        text = MINIMAL_RD + """
[diffusion]
n = 64
domain_length = 2.0
psi = 0.5*x
diffusivity = 1 + 0.1*sin(pi*x)

[numerics]
dt = 5e-4
t_end = 2.5
sample_every = 5
tol = 1e-9

[output]
directory = out/somewhere
series = false
snapshots = 0.0 1.25
"""
        cfg = parse_config(text)
        assert cfg.n_cells == 64
        assert cfg.write_series is False
        assert cfg.snapshot_times == (0.0, 1.25)
        assert parse_config(serialize_config(cfg)) == cfg
