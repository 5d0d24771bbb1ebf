import json
import math

import numpy as np
import pytest

from hotspot import CoefficientField, FieldState, ParameterError, SpikePattern, isotropic_params
from hotspot.config import ConfigError, dump_config, load_config, parse_config
from hotspot.pde import perturbed_uniform
from hotspot.report import (
    SCHEMA,
    PredictionReport,
    check_report,
    dumps,
    params_dict,
    pattern_dict,
    read_snapshot,
    snapshot_csv,
)

SYM = """
[model]
L = 1
epsilon = 0.05
D_hat = 1

[A0]
kind = constant
params = 1

[gamma]
kind = constant
params = 1   ; A_bar = 2
"""


class TestConfig:
    def test_parse(self):
        p = parse_config(SYM)
        assert p == isotropic_params(epsilon=0.05, D_hat=1.0, A0=1.0, A_bar=2.0)

    def test_explicit_grid(self):
        p = parse_config(SYM.replace("D_hat = 1", "D_hat = 1\ngrid_n = 400"))
        assert p.grid_n == 400

    def test_field_kinds(self):
        text = SYM.replace("kind = constant\nparams = 1   ; A_bar = 2", "kind = piecewise\nparams = -1 1, 0 3, 1 2")
        p = parse_config(text)
        assert p.gamma.kind == "piecewise"
        assert p.gamma(0.0) == pytest.approx(3.0)

    def test_round_trip(self, aniso_params):
        assert parse_config(dump_config(aniso_params)) == aniso_params
        q = aniso_params.with_(A0=CoefficientField.sampled_on(1.0, [1.0, 1.2, 0.9, 1.1]))
        assert parse_config(dump_config(q)) == q

    @pytest.mark.parametrize(
        "old, new",
        [
            ("D_hat = 1", ""),
            ("D_hat = 1", "D_hat = one"),
            ("D_hat = 1", "D_hat = 1\nspeed = 2"),
            ("[gamma]", "[delta]"),
            ("kind = constant\nparams = 1   ;", "kind = cubic\nparams = 1   ;"),
            ("params = 1   ;", "params = 1, 2   ;"),
            ("epsilon = 0.05", "epsilon = -0.05"),
            ("params = 1   ;", "params = -1   ;"),
        ],
    )
    def test_rejects(self, old, new):
        with pytest.raises(ConfigError):
            parse_config(SYM.replace(old, new, 1))

    def test_malformed(self):
        with pytest.raises(ConfigError):
            parse_config("L = 1\n")

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.ini")

    def test_is_parameter_error(self):
        assert issubclass(ConfigError, ParameterError)


class TestDumps:
    def test_sorted_and_exact(self):
        text = dumps({"b": 0.1, "a": [1, 2.5, None], "c": {"z": True}})
        assert text.index('"a"') < text.index('"b"') < text.index('"c"')
        assert json.loads(text)["b"] == 0.1
        assert "0.10000000000000001" in text

    def test_non_finite_is_null(self):
        assert json.loads(dumps({"x": math.nan, "y": math.inf})) == {"x": None, "y": None}

    def test_numpy_values(self):
        out = json.loads(dumps({"a": np.arange(3), "b": np.float64(2.0), "c": np.bool_(True)}))
        assert out == {"a": [0, 1, 2], "b": 2.0, "c": True}

    def test_deterministic(self):
        obj = {"k": [math.pi, math.e], "n": {"x": 1 / 3}}
        assert dumps(obj) == dumps(dict(reversed(list(obj.items()))))

    def test_rejects_objects(self):
        with pytest.raises(TypeError):
            dumps({"x": object()})


def _report(**kw):
    p = isotropic_params()
    base = dict(params=params_dict(p), mode="symmetric",
                predicted={"pattern": pattern_dict(SpikePattern((0.0,), (4.9,)))})
    base.update(kw)
    return PredictionReport(**base)


class TestPredictionReport:
    def test_valid(self):
        d = json.loads(dumps(_report().to_dict()))
        assert d["schema"] == SCHEMA
        assert check_report(d) == []

    def test_errors_with_measured(self):
        with pytest.raises(ValueError):
            _report(measured={"positions": [0.0], "v_amplitudes": [5.0]})
        with pytest.raises(ValueError):
            _report(errors={"positions": [0.0]})

    def test_trend_order(self):
        _report(epsilon_trend=((0.1, 0.3), (0.05, 0.2)))
        with pytest.raises(ValueError):
            _report(epsilon_trend=((0.05, 0.2), (0.1, 0.3)))


class TestCheckReport:
    def test_detects_problems(self):
        d = json.loads(dumps(_report().to_dict()))
        assert check_report([]) != []
        assert check_report(dict(d, schema="other")) != []
        assert check_report(dict(d, command="dance")) != []
        missing = dict(d)
        del missing["mode"]
        assert check_report(missing) != []
        assert check_report(dict(d, measured={"positions": [0.0], "v_amplitudes": [1.0]})) != []
        trend = [{"epsilon": 0.05, "error": 0.1}, {"epsilon": 0.1, "error": 0.2}]
        assert check_report(dict(d, epsilon_trend=trend)) != []

    def test_pattern_lengths(self):
        d = json.loads(dumps(_report().to_dict()))
        d["predicted"]["pattern"] = {"positions": [0.0, 0.5], "v_amplitudes": [1.0]}
        assert check_report(d) != []


class TestSnapshot:
    def test_round_trip(self, aniso_params):
        p = aniso_params
        s = perturbed_uniform(isotropic_params(grid_n=p.grid_n))
        s = FieldState(s.A, s.rho, 1.25)
        back = read_snapshot(snapshot_csv(s, p), p)
        np.testing.assert_array_equal(back.A, s.A)
        np.testing.assert_array_equal(back.rho, s.rho)
        assert back.t == 1.25

    def test_header(self, sym_params):
        text = snapshot_csv(perturbed_uniform(sym_params), sym_params)
        lines = text.splitlines()
        assert lines[0].startswith("# t=0 L=1 epsilon=0.050000000000000003")
        assert lines[1] == "x,A,rho,v"
        assert len(lines) == sym_params.grid_n + 3

    def test_grid_mismatch(self, sym_params):
        text = snapshot_csv(perturbed_uniform(sym_params), sym_params)
        with pytest.raises(ValueError):
            read_snapshot(text, sym_params.with_(grid_n=100))
