import importlib
import json
import math

import jsonschema
import numpy as np
import pytest

from wasslab.config import CONFIG_SCHEMA, ConfigError, parse_config_text
from wasslab.errors import ConfigurationError
from wasslab.scenario import Scenario, initial_data, parse_coupling, run_scenario
from wasslab.verify import (
    CHECKS,
    RHS_SOURCES,
    canonical_scenario,
    default_suite,
    make_spec,
    run_check,
    summary_table,
)


def test_rhs_sources_cover_every_identity():
    identities = {k for k, d in CHECKS.items() if d.kind == "identity"}
    assert set(RHS_SOURCES) == identities


@pytest.mark.parametrize("check_id", sorted(RHS_SOURCES))
def test_rhs_sources_resolve(check_id):
    path, _ = RHS_SOURCES[check_id]
    module, attr = path.split(".")
    assert callable(getattr(importlib.import_module(f"wasslab.{module}"), attr))


def test_default_suite_covers_registry():
    assert {s.id for s in default_suite()} == set(CHECKS)


def test_make_spec_rejects_unknown():
    with pytest.raises(ConfigurationError):
        make_spec("not_a_check")


def test_spec_kind_mismatch():
    from wasslab.verify import IdentitySpec

    with pytest.raises(ConfigurationError):
        IdentitySpec("eks_geo")


@pytest.mark.parametrize("c, expected", [("inf", math.inf), ("Infinity", math.inf), (2, 2.0), ("0.5", 0.5)])
def test_parse_coupling(c, expected):
    assert parse_coupling(c) == expected


@pytest.mark.parametrize("c", [-1, "abc", float("nan")])
def test_parse_coupling_rejects(c):
    with pytest.raises(ConfigurationError):
        parse_coupling(c)


def test_scenario_refined_doubles_grid_and_halves_dt():
    sc = canonical_scenario("geodesic").refined(1)
    assert sc.geometry["grid"] == [256]
    assert sc.flow["solver"]["dt"] == pytest.approx(5e-4)
    assert sc.flow["solver"]["output_stride"] == 20


def test_scenario_key_is_order_independent():
    a = Scenario({"dim": 1, "grid": [32]}, {"kind": "heat", "solver": {"dt": 0.01, "t_end": 0.1}})
    b = Scenario({"grid": [32], "dim": 1}, {"solver": {"t_end": 0.1, "dt": 0.01}, "kind": "heat"})
    assert a.key() == b.key()


def test_unknown_flow_kind():
    with pytest.raises(ConfigurationError):
        Scenario({}, {"kind": "vortex"})


def test_random_trig_seeded_reproducible():
    flow = {"kind": "heat", "rho0": {"preset": "random_trig"}, "solver": {"dt": 1e-3, "t_end": 0.01}}
    a = initial_data(Scenario({"grid": [32]}, flow, seed=7))["rho0"].values
    b = initial_data(Scenario({"grid": [32]}, flow, seed=7))["rho0"].values
    c = initial_data(Scenario({"grid": [32]}, flow, seed=8))["rho0"].values
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    assert np.all(a > 0)


def test_random_trig_needs_seed():
    flow = {"kind": "heat", "rho0": {"preset": "random_trig"}, "solver": {"dt": 1e-3, "t_end": 0.01}}
    with pytest.raises(ConfigurationError):
        initial_data(Scenario({"grid": [32]}, flow))


def test_run_scenario_memoised():
    sc = canonical_scenario("reference_m1")
    assert run_scenario(sc) is run_scenario(canonical_scenario("reference_m1"))


def test_schema_is_valid_draft():
    jsonschema.Draft202012Validator.check_schema(CONFIG_SCHEMA)


def test_config_error_carries_line():
    text = '{\n  "flow": {\n    "kind": "heat",\n    "solver": {"dt": 0.01, "t_end": "soon"}\n  }\n}\n'
    with pytest.raises(ConfigError) as info:
        parse_config_text(text, "x.json")
    assert info.value.line == 4
    assert str(info.value).startswith("x.json:4:")


def test_config_error_points_at_list_item():
    text = '{\n "flow": {"kind": "heat", "solver": {"dt": 0.01, "t_end": 1}},\n "checks": [\n  "heat_wm",\n  "bogus"\n ]\n}\n'
    with pytest.raises(ConfigError) as info:
        parse_config_text(text)
    assert info.value.line == 5


def test_config_invalid_json_line():
    with pytest.raises(ConfigError) as info:
        parse_config_text('{\n "flow": {\n  "kind": heat\n }\n}')
    assert info.value.line == 3


def test_config_roundtrip_to_scenario():
    raw = {"geometry": {"dim": 1, "grid": [32], "m": 3},
           "flow": {"kind": "langevin", "c": "inf", "solver": {"dt": 1e-3, "t_end": 0.1}},
           "checks": ["hamiltonian_2nd", {"id": "eks_langevin", "tolerance": 1e-5}], "seed": 3}
    cfg = parse_config_text(json.dumps(raw))
    assert cfg.scenario.kind == "langevin" and cfg.scenario.c == math.inf
    assert cfg.scenario.seed == 3 and len(cfg.checks) == 2


def test_report_roundtrip(tmp_path):
    rep = run_check(make_spec("model_identity"))
    j, c = rep.write(str(tmp_path))
    data = json.loads(open(j).read())
    assert data["pass"] is True and data["refinement"] == "exempt"
    assert "elapsed" not in data
    rows = np.genfromtxt(c, delimiter=",", names=True)
    assert rows.dtype.names == ("t", "lhs", "rhs", "residual")
    assert np.allclose(rows["lhs"], rep.lhs, rtol=0, atol=0)


def test_inequality_sign_convention():
    rep = run_check(make_spec("eks_geo"))
    assert rep.kind == "inequality"
    assert np.allclose(rep.residual, rep.lhs - rep.rhs)


def test_summary_table_counts():
    reps = [run_check(make_spec("fd_vh")), run_check(make_spec("model_identity"))]
    assert summary_table(reps).splitlines()[-1] == "2 pass, 0 fail, 0 inconclusive"


def test_check_on_wrong_flow_raises():
    with pytest.raises(ConfigurationError):
        run_check(make_spec("heat_wm", scenario=canonical_scenario("langevin")))


def test_windowless_short_run_is_inconclusive():
    sc = canonical_scenario("heat").replace(flow={"solver": {"t_end": 0.2}})
    rep = run_check(make_spec("heat_wm", scenario=sc, refine=False))
    assert rep.status == "inconclusive"
