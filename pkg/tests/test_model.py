import json

import numpy as np
import pytest

from chawkes.exceptions import SpecParseError, SpecValidationError
from chawkes.model import (
    ModelSpec,
    PositivityWarning,
    as_weights,
    load_spec,
    lob_preset,
    mid_price_weights,
    read_spec,
    save_spec,
    validate,
    write_spec,
)

from conftest import ergodic_lob, poisson_spec


def _doc(**over):
    base = {"p": 1, "q": 0, "beta": 1.0, "mu0_null": 1.0, "mu0": [1.0],
            "fertility": [[0.0]], "constraints": [[]], "jumps": [[]]}
    base.update(over)
    return json.dumps(base)


def test_preset_is_valid():
    assert validate(ergodic_lob()) == []


def test_beta_zero_reported():
    spec = ModelSpec(p=1, q=0, beta=0.0, fertility=[[0.0]], mu0=[1.0])
    assert "beta must be positive" in validate(spec)


def test_jump_shape_mismatch():
    spec = ModelSpec(p=2, q=1, beta=1.0, fertility=np.zeros((2, 2)), mu0=[1, 1],
                     constraints=[[[]], [[]]], jumps=[[1]])
    assert any(v.startswith("jumps shape mismatch") for v in validate(spec))


@pytest.mark.parametrize("field,value,needle", [
    ("mu0", [0.0], "mu0"),
    ("mu0_null", -1.0, "mu0_null"),
    ("fertility", [[-0.1]], "fertility"),
])
def test_domain_violations(field, value, needle):
    with pytest.raises(SpecValidationError) as err:
        load_spec(_doc(**{field: value}))
    assert any(needle in v for v in err.value.violations)


def test_round_trip(tmp_path):
    spec = ergodic_lob()
    assert load_spec(save_spec(spec)) == spec
    write_spec(spec, tmp_path / "m.json")
    assert read_spec(tmp_path / "m.json") == spec
    assert read_spec(tmp_path / "m.json").digest() == spec.digest()


def test_missing_field_named():
    raw = json.loads(_doc())
    del raw["beta"]
    with pytest.raises(SpecParseError, match="beta"):
        load_spec(json.dumps(raw))


def test_mu0_null_defaults_to_one():
    raw = json.loads(_doc())
    del raw["mu0_null"]
    assert load_spec(json.dumps(raw)).mu0_null == 1.0


def test_q_zero_with_constraint_sets_rejected():
    with pytest.raises(SpecValidationError):
        load_spec(_doc(constraints=[[[1]]]))


def test_nan_and_unknown_keys_rejected():
    with pytest.raises(SpecParseError):
        load_spec(_doc().replace("1.0,", "NaN,", 1))
    raw = json.loads(_doc())
    raw["extra"] = 1
    with pytest.raises(SpecParseError, match="extra"):
        load_spec(json.dumps(raw))


def test_syntax_error_has_location():
    with pytest.raises(SpecParseError) as err:
        load_spec('{"p": 1,\n "q": }')
    assert "2:" in str(err.value)


def test_nested_location():
    doc = _doc(p=2, mu0=[1, 1], fertility=[[0, 0], ["x", 0]], constraints=[[], []], jumps=[[], []])
    with pytest.raises(SpecParseError, match=r"fertility\[1\]\[0\]"):
        load_spec(doc)


def test_lob_preset_structure():
    spec = lob_preset([1, 1, 1, 1], np.zeros((4, 4)))
    assert spec.constraints[1] == (frozenset({1}),)
    assert spec.constraints[2] == (frozenset({1}),)
    assert spec.constraints[0] == (frozenset(),)
    assert spec.constraints[3] == (frozenset(),)
    assert list(spec.jumps[:, 0]) == [1, -1, -1, 1]
    np.testing.assert_array_equal(mid_price_weights(), [0.5, -0.5, 0.5, -0.5])


def test_blocking_union_and_boundary():
    spec = ModelSpec(p=2, q=2, beta=1.0, fertility=np.zeros((2, 2)), mu0=[1, 1],
                     constraints=[[[1], []], [[], [2, 3]]], jumps=[[1, 0], [0, -1]])
    assert spec.is_blocked(1, [1, 5])
    assert not spec.is_blocked(1, [2, 5])
    assert spec.is_blocked(2, [9, 3])
    assert not spec.is_blocked(0, [1, 2])
    np.testing.assert_array_equal(spec.boundary_levels(), [2, 4])


def test_spec_is_immutable():
    spec = poisson_spec()
    with pytest.raises(ValueError):
        spec.mu0[0] = 2.0


def test_as_weights_length_checked():
    with pytest.raises(ValueError):
        as_weights([1, 2], poisson_spec())


def test_positivity_heuristic_warns():
    spec = ModelSpec(p=1, q=1, beta=1.0, fertility=[[0.0]], mu0=[1.0],
                     constraints=[[[]]], jumps=[[-1]])
    with pytest.warns(PositivityWarning):
        validate(spec)
