import json

import pytest
from jsonschema import Draft202012Validator
from referencing import Registry, Resource

from graded_norms.cli import run
from graded_norms.norms import Atomic, Lp, WeightedLp
from graded_norms.schemas import NAMES, load_schema

REGISTRY = Registry().with_resources(
    (f"{n}.schema.json", Resource.from_contents(load_schema(n))) for n in NAMES)


def _validate(name, doc):
    Draft202012Validator(load_schema(name), registry=REGISTRY).validate(doc)


def _json(capsys, *argv):
    run([*argv, "--format", "json"])
    return json.loads(capsys.readouterr().out)


@pytest.mark.parametrize("name", NAMES)
def test_schemas_are_valid(name):
    Draft202012Validator.check_schema(load_schema(name))


def test_norm_specs_validate():
    for n in (Lp(2), Lp(float("inf")), WeightedLp(1, (1, 2, 3)), Atomic([[1, 0], [0, 1]])):
        _validate("norm_spec", n.to_dict())


@pytest.mark.parametrize("cmd,extra", [("eval", []), ("dual", []), ("topk", ["--k", "2"]),
                                       ("ksupport", ["--k", "2"])])
def test_value_reports(capsys, cmd, extra):
    _validate("value_report", _json(capsys, cmd, "--source", "lp:3", "--x", "[1,-2,0]", *extra))


def test_sequence_and_l0_reports(capsys):
    for src in ("lp:1", "lp:2", "lp:inf", "wlp:2:[1,2,3]"):
        _validate("sequence_report", _json(capsys, "sequence", "--source", src, "--x", "[3,0,-1]"))
        _validate("l0_report", _json(capsys, "l0", "--source", src, "--x", "[3,0,-1]"))


@pytest.mark.parametrize("prop", ["monotonic", "om", "osm", "birkhoff", "dual-pair-support",
                                  "restriction-duality", "om-rotund-osm",
                                  "permutation-invariant", "level-set"])
def test_property_reports(capsys, prop):
    for src in ("lp:1", "lp:inf"):
        _validate("property_report", _json(capsys, "check", prop, "--source", src, "--k", "1",
                                           "--trials", "30"))


def test_gradedness_report(capsys):
    for direction in ("increasing", "decreasing"):
        _validate("gradedness_report", _json(capsys, "check", "gradedness", "--source", "lp:1",
                                             "--direction", direction, "--trials", "30"))


def test_suite_bundle(capsys):
    _validate("suite_bundle", _json(capsys, "suite", "--quick", "--filter", "4,6"))
