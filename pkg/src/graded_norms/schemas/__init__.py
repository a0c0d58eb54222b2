"""JSON schemas for the CLI reports."""

import json
from importlib import resources

NAMES = ("norm_spec", "value_report", "sequence_report", "l0_report", "property_report",
         "gradedness_report", "suite_bundle")


def load_schema(name: str) -> dict:
    if name not in NAMES:
        raise KeyError(name)
    return json.loads(resources.files(__name__).joinpath(f"{name}.schema.json").read_text())
