"""Run configuration: JSON schemas and conversion into library objects.

Every subcommand reads one JSON document.  Input documents are validated
against ``INPUT_SCHEMAS[name]`` (unknown keys are rejected) and the emitted
``result.json`` against ``OUTPUT_SCHEMAS[name]``.  ``projlim schema NAME``
prints any of them.
"""
from __future__ import annotations

import copy
import json
from pathlib import Path

import jsonschema

from .discrete import FiniteProductSystem
from .gaussian import CovarianceKernel
from .polynomial import CylinderFunction, Polynomial
from .qft import InteractionSpec, LatticeSpec, free_covariance

DRAFT = "https://json-schema.org/draft/2020-12/schema"

_POSITIVE = {"type": "number", "exclusiveMinimum": 0}
_SEED = {"type": "integer", "minimum": 0, "maximum": 18446744073709551615}
_OUTPUT = {
    "type": "object",
    "additionalProperties": False,
    "properties": {"result": {"type": "string"}, "table": {"type": "string"}},
}

DEFS = {
    "kernel": {
        "oneOf": [
            {"type": "object", "additionalProperties": False, "required": ["type"],
             "properties": {"type": {"const": "identity"}}},
            {"type": "object", "additionalProperties": False, "required": ["type", "entries"],
             "properties": {"type": {"const": "matrix"},
                            "entries": {"type": "array", "minItems": 1,
                                        "items": {"type": "array", "items": {"type": "number"}}}}},
            {"type": "object", "additionalProperties": False, "required": ["type", "d", "n", "m"],
             "properties": {"type": {"const": "lattice"}, "d": {"enum": [1, 2]},
                            "n": {"type": "integer", "minimum": 1}, "a": _POSITIVE,
                            "m": _POSITIVE, "scale": _POSITIVE}},
        ]
    },
    "polynomial": {
        "type": "array",
        "items": {"type": "object", "additionalProperties": False, "required": ["coeff", "exponents"],
                  "properties": {"coeff": {"type": "number"},
                                 "exponents": {"type": "array", "items": {"type": "integer", "minimum": 0}}}},
    },
    "integrand": {
        "type": "object", "additionalProperties": False,
        "anyOf": [{"required": ["polynomial"]}, {"required": ["exp_polynomial"]}],
        "properties": {"polynomial": {"$ref": "#/$defs/polynomial"},
                       "exp_polynomial": {"$ref": "#/$defs/polynomial"},
                       "level": {"type": "integer", "minimum": 1}},
    },
    "system": {
        "oneOf": [
            {"type": "object", "additionalProperties": False, "required": ["alphabet_sizes", "weights"],
             "properties": {"alphabet_sizes": {"type": "array", "minItems": 1,
                                               "items": {"type": "integer", "minimum": 2}},
                            "weights": {"type": "array",
                                        "items": {"type": "array", "items": {"type": "number", "minimum": 0}}}}},
            {"type": "object", "additionalProperties": False, "required": ["coins"],
             "properties": {"coins": {"type": "integer", "minimum": 1},
                            "p": {"type": "number", "minimum": 0, "maximum": 1}}},
        ]
    },
}


def _schema(properties: dict, required: list) -> dict:
    return {"$schema": DRAFT, "type": "object", "additionalProperties": False,
            "required": required, "properties": properties, "$defs": DEFS}


INPUT_SCHEMAS = {
    "converge": _schema({
        "kernel": {"$ref": "#/$defs/kernel"},
        "integrand": {"$ref": "#/$defs/integrand"},
        "tol": _POSITIVE,
        "window": {"type": "integer", "minimum": 2},
        "horizon": {"type": "integer", "minimum": 2},
        "samples": {"type": "integer", "minimum": 2},
        "seed": _SEED,
        "output": _OUTPUT,
    }, ["kernel", "integrand", "horizon"]),
    "schwinger": _schema({
        "kernel": {"$ref": "#/$defs/kernel"},
        "test_functions": {"type": "array", "minItems": 1, "maxItems": 12,
                           "items": {"type": "array", "minItems": 1, "items": {"type": "number"}}},
        "interaction": {"type": "object", "additionalProperties": False,
                        "required": ["lambda", "sites"],
                        "properties": {"lambda": {"type": "number", "minimum": 0},
                                       "monomial_degree": {"type": "integer", "minimum": 2, "multipleOf": 2},
                                       "sites": {"type": "array", "minItems": 1,
                                                 "items": {"type": "integer", "minimum": 0}}}},
        "level": {"type": "integer", "minimum": 1},
        "samples": {"type": "integer", "minimum": 2},
        "seed": _SEED,
        "output": _OUTPUT,
    }, ["kernel", "test_functions"]),
    "check": _schema({
        "kernel": {"$ref": "#/$defs/kernel"},
        "depth": {"type": "integer", "minimum": 1},
        "positivity": {"type": "object", "additionalProperties": False,
                       "properties": {"count": {"type": "integer", "minimum": 2, "maximum": 12},
                                      "trials": {"type": "integer", "minimum": 0},
                                      "spread": _POSITIVE,
                                      "seed": _SEED,
                                      "tol": _POSITIVE,
                                      "vectors": {"type": "array", "minItems": 2, "maxItems": 12,
                                                  "items": {"type": "array", "items": {"type": "number"}}}}},
        "output": _OUTPUT,
    }, ["kernel", "depth"]),
    "oracle": _schema({
        "systems": {"type": "array", "minItems": 1, "items": {"$ref": "#/$defs/system"}},
        "functions": {"type": "array", "minItems": 1, "items": {"$ref": "#/$defs/polynomial"}},
        "tol": _POSITIVE,
        "output": _OUTPUT,
    }, ["systems", "functions"]),
}

_COMMON_OUT = {
    "subcommand": {"type": "string"},
    "timestamp": {"type": "string"},
    "generator": {"type": "string"},
    "status": {"type": "string"},
    "exit_code": {"type": "integer"},
}
_ESTIMATE = {"type": "object", "required": ["value", "stderr", "samples", "method"],
             "properties": {"value": {"type": "number"}, "stderr": {"type": "number", "minimum": 0},
                            "samples": {"type": "integer"}, "method": {"enum": ["exact-wick", "monte-carlo"]},
                            "nonfinite": {"type": "integer"}, "level": {"type": "integer"}}}


def _out_schema(properties: dict, required: list) -> dict:
    return {"$schema": DRAFT, "type": "object", "additionalProperties": False,
            "required": ["subcommand", "timestamp", "status", "exit_code"] + required,
            "properties": {**_COMMON_OUT, **properties}}


OUTPUT_SCHEMAS = {
    "converge": _out_schema({
        "rows": {"type": "array", "items": _ESTIMATE},
        "verdict": {"type": "object", "required": ["converged", "value"],
                    "properties": {"converged": {"type": "boolean"},
                                   "value": {"type": ["number", "null"]},
                                   "stabilized_at": {"type": ["integer", "null"]}}},
        "tol": {"type": "number"},
        "window": {"type": "integer"},
        "integrand": {"type": "object"},
    }, ["rows", "verdict"]),
    "schwinger": _out_schema({
        "mode": {"enum": ["free", "interacting"]},
        "k": {"type": "integer"},
        "free_value": {"type": "number"},
        "estimate": {"type": "object",
                     "required": ["value", "stderr", "z", "z_stderr", "samples", "level"],
                     "properties": {k: {"type": "number"} for k in
                                    ["value", "stderr", "z", "z_stderr", "samples", "level"]}},
        "oracle": {"type": ["number", "null"]},
        "lambda": {"type": "number"},
        "error": {"type": "string"},
    }, ["mode", "k"]),
    "check": _out_schema({
        "passed": {"type": "boolean"},
        "consistency": {"type": ["object", "null"]},
        "positivity": {"type": ["object", "null"]},
        "failed_checks": {"type": "array", "items": {"type": "string"}},
        "error": {"type": "string"},
    }, ["passed", "failed_checks"]),
    "oracle": _out_schema({
        "passed": {"type": "boolean"},
        "cases": {"type": "array", "items": {
            "type": "object",
            "required": ["system", "function", "integral", "max_discrepancy", "tower", "passed"],
            "properties": {"system": {"type": "integer"}, "function": {"type": "integer"},
                           "integral": {"type": "number"}, "max_discrepancy": {"type": "number"},
                           "tower": {"type": "boolean"}, "passed": {"type": "boolean"}}}},
        "error": {"type": "string"},
    }, ["passed"]),
}


class ConfigError(ValueError):
    pass


def load_config(path, name: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    validate_input(data, name)
    return data


def validate_input(data, name: str):
    try:
        jsonschema.validate(data, INPUT_SCHEMAS[name])
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from exc


def validate_output(data, name: str):
    jsonschema.validate(data, OUTPUT_SCHEMAS[name])


def schema_document(name: str) -> dict:
    kind, _, sub = name.partition(".")
    table = OUTPUT_SCHEMAS if kind == "output" else INPUT_SCHEMAS
    key = sub if kind in ("input", "output") else name
    return copy.deepcopy(table[key])


def kernel_from_spec(spec: dict) -> CovarianceKernel:
    kind = spec["type"]
    if kind == "identity":
        return CovarianceKernel.identity()
    if kind == "matrix":
        return CovarianceKernel.from_matrix(spec["entries"])
    if kind == "lattice":
        lattice = LatticeSpec(d=spec["d"], sites_per_dim=spec["n"], a=spec.get("a", 1.0),
                              m=spec["m"], scale=spec.get("scale", 1.0))
        return free_covariance(lattice)
    raise ConfigError(f"unknown kernel type {kind!r}")


def integrand_from_spec(spec: dict) -> CylinderFunction:
    return CylinderFunction.from_json(spec)


def polynomial_from_spec(records: list) -> Polynomial:
    return Polynomial.from_json(records)


def system_from_spec(spec: dict) -> FiniteProductSystem:
    if "coins" in spec:
        return FiniteProductSystem.coins(spec["coins"], spec.get("p", 0.5))
    return FiniteProductSystem(spec["alphabet_sizes"], spec["weights"])


def interaction_from_spec(spec: dict) -> InteractionSpec:
    return InteractionSpec.local_power(spec["lambda"], spec.get("monomial_degree", 4), spec["sites"])
