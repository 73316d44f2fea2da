"""YAML experiment configs with field-path diagnostics.

Schema (version 1):

    schema_version: 1
    scenario:                  # either a preset reference ...
      preset: paper-fig-scaled
      seed: 7
    # ... or a fully explicit block:
    # scenario:
    #   n_points: 400
    #   ambient_dim: 10
    #   cluster_dim: 3
    #   cluster_probs: [0.5, 0.3, 0.2]
    #   noise_sigma: 1.0
    #   seed: 7
    #   segments:
    #     - {length: 500, drift: 0.0, partition: A}
    algorithms:
      - {name: rice, kind: rice_ocelad, eta0: 0.2, i0: 1, lambda: 0.0, regularizer: nuclear}
      - {name: low, kind: comid_fixed, eta: 0.002}
    trials: 30
    eval_every: 50
    outputs: out/
"""

from __future__ import annotations

import yaml

from .experiment import AlgorithmSpec, ExperimentConfig
from .metric import InvalidInputError
from .synthdata import ScenarioConfig, Segment, preset_scenario

SCHEMA_VERSION = 1


class ConfigError(InvalidInputError):
    """Config parse/validation failure, naming the offending field."""


def _fail(path: str, msg: str):
    raise ConfigError(f"{path}: {msg}")


def _get(d: dict, key: str, path: str, required: bool = True, default=None):
    if key not in d:
        if required:
            _fail(f"{path}.{key}" if path else key, "missing required field")
        return default
    return d[key]


def _num(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(path, f"expected a number, got {value!r}")
    return float(value)


def _int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(path, f"expected an integer, got {value!r}")
    return value


def parse_scenario(block, path: str = "scenario") -> ScenarioConfig:
    if not isinstance(block, dict):
        _fail(path, "expected a mapping")
    if "preset" in block:
        name = block["preset"]
        seed = _int(_get(block, "seed", path, required=False, default=0), f"{path}.seed")
        extras = set(block) - {"preset", "seed"}
        if extras:
            _fail(path, f"preset scenarios accept only 'seed' overrides, got {sorted(extras)}")
        try:
            return preset_scenario(name, seed=seed)
        except InvalidInputError as exc:
            _fail(f"{path}.preset", str(exc))
    seg_block = _get(block, "segments", path)
    if not isinstance(seg_block, list) or not seg_block:
        _fail(f"{path}.segments", "expected a nonempty list")
    segments = []
    for idx, sb in enumerate(seg_block):
        sp = f"{path}.segments[{idx}]"
        if not isinstance(sb, dict):
            _fail(sp, "expected a mapping")
        try:
            segments.append(
                Segment(
                    length=_int(_get(sb, "length", sp), f"{sp}.length"),
                    drift=_num(_get(sb, "drift", sp), f"{sp}.drift"),
                    partition=str(_get(sb, "partition", sp)),
                )
            )
        except InvalidInputError as exc:
            _fail(sp, str(exc))
    probs = _get(block, "cluster_probs", path, required=False, default=[0.5, 0.3, 0.2])
    if not isinstance(probs, list):
        _fail(f"{path}.cluster_probs", "expected a list")
    try:
        return ScenarioConfig(
            n_points=_int(_get(block, "n_points", path, False, 2000), f"{path}.n_points"),
            ambient_dim=_int(_get(block, "ambient_dim", path, False, 25), f"{path}.ambient_dim"),
            cluster_dim=_int(_get(block, "cluster_dim", path, False, 3), f"{path}.cluster_dim"),
            cluster_probs=tuple(_num(p, f"{path}.cluster_probs") for p in probs),
            noise_sigma=_num(
                _get(block, "noise_sigma", path, False, 1.0), f"{path}.noise_sigma"
            ),
            segments=tuple(segments),
            horizon=sum(s.length for s in segments),
            seed=_int(_get(block, "seed", path, False, 0), f"{path}.seed"),
        )
    except InvalidInputError as exc:
        _fail(path, str(exc))


def parse_algorithm(block, path: str) -> AlgorithmSpec:
    if not isinstance(block, dict):
        _fail(path, "expected a mapping")
    known = {
        "name", "kind", "eta0", "i0", "eta", "lambda", "regularizer",
        "norm_cap", "max_level", "seed",
    }
    extras = set(block) - known
    if extras:
        _fail(path, f"unknown fields {sorted(extras)}")
    try:
        return AlgorithmSpec(
            name=str(_get(block, "name", path)),
            kind=str(_get(block, "kind", path)),
            eta0=_num(_get(block, "eta0", path, False, 1.0), f"{path}.eta0"),
            i0=_int(_get(block, "i0", path, False, 1), f"{path}.i0"),
            eta=_num(_get(block, "eta", path, False, 0.0), f"{path}.eta"),
            lam=_num(_get(block, "lambda", path, False, 0.0), f"{path}.lambda"),
            regularizer=str(_get(block, "regularizer", path, False, "nuclear")),
            norm_cap=_num(_get(block, "norm_cap", path, False, 0.0), f"{path}.norm_cap"),
            max_level=_int(_get(block, "max_level", path, False, 20), f"{path}.max_level"),
            seed=_int(_get(block, "seed", path, False, 0), f"{path}.seed"),
        )
    except InvalidInputError as exc:
        _fail(path, str(exc))


def parse_experiment(doc) -> ExperimentConfig:
    if not isinstance(doc, dict):
        _fail("<root>", "config must be a mapping")
    version = _get(doc, "schema_version", "")
    if version != SCHEMA_VERSION:
        _fail("schema_version", f"expected {SCHEMA_VERSION}, got {version!r}")
    scenario = parse_scenario(_get(doc, "scenario", ""))
    algos_block = _get(doc, "algorithms", "")
    if not isinstance(algos_block, list) or not algos_block:
        _fail("algorithms", "expected a nonempty list")
    algorithms = tuple(
        parse_algorithm(ab, f"algorithms[{idx}]") for idx, ab in enumerate(algos_block)
    )
    try:
        return ExperimentConfig(
            scenario=scenario,
            algorithms=algorithms,
            trials=_int(_get(doc, "trials", "", False, 1), "trials"),
            eval_every=_int(_get(doc, "eval_every", "", False, 50), "eval_every"),
            outputs=str(_get(doc, "outputs", "", False, "out")),
            knn_k=_int(_get(doc, "knn_k", "", False, 5), "knn_k"),
        )
    except InvalidInputError as exc:
        _fail("<root>", str(exc))


def load_experiment(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML: {exc}") from exc
    return parse_experiment(doc)
