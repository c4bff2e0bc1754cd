#!/usr/bin/env python
# coding: utf-8

"""
Utilities for run configuration management in CrackTrack.

This module loads YAML (or JSON) run configurations, applies command line overrides,
expands parameter sweeps and validates the result into a `RunConfig`. Every validation
failure is a `ConfigError` naming the offending field and, when possible, its line.
"""

import copy
import hashlib
import json
import logging
import os
from dataclasses import asdict, dataclass, field
from itertools import product

import numpy as np
import yaml

from cracktrack.errors import ConfigError
from cracktrack.utils.data_utils import estimateType

KNOWN_AUDITS = (
    "hardy",
    "coercivity",
    "rellich_necas",
    "pohozaev",
    "boundary_identity",
    "star_shaped",
    "xi_f",
)

DEFAULT_TOLERANCES = {
    "hardy": 0.01,
    "coercivity": 0.01,
    "pohozaev": 0.03,
    "boundary_identity": 0.02,
    "rellich_necas": 1e-8,
    "star_shaped": 1e-10,
    "frequency": 0.03,
    "height": 0.02,
    "beta": 0.05,
}


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration. See `configs/flagship.yaml` for a documented example."""

    crack: dict
    potential: dict
    mesh: dict
    radii: list
    lambdas: list
    spectrum: dict
    audits: list
    boundary_data: dict
    approx: dict
    fourier: dict
    probe_radii: list
    tolerances: dict
    seed: int = 0
    threads: int = 1
    tolerance_scale: float = 1.0
    output_dir: str = "runs/default"
    source: str = field(default="", compare=False)

    def tolerance(self, name):
        """Configured tolerance for a check, multiplied by the tolerance scale."""
        return self.tolerances[name] * self.tolerance_scale

    def to_dict(self):
        data = asdict(self)
        data.pop("source")
        return data


def config_hash(config):
    """sha256 of the canonical JSON form (sorted keys, no whitespace) of a configuration."""
    data = config.to_dict() if isinstance(config, RunConfig) else config
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def handle_config_cases(some_config):
    """
    Standardize configuration entries to always be a list.

    Args:
        some_config: Configuration item which may be a list, None, or a single value

    Returns:
        list: The input converted to a list
    """
    if type(some_config) is list:
        return some_config
    if some_config is None:
        return []
    return [some_config]


def combo_config(config):
    """
    Generate combination configurations from a configuration with list values.

    This function creates a list of configuration dictionaries by taking the
    cartesian product of all list values in the input configuration.

    Args:
        config (dict): Configuration dictionary with possibly list values

    Returns:
        list: List of configuration dictionaries
    """
    if not config:
        return [{}]
    total_list = {k: (v if type(v) == list else [v]) for (k, v) in config.items()}
    keys, values = zip(*total_list.items())
    return [dict(zip(keys, bundle)) for bundle in product(*values)]


def _line_index(text):
    """Map dotted keys of a YAML document to 1-based source lines."""
    index = {}
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return index

    def walk(node, prefix):
        if isinstance(node, yaml.MappingNode):
            for key_node, value_node in node.value:
                dotted = f"{prefix}.{key_node.value}" if prefix else str(key_node.value)
                index[dotted] = key_node.start_mark.line + 1
                walk(value_node, dotted)

    walk(root, "")
    return index


def set_dotted(config, dotted, value):
    """Set config["a"]["b"] = value for dotted = "a.b", creating mappings as needed."""
    keys = dotted.split(".")
    target = config
    for key in keys[:-1]:
        target = target.setdefault(key, {})
    target[keys[-1]] = value


def parse_overrides(pairs):
    """
    Turn ["mesh.h=0.1", "seed=3"] into {"mesh.h": 0.1, "seed": 3} using `estimateType`.

    Raises:
        ConfigError: If an entry has no "="
    """
    overrides = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ConfigError(f"Override '{pair}' is not of the form key=value", field=pair)
        key, value = pair.split("=", 1)
        overrides[key.strip()] = estimateType(value.strip())
    return overrides


def read_config(path):
    """
    Read a raw configuration mapping and its line index.

    Environment variables in the file are expanded before parsing.

    Raises:
        ConfigError: If the file is missing or not a YAML mapping
    """
    if not os.path.exists(path):
        raise ConfigError(f"Configuration file {path} not found", field="config")
    with open(path) as f:
        text = os.path.expandvars(f.read())
    try:
        raw = yaml.load(text, Loader=yaml.FullLoader)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise ConfigError(
            f"Configuration is not valid YAML: {e}",
            field="config",
            line=mark.line + 1 if mark is not None else None,
        )
    if not isinstance(raw, dict):
        raise ConfigError("Configuration must be a mapping", field="config")
    return raw, _line_index(text)


def expand_sweeps(raw):
    """
    Expand the optional `sweep` mapping into one raw configuration per combination.

    Returns:
        list: (combination dict, raw configuration) pairs
    """
    sweep = raw.pop("sweep", None) or {}
    expanded = []
    for combination in combo_config(sweep):
        config = copy.deepcopy(raw)
        for dotted, value in combination.items():
            set_dotted(config, dotted, value)
        expanded.append((combination, config))
    logging.info(f"Expanded {len(expanded)} configuration combinations")
    return expanded


def _geometric_radii(spec):
    return [float(r) for r in np.geomspace(spec["r_min"], spec["r_max"], int(spec["count"]))]


def validate_config(raw, lines=None, source=""):
    """
    Validate a raw configuration mapping into a `RunConfig`.

    Args:
        raw (dict): Parsed configuration, overrides already applied
        lines (dict, optional): Dotted key -> source line, from `read_config`
        source (str): Path of the configuration file, for messages

    Returns:
        RunConfig: The validated configuration

    Raises:
        ConfigError: On the first violated precondition
    """
    from cracktrack.crack_geometry import CrackSpec
    from cracktrack.mesh_fem import graded_local_size
    from cracktrack.straightening import PotentialSpec

    lines = lines or {}

    def fail(message, dotted):
        raise ConfigError(message, field=dotted, line=lines.get(dotted))

    for required in ("crack", "potential", "mesh"):
        if required not in raw:
            fail(f"Missing required section '{required}'", required)

    try:
        CrackSpec.from_dict(raw["crack"])
    except (ValueError, TypeError, KeyError) as e:
        fail(f"Invalid crack: {e}", "crack")
    try:
        PotentialSpec.from_dict(raw["potential"])
    except (ValueError, TypeError, KeyError) as e:
        fail(f"Invalid potential: {e}", "potential")

    mesh = {"grading": 0.5, "levels": 3, **raw["mesh"]}
    for key in ("r", "h"):
        if not isinstance(mesh.get(key), (int, float)) or mesh[key] <= 0:
            fail(f"mesh.{key} must be a positive number", f"mesh.{key}")
    r, h = float(mesh["r"]), float(mesh["h"])
    if h > r / 4.0:
        fail(f"Precondition 0 < h <= r/4 violated: h = {h} > r/4 = {r / 4.0}", "mesh.h")
    if not 0.0 < mesh["grading"] <= 1.0:
        fail("mesh.grading must lie in (0, 1]", "mesh.grading")

    def local(radius):
        return graded_local_size(radius, r, h, mesh["grading"], mesh["levels"])

    radii = raw.get("radii", {"r_min": 0.1, "r_max": r, "count": 7})
    if isinstance(radii, dict):
        radii = _geometric_radii(radii)
    radii = sorted(float(x) for x in handle_config_cases(radii))
    if not radii:
        fail("radii must not be empty", "radii")
    for radius in radii:
        if not 4.0 * local(radius) <= radius <= r * (1.0 + 1e-12):
            fail(
                f"Radius {radius} outside the resolved range [4 h_local, r] "
                f"(h_local = {local(radius):.4g}, r = {r})",
                "radii",
            )

    lambdas = sorted((float(x) for x in handle_config_cases(raw.get("lambdas", []))), reverse=True)
    for lam in lambdas:
        if not 4.0 * local(lam) <= lam <= r * (1.0 + 1e-12):
            fail(f"Blow-up scale {lam} outside [4 h_local, r]", "lambdas")

    spectrum = {"h_sphere": 0.05, "count": 6, **(raw.get("spectrum") or {})}
    if not 0.005 <= spectrum["h_sphere"] <= 0.5:
        fail("spectrum.h_sphere must lie in [0.005, 0.5]", "spectrum.h_sphere")
    if int(spectrum["count"]) < 1:
        fail("spectrum.count must be at least 1", "spectrum.count")

    audits = handle_config_cases(raw.get("audits", list(KNOWN_AUDITS)))
    for name in audits:
        if name not in KNOWN_AUDITS:
            fail(f"Unknown audit '{name}', expected one of {KNOWN_AUDITS}", "audits")

    boundary_data = {"terms": [{"field": "crack_mode", "weight": 1.0}], "straightened": False}
    boundary_data.update(raw.get("boundary_data") or {})

    approx = {"n_values": [64, 256, 1024], "alpha": 2.0, **(raw.get("approx") or {})}
    if approx["alpha"] <= 1.0:
        fail("approx.alpha must exceed 1", "approx.alpha")
    for n in handle_config_cases(approx["n_values"]):
        if int(n) < 1:
            fail("approx.n_values must be positive integers", "approx.n_values")
        if not int(n) ** (1.0 / (2.0 * approx["alpha"])) > 1.0 / r:
            fail(f"approx.n_values: n = {n} leaves gamma outside B_r (need n^(1/(2 alpha)) > 1/r)", "approx.n_values")

    fourier = {"R_values": [r / 2.0, r], "grid_count": 12, **(raw.get("fourier") or {})}
    for value in handle_config_cases(fourier["R_values"]):
        if not 0.0 < value <= r:
            fail("fourier.R_values must lie in (0, r]", "fourier.R_values")

    probe_radii = raw.get("probe_radii") or [r / 2**k for k in range(4)]
    tolerances = {**DEFAULT_TOLERANCES, **(raw.get("tolerances") or {})}

    tolerance_scale = float(raw.get("tolerance_scale", 1.0))
    if tolerance_scale <= 0:
        fail("tolerance_scale must be positive", "tolerance_scale")
    threads = int(raw.get("threads", 1))
    if threads < 1:
        fail("threads must be at least 1", "threads")

    return RunConfig(
        crack=raw["crack"],
        potential=raw["potential"],
        mesh=mesh,
        radii=radii,
        lambdas=lambdas,
        spectrum=spectrum,
        audits=list(audits),
        boundary_data=boundary_data,
        approx=approx,
        fourier=fourier,
        probe_radii=sorted(float(x) for x in probe_radii),
        tolerances=tolerances,
        seed=int(raw.get("seed", 0)),
        threads=threads,
        tolerance_scale=tolerance_scale,
        output_dir=str(raw.get("output_dir", "runs/default")),
        source=source,
    )


def load_config(path, overrides=None):
    """
    Load, override, sweep-expand and validate a configuration file.

    Args:
        path (str): YAML or JSON configuration file
        overrides (dict, optional): Dotted key -> value, applied before validation

    Returns:
        list: (combination dict, RunConfig) pairs, one per sweep combination
    """
    raw, lines = read_config(path)
    for dotted, value in (overrides or {}).items():
        set_dotted(raw, dotted, value)
    configs = [
        (combination, validate_config(config, lines, source=path))
        for combination, config in expand_sweeps(raw)
    ]
    logging.info("Config found and built")
    return configs
