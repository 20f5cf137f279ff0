import copy
import inspect
import os
import pprint
from typing import Any, Callable, Dict, Iterable

import yaml

from .errors import ConfigError
from .utils import flatten_dict

PATH_KEYS = ("model", "initial_model", "data", "reference", "signal_a", "signal_b", "output", "logs")


def check_keys(kwargs: Dict, allowed: Iterable[str], section: str) -> None:
    if not isinstance(kwargs, dict):
        raise ConfigError("{} must be a mapping, got {}".format(section, type(kwargs).__name__))
    allowed = sorted(allowed)
    for key in kwargs:
        if key not in allowed:
            raise ConfigError("Unknown key {}.{}, expected one of {}".format(section, key, allowed))


def check_kwargs(fn: Callable, kwargs: Dict, section: str, exclude: Iterable[str] = ()) -> None:
    """Raises ConfigError for keywords that fn does not accept."""
    parameters = inspect.signature(fn).parameters
    if any(p.kind == inspect.Parameter.VAR_KEYWORD for p in parameters.values()):
        check_keys(kwargs, kwargs.keys() if isinstance(kwargs, dict) else (), section)
        return
    check_keys(kwargs, set(parameters.keys()) - set(exclude), section)


class RunConfig(object):
    def __init__(self):
        # Define the structure of a complete run configuration
        self.config = dict()
        self.config["seed"] = 0

        # Velocity models, built by name from hvfwi.physics or read from paths
        self.config["model"] = None
        self.config["model_kwargs"] = {}
        self.config["initial_model"] = None
        self.config["initial_model_kwargs"] = {}

        # Acquisition
        self.config["geometry"] = None
        self.config["geometry_kwargs"] = {}
        self.config["pml_kwargs"] = {}
        self.config["wavelet_kwargs"] = {}  # peak_frequency_hz for a Ricker source, flat otherwise
        self.config["frequencies"] = []

        # Misfit
        self.config["metric"] = "L2"
        self.config["metric_kwargs"] = {}

        # Optimizer and frequency marching
        self.config["optim"] = "ProjectedLBFGS"
        self.config["optim_kwargs"] = {}
        self.config["inversion_kwargs"] = {}

        # Experiments
        self.config["noise_kwargs"] = {}
        self.config["scan_kwargs"] = {}

        # Outputs
        self.config["writers"] = ["csv"]
        self.config["paths"] = {key: None for key in PATH_KEYS}

    def update(self, d: Dict) -> None:
        if not isinstance(d, dict):
            raise ConfigError("A config must be a mapping at the top level")
        for k, v in d.items():
            self[k] = v

    def save(self, path: str) -> None:
        if os.path.isdir(path):
            path = os.path.join(path, "config.yaml")
        with open(path, "w") as f:
            yaml.safe_dump(self.config, f, sort_keys=False)

    @classmethod
    def load(cls, path: str) -> "RunConfig":
        if os.path.isdir(path):
            path = os.path.join(path, "config.yaml")
        with open(path, "r") as f:
            data = yaml.safe_load(f)
        config = cls()
        if data is not None:
            config.update(data)
        return config

    def flatten(self) -> Dict:
        """Returns a flattened version of the config where '.' separates nested values"""
        return flatten_dict(self.config)

    def apply_override(self, override: str) -> None:
        """Applies a dotted KEY=VALUE override. The value is typed like a YAML scalar."""
        if "=" not in override:
            raise ConfigError("Overrides must look like KEY=VALUE, got " + repr(override))
        key, value = override.split("=", 1)
        try:
            value = yaml.safe_load(value)
        except yaml.YAMLError as e:
            raise ConfigError("Could not parse override value for {}: {}".format(key, e))
        if isinstance(value, str):
            # YAML 1.1 reads exponents without a dot (1e-7) as strings.
            try:
                value = float(value)
            except ValueError:
                pass
        config_path = key.strip().split(".")
        if config_path[0] not in self.config:
            raise ConfigError("Cannot override {}: unknown top level key {}".format(key, repr(config_path[0])))
        if len(config_path) == 1:
            self[config_path[0]] = value
            return
        config_dict = self[config_path[0]]
        for part in config_path[1:-1]:
            if not isinstance(config_dict, dict):
                raise ConfigError("Cannot override {}: {} is not a mapping".format(key, part))
            config_dict = config_dict.setdefault(part, dict())
        if not isinstance(config_dict, dict):
            raise ConfigError("Cannot override {}: parent is not a mapping".format(key))
        if config_path[0] == "paths" and config_path[-1] not in PATH_KEYS:
            raise ConfigError("Unknown key paths.{}, expected one of {}".format(config_path[-1], list(PATH_KEYS)))
        config_dict[config_path[-1]] = value

    def __getitem__(self, key: str) -> Any:
        return self.config[key]

    def __setitem__(self, key: str, value: Any):
        if key not in self.config:
            raise ConfigError(
                "Attempting to set an out of structure key {}. Configs must follow the format in config.py".format(
                    repr(key)
                )
            )
        if key == "paths":
            if not isinstance(value, dict):
                raise ConfigError("paths must be a mapping")
            unknown = [k for k in value if k not in PATH_KEYS]
            if len(unknown) > 0:
                raise ConfigError("Unknown key paths.{}, expected one of {}".format(unknown[0], list(PATH_KEYS)))
            paths = {k: None for k in PATH_KEYS}
            paths.update(value)
            value = paths
        elif key.endswith("_kwargs") and value is None:
            value = {}
        self.config[key] = value

    def __contains__(self, key: str) -> bool:
        return self.config.__contains__(key)

    def __str__(self) -> str:
        return pprint.pformat(self.config, indent=4)

    def copy(self) -> "RunConfig":
        config = type(self)()
        config.config = copy.deepcopy(self.config)
        return config
