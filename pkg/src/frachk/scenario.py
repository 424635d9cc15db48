"""Scenario files: problem data for one leader control run."""

from __future__ import annotations

import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np

from .config import DEFAULT_CONFIG, SCHEMES
from .errors import ScenarioError
from .kernels import FractionalOrder, UniformGrid
from .model import CostParams, Network
from .sweep import SweepConfig

logger = logging.getLogger("frachk")

BUNDLED_SCENARIOS = ("example1", "example2")


@dataclass(frozen=True, eq=False)
class Scenario:
    """
    Network, order, horizon, penalty, control bound, fractional initial data and grid.

    ``x0`` has shape (N + 1, d): leader first, then the agents. Its entries are
    the data I^(1-alpha) x_j (0), not point values.
    """

    network: Network
    alpha: float
    horizon: float
    nu: float
    bound: float
    x0: np.ndarray
    n: int = DEFAULT_CONFIG["grid_nodes"]
    scheme: str = DEFAULT_CONFIG["scheme"]
    sweep: SweepConfig = field(default_factory=SweepConfig)
    name: str = "scenario"

    def __post_init__(self) -> None:
        object.__setattr__(self, "alpha", FractionalOrder(self.alpha).alpha)
        CostParams(self.nu)
        if not (math.isfinite(self.bound) and self.bound > 0):
            raise ValueError(f"Control bound K must be positive, got {self.bound}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"Unknown scheme '{self.scheme}', expected one of {', '.join(SCHEMES)}")
        x0 = np.array(self.x0, dtype=float).reshape(self.network.blocks, self.network.dim)
        if not np.all(np.isfinite(x0)):
            raise ValueError("Initial data must be finite")
        x0.setflags(write=False)
        object.__setattr__(self, "x0", x0)
        # Validates horizon and n
        UniformGrid(self.horizon, self.n)

    @property
    def grid(self) -> UniformGrid:
        return UniformGrid(self.horizon, self.n)

    @property
    def cost_params(self) -> CostParams:
        return CostParams(self.nu)

    def replace(self, **changes: Any) -> "Scenario":
        """Copy with some fields changed (e.g. ``n`` or ``alpha``)."""
        return dataclasses.replace(self, **changes)


def _number(data: dict[str, Any], key: str, path: str) -> float:
    if key not in data:
        raise ScenarioError(path, "missing field")
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(path, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ScenarioError(path, f"must be finite, got {value!r}")
    return float(value)


def _positive(data: dict[str, Any], key: str, path: str) -> float:
    value = _number(data, key, path)
    if value <= 0:
        raise ScenarioError(path, f"must be positive, got {value:g}")
    return value


def _block(value: Any, path: str) -> list[float]:
    if isinstance(value, bool):
        raise ScenarioError(path, f"expected a number or a list of numbers, got {value!r}")
    if isinstance(value, (int, float)):
        items = [value]
    elif isinstance(value, list) and value:
        items = value
    else:
        raise ScenarioError(path, f"expected a number or a non-empty list of numbers, got {value!r}")
    for i, item in enumerate(items):
        if isinstance(item, bool) or not isinstance(item, (int, float)) or not math.isfinite(item):
            raise ScenarioError(f"{path}[{i}]", f"expected a finite number, got {item!r}")
    return [float(item) for item in items]


def _initial_data(data: dict[str, Any]) -> np.ndarray:
    leader = data.get("leader")
    if not isinstance(leader, dict) or "x0" not in leader:
        raise ScenarioError("leader.x0", "missing field")
    agents = data.get("agents")
    if not isinstance(agents, list) or not agents:
        raise ScenarioError("agents", "expected a non-empty list of {\"x0\": ...} objects")

    blocks = [_block(leader["x0"], "leader.x0")]
    for i, agent in enumerate(agents):
        if not isinstance(agent, dict) or "x0" not in agent:
            raise ScenarioError(f"agents[{i}].x0", "missing field")
        blocks.append(_block(agent["x0"], f"agents[{i}].x0"))

    dim = len(blocks[0])
    for i, block in enumerate(blocks[1:]):
        if len(block) != dim:
            raise ScenarioError(
                f"agents[{i}].x0", f"has dimension {len(block)}, leader.x0 has dimension {dim}"
            )
    return np.array(blocks)


def _network(data: dict[str, Any], agents: int, dim: int) -> Network:
    weights = data.get("weights")
    if not isinstance(weights, list) or len(weights) != agents:
        raise ScenarioError("weights", f"expected a {agents}x{agents} matrix (one row per agent)")
    for i, row in enumerate(weights):
        if not isinstance(row, list) or len(row) != agents:
            raise ScenarioError(f"weights[{i}]", f"expected a row of {agents} numbers")
        for j, value in enumerate(row):
            path = f"weights[{i}][{j}]"
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ScenarioError(path, f"expected a finite number, got {value!r}")
            if value < 0:
                raise ScenarioError(path, f"must be non-negative, got {value:g}")
            if i == j and value != 0:
                raise ScenarioError(path, "diagonal weight must be zero (no self-influence)")

    couplings = data.get("couplings")
    if not isinstance(couplings, list) or len(couplings) != agents:
        raise ScenarioError("couplings", f"expected a list of {agents} numbers")
    for i, value in enumerate(couplings):
        path = f"couplings[{i}]"
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ScenarioError(path, f"expected a finite number, got {value!r}")
        if value < 0:
            raise ScenarioError(path, f"must be non-negative, got {value:g}")

    return Network(np.array(weights, dtype=float), np.array(couplings, dtype=float), dim)


def _sweep_config(data: dict[str, Any], defaults: dict[str, Any]) -> SweepConfig:
    section = data.get("sweep", {})
    if not isinstance(section, dict):
        raise ScenarioError("sweep", "expected an object")
    unknown = set(section) - set(defaults)
    if unknown:
        raise ScenarioError(f"sweep.{sorted(unknown)[0]}", "unknown setting")
    values = dict(defaults)
    for key in section:
        values[key] = _positive(section, key, f"sweep.{key}")
    if values["relaxation"] > 1:
        raise ScenarioError("sweep.relaxation", f"must be at most 1, got {values['relaxation']:g}")
    if values["min_relaxation"] > values["relaxation"]:
        raise ScenarioError(
            "sweep.min_relaxation",
            f"must not exceed sweep.relaxation ({values['relaxation']:g}), got {values['min_relaxation']:g}",
        )
    if values["max_iterations"] != int(values["max_iterations"]):
        raise ScenarioError("sweep.max_iterations", f"must be an integer, got {values['max_iterations']:g}")
    values["max_iterations"] = int(values["max_iterations"])
    return SweepConfig(**values)


def scenario_from_dict(
    data: Any,
    config: Optional[dict[str, Any]] = None,
    default_name: str = "scenario",
) -> Scenario:
    """
    Validate scenario JSON data.

    Args:
        data: Decoded JSON document
        config: App config supplying defaults for ``n``, ``scheme`` and ``sweep``
        default_name: Name used when the document has none

    Returns:
        Scenario

    Raises:
        ScenarioError: Naming the first offending field
    """
    config = config if config is not None else DEFAULT_CONFIG
    if not isinstance(data, dict):
        raise ScenarioError("$", "scenario must be a JSON object")

    alpha = _number(data, "alpha", "alpha")
    try:
        FractionalOrder.for_control(alpha)
    except ValueError as e:
        raise ScenarioError("alpha", str(e)) from None

    horizon = _positive(data, "T", "T")
    nu = _positive(data, "nu", "nu")
    bound = _positive(data, "K", "K")

    n = config["grid_nodes"]
    if "n" in data:
        n = _number(data, "n", "n")
        if n != int(n) or n < 2:
            raise ScenarioError("n", f"must be an integer >= 2, got {n:g}")
        n = int(n)

    scheme = data.get("scheme", config["scheme"])
    if scheme not in SCHEMES:
        raise ScenarioError("scheme", f"expected one of {', '.join(SCHEMES)}, got {scheme!r}")

    name = data.get("name", default_name)
    if not isinstance(name, str) or not name:
        raise ScenarioError("name", f"expected a non-empty string, got {name!r}")

    x0 = _initial_data(data)
    network = _network(data, x0.shape[0] - 1, x0.shape[1])
    sweep_config = _sweep_config(data, config["sweep"])

    return Scenario(
        network=network,
        alpha=alpha,
        horizon=horizon,
        nu=nu,
        bound=bound,
        x0=x0,
        n=n,
        scheme=scheme,
        sweep=sweep_config,
        name=name,
    )


def parse_scenario(path: Union[str, Path], config: Optional[dict[str, Any]] = None) -> Scenario:
    """
    Read and validate a scenario JSON file.

    Raises:
        ScenarioError: If the file is unreadable, not JSON or fails validation
    """
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except OSError as e:
        raise ScenarioError(str(path), f"cannot read file ({e.strerror or e})") from None
    except json.JSONDecodeError as e:
        raise ScenarioError(str(path), f"invalid JSON at line {e.lineno}: {e.msg}") from None
    scenario = scenario_from_dict(data, config, default_name=path.stem)
    logger.info(
        f"Loaded scenario '{scenario.name}' from {path}: N={scenario.network.agents}, "
        f"d={scenario.network.dim}, alpha={scenario.alpha}, n={scenario.n}"
    )
    return scenario


def load_bundled(name: str, config: Optional[dict[str, Any]] = None) -> Scenario:
    """
    Load one of the scenarios shipped with the package.

    Raises:
        ScenarioError: If the name is not a bundled scenario
    """
    if name not in BUNDLED_SCENARIOS:
        raise ScenarioError("scenario", f"unknown bundled scenario '{name}', expected one of {', '.join(BUNDLED_SCENARIOS)}")
    source = resources.files("frachk.scenarios").joinpath(f"{name}.json")
    data = json.loads(source.read_text(encoding="utf-8"))
    return scenario_from_dict(data, config, default_name=name)
