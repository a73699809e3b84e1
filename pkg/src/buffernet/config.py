"""JSON network-configuration ingestion with strict key checking.

Schema (all node ids 1-based, edge keys "i->j"):

    {
      "nodes": 2,
      "edges": [{"from": 1, "to": 2, "weight": 1.0}],
      "origins": [1],
      "destinations": [2],
      "markov": {"rates": [[0.0]]},
      "alpha": 0.0,
      "bounds": {"beta_bar": 2.0, "delta_bar": {"1->2": 2.0}},
      "params": {"beta": {"2": 1.0}, "delta": 1.0},
      "costs": {"g": {"2": [{"c": 1, "a": 1}]},
                "h": {"1->2": [{"c": 1, "a": 1}]},
                "budget": 3.0, "gamma_bound": 1.0}
    }

``edges[].weight`` may be a list with one entry per mode.  ``bounds.*`` and
``params.*`` accept either a scalar (applied uniformly) or a per-name map.
``costs.g``/``costs.h`` entries default to the linear cost ``1 * x**1``.
Unknown keys are rejected anywhere in the document.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .netmodel import (
    BufferNetwork,
    EdgeKey,
    Graph,
    MarkovChain,
    ParamBounds,
    TuningParams,
    build_graph,
)
from .problems import CostModel

__all__ = ["ConfigError", "LoadedConfig", "load_config", "parse_config"]


class ConfigError(ValueError):
    pass


@dataclass
class LoadedConfig:
    net: BufferNetwork
    bounds: ParamBounds | None
    params: TuningParams | None
    cost: CostModel | None
    alpha: float


def _check_keys(obj: Mapping[str, Any], required: set[str], optional: set[str], where: str) -> None:
    if not isinstance(obj, Mapping):
        raise ConfigError(f"{where} must be an object")
    unknown = set(obj) - required - optional
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise ConfigError(f"{where}: missing required key(s) {sorted(missing)}")


def _number(obj: Any, where: str) -> float:
    if isinstance(obj, bool) or not isinstance(obj, (int, float)):
        raise ConfigError(f"{where} must be a number, got {obj!r}")
    return float(obj)


def _node_id(obj: Any, where: str) -> int:
    if isinstance(obj, bool) or not isinstance(obj, int):
        raise ConfigError(f"{where} must be an integer node id, got {obj!r}")
    return obj


def _edge_key(text: str, where: str) -> EdgeKey:
    parts = text.split("->")
    if len(parts) != 2:
        raise ConfigError(f"{where}: edge key {text!r} is not of the form 'i->j'")
    try:
        return (int(parts[0]), int(parts[1]))
    except ValueError:
        raise ConfigError(f"{where}: edge key {text!r} is not of the form 'i->j'") from None


def _scalar_or_map(
    obj: Any, names: list, keyparse, where: str
) -> dict:
    """Broadcast a scalar over ``names`` or parse a per-name map."""
    if isinstance(obj, (int, float)) and not isinstance(obj, bool):
        return {name: float(obj) for name in names}
    if isinstance(obj, Mapping):
        out = {}
        for key, val in obj.items():
            out[keyparse(key, where)] = _number(val, f"{where}[{key}]")
        return out
    raise ConfigError(f"{where} must be a number or an object")


def _parse_terms(obj: Any, where: str) -> tuple[tuple[float, float], ...]:
    if not isinstance(obj, list) or not obj:
        raise ConfigError(f"{where} must be a nonempty list of monomials")
    terms = []
    for k, item in enumerate(obj):
        _check_keys(item, {"c", "a"}, set(), f"{where}[{k}]")
        terms.append((_number(item["c"], f"{where}[{k}].c"), _number(item["a"], f"{where}[{k}].a")))
    return tuple(terms)


def parse_config(data: Any) -> LoadedConfig:
    """Validate a decoded JSON document and build the model objects."""
    _check_keys(
        data,
        required={"nodes", "edges", "origins", "destinations"},
        optional={"markov", "alpha", "bounds", "params", "costs"},
        where="top level",
    )
    n = data["nodes"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ConfigError(f"nodes must be a positive integer, got {n!r}")

    markov = data.get("markov", {"rates": [[0.0]]})
    _check_keys(markov, {"rates"}, set(), "markov")
    rates = np.asarray(markov["rates"], dtype=float)
    if rates.ndim != 2 or rates.shape[0] != rates.shape[1]:
        raise ConfigError(f"markov.rates must be a square matrix, got shape {rates.shape}")
    n_modes = rates.shape[0]

    if not isinstance(data["edges"], list) or not data["edges"]:
        raise ConfigError("edges must be a nonempty list")
    per_mode_edges: list[list[tuple[int, int, float]]] = [[] for _ in range(n_modes)]
    for k, item in enumerate(data["edges"]):
        where = f"edges[{k}]"
        _check_keys(item, {"from", "to", "weight"}, set(), where)
        tail = _node_id(item["from"], f"{where}.from")
        head = _node_id(item["to"], f"{where}.to")
        weight = item["weight"]
        if isinstance(weight, list):
            if len(weight) != n_modes:
                raise ConfigError(f"{where}.weight has {len(weight)} entries for {n_modes} mode(s)")
            ws = [_number(v, f"{where}.weight[{i}]") for i, v in enumerate(weight)]
        else:
            ws = [_number(weight, f"{where}.weight")] * n_modes
        for mode in range(n_modes):
            per_mode_edges[mode].append((tail, head, ws[mode]))

    for key in ("origins", "destinations"):
        if not isinstance(data[key], list):
            raise ConfigError(f"{key} must be a list of node ids")
    origins = [_node_id(i, "origins") for i in data["origins"]]
    destinations = [_node_id(i, "destinations") for i in data["destinations"]]

    alpha = _number(data.get("alpha", 0.0), "alpha")

    graphs = tuple(
        build_graph(n, per_mode_edges[mode], origins, destinations) for mode in range(n_modes)
    )
    net = BufferNetwork(graphs, MarkovChain(rates), alpha)
    edge_keys = list(net.edge_keys)

    bounds = None
    if "bounds" in data:
        _check_keys(data["bounds"], set(), {"beta_bar", "delta_bar"}, "bounds")
        beta_bar = _scalar_or_map(
            data["bounds"].get("beta_bar", {}),
            list(net.destinations_sorted),
            lambda key, where: _node_id(int(key), where),
            "bounds.beta_bar",
        )
        delta_bar = _scalar_or_map(
            data["bounds"].get("delta_bar", {}), edge_keys, _edge_key, "bounds.delta_bar"
        )
        bounds = ParamBounds(beta_bar, delta_bar)

    params = None
    if "params" in data:
        _check_keys(data["params"], {"beta", "delta"}, set(), "params")
        beta = _scalar_or_map(
            data["params"]["beta"],
            list(net.destinations_sorted),
            lambda key, where: _node_id(int(key), where),
            "params.beta",
        )
        delta = _scalar_or_map(data["params"]["delta"], edge_keys, _edge_key, "params.delta")
        params = TuningParams(beta, delta, bounds)

    cost = None
    if "costs" in data:
        _check_keys(data["costs"], set(), {"g", "h", "budget", "gamma_bound"}, "costs")
        g_map = {i: ((1.0, 1.0),) for i in net.destinations_sorted}
        for key, val in data["costs"].get("g", {}).items():
            g_map[_node_id(int(key), "costs.g")] = _parse_terms(val, f"costs.g[{key}]")
        h_map = {k: ((1.0, 1.0),) for k in edge_keys}
        for key, val in data["costs"].get("h", {}).items():
            h_map[_edge_key(key, "costs.h")] = _parse_terms(val, f"costs.h[{key}]")
        budget = data["costs"].get("budget")
        gamma_bound = data["costs"].get("gamma_bound")
        cost = CostModel(
            g_map,
            h_map,
            budget=None if budget is None else _number(budget, "costs.budget"),
            gamma_bound=None if gamma_bound is None else _number(gamma_bound, "costs.gamma_bound"),
        )

    return LoadedConfig(net=net, bounds=bounds, params=params, cost=cost, alpha=alpha)


def load_config(path: str | Path) -> LoadedConfig:
    """Read and validate a network configuration file."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return parse_config(data)
