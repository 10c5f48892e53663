"""Scenario files, the built-in preset catalog and batch execution.

A scenario is a JSON document::

    {
      "name": "fig2",
      "market": {"T": 10, "lambda": 0.001, "alpha": 0.5, "beta": 0.5, "rho": 0.1},
      "env": {"a": 0, "b": 0, "sigma": 0.01, "sigma_eps": 0.02, "rho_env_eps": 0, "mu_eps": 0},
      "traders": [{"inventory": 1e5, "risk_aversion": 0.001, "wealth": 0}, {...}],
      "simulation": {"paths": 10000, "seed": 20240001, "initial_price": 100},
      "sweep": [{"path": "env.sigma", "values": [0.01, 1, 10]}]
    }

Every key except ``traders`` (and ``market.T``) has a default taken from
the benchmark parameter set.  Per-period parameters accept a scalar or a
list of length ``T``.  A sweep entry either varies one parameter
(``{"path", "values"}``) or several in lockstep
(``{"paths": [...], "values": [[...], ...]}``); separate entries combine as
a Cartesian product.  Parameter paths look like ``market.rho``,
``env.sigma`` or ``traders.1.risk_aversion`` (0-based trader index).
"""

from __future__ import annotations

import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ImpactGameError, ParseError, ValidationError
from .market import EnvParams, MarketParams, TraderSpec, validate
from .simulate import SimulationConfig, SimulationSummary, simulate_paths
from .solver import EquilibriumSolution, solve_equilibrium

PRESET_SEED = 20240001
BENCHMARK = {
    "market": {"T": 10, "lambda": 0.001, "alpha": 0.5, "beta": 0.5, "rho": 0.1},
    "env": {"a": 0.0, "b": 0.0, "sigma": 0.01, "sigma_eps": 0.02, "rho_env_eps": 0.0, "mu_eps": 0.0},
    "trader": {"risk_aversion": 0.001, "wealth": 0.0},
    "simulation": {"paths": 10_000, "seed": PRESET_SEED, "initial_price": 100.0},
}

# JSON key -> dataclass attribute
_MARKET_KEYS = {"T": "T", "lambda": "lam", "alpha": "alpha", "beta": "beta", "rho": "rho"}
_ENV_KEYS = {k: k for k in ("a", "b", "sigma", "sigma_eps", "rho_env_eps", "mu_eps")}
_TRADER_KEYS = ("inventory", "risk_aversion", "wealth")
_SIM_KEYS = ("paths", "seed", "initial_price")


@dataclass(frozen=True)
class SweepAxis:
    """Parameters varied together; ``values[k]`` lists one value per path."""

    paths: tuple
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "paths", tuple(self.paths))
        object.__setattr__(self, "values", tuple(tuple(v) for v in self.values))
        for v in self.values:
            if len(v) != len(self.paths):
                raise ValidationError(f"sweep over {self.paths} has a value row of length {len(v)}")


@dataclass(frozen=True)
class Scenario:
    name: str
    market: MarketParams
    env: EnvParams
    traders: tuple
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    initial_price: float = 100.0
    sweep: tuple = ()

    def grid(self):
        """Yield ``(point, scenario)`` for every sweep combination; ``point`` maps path -> value."""
        if not self.sweep:
            yield {}, replace(self, sweep=())
            return
        for combo in itertools.product(*(axis.values for axis in self.sweep)):
            point = {}
            for axis, row in zip(self.sweep, combo):
                point.update(zip(axis.paths, row))
            yield point, apply_point(replace(self, sweep=()), point)


@dataclass(frozen=True)
class ScenarioResult:
    point: dict
    scenario: Scenario
    solution: EquilibriumSolution
    summary: SimulationSummary


# -- parameter paths ---------------------------------------------------------


def apply_point(sc: Scenario, point: dict) -> Scenario:
    for path, value in point.items():
        sc = _set_path(sc, path, value)
    return sc


def _set_path(sc: Scenario, path: str, value):
    parts = path.split(".")
    head = parts[0]
    if head == "market" and len(parts) == 2 and parts[1] in _MARKET_KEYS:
        attr = _MARKET_KEYS[parts[1]]
        if attr == "T":
            raise ValidationError("the horizon T cannot be swept")
        return replace(sc, market=replace(sc.market, **{attr: value}))
    if head == "env" and len(parts) == 2 and parts[1] in _ENV_KEYS:
        return replace(sc, env=replace(sc.env, **{parts[1]: value}))
    if head == "traders" and len(parts) == 3 and parts[1] in ("0", "1") and parts[2] in _TRADER_KEYS:
        k = int(parts[1])
        traders = list(sc.traders)
        traders[k] = replace(traders[k], **{parts[2]: value})
        return replace(sc, traders=tuple(traders))
    if head == "simulation" and len(parts) == 2 and parts[1] == "initial_price":
        return replace(sc, initial_price=float(value))
    raise ParseError(f"unknown parameter path {path!r}", field="sweep")


# -- JSON --------------------------------------------------------------------


def _number(x, where):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ParseError(f"expected a number, got {x!r}", field=where)
    return x


def _per_period(x, where):
    if isinstance(x, list):
        return [float(_number(v, where)) for v in x]
    return float(_number(x, where))


def _section(doc, key, allowed):
    sec = doc.get(key, {})
    if not isinstance(sec, dict):
        raise ParseError("expected an object", field=key)
    for k in sec:
        if k not in allowed:
            raise ParseError("unknown key", field=f"{key}.{k}")
    return sec


def scenario_from_dict(doc) -> Scenario:
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object")
    for k in doc:
        if k not in ("name", "market", "env", "traders", "simulation", "sweep"):
            raise ParseError("unknown key", field=k)

    m = _section(doc, "market", _MARKET_KEYS)
    if "T" not in m:
        raise ParseError("missing horizon", field="market.T")
    T = _number(m["T"], "market.T")
    if int(T) != T or T < 1:
        raise ParseError("T must be a positive integer", field="market.T")
    T = int(T)
    mkw = {"T": T}
    for key, attr in _MARKET_KEYS.items():
        if key == "T":
            continue
        val = m.get(key, BENCHMARK["market"][key])
        mkw[attr] = float(_number(val, f"market.{key}")) if key == "rho" else _per_period(val, f"market.{key}")
    market = MarketParams(**mkw)

    e = _section(doc, "env", _ENV_KEYS)
    ekw = {"T": T}
    for key in _ENV_KEYS:
        val = e.get(key, BENCHMARK["env"][key])
        ekw[key] = float(_number(val, f"env.{key}")) if key == "rho_env_eps" else _per_period(val, f"env.{key}")
    env = EnvParams(**ekw)

    raw = doc.get("traders")
    if not isinstance(raw, list) or len(raw) != 2:
        raise ParseError("expected a list of exactly two traders", field="traders")
    traders = []
    for k, tr in enumerate(raw):
        if not isinstance(tr, dict):
            raise ParseError("expected an object", field=f"traders.{k}")
        for key in tr:
            if key not in _TRADER_KEYS:
                raise ParseError("unknown key", field=f"traders.{k}.{key}")
        if "inventory" not in tr:
            raise ParseError("missing inventory", field=f"traders.{k}.inventory")
        traders.append(
            TraderSpec(
                inventory=_number(tr["inventory"], f"traders.{k}.inventory"),
                risk_aversion=_number(tr.get("risk_aversion", BENCHMARK["trader"]["risk_aversion"]), f"traders.{k}.risk_aversion"),
                wealth=_number(tr.get("wealth", BENCHMARK["trader"]["wealth"]), f"traders.{k}.wealth"),
            )
        )

    s = _section(doc, "simulation", _SIM_KEYS)
    paths = _number(s.get("paths", BENCHMARK["simulation"]["paths"]), "simulation.paths")
    seed = _number(s.get("seed", BENCHMARK["simulation"]["seed"]), "simulation.seed")
    price = _number(s.get("initial_price", BENCHMARK["simulation"]["initial_price"]), "simulation.initial_price")
    try:
        sim = SimulationConfig(num_paths=paths, seed=seed)
    except ValueError as exc:
        raise ParseError(str(exc), field="simulation") from None

    sweep = []
    raw_sweep = doc.get("sweep", [])
    if not isinstance(raw_sweep, list):
        raise ParseError("expected a list", field="sweep")
    for k, ax in enumerate(raw_sweep):
        where = f"sweep.{k}"
        if not isinstance(ax, dict):
            raise ParseError("expected an object", field=where)
        if "path" in ax and isinstance(ax.get("values"), list):
            sweep.append(SweepAxis((ax["path"],), tuple((_number(v, where),) for v in ax["values"])))
        elif isinstance(ax.get("paths"), list) and isinstance(ax.get("values"), list):
            rows = []
            for row in ax["values"]:
                if not isinstance(row, list):
                    raise ParseError("zipped sweep values must be lists", field=where)
                rows.append(tuple(_number(v, where) for v in row))
            try:
                sweep.append(SweepAxis(tuple(ax["paths"]), tuple(rows)))
            except ValidationError as exc:
                raise ParseError(str(exc), field=where) from None
        else:
            raise ParseError("sweep entries need 'path'/'values' or 'paths'/'values'", field=where)

    name = doc.get("name", "scenario")
    if not isinstance(name, str):
        raise ParseError("expected a string", field="name")
    sc = Scenario(name, market, env, tuple(traders), sim, float(price), tuple(sweep))
    check(sc)
    return sc


def check(sc: Scenario) -> Scenario:
    """Validate every grid point of the scenario."""
    for point, flat in sc.grid():
        try:
            validate(flat.market, flat.env, flat.traders)
        except ValidationError as exc:
            if point:
                exc.args = (f"{exc} (grid point {point})",)
            raise
    return sc


def _compact(values):
    vals = list(values)
    return vals[0] if all(v == vals[0] for v in vals) else vals


def scenario_to_dict(sc: Scenario) -> dict:
    m, e = sc.market, sc.env
    doc = {
        "name": sc.name,
        "market": {
            "T": m.T,
            "lambda": _compact(m.lam),
            "alpha": _compact(m.alpha),
            "beta": _compact(m.beta),
            "rho": m.rho,
        },
        "env": {
            "a": _compact(e.a),
            "b": _compact(e.b),
            "sigma": _compact(e.sigma),
            "sigma_eps": _compact(e.sigma_eps),
            "rho_env_eps": e.rho_env_eps,
            "mu_eps": _compact(e.mu_eps),
        },
        "traders": [
            {"inventory": t.inventory, "risk_aversion": t.risk_aversion, "wealth": t.wealth} for t in sc.traders
        ],
        "simulation": {
            "paths": sc.simulation.num_paths,
            "seed": sc.simulation.seed,
            "initial_price": sc.initial_price,
        },
        "sweep": [],
    }
    for ax in sc.sweep:
        if len(ax.paths) == 1:
            doc["sweep"].append({"path": ax.paths[0], "values": [v[0] for v in ax.values]})
        else:
            doc["sweep"].append({"paths": list(ax.paths), "values": [list(v) for v in ax.values]})
    return doc


def load_config(path) -> Scenario:
    """Read and validate a scenario file."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from None
    return scenario_from_dict(doc)


def dump_config(sc: Scenario, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(scenario_to_dict(sc), indent=2) + "\n")
    return path


# -- presets -----------------------------------------------------------------

SIGMA_SWEEP = {"path": "env.sigma", "values": [0.01, 1, 10]}
OPPOSITE = [{"inventory": 100_000}, {"inventory": -100_000}]

_PRESET_DOCS = {
    "benchmark": ("Benchmark parameters, symmetric inventories of 100,000", {"traders": [{"inventory": 100_000}, {"inventory": 100_000}]}),
    "fig2": (
        "Symmetric traders, sweep of environment volatility",
        {"traders": [{"inventory": 100_000}, {"inventory": 100_000}], "sweep": [SIGMA_SWEEP]},
    ),
    "fig3": (
        "Near single-trader case (200,000 vs 0, opponent gamma 1000) against two equal traders",
        {
            "traders": [{"inventory": 200_000}, {"inventory": 0}],
            "sweep": [
                {
                    "paths": ["traders.0.inventory", "traders.1.inventory", "traders.1.risk_aversion"],
                    "values": [[200_000, 0, 1000], [100_000, 100_000, 0.001]],
                },
                SIGMA_SWEEP,
            ],
        },
    ),
    "fig4": ("One trader holds 100,000, the other nothing", {"traders": [{"inventory": 100_000}, {"inventory": 0}], "sweep": [SIGMA_SWEEP]}),
    "fig5": ("Opposite inventories of +-100,000", {"traders": OPPOSITE, "sweep": [SIGMA_SWEEP]}),
    "fig6": ("Opposite inventories, random-walk environment, negative drift", {"traders": OPPOSITE, "env": {"a": -0.5, "b": -1}, "sweep": [SIGMA_SWEEP]}),
    "fig7": ("Opposite inventories, random-walk environment, no drift", {"traders": OPPOSITE, "env": {"a": 0, "b": -1}, "sweep": [SIGMA_SWEEP]}),
    "fig8": ("Opposite inventories, random-walk environment, positive drift", {"traders": OPPOSITE, "env": {"a": 0.5, "b": -1}, "sweep": [SIGMA_SWEEP]}),
}
for _name, _a in (("fig10", -0.5), ("fig11", 0), ("fig12", 1)):
    _PRESET_DOCS[_name] = (
        f"Opposite inventories, drift {_a}, sweep of the AR coefficient",
        {"traders": OPPOSITE, "env": {"a": _a}, "sweep": [{"path": "env.b", "values": [-0.5, 0, 1, 1.2]}]},
    )
for _name, _b in (("fig13", -0.5), ("fig14", 0), ("fig15", 0.5)):
    _PRESET_DOCS[_name] = (
        f"Opposite inventories, AR coefficient {_b}, sweep of the drift",
        {"traders": OPPOSITE, "env": {"b": _b}, "sweep": [{"path": "env.a", "values": [-0.5, 0, 0.5, 1]}]},
    )
_PRESET_DOCS["fig16"] = (
    "Opposite inventories, drift and AR coefficient moved together (a = 1 + b)",
    {
        "traders": OPPOSITE,
        "sweep": [{"paths": ["env.a", "env.b"], "values": [[0.5, -0.5], [1, 0], [1.5, 0.5], [2, 1]]}],
    },
)


def preset_names():
    return list(_PRESET_DOCS)


def preset_description(name: str) -> str:
    return _PRESET_DOCS[name][0]


def preset(name: str) -> Scenario:
    """Build a catalog scenario; unspecified parameters take benchmark values."""
    if name not in _PRESET_DOCS:
        raise ValidationError(f"unknown preset {name!r}; choose from {', '.join(_PRESET_DOCS)}")
    overrides = _PRESET_DOCS[name][1]
    doc = {
        "name": name,
        "market": dict(BENCHMARK["market"]),
        "env": {**BENCHMARK["env"], **overrides.get("env", {})},
        "traders": overrides["traders"],
        "simulation": dict(BENCHMARK["simulation"]),
        "sweep": overrides.get("sweep", []),
    }
    return scenario_from_dict(json.loads(json.dumps(doc)))


# -- execution ---------------------------------------------------------------


def _run_point(point, flat: Scenario, workers):
    try:
        sol = solve_equilibrium(flat.market, flat.env, flat.traders)
        cfg = replace(flat.simulation, max_workers=workers)
        summary, _ = simulate_paths(sol, flat.market, flat.env, flat.traders, cfg, initial_price=flat.initial_price)
    except ImpactGameError as exc:
        if point:
            exc.args = (f"{exc} (grid point {point})",)
        raise
    return ScenarioResult(point, flat, sol, summary)


def run_scenario(scenario: Scenario, workers: int | None = None):
    """Solve and simulate every grid point; results come back in grid order."""
    points = list(scenario.grid())
    workers = workers or scenario.simulation.max_workers or 1
    if workers > 1 and len(points) > 1:
        with ThreadPoolExecutor(max_workers=min(workers, len(points))) as pool:
            return list(pool.map(lambda pf: _run_point(pf[0], pf[1], 1), points))
    return [_run_point(p, f, workers) for p, f in points]
