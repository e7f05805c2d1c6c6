"""Random scenarios, evaluation metrics and batch experiments.

Default parameters follow the evaluation setup: AP bandwidths ~ N(5 MHz,
(0.2 * 5 MHz)^2), input sizes ~ U[0.42, 2] Mb, task sizes ~ U[0.1, 0.8]
Gcycles, device speeds ~ U[0.5, 1] GHz, both weights ~ U[0, 1], energy
per cycle ``1e-11 * (f in GHz)^2``, transmit power 0.4 W and a 100 GHz cloud.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Iterable, Sequence

import numpy as np

from .model import (
    LOCAL,
    AccessPoint,
    Cloud,
    CloudModel,
    GameInstance,
    MobileUser,
    OffloadingError,
    congestion_counts,
    is_nash,
    total_cost,
)

ENERGY_COEFF = 1e-11  # J/cycle per (GHz)^2


class ConfigError(OffloadingError, ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    n_users: int = 10
    n_aps: int = 3
    cloud: str = "nonelastic"
    bandwidth_mean_hz: float = 5e6
    bandwidth_sd_fraction: float = 0.2
    data_bits_range: tuple[float, float] = (0.42e6, 2e6)
    cycles_range: tuple[float, float] = (0.1e9, 0.8e9)
    local_speed_range: tuple[float, float] = (0.5e9, 1e9)
    tx_power_w: float = 0.4
    cloud_speed: float = 100e9
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("data_bits_range", "cycles_range", "local_speed_range"):
            lo, hi = (float(x) for x in getattr(self, name))
            if not 0 < lo <= hi:
                raise ConfigError(f"{name} must satisfy 0 < low <= high, got {(lo, hi)}")
            object.__setattr__(self, name, (lo, hi))
        if self.n_users < 1 or self.n_aps < 1:
            raise ConfigError("n_users and n_aps must be at least 1")
        try:
            Cloud(self.cloud)
        except ValueError:
            raise ConfigError(f"cloud must be 'elastic' or 'nonelastic', got {self.cloud!r}")
        if not self.bandwidth_mean_hz > 0 or self.bandwidth_sd_fraction < 0:
            raise ConfigError("bandwidth mean must be > 0 and sd fraction >= 0")
        if self.tx_power_w < 0 or not self.cloud_speed > 0:
            raise ConfigError("tx_power_w must be >= 0 and cloud_speed > 0")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        kwargs = {k: v for k, v in data.items() if k in known}
        for name in ("data_bits_range", "cycles_range", "local_speed_range"):
            if name in kwargs:
                kwargs[name] = tuple(kwargs[name])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        out = asdict(self)
        for name in ("data_bits_range", "cycles_range", "local_speed_range"):
            out[name] = list(out[name])
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def generate(config: ScenarioConfig) -> GameInstance:
    """Draw one game instance; identical configs give identical games."""
    rng = np.random.default_rng(config.seed)
    mean = config.bandwidth_mean_hz
    sd = config.bandwidth_sd_fraction * mean
    bandwidths = []
    while len(bandwidths) < config.n_aps:
        b = rng.normal(mean, sd)
        if b > 0:
            bandwidths.append(float(b))
    n = config.n_users
    data = rng.uniform(*config.data_bits_range, size=n)
    cycles = rng.uniform(*config.cycles_range, size=n)
    speed = rng.uniform(*config.local_speed_range, size=n)
    users = []
    for i in range(n):
        while True:
            w1, w2 = rng.uniform(0.0, 1.0, size=2)
            if w1 != w2:
                break
        users.append(
            MobileUser(
                data_bits=float(data[i]),
                cycles=float(cycles[i]),
                local_speed=float(speed[i]),
                energy_per_cycle=ENERGY_COEFF * (speed[i] / 1e9) ** 2,
                tx_power=config.tx_power_w,
                weight_time=float(max(w1, w2)),
                weight_energy=float(min(w1, w2)),
            )
        )
    aps = tuple(AccessPoint(b) for b in bandwidths)
    return GameInstance(tuple(users), aps, CloudModel(Cloud(config.cloud), config.cloud_speed))


USER_FIELDS = tuple(f.name for f in fields(MobileUser))


def instance_from_dict(data: dict) -> GameInstance:
    """Game from the instance JSON schema.

    The schema is the ``ScenarioConfig`` one plus optional ``users`` (objects
    with ``MobileUser`` fields) and ``aps`` (objects with ``bandwidth``). Given
    explicit lists are used as is; missing ones are drawn from the config.
    """
    if not isinstance(data, dict):
        raise ConfigError("instance document must be a JSON object")
    config = ScenarioConfig.from_dict(data)
    users_in, aps_in = data.get("users"), data.get("aps")
    if users_in is None and aps_in is None:
        return generate(config)
    drawn = None
    if users_in is None or aps_in is None:
        sized = replace(
            config,
            n_users=len(users_in) if users_in is not None else config.n_users,
            n_aps=len(aps_in) if aps_in is not None else config.n_aps,
        )
        drawn = generate(sized)
    try:
        users = (
            tuple(MobileUser(**{k: float(v) for k, v in u.items()}) for u in users_in)
            if users_in is not None
            else drawn.users
        )
        aps = (
            tuple(AccessPoint(float(a["bandwidth"])) for a in aps_in)
            if aps_in is not None
            else drawn.aps
        )
        return GameInstance(users, aps, CloudModel(Cloud(config.cloud), config.cloud_speed))
    except (TypeError, KeyError, ValueError, AttributeError) as exc:
        raise ConfigError(f"bad instance: {exc}") from exc


def instance_to_dict(game: GameInstance) -> dict:
    return {
        "n_users": game.n_users,
        "n_aps": game.n_aps,
        "cloud": game.cloud.kind.value,
        "cloud_speed": game.cloud.capability,
        "users": [{f: getattr(u, f) for f in USER_FIELDS} for u in game.users],
        "aps": [{"bandwidth": a.bandwidth} for a in game.aps],
    }


def derive_seed(master_seed: int, *keys: int) -> int:
    """Stable 64-bit seed for one run, mixed from the master seed and run keys."""
    words = np.random.SeedSequence([int(master_seed), *map(int, keys)]).generate_state(2, np.uint32)
    return int(words[0]) | (int(words[1]) << 32)


def cost_ratio(game: GameInstance, ne_profile: Sequence[int], optimal_profile: Sequence[int]) -> float:
    return total_cost(game, ne_profile) / total_cost(game, optimal_profile)


def offloading_difference_ratio(
    game: GameInstance, ne_profile: Sequence[int], optimal_profile: Sequence[int]
) -> float:
    _, n_ne = congestion_counts(game, ne_profile)
    _, n_opt = congestion_counts(game, optimal_profile)
    return (n_ne - n_opt) / game.n_users


# ---------------------------------------------------------------------------
# Batch experiments


@dataclass(frozen=True)
class RunRecord:
    model: str
    n_users: int
    n_aps: int
    rep: int
    seed: int
    solver: str
    ordering: str
    ne_cost: float
    ne_offloaders: int
    iterations: int
    entries: int
    opt_cost: float = math.nan
    opt_offloaders: int = -1
    cost_ratio: float = math.nan
    offload_diff: float = math.nan
    poa_bound: float = math.nan
    verified: bool = True

    @property
    def key(self) -> tuple:
        return (self.model, self.n_users, self.n_aps, self.solver, self.ordering)


RECORD_FIELDS = tuple(f.name for f in fields(RunRecord))
METRICS = ("ne_cost", "cost_ratio", "offload_diff", "poa_bound", "iterations", "entries")


@dataclass(frozen=True)
class Aggregate:
    model: str
    n_users: int
    n_aps: int
    solver: str
    ordering: str
    samples: int
    means: dict[str, float]
    half_widths: dict[str, float]


def mean_ci(values: Sequence[float]) -> tuple[float, float]:
    """Sample mean and 95% half-width under the normal approximation."""
    x = np.asarray([v for v in values if not math.isnan(v)], dtype=float)
    if x.size == 0:
        return math.nan, math.nan
    if x.size == 1:
        return float(x[0]), 0.0
    return float(x.mean()), float(1.96 * x.std(ddof=1) / math.sqrt(x.size))


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


@dataclass
class BatchResult:
    master_seed: int
    records: list[RunRecord] = field(default_factory=list)

    def aggregates(self) -> list[Aggregate]:
        groups: dict[tuple, list[RunRecord]] = {}
        for r in self.records:
            groups.setdefault(r.key, []).append(r)
        out = []
        for key, recs in groups.items():
            means, hws = {}, {}
            for m in METRICS:
                means[m], hws[m] = mean_ci([float(getattr(r, m)) for r in recs])
            out.append(Aggregate(*key, samples=len(recs), means=means, half_widths=hws))
        return out

    def aggregate(self, **match) -> Aggregate:
        hits = [a for a in self.aggregates() if all(getattr(a, k) == v for k, v in match.items())]
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} aggregate rows match {match}")
        return hits[0]

    def to_csv(self, columns: Sequence[str] = METRICS) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(RECORD_FIELDS)
        for r in self.records:
            w.writerow([_fmt(getattr(r, f)) for f in RECORD_FIELDS])
        w.writerow([])
        head = ["model", "n_users", "n_aps", "solver", "ordering", "samples"]
        for m in columns:
            head += [f"{m}_mean", f"{m}_ci95"]
        w.writerow(head)
        for a in self.aggregates():
            row = [a.model, a.n_users, a.n_aps, a.solver, a.ordering, a.samples]
            for m in columns:
                row += [_fmt(a.means[m]), _fmt(a.half_widths[m])]
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()

    def to_json(self) -> str:
        recs = [{f: getattr(r, f) for f in RECORD_FIELDS} for r in self.records]
        aggs = [
            {
                "model": a.model,
                "n_users": a.n_users,
                "n_aps": a.n_aps,
                "solver": a.solver,
                "ordering": a.ordering,
                "samples": a.samples,
                "mean": a.means,
                "ci95": a.half_widths,
            }
            for a in self.aggregates()
        ]

        def clean(v):
            if isinstance(v, float) and math.isnan(v):
                return None
            if isinstance(v, dict):
                return {k: clean(x) for k, x in v.items()}
            if isinstance(v, list):
                return [clean(x) for x in v]
            return v

        return json.dumps(clean({"master_seed": self.master_seed, "records": recs, "aggregates": aggs}), indent=2)


@dataclass(frozen=True)
class _Task:
    config: ScenarioConfig
    rep: int
    master_seed: int
    orderings: tuple[str, ...]
    with_optimum: bool
    verify: bool


def _run_task(task: _Task) -> list[RunRecord]:
    # imported here to keep scenario importable from the solver modules
    from . import dynamics, inductive, oracle

    cfg = task.config
    game = generate(cfg)
    opt = None
    if task.with_optimum:
        opt, _ = oracle.optimal_profile(game)
    bound = oracle.poa_upper_bound(game)

    runs: list[tuple[str, str, tuple[int, ...], int, int]] = []
    if game.elastic:
        prof, trace = dynamics.run_improvement_path(game)
        runs.append(("dynamics", "round_robin", prof, len(trace.steps), len(trace.steps)))
    else:
        for ordering in task.orderings:
            seed = derive_seed(task.master_seed, cfg.n_users, cfg.n_aps, task.rep, 1)
            prof, rep = inductive.solve(game, ordering, seed=seed, debug=False)
            runs.append(("inductive", ordering, prof, rep.total_updates, rep.total_updates + game.n_users))

    out = []
    for solver, ordering, prof, iters, entries in runs:
        _, n_ne = congestion_counts(game, prof)
        rec = dict(
            model=cfg.cloud,
            n_users=cfg.n_users,
            n_aps=cfg.n_aps,
            rep=task.rep,
            seed=cfg.seed,
            solver=solver,
            ordering=ordering,
            ne_cost=total_cost(game, prof),
            ne_offloaders=n_ne,
            iterations=iters,
            entries=entries,
            poa_bound=bound,
            verified=bool(is_nash(game, prof)) if task.verify else True,
        )
        if opt is not None:
            rec.update(
                opt_cost=total_cost(game, opt),
                opt_offloaders=congestion_counts(game, opt)[1],
                cost_ratio=cost_ratio(game, prof, opt),
                offload_diff=offloading_difference_ratio(game, prof, opt),
            )
        out.append(RunRecord(**rec))
    return out


def run_batch(
    base: ScenarioConfig,
    n_users: Iterable[int],
    n_aps: Iterable[int],
    clouds: Iterable[str] = ("elastic", "nonelastic"),
    repetitions: int = 500,
    master_seed: int = 0,
    orderings: Sequence[str] = ("random", "ratio"),
    with_optimum: bool = True,
    verify: bool = True,
    jobs: int = 1,
) -> BatchResult:
    """Solve ``repetitions`` random games for every grid point.

    Elastic games are solved by round-robin improvement dynamics from the
    all-local profile; non-elastic games by the inductive solver once per
    entry ordering. The game drawn for ``(N, A, rep)`` is the same for both
    cloud models. Records come back in grid order whatever ``jobs`` is.
    """
    if repetitions < 1:
        raise ConfigError("repetitions must be at least 1")
    if jobs < 1:
        raise ConfigError("jobs must be at least 1")
    clouds, n_users, n_aps = list(clouds), list(n_users), list(n_aps)
    tasks = []
    for cloud in clouds:
        for a in n_aps:
            for n in n_users:
                for rep in range(repetitions):
                    cfg = replace(
                        base, n_users=n, n_aps=a, cloud=cloud, seed=derive_seed(master_seed, n, a, rep)
                    )
                    tasks.append(_Task(cfg, rep, master_seed, tuple(orderings), with_optimum, verify))
    result = BatchResult(master_seed)
    if jobs == 1:
        parts = map(_run_task, tasks)
    else:
        pool = ProcessPoolExecutor(max_workers=jobs)
        parts = pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (8 * jobs)))
    try:
        for recs in parts:
            result.records.extend(recs)
    finally:
        if jobs != 1:
            pool.shutdown()
    return result
