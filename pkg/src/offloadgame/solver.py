"""One entry point that picks a solver, runs it and verifies the result."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from . import dynamics, inductive
from .model import (
    CostBreakdown,
    GameInstance,
    NashVerdict,
    StrategyProfile,
    WrongModelError,
    is_nash,
    total_cost,
    user_cost,
)

SOLVERS = ("auto", "dynamics", "inductive")


@dataclass(frozen=True)
class SolveReport:
    profile: StrategyProfile
    solver: str
    ordering: str | None
    iterations: int
    verdict: NashVerdict
    total_cost: float
    user_costs: tuple[CostBreakdown, ...]
    trace: dynamics.ImprovementTrace | None = None
    induction: inductive.InductionReport | None = None

    @property
    def verified(self) -> bool:
        return self.verdict.is_nash

    def to_dict(self) -> dict:
        out = {
            "profile": list(self.profile),
            "solver": self.solver,
            "ordering": self.ordering,
            "iterations": self.iterations,
            "verified": self.verified,
            "witness": list(self.verdict.witness) if self.verdict.witness else None,
            "total_cost": self.total_cost,
            "user_costs": [
                {
                    "decision": c.decision,
                    "total": c.total,
                    "time": c.time_component,
                    "energy": c.energy_component,
                }
                for c in self.user_costs
            ],
        }
        if self.trace is not None:
            out["terminal"] = self.trace.terminal.value
            out["cycle_period"] = self.trace.cycle_period
        if self.induction is not None:
            out["entry_order"] = list(self.induction.order)
            out["updates_per_entry"] = [s.updates for s in self.induction.per_step]
            out["bound_violations"] = len(self.induction.bound_violations)
        return out


def solve_equilibrium(
    game: GameInstance,
    solver: str = "auto",
    ordering: str = "given",
    seed: int | None = None,
    policy: str = "round_robin",
    step_cap: int | None = None,
    initial: Sequence[int] | None = None,
) -> SolveReport:
    """Compute an equilibrium and check it by exhaustive deviation.

    ``auto`` uses improvement dynamics for the elastic cloud and the
    inductive solver for the non-elastic one. Improvement dynamics may be
    forced on a non-elastic game; they can cycle, in which case the report
    comes back unverified.
    """
    if solver not in SOLVERS:
        raise ValueError(f"unknown solver {solver!r}; expected one of {SOLVERS}")
    if solver == "auto":
        solver = "dynamics" if game.elastic else "inductive"
    trace = induction = None
    if solver == "inductive":
        if game.elastic:
            raise WrongModelError("the inductive solver is for the non-elastic cloud")
        prof, induction = inductive.solve(game, ordering, seed=seed)
        iterations = induction.total_updates
        used_ordering = ordering
    else:
        prof, trace = dynamics.run_improvement_path(
            game, initial, policy=policy, step_cap=step_cap, seed=seed
        )
        iterations = len(trace.steps)
        used_ordering = None
    return SolveReport(
        profile=prof,
        solver=solver,
        ordering=used_ordering,
        iterations=iterations,
        verdict=is_nash(game, prof),
        total_cost=total_cost(game, prof),
        user_costs=tuple(user_cost(game, i, prof) for i in range(game.n_users)),
        trace=trace,
        induction=induction,
    )
