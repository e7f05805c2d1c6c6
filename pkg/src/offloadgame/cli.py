"""Command line: solve one game, run the simulation presets, replay the cycle,
evaluate the price of anarchy.

Exit codes: 0 success, 1 usage or parse error, 2 instance too large,
3 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from dataclasses import replace
from typing import Sequence

from . import __version__
from .dynamics import CYCLE_PROFILES, CYCLE_USER_NAMES, build_cycle_instance, run_improvement_path
from .inductive import ORDERINGS
from .model import GameInstance, OffloadingError, WrongModelError, deviation_costs, strictly_less
from .oracle import DEFAULT_ENUM_CAP, InstanceTooLargeError, poa_report, poa_upper_bound
from .scenario import (
    ConfigError,
    ScenarioConfig,
    derive_seed,
    generate,
    instance_from_dict,
    instance_to_dict,
    run_batch,
)
from .solver import SOLVERS, solve_equilibrium

EXIT_OK, EXIT_USAGE, EXIT_TOO_LARGE, EXIT_VERIFY = 0, 1, 2, 3

PRESETS = {
    "cost-ratio": dict(
        n_users=range(2, 11), n_aps=(3,), reps=500, optimum=True, columns=("cost_ratio", "poa_bound")
    ),
    "offload-ratio": dict(
        n_users=range(2, 11), n_aps=(3,), reps=500, optimum=True, columns=("offload_diff",)
    ),
    "iterations": dict(
        n_users=range(10, 101, 10),
        n_aps=(10, 50, 100),
        reps=100,
        optimum=False,
        columns=("iterations", "entries"),
    ),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(message)


def u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"{text} is not an unsigned 64-bit integer")
    return value


def positive(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"{text} must be positive")
    return value


def int_list(text: str) -> list[int]:
    """``"2-10"``, ``"10:100:10"`` or ``"4,6,8"``."""
    try:
        if ":" in text:
            lo, hi, step = (int(x) for x in text.split(":"))
            return list(range(lo, hi + 1, step))
        if "-" in text.strip("-"):
            lo, hi = (int(x) for x in text.split("-"))
            return list(range(lo, hi + 1))
        return [int(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot read an integer list from {text!r}")


def write_atomic(path: str, text: str) -> None:
    """Write through a temporary file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit(text: str, out: str | None) -> None:
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)


def _read_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def load_game(args) -> tuple[GameInstance, str]:
    """Game selected by --fixture, --instance or the inline size flags."""
    if getattr(args, "fixture", None) == "cycle":
        game, label = build_cycle_instance().game, "cycle fixture"
    elif getattr(args, "instance", None):
        game, label = instance_from_dict(_read_json(args.instance)), args.instance
    else:
        cfg = ScenarioConfig(n_users=args.n_users, n_aps=args.n_aps, seed=args.seed)
        game, label = generate(cfg), f"random scenario seed={args.seed}"
    if args.model:
        game = game.with_cloud(args.model)
    return game, label


def _add_game_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--instance", metavar="PATH", help="instance JSON")
    src.add_argument("--fixture", choices=["cycle"], help="built-in instance")
    p.add_argument("--n-users", type=positive, default=10)
    p.add_argument("--n-aps", type=positive, default=3)
    p.add_argument("--seed", type=u64, default=0)
    p.add_argument("--model", choices=["elastic", "nonelastic"])


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="offloadgame", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="compute and verify one equilibrium")
    _add_game_args(p)
    p.add_argument("--solver", choices=SOLVERS, default="auto")
    p.add_argument("--ordering", choices=ORDERINGS, default="given")
    p.add_argument("--step-cap", type=positive)
    p.add_argument("--out", metavar="PATH", help="write a JSON report")
    p.add_argument("--format", choices=["json"], default="json")

    p = sub.add_parser("simulate", help="run a batch experiment preset")
    p.add_argument("--preset", choices=sorted(PRESETS), required=True)
    p.add_argument("--config", metavar="PATH", help="ScenarioConfig JSON for the base scenario")
    p.add_argument("--n-users", type=int_list)
    p.add_argument("--n-aps", type=int_list)
    p.add_argument("--model", choices=["elastic", "nonelastic"], help="default: both")
    p.add_argument("--reps", type=positive)
    p.add_argument("--seed", type=u64, default=0, help="master seed")
    p.add_argument("--enum-cap", type=positive, default=DEFAULT_ENUM_CAP)
    p.add_argument("--jobs", type=positive, default=1)
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--format", choices=["csv", "json"], default="csv")

    p = sub.add_parser("reproduce-cycle", help="replay the 9-step improvement cycle")
    p.add_argument("--dump-instance", metavar="PATH", help="also write the instance JSON")

    p = sub.add_parser("poa", help="price of anarchy by enumeration, and its bound")
    _add_game_args(p)
    p.add_argument("--sweep", type=int_list, metavar="N-LIST", help="sweep user counts")
    p.add_argument("--reps", type=positive, default=20, help="scenarios per sweep point")
    p.add_argument("--bound-only", action="store_true")
    p.add_argument("--enum-cap", type=positive, default=DEFAULT_ENUM_CAP)
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    return parser


def cmd_solve(args) -> int:
    game, label = load_game(args)
    report = solve_equilibrium(
        game, args.solver, ordering=args.ordering, seed=args.seed, step_cap=args.step_cap
    )
    print(f"{label}: N={game.n_users} A={game.n_aps} cloud={game.cloud.kind.value} seed={args.seed}")
    print(f"solver={report.solver} ordering={report.ordering or '-'} iterations={report.iterations}")
    print(f"profile {report.profile}")
    for i, c in enumerate(report.user_costs):
        print(f"  user {i:3d}  strategy {c.decision:3d}  cost {c.total:.6g}")
    print(f"total cost {report.total_cost:.6g}")
    if report.trace is not None:
        print(f"terminal {report.trace.terminal.value}")
    if report.verified:
        print("verified: equilibrium")
    else:
        user, better = report.verdict.witness
        print(f"verified: NOT an equilibrium (user {user} prefers {better})")
    if args.out:
        doc = {"instance": label, "seed": args.seed, **report.to_dict()}
        write_atomic(args.out, json.dumps(doc, indent=2) + "\n")
    return EXIT_OK if report.verified else EXIT_VERIFY


def cmd_simulate(args) -> int:
    preset = PRESETS[args.preset]
    base = ScenarioConfig.from_dict(_read_json(args.config)) if args.config else ScenarioConfig()
    base = replace(base, seed=0)
    n_users = args.n_users or list(preset["n_users"])
    n_aps = args.n_aps or list(preset["n_aps"])
    if preset["optimum"]:
        for n in n_users:
            for a in n_aps:
                if (a + 1) ** n > args.enum_cap:
                    raise InstanceTooLargeError(
                        f"N={n}, A={a}: {(a + 1) ** n} profiles exceed the cap {args.enum_cap}"
                    )
    clouds = [args.model] if args.model else ["elastic", "nonelastic"]
    result = run_batch(
        base,
        n_users,
        n_aps,
        clouds=clouds,
        repetitions=args.reps or preset["reps"],
        master_seed=args.seed,
        with_optimum=preset["optimum"],
        jobs=args.jobs,
    )
    text = result.to_csv(preset["columns"]) if args.format == "csv" else result.to_json() + "\n"
    emit(text, args.out)
    bad = sum(not r.verified for r in result.records)
    print(
        f"{args.preset}: {len(result.records)} runs, seed={args.seed}, N={n_users}, A={n_aps}, "
        f"unverified={bad}",
        file=sys.stderr,
    )
    return EXIT_VERIFY if bad else EXIT_OK


def cmd_reproduce_cycle(args) -> int:
    fx = build_cycle_instance()
    game = fx.game
    if args.dump_instance:
        write_atomic(args.dump_instance, json.dumps(instance_to_dict(game), indent=2) + "\n")
    ok = True
    prof = fx.initial
    print("step  mover  profile          old cost   new cost   improves")
    print(f"   0  -      {prof}")
    for step, (user, new) in enumerate(fx.schedule, start=1):
        costs = deviation_costs(game, user, prof)
        old_c, new_c = costs[prof[user]], costs[new]
        better = strictly_less(new_c, old_c)
        prof = prof[:user] + (new,) + prof[user + 1 :]
        match = prof == CYCLE_PROFILES[step]
        ok &= better and match
        print(
            f"{step:4d}  {CYCLE_USER_NAMES[user]:5s}  {prof}  {old_c:9.6f}  {new_c:9.6f}  "
            f"{'yes' if better else 'NO'}{'' if match else '  (unexpected profile)'}"
        )
    _, trace = run_improvement_path(game, fx.initial, schedule=fx.schedule)
    ok &= trace.terminal.value == "cycle" and trace.cycle_period == len(fx.schedule)
    print(f"steps={len(fx.schedule)} back_to_start={prof == fx.initial} period={trace.cycle_period}")
    print("cycle reproduced" if ok else "cycle NOT reproduced")
    return EXIT_OK if ok else EXIT_VERIFY


def _poa_row(game: GameInstance, bound_only: bool, cap: int) -> dict:
    if bound_only:
        return {"poa_upper_bound": poa_upper_bound(game)}
    rep = poa_report(game, cap)
    return {
        "optimal_cost": rep.optimal_cost,
        "best_ne_cost": rep.best_ne_cost,
        "worst_ne_cost": rep.worst_ne_cost,
        "ne_count": rep.ne_count,
        "empirical_poa": rep.empirical_poa,
        "poa_upper_bound": rep.poa_upper_bound,
        "max_ne_cost_to_local": rep.max_ne_cost_to_local,
    }


def cmd_poa(args) -> int:
    if not args.sweep:
        game, label = load_game(args)
        row = _poa_row(game, args.bound_only, args.enum_cap)
        print(f"{label}: N={game.n_users} A={game.n_aps} cloud={game.cloud.kind.value} seed={args.seed}")
        for k, v in row.items():
            print(f"{k:16s} {v}")
        if args.out:
            doc = {"instance": label, "seed": args.seed, **row}
            write_atomic(args.out, json.dumps(doc, indent=2) + "\n")
        ok = args.bound_only or 1 - 1e-9 <= row["empirical_poa"] <= row["poa_upper_bound"] * (1 + 1e-9)
        return EXIT_OK if ok else EXIT_VERIFY
    clouds = [args.model] if args.model else ["elastic", "nonelastic"]
    rows = []
    for cloud in clouds:
        for n in args.sweep:
            for rep in range(args.reps):
                seed = derive_seed(args.seed, n, args.n_aps, rep)
                game = generate(ScenarioConfig(n_users=n, n_aps=args.n_aps, cloud=cloud, seed=seed))
                rows.append(
                    {"model": cloud, "n_users": n, "n_aps": args.n_aps, "rep": rep, "seed": seed,
                     **_poa_row(game, args.bound_only, args.enum_cap)}
                )
    if args.format == "json":
        text = json.dumps({"master_seed": args.seed, "rows": rows}, indent=2) + "\n"
    else:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
        text = buf.getvalue()
    emit(text, args.out)
    bad = 0
    if not args.bound_only:
        bad = sum(
            not 1 - 1e-9 <= r["empirical_poa"] <= r["poa_upper_bound"] * (1 + 1e-9) for r in rows
        )
    print(f"poa sweep: {len(rows)} instances, seed={args.seed}, violations={bad}", file=sys.stderr)
    return EXIT_VERIFY if bad else EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "simulate": cmd_simulate,
    "reproduce-cycle": cmd_reproduce_cycle,
    "poa": cmd_poa,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"offloadgame: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InstanceTooLargeError as exc:
        print(f"offloadgame: too large: {exc}", file=sys.stderr)
        return EXIT_TOO_LARGE
    except (ConfigError, WrongModelError, ValueError) as exc:
        print(f"offloadgame: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OffloadingError as exc:
        print(f"offloadgame: error: {exc}", file=sys.stderr)
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
