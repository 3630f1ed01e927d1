"""Command-line front end.

Commands::

    costly-recognition solve     --scenario FILE [--csv OUT] [--roots largest|all] [--grid N] [--tol X]
    costly-recognition design    --scenario FILE [--csv OUT] [--grid N] [--tol X]
    costly-recognition verify    --scenario FILE --csv SOLUTION [--tol X]
    costly-recognition simulate  --scenario FILE [--seed N] [--rounds N] [--csv OUT]
    costly-recognition reproduce {ex1,ex2,ex3,thm2-roundtrip,thm3-signs}

Exit codes: 0 success, 1 bad input, 2 solver failure, 3 verification or
assertion failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace

import numpy as np

from .design import DesignProblem, sweep_k
from .model import N1, N2, N3, Equilibrium, GameSpec, ModelError
from .oracle import simulate_bargaining
from .reproduce import REPRODUCTIONS
from .scenario import Scenario, ScenarioError, load_scenario
from .solver import SolverError, solve, solve_all, verify_equilibrium

EXIT_OK, EXIT_INPUT, EXIT_SOLVER, EXIT_VERIFY = 0, 1, 2, 3
GROUP_NAMES = {N1: "N1", N2: "N2", N3: "N3"}


def g10(x: float) -> str:
    """Ten significant digits."""
    return f"{x:.10g}"


def _vec(v) -> str:
    return "(" + ", ".join(g10(float(t)) for t in v) + ")"


# ---------------------------------------------------------------------------
# printing
# ---------------------------------------------------------------------------


def print_equilibrium(game: GameSpec, eq: Equilibrium, out=None) -> None:
    out = out or sys.stdout
    spreads = eq.prize_spreads()
    print(f"{'agent':>5} {'group':>5} {'x':>10} {'p':>8} {'mu':>8} {'v':>8} {'spread':>8}", file=out)
    for i in range(eq.n):
        print(
            f"{i + 1:>5} {GROUP_NAMES[eq.partition[i]]:>5} {eq.x[i]:>10.4f} {eq.p[i]:>8.4f} "
            f"{eq.mu[i]:>8.4f} {eq.v[i]:>8.4f} {spreads[i]:>8.4f}",
            file=out,
        )
    print(f"{'total':>5} {'':>5} {eq.total_effort():>10.4f}", file=out)
    print(f"x       = {_vec(eq.x)}", file=out)
    print(f"p       = {_vec(eq.p)}", file=out)
    print(f"mu      = {_vec(eq.mu)}", file=out)
    print(f"v       = {_vec(eq.v)}", file=out)
    print(f"V_L     = {g10(eq.VL)}", file=out)
    print(f"V_delta = {g10(eq.VDelta)}", file=out)
    print(f"Y       = {g10(eq.Y)}", file=out)
    print("coalitions (proposer: members, psi > 1/2):", file=out)
    for i, members in enumerate(eq.coalitions()):
        fractional = [j + 1 for j in range(eq.n) if j != i and 1e-9 < eq.psi[i, j] < 1 - 1e-9]
        extra = f"  fractional: {fractional}" if fractional else ""
        print(f"  {i + 1}: {{{', '.join(map(str, members))}}}{extra}", file=out)


def print_report(report, out=None) -> None:
    out = out or sys.stdout
    status = "PASS" if report.passed else "FAIL"
    print(f"verification: {status}  max residual {report.max_residual:.3e} ({report.worst}), tol {report.tol:.1e}", file=out)
    for name, val in report.residuals.items():
        print(f"  {name:<16} {float(val):.3e}", file=out)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def write_solution_csv(eq: Equilibrium, path) -> None:
    """Equilibrium in CSV; values carry full precision so that re-verifying
    the file gives the same residuals as the in-memory solution."""
    n = eq.n
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["agent", "x", "p", "mu", "v", "group"] + [f"psi_{j + 1}" for j in range(n)] + ["Y", "V_delta", "V_L"])
        for i in range(n):
            row = [i + 1] + [repr(float(t)) for t in (eq.x[i], eq.p[i], eq.mu[i], eq.v[i])]
            row.append(GROUP_NAMES[eq.partition[i]])
            row += [repr(float(t)) for t in eq.psi[i]]
            row += [repr(eq.Y), repr(eq.VDelta), repr(eq.VL)]
            wr.writerow(row)


def read_solution_csv(path, n: int) -> Equilibrium:
    """Inverse of :func:`write_solution_csv`.

    Raises:
        ScenarioError: malformed file or wrong number of agents.
    """
    names = {v: k for k, v in GROUP_NAMES.items()}
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ScenarioError(f"{path}: cannot read: {exc.strerror}") from None
    if len(rows) != n:
        raise ScenarioError(f"{path}: {len(rows)} rows for {n} agents")
    try:
        rows.sort(key=lambda r: int(r["agent"]))
        col = lambda key: np.array([float(r[key]) for r in rows])  # noqa: E731
        psi = np.array([[float(r[f"psi_{j + 1}"]) for j in range(n)] for r in rows])
        part = tuple(names[r["group"]] for r in rows)
        return Equilibrium(
            col("x"), col("p"), col("mu"), psi, col("v"),
            float(rows[0]["Y"]), float(rows[0]["V_delta"]), float(rows[0]["V_L"]), part,
        )
    except (KeyError, ValueError) as exc:
        raise ScenarioError(f"{path}: malformed solution file ({exc})") from None


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _solver_cfg(sc: Scenario, args):
    cfg = sc.solver
    if getattr(args, "grid", None):
        cfg = replace(cfg, grid_points=args.grid)
    if getattr(args, "roots", None):
        cfg = replace(cfg, root_selection=args.roots)
    return cfg


def cmd_solve(args) -> int:
    sc = load_scenario(args.scenario)
    cfg = _solver_cfg(sc, args)
    game = sc.game
    eqs = solve_all(game, cfg) if cfg.root_selection == "all" else [solve(game, cfg)]
    print(f"scenario {sc.source}: n={game.n}, k={game.k}, {len(eqs)} equilibri{'um' if len(eqs) == 1 else 'a'}")
    ok = True
    for idx, eq in enumerate(eqs, start=1):
        if len(eqs) > 1:
            print(f"\n--- equilibrium {idx} (V_L = {g10(eq.VL)}) ---")
        print_equilibrium(game, eq)
        rep = verify_equilibrium(game, eq, args.tol)
        print_report(rep)
        ok = ok and rep.passed
    if args.csv:
        write_solution_csv(eqs[0], args.csv)
        print(f"wrote {args.csv}")
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_verify(args) -> int:
    sc = load_scenario(args.scenario)
    eq = read_solution_csv(args.csv, sc.game.n)
    rep = verify_equilibrium(sc.game, eq, args.tol)
    print(f"scenario {sc.source}, solution {args.csv}")
    print_report(rep)
    return EXIT_OK if rep.passed else EXIT_VERIFY


def cmd_design(args) -> int:
    sc = load_scenario(args.scenario)
    cfg = _solver_cfg(sc, args)
    ks = sc.design.k_candidates
    problem = DesignProblem(sc.game.agents, sc.objective, ks, locked=sc.design.locked)
    res = sweep_k(problem, cfg)
    mode = "locked mechanism" if res.locked else "optimised mechanism"
    print(f"scenario {sc.source}: objective {sc.objective.form}, {mode}")
    print(f"{'k':>3} {'Lambda':>14} {'verified':>9}  note")
    for row in res.rows:
        if row.result is None:
            print(f"{row.k:>3} {'failed':>14} {'':>9}  {row.error}")
            continue
        r = row.result
        note = r.note or ("HEURISTIC" if r.heuristic else "")
        print(f"{row.k:>3} {r.lambda_value:>14.4f} {str(r.verified):>9}  {note}")
    lam = {r.k: g10(r.lambda_value) for r in res.rows}
    print("Lambda by k: " + ", ".join(f"k={k}: {v}" for k, v in lam.items()))
    if res.best_k == 0:
        print("no voting rule could be solved", file=sys.stderr)
        return EXIT_SOLVER
    best = next(r for r in res.rows if r.k == res.best_k).result
    print(f"best k = {res.best_k}")
    print(f"alpha = {_vec(best.alpha)}")
    print(f"beta  = {_vec(best.beta)}")
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["k", "lambda", "verified", "heuristic"])
            for row in res.rows:
                r = row.result
                wr.writerow([row.k, repr(float(row.lambda_value)), r.verified if r else "", r.heuristic if r else ""])
        print(f"wrote {args.csv}")
    if res.dictatorship_dominates is not None:
        status = "PASS" if res.dictatorship_dominates else "FAIL"
        print(f"dictatorial rule weakly dominates: {status}")
        if not res.dictatorship_dominates:
            return EXIT_VERIFY
    return EXIT_OK


def cmd_simulate(args) -> int:
    sc = load_scenario(args.scenario)
    cfg = _solver_cfg(sc, args)
    seed = args.seed if args.seed is not None else sc.simulate.seed
    rounds = args.rounds if args.rounds is not None else sc.simulate.rounds
    if seed == 0:
        raise ScenarioError("seed 0 is reserved; use a positive seed")
    game = sc.game
    eq = solve(game, cfg)
    stats = simulate_bargaining(game, eq, rounds=rounds, seed=seed)
    print(f"scenario {sc.source}: {rounds} rounds, seed {seed}")
    print(f"{'agent':>5} {'p':>8} {'p_hat':>8} {'mu':>8} {'mu_hat':>8} {'v':>8} {'v_hat':>8} {'v_se':>10}")
    for i in range(game.n):
        print(
            f"{i + 1:>5} {eq.p[i]:>8.4f} {stats.p_hat[i]:>8.4f} {eq.mu[i]:>8.4f} {stats.mu_hat[i]:>8.4f} "
            f"{eq.v[i]:>8.4f} {stats.v_hat[i]:>8.4f} {stats.v_se[i]:>10.3e}"
        )
    print("agreement period histogram: " + ", ".join(f"{t}: {c}" for t, c in stats.agreement_histogram.items()))
    within = stats.within(eq)
    print("within 3 standard errors: " + ", ".join(f"{k}={'yes' if v else 'no'}" for k, v in within.items()))
    if args.csv:
        stats.write_csv(args.csv)
        print(f"wrote {args.csv}")
    ok = all(within.values()) and stats.immediate_agreement_share == 1.0
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_reproduce(args) -> int:
    rid = args.id
    checks = REPRODUCTIONS[rid]()
    for c in checks:
        print(c.line(rid))
    graded = [c for c in checks if c.passed is not None]
    npass = sum(bool(c.passed) for c in graded)
    ok = npass == len(graded)
    print(f"SUMMARY {rid} {'PASS' if ok else 'FAIL'} {npass}/{len(graded)}")
    return EXIT_OK if ok else EXIT_VERIFY


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="costly-recognition",
        description="Equilibria and design of bargaining games with costly proposer recognition.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, csv_help, need_csv=False):
        p.add_argument("--scenario", required=True, metavar="PATH", help="scenario file (JSON)")
        p.add_argument("--csv", required=need_csv, metavar="PATH", help=csv_help)
        p.add_argument("--tol", type=float, default=1e-7, metavar="X", help="verification tolerance (default 1e-7)")

    p = sub.add_parser("solve", help="solve the scenario's game")
    common(p, "write the equilibrium to this CSV file")
    p.add_argument("--roots", choices=("largest", "all"), help="report the largest-VL root or all roots")
    p.add_argument("--grid", type=int, metavar="N", help="VL grid points")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("design", help="compare voting rules and mechanisms")
    common(p, "write the per-k table to this CSV file")
    p.add_argument("--grid", type=int, metavar="N", help="VL grid points")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("verify", help="check a solution CSV against the scenario's game")
    common(p, "solution CSV written by 'solve'", need_csv=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", help="Monte Carlo play of the solved strategies")
    common(p, "write simulation statistics to this CSV file")
    p.add_argument("--seed", type=int, metavar="N", help="positive RNG seed (default from scenario, else 1)")
    p.add_argument("--rounds", type=int, metavar="N", help="number of simulated games")
    p.add_argument("--grid", type=int, metavar="N", help="VL grid points")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reproduce", help="run a bundled reproduction")
    p.add_argument("id", help="one of: " + ", ".join(REPRODUCTIONS))
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "reproduce" and args.id not in REPRODUCTIONS:
        print(f"error: unknown reproduction {args.id!r} (choose from {', '.join(REPRODUCTIONS)})", file=sys.stderr)
        return EXIT_INPUT
    if getattr(args, "tol", 1.0) is not None and not getattr(args, "tol", 1.0) > 0:
        print("error: --tol must be positive", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except (ScenarioError, ModelError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
