"""Command-line entry point: ``urlkit <subcommand> ...``.

Results go to stdout as JSON.  Exit codes: 0 success, 2 validation failure (a
JSON error object is printed), 64 unknown subcommand, 65 malformed input file,
66 unreadable input file.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from fractions import Fraction

import numpy as np

EX_OK = 0
EX_INVALID = 2
EX_USAGE = 64
EX_DATAERR = 65
EX_NOINPUT = 66

SUBCOMMANDS = ("solve", "rl", "async", "minimize", "check", "metric", "topos", "learn", "udm")
TRACE_HEADER = ("t", "component", "value", "residual_sup", "box_index")


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str, detail=None):
        super().__init__(message)
        self.code, self.kind, self.detail = code, kind, detail


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(EX_INVALID, "usage", message)


# ---------------------------------------------------------------- I/O helpers

def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return None if math.isnan(v) else v
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, Fraction):
        return v.numerator if v.denominator == 1 else str(v)
    return v


def _read_text(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise CliError(EX_NOINPUT, "io", f"cannot read {path}: {exc.strerror}") from None


def load_json(path: str, build=None):
    """Parse a JSON file and hand it to ``build``.

    Syntax errors and missing or mistyped fields are malformed input (65); a
    ``ValueError`` raised by ``build`` on well-formed data is a validation error (2).
    """
    text = _read_text(path)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(EX_DATAERR, "malformed", f"{path}: {exc}") from None
    if build is None:
        return data
    try:
        return build(data)
    except (KeyError, TypeError, IndexError, AttributeError) as exc:
        raise CliError(EX_DATAERR, "malformed", f"{path}: missing or mistyped field {exc}") from None
    except ValueError as exc:
        raise CliError(EX_INVALID, type(exc).__name__, f"{path}: {exc}") from None


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_csv(path: str, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def emit_trace(trace, path: str) -> None:
    """Event CSV ``t,component,value,residual_sup,box_index``; floats in shortest round-trip form."""
    write_csv(path, TRACE_HEADER, [] if trace is None else trace.rows())


def _seed(args) -> int:
    if getattr(args, "seed", None) is not None:
        return int(args.seed)
    env = os.environ.get("URLKIT_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise CliError(EX_INVALID, "usage", f"URLKIT_SEED must be an integer, got {env!r}") from None
    return 0


def _load_mdp(path):
    from .mdp import mdp_from_json
    return load_json(path, mdp_from_json)


def _named(M, values):
    return {s: float(v) for s, v in zip(M.states, values)}


def _policy_arg(M, choice):
    """``uniform`` (default), ``optimal``, or a JSON file mapping state to action."""
    from .rl import uniform_behavior
    from .solvers import policy_iteration

    if choice in (None, "uniform"):
        return uniform_behavior(M)
    if choice == "optimal":
        return policy_iteration(M).policy

    def build(data):
        return np.array([M.action_index(data[s]) for s in M.states])

    return load_json(choice, build)


# ---------------------------------------------------------------- subcommands

def cmd_solve(args):
    from .solvers import greedy_policy, lp_solve, policy_iteration, value_iteration

    M = _load_mdp(args.mdp)
    residuals = []
    if args.method == "vi":
        res = value_iteration(M, tol=args.tol)
        V, residuals = res.values, res.residuals
        extra = {"sweeps": res.iterations, "error_bound": res.error_bound}
    elif args.method == "pi":
        res = policy_iteration(M)
        V, residuals = res.values, res.residuals
        extra = {"sweeps": res.sweeps}
    else:
        weights = None
        if args.weights:
            weights = load_json(args.weights, lambda d: [float(d[s]) for s in M.states] if isinstance(d, dict)
                                else [float(x) for x in d])
        V = lp_solve(M, weights)
        extra = {}
    pi = greedy_policy(M, V).policy
    if args.trace:
        write_csv(args.trace, ("sweep", "residual_sup"), ((k + 1, r) for k, r in enumerate(residuals)))
    return {"method": args.method, "V": _named(M, V), "policy": {M.states[s]: M.actions[a] for s, a in enumerate(pi)},
            **extra}


def cmd_rl(args):
    from .rl import monte_carlo_eval, q_learning, td0_learn, td0_linear
    from .solvers import policy_evaluation, q_from_v, value_iteration

    M = _load_mdp(args.mdp)
    seed = _seed(args)
    if args.algo == "q":
        res = q_learning(M, steps=args.steps, rate=args.rate, seed=seed)
        Qs = q_from_v(M, value_iteration(M, tol=1e-12).values)
        err = float(np.max(np.abs(np.where(M.admissible, res.Q - Qs, 0.0))))
        if args.trace:
            write_csv(args.trace, ("t", "state", "action", "value"),
                      zip(range(len(res.states)), res.states, res.actions, res.trace))
        return {"algo": "q", "seed": seed, "steps": args.steps,
                "Q": {M.states[s]: {M.actions[a]: float(res.Q[s, a]) for a in M.admissible_actions(s)}
                      for s in range(M.n_states)},
                "visits": {M.states[s]: {M.actions[a]: int(res.visits[s, a]) for a in M.admissible_actions(s)}
                           for s in range(M.n_states)},
                "starved": [list(p) for p in res.starved], "error_sup": err}
    pi = _policy_arg(M, args.policy)
    V_true = policy_evaluation(M, pi)
    if args.algo == "td":
        res = td0_learn(M, pi, steps=args.steps, rate=args.rate, seed=seed)
        if args.trace:
            write_csv(args.trace, ("t", "state", "value"), zip(range(len(res.states)), res.states, res.trace))
        return {"algo": "td", "seed": seed, "steps": args.steps, "V": _named(M, res.values),
                "visits": {s: int(v) for s, v in zip(M.states, res.visits)},
                "error_sup": float(np.max(np.abs(res.values - V_true)))}
    if args.algo == "td-linear":
        Phi = np.eye(M.n_states) if args.features is None else load_json(
            args.features, lambda d: np.array([[float(x) for x in d[s]] for s in M.states]))
        res = td0_linear(M, pi, Phi, steps=args.steps, rate=args.rate, seed=seed)
        return {"algo": "td-linear", "seed": seed, "theta": res.theta.tolist(), "V": _named(M, res.values(Phi))}
    start = args.start if args.start is not None else M.states[0]
    res = monte_carlo_eval(M, pi, start, args.episodes, mode=args.mode, seed=seed, horizon=args.horizon)
    return {"algo": "mc", "seed": seed, "mode": res.mode, "mean": res.mean, "std": res.std, "ci95": list(res.ci95)}


def _schedule_arg(text):
    if text is None:
        return {}
    if os.path.exists(text):
        return load_json(text)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(EX_DATAERR, "malformed", f"schedule: {exc}") from None
    if not isinstance(data, dict):
        raise CliError(EX_DATAERR, "malformed", "schedule must be a JSON object")
    return data


def cmd_async(args):
    from .async_engine import (async_final_coalgebra, async_value_iteration, make_schedule,
                               policy_evaluation_diagram, q_value_diagram, verify_act_conditions)
    from .solvers import policy_evaluation, q_from_v, value_iteration

    M = _load_mdp(args.mdp)
    sch = _schedule_arg(args.schedule)
    unknown = set(sch) - {"p", "D", "seed", "horizon"}
    if unknown:
        raise CliError(EX_INVALID, "usage", f"unknown schedule keys {sorted(unknown)}")
    seed = int(sch["seed"]) if "seed" in sch else _seed(args)
    horizon = int(sch.get("horizon", 10_000))
    p, D = sch.get("p", 1.0), int(sch.get("D", 0))
    if args.method == "bellman":
        schedule = make_schedule(M.n_states, horizon, p, D, seed)
        x, trace = async_value_iteration(M, schedule, tol=args.tol)
        x_star = value_iteration(M, tol=1e-13).values
        names = list(M.states)
        values = {s: float(v) for s, v in zip(names, x)}
    else:
        if args.method == "q":
            diagram = q_value_diagram(M)
            q = q_from_v(M, value_iteration(M, tol=1e-13).values)
            x_star = np.array([q[M.state_index(n.split("|")[0]), M.action_index(n.split("|")[1])] for n in diagram])
        else:
            pi = _policy_arg(M, args.policy)
            pi = pi if np.ndim(pi) == 2 else np.eye(M.n_actions)[pi]
            diagram = policy_evaluation_diagram(M, pi)
            x_star = policy_evaluation(M, pi)
        names = list(diagram)
        schedule = make_schedule(len(names), horizon, p, D, seed)
        vals, trace = async_final_coalgebra(diagram, {n: 0.0 for n in names}, schedule, tol=args.tol)
        values = {n: float(vals[n]) for n in names}
    rep = verify_act_conditions(trace, x_star, M.gamma)
    if args.trace:
        emit_trace(trace, args.trace)
    return {"method": args.method, "seed": seed, "values": values, "steps": trace.steps,
            "converged": trace.converged, "error_sup": float(np.max(np.abs(np.array(list(values.values())) - x_star))),
            "boxes": len(trace.box_starts) - 1, "box_starts": trace.box_starts[:50],
            "act_violations": len(rep.violations), "stalled": rep.stalled,
            "starved": [] if trace.converged else [names[i] for i in rep.starved]}


def cmd_minimize(args):
    from .coalgebra import coalgebra_from_json, coalgebra_to_json, largest_bisimulation, quotient_coalgebra
    from .mdp import minimize_mdp, mdp_to_json

    if args.mdp:
        M = _load_mdp(args.mdp)
        Q, _, part = minimize_mdp(M)
        out = mdp_to_json(Q)
        out["blocks"] = [[M.states[i] if isinstance(i, (int, np.integer)) else i for i in b] for b in part.blocks]
        return out
    if not args.coalgebra:
        raise CliError(EX_INVALID, "usage", "minimize needs --mdp or --coalgebra")
    A = load_json(args.coalgebra, coalgebra_from_json)
    part = largest_bisimulation(A)
    Qc, _ = quotient_coalgebra(A, part)
    out = coalgebra_to_json(Qc)
    out["blocks"] = [list(b) for b in part.blocks]
    return out


def _fail(kind, message, detail):
    raise CliError(EX_INVALID, kind, message, detail)


def cmd_check(args):
    what = args.what
    if what == "gms":
        from .metric import check_gms, space_from_json

        space = load_json(_need(args.space, "--space"), space_from_json)
        rep = check_gms(space)
        if not rep.ok:
            _fail("gms-violation", f"{len(rep.violations)} violation(s)", [list(v) for v in rep.violations])
        return {"ok": True, "points": len(space)}
    if what == "bisim":
        from .coalgebra import check_bisimulation, coalgebra_from_json

        A = load_json(_need(args.coalgebra, "--coalgebra"), coalgebra_from_json)
        B = load_json(args.other, coalgebra_from_json) if args.other else A
        rel = load_json(_need(args.relation, "--relation"), lambda d: [(str(s), str(t)) for s, t in d])
        if not check_bisimulation(A, B, rel):
            _fail("not-bisimulation", "relation is not a bisimulation", None)
        return {"ok": True, "pairs": len(rel)}
    if what == "hom":
        if args.mdp:
            from .mdp import MdpHom, check_mdp_homomorphism, optimal_value_invariance

            M, M2 = _load_mdp(args.mdp), _load_mdp(_need(args.other, "--other"))
            h = load_json(_need(args.map, "--map"), lambda d: MdpHom.from_names(M, M2, d["f"], d.get("g")))
            rep = check_mdp_homomorphism(M, M2, h)
            if not rep.ok:
                _fail("not-homomorphism", "state-action map fails the transition or reward condition",
                      {"ssp": rep.ssp_ok, "reward": rep.reward_ok, "witness": rep.witness})
            inv = optimal_value_invariance(M, M2, h)
            return {"ok": True, "value_gap": inv.gap}
        from .coalgebra import check_homomorphism, coalgebra_from_json

        A = load_json(_need(args.coalgebra, "--coalgebra"), coalgebra_from_json)
        B = load_json(_need(args.other, "--other"), coalgebra_from_json)
        f = load_json(_need(args.map, "--map"), lambda d: {str(k): str(v) for k, v in d.items()})
        rep = check_homomorphism(A, B, f)
        if not rep.ok:
            _fail("not-homomorphism", "map does not commute with the structure maps", {"state": rep.failing_state})
        return {"ok": True}
    if what == "lambek":
        from .coalgebra import coalgebra_from_json, lambek_check

        A = load_json(_need(args.coalgebra, "--coalgebra"), coalgebra_from_json)
        return {"ok": True, "bijective": lambek_check(A)}
    raise CliError(EX_INVALID, "usage", f"unknown check {what!r}")


def _need(value, flag):
    if value is None:
        raise CliError(EX_INVALID, "usage", f"missing {flag}")
    return value


def cmd_metric(args):
    from .metric import (check_gms, contraction_estimate, finite_pairs, space_from_json,
                         yoneda_isometry_check)

    space = load_json(args.space, space_from_json)
    if args.action == "check":
        rep = check_gms(space)
        if not rep.ok:
            _fail("gms-violation", f"{len(rep.violations)} violation(s)", [list(v) for v in rep.violations])
        return {"ok": True, "points": len(space)}
    if args.action == "yoneda":
        rep = yoneda_isometry_check(space)
        return {"ok": rep.ok, "nonexpansive": rep.nonexpansive, "gaps": [list(g) for g in rep.gaps]}
    # contract: the space file carries a self-map under "map"
    raw = load_json(args.space)
    if "map" not in raw:
        raise CliError(EX_DATAERR, "malformed", "contract needs a \"map\" from point to point in the space file")
    table = {str(k): v for k, v in raw["map"].items()}
    try:
        F = lambda x: table[str(x)]
        pairs = finite_pairs(space)
        est = contraction_estimate(F, pairs, lambda x, y: float(space.dist(x, y)), n_max=args.n_max)
    except KeyError as exc:
        raise CliError(EX_DATAERR, "malformed", f"map is missing point {exc}") from None
    return {"contraction": est.detected, "n": est.n, "c_hat": est.c_hat,
            "ratios": {str(k): v for k, v in est.ratios.items()}}


def cmd_topos(args):
    from . import topos as T

    data = load_json(args.instance)

    def arrow(src, dst, entry):
        return T.make_qarrow(src, dst, T.finfn_from_json(src.inputs, dst.inputs, entry["h"]),
                             T.finfn_from_json(src.outputs, dst.outputs, entry["k"]))

    try:
        if args.action == "classify":
            sub, parent = T.qobject_from_json(data["sub"]), T.qobject_from_json(data["parent"])
            i = T.finfn_from_json(sub.inputs, parent.inputs, data["i"])
            j = T.finfn_from_json(sub.outputs, parent.outputs, data["j"])
            rep = T.check_classifier(sub, parent, i, j, check_unique=not args.skip_unique)
            return {"psi": {T.value_to_json(x) if not isinstance(x, str) else x: T.value_to_json(rep.psi(x))
                            for x in parent.inputs},
                    "commutes": rep.commutes, "recovers": rep.recovers, "pullback": rep.pullback,
                    "unique": rep.unique, "ok": rep.ok}
        if args.action == "pullback":
            a, b, c = (T.qobject_from_json(data[k]) for k in ("a", "b", "c"))
            f1, f2 = arrow(a, c, data["f1"]), arrow(b, c, data["f2"])
            pb = T.pullback_q(f1, f2)
            rep = T.verify_pullback_q(f1, f2, pb, T.small_test_objects())
            return {"inputs": T.value_to_json(list(pb.apex.inputs)), "outputs": T.value_to_json(list(pb.apex.outputs)),
                    "universal": rep.ok, "cones": rep.cones}
        f, g = T.qobject_from_json(data["f"]), T.qobject_from_json(data["g"])
        exp = T.exponential_q(f, g)
        rep = T.verify_exponential(f, g, exp, T.small_test_objects())
        return {"arrows": len(exp.arrows), "outputs": len(exp.obj.outputs), "transpose_ok": rep.ok,
                "arrows_checked": rep.arrows_in}
    except (KeyError, TypeError, IndexError) as exc:
        raise CliError(EX_DATAERR, "malformed", f"{args.instance}: missing or mistyped field {exc}") from None
    except T.CommuteError as exc:
        raise CliError(EX_INVALID, "CommuteError", str(exc), _jsonable(exc.witness)) from None


def _read_data_csv(path, a_dim, b_dim):
    text = _read_text(path)
    rows = []
    first = True
    try:
        for rec in csv.reader(io.StringIO(text)):
            if not rec or all(not c.strip() for c in rec):
                continue
            try:
                vals = [float(c) for c in rec]
            except ValueError:
                if first:
                    first = False
                    continue  # header line
                raise
            first = False
            if len(vals) != a_dim + b_dim:
                raise ValueError(f"expected {a_dim + b_dim} columns, got {len(vals)}")
            rows.append((np.array(vals[:a_dim]), np.array(vals[a_dim:])))
    except ValueError as exc:
        raise CliError(EX_DATAERR, "malformed", f"{path}: {exc}") from None
    return rows


def cmd_learn(args):
    from .learn import BackpropConfig, backprop_functor, init_params, net_from_json, stream_loss, train_coalgebra

    net = load_json(args.net, net_from_json)
    data = _read_data_csv(args.data, net.a_dim, net.b_dim)
    if not data:
        raise CliError(EX_INVALID, "empty-data", "no training rows")
    cfg = BackpropConfig(eps=args.eps)
    L = backprop_functor(net, cfg)
    loss = stream_loss(net, data, cfg)
    p0 = init_params(net, _seed(args))
    tr = train_coalgebra(L, data, args.steps, p0)
    losses = [loss(p) for p in tr.params]
    if args.trace:
        write_csv(args.trace, ("step", "loss"), enumerate(losses))
    return {"seed": _seed(args), "steps": args.steps, "loss_initial": losses[0], "loss_final": losses[-1],
            "params": tr.params[-1].tolist()}


def cmd_udm(args):
    from .udm import check_causal, check_solvable, udm_from_json

    obj = load_json(args.model, udm_from_json)
    out = {"agents": list(obj.agents), "points": obj.size}
    if args.check in ("causal", "all"):
        rep = check_causal(obj)
        out["causal"] = rep.causal
        out["static_order"] = list(rep.static_order) if rep.static_order else None
        if rep.ordering is not None and rep.static_order is None:
            out["ordering"] = {str(h): list(o) for h, o in sorted(rep.ordering.items())}
    if args.check in ("solvable", "all"):
        rep = check_solvable(obj)
        out["solvable"] = rep.solvable
        out["profiles_checked"] = rep.profiles
        if rep.witness is not None:
            w, tables, count = rep.witness
            out["witness"] = {"omega": w, "solutions": count, "policies": {a: list(t) for a, t in tables.items()}}
    return out


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="urlkit", description="Coalgebraic reinforcement-learning toolkit")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("solve", help="exact optimal values of an MDP")
    s.add_argument("--method", choices=("vi", "pi", "lp"), default="vi")
    s.add_argument("--mdp", required=True)
    s.add_argument("--tol", type=float, default=1e-8)
    s.add_argument("--weights")
    s.add_argument("--trace")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("rl", help="sampled learners (Q-learning, TD(0), linear TD, Monte Carlo)")
    s.add_argument("--mdp", required=True)
    s.add_argument("--algo", choices=("q", "td", "td-linear", "mc"), default="q")
    s.add_argument("--steps", type=int, default=100_000)
    s.add_argument("--rate", default="1/(1+k)")
    s.add_argument("--policy", help="uniform, optimal, or a JSON state->action file")
    s.add_argument("--features")
    s.add_argument("--episodes", type=int, default=1000)
    s.add_argument("--mode", choices=("discounted", "average"), default="discounted")
    s.add_argument("--start")
    s.add_argument("--horizon", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--trace")
    s.set_defaults(func=cmd_rl)

    s = sub.add_parser("async", help="asynchronous fixed-point iteration with stale reads")
    s.add_argument("--mdp", required=True)
    s.add_argument("--method", choices=("bellman", "q", "td"), default="bellman")
    s.add_argument("--schedule", help='JSON such as {"p":0.3,"D":5,"seed":7,"horizon":100000}, or a file')
    s.add_argument("--policy")
    s.add_argument("--tol", type=float, default=1e-10)
    s.add_argument("--seed", type=int)
    s.add_argument("--trace")
    s.set_defaults(func=cmd_async)

    s = sub.add_parser("minimize", help="quotient by the largest bisimulation")
    s.add_argument("--mdp")
    s.add_argument("--coalgebra")
    s.set_defaults(func=cmd_minimize)

    s = sub.add_parser("check", help="validate a structure")
    s.add_argument("what", choices=("gms", "bisim", "hom", "lambek"))
    s.add_argument("--space")
    s.add_argument("--coalgebra")
    s.add_argument("--mdp")
    s.add_argument("--other")
    s.add_argument("--relation")
    s.add_argument("--map")
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("metric", help="generalized metric spaces")
    s.add_argument("action", choices=("check", "yoneda", "contract"))
    s.add_argument("--space", required=True)
    s.add_argument("--n-max", dest="n_max", type=int, default=5)
    s.set_defaults(func=cmd_metric)

    s = sub.add_parser("topos", help="classifier, pullbacks and exponentials of finite functions")
    s.add_argument("action", choices=("classify", "pullback", "exp"))
    s.add_argument("--instance", required=True)
    s.add_argument("--skip-unique", action="store_true")
    s.set_defaults(func=cmd_topos)

    s = sub.add_parser("learn", help="train a layered network as a learner")
    s.add_argument("action", choices=("train",))
    s.add_argument("--net", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--eps", type=float, default=0.01)
    s.add_argument("--steps", type=int, default=100)
    s.add_argument("--seed", type=int)
    s.add_argument("--trace")
    s.set_defaults(func=cmd_learn)

    s = sub.add_parser("udm", help="solvability and causality of a finite decision model")
    s.add_argument("--model", required=True)
    s.add_argument("--check", choices=("causal", "solvable", "all"), default="all")
    s.set_defaults(func=cmd_udm)
    return p


def _emit(obj, stream):
    stream.write(json.dumps(_jsonable(obj), sort_keys=False) + "\n")


def main(argv=None, stdout=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    out = sys.stdout if stdout is None else stdout
    if argv and not argv[0].startswith("-") and argv[0] not in SUBCOMMANDS:
        _emit({"error": "unknown-subcommand", "message": f"unknown subcommand {argv[0]!r}",
               "choices": list(SUBCOMMANDS)}, out)
        return EX_USAGE
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(out)
            return EX_USAGE
        result = args.func(args)
    except CliError as exc:
        err = {"error": exc.kind, "message": str(exc)}
        if exc.detail is not None:
            err["detail"] = exc.detail
        _emit(err, out)
        return exc.code
    except ValueError as exc:
        _emit({"error": type(exc).__name__, "message": str(exc)}, out)
        return EX_INVALID
    _emit(result, out)
    return EX_OK


if __name__ == "__main__":
    sys.exit(main())
