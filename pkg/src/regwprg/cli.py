"""Command-line driver: ``gen``, ``verify``, ``wprg``, ``estimate`` and ``rerun``.

Exit codes: 0 when every check passes, 1 when a check fails, 2 on bad input.
Every report embeds the run configuration, and ``rerun`` replays it.
"""

import argparse
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
import csv
from dataclasses import asdict, dataclass, fields
from fractions import Fraction
import hashlib
import io
import json
import os
import sys

from .approx import EpsSchedule, bs_intervals, check_eps_inequality, level_matrix, residual_report
from .providers import PerturbedProvider, make_provider
from .ratlin import identity, is_zero
from .robp import NotRegularError, brute_expectation, gen_regular, is_power_of_two, load_program, save_program
from .spacerec import estimate_report, level_matrix_general, newrec_matrix, richardson_check
from .svapprox import sv_main_harness
from .weights import BaseCertificationError, wprg_main_harness
from .wprg import build_wprg, enum_term, expand, wprg_report

SUITES = ("identity", "weights", "sv", "expand", "newrec", "richardson", "eps")
PROVIDERS = ("exact", "perturbed", "prg", "rounded")


class InputError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    program: str | None = None
    program_sha256: str | None = None
    suite: str | None = None
    n: int | None = None
    w: int | None = None
    seed: int = 0
    gamma: str = "1/4"
    eps: str | None = None
    k: int | None = None
    kmax: int = 3
    provider: str | None = None
    delta: str | None = None
    mode: str | None = None
    tol: float = 1e-9
    sample: int | None = None
    out: str | None = None
    threads: int = 1

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


def threads_from_env():
    raw = os.environ.get("REGWPRG_THREADS", "1")
    try:
        val = int(raw)
    except ValueError:
        raise InputError(f"REGWPRG_THREADS must be an integer, got {raw!r}")
    return max(1, val)


def parse_rational(text, name):
    try:
        return Fraction(str(text))
    except (ValueError, ZeroDivisionError):
        raise InputError(f"{name}: cannot parse {text!r} as a rational")


def _sha(path):
    with open(path, "rb") as f:
        return hashlib.sha256(f.read()).hexdigest()


def _load(cfg):
    try:
        b = load_program(cfg.program)
    except NotRegularError as e:
        raise InputError(f"{cfg.program}: program is not regular: {e}")
    except (OSError, ValueError, KeyError, TypeError) as e:
        raise InputError(f"{cfg.program}: {e}")
    cfg.program_sha256 = _sha(cfg.program)
    return b


def _pmap(cfg, fn, items):
    if cfg.threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        return list(pool.map(fn, items))


def _jsonable(x):
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if hasattr(x, "item"):
        return x.item()
    return x


def _emit(cfg, payload, rows=None, columns=None):
    """Write JSON (structured) or CSV (tables) to ``cfg.out`` or stdout."""
    if rows is not None and cfg.out and cfg.out.endswith(".csv"):
        buf = io.StringIO()
        buf.write("# config: " + json.dumps(cfg.to_dict(), sort_keys=True) + "\n")
        out = csv.writer(buf, lineterminator="\n")
        out.writerow(columns)
        for row in rows:
            out.writerow([_jsonable(row.get(c)) for c in columns])
        text = buf.getvalue()
    else:
        text = json.dumps({"config": cfg.to_dict(), **_jsonable(payload)}, sort_keys=True, indent=1) + "\n"
    if cfg.out:
        with open(cfg.out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _schedule(cfg, b):
    gamma = parse_rational(cfg.gamma, "gamma")
    try:
        return EpsSchedule(gamma, b.n)
    except ValueError as e:
        raise InputError(str(e))


def _provider(cfg, b, default_kind, schedule):
    kind = cfg.provider or default_kind
    if kind not in PROVIDERS:
        raise InputError(f"unknown provider {kind!r}")
    base_bound = schedule.eps(0) / 3
    if kind == "perturbed":
        delta = parse_rational(cfg.delta, "delta") if cfg.delta else base_bound
        try:
            return PerturbedProvider(b, delta, cfg.mode or "inf", cfg.seed)
        except ValueError as e:
            raise InputError(str(e))
    if kind == "rounded":
        return make_provider("rounded", b, grid_bits=1, target=base_bound, fill_budget=True)
    return make_provider(kind, b, seed=cfg.seed)


def suite_identity(cfg, b, schedule):
    k = cfg.k if cfg.k is not None else cfg.kmax
    p = _provider(cfg, b, "perturbed", schedule)
    rows = residual_report(p, k)
    return {"provider": p.config(), "rows": rows}, all(r["pass"] for r in rows)


def suite_weights(cfg, b, schedule):
    if cfg.provider is None and cfg.mode is None:
        cfg.mode = "weight"
    p = _provider(cfg, b, "perturbed", schedule)
    rows = wprg_main_harness(b, schedule.gamma, cfg.kmax, p)
    return {"provider": p.config(), "rows": rows}, all(r["pass"] for r in rows)


def suite_sv(cfg, b, schedule):
    p = _provider(cfg, b, "rounded", schedule)
    rows = sv_main_harness(b, schedule.gamma, cfg.kmax, p, cfg.tol)
    return {"provider": p.config(), "rows": rows}, all(r["pass"] for r in rows)


def check_expand(p, l, r, k):
    """Signed level-0 products of ``expand`` against ``level_matrix``, plus the size bounds."""
    terms = expand(l, r, k)
    net = Counter()
    for t in terms:
        net[t.indices] += t.sign
    total = identity(p.w) * 0
    for seq, coef in net.items():
        if coef:
            prod = identity(p.w)
            for a, c in zip(seq, seq[1:]):
                prod = prod @ p.base(a, c)
            total = total + coef * prod
    t = (r - l).bit_length() - 1
    max_len = max(len(s.indices) - 1 for s in terms)
    return {
        "key": [l, r, k], "terms": len(terms), "max_len": max_len,
        "sum_ok": bool(is_zero(total - level_matrix(p, l, r, k))),
        "size_ok": len(terms) <= (r - l) ** (2 * k),
        "len_ok": max_len <= k * t + 1,
    }


def check_enum(n, k):
    width = 2 * k * (n.bit_length() - 1)
    got = Counter()
    for i in range(1 << width):
        s = enum_term(n, k, i)
        if s.sign:
            got[s] += 1
    return got == Counter(expand(0, n, k))


def suite_expand(cfg, b, schedule):
    p = _provider(cfg, b, "perturbed", schedule)
    keys = [(l, r, k) for l, r in bs_intervals(b.n) for k in range(cfg.kmax + 1)]
    rows = _pmap(cfg, lambda key: check_expand(p, *key), keys)
    enum = {}
    if b.n <= 8:
        for k in range(min(cfg.kmax, 2) + 1):
            enum[str(k)] = check_enum(b.n, k)
    ok = all(r["sum_ok"] and r["size_ok"] and r["len_ok"] for r in rows) and all(enum.values())
    return {"provider": p.config(), "rows": rows, "enum_multiset": enum}, ok


def depth_bound(k):
    return (max(k, 1) - 1).bit_length() + 1


def check_newrec(p, l, r, k, h):
    m, ledger = newrec_matrix(p, l, r, k, h)
    return {"key": [l, r, k, h], "equal": bool(is_zero(m - level_matrix_general(p, l, r, k))),
            **ledger.to_dict(), "depth_ok": ledger.max_recursion_depth <= depth_bound(k)}


def suite_newrec(cfg, b, schedule):
    p = _provider(cfg, b, "perturbed", schedule)
    keys = [(l, r, k, h) for l in range(b.n) for r in range(l + 1, b.n + 1)
            for k in range(1, cfg.kmax + 1) for h in range(1, k + 1)]
    rows = _pmap(cfg, lambda key: check_newrec(p, *key), keys)
    return {"provider": p.config(), "rows": rows}, all(r["equal"] and r["depth_ok"] for r in rows)


def suite_richardson(cfg, b, schedule):
    p = _provider(cfg, b, "perturbed", schedule)
    rows = [richardson_check(p, k) for k in range(cfg.kmax + 1)]
    return {"provider": p.config(), "rows": rows}, all(r["pass"] for r in rows)


def suite_eps(cfg, b, schedule):
    rows = check_eps_inequality(schedule.gamma, b.n, cfg.kmax)
    return {"schedule": schedule.to_dict(), "rows": rows}, all(r["ok"] for r in rows)


SUITE_FUNCS = {
    "identity": suite_identity, "weights": suite_weights, "sv": suite_sv, "expand": suite_expand,
    "newrec": suite_newrec, "richardson": suite_richardson, "eps": suite_eps,
}


def cmd_gen(cfg):
    if cfg.n is None or cfg.w is None:
        raise InputError("gen needs n and w")
    if not is_power_of_two(cfg.n):
        raise InputError(f"n={cfg.n} is not a power of 2")
    if cfg.w < 1:
        raise InputError("w must be at least 1")
    if not cfg.out:
        raise InputError("gen needs an output path")
    b = gen_regular(cfg.n, cfg.w, cfg.seed)
    save_program(b, cfg.out)
    print(f"wrote {cfg.out}: n={b.n} w={b.w} regular=True")
    return 0


def cmd_verify(cfg):
    if cfg.suite not in SUITES:
        raise InputError(f"unknown suite {cfg.suite!r}; choose from {', '.join(SUITES)}")
    b = _load(cfg)
    schedule = _schedule(cfg, b)
    try:
        payload, ok = SUITE_FUNCS[cfg.suite](cfg, b, schedule)
    except BaseCertificationError as e:
        print(f"base certification failed: {e}", file=sys.stderr)
        _emit(cfg, {"suite": cfg.suite, "pass": False, "error": str(e)})
        return 1
    payload = {"suite": cfg.suite, "pass": ok, **payload}
    rows = payload.get("rows")
    cols = list(rows[0].keys()) if rows else None
    _emit(cfg, payload, rows if cols else None, cols)
    print(f"{cfg.suite}: {'PASS' if ok else 'FAIL'}", file=sys.stderr)
    return 0 if ok else 1


WPRG_COLUMNS = ["n", "w", "gamma", "k", "d", "S", "inw_lambda", "eval", "truth", "abs_error", "bound", "pass"]


def cmd_wprg(cfg):
    b = _load(cfg)
    eps = parse_rational(cfg.eps, "eps")
    if eps <= 0:
        raise InputError("eps must be positive")
    schedule = _schedule(cfg, b)
    desc = build_wprg(b, eps, schedule.gamma, k=cfg.k, expander_seed=cfg.seed)
    try:
        row = wprg_report(b, desc, sample=cfg.sample, seed=cfg.seed)
    except ValueError as e:
        raise InputError(str(e))
    _emit(cfg, {"row": row, "descriptor": desc.to_dict()}, [row], WPRG_COLUMNS)
    print(f"wprg: d={desc.d} abs_error={row['abs_error']} bound={row['bound']} "
          f"{'PASS' if row['pass'] else 'FAIL'}", file=sys.stderr)
    return 0 if row["pass"] else 1


def cmd_estimate(cfg):
    b = _load(cfg)
    eps = parse_rational(cfg.eps, "eps")
    if eps <= 0:
        raise InputError("eps must be positive")
    try:
        rep = estimate_report(b, eps, tol=cfg.tol)
    except BaseCertificationError as e:
        print(f"base certification failed: {e}", file=sys.stderr)
        return 1
    truth = brute_expectation(b)
    err = abs(rep.value - truth)
    ok = err <= eps
    _emit(cfg, {"value": rep.value, "truth": truth, "abs_error": err, "eps": eps, "k": rep.k,
                "gamma": rep.gamma, "ledger": rep.ledger.to_dict(), "pass": ok})
    print(f"value={rep.value} (~{float(rep.value):.12g}) abs_error={float(err):.3g} "
          f"ledger={rep.ledger.to_dict()} {'PASS' if ok else 'FAIL'}", file=sys.stderr)
    return 0 if ok else 1


COMMANDS = {"gen": cmd_gen, "verify": cmd_verify, "wprg": cmd_wprg, "estimate": cmd_estimate}


def cmd_rerun(path, out=None):
    try:
        with open(path) as f:
            text = f.read()
        if text.startswith("# config: "):
            data = json.loads(text.splitlines()[0][len("# config: "):])
        else:
            data = json.loads(text)["config"]
        cfg = RunConfig.from_dict(data)
    except (OSError, ValueError, KeyError, TypeError) as e:
        raise InputError(f"{path}: no embedded config ({e})")
    cfg.out = out
    return COMMANDS[cfg.command](cfg)


def _add_common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gamma", default="1/4")
    p.add_argument("--k", type=int)
    p.add_argument("--kmax", type=int, default=3)
    p.add_argument("--provider", choices=PROVIDERS)
    p.add_argument("--delta")
    p.add_argument("--mode", choices=("inf", "weight", "sv"))
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--sample", type=int)
    p.add_argument("--out")


def build_parser():
    parser = argparse.ArgumentParser(prog="regwprg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write a seeded random regular program")
    g.add_argument("n_pos", nargs="?", type=int, metavar="n")
    g.add_argument("w_pos", nargs="?", type=int, metavar="w")
    g.add_argument("seed_pos", nargs="?", type=int, metavar="seed")
    g.add_argument("out_pos", nargs="?", metavar="out")
    g.add_argument("--n", type=int)
    g.add_argument("--w", type=int)
    _add_common(g)

    v = sub.add_parser("verify", help="run an invariant suite on a program")
    v.add_argument("program")
    v.add_argument("suite")
    _add_common(v)

    wp = sub.add_parser("wprg", help="build and exhaustively evaluate the weighted generator")
    wp.add_argument("program")
    wp.add_argument("eps_pos", nargs="?", metavar="eps")
    wp.add_argument("gamma_pos", nargs="?", metavar="gamma")
    wp.add_argument("--eps")
    _add_common(wp)

    e = sub.add_parser("estimate", help="white-box expectation estimate")
    e.add_argument("program")
    e.add_argument("eps_pos", nargs="?", metavar="eps")
    e.add_argument("--eps")
    _add_common(e)

    r = sub.add_parser("rerun", help="replay the configuration embedded in a report")
    r.add_argument("report")
    r.add_argument("--out")
    return parser


def config_from_args(args):
    a = vars(args)
    cfg = RunConfig(command=args.command, threads=threads_from_env())
    for f in fields(RunConfig):
        if f.name in a and a[f.name] is not None and f.name != "command":
            setattr(cfg, f.name, a[f.name])
    for name in ("n", "w", "seed", "out", "eps", "gamma"):
        pos = a.get(f"{name}_pos")
        if pos is not None:
            setattr(cfg, name, pos)
    if args.command == "gen" and cfg.out is None:
        raise InputError("gen needs an output path")
    if args.command in ("wprg", "estimate") and cfg.eps is None:
        raise InputError("eps is required")
    return cfg


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "rerun":
            return cmd_rerun(args.report, args.out)
        return COMMANDS[args.command](config_from_args(args))
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
