"""
Command-line front end.

Subcommands: ``design``, ``select``, ``theory-phase``, ``theory-tradeoff``,
``theory-exponent`` and ``simulate``.  Every run writes a JSON manifest next
to its main output (``<out>.manifest.json`` unless ``--manifest`` is given).

Exit codes: 0 on success, 2 on configuration errors (the message names the
offending key), 1 on runtime failures.
"""
import argparse
import sys
import time

import numpy as np

from . import __version__
from . import io, mc, theory
from . import mirror_stats as ms
from .design import DesignError, DesignSpec, design_from_spec
from .signal import SignalConfig, draw_beta, draw_response
from .tamper import TamperError, build_knockoffs, knockoff_s


class CliConfigError(Exception):
    def __init__(self, key, msg):
        super().__init__(f"{key}: {msg}")
        self.key = key


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliConfigError("arguments", message)


def _load_config(path):
    if path is None:
        return {}
    try:
        cfg = io.read_json(path)
    except OSError as e:
        raise CliConfigError("config", f"cannot read {path}: {e.strerror}") from None
    except ValueError as e:
        raise CliConfigError("config", f"{path} is not valid JSON ({e})") from None
    if not isinstance(cfg, dict):
        raise CliConfigError("config", "top level must be an object")
    return cfg


def _merge(cfg, args, keys):
    """Config-file values overridden by flags that were actually given."""
    out = dict(cfg)
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            out[k] = v
    return out


def _read(path, key):
    try:
        return io.read_matrix(path)
    except OSError as e:
        raise CliConfigError(key, f"cannot read {path}: {e.strerror}") from None
    except ValueError as e:
        raise CliConfigError(key, str(e)) from None


def _manifest_path(args):
    return args.manifest or f"{args.out}.manifest.json"


def _write_manifest(args, sub, resolved, extra=None, t0=None):
    m = {"subcommand": sub, "fdrlab": __version__, "config": resolved,
         "seed": resolved.get("seed"), "argv": sys.argv[1:]}
    if t0 is not None:
        m["wall_time"] = time.perf_counter() - t0
    if extra:
        m.update(extra)
    io.write_json(_manifest_path(args), m)


# ---------------------------------------------------------------- design

DESIGN_KEYS = ("kind", "p", "n", "rho", "d", "k", "seed", "theta", "r", "signed")


def cmd_design(args):
    t0 = time.perf_counter()
    cfg = _merge(_load_config(args.config), args, DESIGN_KEYS)
    cfg.setdefault("seed", 0)
    dkeys = {k: cfg[k] for k in ("kind", "p", "n", "rho", "d", "k", "seed") if k in cfg}
    for k in ("kind", "p", "n"):
        if k not in dkeys:
            raise CliConfigError(k, "required")
    try:
        spec = DesignSpec(**dkeys)
    except (TypeError, DesignError) as e:
        raise CliConfigError("design", str(e)) from None
    D = design_from_spec(spec)
    io.write_matrix(args.out, D.X)
    extra = {"outputs": {"X": args.out}}
    if args.gram_out:
        io.write_matrix(args.gram_out, D.gram)
        extra["outputs"]["gram"] = args.gram_out
    if cfg.get("theta") is not None:
        try:
            sig = SignalConfig(float(cfg["theta"]), float(cfg.get("r", 0.0)), spec.p,
                               bool(cfg.get("signed", False)))
        except ValueError as e:
            raise CliConfigError("theta", str(e)) from None
        ss = np.random.SeedSequence([spec.seed, 11])
        sb, sn = ss.spawn(2)
        beta = draw_beta(sig, sb)
        y = draw_response(D, beta, sn)
        stem = args.out.rsplit(".", 1)[0]
        io.write_matrix(f"{stem}.beta.csv", beta.beta, header=["beta"])
        io.write_matrix(f"{stem}.y.csv", y, header=["y"])
        extra["outputs"].update(beta=f"{stem}.beta.csv", y=f"{stem}.y.csv")
    _write_manifest(args, "design", cfg, extra, t0)
    return 0


# ---------------------------------------------------------------- select

SELECT_KEYS = ("method", "flavor", "ranker", "stat", "q", "u", "seed")


def cmd_select(args):
    t0 = time.perf_counter()
    cfg = _merge(_load_config(args.config), args, SELECT_KEYS)
    cfg.setdefault("seed", 0)
    cfg.setdefault("method", "knockoff")
    cfg.setdefault("flavor", "ci")
    cfg.setdefault("ranker", "lasso-path")
    cfg.setdefault("stat", "sgm")
    if cfg.get("q") is None and cfg.get("u") is None:
        cfg["q"] = 0.1
    X = _read(args.x, "x")
    y = _read(args.y, "y")
    if y.shape[1] != 1 or y.shape[0] != X.shape[0]:
        raise CliConfigError("y", f"expected one column of length {X.shape[0]}, got {y.shape}")
    y = y[:, 0]
    method = str(cfg["method"]).replace("_", "-")
    ranker = str(cfg["ranker"]).replace("-", "_")
    if ranker not in ("lasso_path", "least_squares"):
        raise CliConfigError("ranker", f"unknown ranker {cfg['ranker']!r}")
    if cfg["stat"] not in ("sgm", "dif"):
        raise CliConfigError("stat", f"unknown statistic {cfg['stat']!r}")
    if cfg["flavor"] not in ("ec", "ci"):
        raise CliConfigError("flavor", f"unknown knockoff flavor {cfg['flavor']!r}")
    G = X.T @ X
    seed = int(cfg["seed"])
    if method == "knockoff":
        b = build_knockoffs(X, knockoff_s(G, cfg["flavor"]), seed)
        sv = ms.knockoff_scores(b, y, ranker=ranker, kind=cfg["stat"])
    elif method == "gm":
        sv = ms.gm_scores(X, y, kind=cfg["stat"], seed=seed)
    elif method == "degm":
        b = build_knockoffs(X, knockoff_s(G, cfg["flavor"]), seed)
        sv = ms.degm_scores(X, b.Xtilde, y, kind=cfg["stat"])
    elif method in ("lasso", "ols"):
        if cfg.get("u") is None:
            raise CliConfigError("u", "prototypes need a fixed threshold exponent --u")
        sv = ms.prototype_scores(X, y, "lasso_path" if method == "lasso" else "least_squares")
    else:
        raise CliConfigError("method", f"unknown method {cfg['method']!r}")
    if cfg.get("u") is not None:
        sel = ms.select_at_u(sv, float(cfg["u"]))
    else:
        q = float(cfg["q"])
        if not 0 < q < 1:
            raise CliConfigError("q", f"{q} outside (0, 1)")
        sel = ms.select_at_fdr(sv, q)
    chosen = np.zeros(X.shape[1], dtype=int)
    chosen[sel.selected] = 1
    io.write_rows(args.out, [{"index": j, "score": float(sv.scores[j]), "selected": int(chosen[j])}
                             for j in range(X.shape[1])])
    _write_manifest(args, "select", cfg,
                    {"threshold": sel.threshold, "mode": sel.mode, "level": sel.level,
                     "n_selected": int(sel.selected.size), "outputs": {"selection": args.out}}, t0)
    return 0


# ---------------------------------------------------------------- theory

THEORY_KEYS = ("method", "design", "rho", "a", "signed", "flavor", "theta", "r", "u",
               "n_theta", "u_min", "u_max", "n_u")


def _theory_spec(cfg):
    if "method" not in cfg:
        raise CliConfigError("method", "required")
    name = str(cfg["method"]).replace("-", "_")
    if name not in theory.METHODS:
        raise CliConfigError("method", f"unknown method {cfg['method']!r}")
    design = cfg.get("design")
    if design is None:
        design = "block2" if ("block2" in theory._SUPPORT[name] and cfg.get("a") is None) else "orthogonal"
    param = cfg.get("rho") if design == "block2" else cfg.get("a")
    try:
        return theory.MethodSpec(name, design, float(param or 0.0), bool(cfg.get("signed", False)),
                                 cfg.get("flavor", "ci"))
    except theory.TheoryError as e:
        key = "rho" if "parameter" in str(e) else "method"
        raise CliConfigError(key, str(e)) from None


def _long_rows(xname, x, curves, spec):
    # curves: (name, values, branch tags or None)
    rows = []
    for cname, vals, branch in curves:
        for i, (xi, v) in enumerate(zip(x, vals)):
            rows.append({xname: xi, "curve": cname, "value": v, "method": spec.method,
                         "design": spec.design, "rho": spec.param,
                         "branch": "" if branch is None else branch[i]})
    return rows


def _theory_common(args):
    cfg = _merge(_load_config(args.config), args, THEORY_KEYS)
    return cfg, _theory_spec(cfg)


def cmd_theory_phase(args):
    t0 = time.perf_counter()
    cfg, spec = _theory_common(args)
    n = int(cfg.get("n_theta") or 201)
    if n < 2:
        raise CliConfigError("n_theta", "need at least 2 points")
    grid = np.linspace(0.0, 1.0, n + 2)[1:-1]
    try:
        pc = theory.phase_curves(spec, grid)
    except theory.TheoryError as e:
        raise CliConfigError("method", str(e)) from None
    rows = _long_rows("theta", grid, [("h_ar", pc.h_ar, None), ("h_er", pc.h_er, pc.branch)], spec)
    io.write_rows(args.out, rows)
    _write_manifest(args, "theory-phase", cfg, {"rho0": theory.RHO0}, t0)
    return 0


def _u_grid(cfg):
    lo = float(cfg.get("u_min") or 0.0)
    hi = float(cfg.get("u_max") or 3.0)
    n = int(cfg.get("n_u") or 301)
    if not 0 <= lo < hi or n < 2:
        raise CliConfigError("u_min", f"bad u grid [{lo}, {hi}] with {n} points")
    return np.linspace(lo, hi, n)


def _theta_r(cfg):
    try:
        theta, r = float(cfg["theta"]), float(cfg["r"])
    except KeyError as e:
        raise CliConfigError(e.args[0], "required") from None
    if not 0 < theta < 1:
        raise CliConfigError("theta", f"{theta} outside (0, 1)")
    if r < 0:
        raise CliConfigError("r", "must be nonnegative")
    return theta, r


def cmd_theory_tradeoff(args):
    t0 = time.perf_counter()
    cfg, spec = _theory_common(args)
    theta, r = _theta_r(cfg)
    u = _u_grid(cfg)
    try:
        g_tpr, g_fdr = theory.tradeoff_curve(spec, theta, r, u)
    except theory.TheoryError as e:
        raise CliConfigError("method", str(e)) from None
    io.write_rows(args.out, _long_rows("u", u, [("g_tpr", g_tpr, None), ("g_fdr", g_fdr, None)], spec))
    _write_manifest(args, "theory-tradeoff", cfg, None, t0)
    return 0


def cmd_theory_exponent(args):
    t0 = time.perf_counter()
    cfg, spec = _theory_common(args)
    theta, r = _theta_r(cfg)
    u = np.atleast_1d(float(cfg["u"])) if cfg.get("u") is not None else _u_grid(cfg)
    e = theory.fp_fn_exponents(spec, theta, r, u)
    tag = np.full(u.shape, "bound" if e.bound else "exact", dtype=object)
    curves = [(k, np.broadcast_to(getattr(e, k), u.shape), tag)
              for k in ("exp_fp", "exp_fn", "exp_hamm")]
    io.write_rows(args.out, _long_rows("u", u, curves, spec))
    ustar = theory.optimal_u(spec, theta, r)
    _write_manifest(args, "theory-exponent", cfg,
                    {"u_star": ustar, "exp_hamm_at_u_star": float(theory.hamming_exponent(spec, theta, r, ustar))},
                    t0)
    return 0


# ---------------------------------------------------------------- simulate

SIM_KEYS = ("reps", "seed", "n", "p", "thetas", "rs", "rhos", "methods", "workers", "q")


def cmd_simulate(args):
    cfg = _merge(_load_config(args.config), args, SIM_KEYS)
    preset = args.preset or cfg.pop("preset", None)
    cfg.pop("preset", None)
    try:
        if preset:
            base = mc.preset_config(preset)
            conf = mc.override(base, **cfg)
        else:
            conf = mc.ExperimentConfig.from_dict(dict(cfg, preset="custom"))
    except mc.ConfigError as e:
        raise CliConfigError(e.key, e.msg) from None
    res = mc.run_experiment(conf)
    if args.overlay:
        rows = mc.theory_overlay(conf, res.rows)
        io.write_rows(args.out, rows, mc.TABLE_COLUMNS + mc.OVERLAY_COLUMNS)
    else:
        io.write_rows(args.out, res.rows, mc.TABLE_COLUMNS)
    man = dict(res.manifest)
    man.update(subcommand="simulate", seed=conf.master_seed, argv=sys.argv[1:],
               outputs={"table": args.out})
    io.write_json(_manifest_path(args), man)
    return 0


# ---------------------------------------------------------------- parser

def _floats(s):
    try:
        return [float(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}") from None


def _strings(s):
    return [v.strip() for v in s.split(",") if v.strip()]


def build_parser():
    """Argument parser with one subcommand per task."""
    p = _Parser(prog="fdrlab", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"fdrlab {__version__}")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="JSON file; flags override its keys")
        sp.add_argument("--out", required=True)
        sp.add_argument("--manifest", help="manifest path (default <out>.manifest.json)")

    d = sub.add_parser("design", help="realize a design matrix (and optionally beta, y)")
    common(d)
    d.add_argument("--kind")
    d.add_argument("--p", type=int)
    d.add_argument("--n", type=int)
    d.add_argument("--rho", type=float)
    d.add_argument("--d", type=int)
    d.add_argument("--k", type=int)
    d.add_argument("--seed", type=int)
    d.add_argument("--theta", type=float)
    d.add_argument("--r", type=float)
    d.add_argument("--signed", action="store_true", default=None)
    d.add_argument("--gram-out", dest="gram_out")
    d.set_defaults(func=cmd_design)

    s = sub.add_parser("select", help="score variables and select at an FDR level or fixed u")
    common(s)
    s.add_argument("--x", required=True)
    s.add_argument("--y", required=True)
    s.add_argument("--method", choices=["knockoff", "gm", "degm", "lasso", "ols"])
    s.add_argument("--flavor", choices=["ec", "ci"])
    s.add_argument("--ranker", choices=["lasso-path", "least-squares", "lasso_path", "least_squares"])
    s.add_argument("--stat", choices=["sgm", "dif"])
    s.add_argument("--q", type=float)
    s.add_argument("--u", type=float)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_select)

    def theory_args(sp):
        common(sp)
        sp.add_argument("--method")
        sp.add_argument("--design", choices=list(theory.DESIGNS))
        sp.add_argument("--rho", type=float)
        sp.add_argument("--a", type=float)
        sp.add_argument("--signed", action="store_true", default=None)
        sp.add_argument("--flavor", choices=["ec", "ci"])

    tp = sub.add_parser("theory-phase", help="phase curves h_AR, h_ER")
    theory_args(tp)
    tp.add_argument("--n-theta", dest="n_theta", type=int)
    tp.set_defaults(func=cmd_theory_phase)

    for name, func, helptext in (("theory-tradeoff", cmd_theory_tradeoff, "FDR-TPR trade-off curve"),
                                 ("theory-exponent", cmd_theory_exponent, "FP/FN/Hamming exponents")):
        t = sub.add_parser(name, help=helptext)
        theory_args(t)
        t.add_argument("--theta", type=float)
        t.add_argument("--r", type=float)
        t.add_argument("--u-min", dest="u_min", type=float)
        t.add_argument("--u-max", dest="u_max", type=float)
        t.add_argument("--n-u", dest="n_u", type=int)
        if name == "theory-exponent":
            t.add_argument("--u", type=float)
        t.set_defaults(func=func)

    m = sub.add_parser("simulate", help="Monte Carlo experiment")
    common(m)
    m.add_argument("--preset", choices=["exp1", "exp2", "exp3", "exp4", "exp5"])
    m.add_argument("--reps", type=int)
    m.add_argument("--seed", type=int)
    m.add_argument("--n", type=int)
    m.add_argument("--p", type=int)
    m.add_argument("--thetas", type=_floats)
    m.add_argument("--rs", type=_floats)
    m.add_argument("--rhos", type=_floats)
    m.add_argument("--methods", type=_strings)
    m.add_argument("--workers", type=int)
    m.add_argument("--q", type=float)
    m.add_argument("--overlay", action="store_true", help="append theory columns")
    m.set_defaults(func=cmd_simulate)
    return p


def main(argv=None):
    """Entry point; returns 0 on success, 2 on configuration errors, 1 otherwise."""
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except CliConfigError as e:
        print(f"fdrlab: config error: {e}", file=sys.stderr)
        return 2
    except SystemExit as e:  # --help / --version
        return int(e.code or 0)
    except (TamperError, DesignError, theory.TheoryError, ValueError, ArithmeticError,
            np.linalg.LinAlgError, RuntimeError, OSError) as e:
        print(f"fdrlab: error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
