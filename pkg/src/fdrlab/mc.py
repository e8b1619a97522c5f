"""
Monte Carlo harness for the selection experiments.

Every (design, theta, r, replication) task draws its own beta, noise and
mirror directions from a seed derived from the master seed and the task
coordinates, so the output does not depend on the number of workers or the
order in which tasks finish.
"""
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
import multiprocessing as mp

import numpy as np
from scipy import linalg

from . import __version__
from . import mirror_stats as ms
from . import theory
from .design import DesignSpec, design_from_spec
from .signal import SignalConfig, draw_beta, draw_response
from .tamper import knockoff_s, build_knockoffs

QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)
FAMILIES = ("prototype", "knockoff", "gm", "degm")


class ConfigError(ValueError):
    """Invalid experiment configuration; ``key`` names the offending entry."""

    def __init__(self, key, msg):
        super().__init__(f"{key}: {msg}")
        self.key = key
        self.msg = msg


@dataclass(frozen=True)
class MethodConfig:
    """
    One selection method.

    Parameters
    ----------
    family : str
        ``prototype``, ``knockoff``, ``gm`` or ``degm``.
    ranker : str
        ``lasso_path`` or ``least_squares`` (prototype and knockoff).
    stat : str
        ``sgm`` or ``dif`` (ignored by prototypes).
    flavor : str
        Knockoff construction, ``ec`` or ``ci`` (knockoff and degm).
    name : str
        Label used in output tables.
    """
    family: str
    ranker: str = "lasso_path"
    stat: str = "sgm"
    flavor: str = "ec"
    name: str = ""

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError("methods", f"unknown method family {self.family!r}")
        if self.ranker not in ("lasso_path", "least_squares"):
            raise ConfigError("methods", f"unknown ranker {self.ranker!r}")
        if self.stat not in ("sgm", "dif"):
            raise ConfigError("methods", f"unknown statistic {self.stat!r}")
        if self.flavor not in ("ec", "ci"):
            raise ConfigError("methods", f"unknown knockoff flavor {self.flavor!r}")
        if not self.name:
            object.__setattr__(self, "name", self._default_name())

    def _default_name(self):
        if self.family == "prototype":
            return "lasso" if self.ranker == "lasso_path" else "ols"
        if self.family == "knockoff":
            base = "kf" if self.ranker == "lasso_path" else "kf_ols"
            return f"{base}_{self.flavor}_{self.stat}"
        return f"{self.family}_{self.stat}" + (f"_{self.flavor}" if self.family == "degm" else "")


# short names accepted in configs and on the command line
METHOD_ALIASES = {
    "lasso": MethodConfig("prototype", "lasso_path", name="lasso"),
    "ols": MethodConfig("prototype", "least_squares", name="ols"),
    "kf_sgm": MethodConfig("knockoff", "lasso_path", "sgm", "ec", "kf_sgm"),
    "kf_dif": MethodConfig("knockoff", "lasso_path", "dif", "ec", "kf_dif"),
    "kf_ec": MethodConfig("knockoff", "lasso_path", "sgm", "ec", "kf_ec"),
    "kf_ci": MethodConfig("knockoff", "lasso_path", "sgm", "ci", "kf_ci"),
    "kf_ols": MethodConfig("knockoff", "least_squares", "sgm", "ci", "kf_ols"),
    "gm_sgm": MethodConfig("gm", stat="sgm", name="gm_sgm"),
    "gm_dif": MethodConfig("gm", stat="dif", name="gm_dif"),
    "degm": MethodConfig("degm", stat="sgm", flavor="ci", name="degm"),
}


def parse_method(m):
    """A :class:`MethodConfig` from an alias, a dict or ``family:ranker:stat:flavor``."""
    if isinstance(m, MethodConfig):
        return m
    if isinstance(m, dict):
        try:
            return MethodConfig(**m)
        except TypeError as e:
            raise ConfigError("methods", str(e)) from None
    m = str(m).replace("-", "_")
    if m in METHOD_ALIASES:
        return METHOD_ALIASES[m]
    parts = m.split(":")
    if len(parts) < 2:
        raise ConfigError("methods", f"unknown method {m!r}")
    return MethodConfig(*parts)


def _grid(lo, hi, step):
    return tuple(np.round(np.arange(lo, hi + step / 2, step), 10))


@dataclass(frozen=True)
class ExperimentConfig:
    """
    A sweep over designs, sparsity levels and signal strengths.

    ``threshold_mode`` is ``optimal_u`` (threshold at ``sqrt(2 u* log p)``
    with ``u*`` from the theory engine) or ``fdr_q`` (data-driven threshold
    at level ``q``).
    """
    preset: str
    designs: tuple
    thetas: tuple
    rs: tuple
    methods: tuple
    reps: int = 100
    threshold_mode: str = "optimal_u"
    q: float = 0.1
    signed: bool = False
    master_seed: int = 0
    workers: int = 0

    def __post_init__(self):
        if self.reps < 1:
            raise ConfigError("reps", "must be at least 1")
        for key in ("designs", "thetas", "rs", "methods"):
            if len(getattr(self, key)) == 0:
                raise ConfigError(key, "grid is empty")
        if self.threshold_mode not in ("optimal_u", "fdr_q"):
            raise ConfigError("threshold_mode", f"unknown mode {self.threshold_mode!r}")
        if self.threshold_mode == "fdr_q":
            if not 0 < self.q < 1:
                raise ConfigError("q", f"{self.q} outside (0, 1)")
            if any(m.family == "prototype" for m in self.methods):
                raise ConfigError("methods", "prototypes have no data-driven FDR threshold")
        for t in self.thetas:
            if not 0 < t < 1:
                raise ConfigError("thetas", f"{t} outside (0, 1)")
        if any(r < 0 for r in self.rs):
            raise ConfigError("rs", "signal strengths must be nonnegative")

    def to_dict(self):
        d = asdict(self)
        d["designs"] = [s.to_dict() for s in self.designs]
        d["methods"] = [asdict(m) for m in self.methods]
        return d

    @classmethod
    def from_dict(cls, cfg):
        cfg = dict(cfg)
        preset = cfg.pop("preset", "custom")
        base = preset_config(preset) if preset != "custom" else None
        if base is not None:
            return override(base, **cfg)
        try:
            designs = tuple(_design(d) for d in cfg.pop("designs"))
            methods = tuple(parse_method(m) for m in cfg.pop("methods"))
            thetas = tuple(float(t) for t in cfg.pop("thetas"))
            rs = tuple(float(r) for r in cfg.pop("rs"))
        except KeyError as e:
            raise ConfigError(e.args[0], "required key missing") from None
        unknown = set(cfg) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown configuration key")
        return cls("custom", designs, thetas, rs, methods, **cfg)


def _design(d):
    if isinstance(d, DesignSpec):
        return d
    try:
        return DesignSpec.from_dict(d)
    except (TypeError, ValueError) as e:
        raise ConfigError("designs", str(e)) from None


def preset_config(name, seed=0):
    """
    Default configurations of the five experiments.

    Scales follow the published ones except where noted in each entry;
    ``reps`` defaults to 100 (200 for the FDR study).
    """
    def dz(kind, n, p, rho=0.0, **kw):
        return DesignSpec(kind, p, n, rho, seed=seed, **kw)

    if name == "exp1":
        return ExperimentConfig(
            "exp1", (dz("orthogonal", 2000, 1000),), (0.5,), _grid(0, 6, 0.2),
            tuple(METHOD_ALIASES[m] for m in ("lasso", "ols", "kf_sgm", "kf_dif", "gm_sgm", "gm_dif")),
            master_seed=seed)
    if name == "exp2":
        return ExperimentConfig(
            "exp2", (dz("block2", 2000, 1000, 0.5), dz("block2", 2000, 1000, 0.7)), (0.2,),
            _grid(0, 8, 0.2),
            tuple(METHOD_ALIASES[m] for m in ("lasso", "ols", "kf_sgm", "gm_sgm")),
            master_seed=seed)
    if name == "exp3":
        return ExperimentConfig(
            "exp3", (dz("block_d", 2000, 1000, 0.4, d=4), dz("block_d", 2000, 1000, 0.3, d=5)),
            (0.3,), _grid(0, 6, 0.2),
            tuple(METHOD_ALIASES[m] for m in ("lasso", "ols", "kf_sgm", "gm_sgm")),
            master_seed=seed)
    if name == "exp4":
        return ExperimentConfig(
            "exp4", (dz("factor", 1000, 300), dz("block2", 1000, 300, 0.5),
                     dz("expdecay", 1000, 300, 0.6), dz("wishart", 1000, 300)),
            (0.2, 0.4), _grid(0, 6, 0.2),
            tuple(METHOD_ALIASES[m] for m in ("lasso", "kf_ec", "kf_ci")),
            signed=True, master_seed=seed)
    if name == "exp5":
        rhos = _grid(0.1, 0.9, 0.1)
        designs = tuple(dz(k, 1000, 300, r) for k in ("block2", "expdecay") for r in rhos)
        return ExperimentConfig(
            "exp5", designs, (0.2,), (5.0,),
            tuple(METHOD_ALIASES[m] for m in ("kf_ec", "kf_ci", "gm_sgm")),
            reps=200, threshold_mode="fdr_q", q=0.1, signed=True, master_seed=seed)
    raise ConfigError("preset", f"unknown preset {name!r}")


def override(cfg, **kw):
    """
    Replace fields of a configuration.

    Besides the dataclass fields this accepts ``n`` and ``p`` (applied to
    every design), ``rhos`` (one copy of each design per value) and
    ``seed`` as a synonym of ``master_seed``.
    """
    kw = {k: v for k, v in kw.items() if v is not None}
    if "seed" in kw:
        kw["master_seed"] = kw.pop("seed")
    designs = cfg.designs
    if "designs" in kw:
        designs = tuple(_design(d) for d in kw.pop("designs"))
    size = {k: int(kw.pop(k)) for k in ("n", "p") if k in kw}
    rhos = kw.pop("rhos", None)
    try:
        if size:
            designs = tuple(replace(d, **size) for d in designs)
        if rhos is not None:
            seen, out = set(), []
            for d in designs:
                if d.kind in seen:
                    continue
                seen.add(d.kind)
                out.extend(replace(d, rho=float(r)) for r in rhos)
            designs = tuple(out)
        if "master_seed" in kw:
            designs = tuple(replace(d, seed=int(kw["master_seed"])) for d in designs)
    except ValueError as e:
        raise ConfigError("designs", str(e)) from None
    if "methods" in kw:
        kw["methods"] = tuple(parse_method(m) for m in kw["methods"])
    for key in ("thetas", "rs"):
        if key in kw:
            kw[key] = tuple(float(v) for v in np.atleast_1d(kw[key]))
    unknown = set(kw) - set(ExperimentConfig.__dataclass_fields__)
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown configuration key")
    return replace(cfg, designs=designs, **kw)


# ------------------------------------------------------------------ theory link

def theory_spec(method, design, signed=False):
    """
    The theory :class:`~fdrlab.theory.MethodSpec` matching a simulated method,
    or ``None`` when no closed form covers the pair.
    """
    if design.kind == "orthogonal":
        dname, param = "orthogonal", 0.0
    elif design.kind == "block2":
        dname, param = "block2", design.rho
    else:
        return None
    f = method.family
    if f == "prototype":
        name = "lassopath_prototype" if method.ranker == "lasso_path" else "ols_prototype"
    elif f == "knockoff" and method.ranker == "least_squares":
        name = "knockoff_ols"
    elif f == "knockoff":
        if dname == "orthogonal":
            # both constructions give s = 1, i.e. a = 0, on an orthogonal design
            name = "knockoff_sgm" if method.stat == "sgm" else "knockoff_dif"
        elif method.stat == "sgm":
            name = "knockoff_ec" if method.flavor == "ec" else "knockoff_ci"
        else:
            return None
    elif f == "gm":
        name = "gm_sgm" if method.stat == "sgm" else "gm_dif"
    else:
        name = "degm"
    try:
        spec = theory.MethodSpec(name, dname, param, signed, method.flavor)
        theory.hamming_exponent(spec, 0.5, 1.0, 0.5)
    except theory.TheoryError:
        return None
    return spec


def _fallback_spec(method):
    # orthogonal counterpart, used for designs without a closed form
    ortho = DesignSpec("orthogonal", 2, 2)
    return theory_spec(method, ortho)


@lru_cache(maxsize=4096)
def _ustar(spec, theta, r):
    return theory.optimal_u(spec, theta, r)


def threshold_u(method, design, theta, r, signed=False):
    """``(u*, spec)`` used to threshold ``method`` on ``design``."""
    spec = theory_spec(method, design, signed) or _fallback_spec(method)
    return _ustar(spec, float(theta), float(r)), spec


# ------------------------------------------------------------------ execution

@dataclass
class _DesignContext:
    spec: DesignSpec
    D: object
    bundles: dict = field(default_factory=dict)
    plans: dict = field(default_factory=dict)
    chol: dict = field(default_factory=dict)
    basis: object = None
    proto_plan: object = None


_CONTEXTS = {}


def _build_context(spec, methods, seed):
    D = design_from_spec(spec)
    ctx = _DesignContext(spec, D)
    need_flavors = {m.flavor for m in methods if m.family in ("knockoff", "degm")}
    for fl in sorted(need_flavors):
        s = knockoff_s(D.gram, fl)
        b = build_knockoffs(D, s, np.random.SeedSequence([seed, 7, ord(fl[0])]))
        ctx.bundles[fl] = b
        if any(m.family == "knockoff" and m.flavor == fl and m.ranker == "lasso_path" for m in methods):
            ctx.plans[fl] = ms.PathPlan(b.tampered_gram(), spec.p)
        if any(m.family == "knockoff" and m.flavor == fl and m.ranker == "least_squares" for m in methods):
            ctx.chol[fl] = linalg.cho_factor(b.tampered_gram())
    if any(m.family in ("gm", "degm") for m in methods):
        ctx.basis = ms.MirrorBasis(D.X)
    if any(m.family == "prototype" and m.ranker == "lasso_path" for m in methods):
        ctx.proto_plan = ms.PathPlan(D.gram)
    if any(m.family == "prototype" and m.ranker == "least_squares" for m in methods):
        ctx.chol["proto"] = linalg.cho_factor(D.gram)
    return ctx


def _score(ctx, m, y, gm_cache, gm_seed):
    X = ctx.D.X
    if m.family == "prototype":
        if m.ranker == "lasso_path":
            return ms.prototype_scores(ctx.D, y, plan=ctx.proto_plan).scores
        return np.abs(linalg.cho_solve(ctx.chol["proto"], X.T @ y))
    if m.family == "knockoff":
        b = ctx.bundles[m.flavor]
        if m.ranker == "lasso_path":
            return ms.knockoff_scores(b, y, kind=m.stat, plan=ctx.plans[m.flavor]).scores
        xty = np.concatenate([X.T @ y, b.Xtilde.T @ y])
        ent = np.abs(linalg.cho_solve(ctx.chol[m.flavor], xty))
        p = X.shape[1]
        return ms.combine(ent[:p], ent[p:], m.stat)
    if m.family == "gm":
        # sgm and dif share one draw of mirror directions within a replication
        if "gm" not in gm_cache:
            rng = np.random.default_rng(gm_seed)
            b1, b2, _ = ctx.basis.mirror_coefficients(rng.standard_normal(X.shape), y)
            gm_cache["gm"] = ((b1 + b2) / 2, (b1 - b2) / 2)
        bp, bm = gm_cache["gm"]
        return ms.mirror_stat(bp, bm, m.stat)
    b = ctx.bundles[m.flavor]
    return ms.degm_scores(X, b.Xtilde, y, kind=m.stat, basis=ctx.basis).scores


def _task(args):
    di, ti, ri, rep, theta, r, cfg_bits = args
    methods, signed, master, mode, q, thresholds = cfg_bits
    ctx = _CONTEXTS[di]
    p = ctx.spec.p
    # common random numbers along the r grid: support, noise and mirror draws
    # depend on (design, theta, rep) only, so curves in r are not jittered
    ss = np.random.SeedSequence([master, di, ti, rep])
    s_beta, s_noise, s_gm = ss.spawn(3)
    beta = draw_beta(SignalConfig(theta, r, p, signed), s_beta)
    y = draw_response(ctx.D, beta, s_noise)
    out = []
    gm_cache = {}
    for mi, m in enumerate(methods):
        t0 = time.perf_counter()
        try:
            w = _score(ctx, m, y, gm_cache, s_gm)
            if mode == "fdr_q":
                sel = ms.select_at_fdr(w, q)
            else:
                sel = ms.select_at_u(w, thresholds[mi], p)
            e = ms.evaluate(sel, beta)
            out.append((mi, (e.fp, e.fn, e.tp, e.fdp, e.tpr), None, time.perf_counter() - t0))
        except Exception as exc:  # recorded and counted, never dropped silently
            out.append((mi, None, f"{type(exc).__name__}: {exc}", time.perf_counter() - t0))
    return (di, ti, ri, rep), out


@dataclass
class ResultRow:
    preset: str
    design: str
    p: int
    n: int
    rho: float
    d: int
    theta: float
    r: float
    method: str
    threshold_mode: str
    level: float
    reps_ok: int
    failures: int
    mean_hamming: float
    log_p_hamming_over_p: float
    mean_fp: float
    mean_fn: float
    mean_fdp: float
    mean_tpr: float
    fdp_quantiles: tuple
    tpr_quantiles: tuple
    wall_time: float = 0.0

    def as_dict(self, with_time=False):
        d = {k: getattr(self, k) for k in TABLE_COLUMNS[:19]}
        for qv, a, b in zip(QUANTILES, self.fdp_quantiles, self.tpr_quantiles):
            d[f"fdp_q{int(round(qv * 100)):02d}"] = a
            d[f"tpr_q{int(round(qv * 100)):02d}"] = b
        if with_time:
            d["wall_time"] = self.wall_time
        return d


TABLE_COLUMNS = (
    ["preset", "design", "p", "n", "rho", "d", "theta", "r", "method", "threshold_mode",
     "level", "reps_ok", "failures", "mean_hamming", "log_p_hamming_over_p", "mean_fp",
     "mean_fn", "mean_fdp", "mean_tpr"]
    + [f"fdp_q{int(round(q * 100)):02d}" for q in QUANTILES]
    + [f"tpr_q{int(round(q * 100)):02d}" for q in QUANTILES])


def _log_p(h, p):
    with np.errstate(divide="ignore"):
        return float(np.log(h / p) / np.log(p))


def worker_count(requested=0):
    """Workers to use: ``requested`` (0 = all cores) capped by ``FDRLAB_THREADS``."""
    n = requested or os.cpu_count() or 1
    cap = os.environ.get("FDRLAB_THREADS")
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ConfigError("FDRLAB_THREADS", f"not an integer: {cap!r}") from None
    return max(1, n)


@dataclass
class ExperimentResult:
    rows: list
    failures: list
    manifest: dict


def run_experiment(config, workers=None, progress=None):
    """
    Run every (design, theta, r, method) cell of ``config``.

    Returns an :class:`ExperimentResult` whose ``rows`` are sorted by design,
    theta, r and method order; ``failures`` lists ``(cell, rep, message)``
    for replications excluded from the averages.
    """
    t_start = time.perf_counter()
    methods = tuple(config.methods)
    nw = worker_count(config.workers if workers is None else workers)
    _CONTEXTS.clear()
    t0 = time.perf_counter()
    for di, spec in enumerate(config.designs):
        _CONTEXTS[di] = _build_context(spec, methods, config.master_seed * 1000 + di)
    setup_time = time.perf_counter() - t0

    thresholds = {}
    tasks = []
    for di, spec in enumerate(config.designs):
        for ti, theta in enumerate(config.thetas):
            for ri, r in enumerate(config.rs):
                if config.threshold_mode == "optimal_u":
                    th = tuple(threshold_u(m, spec, theta, r, config.signed)[0] for m in methods)
                else:
                    th = tuple(config.q for _ in methods)
                thresholds[di, ti, ri] = th
                bits = (methods, config.signed, config.master_seed, config.threshold_mode,
                        config.q, th)
                for rep in range(config.reps):
                    tasks.append((di, ti, ri, rep, theta, r, bits))

    results = {}
    if nw == 1 or len(tasks) == 1:
        for t in tasks:
            k, v = _task(t)
            results[k] = v
            if progress:
                progress(len(results), len(tasks))
    else:
        ctx = mp.get_context("fork")
        with ProcessPoolExecutor(nw, mp_context=ctx) as ex:
            chunk = max(1, len(tasks) // (8 * nw))
            for k, v in ex.map(_task, tasks, chunksize=chunk):
                results[k] = v
                if progress:
                    progress(len(results), len(tasks))

    rows, failures = [], []
    for di, spec in enumerate(config.designs):
        for ti, theta in enumerate(config.thetas):
            for ri, r in enumerate(config.rs):
                for mi, m in enumerate(methods):
                    recs, wall = [], 0.0
                    for rep in range(config.reps):
                        _, rec, err, dt = results[di, ti, ri, rep][mi]
                        wall += dt
                        if err is None:
                            recs.append(rec)
                        else:
                            failures.append(((spec.kind, spec.rho, theta, r, m.name), rep, err))
                    rows.append(_aggregate(config, spec, theta, r, m,
                                           thresholds[di, ti, ri][mi], recs, wall))
    manifest = {
        "config": config.to_dict(),
        "master_seed": config.master_seed,
        "workers": nw,
        "versions": versions(),
        "n_tasks": len(tasks),
        "n_failures": len(failures),
        "failures": [{"cell": list(c), "rep": rep, "error": e} for c, rep, e in failures[:100]],
        "wall_time_total": time.perf_counter() - t_start,
        "wall_time_setup": setup_time,
        "wall_time_cells": [{"design": r.design, "rho": r.rho, "theta": r.theta, "r": r.r,
                             "method": r.method, "seconds": r.wall_time} for r in rows],
    }
    return ExperimentResult(rows, failures, manifest)


def _aggregate(config, spec, theta, r, m, level, recs, wall):
    p = spec.p
    nan_q = tuple(np.nan for _ in QUANTILES)
    if recs:
        a = np.array(recs, dtype=float)
        fp, fn, fdp, tpr = a[:, 0].mean(), a[:, 1].mean(), a[:, 3].mean(), a[:, 4].mean()
        ham = fp + fn
        fq = tuple(np.quantile(a[:, 3], QUANTILES))
        tq = tuple(np.quantile(a[:, 4], QUANTILES))
    else:
        fp = fn = fdp = tpr = ham = np.nan
        fq = tq = nan_q
    return ResultRow(config.preset, spec.kind, p, spec.n, spec.rho, spec.d, theta, r, m.name,
                     config.threshold_mode, level, len(recs), config.reps - len(recs),
                     ham, _log_p(ham, p), fp, fn, fdp, tpr, fq, tq, wall)


def versions():
    """Versions of the package and its numerical dependencies."""
    import scipy
    import numba
    return {"fdrlab": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__, "numba": numba.__version__}


# ------------------------------------------------------------------ theory overlay

OVERLAY_COLUMNS = ["theory_method", "theory_u", "theory_exp_hamm", "theory_log_p", "theory_bound"]


def theory_overlay(config, rows):
    """
    Pair each row with the theoretical ``log_p(H*_p / p) = exp_hamm - 1`` at
    the threshold ``u*`` used in the simulation.

    Rows whose design has no closed form get NaN.
    """
    by_design = {(d.kind, d.rho, d.d, d.p): d for d in config.designs}
    methods = {m.name: m for m in config.methods}
    out = []
    for row in rows:
        d = row.as_dict()
        spec = theory_spec(methods[row.method], by_design[row.design, row.rho, row.d, row.p],
                           config.signed)
        if spec is None:
            d.update(theory_method="", theory_u=np.nan, theory_exp_hamm=np.nan,
                     theory_log_p=np.nan, theory_bound=False)
        else:
            u = _ustar(spec, float(row.theta), float(row.r))
            e = theory.fp_fn_exponents(spec, row.theta, row.r, u)
            d.update(theory_method=spec.method, theory_u=u, theory_exp_hamm=float(e.exp_hamm),
                     theory_log_p=float(e.exp_hamm) - 1, theory_bound=e.bound)
        out.append(d)
    return out
