"""Experiment harness: convergence tables, locking, time order and abstract bound suites.

Every study returns plain rows (lists of dicts) and can write them as CSV.
Output is deterministic for a given spec and seed.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import abstract as ab
from .assembly import build_mixed, build_primal
from .beam import BeamConfig
from .norms import ErrorReport, FeSampler, error_report, format_rate, reference_solution
from .stepper import SolutionHistory, solve

KINDS = ("convergence", "locking", "lambda-sweep", "abstract-verify", "single-run", "time-order")
INTEGRATIONS = ("mixed", "primal-exact", "primal-reduced")
DEFAULT_LADDER = (20, 40, 80, 100, 120, 140)


def threads() -> int:
    """Worker count from ``VISCOBEAM_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("VISCOBEAM_THREADS", "1")))
    except ValueError:
        return 1


def _pmap(fn, items):
    n = threads()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(n) as ex:
        return list(ex.map(fn, items))  # ordered, so output stays deterministic


def auto_stride(n_steps: int, max_samples: int = 1000) -> int:
    """Smallest divisor ``s`` of ``n_steps`` with ``n_steps / s <= max_samples``."""
    if n_steps < 1:
        raise ValueError("n_steps must be positive")
    for s in range(1, n_steps + 1):
        if n_steps % s == 0 and n_steps // s <= max_samples:
            return s
    return n_steps


def degree_of(element: str) -> int:
    try:
        return {"P1": 1, "P2": 2}[element.upper()]
    except (KeyError, AttributeError):
        raise ValueError(f"unknown element {element!r}") from None


@dataclass
class ExperimentSpec:
    """One study.  ``beam`` is a :class:`BeamConfig` template as a dict."""

    kind: str
    beam: dict = field(default_factory=dict)
    ladder: tuple = DEFAULT_LADDER
    element: str = "P1"
    integration: str = "mixed"
    thicknesses: tuple = (1e-1, 1e-2, 1e-3)
    bcs: tuple = ("clamped",)
    out: str = "results"
    seed: int = 0
    stride: int | None = None
    reference: dict = field(default_factory=lambda: {"strategy": "overkill", "n_elements": 1120, "degree": 2})
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if self.integration not in INTEGRATIONS:
            raise ValueError(f"unknown integration {self.integration!r}")
        degree_of(self.element)
        self.ladder = tuple(int(n) for n in self.ladder)
        self.thicknesses = tuple(float(d) for d in self.thicknesses)
        self.bcs = (self.bcs,) if isinstance(self.bcs, str) else tuple(self.bcs)
        if self.kind in ("convergence", "locking"):
            if len(self.ladder) < 2:
                raise ValueError("a rate study needs at least two meshes")
            if any(b <= a for a, b in zip(self.ladder, self.ladder[1:])):
                raise ValueError("mesh ladder must be strictly increasing")
        if min(self.ladder, default=1) < 1:
            raise ValueError("element counts must be positive")
        for bc in self.bcs:  # validate early
            BeamConfig.from_dict({**self.beam, "bc": bc})

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown spec fields {sorted(extra)}")
        if "kind" not in d:
            raise ValueError("spec needs a 'kind'")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def config(self, **kw) -> BeamConfig:
        return BeamConfig.from_dict({**self.beam, **kw})


# ---------------------------------------------------------------- beam studies


class ReferenceCache:
    """Overkill references keyed by configuration, stride and reference mesh."""

    def __init__(self):
        self._store = {}

    def get(self, cfg: BeamConfig, stride: int, strategy: str = "overkill", n_elements: int = 1120,
            degree: int = 2):
        key = (json.dumps(cfg.to_dict(), sort_keys=True), stride, strategy, n_elements, degree)
        if key not in self._store:
            self._store[key] = reference_solution(cfg, strategy, n_elements=n_elements, degree=degree, stride=stride)
        return self._store[key]


_CACHE = ReferenceCache()


def build_ops(cfg: BeamConfig, n: int, element: str, integration: str):
    r = degree_of(element)
    if integration == "mixed":
        return build_mixed(cfg, n, r)
    return build_primal(cfg, n, r, "exact" if integration == "primal-exact" else "reduced")


def run_ladder(cfg: BeamConfig, ladder, element: str = "P1", integration: str = "mixed",
               stride: int | None = None, reference: dict | None = None,
               cache: ReferenceCache | None = None) -> list[ErrorReport]:
    """Error reports along a mesh ladder against one cached reference."""
    stride = auto_stride(cfg.n_steps) if stride is None else stride
    reference = dict(reference or {"strategy": "overkill"})
    cache = _CACHE if cache is None else cache
    ref = cache.get(cfg, stride, **reference)

    def one(n):
        hist = solve(build_ops(cfg, n, element, integration), stride=stride)
        return n, hist

    reports, prev = [], None
    for n, hist in _pmap(one, list(ladder)):
        rep = error_report(hist, ref, prev, label=f"n={n}")
        reports.append(rep)
        prev = rep
    return reports


ERROR_COLUMNS = (("w", "e0"), ("w", "e1"), ("theta", "e0"), ("theta", "e1"), ("gamma", "e0"))


def table_rows(by_d: dict) -> list[dict]:
    """Merge ``{d: [ErrorReport]}`` into rows ``DOF, h, (e, r) per field per d``."""
    ds = list(by_d)
    rows = []
    for i, rep in enumerate(by_d[ds[0]]):
        row = {"DOF": rep.dofs, "h": f"{rep.h:.6g}"}
        for d in ds:
            r = by_d[d][i]
            for fld, e in ERROR_COLUMNS:
                tag = f"{fld}_{e}_d{d:g}"
                row[tag] = f"{r.errors[(fld, e)]:.4e}"
                row[f"{fld}_r{e[1]}_d{d:g}"] = format_rate(r.rates.get((fld, e), float("nan")))
        rows.append(row)
    return rows


def write_csv(path, rows: list[dict]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = list(dict.fromkeys(k for r in rows for k in r))
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=cols, restval="", lineterminator="\n")
        wr.writeheader()
        wr.writerows(rows)
    return path


def long_rows(by_key: dict, label_fmt: str = "{}") -> list[dict]:
    """Long format ``h, error, series`` for external plotting."""
    rows = []
    for key, reps in by_key.items():
        for rep in reps:
            for fld, e in ERROR_COLUMNS:
                rows.append({"h": f"{rep.h:.6g}", "error": f"{rep.errors[(fld, e)]:.6e}",
                             "series": f"{label_fmt.format(key)} {e}({fld})"})
    return rows


def gnuplot_script(csv_name: str, series: list[str], title: str) -> str:
    lines = [
        "set datafile separator ','",
        "set logscale xy",
        "set xlabel 'h'",
        "set ylabel 'error'",
        f"set title '{title}'",
        "set key outside",
    ]
    plots = [f"'{csv_name}' using (strcol(3) eq '{s}' ? $1 : 1/0):2 with linespoints title '{s}'" for s in series]
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


def _write_figure(out: Path, stem: str, rows: list[dict], title: str) -> None:
    write_csv(out / f"{stem}_long.csv", rows)
    series = list(dict.fromkeys(r["series"] for r in rows))
    (out / f"{stem}.gp").write_text(gnuplot_script(f"{stem}_long.csv", series, title))


def convergence(spec: ExperimentSpec) -> dict:
    """One table per boundary condition with a column block per thickness."""
    out = Path(spec.out)
    tables = {}
    for bc in spec.bcs:
        by_d = {}
        for d in spec.thicknesses:
            cfg = spec.config(d=d, bc=bc)
            by_d[d] = run_ladder(cfg, spec.ladder, spec.element, spec.integration, spec.stride, spec.reference)
        stem = f"convergence_{bc}_{spec.element}_{spec.integration}"
        write_csv(out / f"{stem}.csv", table_rows(by_d))
        _write_figure(out, stem, long_rows(by_d, "d={:g}"), f"{bc} {spec.element} {spec.integration}")
        tables[bc] = by_d
    return tables


def locking(spec: ExperimentSpec) -> dict:
    """Primal exact, primal reduced and mixed side by side, plus the reduced/mixed coefficient gap."""
    out = Path(spec.out)
    result = {}
    for bc in spec.bcs:
        for d in spec.thicknesses:
            cfg = spec.config(d=d, bc=bc)
            series = {}
            for integ in ("primal-exact", "primal-reduced", "mixed"):
                series[integ] = run_ladder(cfg, spec.ladder, spec.element, integ, spec.stride, spec.reference)
            gaps = [coefficient_gap(cfg, n, spec.element, spec.stride) for n in spec.ladder]
            rows = []
            for i, n in enumerate(spec.ladder):
                row = {"n": n, "h": f"{series['mixed'][i].h:.6g}"}
                for integ, reps in series.items():
                    rep = reps[i]
                    for fld, e in ERROR_COLUMNS:
                        row[f"{integ}_{fld}_{e}"] = f"{rep.errors[(fld, e)]:.4e}"
                        row[f"{integ}_{fld}_r{e[1]}"] = format_rate(rep.rates.get((fld, e), float("nan")))
                row["reduced_vs_mixed"] = f"{gaps[i]:.3e}"
                rows.append(row)
            stem = f"locking_{bc}_{spec.element}_d{d:g}"
            write_csv(out / f"{stem}.csv", rows)
            _write_figure(out, stem, long_rows(series), f"locking {bc} {spec.element} d={d:g}")
            result[(bc, d)] = dict(series=series, gaps=gaps)
    return result


def coefficient_gap(cfg: BeamConfig, n: int, element: str = "P1", stride: int | None = None) -> float:
    """Largest relative coefficient gap between reduced primal and mixed solves (w, theta, gamma)."""
    stride = auto_stride(cfg.n_steps) if stride is None else stride
    hp = solve(build_ops(cfg, n, element, "primal-reduced"), stride=stride).coefficients()
    hm = solve(build_ops(cfg, n, element, "mixed"), stride=stride).coefficients()
    gap = 0.0
    for k in ("w", "theta", "gamma"):
        scale = np.abs(hm[k]).max()
        gap = max(gap, float(np.abs(hp[k] - hm[k]).max() / scale))
    return gap


def subsample(hist: SolutionHistory, every: int) -> SolutionHistory:
    return SolutionHistory(hist.ops, hist.times[::every], hist.states[::every], hist.cfg, hist.stride * every, hist.info)


def time_order(cfg: BeamConfig, n: int = 20, element: str = "P1", refine_levels: int = 3) -> list[dict]:
    """Deviation of dt and dt/2 runs from a dt/2^levels run on one mesh, sampled on the coarse grid."""
    levels = [cfg.dt / 2**k for k in range(refine_levels + 1)]
    hists = [solve(build_ops(cfg.replace(dt=dt), n, element, "mixed")) for dt in levels]
    ref = FeSampler(subsample(hists[-1], 2**refine_levels))
    rows, prev = [], None
    for k, h in enumerate(hists[:-1]):
        rep = error_report(subsample(h, 2**k), ref)
        dev = rep.errors[("w", "e0")]
        rows.append({"dt": cfg.dt / 2**k, "deviation_w_e0": dev, "deviation_theta_e0": rep.errors[("theta", "e0")],
                     "ratio": (prev / dev) if prev else float("nan")})
        prev = dev
    return rows


def single_run(spec: ExperimentSpec) -> SolutionHistory:
    cfg = spec.config(bc=spec.bcs[0], d=spec.thicknesses[0])
    stride = auto_stride(cfg.n_steps) if spec.stride is None else spec.stride
    ops = build_ops(cfg, spec.ladder[0], spec.element, spec.integration)
    hist = solve(ops, stride=stride)
    out = Path(spec.out)
    out.mkdir(parents=True, exist_ok=True)
    hist.to_csv(out / "history.csv", n_points=int(spec.options.get("n_points", 41)))
    rows = [{"t": f"{t:.10g}", "w_mid": f"{w:.12e}"} for t, w in zip(hist.times, hist.midspan_deflection())]
    write_csv(out / "midspan.csv", rows)
    if spec.options.get("dump_matrices"):
        from .assembly import dump_matrix_market
        dump_matrix_market(ops, out / "matrices")
    return hist


# ---------------------------------------------------------------- abstract suites


def random_case(seed: int, kernel_max: float = 0.5, T: float = 1.0, general: bool = True,
                lam: float | None = None) -> ab.AbstractSystem:
    """Seeded system with ``n_V <= 20``, ``n_Q <= 10`` and exponential kernels of bound ``<= kernel_max``.

    Even seeds give surjective ``B``; odd seeds draw a rank deficiency when possible.
    """
    rng = np.random.default_rng([seed, 7919])
    nv = int(rng.integers(2, 21))
    nq = int(rng.integers(1, min(nv, 10) + 1))
    rank = nq if seed % 2 == 0 or nq == 1 else int(rng.integers(1, nq))
    amps = rng.uniform(0.0, kernel_max, 4)
    if general:
        amps *= rng.choice([-1.0, 1.0], 4)
    else:
        amps = -amps
    rates = 1.0 / rng.uniform(0.2, 5.0, 4)
    kernels = tuple(ab.ExpKernel(float(a), float(r)) for a, r in zip(amps, rates))
    beta = float(rng.uniform(0.2, 1.0))
    norm_b = beta if rank == 1 else float(rng.uniform(beta, 2.0))
    sys = ab.random_system(nv, nq, alpha0=float(rng.uniform(0.2, 1.0)), beta=beta,
                           gamma0=float(rng.uniform(0.2, 1.0)), norm_b=norm_b, rank=rank,
                           kernels=kernels, T=T, seed=seed)
    return sys if lam is None else sys.with_lambda(lam)


def _check_record(seed, which, rep, extra=None):
    rec = {"seed": seed, "bound": which, "holds": bool(rep.holds), "slack": rep.slack,
           "checks": {k: {"lhs": lhs, "rhs": rhs} for k, (lhs, rhs) in rep.checks.items()}}
    rec.update(extra or {})
    return rec


def abstract_verify(n_seeds: int = 100, dt: float = 1e-3, T: float = 1.0, seed0: int = 0,
                    kernel_max: float = 0.5) -> list[dict]:
    """First-theorem bounds on ``n_seeds`` random systems with all four kernels active."""

    def one(seed):
        sys = random_case(seed0 + seed, kernel_max, T)
        f, g = ab.random_data(sys, dt, seed0 + seed)
        tr = ab.solve_volterra(sys, f, g, dt)
        C = ab.constants_mt1(sys)
        rep = ab.verify_bound(sys, tr, (f, g), C, "mt1")
        strict = ab.verify_bound(sys, tr, (f, g), C, "mt1", strict_c4=True)
        return _check_record(seed0 + seed, "mt1", rep, {
            "strict_c4_holds": bool(strict.holds), "strict_c4_slack": strict.slack,
            "n_V": sys.n_V, "n_Q": sys.n_Q, "rank_b": sys.measured["rank_b"],
            "measured": sys.measured, "kernel_bounds": list(sys.kernel_bounds),
            "constants": {k: C[k] for k in sorted(C)},
        })

    return _pmap(one, list(range(n_seeds)))


def lambda_sweep(lams=(1e-2, 1e-4, 1e-6, 1e-8), n_seeds: int = 20, dt: float = 1e-3, T: float = 1.0,
                 seed0: int = 0, kernel_max: float = 0.5) -> list[dict]:
    """Second-theorem (surjective ``B``) and corollary (rank-deficient ``B``) bounds across ``lam``.

    System and data are fixed per seed; only ``lam`` varies.
    """
    recs = []
    for seed in range(seed0, seed0 + n_seeds):
        base = random_case(seed, kernel_max, T)
        f, g = ab.random_data(base, dt, seed)
        surj = base.measured["rank_b"] == base.n_Q
        which = "mt2" if surj else "cor210"
        for lam in lams:
            sys = base.with_lambda(lam)
            tr = ab.solve_volterra(sys, f, g, dt)
            C = ab.constants_mt2(sys)
            rep = ab.verify_bound(sys, tr, (f, g), C, which)
            alt = ab.verify_bound(sys, tr, (f, g), C, which, derived_c2=True)
            recs.append(_check_record(seed, which, rep, {
                "lam": lam, "derived_c2_holds": bool(alt.holds), "derived_c2_slack": alt.slack,
                "norm_u": ab.l1_norm(tr.u, tr.times), "norm_p": ab.l1_norm(tr.p, tr.times),
                "constants": {k: C[k] for k in sorted(C)},
            }))
    return recs


def summarize_checks(recs: list[dict]) -> dict:
    return {
        "cases": len(recs),
        "holds": sum(r["holds"] for r in recs),
        "min_slack": min((r["slack"] for r in recs), default=math.inf),
    }


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1, sort_keys=True, default=float) + "\n")
    return path


def abstract_rows(recs: list[dict]) -> list[dict]:
    rows = []
    for r in recs:
        row = {"seed": r["seed"], "bound": r["bound"]}
        if "lam" in r:
            row["lam"] = f"{r['lam']:g}"
        row.update(holds=int(r["holds"]), slack=f"{r['slack']:.6e}")
        for k, c in r["checks"].items():
            row[f"{k}_lhs"] = f"{c['lhs']:.6e}"
            row[f"{k}_rhs"] = f"{c['rhs']:.6e}"
        rows.append(row)
    return rows


def run_spec(spec: ExperimentSpec):
    """Dispatch a spec; returns the study's in-memory result."""
    out = Path(spec.out)
    o = spec.options
    if spec.kind == "convergence":
        return convergence(spec)
    if spec.kind == "locking":
        return locking(spec)
    if spec.kind == "single-run":
        return single_run(spec)
    if spec.kind == "time-order":
        cfg = spec.config(bc=spec.bcs[0], d=spec.thicknesses[0])
        rows = time_order(cfg, spec.ladder[0], spec.element, int(o.get("levels", 3)))
        write_csv(out / "time_order.csv", [{k: (f"{v:.6e}" if isinstance(v, float) else v) for k, v in r.items()}
                                          for r in rows])
        return rows
    dt, T = float(o.get("dt", 1e-3)), float(o.get("T", 1.0))
    kmax = float(o.get("kernel_max", 0.5))
    if spec.kind == "abstract-verify":
        recs = abstract_verify(int(o.get("n_seeds", 100)), dt, T, spec.seed, kmax)
    else:
        lams = tuple(float(x) for x in o.get("lambdas", (1e-2, 1e-4, 1e-6, 1e-8)))
        recs = lambda_sweep(lams, int(o.get("n_seeds", 20)), dt, T, spec.seed, kmax)
    stem = spec.kind.replace("-", "_")
    write_json(out / f"{stem}.json", {"summary": summarize_checks(recs), "cases": recs})
    write_csv(out / f"{stem}.csv", abstract_rows(recs))
    return recs
