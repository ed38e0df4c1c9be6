"""Scenario configuration, seeded Monte Carlo execution, CSV tables and SVG
stability plots.

A scenario describes one experiment (problem kind, target/noise densities,
sample size, selection methods, replicate count, seed).  Replicate i draws
its sample from a counter-based stream keyed by (seed, i), so results are
independent of worker count and re-runs are byte-identical.
"""

from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .decompounding import (
    CpConfig,
    decompound_cf_from_spectra,
    sample_increments,
    select_cutoff_cp,
)
from .deconvolution import DeconvConfig, deconv_cf, select_cutoff, threshold_ecf
from .distributions import noise_preset, preset
from .errors import ConfigurationError
from .selectors import max_feasible_cutoff, penalty_values
from .spectral import (
    DEFAULT_H,
    DEFAULT_U_MAX,
    FrequencyGrid,
    SpectralFunction,
    cumulative_power,
    cumulative_sq_error,
    ecf,
    ecf_pair,
)

__all__ = [
    "PROBLEMS",
    "METHODS",
    "Scenario",
    "RiskReport",
    "kappa_bound",
    "run_scenario",
    "emit_csv",
    "read_reports_csv",
    "emit_stability_plot",
    "load_scenarios",
]

PROBLEMS = ("direct", "deconvolution", "decompounding")
METHODS = ("adaptive", "penalized", "penalized_log", "oracle")

CSV_HEADER = (
    "scenario,method,hyper,n,delta,mean_risk,std_risk,"
    "mean_cutoff,std_cutoff,replicates,warnings"
)


def kappa_bound(n: int, halved: bool = False) -> float:
    """Practical upper bound (sqrt(n)-1)/sqrt(log n) on the threshold constant.

    Beyond it the selection threshold exceeds 1 and the cutoff rule
    degenerates.  ``halved`` applies the factor 1/2 used when plotting
    decompounding stability curves.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    value = (math.sqrt(n) - 1.0) / math.sqrt(math.log(n))
    return value / 2.0 if halved else value


@dataclass
class Scenario:
    """One declarative Monte Carlo experiment."""

    id: str
    problem: str
    target: str
    noise: str = "none"
    n: int = 1000
    delta: float = 1.0
    lam: float = 1.0
    kappa_grid: tuple[float, ...] = (8.0,)
    method_set: tuple[str, ...] = ("adaptive",)
    replicates: int = 200
    seed: int = 0
    alpha: float = 1.0
    u_max: float = DEFAULT_U_MAX
    h: float = DEFAULT_H
    penalty_k: float = 2.0
    penalty_k_tilde: float = 0.3

    def validate(self) -> None:
        if self.problem not in PROBLEMS:
            raise ConfigurationError(f"unknown problem {self.problem!r}")
        bad = set(self.method_set) - set(METHODS)
        if bad or not self.method_set:
            raise ConfigurationError(f"invalid method set {self.method_set!r}")
        target = preset(self.target)
        if self.problem == "direct" and self.noise != "none":
            raise ConfigurationError("direct problem requires noise = 'none'")
        if self.problem == "deconvolution" and self.noise == "none":
            raise ConfigurationError(
                "deconvolution needs a noise density (use problem = 'direct' "
                "for noiseless data)"
            )
        if self.problem == "decompounding":
            if self.noise != "none":
                raise ConfigurationError("decompounding scenarios take no noise")
            if not target.finite_moments:
                raise ConfigurationError(
                    f"target {self.target!r} has no finite moments and cannot "
                    "be a jump density"
                )
            if {"penalized", "penalized_log"} & set(self.method_set):
                raise ConfigurationError(
                    "penalized selectors are defined for deconvolution only"
                )
        else:
            noise_preset(self.noise)
        if self.replicates < 1:
            raise ConfigurationError("replicates must be >= 1")
        if not self.kappa_grid and "adaptive" in self.method_set:
            raise ConfigurationError("adaptive method needs a nonempty kappa_grid")

    def selector_cap(self) -> float:
        base = self.n * self.delta if self.problem == "decompounding" else self.n
        return float(base) ** self.alpha

    def build_grid(self) -> FrequencyGrid:
        u_eff = min(self.u_max, self.selector_cap())
        steps = int(math.floor(u_eff / self.h + 1e-9))
        if steps < 1:
            raise ConfigurationError("cutoff cap is below one grid step")
        return FrequencyGrid(steps * self.h, self.h)


@dataclass
class RiskReport:
    """Monte Carlo summary for one (scenario, method, hyperparameter)."""

    scenario: str
    method: str
    hyper: float | None
    n: int
    delta: float | None
    mean_risk: float
    std_risk: float
    mean_cutoff: float
    std_cutoff: float
    replicates: int
    warnings: str = ""


def _replicate_rng(seed: int, index: int) -> np.random.Generator:
    # counter-based stream keyed by (seed, replicate index)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, index))))


def _mean_std(values: np.ndarray) -> tuple[float, float]:
    values = np.asarray(values, dtype=float)
    mean = float(values.mean())
    std = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return mean, std


def run_scenario(
    scenario: Scenario,
    threads: int = 1,
    replicates: int | None = None,
) -> list[RiskReport]:
    """Execute one scenario and aggregate per-method risk reports.

    Deterministic for a given (scenario, replicates): every replicate draws
    from its own (seed, index) stream, all methods share the replicate's
    sample (common random numbers), and aggregation runs in index order.
    """
    scenario.validate()
    sc = scenario
    M = sc.replicates if replicates is None else int(replicates)
    if M < 1:
        raise ConfigurationError("replicates must be >= 1")
    target = preset(sc.target)
    noise = noise_preset(sc.noise)
    grid = sc.build_grid()
    noise.validate_on_grid(grid.nodes)
    is_cp = sc.problem == "decompounding"

    upos = grid.positive_nodes
    truth_pos = target.cf(upos)
    tail_cache: dict[int, float] = {}

    def tail_at(k: int) -> float:
        if k not in tail_cache:
            tail_cache[k] = target.tail_energy(float(upos[k]))
        return tail_cache[k]

    def risk_from_cum(cum: np.ndarray, k: int) -> float:
        return (cum[k] + tail_at(k)) / (2.0 * math.pi)

    methods = list(sc.method_set)
    want_plain = bool({"penalized", "penalized_log", "oracle"} & set(methods))

    if is_cp:
        cp_cfgs = {
            k: CpConfig(
                n=sc.n, delta=sc.delta, kappa=k, lam=sc.lam, alpha=sc.alpha, grid=grid
            )
            for k in sc.kappa_grid
        }
    else:
        dc_cfgs = {
            k: DeconvConfig(n=sc.n, kappa=k, alpha=sc.alpha, grid=grid)
            for k in sc.kappa_grid
        }

    # penalized search setup is sample-independent
    pen_setup: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    pen_warning = ""
    if {"penalized", "penalized_log"} & set(methods):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            m_cap = max_feasible_cutoff(noise, sc.n)
        if caught:
            pen_warning = str(caught[0].message)
        feasible_idx = np.nonzero(upos <= m_cap + 1e-12)[0]
        if feasible_idx.size == 0:
            raise ConfigurationError("penalized search grid is empty")
        ms = upos[feasible_idx]
        if "penalized" in methods:
            pen_setup["penalized"] = (
                feasible_idx,
                penalty_values(noise, sc.n, ms, sc.penalty_k),
            )
        if "penalized_log" in methods:
            const = sc.penalty_k_tilde * math.log(sc.n) ** 2.5
            pen_setup["penalized_log"] = (
                feasible_idx,
                penalty_values(noise, sc.n, ms, const),
            )

    def worker(i: int) -> dict:
        rng = _replicate_rng(sc.seed, i)
        out: dict = {}
        if is_cp:
            any_cfg = next(iter(cp_cfgs.values()))
            inc = sample_increments(target, any_cfg, rng)
            phi_hat, phi_prime = ecf_pair(inc.values, grid)
            phi_tilde = decompound_cf_from_spectra(
                phi_hat, phi_prime, sc.lam, sc.delta
            )
            tilde_cum = cumulative_sq_error(phi_tilde, truth_pos)
            if "adaptive" in methods:
                ad = {}
                for kap, cfg in cp_cfgs.items():
                    cut = select_cutoff_cp(phi_tilde, cfg)
                    bar = np.where(
                        np.abs(phi_tilde.values) >= cfg.threshold,
                        phi_tilde.values,
                        0.0 + 0.0j,
                    )
                    phi_bar = SpectralFunction(grid, bar, hermitian=phi_tilde.hermitian)
                    k = grid.snap_positive(cut.m_hat)
                    cum = cumulative_sq_error(phi_bar, truth_pos)
                    ad[kap] = (risk_from_cum(cum, k), cut.m_hat)
                out["adaptive"] = ad
            if "oracle" in methods:
                out["oracle_cum"] = tilde_cum
        else:
            x = target.sample(rng, sc.n)
            y = x if noise.is_direct else x + noise.density.sample(rng, sc.n)
            phi_y = ecf(y, grid)
            if "adaptive" in methods:
                ad = {}
                for kap, cfg in dc_cfgs.items():
                    cut = select_cutoff(phi_y, cfg)
                    phi_x = deconv_cf(threshold_ecf(phi_y, cfg), noise)
                    k = grid.snap_positive(cut.m_hat)
                    cum = cumulative_sq_error(phi_x, truth_pos)
                    ad[kap] = (risk_from_cum(cum, k), cut.m_hat)
                out["adaptive"] = ad
            if want_plain:
                phi_plain = deconv_cf(phi_y, noise)
                err_cum = cumulative_sq_error(phi_plain, truth_pos)
                norm_sq = cumulative_power(phi_plain) / (2.0 * math.pi)
                for name in ("penalized", "penalized_log"):
                    if name in pen_setup:
                        idx, pen = pen_setup[name]
                        j = int(np.argmin(-norm_sq[idx] + pen))
                        k = int(idx[j])
                        out[name] = (risk_from_cum(err_cum, k), float(upos[k]))
                if "oracle" in methods:
                    out["oracle_cum"] = err_cum
        return out

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(worker, range(M)))
    else:
        results = [worker(i) for i in range(M)]

    scenario_warnings: list[str] = []
    if is_cp and not next(iter(cp_cfgs.values())).regime_ok:
        scenario_warnings.append("delta exceeds quarter-log regime bound")

    reports: list[RiskReport] = []
    delta_out = sc.delta if is_cp else None

    def add(method: str, hyper: float | None, risks, cuts, extra: list[str]):
        mean_r, std_r = _mean_std(np.asarray(risks))
        mean_c, std_c = _mean_std(np.asarray(cuts))
        notes = "; ".join(scenario_warnings + extra)
        reports.append(
            RiskReport(
                sc.id, method, hyper, sc.n, delta_out,
                mean_r, std_r, mean_c, std_c, M, notes,
            )
        )

    if "adaptive" in methods:
        bound = kappa_bound(sc.n, halved=is_cp)
        for kap in sc.kappa_grid:
            risks = [r["adaptive"][kap][0] for r in results]
            cuts = [r["adaptive"][kap][1] for r in results]
            extra = (
                [f"kappa exceeds practical bound {bound:.2f}"] if kap > bound else []
            )
            add("adaptive", kap, risks, cuts, extra)
    for name, hyper in (("penalized", sc.penalty_k), ("penalized_log", sc.penalty_k_tilde)):
        if name in methods:
            risks = [r[name][0] for r in results]
            cuts = [r[name][1] for r in results]
            extra = [pen_warning] if pen_warning else []
            add(name, hyper, risks, cuts, extra)
    if "oracle" in methods:
        cums = np.stack([r["oracle_cum"] for r in results])
        tails = np.array([tail_at(k) for k in range(len(upos))])
        curve = (cums.mean(axis=0) + tails) / (2.0 * math.pi)
        j = int(np.argmin(curve))
        risks = (cums[:, j] + tails[j]) / (2.0 * math.pi)
        add("oracle", None, risks, np.full(M, upos[j]), [])
    return reports


# -- CSV ----------------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def emit_csv(reports: list[RiskReport], path) -> Path:
    """Write reports sorted by (scenario, method, hyper); shortest float repr."""
    path = Path(path)
    rows = sorted(
        reports,
        key=lambda r: (r.scenario, r.method, r.hyper is not None, r.hyper or 0.0),
    )
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER.split(","))
        for r in rows:
            writer.writerow(
                [
                    r.scenario,
                    r.method,
                    _fmt(r.hyper),
                    r.n,
                    _fmt(r.delta),
                    _fmt(r.mean_risk),
                    _fmt(r.std_risk),
                    _fmt(r.mean_cutoff),
                    _fmt(r.std_cutoff),
                    r.replicates,
                    r.warnings,
                ]
            )
    return path


def read_reports_csv(path) -> list[RiskReport]:
    reports = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            reports.append(
                RiskReport(
                    scenario=row["scenario"],
                    method=row["method"],
                    hyper=float(row["hyper"]) if row["hyper"] else None,
                    n=int(row["n"]),
                    delta=float(row["delta"]) if row["delta"] else None,
                    mean_risk=float(row["mean_risk"]),
                    std_risk=float(row["std_risk"]),
                    mean_cutoff=float(row["mean_cutoff"]),
                    std_cutoff=float(row["std_cutoff"]),
                    replicates=int(row["replicates"]),
                    warnings=row["warnings"],
                )
            )
    return reports


# -- SVG stability plot ---------------------------------------------------------

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def emit_stability_plot(reports, scenarios, path) -> Path:
    """Risk-versus-kappa polylines, one per scenario, as static SVG 1.1.

    ``scenarios`` is a scenario id or a sequence of them (one polyline each);
    reports from any other scenario are an error, as are reports without
    adaptive rows.
    """
    ids = [scenarios] if isinstance(scenarios, str) else list(scenarios)
    known = set(ids)
    rows = [r for r in reports if r.method == "adaptive"]
    if not rows:
        raise ValueError("no adaptive reports to plot")
    stray = {r.scenario for r in rows} - known
    if stray:
        raise ValueError(f"reports reference scenarios outside the plot: {stray}")
    series = {
        sid: sorted(
            ((r.hyper, r.mean_risk) for r in rows if r.scenario == sid),
        )
        for sid in ids
    }
    series = {sid: pts for sid, pts in series.items() if pts}
    if not series:
        raise ValueError("none of the given scenarios has adaptive reports")

    width, height = 720, 420
    ml, mr, mt, mb = 70, 190, 24, 52
    kappas = [k for pts in series.values() for k, _ in pts]
    risks = [v for pts in series.values() for _, v in pts]
    kmin, kmax = min(kappas), max(kappas)
    ymax = max(risks) * 1.05 or 1.0

    def sx(k: float) -> float:
        span = (kmax - kmin) or 1.0
        return ml + (k - kmin) / span * (width - ml - mr)

    def sy(v: float) -> float:
        return height - mb - v / ymax * (height - mt - mb)

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{ml}" y1="{height - mb}" x2="{width - mr}" y2="{height - mb}" '
        'stroke="black" stroke-width="1"/>',
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{height - mb}" '
        'stroke="black" stroke-width="1"/>',
        f'<text x="{(ml + width - mr) / 2:.1f}" y="{height - 14}" '
        'text-anchor="middle" font-size="13">kappa</text>',
        f'<text x="18" y="{(mt + height - mb) / 2:.1f}" text-anchor="middle" '
        f'font-size="13" transform="rotate(-90 18 {(mt + height - mb) / 2:.1f})">'
        "mean L2 risk</text>",
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        kv = kmin + frac * (kmax - kmin)
        xv = sx(kv)
        parts.append(
            f'<line x1="{xv:.1f}" y1="{height - mb}" x2="{xv:.1f}" '
            f'y2="{height - mb + 5}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{xv:.1f}" y="{height - mb + 18}" text-anchor="middle" '
            f'font-size="11">{kv:.3g}</text>'
        )
        yv = frac * ymax
        parts.append(
            f'<line x1="{ml - 5}" y1="{sy(yv):.1f}" x2="{ml}" y2="{sy(yv):.1f}" '
            'stroke="black"/>'
        )
        parts.append(
            f'<text x="{ml - 8}" y="{sy(yv) + 4:.1f}" text-anchor="end" '
            f'font-size="11">{yv:.3g}</text>'
        )
    for i, (sid, pts) in enumerate(series.items()):
        color = _PALETTE[i % len(_PALETTE)]
        coords = " ".join(f"{sx(k):.2f},{sy(v):.2f}" for k, v in pts)
        parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" '
            'stroke-width="1.5"/>'
        )
        for k, v in pts:
            parts.append(
                f'<circle cx="{sx(k):.2f}" cy="{sy(v):.2f}" r="3" fill="{color}"/>'
            )
        ly = mt + 16 + 18 * i
        parts.append(
            f'<line x1="{width - mr + 10}" y1="{ly - 4}" x2="{width - mr + 34}" '
            f'y2="{ly - 4}" stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{width - mr + 40}" y="{ly}" font-size="12">'
            f"{escape(sid)}</text>"
        )
    parts.append("</svg>")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(parts), encoding="utf-8")
    return path


# -- configuration files ---------------------------------------------------------

_SCALAR_KEYS = {
    "problem": str,
    "target": None,  # str or list of str
    "noise": str,
    "n": int,
    "delta": float,
    "lambda": float,
    "replicates": int,
    "seed": int,
    "alpha": float,
    "penalty_K": float,
    "penalty_K_tilde": float,
}
_LIST_KEYS = {"kappa_grid", "method_set"}


def _scenario_from_table(sid: str, table: dict) -> list[Scenario]:
    unknown = set(table) - set(_SCALAR_KEYS) - _LIST_KEYS - {"grid"}
    if unknown:
        raise ConfigurationError(
            f"scenario {sid!r} has unknown keys: {sorted(unknown)}"
        )
    kwargs: dict = {}
    for key, conv in _SCALAR_KEYS.items():
        if key not in table or key == "target":
            continue
        name = {"lambda": "lam", "penalty_K": "penalty_k",
                "penalty_K_tilde": "penalty_k_tilde"}.get(key, key)
        kwargs[name] = conv(table[key])
    if "kappa_grid" in table:
        kwargs["kappa_grid"] = tuple(float(k) for k in table["kappa_grid"])
    if "method_set" in table:
        kwargs["method_set"] = tuple(str(m) for m in table["method_set"])
    if "grid" in table:
        g = table["grid"]
        bad = set(g) - {"u_max", "h"}
        if bad:
            raise ConfigurationError(f"scenario {sid!r} grid has unknown keys {bad}")
        if "u_max" in g:
            kwargs["u_max"] = float(g["u_max"])
        if "h" in g:
            kwargs["h"] = float(g["h"])
    targets = table.get("target")
    if targets is None:
        raise ConfigurationError(f"scenario {sid!r} is missing a target density")
    if isinstance(targets, str):
        return [Scenario(id=sid, target=targets, **kwargs)]
    # a target list fans out into one sub-scenario per density
    return [Scenario(id=f"{sid}-{t}", target=str(t), **kwargs) for t in targets]


def load_scenarios(path) -> list[Scenario]:
    """Parse a config file with one [scenario.<id>] table per scenario."""
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    tables = data.get("scenario")
    if not isinstance(tables, dict) or not tables:
        raise ConfigurationError("config has no [scenario.<id>] tables")
    scenarios: list[Scenario] = []
    for sid, table in tables.items():
        if not isinstance(table, dict):
            raise ConfigurationError(f"[scenario.{sid}] must be a table")
        scenarios.extend(_scenario_from_table(sid, table))
    for sc in scenarios:
        sc.validate()
    return scenarios
