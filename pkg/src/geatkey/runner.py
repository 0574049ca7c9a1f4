"""Scenario sweeps: (loss, n) points, each optimized over a (gamma, alpha) grid.

For a fixed loss, the crossover gradient g* and the certified first-order
term depend only on (gamma, alpha), so grid cells are computed once per loss
and reused for every block length n.  Only the finite-size terms, and the
acceptance tolerances in the realistic setting, depend on n.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .acceptance import delta_com, eps_com_at, honest_distribution, optimize_tolerances
from .geat import (DEFAULT_F_EC, CrossoverGradient, FiniteSizeBudget, k_alpha, k_alpha_term,
                   key_length_raw, lambda_ec)
from .mintradeoff import (ModPrimalProblem, evaluate_first_order, gradient_self_check,
                          optimize_gradient)
from .protocols.decoy import DEFAULT_INTENSITIES, DEFAULT_THETA, build_decoy_model
from .protocols.qubit import build_qubit_model
from .quantum import DEFAULT_REL_FLOOR
from .solvers.frank_wolfe import FrankWolfeConfig

log = logging.getLogger(__name__)

PROTOCOLS = ("qubit-bb84", "decoy-bb84")
# tolerance for checking the certified bound against the honest objective
SOUNDNESS_TOL = 1e-9
SELF_CHECK_TOL = -1e-6


class ConfigError(ValueError):
    pass


def _default_gammas():
    return [float(x) for x in np.logspace(-3, math.log10(0.5), 12)]


def _default_alpha_offsets():
    return [float(x) for x in np.logspace(-6, math.log10(0.4), 16)]


@dataclass
class ScenarioConfig:
    """Everything a sweep needs; defaults follow the qubit BB84 figure setup.

    ``alpha_minus_one`` holds the alpha grid as offsets alpha - 1.
    """

    protocol: str = "qubit-bb84"
    p_depol: float = 0.01
    theta: float = DEFAULT_THETA
    loss_db: list = field(default_factory=lambda: [0.0, 10.0, 20.0, 30.0])
    n: list = field(default_factory=lambda: [1e7, 1e9, 1e11])
    eps_secure: float = 1e-8
    eps_com_at: float = 1e-3
    acceptance: str = "unique"
    gamma_grid: list = field(default_factory=_default_gammas)
    alpha_minus_one: list = field(default_factory=_default_alpha_offsets)
    refine: bool = True
    intensities: list = field(default_factory=lambda: list(DEFAULT_INTENSITIES))
    p_mu_given_t: list = field(default_factory=lambda: [1 / 3, 1 / 3, 1 / 3])
    n_ph: int = 10
    f_ec: float = DEFAULT_F_EC
    gap_tol: float = 1e-6
    max_iter: int = 300
    rel_floor: float = DEFAULT_REL_FLOOR
    self_check: bool = True
    output: str = "results"

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"protocol must be one of {PROTOCOLS}")
        if self.acceptance not in ("unique", "realistic"):
            raise ConfigError("acceptance must be 'unique' or 'realistic'")
        for name in ("loss_db", "n", "gamma_grid", "alpha_minus_one"):
            vals = getattr(self, name)
            if not isinstance(vals, (list, tuple)) or not vals:
                raise ConfigError(f"{name} must be a nonempty list")
            setattr(self, name, [float(v) for v in vals])
        for name in ("eps_secure", "eps_com_at"):
            if not 0 < getattr(self, name) < 1:
                raise ConfigError(f"{name} must lie in (0, 1)")
        if any(not 0 < g < 1 for g in self.gamma_grid):
            raise ConfigError("gamma grid entries must lie in (0, 1)")
        if any(not 0 < a < 0.5 for a in self.alpha_minus_one):
            raise ConfigError("alpha - 1 must lie in (0, 1/2)")
        if any(v < 0 for v in self.loss_db):
            raise ConfigError("losses must be nonnegative")
        if any(v < 1 for v in self.n):
            raise ConfigError("block lengths must be at least 1")
        if not 0 <= self.p_depol <= 1:
            raise ConfigError("p_depol must lie in [0, 1]")
        if self.f_ec < 1:
            raise ConfigError("f_ec must be at least 1")

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    def fw_config(self) -> FrankWolfeConfig:
        return FrankWolfeConfig(gap_tol=self.gap_tol, max_iter=self.max_iter)


def build_model(cfg: ScenarioConfig, loss_db: float, gamma: float):
    if cfg.protocol == "qubit-bb84":
        return build_qubit_model(gamma, cfg.p_depol, loss_db, cfg.rel_floor)
    return build_decoy_model(cfg.intensities, cfg.p_mu_given_t, gamma, cfg.theta, loss_db,
                             cfg.n_ph, cfg.rel_floor)


@dataclass
class CellResult:
    """n-independent outcome of one (loss, gamma, alpha) grid cell."""

    loss_db: float
    gamma: float
    alpha: float
    alpha_minus_one: float
    g: np.ndarray
    q_hon: np.ndarray
    h_hon: float
    first_order: float
    r_sdp: float
    fw_gap: float
    lmo_failures: int
    max_sdp_gap: float
    sound: bool
    self_check_slack: float = math.nan
    seconds: float = 0.0
    max_sdp_rel_gap: float = 0.0

    @property
    def solver_ok(self) -> bool:
        return self.lmo_failures == 0 and self.sound and math.isfinite(self.first_order)


def evaluate_cell(cfg: ScenarioConfig, loss_db: float, gamma: float, alpha_minus_one: float,
                  self_check: bool = False) -> CellResult:
    """Run g*-optimization and the first-order evaluation for one grid cell."""
    start = time.perf_counter()
    alpha = 1 + alpha_minus_one
    model = build_model(cfg, loss_db, gamma)
    problem = model.problem()
    fw = cfg.fw_config()
    mp = ModPrimalProblem.build(problem, alpha)
    opt = optimize_gradient(mp, fw)
    fo = evaluate_first_order(opt.g_star, problem, alpha, gamma, fw)
    sound = (opt.r_sdp <= opt.objective_at_honest + SOUNDNESS_TOL
             and fo.lower_bound <= fo.objective_at_honest + SOUNDNESS_TOL)
    slack = gradient_self_check(mp, opt, fw) if self_check else math.nan
    return CellResult(loss_db, gamma, alpha, alpha_minus_one, opt.g_star.g, problem.q_hon, problem.h_hon,
                      fo.lower_bound, opt.r_sdp, max(opt.fw.gap, fo.gap),
                      opt.fw.lmo_failures + fo.fw.lmo_failures,
                      max(opt.fw.max_sdp_gap, fo.fw.max_sdp_gap), sound, slack,
                      time.perf_counter() - start,
                      max(opt.fw.max_sdp_rel_gap, fo.fw.max_sdp_rel_gap))


def _cell_task(args):
    cfg, loss, gamma, offset, check = args
    return evaluate_cell(cfg, loss, gamma, offset, check)


@dataclass
class ResultRow:
    loss_db: float
    n: float
    gamma_opt: float
    alpha_opt: float
    key_rate: float
    raw_key_length: float
    first_order: float
    delta_com: float
    k_alpha_term: float
    lambda_ec: float
    eps_PA: float
    eps_EV: float
    fw_gap: float
    wallclock_seconds: float
    acceptance: str = "unique"
    eps_com_at: float = 0.0
    flags: str = ""


@dataclass
class _Finite:
    raw: float
    delta: float
    kterm: float
    lec: float
    budget: FiniteSizeBudget
    eps_at: float
    within_budget: bool


def finite_size(cfg: ScenarioConfig, cell: CellResult, n: float) -> _Finite:
    """n-dependent terms of the key length for a computed cell."""
    g = CrossoverGradient(cell.g)
    budget = FiniteSizeBudget.with_optimal_split(n, cell.gamma, cell.alpha, cfg.eps_secure,
                                                 f_EC=cfg.f_ec)
    kterm = k_alpha_term(cell.alpha, k_alpha(cell.alpha, 2, 1, g.f_range(cell.gamma)))
    lec = lambda_ec(n, cfg.f_ec, cell.h_hon)
    delta, eps_at, ok = 0.0, 0.0, True
    if cfg.acceptance == "realistic":
        p_hon = honest_distribution(cell.q_hon, cell.gamma)
        f = g.f_gradient(cell.gamma)
        acc = optimize_tolerances(int(n), p_hon, f, cfg.eps_com_at)
        delta, eps_at, ok = delta_com(f, acc), eps_com_at(int(n), acc), acc.within_budget
    if not math.isfinite(cell.first_order) or not math.isfinite(kterm):
        raw = -math.inf
    else:
        raw = key_length_raw(budget, cell.first_order, delta, kterm, lec)
    return _Finite(raw, delta, kterm, lec, budget, eps_at, ok)


def _neighbours(grid, value):
    """Geometric midpoints between ``value`` and its neighbours in the sorted grid."""
    grid = sorted(set(grid))
    i = grid.index(value)
    out = [value]
    if i > 0:
        out.append(math.sqrt(grid[i - 1] * value))
    if i + 1 < len(grid):
        out.append(math.sqrt(grid[i + 1] * value))
    return out


class _CellCache:
    def __init__(self, cfg: ScenarioConfig, threads: int):
        self.cfg = cfg
        self.threads = max(1, int(threads))
        self.cells: dict = {}

    def compute(self, keys, self_check=False):
        todo = [k for k in keys if k not in self.cells
                or (self_check and math.isnan(self.cells[k].self_check_slack))]
        tasks = [(self.cfg, *k, self_check) for k in todo]
        if self.threads > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(self.threads) as pool:
                results = list(pool.map(_cell_task, tasks))
        else:
            results = [_cell_task(t) for t in tasks]
        for k, r in zip(todo, results):
            self.cells[k] = r
        return [self.cells[k] for k in keys]


def _best(cfg, cells, n):
    best = None
    for cell in cells:
        fin = finite_size(cfg, cell, n)
        key = (fin.raw, -cell.gamma, -cell.alpha)  # deterministic tie-break
        if best is None or key > best[0]:
            best = (key, cell, fin)
    return best[1], best[2]


def run_scenario(cfg: ScenarioConfig, threads: int = 1) -> list[ResultRow]:
    """Optimize (gamma, alpha) for every (loss, n) point; returns rows sorted by (loss, n)."""
    cache = _CellCache(cfg, threads)
    rows = []
    for loss in sorted(cfg.loss_db):
        t0 = time.perf_counter()
        keys = [(loss, g, a) for g in cfg.gamma_grid for a in cfg.alpha_minus_one]
        cache.compute(keys)
        for n in sorted(cfg.n):
            t1 = time.perf_counter()
            cell, fin = _best(cfg, [cache.cells[k] for k in keys], n)
            if cfg.refine:
                gammas = _neighbours(cfg.gamma_grid, cell.gamma)
                offsets = _neighbours(cfg.alpha_minus_one, cell.alpha_minus_one)
                local = [(loss, g, a) for g in gammas for a in offsets]
                cache.compute(local)
                cell, fin = _best(cfg, [cache.cells[k] for k in keys + local], n)
            if cfg.self_check:
                cell = cache.compute([(loss, cell.gamma, cell.alpha_minus_one)], self_check=True)[0]
            rows.append(_make_row(cfg, cell, fin, n, time.perf_counter() - t1))
        log.info("loss %.2f dB done in %.1f s", loss, time.perf_counter() - t0)
    _flag_monotonicity(rows)
    return rows


def _make_row(cfg, cell: CellResult, fin: _Finite, n, seconds) -> ResultRow:
    flags = []
    if cell.lmo_failures:
        flags.append("solver-failure")
    if not cell.sound:
        flags.append("unsound-bound")
    if not cell.fw_gap <= cfg.gap_tol:
        flags.append("fw-gap")
    if cell.self_check_slack < SELF_CHECK_TOL:
        flags.append("self-check")
    if not fin.within_budget or fin.eps_at > cfg.eps_com_at * (1 + 1e-12):
        flags.append("eps-com-budget")
    raw = fin.raw
    return ResultRow(cell.loss_db, float(n), cell.gamma, cell.alpha,
                     max(0.0, raw / n) if math.isfinite(raw) else 0.0, raw, cell.first_order,
                     fin.delta, fin.kterm, fin.lec, fin.budget.eps_PA, fin.budget.eps_EV,
                     cell.fw_gap, seconds + cell.seconds, cfg.acceptance, fin.eps_at,
                     ";".join(flags))


def _flag_monotonicity(rows, tol=1e-9):
    """Mark rate increases with loss, or decreases with n, beyond tol."""
    by_key = {(r.loss_db, r.n): r for r in rows}
    losses = sorted({r.loss_db for r in rows})
    ns = sorted({r.n for r in rows})
    for r in rows:
        i, j = losses.index(r.loss_db), ns.index(r.n)
        if i > 0 and r.key_rate > by_key[(losses[i - 1], r.n)].key_rate * (1 + tol) + tol:
            r.flags = ";".join(filter(None, [r.flags, "non-monotone-loss"]))
        if j > 0 and r.key_rate < by_key[(r.loss_db, ns[j - 1])].key_rate * (1 - tol) - tol:
            r.flags = ";".join(filter(None, [r.flags, "non-monotone-n"]))


SOLVER_FLAGS = ("solver-failure", "unsound-bound", "self-check", "fw-gap", "eps-com-budget")


def has_solver_flags(rows) -> bool:
    return any(f in SOLVER_FLAGS for r in rows for f in r.flags.split(";") if f)


COLUMNS = [f.name for f in fields(ResultRow)]


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    return f"{float(value):.16e}"


def emit_results(rows, out_dir, stem: str = "results") -> tuple[Path, Path]:
    """Write ``<stem>.csv`` and a gnuplot script ``<stem>.gp`` into out_dir."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / f"{stem}.csv"
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(COLUMNS)
            for r in rows:
                w.writerow([_fmt(getattr(r, c)) for c in COLUMNS])
        gp_path = out / f"{stem}.gp"
        gp_path.write_text(plot_script(rows, csv_path.name))
    except OSError as exc:
        raise OSError(f"cannot write results to {out}: {exc}") from exc
    return csv_path, gp_path


def plot_script(rows, csv_name: str) -> str:
    ns = sorted({r.n for r in rows})
    lines = [
        "set datafile separator ','",
        "set logscale y",
        "set xlabel 'loss (dB)'",
        "set ylabel 'key rate (bits per round)'",
        "set key top right",
        "set terminal pngcairo size 800,600",
        f"set output '{Path(csv_name).stem}.png'",
    ]
    plots = [f"\"< awk -F, 'NR>1 && $2=={_fmt(n)} && $5>0' {csv_name}\" "
             f"using 1:5 with linespoints title 'n = {n:.0e}'" for n in ns]
    lines.append("plot " + ", \\\n     ".join(plots) if plots else "# no rows")
    return "\n".join(lines) + "\n"


def read_results(path) -> list[ResultRow]:
    types = {f.name: f.type for f in fields(ResultRow)}
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append(ResultRow(**{k: (v if types[k] in ("str", str) else float(v))
                                     for k, v in rec.items()}))
    return rows


def config_to_json(cfg: ScenarioConfig) -> str:
    return json.dumps(asdict(cfg), indent=2)


__all__ = ["ScenarioConfig", "ConfigError", "CellResult", "ResultRow", "evaluate_cell",
           "finite_size", "run_scenario", "emit_results", "read_results", "plot_script",
           "has_solver_flags", "build_model", "config_to_json", "COLUMNS"]
