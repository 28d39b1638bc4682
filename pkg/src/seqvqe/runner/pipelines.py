"""Experiment pipelines behind the CLI subcommands.

Each command builds a list of independent tasks, runs them serially or in
a process pool, sorts the results by task key and renders the tables.
Task seeds are derived from (master seed, command, M, J index, restart), so
the output does not depend on the worker count or completion order.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from ..ansatz import AnsatzCircuit
from ..estimator import EnergyEstimate, estimate_energy_exact, estimate_energy_sampled
from ..mitigation import (
    ExtrapolationResult,
    NoisePoint,
    extrapolate_first_order,
    extrapolate_polynomial,
)
from ..model import IsingModel, build_ring_hamiltonian, ground_energy
from ..noise import (
    CascadeConfig,
    DecoherenceRates,
    InjectionConfig,
    TransientLevelConfig,
    drive_for_scale,
    injected_rate,
    simulate_cascade_decay,
    simulate_transient_decay,
)
from ..optimizer import IterationRecord, SpsaConfig, calibrate_gain, spsa_run
from .config import RunConfig, validate
from .io import Table, write_outputs

log = logging.getLogger(__name__)

_COMMAND_KEYS = {"vqe": 1, "sweep": 2, "noise_free": 3, "zne": 4}


def derive_seed(master: int, *keys: int) -> int:
    """64-bit seed for one task, independent of execution order."""
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


# --- objective ----------------------------------------------------------------


@dataclass
class Evaluation:
    """One objective call: per-c estimates and the value fed to SPSA."""

    per_c: dict[float, EnergyEstimate]
    extrapolation: ExtrapolationResult | None = None

    @property
    def value(self) -> float:
        if self.extrapolation is not None:
            return self.extrapolation.e_star
        (est,) = self.per_c.values()
        return est.mean


def mitigate(per_c: dict[float, EnergyEstimate], degree: int = 2) -> ExtrapolationResult:
    """Two points: first-order Richardson; more: least-squares polynomial."""
    points = [NoisePoint(c, e.mean, e.stderr) for c, e in sorted(per_c.items())]
    if len(points) == 2:
        return extrapolate_first_order(points[0], points[1])
    return extrapolate_polynomial(points, min(degree, len(points) - 1))


class Objective:
    """Energy of the ansatz at one or more noise scales.

    In shots mode each call draws fresh samples from a stream keyed by the
    task seed and a call counter, so a run is reproducible end to end.
    """

    def __init__(
        self,
        cfg: RunConfig,
        spins: int,
        j: float,
        grid: Sequence[float],
        mode: str,
        seed: int,
        mitigated: bool,
    ):
        self.cfg = cfg
        self.ising: IsingModel = build_ring_hamiltonian(spins, j)
        self.circuit = AnsatzCircuit.create(cfg.layers_for(spins), decomposition=cfg.ansatz.decomposition)
        self.grid = tuple(grid)
        self.models = {c: cfg.noise_model(c) for c in self.grid}
        self.mode = mode
        self.seed = seed
        self.mitigated = mitigated and len(self.grid) > 1
        self.calls = 0

    @property
    def dim(self) -> int:
        return self.circuit.num_parameters

    def estimate(self, theta, c: float) -> EnergyEstimate:
        model = self.models[c]
        if self.mode == "exact":
            return estimate_energy_exact(self.circuit, theta, model, self.ising)
        key = derive_seed(self.seed, self.calls, self.grid.index(c))
        return estimate_energy_sampled(
            self.circuit,
            theta,
            model,
            self.ising,
            self.cfg.sampling.shots_total,
            key,
            self.cfg.sampling.z_fraction,
        )

    def __call__(self, theta) -> Evaluation:
        per_c = {c: self.estimate(theta, c) for c in self.grid}
        self.calls += 1
        ext = mitigate(per_c, self.cfg.zne.degree) if self.mitigated else None
        return Evaluation(per_c, ext)


# --- one SPSA restart ---------------------------------------------------------


@dataclass
class RestartResult:
    key: tuple
    theta_best: np.ndarray
    final: Evaluation
    trace: list[IterationRecord] = field(default_factory=list)
    a: float = 0.0

    @property
    def value(self) -> float:
        return self.final.value


def spsa_config(cfg: RunConfig, objective: Callable, theta0: np.ndarray, seed: int) -> SpsaConfig:
    s = cfg.spsa
    a = s.a
    if a is None:
        a = calibrate_gain(objective, theta0, s.c0, s.stability, s.alpha, s.target_step, seed=seed)
    return SpsaConfig(
        a=a, c0=s.c0, A=s.stability, alpha=s.alpha, gamma=s.gamma, iterations=s.iterations, seed=seed
    )


def initial_angles(seed: int, dim: int) -> np.ndarray:
    return np.random.default_rng(seed).uniform(-math.pi, math.pi, dim)


@dataclass(frozen=True)
class RestartTask:
    key: tuple
    spins: int
    j: float
    grid: tuple[float, ...]
    mode: str
    mitigated: bool
    seed: int
    keep_trace: bool = False
    theta0: tuple[float, ...] | None = None
    a: float | None = None


def run_restart(cfg: RunConfig, task: RestartTask) -> RestartResult:
    objective = Objective(cfg, task.spins, task.j, task.grid, task.mode, task.seed, task.mitigated)
    if task.theta0 is None:
        theta0 = initial_angles(task.seed, objective.dim)
    else:
        theta0 = np.asarray(task.theta0, dtype=float)
    if task.a is None:
        spsa = spsa_config(cfg, objective, theta0, task.seed)
    else:
        spsa = spsa_config(cfg.with_overrides(spsa__a=task.a), objective, theta0, task.seed)
    theta_best, trace = spsa_run(objective, theta0, spsa)
    final = objective(theta_best)
    return RestartResult(task.key, theta_best, final, trace if task.keep_trace else [], spsa.a)


def _run_one(args):
    cfg, task = args
    return run_restart(cfg, task)


def run_tasks(cfg: RunConfig, tasks: Sequence[RestartTask]) -> dict[tuple, RestartResult]:
    """Run tasks (possibly in worker processes) and index results by key."""
    log.info("running %d SPSA tasks on %d worker(s)", len(tasks), cfg.workers)
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_one, [(cfg, t) for t in tasks]))
    else:
        results = [run_restart(cfg, t) for t in tasks]
    return {r.key: r for r in results}


# --- commands -----------------------------------------------------------------


@dataclass
class CommandResult:
    tables: list[Table]
    summary: dict
    manifest: Path | None = None


def _finish(cfg: RunConfig, command: str, out_dir, result: CommandResult, started, plots: bool):
    if out_dir is not None:
        result.manifest = write_outputs(
            out_dir, command, cfg.snapshot(), cfg.seed, result.tables, result.summary, started
        )
        if plots:
            from .plots import render

            render(command, Path(out_dir), result.tables)
    return result


def cmd_exact(cfg: RunConfig, out_dir=None, plots: bool = False) -> CommandResult:
    cfg = cfg.for_command("exact")
    validate(cfg, "exact")
    started = datetime.now(timezone.utc)
    table = Table("exact.csv", ("M", "J", "exact_energy"))
    for m in cfg.model.spins:
        for j in cfg.model.j:
            table.add(m, float(j), ground_energy(m, j))
    return _finish(cfg, "exact", out_dir, CommandResult([table], {"rows": len(table.rows)}), started, plots)


LEARNING_COLUMNS = ("restart", "iteration", "branch", "c", "energy", "stderr", "shots", "mitigated_flag")
FINAL_COLUMNS = ("restart", "c", "energy", "stderr", "shots", "mitigated_flag")


def _evaluation_rows(ev: Evaluation) -> list[tuple]:
    rows = [(float(c), e.mean, e.stderr, e.shots, 0) for c, e in sorted(ev.per_c.items())]
    if ev.extrapolation is not None:
        x = ev.extrapolation
        rows.append((0.0, x.e_star, x.stderr, sum(e.shots for e in ev.per_c.values()), 1))
    return rows


def cmd_vqe(cfg: RunConfig, out_dir=None, plots: bool = False) -> CommandResult:
    """SPSA restarts at a single (M, J); learning curves and final energies."""
    cfg = cfg.for_command("vqe")
    validate(cfg, "vqe")
    started = datetime.now(timezone.utc)
    spins, j = cfg.model.spins[0], cfg.model.j[0]
    grid = cfg.noisy_grid()
    mitigated = cfg.noise.enabled and cfg.mitigation.enabled
    tasks = [
        RestartTask(
            key=(r,),
            spins=spins,
            j=j,
            grid=grid,
            mode=cfg.sampling.mode,
            mitigated=mitigated,
            seed=derive_seed(cfg.seed, _COMMAND_KEYS["vqe"], spins, 0, r),
            keep_trace=True,
        )
        for r in range(cfg.spsa.restarts)
    ]
    results = run_tasks(cfg, tasks)
    curve = Table("learning_curve.csv", LEARNING_COLUMNS)
    final = Table("vqe_final.csv", FINAL_COLUMNS)
    for r in range(cfg.spsa.restarts):
        res = results[(r,)]
        for rec in res.trace:
            for branch, y in (("+", rec.y_plus), ("-", rec.y_minus)):
                for row in _evaluation_rows(y):
                    curve.add(r, rec.index, branch, *row)
        for row in _evaluation_rows(res.final):
            final.add(r, *row)
    best = min(range(cfg.spsa.restarts), key=lambda r: results[(r,)].value)
    summary = {
        "M": spins,
        "J": j,
        "exact_energy": ground_energy(spins, j),
        "best_restart": best,
        "best_value": results[(best,)].value,
        "best_theta": [float(x) for x in results[(best,)].theta_best],
    }
    return _finish(cfg, "vqe", out_dir, CommandResult([curve, final], summary), started, plots)


SWEEP_COLUMNS = ("M", "J", "restart", "c", "raw_energy", "mitigated_first", "noise_free", "exact")
SWEEP_BEST_COLUMNS = ("M", "J", "c", "raw_energy", "mitigated_first", "noise_free", "exact", "best_restart")


def first_order_from(ev: Evaluation) -> float:
    """First-order estimate from c = 1 and the largest grid scale."""
    cs = sorted(ev.per_c)
    if len(cs) < 2 or 1.0 not in ev.per_c:
        return math.nan
    hi = cs[-1]
    p1 = NoisePoint(1.0, ev.per_c[1.0].mean, ev.per_c[1.0].stderr)
    p2 = NoisePoint(hi, ev.per_c[hi].mean, ev.per_c[hi].stderr)
    return extrapolate_first_order(p1, p2).e_star


def cmd_sweep(cfg: RunConfig, out_dir=None, plots: bool = False) -> CommandResult:
    """Noisy VQE and a noise-free reference at every (M, J) and restart."""
    cfg = cfg.for_command("sweep")
    validate(cfg, "sweep")
    started = datetime.now(timezone.utc)
    grid = cfg.noisy_grid()
    mitigated = cfg.noise.enabled and cfg.mitigation.enabled
    tasks = []
    for m in cfg.model.spins:
        for ji, j in enumerate(cfg.model.j):
            for r in range(cfg.spsa.restarts):
                tasks.append(
                    RestartTask(
                        ("noisy", m, ji, r), m, j, grid, cfg.sampling.mode, mitigated,
                        derive_seed(cfg.seed, _COMMAND_KEYS["sweep"], m, ji, r),
                    )
                )
                # the reference never touches the noise section
                tasks.append(
                    RestartTask(
                        ("free", m, ji, r), m, j, (0.0,), "exact", False,
                        derive_seed(cfg.seed, _COMMAND_KEYS["noise_free"], m, ji, r),
                    )
                )
    results = run_tasks(cfg, tasks)
    table = Table("sweep.csv", SWEEP_COLUMNS)
    best_table = Table("sweep_best.csv", SWEEP_BEST_COLUMNS)
    for m in cfg.model.spins:
        for ji, j in enumerate(cfg.model.j):
            exact = ground_energy(m, j)
            restarts = range(cfg.spsa.restarts)
            for r in restarts:
                noisy, free = results[("noisy", m, ji, r)], results[("free", m, ji, r)]
                mit = first_order_from(noisy.final)
                for c, est in sorted(noisy.final.per_c.items()):
                    table.add(m, float(j), r, float(c), est.mean, mit, free.value, exact)
            best = min(restarts, key=lambda r: results[("noisy", m, ji, r)].value)
            free_best = min(results[("free", m, ji, r)].value for r in restarts)
            ev = results[("noisy", m, ji, best)].final
            mit = first_order_from(ev)
            for c, est in sorted(ev.per_c.items()):
                best_table.add(m, float(j), float(c), est.mean, mit, free_best, exact, best)
    summary = {"points": len(cfg.model.spins) * len(cfg.model.j), "restarts": cfg.spsa.restarts}
    return _finish(cfg, "sweep", out_dir, CommandResult([table, best_table], summary), started, plots)


ZNE_COLUMNS = ("M", "J", "c", "energy", "stderr", "role")
ZNE_EXTRAPOLATION_COLUMNS = ("M", "J", "method", "e_star", "stderr", "abs_error")


def _warm_task(cfg, spins, ji, j, c, slot, source: RestartResult) -> RestartTask:
    return RestartTask(
        ("warm", slot), spins, j, (c,), cfg.sampling.mode, False,
        derive_seed(cfg.seed, _COMMAND_KEYS["zne"], spins, ji, cfg.spsa.restarts + slot, int(round(c * 1000))),
        theta0=tuple(float(x) for x in source.theta_best),
        a=source.a,
    )


def _best(results) -> RestartResult:
    return min(results, key=lambda res: (res.value, str(res.key)))


def zne_chain(cfg: RunConfig, spins: int, ji: int, j: float) -> dict[float, RestartResult]:
    """Optimised energy at every study scale for one (M, J).

    Each scale keeps the best of its random restarts and of runs
    warm-started from the optimum at the neighbouring scale, first sweeping
    upwards in c and then downwards. Sharing basins between neighbours
    keeps E(c) smooth enough for polynomial extrapolation.
    """
    scales = sorted(set(cfg.zne.reference_grid) | set(cfg.zne.c_grid) | {0.0})
    best: dict[float, RestartResult] = {}
    prev = None
    for c in scales:
        tasks = [
            RestartTask(
                (r,), spins, j, (c,), cfg.sampling.mode, False,
                derive_seed(cfg.seed, _COMMAND_KEYS["zne"], spins, ji, r, int(round(c * 1000))),
            )
            for r in range(cfg.spsa.restarts)
        ]
        if prev is not None:
            tasks.append(_warm_task(cfg, spins, ji, j, c, 0, best[prev]))
        best[c] = _best(run_tasks(cfg, tasks).values())
        prev = c
    for hi, c in zip(scales[::-1], scales[-2::-1]):
        down = run_restart(cfg, _warm_task(cfg, spins, ji, j, c, 1, best[hi]))
        best[c] = _best([best[c], down])
    return best


def cmd_zne_study(cfg: RunConfig, out_dir=None, plots: bool = False) -> CommandResult:
    """Optimised energy versus c plus first- and higher-order extrapolations."""
    cfg = cfg.for_command("zne-study")
    validate(cfg, "zne-study")
    started = datetime.now(timezone.utc)
    table = Table("zne_study.csv", ZNE_COLUMNS)
    ext_table = Table("zne_extrapolation.csv", ZNE_EXTRAPOLATION_COLUMNS)
    fit_grid = set(cfg.zne.c_grid)
    summary = {}
    for m in cfg.model.spins:
        for ji, j in enumerate(cfg.model.j):
            chain = zne_chain(cfg, m, ji, j)
            for c, res in sorted(chain.items()):
                (est,) = res.final.per_c.values()
                role = "fit" if c in fit_grid else ("noise_free" if c == 0 else "reference")
                table.add(m, float(j), float(c), est.mean, est.stderr, role)
            ref = chain[0.0].value
            (ref_est,) = chain[0.0].final.per_c.values()

            def point(c):
                (est,) = chain[c].final.per_c.values()
                return NoisePoint(c, est.mean, est.stderr)

            lo, hi = cfg.zne.first_order_nodes
            first = extrapolate_first_order(point(lo), point(hi)) if lo in chain and hi in chain else None
            poly = extrapolate_polynomial([point(c) for c in cfg.zne.c_grid], cfg.zne.degree)
            raw = point(1.0) if 1.0 in chain else None
            rows = [("noise_free", ref, ref_est.stderr)]
            if raw is not None:
                rows.append(("raw_c1", raw.energy, raw.stderr))
            if first is not None:
                rows.append(("first_order", first.e_star, first.stderr))
            rows.append((f"order_{cfg.zne.degree}", poly.e_star, poly.stderr))
            for name, value, err in rows:
                ext_table.add(m, float(j), name, value, err, abs(value - ref))
            summary[f"M{m}_J{j}"] = {name: value for name, value, _ in rows}
    return _finish(cfg, "zne-study", out_dir, CommandResult([table, ext_table], summary), started, plots)


RATE_COLUMNS = ("ratio", "fitted_g1", "fitted_g2", "closed_form", "rel_err", "closed_form_g2", "rel_err_g2")
CASCADE_COLUMNS = ("ratio_ef_f0g1", "omega_f0g1_over_gamma_r", "fitted_rate", "predicted_rate", "rel_err", "valid")
ROUND_TRIP_COLUMNS = ("c_target", "omega_ef", "injected_rate", "target_rate", "rel_err")


def cmd_rate_check(cfg: RunConfig, out_dir=None, plots: bool = False) -> CommandResult:
    """Transient-level elimination and injection-cascade checks."""
    cfg = cfg.for_command("rate-check")
    validate(cfg, "rate-check")
    started = datetime.now(timezone.utc)
    rates_table = Table("rate_check.csv", RATE_COLUMNS)
    gamma = 1.0
    for ratio in cfg.rate_check.ratios:
        tl = TransientLevelConfig(omega=ratio * gamma, gamma=gamma)
        fit = simulate_transient_decay(tl)
        g1, g2 = tl.closed_form_gamma1, tl.adiabatic_gamma2
        rates_table.add(
            float(ratio), fit.gamma1, fit.gamma2, g1, abs(fit.gamma1 - g1) / g1, g2, abs(fit.gamma2 - g2) / g2
        )

    rc = cfg.rate_check
    gamma_r = 1.0 / (cfg.noise.readout_lifetime_ns * 1e-9)
    cascade = CascadeConfig.from_ratio(rc.cascade_ratio, gamma_r, rc.f0g1_fraction)
    fitted, _ = simulate_cascade_decay(cascade)
    predicted, valid = injected_rate(cascade.injection)
    cascade_table = Table("cascade_check.csv", CASCADE_COLUMNS)
    cascade_table.add(
        float(rc.cascade_ratio), float(rc.f0g1_fraction), fitted, predicted, abs(fitted - predicted) / predicted, valid
    )

    rates = cfg.noise.rates() if cfg.noise.enabled else DecoherenceRates()
    omega_f0g1 = rc.f0g1_fraction * gamma_r
    omega_ef = drive_for_scale(rc.target_scale, rates, omega_f0g1, gamma_r)
    added, _ = injected_rate(InjectionConfig(omega_ef, omega_f0g1, gamma_r))
    target = (rc.target_scale - 1.0) * rates.gamma1_q
    trip_table = Table("injection_round_trip.csv", ROUND_TRIP_COLUMNS)
    trip_table.add(float(rc.target_scale), omega_ef, added, target, abs(added - target) / target)

    summary = {
        "max_rel_err_g1": max(rates_table.column("rel_err")),
        "cascade_rel_err": cascade_table.rows[0][4],
    }
    tables = [rates_table, cascade_table, trip_table]
    return _finish(cfg, "rate-check", out_dir, CommandResult(tables, summary), started, plots)


COMMANDS = {
    "exact": cmd_exact,
    "vqe": cmd_vqe,
    "sweep": cmd_sweep,
    "zne-study": cmd_zne_study,
    "rate-check": cmd_rate_check,
}
