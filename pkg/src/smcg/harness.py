"""Seeded Monte-Carlo trials, ensemble SINR curves and operation counts."""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import core
from .array import (
    ScenarioConfig,
    generate_snapshots,
    interference_plus_noise_covariance,
    optimal_weights,
    steering_vector,
    true_covariance,
)
from .baselines import ConstraintProjector, RlsState, frost_sg_step, rls_lcmv_step, sm_sg_step
from .config import AlgorithmParams, Experiment, get_preset
from .flops import OpCounter

log = logging.getLogger(__name__)

ALGORITHMS = {
    "smcg": "set-membership conjugate gradient (one CG iteration per update)",
    "mvdr": "closed-form MVDR/LCMV oracle on the true covariance",
    "frost": "Frost constrained stochastic gradient",
    "rls": "constrained exponentially weighted RLS",
    "smsg": "set-membership constrained stochastic gradient",
}

STEADY_FRACTION = 0.1


@dataclass
class TrialResult:
    algorithm: str
    seed: int
    sinr_db: np.ndarray
    update_flags: np.ndarray
    # (complex additions, complex multiplications) per snapshot
    flops: np.ndarray
    update_flops: np.ndarray
    diagnostics: Dict[str, int] = field(default_factory=dict)

    @property
    def n_updates(self) -> int:
        return int(self.update_flags.sum())


@dataclass
class CurveSummary:
    algorithm: str
    mean_sinr_db: np.ndarray
    stderr_db: np.ndarray
    tau: float
    updates: int
    runs: int
    steady_state_sinr_db: float
    total_flops: Tuple[int, int]
    flops_per_update: Tuple[float, float]
    diagnostics: Dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "tau": self.tau,
            "updates": self.updates,
            "runs": self.runs,
            "snapshots": len(self.mean_sinr_db),
            "steady_state_sinr_db": self.steady_state_sinr_db,
            "final_sinr_db": float(self.mean_sinr_db[-1]),
            "total_flops": {"adds": self.total_flops[0], "mults": self.total_flops[1]},
            "flops_per_update": {"adds": self.flops_per_update[0], "mults": self.flops_per_update[1]},
            "diagnostics": dict(sorted(self.diagnostics.items())),
        }


def trial_seeds(seed: int) -> Tuple[np.random.Generator, np.random.Generator]:
    """Independent generators for the scenario draw and the data stream."""
    scen, data = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(scen), np.random.default_rng(data)


def _segment_refs(scenario: ScenarioConfig):
    a0 = steering_vector(scenario.geometry, scenario.desired.doa_deg)
    refs = []
    for start, stop in scenario.segments():
        active = scenario.active_sources(start)
        refs.append((start, stop, active))
    return a0, refs


def _sinr_curve(W, scenario):
    a0, refs = _segment_refs(scenario)
    out = np.empty(W.shape[0])
    P0 = scenario.desired.power
    for start, stop, active in refs:
        R_in = interference_plus_noise_covariance(scenario, active)
        Ws = W[start:stop]
        num = P0 * np.abs(Ws.conj() @ a0) ** 2
        den = np.einsum("ij,jk,ik->i", Ws.conj(), R_in, Ws).real
        out[start:stop] = 10 * np.log10(num / den)
    return out


def _run_smcg(X, a0, scenario, params, force_delta=None):
    pdb, cg = params.pdb, params.cg
    ev, up = OpCounter(), OpCounter()
    N = X.shape[0]
    W = np.empty_like(X)
    flags = np.zeros(N, dtype=bool)
    flops = np.zeros((N, 2), dtype=np.int64)
    uflops = np.zeros((N, 2), dtype=np.int64)
    state = core.initialize(a0, pdb, cg)
    for i in range(N):
        ev.reset()
        up.reset()
        try:
            state, _, flags[i] = core.step(state, X[i], pdb, cg, ev, up, force_delta=force_delta)
        except (FloatingPointError, np.linalg.LinAlgError) as exc:
            log.warning("SM-CG snapshot %d: %s", i, exc)
        W[i] = state.w
        uflops[i] = (up.adds, up.mults)
        flops[i] = (ev.adds + up.adds, ev.mults + up.mults)
    diag = {
        "lambda1_fallbacks": state.lambda1_fallbacks,
        "skipped_updates": state.skipped_updates,
        "weight_failures": state.weight_failures,
    }
    return W, flags, flops, uflops, diag


def _run_mvdr(X, a0, scenario, params):
    W = np.empty_like(X)
    for start, stop in scenario.segments():
        R = true_covariance(scenario, scenario.active_sources(start))
        W[start:stop] = optimal_weights(R, a0, params.cg.gamma)
    N = X.shape[0]
    z = np.zeros((N, 2), dtype=np.int64)
    return W, np.zeros(N, dtype=bool), z, z.copy(), {}


def input_power(scenario: ScenarioConfig) -> float:
    """Mean per-element input power at the first snapshot."""
    R = true_covariance(scenario, scenario.active_sources(0))
    return float(np.trace(R).real / scenario.geometry.m)


def _run_frost(X, a0, scenario, params):
    proj = ConstraintProjector.from_steering(a0, params.cg.gamma)
    mu = params.mu_scale / input_power(scenario)
    ops = OpCounter()
    N = X.shape[0]
    W = np.empty_like(X)
    flops = np.zeros((N, 2), dtype=np.int64)
    w = proj.f.copy()
    for i in range(N):
        ops.reset()
        w = frost_sg_step(w, X[i], mu, proj, ops)
        W[i] = w
        flops[i] = (ops.adds, ops.mults)
    return W, np.ones(N, dtype=bool), flops, flops.copy(), {}


def _run_rls(X, a0, scenario, params):
    state = RlsState.initial(X.shape[1], params.forgetting, params.rls_loading)
    ops = OpCounter()
    N = X.shape[0]
    W = np.empty_like(X)
    flops = np.zeros((N, 2), dtype=np.int64)
    for i in range(N):
        ops.reset()
        state, W[i] = rls_lcmv_step(state, X[i], a0, params.cg.gamma, ops)
        flops[i] = (ops.adds, ops.mults)
    return W, np.ones(N, dtype=bool), flops, flops.copy(), {"resets": state.resets}


def _run_smsg(X, a0, scenario, params):
    proj = ConstraintProjector.from_steering(a0, params.cg.gamma)
    ev, up = OpCounter(), OpCounter()
    N = X.shape[0]
    W = np.empty_like(X)
    flags = np.zeros(N, dtype=bool)
    flops = np.zeros((N, 2), dtype=np.int64)
    uflops = np.zeros((N, 2), dtype=np.int64)
    w = proj.f.copy()
    delta = float(np.sqrt(params.pdb.alpha * np.vdot(w, w).real * params.pdb.noise_power_estimate))
    for i in range(N):
        ev.reset()
        up.reset()
        delta = core.update_bound(delta, w, params.pdb, ev)
        w, flags[i] = sm_sg_step(w, X[i], delta, proj, up)
        W[i] = w
        uflops[i] = (up.adds, up.mults) if flags[i] else (0, 0)
        flops[i] = (ev.adds + up.adds, ev.mults + up.mults)
    return W, flags, flops, uflops, {}


_RUNNERS = {
    "smcg": _run_smcg,
    "mvdr": _run_mvdr,
    "frost": _run_frost,
    "rls": _run_rls,
    "smsg": _run_smsg,
}


def check_algorithms(algorithms: Sequence[str]) -> List[str]:
    algorithms = list(algorithms)
    if not algorithms:
        raise ValueError("at least one algorithm is required")
    unknown = [a for a in algorithms if a not in _RUNNERS]
    if unknown:
        raise ValueError(f"unknown algorithm(s) {', '.join(unknown)}; choose from {', '.join(ALGORITHMS)}")
    return algorithms


def _run_on_data(algorithm, scenario, X, params, seed, **kw):
    a0 = steering_vector(scenario.geometry, scenario.desired.doa_deg)
    W, flags, flops, uflops, diag = _RUNNERS[algorithm](X, a0, scenario, params, **kw)
    return TrialResult(algorithm, seed, _sinr_curve(W, scenario), flags, flops, uflops, diag)


def run_trial(
    algorithm_id: str,
    scenario: ScenarioConfig,
    params: AlgorithmParams,
    seed: int,
    force_delta: Optional[float] = None,
) -> TrialResult:
    """One run of one algorithm on the data stream fixed by ``seed``.

    ``force_delta`` (SM-CG only) replaces the bound recursion.
    """
    check_algorithms([algorithm_id])
    _, data_rng = trial_seeds(seed)
    X = generate_snapshots(scenario, data_rng)
    kw = {} if force_delta is None else {"force_delta": force_delta}
    if kw and algorithm_id != "smcg":
        raise ValueError("force_delta only applies to smcg")
    return _run_on_data(algorithm_id, scenario, X, params, seed, **kw)


def _trial_task(args):
    exp, algorithms, seed = args
    scen_rng, data_rng = trial_seeds(seed)
    scenario = exp.draw_scenario(scen_rng)
    X = generate_snapshots(scenario, data_rng)
    return {a: _run_on_data(a, scenario, X, exp.params, seed) for a in algorithms}


def run_trials(exp: Experiment, runs: int, base_seed: int = 0, algorithms=("smcg",), workers: int = 1):
    """Per-trial results ``[{algorithm: TrialResult}, ...]`` in seed order.

    All algorithms of a trial share its scenario draw and data stream.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    algorithms = check_algorithms(algorithms)
    exp.validate()
    tasks = [(exp, algorithms, base_seed + t) for t in range(runs)]
    if workers > 1 and runs > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_trial_task, tasks))
    return [_trial_task(t) for t in tasks]


def summarize(algorithm: str, trials: Sequence[TrialResult]) -> CurveSummary:
    S = np.stack([t.sinr_db for t in trials])
    flags = np.stack([t.update_flags for t in trials])
    uflops = np.stack([t.update_flops for t in trials]).sum(axis=(0, 1))
    tot = np.stack([t.flops for t in trials]).sum(axis=(0, 1))
    n_up = int(flags.sum())
    runs, N = S.shape
    tail = max(1, int(round(STEADY_FRACTION * N)))
    mean = S.mean(axis=0)
    stderr = S.std(axis=0, ddof=1) / np.sqrt(runs) if runs > 1 else np.zeros(N)
    diag: Dict[str, int] = {}
    for t in trials:
        for k, v in t.diagnostics.items():
            diag[k] = diag.get(k, 0) + int(v)
    per_up = (float(uflops[0] / n_up), float(uflops[1] / n_up)) if n_up else (0.0, 0.0)
    return CurveSummary(
        algorithm=algorithm,
        mean_sinr_db=mean,
        stderr_db=stderr,
        tau=n_up / (runs * N),
        updates=n_up,
        runs=runs,
        steady_state_sinr_db=float(mean[-tail:].mean()),
        total_flops=(int(tot[0]), int(tot[1])),
        flops_per_update=per_up,
        diagnostics=diag,
    )


def run_monte_carlo(
    preset: Union[str, Experiment],
    runs: int = 100,
    base_seed: int = 0,
    algorithms: Sequence[str] = tuple(ALGORITHMS),
    workers: int = 1,
) -> Dict[str, CurveSummary]:
    """Ensemble curves over trials seeded ``base_seed + t``.

    SINR is averaged in dB.  The reduction runs in trial order, so the
    result does not depend on ``workers``.
    """
    exp = get_preset(preset) if isinstance(preset, str) else preset
    trials = run_trials(exp, runs, base_seed, algorithms, workers)
    return {a: summarize(a, [t[a] for t in trials]) for a in check_algorithms(algorithms)}


# operation counts


def flop_report(summaries: Dict[str, CurveSummary]) -> List[dict]:
    """Measured complex operations per update, one row per algorithm."""
    rows = []
    for name, s in summaries.items():
        if name == "mvdr":
            continue
        rows.append({
            "algorithm": name,
            "updates": s.updates,
            "tau": s.tau,
            "adds_per_update": s.flops_per_update[0],
            "mults_per_update": s.flops_per_update[1],
            "total_adds": s.total_flops[0],
            "total_mults": s.total_flops[1],
        })
    return rows


def scaling_experiment(m: int, snapshots: int = 400) -> Experiment:
    """exp1-like template resized to ``m`` sensors (at most m/2 interferers)."""
    return Experiment(name=f"scale{m}", m=m, snapshots=snapshots, interferers=min(9, m // 2))


def complexity_scaling(ms=(8, 16, 32), algorithms=("smcg", "rls"), snapshots=400, seed=0) -> Dict[int, Dict[str, float]]:
    """Mean complex multiplications per update for each array size."""
    out = {}
    for m in ms:
        summ = run_monte_carlo(scaling_experiment(m, snapshots), runs=1, base_seed=seed, algorithms=algorithms)
        out[m] = {a: summ[a].flops_per_update[1] for a in algorithms}
    return out


# lambda1 cross-check


def lambda1_crosscheck(exp: Experiment = None, seeds: Sequence[int] = range(20), max_cases: int = 200) -> dict:
    """Compare the closed-form lambda1 with a root-finder on live updates.

    For each update whose raw lambda1 lies strictly inside the clamp range,
    the a-posteriori equation ``|w(i)^H r(i)|^2 = delta(i)^2`` is solved
    numerically over (0, 1) and the closest root is compared.
    """
    exp = exp or get_preset("exp1")
    pdb, cg = exp.params.pdb, exp.params.cg
    rel, no_root, considered = [], 0, 0
    for seed in seeds:
        scen_rng, data_rng = trial_seeds(seed)
        scenario = exp.draw_scenario(scen_rng)
        X = generate_snapshots(scenario, data_rng)
        a0 = steering_vector(scenario.geometry, scenario.desired.doa_deg)
        state = core.initialize(a0, pdb, cg)
        for r in X:
            if considered >= max_cases:
                break
            y = core.filter_output(state.w, r)
            delta = core.update_bound(state.delta, state.w, pdb)
            if core.needs_update(y, delta):
                terms = core.compute_lambda1(state, r, delta, cg)
                if not terms.degenerate and cg.lambda1_min < terms.lambda1_raw < cg.lambda1_max:
                    considered += 1
                    roots = core.lambda1_roots(state, r, delta, cg)
                    if roots:
                        best = min(roots, key=lambda x: abs(x - terms.lambda1_raw))
                        rel.append(abs(terms.lambda1_raw - best) / best)
                    else:
                        no_root += 1
            state, _, _ = core.step(state, r, pdb, cg)
    rel = np.array(rel)
    return {
        "cases": considered,
        "with_root": int(rel.size),
        "without_root": no_root,
        "median_rel_discrepancy": float(np.median(rel)) if rel.size else float("nan"),
        "max_rel_discrepancy": float(rel.max()) if rel.size else float("nan"),
    }


# output files


def summary_document(exp: Experiment, summaries: Dict[str, CurveSummary], runs: int, base_seed: int,
                     overrides: Optional[dict] = None) -> dict:
    return {
        "preset": exp.name,
        "config": exp.to_dict(),
        "overrides": dict(sorted((overrides or {}).items())),
        "runs": runs,
        "base_seed": base_seed,
        "seeds": [base_seed + t for t in range(runs)],
        "steady_state_fraction": STEADY_FRACTION,
        "algorithms": {a: s.to_dict() for a, s in summaries.items()},
        "flop_table": flop_report(summaries),
    }


def write_outputs(out_dir, exp: Experiment, summaries: Dict[str, CurveSummary], runs: int, base_seed: int,
                  overrides: Optional[dict] = None) -> List[Path]:
    """``<preset>_<algo>.csv`` per algorithm plus ``<preset>_summary.json``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, s in summaries.items():
        path = out_dir / f"{exp.name}_{name}.csv"
        with path.open("w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["snapshot", "mean_sinr_db", "stderr_db"])
            for i, (mu, se) in enumerate(zip(s.mean_sinr_db, s.stderr_db)):
                wr.writerow([i + 1, repr(float(mu)), repr(float(se))])
        written.append(path)
    doc = summary_document(exp, summaries, runs, base_seed, overrides)
    path = out_dir / f"{exp.name}_summary.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    written.append(path)
    return written
