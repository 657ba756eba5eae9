"""Set-membership conjugate-gradient (SM-CG) LCMV beamformer.

The filter keeps a CG-based vector ``v ~ R_hat^-1 a0`` and forms the
constrained weights ``w = gamma v / (a0^H v)``.  On every snapshot the
output is checked against a parameter-dependent bound ``delta``; only when
``|y|^2 >= delta^2`` is a data-dependent forgetting factor ``lambda1``
computed and a single CG iteration applied.

All transitions are pure: they return a new :class:`BeamformerState` and
leave their input untouched.
"""

from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from .flops import NullCounter, OpCounter

log = logging.getLogger(__name__)

_NULL = NullCounter()


class DegenerateDirectionError(ArithmeticError):
    """``a0^H v`` vanished, so the constrained weights are undefined."""


@dataclass(frozen=True)
class PdbParams:
    """Parameter-dependent bound ``delta(i)``."""

    alpha: float = 21.0
    beta: float = 0.9
    noise_power_estimate: float = 1.0

    def __post_init__(self):
        if not self.alpha > 1:
            raise ValueError(f"alpha must be > 1, got {self.alpha}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if not self.noise_power_estimate > 0:
            raise ValueError("noise_power_estimate must be > 0")


@dataclass(frozen=True)
class CgParams:
    eta: float = 0.5
    gamma: float = 1.0
    lambda1_min: float = 0.1
    lambda1_max: float = 0.999
    # R_hat(0) = loading * I
    loading: float = 1e-2

    def __post_init__(self):
        if not 0.0 <= self.eta <= 0.5:
            raise ValueError(f"eta must lie in [0, 0.5], got {self.eta}")
        if not self.lambda1_min < self.lambda1_max < 1.0:
            raise ValueError("need lambda1_min < lambda1_max < 1")
        if not self.loading > 0:
            raise ValueError("loading must be > 0")
        if self.gamma == 0:
            raise ValueError("gamma must be nonzero")


@dataclass(frozen=True)
class BeamformerState:
    """SM-CG recursion state after snapshot ``snapshots``.

    ``Rp`` caches ``R_hat @ p`` and ``a0v`` caches ``a0^H v``; both are
    refreshed on every update and stay valid in between because neither
    ``R_hat`` nor ``p`` nor ``v`` change without an update.
    """

    a0: np.ndarray
    v: np.ndarray
    g: np.ndarray
    p: np.ndarray
    R_hat: np.ndarray
    Rp: np.ndarray
    a0v: complex
    w: np.ndarray
    delta: float
    updates: int = 0
    snapshots: int = 0
    last_lambda1: Optional[float] = None
    lambda1_fallbacks: int = 0
    skipped_updates: int = 0
    weight_failures: int = 0

    @property
    def m(self) -> int:
        return self.a0.shape[0]

    def to_text(self) -> str:
        """JSON text form; complex arrays become nested ``[re, im]`` pairs."""
        out = {}
        for f in dataclasses.fields(self):
            val = getattr(self, f.name)
            if isinstance(val, np.ndarray):
                val = {"shape": list(val.shape), "re": val.real.ravel().tolist(),
                       "im": val.imag.ravel().tolist()}
            elif isinstance(val, complex):
                val = [val.real, val.imag]
            out[f.name] = val
        return json.dumps(out, indent=1, sort_keys=True)

    @classmethod
    def from_text(cls, text: str) -> "BeamformerState":
        raw = json.loads(text)
        kw = {}
        for f in dataclasses.fields(cls):
            val = raw[f.name]
            if isinstance(val, dict):
                val = (np.asarray(val["re"]) + 1j * np.asarray(val["im"])).reshape(val["shape"])
            elif f.name == "a0v":
                val = complex(val[0], val[1])
            kw[f.name] = val
        return cls(**kw)


@dataclass
class Lambda1Terms:
    tau1: complex
    tau2: complex
    tau3: complex
    tau4: complex
    lambda11: float
    lambda12: float
    lambda13: float
    lambda14: float
    lambda1_raw: float
    lambda1: float
    degenerate: bool = False


@dataclass
class _Projections:
    """Inner products shared by the lambda1 formula and the CG step."""

    vha: complex  # v^H a0
    vhr: complex  # v^H r
    rhp: complex  # r^H p
    pha: complex  # p^H a0
    ghp: complex  # g^H p
    D_prev: float  # p^H R_hat(i-1) p


def _project(state, r, ops):
    return _Projections(
        vha=np.conj(state.a0v),
        vhr=ops.vdot(state.v, r),
        rhp=ops.vdot(r, state.p),
        pha=ops.vdot(state.p, state.a0),
        ghp=ops.vdot(state.g, state.p),
        D_prev=ops.vdot(state.p, state.Rp).real,
    )


def _sign(x: float) -> float:
    return 1.0 if x >= 0 else -1.0


def form_weights(v: np.ndarray, a0: np.ndarray, gamma: float = 1.0, ops: OpCounter = _NULL):
    """``w = gamma v / (a0^H v)``, so that ``w^H a0 = gamma``."""
    a0v = ops.vdot(a0, v)
    if abs(a0v) < 1e-14:
        raise DegenerateDirectionError(f"|a0^H v| = {abs(a0v):.3g}")
    return ops.scale(ops.sdiv(gamma, a0v), v)


def initialize(a0: np.ndarray, pdb: PdbParams, cg: CgParams) -> BeamformerState:
    a0 = np.asarray(a0, dtype=complex)
    nrm2 = np.vdot(a0, a0).real
    if not nrm2 > 0:
        raise ValueError("steering vector a0 must be nonzero")
    m = a0.shape[0]
    v = a0 / nrm2
    R_hat = cg.loading * np.eye(m, dtype=complex)
    w = form_weights(v, a0, cg.gamma)
    delta = float(np.sqrt(pdb.alpha * np.vdot(w, w).real * pdb.noise_power_estimate))
    return BeamformerState(
        a0=a0,
        v=v,
        # consistent with g = a0 - R_hat v, which the recursion preserves
        g=a0 - R_hat @ v,
        p=a0.copy(),
        R_hat=R_hat,
        Rp=R_hat @ a0,
        a0v=complex(np.vdot(a0, v)),
        w=w,
        delta=delta,
    )


def filter_output(w: np.ndarray, r: np.ndarray, ops: OpCounter = _NULL) -> complex:
    if w.shape != r.shape:
        raise ValueError("w and r must have equal lengths")
    return ops.vdot(w, r)


def update_bound(delta_prev: float, w_prev: np.ndarray, pdb: PdbParams, ops: OpCounter = _NULL) -> float:
    """``beta delta_prev + (1 - beta) sqrt(alpha ||w_prev||^2 sigma_n^2)``."""
    wn2 = ops.vdot(w_prev, w_prev).real
    ops.tally(adds=1, mults=5)
    return pdb.beta * delta_prev + (1.0 - pdb.beta) * np.sqrt(pdb.alpha * wn2 * pdb.noise_power_estimate)


def needs_update(y: complex, delta: float) -> bool:
    return abs(y) ** 2 >= delta**2


def clamp_lambda1(raw: float, cg: CgParams) -> float:
    return min(max(raw, cg.lambda1_min), cg.lambda1_max)


def _lambda1(state, delta, cg, pr, ops):
    c = 1.0 - cg.eta
    D = pr.D_prev
    phr = np.conj(pr.rhp)
    tau1 = ops.sadd(ops.smul(delta, pr.vha, D), ops.smul(delta, c, pr.ghp, pr.pha))
    tau2 = ops.smul(pr.vhr, pr.rhp, pr.pha)
    tau3 = ops.sadd(ops.smul(pr.vhr, D), ops.smul(c, pr.ghp, phr))
    tau4 = ops.smul(pr.vhr, pr.rhp, phr)
    s1 = _sign((tau1 - tau2).real)
    s2 = _sign((tau3 - tau4).real)
    ops.tally(adds=4, mults=4)
    l11, l12 = tau1.real * s1, tau3.real * s2
    l13, l14 = tau2.real * s1, tau4.real * s2
    den = l13 - l14
    if abs(den) < 1e-12:
        lam = state.last_lambda1 if state.last_lambda1 is not None else cg.lambda1_max
        return Lambda1Terms(tau1, tau2, tau3, tau4, l11, l12, l13, l14, float("nan"), lam, True)
    ops.tally(adds=1, mults=1)
    raw = (l11 - l12) / den
    lam = clamp_lambda1(raw, cg)
    return Lambda1Terms(tau1, tau2, tau3, tau4, l11, l12, l13, l14, raw, lam)


def compute_lambda1(state: BeamformerState, r: np.ndarray, delta: float, cg: CgParams) -> Lambda1Terms:
    """Data-dependent forgetting factor for an update at bound ``delta``.

    The tau terms use ``R_hat(i-1)`` (the estimate before this update) since
    ``R_hat(i)`` itself depends on the unknown ``lambda1``.  ``sign`` acts on
    real parts with ``sign(0) = +1``.  The raw ratio is clamped to
    ``[lambda1_min, lambda1_max]``; a vanishing denominator falls back to
    the previous ``lambda1`` (or ``lambda1_max``) and sets ``degenerate``.
    """
    return _lambda1(state, delta, cg, _project(state, r, _NULL), _NULL)


def _advance(state, r, lam, cg, pr, ops):
    """One CG iteration with forgetting factor ``lam``; None if degenerate."""
    lr = ops.scale(lam, r)
    Rp = ops.axpy(pr.rhp, lr, state.Rp)  # R_hat(i) p(i)
    D = pr.D_prev + lam * abs(pr.rhp) ** 2
    ops.tally(adds=3, mults=4)
    if not D > 1e-14:
        return None
    R_hat = ops.rank1_update(state.R_hat, lr, r)
    rhv = np.conj(pr.vhr)
    num = ops.sadd(ops.smul(1.0 - cg.eta, np.conj(pr.ghp)), -ops.smul(lam, np.conj(pr.rhp), rhv))
    alpha = ops.sdiv(num, D)
    v = ops.axpy(alpha, state.p, state.v)
    g = ops.sub(ops.sub(state.g, ops.scale(alpha, Rp)), ops.scale(rhv, lr))
    Rg = ops.matvec(R_hat, g)
    beta = -ops.sdiv(ops.vdot(state.p, Rg), D)
    p = ops.axpy(beta, state.p, g)
    Rp_next = ops.axpy(beta, Rp, Rg)
    return dataclasses.replace(
        state, v=v, g=g, p=p, R_hat=R_hat, Rp=Rp_next, updates=state.updates + 1, last_lambda1=lam
    )


def _finish_weights(state, cg, ops):
    try:
        a0v = ops.vdot(state.a0, state.v)
        if abs(a0v) < 1e-14:
            raise DegenerateDirectionError(f"|a0^H v| = {abs(a0v):.3g}")
        w = ops.scale(ops.sdiv(cg.gamma, a0v), state.v)
    except DegenerateDirectionError as exc:
        log.debug("keeping previous weights: %s", exc)
        return dataclasses.replace(state, weight_failures=state.weight_failures + 1)
    return dataclasses.replace(state, w=w, a0v=complex(a0v))


def smcg_update(state: BeamformerState, r: np.ndarray, lambda1: float, cg: CgParams) -> BeamformerState:
    """Apply the rank-one covariance update and one CG iteration.

    If ``p^H R_hat(i) p`` is not positive the input state is returned with
    only ``skipped_updates`` incremented.
    """
    return _update(state, r, lambda1, cg, _project(state, r, _NULL), _NULL)


def _update(state, r, lam, cg, pr, ops):
    new = _advance(state, r, lam, cg, pr, ops)
    if new is None:
        log.debug("skipping update: p^H R_hat p not positive")
        return dataclasses.replace(state, skipped_updates=state.skipped_updates + 1)
    return _finish_weights(new, cg, ops)


def step(
    state: BeamformerState,
    r: np.ndarray,
    pdb: PdbParams,
    cg: CgParams,
    ops: OpCounter = _NULL,
    update_ops: Optional[OpCounter] = None,
    force_delta: Optional[float] = None,
) -> Tuple[BeamformerState, complex, bool]:
    """Process one snapshot.

    ``ops`` counts the output/bound evaluation and ``update_ops`` (defaults
    to ``ops``) the update branch.  ``force_delta`` overrides the bound
    recursion; ``force_delta=0`` makes every snapshot an update.
    """
    uops = ops if update_ops is None else update_ops
    y = filter_output(state.w, r, ops)
    if force_delta is None:
        delta = update_bound(state.delta, state.w, pdb, ops)
    else:
        delta = float(force_delta)
    if not needs_update(y, delta):
        return dataclasses.replace(state, delta=delta, snapshots=state.snapshots + 1), y, False

    pr = _project(state, r, uops)
    terms = _lambda1(state, delta, cg, pr, uops)
    state = dataclasses.replace(state, delta=delta, snapshots=state.snapshots + 1)
    if terms.degenerate:
        log.debug("lambda1 denominator vanished; using %.4g", terms.lambda1)
        state = dataclasses.replace(state, lambda1_fallbacks=state.lambda1_fallbacks + 1)
    new = _update(state, r, terms.lambda1, cg, pr, uops)
    return new, y, new.updates > state.updates


def run(a0, snapshots, pdb: PdbParams, cg: CgParams, force_delta=None):
    """Run the filter over an ``(N, m)`` array; returns (final state, weights, flags)."""
    state = initialize(a0, pdb, cg)
    W = np.empty(snapshots.shape, dtype=complex)
    flags = np.zeros(snapshots.shape[0], dtype=bool)
    for i, r in enumerate(snapshots):
        state, _, flags[i] = step(state, r, pdb, cg, force_delta=force_delta)
        W[i] = state.w
    return state, W, flags


# membership predicates


def in_constraint_set(w: np.ndarray, r: np.ndarray, delta: float) -> bool:
    """Whether ``w`` keeps the output at ``r`` within the bound."""
    return abs(np.vdot(w, r)) ** 2 <= delta**2


def in_membership_set(w: np.ndarray, history: List[Tuple[np.ndarray, float]]) -> bool:
    """Intersection of the constraint sets over ``(r, delta)`` pairs seen so far."""
    return all(in_constraint_set(w, r, d) for r, d in history)


# lambda1 cross-check


def a_posteriori_output(state: BeamformerState, r: np.ndarray, lambda1: float, cg: CgParams) -> complex:
    """Output ``w(i)^H r(i)`` after updating with an arbitrary ``lambda1``."""
    new = _update(state, r, lambda1, cg, _project(state, r, _NULL), _NULL)
    return np.vdot(new.w, r)


def lambda1_roots(state: BeamformerState, r: np.ndarray, delta: float, cg: CgParams, grid: int = 200) -> List[float]:
    """All ``lambda1`` in (0, 1) where ``|w(i)^H r(i)|^2 = delta^2``.

    Brackets sign changes on a uniform grid, then refines each with Brent's
    method.  Independent of the closed-form ratio in :func:`compute_lambda1`.
    """

    def f(lam):
        return abs(a_posteriori_output(state, r, lam, cg)) ** 2 - delta**2

    lams = np.linspace(1e-6, 1 - 1e-6, grid)
    vals = np.array([f(x) for x in lams])
    roots = []
    for k in range(grid - 1):
        if vals[k] == 0:
            roots.append(float(lams[k]))
        elif vals[k] * vals[k + 1] < 0:
            roots.append(float(brentq(f, lams[k], lams[k + 1], xtol=1e-12)))
    return roots
