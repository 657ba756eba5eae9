"""Reference beamformers: Frost constrained SG, constrained RLS and SM-SG.

Each step keeps ``w^H a0 = gamma``.  The closed-form MVDR oracle lives in
:func:`smcg.array.optimal_weights`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .flops import NullCounter, OpCounter

log = logging.getLogger(__name__)

_NULL = NullCounter()


@dataclass(frozen=True)
class ConstraintProjector:
    """``P = I - a0 a0^H / ||a0||^2`` and ``f = gamma a0 / ||a0||^2``."""

    a0: np.ndarray
    gamma: float
    P: np.ndarray
    f: np.ndarray
    a0_norm2: float

    @classmethod
    def from_steering(cls, a0: np.ndarray, gamma: float = 1.0) -> "ConstraintProjector":
        a0 = np.asarray(a0, dtype=complex)
        nrm2 = np.vdot(a0, a0).real
        P = np.eye(a0.shape[0]) - np.outer(a0, a0.conj()) / nrm2
        return cls(a0=a0, gamma=gamma, P=P, f=gamma * a0 / nrm2, a0_norm2=nrm2)

    def project(self, x: np.ndarray, ops: OpCounter = _NULL) -> np.ndarray:
        """``P x`` as a rank-one deflation, O(m)."""
        c = ops.sdiv(ops.vdot(self.a0, x), self.a0_norm2)
        return ops.sub(x, ops.scale(c, self.a0))


def frost_sg_step(w, r, mu: float, proj: ConstraintProjector, ops: OpCounter = _NULL):
    """``w' = P (w - mu y* r) + f`` with ``y = w^H r``."""
    if not mu >= 0:
        raise ValueError("mu must be non-negative")
    y = ops.vdot(w, r)
    u = ops.axpy(-mu * np.conj(y), r, w)
    ops.tally(mults=1)
    return ops.add(proj.project(u, ops), proj.f)


def sm_sg_step(w, r, delta: float, proj: ConstraintProjector, ops: OpCounter = _NULL):
    """Set-membership constrained SG step.

    Updates only when ``|y| > delta`` and then sizes the step so that the
    a-posteriori output magnitude equals ``delta``.
    """
    y = ops.vdot(w, r)
    ay = abs(y)
    if ay <= delta:
        return w, False
    Pr = proj.project(r, ops)
    rPr = ops.vdot(r, Pr).real
    if rPr < 1e-14:
        log.debug("SM-SG: r^H P r vanished, skipping update")
        return w, False
    mu = (1.0 - delta / ay) / rPr
    ops.tally(adds=1, mults=3)
    u = ops.axpy(-mu * np.conj(y), r, w)
    return ops.add(proj.project(u, ops), proj.f), True


@dataclass(frozen=True)
class RlsState:
    R_inv: np.ndarray
    forgetting: float = 0.998
    loading: float = 1e-2
    resets: int = 0

    def __post_init__(self):
        if not 0.0 < self.forgetting <= 1.0:
            raise ValueError("forgetting must lie in (0, 1]")

    @classmethod
    def initial(cls, m: int, forgetting: float = 0.998, loading: float = 1e-2) -> "RlsState":
        return cls(R_inv=np.eye(m, dtype=complex) / loading, forgetting=forgetting, loading=loading)


def rls_weights(R_inv, a0, gamma, ops: OpCounter = _NULL):
    Ra = ops.matvec(R_inv, a0)
    return ops.scale(ops.sdiv(gamma, ops.vdot(a0, Ra).real), Ra)


def rls_lcmv_step(state: RlsState, r, a0, gamma: float = 1.0, ops: OpCounter = _NULL):
    """Exponentially weighted RLS inverse update followed by the LCMV weights.

    ``R_inv`` tracks the inverse of ``lam^n eps I + sum_k lam^(n-k) r_k r_k^H``.
    """
    lam = state.forgetting
    pi = ops.matvec(state.R_inv, r)
    den = lam + ops.vdot(r, pi).real
    ops.tally(adds=1)
    if not den > 1e-14:
        log.warning("RLS breakdown (denominator %.3g); reinitialising", den)
        state = RlsState.initial(r.shape[0], lam, state.loading)
        state = replace(state, resets=state.resets + 1)
        return state, rls_weights(state.R_inv, a0, gamma, ops)
    k = ops.scale(1.0 / den, pi)
    R_inv = ops.rank1_update(state.R_inv, -k, pi)
    m = R_inv.shape[0]
    # 1/lam scaling plus Hermitian symmetrisation
    R_inv = 0.5 / lam * (R_inv + R_inv.conj().T)
    ops.tally(adds=m * m, mults=m * m + 1)
    state = replace(state, R_inv=R_inv)
    return state, rls_weights(R_inv, a0, gamma, ops)
