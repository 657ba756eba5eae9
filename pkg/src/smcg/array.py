"""Uniform linear array signal model.

Steering vectors, BPSK snapshot synthesis and the closed-form covariance /
MVDR quantities used as evaluation oracles.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np


class ScenarioError(ValueError):
    """Raised when a scenario violates one of its invariants."""


@dataclass(frozen=True)
class ArrayGeometry:
    m: int
    spacing_over_wavelength: float = 0.5

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise ScenarioError(f"array needs m >= 2 sensors, got m={self.m}")
        if not self.spacing_over_wavelength > 0:
            raise ScenarioError("spacing_over_wavelength must be > 0")


@dataclass(frozen=True)
class SourceSpec:
    doa_deg: float
    power: float
    is_desired: bool = False

    def __post_init__(self):
        if not 0.0 < self.doa_deg < 180.0:
            raise ScenarioError(f"DOA must lie in (0, 180) degrees, got {self.doa_deg}")
        if not (np.isfinite(self.power) and self.power >= 0):
            raise ScenarioError(f"source power must be finite and >= 0, got {self.power}")


@dataclass(frozen=True)
class ScenarioConfig:
    """One fully specified scenario: geometry, sources, noise and schedule.

    ``change_events`` is a list of ``(snapshot_index, sources_to_add)``; the
    added sources become active starting at that (0-based) snapshot.
    """

    geometry: ArrayGeometry
    sources: Tuple[SourceSpec, ...]
    noise_power: float
    n_snapshots: int
    change_events: Tuple[Tuple[int, Tuple[SourceSpec, ...]], ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        object.__setattr__(
            self,
            "change_events",
            tuple((int(k), tuple(srcs)) for k, srcs in self.change_events),
        )
        self.validate()

    @property
    def desired(self) -> SourceSpec:
        return next(s for s in self.all_sources() if s.is_desired)

    def all_sources(self) -> List[SourceSpec]:
        out = list(self.sources)
        for _, added in self.change_events:
            out.extend(added)
        return out

    def active_sources(self, index: int) -> List[SourceSpec]:
        """Sources active at snapshot ``index`` (0-based)."""
        out = list(self.sources)
        for k, added in self.change_events:
            if index >= k:
                out.extend(added)
        return out

    def segments(self) -> List[Tuple[int, int]]:
        """Half-open ``[start, stop)`` snapshot ranges with a fixed source set."""
        edges = [0] + [k for k, _ in self.change_events] + [self.n_snapshots]
        return list(zip(edges[:-1], edges[1:]))

    def validate(self) -> None:
        if not (np.isfinite(self.noise_power) and self.noise_power > 0):
            raise ScenarioError("noise_power must be > 0")
        if int(self.n_snapshots) != self.n_snapshots or self.n_snapshots < 1:
            raise ScenarioError("n_snapshots must be a positive integer")
        srcs = self.all_sources()
        n_desired = sum(s.is_desired for s in srcs)
        if n_desired != 1:
            raise ScenarioError(f"exactly one desired source required, found {n_desired}")
        if not any(s.is_desired for s in self.sources):
            raise ScenarioError("the desired source must be active from the first snapshot")
        q, m = len(srcs), self.geometry.m
        if q > m:
            raise ScenarioError(f"q <= m violated: q={q} sources for m={m} sensors")
        idx = [k for k, _ in self.change_events]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ScenarioError("change_events indices must be strictly increasing")
        if idx and (idx[0] <= 0 or idx[-1] >= self.n_snapshots):
            raise ScenarioError("change_events indices must lie in (0, n_snapshots)")
        A = steering_matrix(self.geometry, [s.doa_deg for s in srcs])
        smin = np.linalg.svd(A, compute_uv=False).min()
        if smin <= 1e-8:
            raise ScenarioError(
                f"steering vectors are not linearly independent (smallest singular value {smin:.3g})"
            )


@dataclass
class Snapshot:
    r: np.ndarray
    index: int
    symbols: np.ndarray


def steering_vector(geometry: ArrayGeometry, doa_deg: float) -> np.ndarray:
    """ULA response ``exp(-2j*pi*k*(d/lambda)*cos(theta))`` for k = 0..m-1."""
    if not 0.0 < doa_deg < 180.0:
        raise ScenarioError(f"DOA must lie in (0, 180) degrees, got {doa_deg}")
    k = np.arange(geometry.m)
    phase = -2.0 * np.pi * geometry.spacing_over_wavelength * np.cos(np.deg2rad(doa_deg))
    return np.exp(1j * phase * k)


def steering_matrix(geometry: ArrayGeometry, doas_deg: Sequence[float]) -> np.ndarray:
    if len(doas_deg) == 0:
        return np.zeros((geometry.m, 0), dtype=complex)
    return np.stack([steering_vector(geometry, t) for t in doas_deg], axis=1)


def _source_arrays(geometry, active_sources):
    A = steering_matrix(geometry, [s.doa_deg for s in active_sources])
    amp = np.sqrt(np.array([s.power for s in active_sources], dtype=float))
    return A, amp


def complex_noise(rng: np.random.Generator, shape, noise_power: float) -> np.ndarray:
    """Circularly-symmetric Gaussian noise with total variance ``noise_power``."""
    scale = np.sqrt(noise_power / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def next_snapshot(
    scenario: ScenarioConfig,
    active_sources: Sequence[SourceSpec],
    rng: np.random.Generator,
    index: int = 0,
) -> Snapshot:
    """Draw one received vector ``r = sum_k sqrt(P_k) b_k a(theta_k) + n``."""
    A, amp = _source_arrays(scenario.geometry, active_sources)
    b = rng.choice(np.array([-1.0, 1.0]), size=len(active_sources))
    n = complex_noise(rng, scenario.geometry.m, scenario.noise_power)
    return Snapshot(r=A @ (amp * b) + n, index=index, symbols=b)


def generate_snapshots(scenario: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    """All ``n_snapshots`` received vectors as an ``(N, m)`` array.

    Draws are made segment by segment (symbols first, then noise) so a
    mid-run change only alters the stream from its changepoint onwards.
    """
    m = scenario.geometry.m
    out = np.empty((scenario.n_snapshots, m), dtype=complex)
    for start, stop in scenario.segments():
        active = scenario.active_sources(start)
        A, amp = _source_arrays(scenario.geometry, active)
        n = stop - start
        b = rng.choice(np.array([-1.0, 1.0]), size=(n, len(active)))
        out[start:stop] = (b * amp) @ A.T + complex_noise(rng, (n, m), scenario.noise_power)
    return out


def true_covariance(scenario: ScenarioConfig, active_sources: Sequence[SourceSpec]) -> np.ndarray:
    A, amp = _source_arrays(scenario.geometry, active_sources)
    R = (A * amp**2) @ A.conj().T + scenario.noise_power * np.eye(scenario.geometry.m)
    return 0.5 * (R + R.conj().T)


def interference_plus_noise_covariance(
    scenario: ScenarioConfig, active_sources: Sequence[SourceSpec]
) -> np.ndarray:
    return true_covariance(scenario, [s for s in active_sources if not s.is_desired])


def optimal_weights(R: np.ndarray, a0: np.ndarray, gamma: float = 1.0) -> np.ndarray:
    """Closed-form LCMV solution ``gamma R^-1 a0 / (a0^H R^-1 a0)``.

    A singular ``R`` raises ``numpy.linalg.LinAlgError``.
    """
    Ra = np.linalg.solve(R, a0)
    return gamma * Ra / np.vdot(a0, Ra)


def sinr(w: np.ndarray, scenario: ScenarioConfig, active_sources: Sequence[SourceSpec]) -> float:
    """Output SINR in dB: ``P0 |w^H a0|^2 / (w^H R_in w)``."""
    desired = next(s for s in active_sources if s.is_desired)
    a0 = steering_vector(scenario.geometry, desired.doa_deg)
    R_in = interference_plus_noise_covariance(scenario, active_sources)
    return sinr_db(w, a0, desired.power, R_in)


def sinr_db(w: np.ndarray, a0: np.ndarray, desired_power: float, R_in: np.ndarray) -> float:
    den = np.vdot(w, R_in @ w).real
    if not den > 0:
        raise FloatingPointError("w^H R_in w must be positive")
    return float(10.0 * np.log10(desired_power * abs(np.vdot(w, a0)) ** 2 / den))
