"""Experiment templates, presets and the scenario config-file format.

A config file is INI text read with :mod:`configparser`::

    [scenario]
    m = 16                 # sensors
    spacing = 0.5          # d / wavelength
    noise_power = 1.0      # sigma_n^2
    snapshots = 3000
    desired_doa = 90       # degrees
    snr_db = 10            # desired power = noise_power * 10^(snr_db/10)
    inr_db = 30            # per-interferer power, same convention
    interferers = 9        # count drawn per trial, or a DOA list "40, 75, 130"
    changes = 3000:4       # optional; "index:count" or "index:doa/doa/...",
                           # several events separated by commas

    [smcg]
    alpha = 21
    beta = 0.9
    eta = 0.5
    gamma = 1.0
    lambda1_min = 0.1
    lambda1_max = 0.999
    loading = 0.01         # R_hat(0) = loading * I

    [baselines]
    mu_scale = 1e-4        # Frost step = mu_scale / mean per-element input power
    forgetting = 0.998     # RLS
    rls_loading = 0.01     # RLS R_inv(0) = I / rls_loading

Every key is optional and falls back to the exp1 preset.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from .array import ArrayGeometry, ScenarioConfig, ScenarioError, SourceSpec
from .core import CgParams, PdbParams

# (snapshot index, interferer count or explicit DOAs)
ChangeSpec = Tuple[int, Union[int, Tuple[float, ...]]]

DOA_RANGE = (10.0, 170.0)
MIN_SEPARATION_DEG = 5.0


@dataclass(frozen=True)
class AlgorithmParams:
    pdb: PdbParams = field(default_factory=PdbParams)
    cg: CgParams = field(default_factory=CgParams)
    mu_scale: float = 1e-4
    forgetting: float = 0.998
    rls_loading: float = 1e-2

    def __post_init__(self):
        if not self.mu_scale >= 0:
            raise ValueError("mu_scale must be >= 0")
        if not 0.0 < self.forgetting <= 1.0:
            raise ValueError("forgetting must lie in (0, 1]")
        if not self.rls_loading > 0:
            raise ValueError("rls_loading must be > 0")


@dataclass(frozen=True)
class Experiment:
    """Scenario template; interferer DOAs may be drawn per trial."""

    name: str = "exp1"
    m: int = 16
    spacing: float = 0.5
    noise_power: float = 1.0
    snapshots: int = 3000
    desired_doa: float = 90.0
    snr_db: float = 10.0
    inr_db: float = 30.0
    interferers: Union[int, Tuple[float, ...]] = 9
    changes: Tuple[ChangeSpec, ...] = ()
    params: AlgorithmParams = field(default_factory=AlgorithmParams)

    @property
    def desired_power(self) -> float:
        return self.noise_power * 10 ** (self.snr_db / 10)

    @property
    def interferer_power(self) -> float:
        return self.noise_power * 10 ** (self.inr_db / 10)

    @property
    def n_sources(self) -> int:
        return 1 + _count(self.interferers) + sum(_count(c) for _, c in self.changes)

    def validate(self) -> None:
        """Cheap checks run before any computation."""
        ArrayGeometry(self.m, self.spacing)
        if self.n_sources > self.m:
            raise ScenarioError(f"q <= m violated: q={self.n_sources} sources for m={self.m} sensors")
        if not (self.noise_power > 0 and self.snapshots >= 1):
            raise ScenarioError("noise_power must be > 0 and snapshots >= 1")
        idx = [k for k, _ in self.changes]
        if any(b <= a for a, b in zip(idx, idx[1:])) or any(not 0 < k < self.snapshots for k in idx):
            raise ScenarioError("change indices must be strictly increasing and inside (0, snapshots)")
        SourceSpec(self.desired_doa, self.desired_power, True)
        for doas in [self.interferers] + [c for _, c in self.changes]:
            if not isinstance(doas, int):
                for t in doas:
                    SourceSpec(t, self.interferer_power)

    def draw_scenario(self, rng: np.random.Generator) -> ScenarioConfig:
        """Fix every DOA; drawn ones are uniform in (10, 170) degrees, >= 5 apart."""
        taken = [self.desired_doa]
        for doas in [self.interferers] + [c for _, c in self.changes]:
            if not isinstance(doas, int):
                taken.extend(doas)

        def pick(spec):
            if not isinstance(spec, int):
                return [SourceSpec(t, self.interferer_power) for t in spec]
            out = [SourceSpec(t, self.interferer_power) for t in _draw_doas(rng, spec, taken)]
            taken.extend(s.doa_deg for s in out)
            return out

        sources = [SourceSpec(self.desired_doa, self.desired_power, True)] + pick(self.interferers)
        events = [(k, tuple(pick(c))) for k, c in self.changes]
        return ScenarioConfig(
            geometry=ArrayGeometry(self.m, self.spacing),
            sources=tuple(sources),
            noise_power=self.noise_power,
            n_snapshots=self.snapshots,
            change_events=tuple(events),
        )

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["interferers"] = _jsonable(self.interferers)
        d["changes"] = [[k, _jsonable(c)] for k, c in self.changes]
        return d


def _count(spec) -> int:
    return spec if isinstance(spec, int) else len(spec)


def _jsonable(spec):
    return spec if isinstance(spec, int) else list(spec)


def _draw_doas(rng, n, taken, max_tries=100_000):
    out = []
    for _ in range(max_tries):
        if len(out) == n:
            return out
        c = rng.uniform(*DOA_RANGE)
        if all(abs(c - t) >= MIN_SEPARATION_DEG for t in list(taken) + out):
            out.append(float(c))
    if len(out) == n:
        return out
    raise ScenarioError(f"could not place {n} interferers with {MIN_SEPARATION_DEG} deg separation")


PRESETS = {
    "exp1": Experiment(),
    "exp2": Experiment(
        name="exp2",
        snapshots=6000,
        inr_db=35.0,
        interferers=7,
        changes=((3000, 4),),
        params=AlgorithmParams(pdb=PdbParams(alpha=23.0)),
    ),
}


def get_preset(name: str) -> Experiment:
    try:
        return PRESETS[name]
    except KeyError:
        raise ScenarioError(f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}") from None


def with_overrides(exp: Experiment, **kw) -> Experiment:
    """Replace scenario fields and ``alpha``/``beta``/``eta``/... parameters.

    ``None`` values are ignored.  The PDB noise estimate follows
    ``noise_power`` unless given explicitly.
    """
    kw = {k: v for k, v in kw.items() if v is not None}
    pdb_kw = {k: kw.pop(k) for k in ("alpha", "beta", "noise_power_estimate") if k in kw}
    cg_kw = {k: kw.pop(k) for k in ("eta", "gamma", "lambda1_min", "lambda1_max", "loading") if k in kw}
    alg_kw = {k: kw.pop(k) for k in ("mu_scale", "forgetting", "rls_loading") if k in kw}
    exp = dataclasses.replace(exp, **kw)
    if "noise_power" in kw and "noise_power_estimate" not in pdb_kw:
        pdb_kw["noise_power_estimate"] = exp.noise_power
    params = exp.params
    if pdb_kw:
        params = dataclasses.replace(params, pdb=dataclasses.replace(params.pdb, **pdb_kw))
    if cg_kw:
        params = dataclasses.replace(params, cg=dataclasses.replace(params.cg, **cg_kw))
    if alg_kw:
        params = dataclasses.replace(params, **alg_kw)
    return dataclasses.replace(exp, params=params)


_SCENARIO_KEYS = {
    "m": int,
    "spacing": float,
    "noise_power": float,
    "snapshots": int,
    "desired_doa": float,
    "snr_db": float,
    "inr_db": float,
}
_SMCG_KEYS = {k: float for k in ("alpha", "beta", "eta", "gamma", "lambda1_min", "lambda1_max", "loading",
                                  "noise_power_estimate")}
_BASELINE_KEYS = {k: float for k in ("mu_scale", "forgetting", "rls_loading")}


def _parse_doa_list(text, sep=","):
    return tuple(float(t) for t in text.replace("/", sep).split(sep) if t.strip())


def _parse_interferers(text: str):
    text = text.strip()
    if "," not in text and "." not in text and text.isdigit():
        return int(text)
    return _parse_doa_list(text)


def _parse_changes(text: str):
    out = []
    for item in filter(None, (t.strip() for t in text.split(","))):
        idx, _, spec = item.partition(":")
        if not spec:
            raise ScenarioError(f"malformed change event {item!r}; expected index:count or index:doa/doa")
        spec = spec.strip()
        out.append((int(idx), int(spec) if spec.isdigit() else _parse_doa_list(spec, "/")))
    return tuple(out)


def parse_config(text: str, name: str = "custom") -> Experiment:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ScenarioError(f"malformed config: {exc}") from None
    known = {"scenario": {**_SCENARIO_KEYS, "interferers": None, "changes": None},
             "smcg": _SMCG_KEYS, "baselines": _BASELINE_KEYS}
    kw = {"name": name}
    for section in cp.sections():
        if section not in known:
            raise ScenarioError(f"unknown config section [{section}]")
        for key, raw in cp.items(section):
            if key not in known[section]:
                raise ScenarioError(f"unknown key {key!r} in [{section}]")
            try:
                if key == "interferers":
                    kw[key] = _parse_interferers(raw)
                elif key == "changes":
                    kw[key] = _parse_changes(raw)
                else:
                    kw[key] = known[section][key](raw)
            except ValueError as exc:
                raise ScenarioError(f"bad value for {key!r}: {exc}") from None
    base = get_preset("exp1")
    try:
        exp = with_overrides(base, **kw)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(str(exc)) from None
    exp.validate()
    return exp


def load_config(path) -> Experiment:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read config: {exc}") from None
    return parse_config(text, name=path.stem)
