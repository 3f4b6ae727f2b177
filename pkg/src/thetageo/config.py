"""Experiment configuration: a nested key-value YAML file, parsed losslessly.

Numbers are coerced through float()/int() so that decimal literals survive
with full double precision.  Every referenced potential is certified convex
at load; malformed input raises ConfigError with the offending key.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import yaml

from .errors import ConfigError, ConvexityError, LatticeError
from .harmonic import BoundaryData
from .lattice import Lattice, TruncationPolicy
from .norming import QuadratureSpec
from .potential import KahlerPotential, PeriodicPotential, PotentialPath

KINDS = (
    "geodesic",
    "expansion-fit",
    "bernstein",
    "riemann-sum",
    "density",
    "gram-check",
    "regularity",
    "harmonic",
)


def _need(mapping, key, where):
    if key not in mapping:
        raise ConfigError(f"missing key '{key}' in {where}")
    return mapping[key]


def _floats(seq):
    return [float(v) for v in seq]


def build_potential_terms(m: int, terms, where: str) -> PeriodicPotential:
    """PeriodicPotential from a list of (frequency, amplitude, phase) items."""
    triples = []
    for i, item in enumerate(terms or []):
        try:
            n = [int(a) for a in _need(item, "n", where)]
            amp = float(_need(item, "amplitude", where))
            phase = float(item.get("phase", 0.0))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad potential term #{i} in {where}: {exc}") from exc
        if len(n) != m:
            raise ConfigError(f"frequency {n} in {where} has wrong dimension (m={m})")
        triples.append((tuple(n), amp, phase))
    return PeriodicPotential.from_cosines(m, triples)


@dataclass
class ExperimentConfig:
    """Parsed experiment description plus constructed domain objects."""

    kind: str
    raw: dict
    lattice: Lattice
    path: PotentialPath | None
    boundary: BoundaryData | None
    ladder: list[int]
    t_grid: list[float]
    points: list[dict]
    quad: QuadratureSpec
    policy: TruncationPolicy
    outputs: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return self.lattice.m


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    kind = _need(raw, "kind", "config")
    if kind not in KINDS:
        raise ConfigError(f"unknown kind '{kind}'; expected one of {KINDS}")

    lat_cfg = _need(raw, "lattice", "config")
    m = int(_need(lat_cfg, "m", "lattice"))
    z_im = lat_cfg.get("Z_im")
    z_re = lat_cfg.get("Z_re")
    if z_im is None:
        Z = 1j * np.eye(m)
    else:
        Z = np.array([[float(v) for v in row] for row in z_im]) * 1j
        if z_re is not None:
            Z = Z + np.array([[float(v) for v in row] for row in z_re])
    try:
        lattice = Lattice(Z)
    except LatticeError as exc:
        raise ConfigError(f"bad lattice: {exc}") from exc
    if lattice.m != m:
        raise ConfigError("lattice dimension does not match Z shape")

    pots = raw.get("potentials", {})
    path = None
    if "psi0" in pots or "psi1" in pots:
        try:
            phi0 = KahlerPotential(lattice, build_potential_terms(m, pots.get("psi0"), "psi0"))
            phi1 = KahlerPotential(lattice, build_potential_terms(m, pots.get("psi1"), "psi1"))
        except ConvexityError as exc:
            raise ConfigError(f"potential fails convexity certificate: {exc}") from exc
        path = PotentialPath(phi0, phi1)

    boundary = None
    harm = raw.get("harmonic")
    if harm is not None:
        domain = _need(harm, "domain", "harmonic")
        if domain == "interval":
            if path is None:
                raise ConfigError("interval harmonic config needs psi0/psi1 potentials")
            boundary = BoundaryData.interval(path.phi0, path.phi1)
        elif domain == "disk":
            samples = _need(harm, "boundary", "harmonic")
            pots_list = []
            angles = []
            for i, s in enumerate(samples):
                angles.append(float(_need(s, "angle", f"harmonic.boundary[{i}]")))
                pots_list.append(
                    KahlerPotential(
                        lattice,
                        build_potential_terms(m, s.get("psi"), f"harmonic.boundary[{i}]"),
                    )
                )
            expected = 2.0 * math.pi * np.arange(len(samples)) / len(samples)
            if not np.allclose(np.array(angles), expected, atol=1e-12):
                raise ConfigError("disk boundary angles must be equispaced from 0")
            boundary = BoundaryData.disk(pots_list)
        else:
            raise ConfigError(f"unknown harmonic domain '{domain}'")

    ladder = [int(k) for k in raw.get("ladder", [])]
    if ladder and any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise ConfigError("ladder must be strictly increasing")
    t_grid = _floats(raw.get("t_grid", []))
    points = list(raw.get("points", []))

    qcfg = raw.get("quadrature", {}) or {}
    ppd = qcfg.get("points_per_dim")
    quad = QuadratureSpec(
        points_per_dim=None if ppd in (None, "null") else int(ppd),
        periodization_radius=int(qcfg.get("periodization_radius", 3)),
    )
    tcfg = raw.get("truncation", {}) or {}
    policy = TruncationPolicy(
        tail_tol=float(tcfg.get("tail_tol", 1e-14)),
        max_radius=int(tcfg.get("max_radius", 64)),
    )
    outputs = raw.get("output", {}) or {}
    return ExperimentConfig(
        kind=kind,
        raw=raw,
        lattice=lattice,
        path=path,
        boundary=boundary,
        ladder=ladder,
        t_grid=t_grid,
        points=points,
        quad=quad,
        policy=policy,
        outputs=outputs,
    )
