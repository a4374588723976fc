"""Strict JSON run configuration."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .model import BSParams, ModelParams
from .quadrature import QuadratureSpec
from .timestepper import SchemeParams, theta_admissible

MODES = ("solve", "convergence", "fourier", "estimate", "bsdemo")


class ConfigError(ValueError):
    pass


class InadmissibleThetaWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SchemeConfig:
    theta: float = 1.0 / 3.0
    lam: float = 0.4
    c: float = 1.0
    n0: int = 2


@dataclass(frozen=True)
class FourierConfig:
    samples: int = 121


@dataclass(frozen=True)
class EstimateConfig:
    max_points: int = 161  # per axis; the emitted grid is subsampled to at most this
    window: int = 32


@dataclass(frozen=True)
class BSDemoConfig:
    params: BSParams = field(default_factory=BSParams)
    intervals: int = 200
    s_max: float = 4.0
    steps: int = 8


@dataclass(frozen=True)
class RunConfig:
    model: ModelParams = field(default_factory=ModelParams)
    scheme: SchemeConfig = field(default_factory=SchemeConfig)
    inv_h: tuple[int, ...] = (8, 16, 32, 64)
    domain: tuple[float, float] = (-10.0, 10.0)
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)
    fourier: FourierConfig = field(default_factory=FourierConfig)
    estimate: EstimateConfig = field(default_factory=EstimateConfig)
    bs: BSDemoConfig = field(default_factory=BSDemoConfig)
    mode: str | None = None
    output: str | None = None
    theta_admissible: bool = True

    def scheme_params(self, inv_h: int, n0: int | None = None, theta: float | None = None) -> SchemeParams:
        s = self.scheme
        return SchemeParams(
            theta=s.theta if theta is None else theta,
            lam=s.lam,
            h=1.0 / inv_h,
            n0=s.n0 if n0 is None else n0,
            c=s.c,
        )


_SECTIONS: dict[str, set[str]] = {
    "model": {"rho", "a1", "a2"},
    "scheme": {"theta", "lambda", "c", "n0"},
    "mesh": {"inv_h"},
    "domain": {"min", "max"},
    "quadrature": {"rel_tol", "radius", "order", "panels", "max_panels"},
    "fourier": {"samples"},
    "estimate": {"max_points", "window"},
    "bs": {"r", "sigma1", "sigma2", "rho", "K1", "K2", "T", "intervals", "s_max", "steps"},
}
_TOP = set(_SECTIONS) | {"mode", "output"}


def _reject_unknown(obj: dict, allowed: set[str], where: str):
    extra = sorted(set(obj) - allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(extra)}")


def _section(doc: dict, name: str) -> dict:
    sec = doc.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"'{name}' must be an object")
    _reject_unknown(sec, _SECTIONS[name], name)
    return sec


def _num(sec: dict, key: str, default, where: str, kind=float):
    v = sec.get(key, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key} must be a number")
    if kind is int:
        if float(v) != int(v):
            raise ConfigError(f"{where}.{key} must be an integer")
        return int(v)
    if not math.isfinite(v):
        raise ConfigError(f"{where}.{key} must be finite")
    return float(v)


def parse_config(doc: Any) -> RunConfig:
    """Validate a decoded JSON document and build a ``RunConfig``."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    _reject_unknown(doc, _TOP, "top level")
    try:
        m = _section(doc, "model")
        d = ModelParams()
        model = ModelParams(
            rho=_num(m, "rho", d.rho, "model"), a1=_num(m, "a1", d.a1, "model"), a2=_num(m, "a2", d.a2, "model")
        )

        s = _section(doc, "scheme")
        ds = SchemeConfig()
        scheme = SchemeConfig(
            theta=_num(s, "theta", ds.theta, "scheme"),
            lam=_num(s, "lambda", ds.lam, "scheme"),
            c=_num(s, "c", ds.c, "scheme"),
            n0=_num(s, "n0", ds.n0, "scheme", int),
        )
        if scheme.theta <= 0 or scheme.lam <= 0 or scheme.c <= 0 or scheme.n0 < 0:
            raise ConfigError("scheme: theta, lambda, c must be positive and n0 non-negative")

        mesh = _section(doc, "mesh")
        inv_h = mesh.get("inv_h", list(RunConfig.inv_h))
        if not isinstance(inv_h, list) or not inv_h:
            raise ConfigError("mesh.inv_h must be a non-empty list")
        if any(isinstance(v, bool) or not isinstance(v, (int, float)) or v <= 0 for v in inv_h):
            raise ConfigError("mesh.inv_h entries must be positive numbers")
        inv_h = tuple(int(v) if float(v).is_integer() else v for v in inv_h)

        dom = _section(doc, "domain")
        domain = (_num(dom, "min", -10.0, "domain"), _num(dom, "max", 10.0, "domain"))
        if domain[0] >= domain[1]:
            raise ConfigError("domain.min must be below domain.max")

        q = _section(doc, "quadrature")
        dq = QuadratureSpec()
        quad = QuadratureSpec(
            order=_num(q, "order", dq.order, "quadrature", int),
            panels=_num(q, "panels", dq.panels, "quadrature", int),
            max_panels=_num(q, "max_panels", dq.max_panels, "quadrature", int),
            rel_tol=_num(q, "rel_tol", dq.rel_tol, "quadrature"),
            radius=_num(q, "radius", dq.radius, "quadrature"),
        )

        f = _section(doc, "fourier")
        fourier = FourierConfig(samples=_num(f, "samples", FourierConfig.samples, "fourier", int))
        if fourier.samples < 2:
            raise ConfigError("fourier.samples must be at least 2")

        e = _section(doc, "estimate")
        de = EstimateConfig()
        est = EstimateConfig(
            max_points=_num(e, "max_points", de.max_points, "estimate", int),
            window=_num(e, "window", de.window, "estimate", int),
        )
        if est.max_points < 1 or est.window < 0:
            raise ConfigError("estimate.max_points must be positive and window non-negative")

        b = _section(doc, "bs")
        db = BSParams()
        bsp = BSParams(**{k: _num(b, k, getattr(db, k), "bs") for k in ("r", "sigma1", "sigma2", "rho", "K1", "K2", "T")})
        dbd = BSDemoConfig()
        bs = BSDemoConfig(
            params=bsp,
            intervals=_num(b, "intervals", dbd.intervals, "bs", int),
            s_max=_num(b, "s_max", dbd.s_max, "bs"),
            steps=_num(b, "steps", dbd.steps, "bs", int),
        )
        if bs.intervals < 2 or bs.steps < 1 or bs.s_max <= 0:
            raise ConfigError("bs: intervals >= 2, steps >= 1 and s_max > 0 required")
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc

    mode = doc.get("mode")
    if mode is not None and mode not in MODES:
        raise ConfigError(f"mode must be one of {', '.join(MODES)}")
    output = doc.get("output")
    if output is not None and not isinstance(output, str):
        raise ConfigError("output must be a string")

    cfg = RunConfig(model=model, scheme=scheme, inv_h=inv_h, domain=domain, quadrature=quad,
                    fourier=fourier, estimate=est, bs=bs, mode=mode, output=output)
    for n in inv_h:
        try:
            cfg.scheme_params(n)
        except ValueError as exc:
            raise ConfigError(f"mesh 1/h={n}: {exc}") from exc
        cells = (domain[1] - domain[0]) * n
        if abs(cells - round(cells)) > 1e-9 * cells:
            raise ConfigError(f"mesh 1/h={n} does not divide the domain [{domain[0]}, {domain[1]}]")
        if mode in (None, "solve", "convergence", "estimate") and not domain[0] < 0 < domain[1]:
            raise ConfigError("the model domain must contain the origin")
    admissible = theta_admissible(scheme.theta, model.rho)
    if not admissible:
        warnings.warn(
            f"theta={scheme.theta} violates theta >= 1/4 and theta > (1+|rho|)/6 for rho={model.rho}",
            InadmissibleThetaWarning, stacklevel=2,
        )
    return RunConfig(**{**cfg.__dict__, "theta_admissible": admissible})


def load_config(path) -> RunConfig:
    """Read and validate a JSON configuration file (unknown keys are errors)."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    return parse_config(doc)
