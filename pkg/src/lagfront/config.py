"""Scenario files: TOML ingestion and validation.

A scenario bundles a flux, piecewise-constant initial data with per-jump
resolution modes, the ensemble grid, optional test curves with their test
functions, entropy pairs, and characteristic requests.  Physical defaults
(mesh 1/64, 256x256 grid, 6 dyadic refinement levels) live in DEFAULTS and
every field is overridable.  Data outside [0, 1] are affinely rescaled and
the flux is recomposed to match.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .flux import ConvexityError, FluxModel, burgers, polynomial_flux, rescaled

__all__ = ["ConfigError", "Scenario", "SurfaceSpec", "EntropySpec", "CharSpec",
           "DEFAULTS", "load_scenario", "scenario_from_dict"]

DEFAULTS = {
    "horizon": 1.0,
    "rarefaction_mesh": 1.0 / 64,
    "interaction_mode": "entropic",
    "nx": 256,
    "nv": 256,
    "seed": 0,
    "levels": 6,
    "mollifier_deltas": [1e-3],
    "tangency_epsilons": [0.1, 0.05, 0.025, 0.0125],
}


class ConfigError(ValueError):
    """Scenario file rejected; the message names the offending key."""


@dataclass(frozen=True)
class SurfaceSpec:
    name: str
    vertices: Tuple[Tuple[float, float], ...]
    phi_t: Tuple[float, float]          # plateau window in t
    phi_x: Tuple[float, float]          # plateau window in x
    ramp_t: float = 0.05
    ramp_x: float = 0.1
    deltas: Tuple[float, ...] = (1e-3,)


@dataclass(frozen=True)
class EntropySpec:
    kind: str
    anchor: str = "zero-at-0"
    a: Optional[float] = None


@dataclass(frozen=True)
class CharSpec:
    x0: Tuple[float, ...]
    levels: int = 6
    t0: float = 0.0


@dataclass
class Scenario:
    name: str
    flux: FluxModel
    breakpoints: Tuple[float, ...]
    values: Tuple[float, ...]
    jump_modes: Tuple[str, ...]
    horizon: float
    rarefaction_mesh: float
    interaction_mode: str
    nx: int
    nv: int
    window: Tuple[float, float]
    window_epi: Tuple[float, float]
    seed: int
    surfaces: List[SurfaceSpec] = field(default_factory=list)
    entropies: List[EntropySpec] = field(default_factory=list)
    characteristics: Optional[CharSpec] = None
    rescale: Optional[Tuple[float, float]] = None  # original (lo, hi) if rescaled


def _need(table: dict, key: str, where: str):
    if key not in table:
        raise ConfigError(f"missing key {key!r} in [{where}]")
    return table[key]


def _build_flux(table: dict) -> FluxModel:
    kind = _need(table, "kind", "flux")
    if kind == "burgers":
        return burgers()
    if kind == "polynomial":
        coeffs = _need(table, "coeffs", "flux")
        try:
            return polynomial_flux(coeffs)
        except ConvexityError as e:
            raise ConfigError(f"flux rejected: {e}") from e
    raise ConfigError(f"unknown flux kind {kind!r}")


def scenario_from_dict(data: dict, name: str = "scenario") -> Scenario:
    try:
        flux = _build_flux(_need(data, "flux", "scenario"))
        init = _need(data, "initial", "scenario")
        left = float(_need(init, "left", "initial"))
        jumps = _need(init, "jumps", "initial")
        if not isinstance(jumps, list) or not jumps:
            raise ConfigError("[initial].jumps must be a non-empty list")
        bps, vals, modes = [], [left], []
        for k, j in enumerate(jumps):
            bps.append(float(_need(j, "x", f"initial.jumps[{k}]")))
            vals.append(float(_need(j, "u", f"initial.jumps[{k}]")))
            mode = j.get("mode", "entropic")
            if mode not in ("entropic", "non_entropic"):
                raise ConfigError(f"initial.jumps[{k}].mode must be entropic "
                                  f"or non_entropic, got {mode!r}")
            modes.append(mode)
        if any(b >= a for a, b in zip(bps[1:], bps[:-1])):
            raise ConfigError("[initial].jumps x values must increase")

        rescale = None
        lo, hi = min(vals), max(vals)
        if lo < 0.0 or hi > 1.0:
            lo2, hi2 = min(lo, 0.0), max(hi, 1.0)
            flux = rescaled(flux, lo2, hi2)
            vals = [(v - lo2) / (hi2 - lo2) for v in vals]
            rescale = (lo2, hi2)

        run = data.get("run", {})
        horizon = float(run.get("horizon", DEFAULTS["horizon"]))
        mesh = float(run.get("rarefaction_mesh", DEFAULTS["rarefaction_mesh"]))
        imode = run.get("interaction_mode", DEFAULTS["interaction_mode"])
        if horizon <= 0 or mesh <= 0:
            raise ConfigError("[run] horizon and rarefaction_mesh must be positive")
        if imode not in ("entropic", "preserve"):
            raise ConfigError(f"[run].interaction_mode must be entropic or "
                              f"preserve, got {imode!r}")

        ens = data.get("ensemble", {})
        nx = int(ens.get("nx", DEFAULTS["nx"]))
        nv = int(ens.get("nv", DEFAULTS["nv"]))
        seed = int(ens.get("seed", DEFAULTS["seed"]))
        pad = flux.s_max * horizon
        default_window = (min(bps) - pad - 0.5, max(bps) + pad + 0.5)
        window = tuple(float(w) for w in ens.get("window", default_window))
        window_epi = tuple(float(w) for w in ens.get("window_epi", window))
        for w, key in ((window, "window"), (window_epi, "window_epi")):
            if len(w) != 2 or w[0] >= w[1]:
                raise ConfigError(f"[ensemble].{key} must be [lo, hi] with lo < hi")

        surfaces = []
        for k, s in enumerate(data.get("surfaces", [])):
            verts = tuple((float(t), float(x))
                          for t, x in _need(s, "vertices", f"surfaces[{k}]"))
            if len(verts) < 2:
                raise ConfigError(f"surfaces[{k}] needs >= 2 vertices")
            ts = [v[0] for v in verts]
            xs = [v[1] for v in verts]
            phi_t = tuple(s.get("phi_t", (min(ts), max(ts))))
            phi_x = tuple(s.get("phi_x", (min(xs) - 0.2, max(xs) + 0.2)))
            surfaces.append(SurfaceSpec(
                name=s.get("name", f"surface{k}"),
                vertices=verts, phi_t=phi_t, phi_x=phi_x,
                ramp_t=float(s.get("ramp_t", 0.05)),
                ramp_x=float(s.get("ramp_x", 0.1)),
                deltas=tuple(float(d) for d in
                             s.get("deltas", DEFAULTS["mollifier_deltas"]))))

        entropies = []
        for k, e in enumerate(data.get("entropies", [])):
            kind = _need(e, "kind", f"entropies[{k}]")
            if kind not in ("quadratic", "kruzkov"):
                raise ConfigError(f"entropies[{k}].kind must be quadratic or "
                                  f"kruzkov, got {kind!r}")
            anchor = e.get("anchor", "zero-at-0")
            if anchor not in ("zero-at-0", "zero-at-1"):
                raise ConfigError(f"entropies[{k}].anchor invalid: {anchor!r}")
            a = e.get("a")
            if kind == "kruzkov" and (a is None or not 0.0 <= float(a) <= 1.0):
                raise ConfigError(f"entropies[{k}]: kruzkov needs a in [0, 1]")
            entropies.append(EntropySpec(kind=kind, anchor=anchor,
                                         a=None if a is None else float(a)))
        if not entropies:
            entropies = [EntropySpec("quadratic", "zero-at-0")]

        chars = None
        if "characteristics" in data:
            c = data["characteristics"]
            x0 = c.get("x0", [])
            if not isinstance(x0, list):
                x0 = [x0]
            chars = CharSpec(x0=tuple(float(v) for v in x0),
                             levels=int(c.get("levels", DEFAULTS["levels"])),
                             t0=float(c.get("t0", 0.0)))

        return Scenario(
            name=data.get("name", name), flux=flux,
            breakpoints=tuple(bps), values=tuple(vals), jump_modes=tuple(modes),
            horizon=horizon, rarefaction_mesh=mesh, interaction_mode=imode,
            nx=nx, nv=nv, window=window, window_epi=window_epi, seed=seed,
            surfaces=surfaces, entropies=entropies, characteristics=chars,
            rescale=rescale)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"invalid scenario: {e}") from e


def load_scenario(path) -> Scenario:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"no such scenario file: {path}")
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from e
    return scenario_from_dict(data, name=path.stem)
