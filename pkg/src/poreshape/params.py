"""Physical parameters, non-dimensional scales and run configuration.

Scaling convention (fixed for the whole package):

* length scale ``L_star`` = 1 nm,
* potential scale ``phi_star`` = R*T/F,
* concentration scale ``c_star`` = c0,
* pressure/stress scale ``p_scale`` = R*T*c0,
* energy scale ``E_star`` = p_scale * L_star**2 (2D, per unit depth).

With these choices the native electrostatic unknown is u = -F*phi/(R*T),
the dimensionless screening coefficient is ``u0 = c0 F^2 L^2/(R T eps)``
and the dimensionless wall flux is ``g = sigma_c F L/(R T eps)``; the
identities ``eps_hat = 1/u0`` and ``sigma_hat = g/u0`` hold exactly.
"""

from __future__ import annotations

import configparser
import logging
import math
from dataclasses import dataclass, field, replace

from .constants import DEFAULT_PHYSICS, EPS0, FARADAY, GAS_CONSTANT

logger = logging.getLogger(__name__)

L_STAR_DEFAULT = 1.0e-9  # m


class ConfigError(ValueError):
    """Invalid configuration file or parameter set."""


@dataclass(frozen=True)
class PhysicalParams:
    """Dimensional material and state constants (SI units)."""

    T: float = DEFAULT_PHYSICS["T"]              # K
    gamma: float = DEFAULT_PHYSICS["gamma"]      # N/m
    k_S: float = DEFAULT_PHYSICS["k_S"]          # N/m^2
    G_S: float = DEFAULT_PHYSICS["G_S"]          # N/m^2
    eps_r: float = DEFAULT_PHYSICS["eps_r"]      # 1
    sigma_c: float = DEFAULT_PHYSICS["sigma_c"]  # C/m^2
    p_S0: float = DEFAULT_PHYSICS["p_S0"]        # N/m^2
    p0: float = DEFAULT_PHYSICS["p0"]            # N/m^2
    c0: float = DEFAULT_PHYSICS["c0"]            # mol/m^3
    F: float = FARADAY                           # C/mol
    R: float = GAS_CONSTANT                      # J/(mol K)
    eps0: float = EPS0                           # F/m

    def __post_init__(self):
        if self.k_S <= 0:
            raise ConfigError(f"violated 'k_S > 0': k_S = {self.k_S}")
        if self.G_S <= 0:
            raise ConfigError(f"violated 'G_S > 0': G_S = {self.G_S}")
        if self.k_S - (2.0 / 3.0) * self.G_S < 0:
            raise ConfigError(
                "violated 'k_S - (2/3)*G_S >= 0': "
                f"k_S = {self.k_S}, G_S = {self.G_S}, "
                f"k_S - (2/3)G_S = {self.k_S - 2.0 * self.G_S / 3.0}"
            )
        if self.sigma_c <= 0:
            raise ConfigError(f"violated 'sigma_c > 0': sigma_c = {self.sigma_c}")
        if self.T <= 0:
            raise ConfigError(f"violated 'T > 0': T = {self.T}")
        if self.c0 <= 0:
            raise ConfigError(f"violated 'c0 > 0': c0 = {self.c0}")
        if self.eps <= 0:
            raise ConfigError(f"violated 'eps0*eps_r > 0': eps = {self.eps}")

    @property
    def eps(self) -> float:
        """Absolute permittivity eps0*eps_r [F/m]."""
        return self.eps0 * self.eps_r

    @property
    def RT(self) -> float:
        return self.R * self.T


@dataclass(frozen=True)
class Scales:
    """Scales mapping dimensional values to the solver's dimensionless ones."""

    L_star: float          # m
    phi_star: float        # V
    c_star: float          # mol/m^3
    p_scale: float         # N/m^2
    E_star: float          # J/m  (2D energy per unit depth)

    def __post_init__(self):
        for name in ("L_star", "phi_star", "c_star", "p_scale", "E_star"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"violated 'scale {name} > 0'")

    def nondim_length(self, x):
        return x / self.L_star

    def redim_length(self, x):
        return x * self.L_star

    def nondim_pressure(self, p):
        return p / self.p_scale

    def redim_pressure(self, p):
        return p * self.p_scale

    def nondim_potential(self, phi):
        return phi / self.phi_star

    def redim_potential(self, phi):
        return phi * self.phi_star

    def redim_energy(self, e):
        return e * self.E_star


@dataclass(frozen=True)
class DimensionlessGroups:
    """Dimensionless parameter set consumed by the solvers."""

    u0: float          # screening coefficient of the potential equation
    g: float           # wall flux datum on the charged interface
    k_S: float         # bulk modulus / p_scale
    G_S: float         # shear modulus / p_scale
    p_S0: float        # solid reference pressure / p_scale
    p0: float          # liquid reference pressure / p_scale
    gamma: float       # surface tension / (p_scale * L_star)

    @property
    def eps_hat(self) -> float:
        """Dimensionless permittivity; equals 1/u0 under the package scaling."""
        return 1.0 / self.u0

    @property
    def sigma_hat(self) -> float:
        """Dimensionless wall charge; equals g/u0 under the package scaling."""
        return self.g / self.u0

    @property
    def debye_hat(self) -> float:
        """Debye length in units of L_star."""
        return 1.0 / math.sqrt(self.u0)


def nondimensionalize(params: PhysicalParams, L_star: float = L_STAR_DEFAULT):
    """Derive the scale set and the dimensionless groups from ``params``."""
    if L_star <= 0:
        raise ConfigError(f"violated 'L_star > 0': L_star = {L_star}")
    RT = params.RT
    p_scale = RT * params.c0
    scales = Scales(
        L_star=L_star,
        phi_star=RT / params.F,
        c_star=params.c0,
        p_scale=p_scale,
        E_star=p_scale * L_star**2,
    )
    groups = DimensionlessGroups(
        u0=params.c0 * params.F**2 / (RT * params.eps) * L_star**2,
        g=params.sigma_c * params.F / (RT * params.eps) * L_star,
        k_S=params.k_S / p_scale,
        G_S=params.G_S / p_scale,
        p_S0=params.p_S0 / p_scale,
        p0=params.p0 / p_scale,
        gamma=params.gamma / (p_scale * L_star),
    )
    return scales, groups


def debye_length(params: PhysicalParams) -> float:
    """Electrostatic screening length sqrt(eps*R*T/(F^2*c0)) [m]."""
    return math.sqrt(params.eps * params.RT / (params.F**2 * params.c0))


ALGORITHMS = ("fixed_point", "variational", "radial_oracle", "gradient_check")
LAWS = ("classical", "modified")
STOP_METRICS = ("sup", "native")


@dataclass(frozen=True)
class RunConfig:
    """Geometry, mesh, algorithm and output controls for one run.

    Lengths are in meters; ``eps_s`` in m^2 (``None`` selects the automatic
    value ``(2 h_Gamma)^2`` from the achieved interface edge length).
    """

    # geometry
    d: float = 2.0e-9            # channel diameter
    l: float = 10.0e-9           # single channel length (domain length 2*l)
    s: float = 0.5e-9            # vertical offset between the two channels
    thickness: float | None = None   # elastomer layer above/below; default 3*d
    fillet: float = 0.0          # corner fillet radius at the step

    # mesh
    h: float = 0.25e-9           # target edge length
    refine_interface: float = 4.0
    min_angle: float = 20.0      # quality target [deg]

    # algorithm
    algorithm: str = "fixed_point"
    law: str = "classical"
    sigma_skip: bool = False     # uncharged limit: skip the potential solve
    elastic_form: str = "diagonal"   # bulk-term convention: diagonal | trace
    k: float = 1.0e-3            # gradient step (dimensionless)
    omega: float = 0.5           # fixed-point under-relaxation
    err: float = 1.0e-3          # outer stopping tolerance (dimensionless)
    stop_metric: str = "sup"
    eps_s: float | None = None   # curvature smoothing parameter [m^2]
    max_iter: int = 100
    max_step: float | None = None    # cap on |update| per iteration [m]; None = d/8
    newton_tol: float = 1.0e-10
    newton_max_iter: int = 50
    seed: int = 0

    # output
    out_dir: str = "out"
    checkpoint_every: int = 10

    def __post_init__(self):
        if self.d <= 0 or self.l <= 0:
            raise ConfigError("violated 'd > 0 and l > 0'")
        if not (0 <= self.s < self.d):
            raise ConfigError(
                f"violated '0 <= s < d' (channels disconnected): s = {self.s}, d = {self.d}"
            )
        if self.h <= 0:
            raise ConfigError(f"violated 'h > 0': h = {self.h}")
        if self.err <= 0:
            raise ConfigError(f"violated 'err > 0': err = {self.err}")
        if self.k <= 0:
            raise ConfigError(f"violated 'k > 0': k = {self.k}")
        if self.eps_s is not None and self.eps_s < 0:
            raise ConfigError(f"violated 'eps_s >= 0': eps_s = {self.eps_s}")
        if self.refine_interface < 1:
            raise ConfigError("violated 'refine_interface >= 1'")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm '{self.algorithm}', expected one of {ALGORITHMS}")
        if self.law not in LAWS:
            raise ConfigError(f"unknown law '{self.law}', expected one of {LAWS}")
        if self.stop_metric not in STOP_METRICS:
            raise ConfigError(f"unknown stop_metric '{self.stop_metric}'")
        if not (0 < self.omega <= 1):
            raise ConfigError(f"violated '0 < omega <= 1': omega = {self.omega}")
        if self.elastic_form not in ("diagonal", "trace"):
            raise ConfigError(f"unknown elastic_form '{self.elastic_form}'")

    @property
    def thickness_eff(self) -> float:
        """Elastomer thickness above/below the channels (modeling default 3*d)."""
        return 3.0 * self.d if self.thickness is None else self.thickness

    @property
    def max_step_eff(self) -> float:
        """Per-iteration displacement cap (damping control), default d/8."""
        return self.d / 8.0 if self.max_step is None else self.max_step

    def with_(self, **kwargs) -> "RunConfig":
        return replace(self, **kwargs)


_GEOMETRY_KEYS = {"d", "l", "s", "thickness", "fillet"}
_PHYSICS_KEYS = set(DEFAULT_PHYSICS) | {"F", "R", "eps0", "sigma_skip"}
_SOLVER_KEYS = {
    "algorithm", "law", "h", "refine_interface", "min_angle", "k", "omega",
    "err", "stop_metric", "eps_s", "max_iter", "max_step", "newton_tol",
    "newton_max_iter", "seed", "sigma_skip", "elastic_form",
}
_OUTPUT_KEYS = {"dir", "checkpoint_every"}


def _get(parser, section, key, cast, default):
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key).strip()
    if raw.lower() in ("auto", "none", ""):
        return None
    if cast is bool:
        return raw.lower() in ("1", "true", "yes", "on")
    return cast(raw)


def load_config(path: str) -> tuple[RunConfig, PhysicalParams]:
    """Parse a flat INI file into (RunConfig, PhysicalParams).

    Missing physical values default to the standard material data; parse
    errors carry line information, invariant violations name the violated
    inequality.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as fh:
            parser.read_file(fh, source=str(path))
    except OSError as exc:
        raise ConfigError(f"cannot read config '{path}': {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"parse error in '{path}': {exc}") from exc

    for section, allowed in (
        ("geometry", _GEOMETRY_KEYS),
        ("physics", _PHYSICS_KEYS),
        ("solver", _SOLVER_KEYS),
        ("output", _OUTPUT_KEYS),
    ):
        if parser.has_section(section):
            unknown = set(parser.options(section)) - {k.lower() for k in allowed}
            if unknown:
                raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")

    phys_kwargs = {}
    for key in DEFAULT_PHYSICS:
        val = _get(parser, "physics", key, float, None)
        if val is not None:
            phys_kwargs[key] = val
    for key in ("F", "R", "eps0"):
        val = _get(parser, "physics", key, float, None)
        if val is not None:
            phys_kwargs[key] = val
    params = PhysicalParams(**phys_kwargs)
    if "p0" in phys_kwargs and phys_kwargs["p0"] != DEFAULT_PHYSICS["p0"]:
        # The reference liquid pressure is run-dependent in the source data;
        # record the override instead of resolving it.
        logger.info(
            "p0 set to %.6g N/m^2 (default reference value %.6g N/m^2)",
            phys_kwargs["p0"], DEFAULT_PHYSICS["p0"],
        )

    cfg_kwargs = {}
    defaults = RunConfig()
    for key in ("d", "l", "s", "fillet"):
        val = _get(parser, "geometry", key, float, None)
        if val is not None:
            cfg_kwargs[key] = val
    thickness = _get(parser, "geometry", "thickness", float, None)
    if thickness is not None:
        cfg_kwargs["thickness"] = thickness

    for key, cast in (
        ("algorithm", str), ("law", str), ("stop_metric", str),
        ("elastic_form", str),
        ("h", float), ("refine_interface", float), ("min_angle", float),
        ("k", float), ("omega", float), ("err", float),
        ("max_step", float), ("newton_tol", float),
    ):
        val = _get(parser, "solver", key, cast, None)
        if val is not None:
            cfg_kwargs[key] = val
    for key in ("max_iter", "newton_max_iter", "seed"):
        val = _get(parser, "solver", key, int, None)
        if val is not None:
            cfg_kwargs[key] = val
    eps_s = _get(parser, "solver", "eps_s", float, defaults.eps_s)
    cfg_kwargs["eps_s"] = eps_s
    sskip = _get(parser, "solver", "sigma_skip", bool, None)
    if sskip is None:
        sskip = _get(parser, "physics", "sigma_skip", bool, None)
    if sskip is not None:
        cfg_kwargs["sigma_skip"] = sskip

    out_dir = _get(parser, "output", "dir", str, None)
    if out_dir is not None:
        cfg_kwargs["out_dir"] = out_dir
    ck = _get(parser, "output", "checkpoint_every", int, None)
    if ck is not None:
        cfg_kwargs["checkpoint_every"] = ck

    return RunConfig(**cfg_kwargs), params
