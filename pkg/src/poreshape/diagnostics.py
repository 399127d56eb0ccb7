"""Closed-form discrepancy between the classical and corrected force
balances for a straight channel, and run-report assembly."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .params import PhysicalParams, debye_length


@dataclass(frozen=True)
class YLDiscrepancy:
    """Absolute and stiffness-relative force-balance discrepancy.

    For a straight channel of radius r with wall curvature 1/r the two
    balances differ by |p* - p - (gamma* - gamma) H|; the relative value
    divides by the bulk modulus.
    """

    delta: float          # N/m^2
    relative: float       # delta / k_S
    r: float              # m
    d_l: float            # m
    lambda_p: float
    sigma_c: float        # C/m^2
    eps: float            # F/m
    T: float              # K

    def __post_init__(self):
        if self.relative < 0:
            raise ValueError("relative discrepancy must be nonnegative")


def yl_discrepancy(r: float, d_l: float, params: PhysicalParams) -> YLDiscrepancy:
    """Evaluate the closed form with curvature 1/r.

    delta = sigma_c | -(1/2) sigma_c/eps + 2 (R T / F) ln(1 - lambda_p/8) / r |
    with lambda_p = r^2 / d_l^2 < 8.
    """
    lam_p = (r / d_l) ** 2
    if lam_p >= 8.0:
        raise ValueError(f"lambda_p = {lam_p:.4f} outside [0, 8)")
    eps = params.eps
    term_flat = -0.5 * params.sigma_c / eps
    term_curv = 2.0 * params.RT / params.F * math.log(1.0 - lam_p / 8.0) / r
    delta = params.sigma_c * abs(term_flat + term_curv)
    return YLDiscrepancy(delta=delta, relative=delta / params.k_S, r=r, d_l=d_l,
                         lambda_p=lam_p, sigma_c=params.sigma_c, eps=eps, T=params.T)


def yl_band(params: PhysicalParams, r: float = 1.0e-9,
            d_l_min: float = 0.6e-9, d_l_max: float = 100.0e-9,
            n: int = 200) -> dict:
    """Sweep the screening length and report the discrepancy band.

    Returns the sweep rows plus the two endpoints: the dilute limit
    (lambda_p -> 0, delta = sigma_c^2/(2 eps)) and the densest admissible
    screening (d_l = d_l_min).
    """
    d_ls = np.geomspace(d_l_min, d_l_max, n)
    rows = [yl_discrepancy(r, dl, params) for dl in d_ls]
    flat = params.sigma_c**2 / (2.0 * params.eps)
    return {
        "rows": rows,
        "relative_low": flat / params.k_S,          # lambda_p -> 0 limit
        "relative_high": rows[0].relative,          # d_l = d_l_min
        "lambda_p_high": rows[0].lambda_p,
        "debye_table": debye_length(params),
    }


@dataclass
class RunReport:
    """Config echo, final status and history tables of one run."""

    mode: str
    config: dict
    physics: dict
    status: str
    exit_code: int
    message: str = ""
    energy_history: list = field(default_factory=list)
    gen_history: list = field(default_factory=list)
    checks: list = field(default_factory=list)     # (name, passed, detail)
    extras: dict = field(default_factory=dict)

    def add_check(self, name: str, passed: bool, detail: str = ""):
        self.checks.append({"name": name, "passed": bool(passed), "detail": detail})

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "status": self.status,
            "exit_code": self.exit_code,
            "message": self.message,
            "config": self.config,
            "physics": self.physics,
            "energy_history": self.energy_history,
            "gen_history": self.gen_history,
            "checks": self.checks,
            "extras": self.extras,
        }
