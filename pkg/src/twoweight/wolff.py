"""Local gamma-averages of localized sums and generalized Wolff potentials."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tree import Instance, safe_divide


def _power_mean(rho: np.ndarray, w: np.ndarray, total: np.ndarray, gamma: float) -> np.ndarray:
    """Row-wise gamma power mean of ``rho`` against weights ``w``.

    Rows with zero total weight give 0.  Points of zero weight are ignored.
    A zero value with gamma <= 0 forces the mean to 0 (monotone limit).
    """
    charged = w > 0
    out = np.zeros(rho.shape[0])
    live = total > 0
    if gamma == math.inf:
        vals = np.where(charged, rho, -np.inf).max(axis=1)
        out[live] = vals[live]
        return out
    if gamma == -math.inf:
        vals = np.where(charged, rho, np.inf).min(axis=1)
        out[live] = vals[live]
        return out
    zero_hit = (charged & (rho <= 0)).any(axis=1)
    if gamma == 0:
        with np.errstate(divide="ignore"):
            logs = np.where(charged & (rho > 0), np.log(np.where(rho > 0, rho, 1.0)), 0.0)
        mean = safe_divide((logs * w).sum(axis=1), total)
        out = np.where(live & ~zero_hit, np.exp(mean), 0.0)
        return out
    powered = np.zeros_like(rho)
    np.power(rho, gamma, out=powered, where=charged & (rho > 0))
    mean = safe_divide((powered * w).sum(axis=1), total)
    if gamma < 0:
        ok = live & ~zero_hit & (mean > 0)
    else:
        ok = live & (mean > 0)
    out[ok] = mean[ok] ** (1.0 / gamma)
    return out


def lambda_gamma_all(inst: Instance, gamma: float, lam=None) -> np.ndarray:
    """Lambda_{gamma,Q} for every node (0 where omega(Q) = 0).

    The localized sums use only the active coefficients unless ``lam`` is
    supplied explicitly.
    """
    tree = inst.tree
    lam = inst.lam_active if lam is None else np.asarray(lam, dtype=float)
    out = np.zeros(tree.n_nodes)
    for k, rho in tree.localized_levels(lam):
        sl = tree.level_slice(k)
        w = inst.omega_leaves.reshape(rho.shape)
        out[sl] = _power_mean(rho, w, inst.omega[sl], gamma)
    return out


def lambda_gamma(inst: Instance, node: int, gamma: float) -> float:
    if inst.omega[node] <= 0:
        raise ValueError("Lambda is undefined on cubes of zero omega-measure")
    return float(lambda_gamma_all(inst, gamma)[node])


def wolff_coefficients(inst: Instance, gamma: float) -> np.ndarray:
    """Per-node terms lambda_Q (omega(Q)/sigma(Q))^{p'-1} Lambda_{gamma,Q}^{p'-1}."""
    p = inst.exponents.p
    if p == 1:
        raise ValueError("the Wolff potential needs p > 1 (p' finite)")
    e = inst.exponents.p_conj - 1.0
    lg = lambda_gamma_all(inst, gamma)
    return inst.lam_active * (inst.density_ratio * lg) ** e


def wolff_potential(inst: Instance, gamma: float | None = None) -> np.ndarray:
    gamma = inst.exponents.gamma if gamma is None else gamma
    return inst.tree.path_sums(wolff_coefficients(inst, gamma))


def wolff_condition_value(inst: Instance, gamma: float | None = None, potential=None) -> float:
    """Integral of W^{(p-1)q/(p-q)} against omega."""
    W = wolff_potential(inst, gamma) if potential is None else potential
    r = inst.exponents.wolff_exponent
    vals = np.zeros_like(W)
    np.power(W, r, out=vals, where=W > 0)
    return float(np.dot(vals, inst.omega_leaves))


def dlbo_ratio(inst: Instance) -> float:
    """Largest sup/inf ratio of rho_Q over omega-charged leaves, Q active."""
    hi = lambda_gamma_all(inst, math.inf)
    lo = lambda_gamma_all(inst, -math.inf)
    act = inst.active
    if not act.any():
        raise ValueError("empty active collection")
    if np.any(lo[act] == 0):
        return math.inf
    return float(np.max(hi[act] / lo[act]))


@dataclass
class WolffReport:
    gamma: float
    potential: np.ndarray
    condition_value: float
    dlbo_ratio: float

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "potential": self.potential.tolist(),
            "condition_value": self.condition_value,
            "dlbo_ratio": self.dlbo_ratio,
        }


def wolff_report(inst: Instance, gamma: float | None = None) -> WolffReport:
    gamma = inst.exponents.gamma if gamma is None else gamma
    W = wolff_potential(inst, gamma)
    return WolffReport(gamma, W, wolff_condition_value(inst, gamma, W), dlbo_ratio(inst))
