"""Least-squares estimation of the finite system Hankel matrix from one trajectory.

With window ``d``, column ``l`` (``l = 0..T-1``) of the regression pairs the
future outputs ``(Y[l+d+1], ..., Y[l+2d])`` with the past inputs
``(U[l+d], ..., U[l+1])`` (1-based times, past stacked newest first). The
least-squares map between them estimates ``H_{0,d,d}``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DomainError
from .simulate import Trajectory

# V_T extreme-eigenvalue ratio above which the normal equations are avoided
_COND_LIMIT = 1e8


@dataclass(frozen=True, eq=False)
class RegressionBundle:
    Yplus: np.ndarray   # (p d, T)
    Uminus: np.ndarray  # (m d, T)
    V_T: np.ndarray     # (m d, m d)
    d: int

    @property
    def T(self) -> int:
        return self.Uminus.shape[1]


@dataclass(frozen=True, eq=False)
class HankelEstimate:
    H_hat: np.ndarray
    d: int
    T: int
    p: int
    m: int
    sigmas: np.ndarray
    vt_min_eig: float
    vt_max_eig: float
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "H_hat": self.H_hat.tolist(), "d": self.d, "T": self.T, "p": self.p, "m": self.m,
            "sigmas": self.sigmas.tolist(), "vt_min_eig": self.vt_min_eig,
            "vt_max_eig": self.vt_max_eig, "meta": self.meta,
        }


def _windows(X: np.ndarray, start: int, d: int, T: int, reverse: bool) -> np.ndarray:
    """Stack ``d`` consecutive rows of ``X`` per column; ``start`` is 0-based for column 0."""
    k = X.shape[1]
    out = np.empty((d * k, T))
    for i in range(d):
        src = start + (d - 1 - i if reverse else i)
        out[i * k:(i + 1) * k] = X[src:src + T].T
    return out


def build_regression(traj: Trajectory, d: int) -> RegressionBundle:
    if d < 1:
        raise DomainError(f"window d must be positive, got {d}")
    T = len(traj) - 2 * d
    if T < 1:
        raise DomainError(
            f"trajectory of length {len(traj)} is too short for d={d}; need at least {2 * d + 1}"
        )
    # 0-based: past window of column l is rows l..l+d-1 (newest first),
    # future window is rows l+d..l+2d-1
    Uminus = _windows(traj.U, 0, d, T, reverse=True)
    Yplus = _windows(traj.Y, d, d, T, reverse=False)
    return RegressionBundle(Yplus, Uminus, Uminus @ Uminus.T, d)


def covariance_extremes(V_T: np.ndarray) -> tuple[float, float]:
    w = np.linalg.eigvalsh(V_T)
    return float(w[0]), float(w[-1])


def estimate_hankel(traj: Trajectory, d: int, ridge: float = 0.0) -> HankelEstimate:
    """OLS estimate of ``H_{0,d,d}``: ``(sum Y+ U-^T)(V_T + ridge I)^-1``.

    Cholesky on the normal equations when ``V_T`` is well conditioned,
    otherwise a minimum-norm least-squares solve (flagged in ``meta``).
    """
    if ridge < 0:
        raise DomainError("ridge must be nonnegative")
    bundle = build_regression(traj, d)
    lo, hi = covariance_extremes(bundle.V_T)
    cross = bundle.Yplus @ bundle.Uminus.T
    meta: dict = {}
    G = bundle.V_T + ridge * np.eye(bundle.V_T.shape[0])
    glo = lo + ridge
    if glo > 0 and (hi + ridge) / glo < _COND_LIMIT:
        H = scipy.linalg.cho_solve(scipy.linalg.cho_factor(G), cross.T).T
        meta["solver"] = "cholesky"
    else:
        meta["solver"] = "lstsq"
        meta["rank_deficient"] = True
        if ridge > 0:
            H = np.linalg.lstsq(G, cross.T, rcond=None)[0].T
        else:
            H = np.linalg.lstsq(bundle.Uminus.T, bundle.Yplus.T, rcond=None)[0].T
    sigmas = np.linalg.svd(H, compute_uv=False)
    return HankelEstimate(H, d, bundle.T, traj.p, traj.m, sigmas, lo, hi, meta)


@dataclass(frozen=True)
class CovarianceReport:
    ok: bool
    low: float
    high: float


def covariance_condition(est: HankelEstimate) -> CovarianceReport:
    """Checks ``T/2 I <= V_T <= 3T/2 I``; ``low``/``high`` are eigenvalues over T."""
    low = est.vt_min_eig / est.T
    high = est.vt_max_eig / est.T
    return CovarianceReport(bool(low >= 0.5 and high <= 1.5), low, high)
