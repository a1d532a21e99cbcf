"""Ho-Kalman style realization of an estimated Hankel matrix, and model comparison."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, UnstableModelError
from .lti import (
    StateSpaceModel, controllability_matrix, gramians, hinf_norm, markov_parameters,
    hankel_from_markov, observability_matrix, tail_horizon,
)
from .ols import HankelEstimate


@dataclass(frozen=True, eq=False)
class RealizedModel:
    model: StateSpaceModel
    sigmas_used: np.ndarray
    k: int
    source_d: int
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = self.model.to_dict()
        out["sigmas_used"] = self.sigmas_used.tolist()
        out["k"] = self.k
        out["source_d"] = self.source_d
        return out


@dataclass(frozen=True)
class ModelDistance:
    hankel_err: float
    hinf_err: float
    impulse_err: float


def realize_hankel(H: np.ndarray, p: int, m: int, k: int) -> tuple[StateSpaceModel, np.ndarray]:
    """Order-``k`` realization ``(C, A, B)`` of a ``(p d) x (m d)`` Hankel matrix.

    ``O = U_k S_k^(1/2)`` and ``R = S_k^(1/2) V_k^T`` are the observability and
    controllability factors. The shift for ``A`` pairs ``O`` with ``O`` moved up
    one block row, the vacated last block row being zero.
    """
    rows, cols = H.shape
    budget = min(rows, cols)
    if not 1 <= k <= budget:
        raise DomainError(f"order k={k} outside the rank budget 1..{budget}")
    U, s, Vt = np.linalg.svd(H, full_matrices=False)
    if s[k - 1] <= 1e-12 * s[0]:
        raise DomainError(f"sigma_{k} = {s[k - 1]:.3g} is numerically zero")
    U, s, Vt = U[:, :k], s[:k], Vt[:k]
    # fix the sign of each singular pair: largest |entry| of u_i is positive
    flip = np.sign(U[np.argmax(np.abs(U), axis=0), np.arange(k)])
    flip[flip == 0] = 1.0
    U = U * flip
    Vt = Vt * flip[:, None]

    root = np.sqrt(s)
    O = U * root
    R = root[:, None] * Vt
    Z0 = O
    Z1 = np.vstack([O[p:], np.zeros((p, k))])
    A = np.linalg.solve(Z0.T @ Z0, Z0.T @ Z1)
    return StateSpaceModel(O[:p], A, R[:, :m]), s


def hankel2sys(est: HankelEstimate, k: int) -> RealizedModel:
    model, s = realize_hankel(est.H_hat, est.p, est.m, k)
    return RealizedModel(model, s, k, est.d, {"spectral_radius": model.spectral_radius()})


def _default_horizon(*models: StateSpaceModel, cap: int = 1000) -> int:
    horizons = []
    for M in models:
        try:
            horizons.append(tail_horizon(M))
        except UnstableModelError:
            horizons.append(cap)
    return int(min(max(horizons + [2 * max(M.n for M in models)]), cap))


def compare_models(a: StateSpaceModel, b: StateSpaceModel, horizon: int | None = None,
                   grid: int = 4096) -> ModelDistance:
    """Distances between two models of possibly different order.

    ``hinf_err`` is infinite when the difference system is unstable.
    """
    if (a.p, a.m) != (b.p, b.m):
        raise DomainError(f"(p, m) mismatch: {(a.p, a.m)} vs {(b.p, b.m)}")
    horizon = horizon or _default_horizon(a, b)
    diff = a - b
    markov = markov_parameters(diff, 2 * horizon - 1)
    impulse = max(float(np.linalg.norm(M, 2)) for M in markov[:horizon])
    hankel = float(np.linalg.norm(hankel_from_markov(markov, horizon, horizon), 2))
    try:
        hinf = hinf_norm(diff, grid)
    except UnstableModelError:
        hinf = float("inf")
    return ModelDistance(hankel, hinf, impulse)


def _sigma_groups(sigmas: np.ndarray, rtol: float = 1e-6) -> list[list[int]]:
    groups: list[list[int]] = []
    for i, s in enumerate(sigmas):
        if groups and abs(sigmas[groups[-1][0]] - s) <= rtol * max(abs(s), 1e-300):
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def aligned_param_error(truth: StateSpaceModel | RealizedModel, est: StateSpaceModel | RealizedModel,
                        sigmas: np.ndarray | None = None, grouped: bool = True) -> float:
    """``|C - C^Q| + |A - Q^T A^ Q| + |B - Q^T B^|`` after orthogonal alignment.

    Both models are expected in balanced coordinates, where the only remaining
    freedom is an orthogonal ``Q`` acting within groups of equal Hankel singular
    values. ``Q`` is the blockwise Procrustes solution on the stacked
    observability / controllability factors. ``grouped=False`` aligns over the
    full orthogonal group instead.
    """
    if isinstance(truth, RealizedModel):
        sigmas = truth.sigmas_used if sigmas is None else sigmas
        truth = truth.model
    if isinstance(est, RealizedModel):
        est = est.model
    if truth.n != est.n:
        raise DomainError(f"order mismatch: {truth.n} vs {est.n}")
    if (truth.p, truth.m) != (est.p, est.m):
        raise DomainError("(p, m) mismatch")
    k = truth.n
    if not grouped:
        groups = [list(range(k))]
    else:
        if sigmas is None:
            g = gramians(truth)
            sigmas = np.sqrt(np.abs(np.diag(g.P) * np.diag(g.Q)))
        groups = _sigma_groups(np.asarray(sigmas))
    L = max(2 * k, 10)

    def factor(M: StateSpaceModel) -> np.ndarray:
        return np.vstack([observability_matrix(M, L), controllability_matrix(M, L).T])

    F, Fh = factor(truth), factor(est)
    Q = np.zeros((k, k))
    for g in groups:
        W, _, Zt = np.linalg.svd(Fh[:, g].T @ F[:, g])
        Q[np.ix_(g, g)] = W @ Zt
    return float(
        np.linalg.norm(truth.C - est.C @ Q, 2)
        + np.linalg.norm(truth.A - Q.T @ est.A @ Q, 2)
        + np.linalg.norm(truth.B - Q.T @ est.B, 2)
    )
