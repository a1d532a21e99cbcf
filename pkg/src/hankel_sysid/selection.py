"""Data-driven choice of the Hankel window ``d`` and of the learnable order ``k``.

The window rule compares OLS Hankel estimates of increasing size and keeps
the smallest one that is statistically indistinguishable from every larger
admissible one. The order rule keeps the singular values of the chosen
estimate that clear a noise threshold shrinking like ``T^-1/2`` (known gap)
or ``T^-1/4`` (unknown gap).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import ConfigError, DomainError
from .lti import BlockMatrix, delta_plus as _delta_plus, padded_diff_norm
from .ols import HankelEstimate, estimate_hankel
from .simulate import Trajectory


@dataclass(frozen=True)
class SelectionConfig:
    """Tuning constants for both selection rules.

    ``C_univ`` scales the window rule (candidate bound and acceptance
    threshold). ``C_tau`` scales the singular value threshold and defaults
    to ``delta_plus / kappa`` when the gap is known, else to 1.
    """

    delta: float = 0.05
    kappa: float = 20.0
    C_univ: float = 1.0
    beta: float = 1.0
    R: float = 1.0
    delta_plus: float | None = None
    p: int = 1
    m: int = 1
    C_tau: float | None = None
    d_cap: int | None = None

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ConfigError(f"delta must lie in (0, 1), got {self.delta}")
        if self.C_univ <= 0 or self.beta <= 0 or self.R <= 0:
            raise ConfigError("C_univ, beta and R must be positive")
        if self.delta_plus is not None and not 0 < self.delta_plus <= 1:
            raise ConfigError(f"delta_plus must lie in (0, 1], got {self.delta_plus}")
        if self.C_tau is not None and self.C_tau <= 0:
            raise ConfigError("C_tau must be positive")
        if self.p < 1 or self.m < 1:
            raise ConfigError("p and m must be positive")
        if self.kappa < 20:
            warnings.warn(f"kappa={self.kappa} < 20: the order guarantees assume kappa >= 20")
        if self.beta < 1 or self.R < 1:
            warnings.warn("beta and R are assumed to be at least 1")

    @property
    def tau_constant(self) -> float:
        if self.C_tau is not None:
            return self.C_tau
        if self.delta_plus is not None:
            return self.delta_plus / self.kappa
        return 1.0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SelectionTrace:
    candidate_ds: list[int] = field(default_factory=list)
    pairwise_gaps: dict[tuple[int, int], float] = field(default_factory=dict)
    thresholds: dict[tuple[int, int], float] = field(default_factory=dict)
    d0: int | None = None
    d_hat: int | None = None
    k: int | None = None
    k_thresholds: list[float] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "candidate_ds": self.candidate_ds,
            "pairwise_gaps": {f"{l},{h}": g for (l, h), g in self.pairwise_gaps.items()},
            "thresholds": {f"{l},{h}": t for (l, h), t in self.thresholds.items()},
            "d0": self.d0, "d_hat": self.d_hat, "k": self.k,
            "k_thresholds": self.k_thresholds, "flags": self.flags,
        }


def alpha(h: int, cfg: SelectionConfig, T: float) -> float:
    """``sqrt(h) * sqrt((h p + ln(T/delta)) / T)``."""
    if T < 1:
        raise DomainError(f"T must be at least 1, got {T}")
    return math.sqrt(h) * math.sqrt((h * cfg.p + math.log(T / cfg.delta)) / T)


def window_bound(cfg: SelectionConfig, T: float) -> float:
    """Largest real ``d`` for which the Hankel error bound holds at this ``T``."""
    by_rate = T / (4 * cfg.C_univ * cfg.m * math.log(T / cfg.delta))
    by_conc = math.sqrt(T / (4 * cfg.C_univ * math.log(2 / cfg.delta)))
    return min(by_rate, by_conc)


def candidate_set(cfg: SelectionConfig, T: float) -> list[int]:
    top = int(math.floor(window_bound(cfg, T)))
    if cfg.d_cap is not None:
        top = min(top, cfg.d_cap)
    if top < 1:
        raise DomainError(f"no admissible Hankel window at T={T}; collect more data")
    return list(range(1, top + 1))


def _as_block(est: HankelEstimate) -> BlockMatrix:
    return BlockMatrix(est.H_hat, est.p, est.m)


def choose_d(traj: Trajectory, cfg: SelectionConfig,
             cache: dict[int, HankelEstimate] | None = None,
             T: int | None = None) -> tuple[int, SelectionTrace]:
    """Smallest window whose estimate agrees with every larger admissible one.

    ``T`` in the formulas defaults to the trajectory length; callers that
    simulated ``T + 2 d_max`` samples pass the nominal ``T``. Returns the window
    ``max(d0, ceil(ln(T/delta)))`` capped by the admissible bound; estimates are
    memoised in ``cache`` so the caller can reuse the one at the chosen window.
    """
    n_obs = len(traj)
    T = n_obs if T is None else T
    cands = candidate_set(cfg, T)
    feasible = [d for d in cands if 2 * d + 1 <= n_obs and cfg.m * d <= n_obs - 2 * d]
    trace = SelectionTrace(candidate_ds=feasible)
    if not feasible:
        raise DomainError(f"trajectory of length {n_obs} is too short for any window")
    if len(feasible) < len(cands):
        trace.flags.append("candidates-truncated-by-length")
    cache = {} if cache is None else cache

    def est(d: int) -> HankelEstimate:
        if d not in cache:
            cache[d] = estimate_hankel(traj, d)
        return cache[d]

    scale = cfg.C_univ * cfg.beta * cfg.R
    d0 = None
    for l in feasible:
        ok = True
        a_l = alpha(l, cfg, T)
        for h in feasible:
            if h < l:
                continue
            gap = padded_diff_norm(_as_block(est(l)), _as_block(est(h)))
            thr = scale * (alpha(h, cfg, T) + 2 * a_l)
            trace.pairwise_gaps[(l, h)] = gap
            trace.thresholds[(l, h)] = thr
            if gap > thr:
                ok = False
                break
        if ok:
            d0 = l
            break
    if d0 is None:  # unreachable in exact arithmetic: the largest l only meets itself
        d0 = feasible[-1]
        trace.flags.append("no-consistent-l")
    log_floor = math.ceil(math.log(T / cfg.delta))
    d_hat = min(max(d0, log_floor), feasible[-1])
    if d_hat < log_floor:
        trace.flags.append("log-floor-clamped")
    trace.d0, trace.d_hat = d0, d_hat
    return d_hat, trace


def tau(gap: float, d_hat: int, cfg: SelectionConfig, T: float) -> float:
    """Singular value threshold ``kappa C R sqrt(d) / gap * sqrt((p d + ln(T/delta)) / T)``."""
    if not gap > 0:
        raise DomainError(f"gap must be positive, got {gap}")
    return (cfg.kappa * cfg.tau_constant * cfg.R * math.sqrt(d_hat) / gap
            * math.sqrt((cfg.p * d_hat + math.log(T / cfg.delta)) / T))


def k_threshold(sigma: float, l: int, d_hat: int, cfg: SelectionConfig, T: float) -> float:
    """Right-hand side that ``sigma_l / beta`` must reach for index ``l`` to be kept."""
    if cfg.delta_plus is not None:
        return 4 * tau(cfg.delta_plus, d_hat, cfg, T)
    if sigma <= 0:
        return math.inf
    return 4 * math.sqrt(tau(math.sqrt(cfg.beta / (sigma * l)), d_hat, cfg, T))


def choose_k(sigmas, d_hat: int, cfg: SelectionConfig, T: float,
             trace: SelectionTrace | None = None) -> tuple[int, SelectionTrace]:
    """Largest ``l`` (1-based) whose singular value clears its threshold; 0 if none."""
    trace = trace or SelectionTrace()
    sigmas = np.asarray(sigmas, dtype=float)
    k = 0
    trace.k_thresholds = []
    for l, s in enumerate(sigmas, start=1):
        thr = k_threshold(float(s), l, d_hat, cfg, T)
        trace.k_thresholds.append(thr)
        if s / cfg.beta >= thr:
            k = l
    trace.k = k
    return k, trace


def default_noise_floor(sigmas, d_hat: int, cfg: SelectionConfig, T: float) -> float:
    """Relative floor ``4 tau(1) beta / sigma_1`` below which values are unreliable."""
    s1 = float(np.max(sigmas)) if len(sigmas) else 0.0
    if s1 <= 0:
        return 1.0
    return 4 * tau(1.0, d_hat, cfg, T) * cfg.beta / s1


def estimate_delta_plus(sigmas, noise_floor: float = 0.0) -> float:
    """Normalized gap of the values above ``noise_floor * sigma_1``."""
    s = np.asarray(sigmas, dtype=float)
    if s.size == 0:
        raise DomainError("no singular values given")
    return _delta_plus(s, floor=noise_floor * s[0])
