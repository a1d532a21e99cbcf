"""Trajectory generation and the benchmark systems used throughout the tests."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .lti import StateSpaceModel

# stream ids for the per-trajectory random streams
INPUT_STREAM, PROCESS_STREAM, OUTPUT_STREAM = 0, 1, 2


@dataclass(frozen=True)
class NoiseSpec:
    eta_std: float = 1.0
    w_std: float = 1.0
    input_std: float = 1.0

    def __post_init__(self):
        for name in ("eta_std", "w_std", "input_std"):
            if not getattr(self, name) >= 0:
                raise DomainError(f"{name} must be nonnegative")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Inputs ``U`` (T_total, m) and outputs ``Y`` (T_total, p); row t is time t+1."""

    U: np.ndarray
    Y: np.ndarray
    seed: int | None = None
    noise_scale_eta: float = 0.0
    noise_scale_w: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        U = np.asarray(self.U, dtype=float)
        Y = np.asarray(self.Y, dtype=float)
        if U.ndim == 1:
            U = U[:, None]
        if Y.ndim == 1:
            Y = Y[:, None]
        if U.shape[0] != Y.shape[0]:
            raise DomainError(f"U has {U.shape[0]} rows but Y has {Y.shape[0]}")
        if not (np.all(np.isfinite(U)) and np.all(np.isfinite(Y))):
            raise DomainError("trajectory contains non-finite values")
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "Y", Y)

    def __len__(self) -> int:
        return self.U.shape[0]

    @property
    def m(self) -> int:
        return self.U.shape[1]

    @property
    def p(self) -> int:
        return self.Y.shape[1]

    def scaled(self, c: float) -> "Trajectory":
        return Trajectory(c * self.U, c * self.Y, self.seed, self.noise_scale_eta,
                          self.noise_scale_w, dict(self.meta))


def stream(seed: int, stream_id: int) -> np.random.Generator:
    """Counter-based Philox generator keyed by ``(seed, stream_id)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed & (2**64 - 1), stream_id])))


def simulate(model: StateSpaceModel, T_total: int, noise: NoiseSpec | None = None,
             seed: int = 0, inputs: np.ndarray | None = None) -> Trajectory:
    """Run the model from ``x_1 = 0`` for ``T_total`` steps.

    ``inputs`` overrides the i.i.d. Gaussian input draw (useful for impulse
    tests); process and output noise are still drawn from their own streams.
    """
    if T_total < 1:
        raise DomainError(f"T_total must be positive, got {T_total}")
    noise = noise or NoiseSpec()
    n, p, m = model.n, model.p, model.m
    if inputs is None:
        U = noise.input_std * stream(seed, INPUT_STREAM).standard_normal((T_total, m))
    else:
        U = np.asarray(inputs, dtype=float).reshape(T_total, m)
    eta = noise.eta_std * stream(seed, PROCESS_STREAM).standard_normal((T_total, n))
    w = noise.w_std * stream(seed, OUTPUT_STREAM).standard_normal((T_total, p))

    # x_{t+1} = A x_t + B u_t + eta_{t+1}; drive term precomputed in one product
    drive = U @ model.B.T
    drive[:-1] += eta[1:]
    rho = model.spectral_radius()
    if n <= _BLOCK_MAX_STATES and rho < 1.0:
        X = _propagate_blocked(model.A, drive)
    else:
        X = _propagate(model.A, drive)
    Y = X @ model.C.T + w

    meta = {"spectral_radius": rho}
    if not rho < 1.0:
        meta["unstable"] = True
    return Trajectory(U, Y, seed, noise.eta_std, noise.w_std, meta)


_BLOCK_MAX_STATES = 32
_BLOCK_LEN = 64


def _propagate(A: np.ndarray, drive: np.ndarray) -> np.ndarray:
    """States of ``x_1 = 0, x_{t+1} = A x_t + drive_t``, one step at a time."""
    X = np.empty_like(drive)
    x = np.zeros(drive.shape[1])
    At = A.T
    for t in range(len(drive)):
        X[t] = x
        x = x @ At + drive[t]
    return X


def _propagate_blocked(A: np.ndarray, drive: np.ndarray, L: int = _BLOCK_LEN) -> np.ndarray:
    """Same recursion, ``L`` steps per matrix product; only used for stable A."""
    T, n = drive.shape
    nb = -(-T // L)
    D = np.zeros((nb * L, n))
    D[:T] = drive
    D = D.reshape(nb, L, n)
    powers = np.empty((L + 1, n, n))
    powers[0] = np.eye(n)
    for j in range(1, L + 1):
        powers[j] = A @ powers[j - 1]
    # zero-start response inside each block: Z[b, j] = sum_{i<j} A^(j-1-i) D[b, i]
    G = np.zeros((L + 1, n, L, n))
    for j in range(1, L + 1):
        for i in range(j):
            G[j, :, i, :] = powers[j - 1 - i]
    Z = (D.reshape(nb, L * n) @ G.reshape((L + 1) * n, L * n).T).reshape(nb, L + 1, n)
    # carry the block-initial states forward
    S = np.empty((nb, n))
    s = np.zeros(n)
    AL = powers[L]
    for b in range(nb):
        S[b] = s
        s = AL @ s + Z[b, L]
    X = Z[:, :L].reshape(nb, L * n) + S @ powers[:L].reshape(L * n, n).T
    return X.reshape(nb * L, n)[:T]


def fixture_fir(order: int, rho: float = 0.9, weight_std: float = 5.0, seed: int = 0,
                weights: np.ndarray | None = None) -> StateSpaceModel:
    """Shift-register realization of ``sum_l w_l rho^l z^-l``, ``l = 1..order``.

    The constant term of the FIR transfer function is not representable
    without feedthrough and is dropped (recorded in ``meta``).
    """
    if order < 1:
        raise DomainError(f"order must be positive, got {order}")
    if weights is None:
        weights = weight_std * stream(seed, 0).standard_normal(order)
    weights = np.asarray(weights, dtype=float)
    g = weights * rho ** np.arange(1, order + 1)
    A = np.eye(order, k=-1)
    B = np.zeros((order, 1))
    B[0, 0] = 1.0
    return StateSpaceModel(g[None, :], A, B, meta={
        "fixture": "fir", "order": order, "rho": rho, "feedthrough_dropped": True,
    })


def fixture_example1(n: int, a: float) -> tuple[StateSpaceModel, StateSpaceModel]:
    """An ``n``-state cyclic system with ``-a`` feedback and its 2-state approximation."""
    if n <= 2:
        raise DomainError(f"n must exceed 2, got {n}")
    A1 = np.eye(n, k=1)
    A1[-1, 0] = -a
    B1 = np.zeros((n, 1))
    B1[-1, 0] = 1.0
    M1 = StateSpaceModel(B1.T, A1, B1, meta={"fixture": "example1", "n": n, "a": a})
    A2 = np.array([[0.0, 0.0], [1.0, 0.0]])
    B2 = np.array([[0.0], [1.0]])
    M2 = StateSpaceModel(B2.T, A2, B2, meta={"fixture": "example1-reduced"})
    return M1, M2


def fixture_lowerbound(zeta: float, beta: float = 1.0, R: float = 1.0) -> tuple[StateSpaceModel, StateSpaceModel]:
    """Two 3-state systems sharing ``(C, A)``: Hankel rank 1 versus rank 2."""
    if not abs(zeta) < 1:
        raise DomainError(f"|zeta| must be < 1, got {zeta}")
    A = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 0.0], [zeta, 0.0, 0.0]])
    b = np.sqrt(beta) / R
    C = np.array([[0.0, 0.0, np.sqrt(beta) * R]])
    M0 = StateSpaceModel(C, A, np.array([[0.0], [0.0], [b]]), meta={"fixture": "lowerbound", "rank": 1})
    M1 = StateSpaceModel(C, A, np.array([[0.0], [b], [b]]), meta={"fixture": "lowerbound", "rank": 2})
    return M0, M1


def random_stable_model(n: int, p: int = 1, m: int = 1, rho_max: float = 0.9,
                        seed: int = 0) -> StateSpaceModel:
    """Gaussian ``(C, A, B)`` with ``A`` rescaled to spectral radius drawn in ``[0.3, rho_max]``."""
    rng = stream(seed, 7)
    A = rng.standard_normal((n, n))
    rho = np.max(np.abs(np.linalg.eigvals(A)))
    A *= rng.uniform(0.3, rho_max) / rho
    return StateSpaceModel(rng.standard_normal((p, n)), A, rng.standard_normal((n, m)))
