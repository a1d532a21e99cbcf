"""State-space algebra for discrete-time LTI systems without feedthrough.

A model is the triple ``(C, A, B)`` of the recursion

    x[t+1] = A x[t] + B u[t] + eta[t+1]
    y[t]   = C x[t] + w[t]

Everything here is deterministic system theory: Markov parameters, block
Hankel/Toeplitz matrices, transfer functions, the H-infinity norm, gramians,
Hankel singular values and balanced truncation. These serve both as building
blocks for identification and as the ground truth an estimate is scored
against.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
import scipy.linalg

from .errors import DomainError, NumericalError, UnstableModelError

#: relative threshold below which a Hankel singular value counts as zero
MINIMALITY_RTOL = 1e-10

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True, eq=False)
class StateSpaceModel:
    """The triple ``(C, A, B)`` with shapes ``(p, n)``, ``(n, n)``, ``(n, m)``."""

    C: np.ndarray
    A: np.ndarray
    B: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DomainError(f"A must be square, got shape {A.shape}")
        n = A.shape[0]
        if C.ndim != 2 or C.shape[1] != n:
            raise DomainError(f"C must have {n} columns, got shape {C.shape}")
        if B.ndim != 2 or B.shape[0] != n:
            raise DomainError(f"B must have {n} rows, got shape {B.shape}")
        if n == 0 or C.shape[0] == 0 or B.shape[1] == 0:
            raise DomainError("model dimensions must be positive")
        for name, arr in (("C", C), ("A", A), ("B", B)):
            if not np.all(np.isfinite(arr)):
                raise DomainError(f"{name} contains non-finite entries")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.A))))

    @property
    def is_stable(self) -> bool:
        """Schur stability, ``rho(A) < 1``."""
        return self.spectral_radius() < 1.0

    def transform(self, S: np.ndarray) -> "StateSpaceModel":
        """Return ``(C S^-1, S A S^-1, S B)``; same transfer function."""
        S = np.asarray(S, dtype=float)
        Sinv = np.linalg.inv(S)
        return StateSpaceModel(self.C @ Sinv, S @ self.A @ Sinv, S @ self.B, dict(self.meta))

    def __sub__(self, other: "StateSpaceModel") -> "StateSpaceModel":
        """Parallel connection realizing ``G_self - G_other`` (orders may differ)."""
        if (self.p, self.m) != (other.p, other.m):
            raise DomainError(
                f"cannot subtract models with (p, m) = {(self.p, self.m)} and {(other.p, other.m)}"
            )
        return StateSpaceModel(
            np.hstack([self.C, -other.C]),
            scipy.linalg.block_diag(self.A, other.A),
            np.vstack([self.B, other.B]),
        )

    def to_dict(self) -> dict:
        return {"C": self.C.tolist(), "A": self.A.tolist(), "B": self.B.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "StateSpaceModel":
        missing = {"C", "A", "B"} - set(data)
        if missing:
            raise DomainError(f"model is missing keys: {sorted(missing)}")
        return cls(np.array(data["C"], dtype=float), np.array(data["A"], dtype=float),
                   np.array(data["B"], dtype=float))


@dataclass(frozen=True, eq=False)
class BlockMatrix:
    """A dense matrix viewed as a grid of ``block_height x block_width`` blocks."""

    data: np.ndarray
    block_height: int
    block_width: int

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        rows, cols = data.shape
        if rows % self.block_height or cols % self.block_width:
            raise DomainError(
                f"shape {data.shape} is not a grid of {self.block_height}x{self.block_width} blocks"
            )
        object.__setattr__(self, "data", data)

    @property
    def block_rows(self) -> int:
        return self.data.shape[0] // self.block_height

    @property
    def block_cols(self) -> int:
        return self.data.shape[1] // self.block_width

    def block(self, i: int, j: int) -> np.ndarray:
        h, w = self.block_height, self.block_width
        return self.data[i * h:(i + 1) * h, j * w:(j + 1) * w]


@dataclass(frozen=True, eq=False)
class GramianPair:
    P: np.ndarray  # controllability
    Q: np.ndarray  # observability


def _require_stable(model: StateSpaceModel, what: str) -> float:
    rho = model.spectral_radius()
    if not rho < 1.0:
        raise UnstableModelError(f"{what} requires a Schur stable model, rho(A) = {rho:.6g}")
    return rho


def markov_parameters(model: StateSpaceModel, count: int) -> np.ndarray:
    """Impulse response ``C A^k B`` for ``k = 0..count-1``, shape ``(count, p, m)``."""
    if count < 1:
        raise DomainError(f"count must be positive, got {count}")
    out = np.empty((count, model.p, model.m))
    AkB = np.array(model.B)
    for k in range(count):
        out[k] = model.C @ AkB
        AkB = model.A @ AkB
    return out


def _observability_kernel(model: StateSpaceModel, count: int) -> np.ndarray:
    out = np.empty((count, model.p, model.n))
    CAk = np.array(model.C)
    for k in range(count):
        out[k] = CAk
        CAk = CAk @ model.A
    return out


def observability_matrix(model: StateSpaceModel, rows: int) -> np.ndarray:
    """Stacked ``[C; CA; ...; CA^(rows-1)]``."""
    return _observability_kernel(model, rows).reshape(rows * model.p, model.n)


def controllability_matrix(model: StateSpaceModel, cols: int) -> np.ndarray:
    """Side-by-side ``[B, AB, ..., A^(cols-1) B]``."""
    blocks = [model.B]
    for _ in range(cols - 1):
        blocks.append(model.A @ blocks[-1])
    return np.hstack(blocks)


def hankel_from_markov(markov: np.ndarray, p_blocks: int, q_blocks: int, offset: int = 0) -> np.ndarray:
    """Block (i, j) is ``markov[offset + i + j]``."""
    _, p, m = markov.shape
    H = np.empty((p_blocks * p, q_blocks * m))
    for i in range(p_blocks):
        row = markov[offset + i:offset + i + q_blocks]  # (q, p, m)
        H[i * p:(i + 1) * p] = row.transpose(1, 0, 2).reshape(p, q_blocks * m)
    return H


def build_hankel(model: StateSpaceModel, k: int, p_blocks: int, q_blocks: int) -> BlockMatrix:
    """The ``(k, p_blocks, q_blocks)`` block Hankel matrix, block (i, j) = ``C A^(k+i+j) B``."""
    if k < 0 or p_blocks < 1 or q_blocks < 1:
        raise DomainError("need k >= 0 and positive block counts")
    markov = markov_parameters(model, k + p_blocks + q_blocks - 1)
    return BlockMatrix(hankel_from_markov(markov, p_blocks, q_blocks, offset=k), model.p, model.m)


def _lower_toeplitz(kernel: np.ndarray, d: int) -> np.ndarray:
    _, p, q = kernel.shape
    T = np.zeros((d * p, d * q))
    for i in range(1, d):
        for j in range(i):
            T[i * p:(i + 1) * p, j * q:(j + 1) * q] = kernel[i - j - 1]
    return T


def build_toeplitz(model: StateSpaceModel, k: int, d: int,
                   kernel: Literal["input", "noise"] = "input") -> BlockMatrix:
    """Strictly block-lower-triangular Toeplitz matrix with ``d x d`` blocks.

    Block (i, j) for ``i > j`` is ``C A^(k+i-j-1) B`` for the input kernel and
    ``C A^(k+i-j-1)`` for the process-noise kernel.
    """
    if d < 1 or k < 0:
        raise DomainError("need d >= 1 and k >= 0")
    count = k + max(d - 1, 1)
    if kernel == "input":
        ker = markov_parameters(model, count)
    elif kernel == "noise":
        ker = _observability_kernel(model, count)
    else:
        raise DomainError(f"unknown kernel {kernel!r}")
    ker = ker[k:]
    return BlockMatrix(_lower_toeplitz(ker, d), model.p, ker.shape[2])


def transfer_function(model: StateSpaceModel, z: complex) -> np.ndarray:
    """``G(z) = C (zI - A)^-1 B`` as a complex ``(p, m)`` matrix."""
    eigs = np.linalg.eigvals(model.A)
    if np.min(np.abs(eigs - z)) <= 1e-12 * max(1.0, abs(z)):
        raise DomainError(f"z = {z} is a pole of the model")
    X = np.linalg.solve(z * np.eye(model.n) - model.A, model.B.astype(complex))
    return model.C @ X


class _SchurResponse:
    """Evaluates ``G(e^{jw})`` through a complex Schur form of A."""

    def __init__(self, model: StateSpaceModel):
        T, Z = scipy.linalg.schur(model.A.astype(complex), output="complex")
        self.T = T
        self.CZ = model.C @ Z
        self.ZB = Z.conj().T @ model.B
        self.eye = np.eye(model.n)

    def __call__(self, omega: float) -> np.ndarray:
        z = np.exp(1j * omega)
        X = scipy.linalg.solve_triangular(z * self.eye - self.T, self.ZB, check_finite=False)
        return self.CZ @ X

    def smax(self, omega: float) -> float:
        return float(np.linalg.norm(self(omega), 2))

    def batch(self, omegas: np.ndarray) -> np.ndarray:
        """``G`` on many frequencies at once by back substitution; shape ``(F, p, m)``."""
        z = np.exp(1j * np.asarray(omegas, dtype=float))
        n = self.T.shape[0]
        X = np.empty((len(z), n, self.ZB.shape[1]), dtype=complex)
        for i in range(n - 1, -1, -1):
            rhs = self.ZB[i] + np.einsum("j,fjm->fm", self.T[i, i + 1:], X[:, i + 1:])
            X[:, i] = rhs / (z - self.T[i, i])[:, None]
        return self.CZ @ X


def frequency_response(model: StateSpaceModel, omegas: Sequence[float]) -> np.ndarray:
    """``G(e^{jw})`` for each ``w``; shape ``(len(omegas), p, m)``."""
    return _SchurResponse(model).batch(omegas)


def hinf_norm(model: StateSpaceModel, grid_points: int = 4096) -> float:
    """H-infinity norm by grid search on the unit circle plus golden-section refinement.

    The value is the largest ``sigma_max(G(e^{jw}))`` actually evaluated, so it
    is a lower bound on the true norm that tightens with ``grid_points``.
    """
    if grid_points < 64:
        raise DomainError(f"grid_points must be >= 64, got {grid_points}")
    _require_stable(model, "hinf_norm")
    resp = _SchurResponse(model)
    h = 2.0 * np.pi / grid_points
    omegas = h * np.arange(grid_points)
    vals = np.linalg.norm(resp.batch(omegas), 2, axis=(1, 2))
    best = float(vals.max())

    # refine around the strongest local maxima of the (periodic) grid
    is_peak = (vals >= np.roll(vals, 1)) & (vals >= np.roll(vals, -1))
    peaks = np.flatnonzero(is_peak)
    peaks = peaks[np.argsort(vals[peaks])[::-1][:5]]
    for i in peaks:
        lo, hi = omegas[i] - h, omegas[i] + h
        x1 = hi - _GOLDEN * (hi - lo)
        x2 = lo + _GOLDEN * (hi - lo)
        f1, f2 = resp.smax(x1), resp.smax(x2)
        while hi - lo > 1e-12:
            if f1 < f2:
                lo, x1, f1 = x1, x2, f2
                x2 = lo + _GOLDEN * (hi - lo)
                f2 = resp.smax(x2)
            else:
                hi, x2, f2 = x2, x1, f1
                x1 = hi - _GOLDEN * (hi - lo)
                f1 = resp.smax(x1)
            best = max(best, f1, f2)
    return best


def solve_discrete_lyapunov(A: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Solve ``X = A X A^T + Q`` by the doubling iteration.

    ``X_{k+1} = X_k + A_k X_k A_k^T`` with ``A_{k+1} = A_k^2`` sums the series
    ``sum_j A^j Q (A^j)^T`` in ``O(log)`` squarings.
    """
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    rho = float(np.max(np.abs(np.linalg.eigvals(A)))) if A.size else 0.0
    if not rho < 1.0:
        raise UnstableModelError(f"Lyapunov series diverges, rho(A) = {rho:.6g}")
    X = 0.5 * (Q + Q.T)
    Ak = A.copy()
    for _ in range(200):
        update = Ak @ X @ Ak.T
        X = X + update
        if np.linalg.norm(update) <= 1e-14 * max(1.0, np.linalg.norm(X)):
            break
        Ak = Ak @ Ak
    else:
        raise NumericalError("Lyapunov doubling iteration did not converge")
    return 0.5 * (X + X.T)


def gramians(model: StateSpaceModel) -> GramianPair:
    _require_stable(model, "gramians")
    P = solve_discrete_lyapunov(model.A, model.B @ model.B.T)
    Q = solve_discrete_lyapunov(model.A.T, model.C.T @ model.C)
    return GramianPair(P, Q)


def _psd_factor(M: np.ndarray) -> np.ndarray:
    """``L`` with ``L L^T = M`` for symmetric PSD ``M`` (negative rounding clipped)."""
    w, V = np.linalg.eigh(M)
    return V * np.sqrt(np.clip(w, 0.0, None))


def _balancing_svd(model: StateSpaceModel):
    g = gramians(model)
    Lp = _psd_factor(g.P)
    Lq = _psd_factor(g.Q)
    U, s, Vt = np.linalg.svd(Lq.T @ Lp)
    return Lp, Lq, U, s, Vt.T


def hankel_singular_values(model: StateSpaceModel) -> np.ndarray:
    """Square roots of the eigenvalues of ``P Q``, descending, length ``n``."""
    *_, s, _ = _balancing_svd(model)
    return s


def _square_root_projection(model: StateSpaceModel, r: int):
    Lp, Lq, U, s, V = _balancing_svd(model)
    scale = 1.0 / np.sqrt(s[:r])
    T = (Lp @ V[:, :r]) * scale
    Tinv = (U[:, :r].T @ Lq.T) * scale[:, None]
    return StateSpaceModel(model.C @ T, Tinv @ model.A @ T, Tinv @ model.B), s


def numerical_rank(sigmas: np.ndarray, rtol: float = MINIMALITY_RTOL) -> int:
    sigmas = np.asarray(sigmas)
    if sigmas.size == 0 or sigmas[0] <= 0:
        return 0
    return int(np.sum(sigmas > rtol * sigmas[0]))


def balanced_realization(model: StateSpaceModel) -> StateSpaceModel:
    """Similar model whose two gramians both equal ``diag(hankel_singular_values)``."""
    s = hankel_singular_values(model)
    rank = numerical_rank(s)
    if rank < model.n:
        raise DomainError(
            f"model is not minimal: numerical Hankel rank {rank} < state dimension {model.n}"
        )
    balanced, _ = _square_root_projection(model, model.n)
    return balanced


def balanced_truncate(model: StateSpaceModel, r: int) -> StateSpaceModel:
    """Order-``r`` balanced truncation.

    Requests beyond the numerical Hankel rank return the balanced minimal
    realization, so non-minimal inputs are accepted.
    """
    if r < 1:
        raise DomainError(f"truncation order must be positive, got {r}")
    s = hankel_singular_values(model)
    r_eff = min(r, numerical_rank(s))
    if r_eff == 0:
        raise DomainError("model has a zero Hankel matrix; nothing to truncate")
    reduced, _ = _square_root_projection(model, r_eff)
    return reduced


def padded_diff_norm(small: BlockMatrix, big: BlockMatrix) -> float:
    """Spectral norm of ``small`` zero-padded to ``big``'s shape, minus ``big``."""
    if (small.block_height, small.block_width) != (big.block_height, big.block_width):
        raise DomainError("block sizes differ")
    if small.data.shape[0] > big.data.shape[0] or small.data.shape[1] > big.data.shape[1]:
        raise DomainError(f"{small.data.shape} does not fit inside {big.data.shape}")
    diff = -np.array(big.data)
    diff[:small.data.shape[0], :small.data.shape[1]] += small.data
    return float(np.linalg.norm(diff, 2))


def delta_plus(sigmas: Sequence[float], floor: float = 0.0) -> float:
    """Smallest normalized gap ``1 - s[i+1]/s[i]`` over unequal neighbours.

    Values below ``floor`` are zeroed first and an implicit trailing zero is
    appended, so the last retained value always contributes a gap of 1.
    """
    s = np.asarray(sigmas, dtype=float)
    if s.size == 0:
        raise DomainError("delta_plus of an empty sequence")
    if np.any(np.diff(s) > 1e-12 * max(abs(s[0]), 1.0)):
        raise DomainError("singular values must be sorted descending")
    s = np.where(s < floor, 0.0, s)
    s = np.append(s, 0.0)
    best = 1.0
    for hi, lo in zip(s[:-1], s[1:]):
        if hi <= 0.0 or np.isclose(hi, lo, rtol=1e-12, atol=0.0):
            continue
        best = min(best, 1.0 - lo / hi)
    return float(best)


def tail_horizon(model: StateSpaceModel, tol: float = 1e-8) -> int:
    """Horizon ``D`` with ``M rho_bar^D / (1 - rho_bar) <= tol``.

    ``rho_bar`` sits halfway between ``rho(A)`` and 1 and ``M`` bounds the
    transient ``|C| |A^k| |B| / rho_bar^k`` over the first ``2n`` powers.
    """
    rho = _require_stable(model, "tail_horizon")
    rho_bar = 0.5 * (1.0 + rho)
    scale = np.linalg.norm(model.C, 2) * np.linalg.norm(model.B, 2)
    if scale == 0.0:
        return 1
    log_peak = 0.0
    Ak = np.eye(model.n)
    for k in range(1, 2 * model.n + 1):
        Ak = Ak @ model.A
        nrm = np.linalg.norm(Ak, 2)
        if nrm == 0.0:
            # nilpotent: the kernel vanishes exactly after k terms
            return max(k, 1)
        log_peak = max(log_peak, np.log(nrm) - k * np.log(rho_bar))
    log_M = np.log(scale) + log_peak
    D = (np.log(tol * (1.0 - rho_bar)) - log_M) / np.log(rho_bar)
    return max(int(np.ceil(D)), 1)


def _toeplitz_norm(kernel: np.ndarray, horizon: int) -> float:
    """Spectral norm of the ``horizon``-block strictly lower Toeplitz matrix of ``kernel``.

    Works on the Gram matrix ``T T^T`` of the thinner side. Its block (i, j) is
    ``sum_{t>=1} K_{i-t} K_{j-t}^T``, i.e. the outer products ``K_i K_j^T``
    accumulated along block diagonals, which a shift-doubling sum builds in
    ``log2(horizon)`` steps.
    """
    K = kernel[:horizon]
    if K.shape[1] > K.shape[2]:
        # |T| = |T^T| and T^T is a reversed Toeplitz with the transposed kernel
        K = K.transpose(0, 2, 1)
    L, p, q = K.shape
    Kmat = K.reshape(L * p, q)
    P = Kmat @ Kmat.T
    G = np.zeros_like(P)
    G[p:, p:] = P[:-p, :-p]
    shift = 1
    while shift < L:
        s = shift * p
        G[s:, s:] += G[:-s, :-s].copy()
        shift *= 2
    top = scipy.linalg.eigh(G, eigvals_only=True, subset_by_index=[G.shape[0] - 1] * 2)
    return float(np.sqrt(max(top[0], 0.0)))


def noise_to_signal(model: StateSpaceModel, horizon: int | None = None) -> tuple[float, float]:
    """``(beta, R)``: input Toeplitz norm and the noise/input Toeplitz norm ratio.

    With an explicit ``horizon`` these are the norms of the finite sections.
    Finite sections approach the operator norm from below as ``c/D^2``, so by
    default the sections at ``D = max(tail_horizon, 512)`` and ``2D`` are
    combined by Richardson extrapolation, which removes the leading term.
    """
    _require_stable(model, "noise_to_signal")
    if horizon is not None:
        beta = _toeplitz_norm(markov_parameters(model, horizon), horizon)
        noise = _toeplitz_norm(_observability_kernel(model, horizon), horizon)
    else:
        D = max(tail_horizon(model), 512)
        markov = markov_parameters(model, 2 * D)
        obs = _observability_kernel(model, 2 * D)
        beta = _richardson(_toeplitz_norm(markov, D), _toeplitz_norm(markov, 2 * D))
        noise = _richardson(_toeplitz_norm(obs, D), _toeplitz_norm(obs, 2 * D))
    if beta == 0.0:
        raise DomainError("input Toeplitz operator is zero; noise-to-signal ratio undefined")
    return beta, noise / beta


def _richardson(coarse: float, fine: float) -> float:
    # errors c/D^2 and c/(4 D^2); never report less than the larger section
    return max(fine, fine + (fine - coarse) / 3.0)
