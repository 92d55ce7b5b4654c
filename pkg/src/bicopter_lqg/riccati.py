"""Dense Lyapunov and continuous algebraic Riccati solvers.

CARE solutions come from Newton-Kleinman iteration: starting from a
stabilising gain, each step solves one Lyapunov equation for the cost of the
current closed loop and updates the gain from it. Lyapunov equations are
solved through their Kronecker-product linear system, which is cheap at the
sizes used here (n <= 24).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla


class RiccatiError(RuntimeError):
    pass


class NotHurwitz(RiccatiError):
    pass


class NotStabilizable(RiccatiError):
    pass


class NotDetectable(RiccatiError):
    pass


class NoConvergence(RiccatiError):
    def __init__(self, max_iterations: int, final_residual: float):
        self.max_iterations = max_iterations
        self.final_residual = final_residual
        super().__init__(f"no convergence after {max_iterations} iterations (residual {final_residual:.3e})")


class InvalidWeights(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 100
    care_rtol: float = 1e-8  # residual <= care_rtol * max(1, ||Q||_F)
    lyap_rtol: float = 1e-10
    hurwitz_margin: float = 1e-12
    rank_rtol: float = 1e-9
    psd_rtol: float = 1e-10


DEFAULT_CONFIG = SolverConfig()


@dataclass(frozen=True)
class CareProblem:
    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        for name in ("A", "B", "Q", "R"):
            object.__setattr__(self, name, np.atleast_2d(np.asarray(getattr(self, name), dtype=float)))
        n, m = self.B.shape
        if self.A.shape != (n, n) or self.Q.shape != (n, n) or self.R.shape != (m, m):
            raise ValueError(f"inconsistent shapes A{self.A.shape} B{self.B.shape} Q{self.Q.shape} R{self.R.shape}")


@dataclass(frozen=True)
class CareSolution:
    P: np.ndarray
    gain: np.ndarray
    residual_norm: float
    iterations: int


def spectral_abscissa(A: np.ndarray) -> float:
    return float(np.max(np.linalg.eigvals(A).real))


def check_weights(Q, R, config: SolverConfig = DEFAULT_CONFIG, names=("Q", "R")) -> None:
    qn, rn = names
    scale = max(1.0, np.linalg.norm(Q))
    if not np.allclose(Q, Q.T, rtol=0, atol=config.psd_rtol * scale):
        raise InvalidWeights(f"{qn} is not symmetric")
    if np.linalg.eigvalsh(0.5 * (Q + Q.T)).min() < -config.psd_rtol * scale:
        raise InvalidWeights(f"{qn} is not positive semidefinite")
    if not np.allclose(R, R.T, rtol=0, atol=config.psd_rtol * max(1.0, np.linalg.norm(R))):
        raise InvalidWeights(f"{rn} is not symmetric")
    if np.linalg.eigvalsh(0.5 * (R + R.T)).min() <= 0:
        raise InvalidWeights(f"{rn} is not positive definite")


def solve_lyapunov(A: np.ndarray, Q: np.ndarray, config: SolverConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Solve A^T P + P A + Q = 0 for Hurwitz ``A``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    n = A.shape[0]
    if spectral_abscissa(A) >= -config.hurwitz_margin:
        raise NotHurwitz(f"spectral abscissa {spectral_abscissa(A):.3e} is not negative")
    eye = np.eye(n)
    # column-major vec: vec(A^T P) = (I kron A^T) vec P, vec(P A) = (A^T kron I) vec P
    lu = sla.lu_factor(np.kron(eye, A.T) + np.kron(A.T, eye))
    rhs = -Q.reshape(-1, order="F")
    p = sla.lu_solve(lu, rhs)
    # one step of iterative refinement
    P = p.reshape(n, n, order="F")
    resid = A.T @ P + P @ A + Q
    p -= sla.lu_solve(lu, resid.reshape(-1, order="F"))
    P = p.reshape(n, n, order="F")
    return 0.5 * (P + P.T)


def lyapunov_residual(A, P, Q) -> float:
    return float(np.linalg.norm(A.T @ P + P @ A + Q))


def care_residual(A, B, Q, R, P) -> float:
    PB = P @ B
    return float(np.linalg.norm(A.T @ P + P @ A + Q - PB @ np.linalg.solve(R, PB.T)))


def filter_care_residual(A, W, C, V, P) -> float:
    PC = P @ C.T
    return float(np.linalg.norm(A @ P + P @ A.T + W - PC @ np.linalg.solve(V, PC.T)))


def controllable_basis(A: np.ndarray, B: np.ndarray, rtol: float = 1e-9) -> np.ndarray:
    """Orthonormal basis of the controllable subspace (block Krylov with reorthogonalisation)."""
    n = A.shape[0]
    scale_a = max(np.linalg.norm(A, 2), np.finfo(float).tiny)
    U, s, _ = np.linalg.svd(B, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((n, 0))
    basis = U[:, s > rtol * s[0]]
    newest = basis
    while basis.shape[1] < n:
        W = A @ newest
        for _ in range(2):
            W = W - basis @ (basis.T @ W)
        U, s, _ = np.linalg.svd(W, full_matrices=False)
        keep = s > rtol * scale_a
        if not keep.any():
            break
        newest = U[:, keep]
        basis = np.hstack([basis, newest])
    return basis


def stabilizing_gain(A: np.ndarray, B: np.ndarray, config: SolverConfig = DEFAULT_CONFIG) -> np.ndarray:
    """A gain K with A - B K Hurwitz.

    On the controllable part the closed-loop spectrum is shifted onto
    Re(s) = -beta (Bass's construction); the uncontrollable part must
    already be stable.
    """
    # K = 0 is not used even when A is already Hurwitz: a lightly damped A
    # makes the first Newton step wildly ill-conditioned
    n, m = B.shape
    V = controllable_basis(A, B, config.rank_rtol)
    r = V.shape[1]
    if r < n:
        # complete to an orthonormal basis and test the uncontrollable block
        full, _ = np.linalg.qr(np.hstack([V, np.eye(n)]))
        T = np.hstack([V, full[:, r:n]])
        Au = (T.T @ A @ T)[r:, r:]
        if spectral_abscissa(Au) >= -config.hurwitz_margin:
            raise NotStabilizable("an unstable mode is not controllable")
        if r == 0:
            return np.zeros((m, n))
    Ac = V.T @ A @ V
    Bc = V.T @ B
    beta = np.linalg.norm(Ac, 2) + 1.0
    shifted = Ac + beta * np.eye(r)
    Z = solve_lyapunov(-shifted.T, 2.0 * Bc @ Bc.T, config)
    Kc = np.linalg.solve(Z, Bc).T
    K = Kc @ V.T
    if spectral_abscissa(A - B @ K) >= -config.hurwitz_margin:
        # the construction is exact; this only happens when Z is numerically singular
        raise NotStabilizable("controllable subspace too ill-conditioned for an initial gain")
    return K


def _newton_kleinman(A, B, Q, R, K, config: SolverConfig):
    tol = config.care_rtol * max(1.0, np.linalg.norm(Q))
    best = None
    prev = np.inf
    for it in range(1, config.max_iterations + 1):
        try:
            P = solve_lyapunov(A - B @ K, Q + K.T @ R @ K, config)
        except NotHurwitz:
            # rounding lost the stabilising property; fall back on the best iterate
            if best is None:
                raise
            break
        K = np.linalg.solve(R, B.T @ P)
        res = care_residual(A, B, Q, R, P)
        if best is None or res < best[1]:
            best = (P, res, it, K)
        # stop once within tolerance and the quadratic phase has flattened out
        if res <= tol and (res == 0.0 or prev < 10.0 * res):
            break
        prev = res
    P, res, it, K = best
    if res > tol:
        raise NoConvergence(it, res)
    return P, K, res, it


def solve_care(problem: CareProblem, config: SolverConfig = DEFAULT_CONFIG) -> CareSolution:
    """Stabilising solution of A^T P + P A + Q - P B R^-1 B^T P = 0."""
    A, B, Q, R = problem.A, problem.B, problem.Q, problem.R
    check_weights(Q, R, config)
    K0 = stabilizing_gain(A, B, config)
    P, K, res, it = _newton_kleinman(A, B, Q, R, K0, config)
    if spectral_abscissa(A - B @ K) >= -config.hurwitz_margin:
        raise NoConvergence(it, res)
    return CareSolution(P=P, gain=K, residual_norm=res, iterations=it)


def lqr_gain(problem: CareProblem, config: SolverConfig = DEFAULT_CONFIG) -> np.ndarray:
    return solve_care(problem, config).gain


def solve_filter_care(A, W, C, V, config: SolverConfig = DEFAULT_CONFIG) -> CareSolution:
    """Stabilising solution of A P + P A^T - P C^T V^-1 C P + W = 0; gain is L = P C^T V^-1."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    W = np.atleast_2d(np.asarray(W, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    V = np.atleast_2d(np.asarray(V, dtype=float))
    check_weights(W, V, config, names=("W", "V"))
    try:
        L = stabilizing_gain(A.T, C.T, config).T
    except NotStabilizable as exc:
        raise NotDetectable("an unstable mode is not observable") from exc

    tol = config.care_rtol * max(1.0, np.linalg.norm(W))
    best = None
    prev = np.inf
    for it in range(1, config.max_iterations + 1):
        Acl = A - L @ C
        # Acl P + P Acl^T + W + L V L^T = 0
        try:
            P = solve_lyapunov(Acl.T, W + L @ V @ L.T, config)
        except NotHurwitz:
            if best is None:
                raise
            break
        L = np.linalg.solve(V, C @ P).T
        res = filter_care_residual(A, W, C, V, P)
        if best is None or res < best[1]:
            best = (P, res, it, L)
        if res <= tol and (res == 0.0 or prev < 10.0 * res):
            break
        prev = res
    P, res, it, L = best
    if res > tol:
        raise NoConvergence(it, res)
    if spectral_abscissa(A - L @ C) >= -config.hurwitz_margin:
        raise NoConvergence(it, res)
    return CareSolution(P=P, gain=L, residual_norm=res, iterations=it)


def kalman_gain(A, W, C, V, config: SolverConfig = DEFAULT_CONFIG) -> np.ndarray:
    return solve_filter_care(A, W, C, V, config).gain
