"""Hover linearisation of the Bicopter and rank tests for the design flow."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .plant import (PHI, PHID, PSI, PSID, THETA, THETAD, X, XD, Y, YD, Z, ZD,
                    BicopterParams, hover_input)

RANK_RTOL = 1e-9


@dataclass(frozen=True)
class LinearModel:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    u_eq: np.ndarray

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]


def build_linear_model(params: BicopterParams, b_sign_corrected: bool = True) -> LinearModel:
    """Small-angle model about hover (u1 = m g).

    The printed input matrix has +1/m in the vertical-velocity row while the
    linearised vertical dynamics read zdd = g - u1/m. ``b_sign_corrected``
    (default) uses -1/m so the design model agrees with the plant.
    """
    g, m = params.gravity, params.mass
    J = params.inertia
    A = np.zeros((12, 12))
    for i in (X, Y, Z, PHI, THETA, PSI):
        A[i, i + 1] = 1.0
    A[XD, THETA] = -g
    A[YD, PHI] = g

    B = np.zeros((12, 4))
    B[ZD, 0] = -1.0 / m if b_sign_corrected else 1.0 / m
    B[PHID, 1] = params.arm / J.ixx
    B[THETAD, 2] = params.rotor_offset / J.iyy
    B[PSID, 3] = params.arm / J.izz
    return LinearModel(A=A, B=B, C=np.eye(12), D=np.zeros((12, 4)), u_eq=hover_input(params))


def matrix_rank(M: np.ndarray, rtol: float = RANK_RTOL) -> int:
    """Numerical rank from the SVD, relative to the largest singular value."""
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def controllability_matrix(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    blocks = [B]
    for _ in range(n - 1):
        blocks.append(A @ blocks[-1])
    return np.hstack(blocks)


def observability_matrix(A: np.ndarray, C: np.ndarray) -> np.ndarray:
    return controllability_matrix(A.T, C.T).T


def controllability_rank(model: LinearModel, rtol: float = RANK_RTOL) -> int:
    return matrix_rank(controllability_matrix(model.A, model.B), rtol)


def observability_rank(model: LinearModel, rtol: float = RANK_RTOL) -> int:
    return matrix_rank(observability_matrix(model.A, model.C), rtol)


def save_matrix(path, M: np.ndarray) -> None:
    """Row-major, whitespace separated, full precision."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    np.savetxt(path, M, fmt="%.17g")


def load_matrix(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, dtype=float))


def dump_model(model: LinearModel, directory) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name in ("A", "B", "C", "D"):
        p = directory / f"{name}.txt"
        save_matrix(p, getattr(model, name))
        paths.append(p)
    return paths
