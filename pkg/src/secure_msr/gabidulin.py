"""Gabidulin precoding: evaluate m_a(x) = sum_i a_{i+1} x^[i] at B-independent points.

x^[i] denotes x ** (|B| ** i).  With the points fixed, precoding is the F-linear
map a -> Moore . a, where Moore[j, i] = y_j^[i]; it is invertible exactly when
the points are linearly independent over B.
"""

from __future__ import annotations

import numpy as np

from .errors import LengthMismatch, SingularPoints, TooManyPoints, Underdetermined
from .field_tower import FieldTower, base_rank, ext_inverse, ext_matvec, solve_linear


def evaluation_points(M: int, tower: FieldTower) -> np.ndarray:
    """The points 1, z, ..., z^(M-1); shape (M, Q)."""
    if M > tower.Q:
        raise TooManyPoints(f"only {tower.Q} points of F are independent over B, asked for {M}")
    points = tower.zeros(M)
    points[np.arange(M), np.arange(M)] = 1
    # B-independence of the points is the B-rank of their coefficient vectors
    if base_rank(tower, points) != M:
        raise SingularPoints("evaluation points are dependent over B")
    return points


def moore_matrix(tower: FieldTower, points, M: int | None = None) -> np.ndarray:
    """Rows (y_j^[0], ..., y_j^[M-1]); shape (len(points), M, Q)."""
    points = np.asarray(points, dtype=np.uint8)
    if M is None:
        M = points.shape[0]
    out = np.empty((points.shape[0], M, tower.Q), dtype=np.uint8)
    cur = points
    for i in range(M):
        out[:, i] = cur
        cur = tower.frobenius(cur, 1)
    return out


def precode(tower: FieldTower, a, points, moore=None) -> np.ndarray:
    """Evaluations m_a(y_1), ..., m_a(y_M); ``a`` may carry leading batch axes."""
    a = np.asarray(a, dtype=np.uint8)
    points = np.asarray(points, dtype=np.uint8)
    if a.shape[-2] != points.shape[0]:
        raise LengthMismatch(f"{a.shape[-2]} coefficients for {points.shape[0]} points")
    if moore is None:
        moore = moore_matrix(tower, points)
    return ext_matvec(tower, moore, a)


def moore_inverse(tower: FieldTower, points) -> np.ndarray:
    try:
        return ext_inverse(tower, moore_matrix(tower, points))
    except Underdetermined as exc:
        raise SingularPoints(f"Moore matrix has rank {exc.rank}") from exc


def invert_precode(tower: FieldTower, evaluations, points, num_coeffs: int | None = None,
                   inverse=None) -> np.ndarray:
    """Recover the coefficients from evaluations.

    With ``num_coeffs`` set, the polynomial is known to have only its first
    ``num_coeffs`` coefficients nonzero and ``points`` may be just that many;
    the truncated Moore system is solved directly.
    """
    evaluations = np.asarray(evaluations, dtype=np.uint8)
    points = np.asarray(points, dtype=np.uint8)
    if evaluations.shape[-2] != points.shape[0]:
        raise LengthMismatch(f"{evaluations.shape[-2]} evaluations for {points.shape[0]} points")
    if num_coeffs is not None:
        mm = moore_matrix(tower, points, num_coeffs)
        try:
            return solve_linear(tower, mm, evaluations)
        except Underdetermined as exc:
            raise SingularPoints(f"truncated Moore matrix has rank {exc.rank}") from exc
    if inverse is None:
        inverse = moore_inverse(tower, points)
    return ext_matvec(tower, inverse, evaluations)
