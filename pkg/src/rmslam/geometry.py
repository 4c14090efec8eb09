"""Ellipse and 2x2 SPD matrix algebra.

Extent matrices use the semi-axis convention ``X = R(o) diag(a**2, b**2) R(o)^T``
so that a uniform distribution over the solid ellipse has covariance ``X / 4``.
All helpers work on plain ``(2, 2)`` numpy arrays and use the closed-form
symmetric eigendecomposition, which is both faster and more accurate than a
general LAPACK call for this size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# eigenvalue gap below which the orientation is undefined
DEGENERATE_GAP = 1e-9
# eigenvalue floor for inverse square roots
EIG_FLOOR = 1e-9


def wrap_angle(a: float) -> float:
    """Wrap an angle to ``(-pi, pi]``."""
    w = math.remainder(a, 2.0 * math.pi)
    return math.pi if w == -math.pi else w


def _wrap_half(o: float) -> float:
    """Wrap an axis orientation to ``[-pi/2, pi/2)``."""
    w = (o + 0.5 * math.pi) % math.pi - 0.5 * math.pi
    # float modulo can land exactly on the excluded upper end
    return -0.5 * math.pi if w >= 0.5 * math.pi else w


def rotation(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class EllipseParams:
    """Semi-axis lengths (m) and orientation of the major axis (rad)."""

    semi_major: float
    semi_minor: float
    orientation: float

    def __post_init__(self) -> None:
        if not self.semi_major >= self.semi_minor > 0.0:
            raise ValueError(
                f"need semi_major >= semi_minor > 0, got {self.semi_major}, {self.semi_minor}"
            )
        object.__setattr__(self, "orientation", _wrap_half(float(self.orientation)))

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.semi_major, self.semi_minor, self.orientation)


def sym_eig(X: np.ndarray) -> tuple[float, float, float]:
    """Closed-form eigendecomposition of a symmetric 2x2 matrix.

    Returns ``(lam_major, lam_minor, angle)`` where ``angle`` is the direction of
    the eigenvector belonging to ``lam_major``. The angle is 0 when the
    eigenvalue gap is below :data:`DEGENERATE_GAP`.
    """
    a = float(X[0, 0])
    c = float(X[1, 1])
    b = 0.5 * (float(X[0, 1]) + float(X[1, 0]))
    half_diff = 0.5 * (a - c)
    mean = 0.5 * (a + c)
    rad = math.hypot(half_diff, b)
    lam1 = mean + rad
    det = a * c - b * b
    # the small root via det/lam1 avoids cancellation when it is tiny
    lam2 = det / lam1 if lam1 > 0.0 else mean - rad
    if 2.0 * rad < DEGENERATE_GAP:
        return lam1, lam2, 0.0
    return lam1, lam2, 0.5 * math.atan2(2.0 * b, a - c)


def _compose(l1: float, l2: float, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    # R diag(l1, l2) R^T written out; exactly symmetric
    xy = (l1 - l2) * c * s
    return np.array([[l1 * c * c + l2 * s * s, xy], [xy, l1 * s * s + l2 * c * c]])


def params_to_spd(e: EllipseParams) -> np.ndarray:
    """Extent matrix ``R(o) diag(a**2, b**2) R(o)^T`` of an ellipse."""
    return _compose(e.semi_major**2, e.semi_minor**2, e.orientation)


def spd_to_params(X: np.ndarray) -> EllipseParams:
    """Inverse of :func:`params_to_spd`."""
    l1, l2, angle = sym_eig(X)
    if l2 <= 0.0:
        raise ValueError(f"matrix is not positive definite (eigenvalues {l1}, {l2})")
    return EllipseParams(math.sqrt(l1), math.sqrt(l2), angle)


def spd_apply(X: np.ndarray, fn) -> np.ndarray:
    """Apply a scalar function to the eigenvalues of a symmetric 2x2 matrix."""
    l1, l2, angle = sym_eig(X)
    return _compose(fn(l1), fn(l2), angle)


def spd_sqrt(X: np.ndarray) -> np.ndarray:
    """Principal square root of an SPD 2x2 matrix."""
    l1, l2, angle = sym_eig(X)
    if l2 < 0.0:
        raise ValueError(f"matrix is not positive semi-definite (eigenvalues {l1}, {l2})")
    return _compose(math.sqrt(l1), math.sqrt(l2), angle)


def spd_inv_sqrt(X: np.ndarray, floor: float = EIG_FLOOR, shift: float = 0.0) -> np.ndarray:
    """Inverse principal square root of ``X + shift * I``.

    Eigenvalues are floored at ``floor`` after the shift.
    """
    l1, l2, angle = sym_eig(X)
    l1 = max(l1 + shift, floor)
    l2 = max(l2 + shift, floor)
    return _compose(1.0 / math.sqrt(l1), 1.0 / math.sqrt(l2), angle)


def symmetrize(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.T)


def is_spd(X: np.ndarray, tol: float = 0.0) -> bool:
    if not np.allclose(X, X.T, rtol=0.0, atol=1e-12 * max(1.0, float(np.abs(X).max()))):
        return False
    return bool(np.linalg.eigvalsh(symmetrize(X)).min() > tol)


def point_in_ellipse(p, center, X: np.ndarray, scale: float = 1.0) -> bool:
    """True iff ``(p - c)^T (scale X)^-1 (p - c) <= 1``."""
    d = np.asarray(p, dtype=float) - np.asarray(center, dtype=float)
    return bool(quad_form(d, X) <= scale)


def quad_form(d: np.ndarray, X: np.ndarray) -> np.ndarray:
    """``d^T X^-1 d`` for a single offset ``(2,)`` or a stack ``(n, 2)``."""
    a, b, c = X[0, 0], X[0, 1], X[1, 1]
    det = a * c - b * b
    dx = d[..., 0]
    dy = d[..., 1]
    return (c * dx * dx - 2.0 * b * dx * dy + a * dy * dy) / det


def gwd(c1, X1: np.ndarray, c2, X2: np.ndarray) -> float:
    """Gaussian Wasserstein (2-Wasserstein) distance between two ellipses.

    ``d**2 = |c1 - c2|**2 + tr(X1 + X2 - 2 (X1^1/2 X2 X1^1/2)^1/2)``

    For 2x2 matrices ``tr(C^1/2) = sqrt(tr C + 2 sqrt(det C))``, which lets the
    shape term be rewritten purely in differences of ``X1`` and ``X2``. That
    form is exactly symmetric and returns exactly zero for identical inputs,
    unlike the direct trace difference whose rounding residue survives the
    final square root.
    """
    dc = np.asarray(c1, dtype=float) - np.asarray(c2, dtype=float)
    t1 = X1[0, 0] + X1[1, 1]
    t2 = X2[0, 0] + X2[1, 1]
    d1 = max(X1[0, 0] * X1[1, 1] - X1[0, 1] * X1[1, 0], 0.0)
    d2 = max(X2[0, 0] * X2[1, 1] - X2[0, 1] * X2[1, 0], 0.0)
    # tr(X1 X2), grouped so that swapping the arguments gives identical bits
    cross = (X1[0, 0] * X2[0, 0] + X1[1, 1] * X2[1, 1]) + (X1[0, 1] * X2[1, 0] + X1[1, 0] * X2[0, 1])
    tr_sqrt_c = math.sqrt(max(cross + 2.0 * math.sqrt(d1 * d2), 0.0))
    D = X1 - X2
    tr_d2 = D[0, 0] ** 2 + D[0, 1] ** 2 + D[1, 0] ** 2 + D[1, 1] ** 2
    num = 2.0 * tr_d2 - (t1 - t2) ** 2 + 4.0 * (math.sqrt(d1) - math.sqrt(d2)) ** 2
    den = t1 + t2 + 2.0 * tr_sqrt_c
    shape = float(num / den) if den > 0.0 else 0.0
    # rounding residue only; the exact value is non-negative
    shape = max(shape, 0.0)
    return math.sqrt(float(dc @ dc) + shape)


def gwd_eig(c1, X1: np.ndarray, c2, X2: np.ndarray) -> float:
    """Direct evaluation of :func:`gwd` through matrix square roots."""
    dc = np.asarray(c1, dtype=float) - np.asarray(c2, dtype=float)
    r1 = spd_sqrt(X1)
    cross = spd_sqrt(symmetrize(r1 @ X2 @ r1))
    shape = float(np.trace(X1) + np.trace(X2) - 2.0 * np.trace(cross))
    if shape < -1e-12:
        raise ArithmeticError(f"negative shape term {shape}")
    return math.sqrt(float(dc @ dc) + max(shape, 0.0))
