"""Dense complex tensor primitives: contraction and truncated SVD.

Folded-index convention used throughout the package: a physical leg of the
temporal chain has dimension 4 and enumerates the forward/backward z-value
pair as (up,up), (up,down), (down,up), (down,down) -> 0..3, with up = +1.
"""
from __future__ import annotations

from typing import NamedTuple, Sequence, Tuple

import numpy as np
import scipy.linalg

# z eigenvalues of the forward and backward branch for folded index p = 0..3
FOLDED_SIGMA = np.array([+1.0, +1.0, -1.0, -1.0])
FOLDED_SIGMA_BAR = np.array([+1.0, -1.0, +1.0, -1.0])

# basis index (0 = up, 1 = down) of each branch, same ordering
FOLDED_FWD = np.array([0, 0, 1, 1])
FOLDED_BWD = np.array([0, 1, 0, 1])

# relative tolerance for treating neighbouring singular values as degenerate
_MULTIPLET_RTOL = 1e-12


class DimensionError(ValueError):
    """Raised when tensor extents do not line up."""


def contract(a: np.ndarray, b: np.ndarray, axes: Sequence[Tuple[int, int]]) -> np.ndarray:
    """Contract paired axes of two dense tensors.

    ``axes`` is a list of (axis_of_a, axis_of_b) pairs.  The result carries
    the uncontracted axes of ``a`` followed by those of ``b``, row-major.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    pairs = list(axes)
    if not pairs:
        return np.tensordot(a, b, axes=0)
    ax_a = [p[0] for p in pairs]
    ax_b = [p[1] for p in pairs]
    for i, j in zip(ax_a, ax_b):
        if a.shape[i] != b.shape[j]:
            raise DimensionError(
                f"paired axes disagree: a.shape[{i}]={a.shape[i]} vs b.shape[{j}]={b.shape[j]}")
    return np.tensordot(a, b, axes=(ax_a, ax_b))


class SvdFactors(NamedTuple):
    u: np.ndarray
    s: np.ndarray
    vh: np.ndarray
    discarded_weight: float


def _svd(m: np.ndarray):
    try:
        return np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError:
        # gesdd can fail to converge on nasty inputs; gesvd is slower but robust
        return scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd")


def svd_truncate(m: np.ndarray, chi_max: int, cutoff: float = 0.0) -> SvdFactors:
    """SVD of a matrix, truncated by bond cap and relative cutoff.

    Values with s_k < cutoff * s_0 are dropped.  A degenerate multiplet
    straddling the cutoff boundary is kept whole (the kept set is extended by
    at most the multiplet size) so results do not depend on backend ordering
    of equal values.  The hard ``chi_max`` cap is applied afterwards and is
    absolute.  ``discarded_weight`` is the plain sum of squared dropped
    values.
    """
    if chi_max < 1:
        raise ValueError("chi_max must be a positive integer")
    m = np.asarray(m)
    if m.ndim != 2:
        raise DimensionError(f"expected a matrix, got ndim={m.ndim}")
    u, s, vh = _svd(m)
    keep = len(s)
    if cutoff > 0.0 and keep > 0 and s[0] > 0.0:
        keep = int(np.sum(s >= cutoff * s[0]))
        keep = max(keep, 1)
        while 0 < keep < len(s) and s[keep] >= s[keep - 1] * (1.0 - _MULTIPLET_RTOL):
            keep += 1
    keep = min(keep, chi_max)
    w = float(np.sum(s[keep:] ** 2))
    return SvdFactors(np.ascontiguousarray(u[:, :keep]), s[:keep].copy(),
                      np.ascontiguousarray(vh[:keep]), w)
