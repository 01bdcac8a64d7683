"""Numba-compiled inner loop of the revised simplex.

One phase of primal simplex over standard-form columns held in CSC layout
(the constraint matrix is 1-2% dense, so pricing and FTRAN are nearly free;
the dense rank-1 update of the basis inverse dominates).  The basis inverse
is stored TRANSPOSED (binvt[k, i] = (B^-1)[i, k]) so that every heavy loop
walks contiguous rows.  The Python layer in lp.py owns phases, artificial
bookkeeping, refactorization and extraction; this kernel only iterates.

Status codes: 0 optimal, 1 unbounded, 2 iteration limit, 4 refactor needed.
"""

from __future__ import annotations

import numpy as np
from numba import njit

__all__ = ["phase_loop"]

_PIVOT_TOL = 1e-9
_DEGEN_TOL = 1e-11


@njit(cache=True)
def phase_loop(cptr, crow, cval, ncols, nstruct, c, basis, binvt, xb, y,
               elig, art_basic, any_arts, bland, max_iter, refactor_every,
               degen_switch):
    """Iterate one simplex phase in place; see module docstring.

    `y` must equal c[basis] @ B^-1 on entry; it is maintained incrementally
    and re-verified by an exact recompute plus rescan before optimality is
    declared.  Artificial columns (indices >= nstruct) never become
    eligible to enter, and basic artificials are pinned at zero by the
    ratio test.
    """
    m = binvt.shape[0]
    d = np.empty(m)
    rowi = np.empty(m)
    it = 0
    degen_streak = 0
    y_exact = True

    while it < max_iter:
        # Pricing: Dantzig (most negative reduced cost, lowest index on
        # ties) or Bland (first negative) over the sparse columns.
        j = -1
        rj = -_PIVOT_TOL
        for col in range(ncols):
            if not elig[col]:
                continue
            r = c[col]
            for p in range(cptr[col], cptr[col + 1]):
                r -= y[crow[p]] * cval[p]
            if r < rj:
                rj = r
                j = col
                if bland:
                    break
        if j < 0:
            if y_exact:
                return 0, -1, it, bland
            # Exact recompute y = c_B @ B^-1 (binvt rows are B^-1 columns).
            for k in range(m):
                rowi[k] = c[basis[k]]
            for i in range(m):
                s = 0.0
                for k in range(m):
                    s += binvt[i, k] * rowi[k]
                y[i] = s
            y_exact = True
            continue

        # FTRAN: d = B^-1 a_j, accumulated over the sparse column.
        for i in range(m):
            d[i] = 0.0
        for p in range(cptr[j], cptr[j + 1]):
            v = cval[p]
            r = crow[p]
            for i in range(m):
                d[i] += v * binvt[r, i]

        # Ratio test.  Basic artificials may not move, so any nonzero
        # pivot element in their row forces a zero-ratio leave.
        theta = np.inf
        have = False
        for i in range(m):
            di = d[i]
            if di > _PIVOT_TOL or (any_arts and art_basic[i]
                                   and di < -_PIVOT_TOL):
                have = True
                den = di if di > 0.0 else -di
                xi = xb[i]
                if xi < 0.0:
                    xi = 0.0
                ratio = xi / den
                if ratio < theta:
                    theta = ratio
        if not have:
            return 1, j, it, bland
        tie_tol = theta + 1e-12 * (1.0 + theta)
        ii = -1
        if bland:
            best_key = np.int64(2 ** 62)
            for i in range(m):
                di = d[i]
                if di > _PIVOT_TOL or (any_arts and art_basic[i]
                                       and di < -_PIVOT_TOL):
                    den = di if di > 0.0 else -di
                    xi = xb[i]
                    if xi < 0.0:
                        xi = 0.0
                    if xi / den <= tie_tol and basis[i] < best_key:
                        best_key = basis[i]
                        ii = i
        else:
            best_piv = 0.0
            for i in range(m):
                di = d[i]
                if di > _PIVOT_TOL or (any_arts and art_basic[i]
                                       and di < -_PIVOT_TOL):
                    den = di if di > 0.0 else -di
                    xi = xb[i]
                    if xi < 0.0:
                        xi = 0.0
                    if xi / den <= tie_tol and den > best_piv:
                        best_piv = den
                        ii = i
        piv = d[ii]

        # New row ii of B^-1 (a column of binvt), then the dual update
        # y' = y + r_j * row_ii, then the rank-1 update of binvt.
        for k in range(m):
            rowi[k] = binvt[k, ii] / piv
        for k in range(m):
            y[k] += rj * rowi[k]
        y_exact = False
        for k in range(m):
            rk = rowi[k]
            if rk != 0.0:
                for i in range(m):
                    binvt[k, i] -= rk * d[i]
                binvt[k, ii] = rk
        # The loop above also rewrote column ii: binvt[k, ii] ends as
        # rowi[k] exactly, as required for the new basis inverse.
        for i in range(m):
            xi = xb[i] - theta * d[i]
            xb[i] = xi if xi > 0.0 else 0.0
        xb[ii] = theta

        leaving = basis[ii]
        elig[leaving] = leaving < nstruct
        elig[j] = False
        basis[ii] = j
        if any_arts:
            art_basic[ii] = False
            any_arts = False
            for i in range(m):
                if art_basic[i]:
                    any_arts = True
                    break
        it += 1

        if theta <= _DEGEN_TOL:
            degen_streak += 1
            if degen_streak > degen_switch:
                bland = True
        else:
            degen_streak = 0
        if it >= refactor_every:
            return 4, -1, it, bland
    return 2, -1, it, bland
