"""Shared test oracles: brute-force LP enumeration, an independent MPS
reader, and a scipy bridge.  These deliberately avoid the package's own
solver machinery so they can serve as independent checks."""

import itertools
import math

import numpy as np
from scipy.optimize import linprog


def solve_instance_scipy(inst):
    """Reference solve of an LpInstance via scipy's HiGHS."""
    ineq = inst.senses == 0
    res = linprog(
        inst.objective,
        A_ub=inst.matrix[ineq], b_ub=inst.rhs[ineq],
        A_eq=inst.matrix[~ineq] if (~ineq).any() else None,
        b_eq=inst.rhs[~ineq] if (~ineq).any() else None,
        bounds=[(lo, None if not math.isfinite(hi) else hi)
                for lo, hi in inst.var_bounds],
        method="highs")
    return res


def enumerate_bfs_optimum(c, A_ub, b_ub, A_eq=None, b_eq=None, tol=1e-9):
    """Brute-force optimum over all basic feasible solutions.

    Standard form: for every choice of m columns of [A_ub | I] (plus the
    equality rows), solve the square system and keep the best feasible
    basic point.  Only viable for tiny instances.
    """
    A_ub = np.asarray(A_ub, dtype=float)
    b_ub = np.asarray(b_ub, dtype=float)
    m_ub, n = A_ub.shape
    if A_eq is None:
        A_eq = np.zeros((0, n))
        b_eq = np.zeros(0)
    A_eq = np.asarray(A_eq, dtype=float)
    b_eq = np.asarray(b_eq, dtype=float)
    m = m_ub + len(b_eq)
    A_std = np.zeros((m, n + m_ub))
    A_std[:m_ub, :n] = A_ub
    A_std[:m_ub, n:] = np.eye(m_ub)
    A_std[m_ub:, :n] = A_eq
    b = np.concatenate([b_ub, b_eq])
    c_std = np.concatenate([np.asarray(c, dtype=float), np.zeros(m_ub)])

    best = None
    best_x = None
    ncols = n + m_ub
    for cols in itertools.combinations(range(ncols), m):
        B = A_std[:, cols]
        try:
            xb = np.linalg.solve(B, b)
        except np.linalg.LinAlgError:
            continue
        if (xb < -tol).any():
            continue
        x = np.zeros(ncols)
        x[list(cols)] = xb
        val = float(c_std @ x)
        if best is None or val < best - 1e-12:
            best = val
            best_x = x[:n].copy()
    return best, best_x


def read_mps(path):
    """Minimal MPS reader for the writer's dialect (whitespace-delimited).

    Returns dict with c, offset, A (dense, rows in file order), senses
    (0 for L, 1 for E), rhs, lo, hi, row_names, col_names.
    """
    section = None
    row_order = []
    row_sense = {}
    col_order = []
    col_entries = {}
    rhs = {}
    offset = 0.0
    lo = {}
    hi = {}
    obj_row = None
    with open(path, encoding="ascii") as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("*"):
                continue
            if not line.startswith(" "):
                section = line.split()[0]
                continue
            parts = line.split()
            if section == "ROWS":
                tag, name = parts[0], parts[1]
                if tag == "N":
                    obj_row = name
                else:
                    row_order.append(name)
                    row_sense[name] = {"L": 0, "E": 1, "G": 2}[tag]
            elif section == "COLUMNS":
                col = parts[0]
                if col not in col_entries:
                    col_entries[col] = {}
                    col_order.append(col)
                for rname, val in zip(parts[1::2], parts[2::2]):
                    col_entries[col][rname] = float(val)
            elif section == "RHS":
                for rname, val in zip(parts[1::2], parts[2::2]):
                    if rname == obj_row:
                        offset = -float(val)
                    else:
                        rhs[rname] = float(val)
            elif section == "BOUNDS":
                tag, _, col = parts[0], parts[1], parts[2]
                if tag == "LO":
                    lo[col] = float(parts[3])
                elif tag == "UP":
                    hi[col] = float(parts[3])
                elif tag == "FR":
                    lo[col] = -math.inf
    n = len(col_order)
    m = len(row_order)
    A = np.zeros((m, n))
    c = np.zeros(n)
    row_idx = {name: i for i, name in enumerate(row_order)}
    for j, col in enumerate(col_order):
        for rname, val in col_entries[col].items():
            if rname == obj_row:
                c[j] = val
            else:
                A[row_idx[rname], j] = val
    return {
        "c": c,
        "offset": offset,
        "A": A,
        "senses": np.array([row_sense[r] for r in row_order], dtype=np.int8),
        "rhs": np.array([rhs.get(r, 0.0) for r in row_order]),
        "lo": np.array([lo.get(cn, 0.0) for cn in col_order]),
        "hi": np.array([hi.get(cn, math.inf) for cn in col_order]),
        "row_names": row_order,
        "col_names": col_order,
    }


def solve_mps_scipy(parsed):
    """Solve a read_mps() result with scipy (external reference path)."""
    L = parsed["senses"] == 0
    E = parsed["senses"] == 1
    res = linprog(
        parsed["c"],
        A_ub=parsed["A"][L] if L.any() else None,
        b_ub=parsed["rhs"][L] if L.any() else None,
        A_eq=parsed["A"][E] if E.any() else None,
        b_eq=parsed["rhs"][E] if E.any() else None,
        bounds=[(l, None if not math.isfinite(h) else h)
                for l, h in zip(parsed["lo"], parsed["hi"])],
        method="highs")
    if not res.success:
        return None
    return float(res.fun) + parsed["offset"]
