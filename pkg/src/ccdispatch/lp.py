"""Horizon LP assembly, an embedded simplex solver, and MPS export.

The planning problem over H hourly steps has 14 flow variables per step plus
one level variable per storage per step (levels are kept explicit so the rows
stay in one-to-one correspondence with the model constraints).  Level
variables hold the start-of-step levels; the lead-0 levels are pinned to the
current storage state by equality rows, and the per-step capacity rows bound
the end-of-step level through the balance expression.

The solver is a dense revised simplex with an explicit basis inverse,
Dantzig pricing with a switch to Bland's rule under degeneracy, and a
phase-1 built from per-row artificial columns.  It supports warm starts
from a previous basis, which the rolling simulator exploits: consecutive
hourly instances share the constraint matrix and differ only in the
right-hand side and objective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .forecast import ForecastBundle
from .model import FLOW_FIELDS, FlowDecision, StorageState, SystemParams
from .policy import LeadSchedule, tighten_bound

__all__ = [
    "LpInstance",
    "LpRow",
    "LpSolution",
    "LpTemplate",
    "RollingSolver",
    "build",
    "export_mps",
    "solve",
]

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-7
_REFACTOR_EVERY = 300
_BLAND_DEGEN_STREAK = 25

N_FLOWS = len(FLOW_FIELDS)  # 14

# Column offsets of the flow fields within one step block.
_F = {name: i for i, name in enumerate(FLOW_FIELDS)}


@dataclass(frozen=True)
class LpRow:
    coeffs: dict[int, float]
    sense: str  # "<=" or "=="
    rhs: float
    label: str


@dataclass
class LpInstance:
    """One linear program: min c.x + offset s.t. rows, x within bounds."""

    num_vars: int
    objective: np.ndarray
    offset: float
    matrix: np.ndarray  # (m, num_vars), shared with the template; do not mutate
    senses: np.ndarray  # int8, 0 = "<=", 1 = "=="
    rhs: np.ndarray
    labels: tuple[str, ...]
    var_names: tuple[str, ...]
    var_lo: np.ndarray
    var_hi: np.ndarray  # +inf where unbounded
    start_basis: np.ndarray | None = None  # per-row: var index, or -1 for slack
    flow_layout: bool = False  # first 14 columns are the first-step flows
    template_token: object = None

    @property
    def num_rows(self) -> int:
        return len(self.rhs)

    @property
    def rows(self) -> list[LpRow]:
        out = []
        for i in range(self.num_rows):
            nz = np.nonzero(self.matrix[i])[0]
            coeffs = {int(j): float(self.matrix[i, j]) for j in nz}
            sense = "<=" if self.senses[i] == 0 else "=="
            out.append(LpRow(coeffs=coeffs, sense=sense, rhs=float(self.rhs[i]),
                             label=self.labels[i]))
        return out

    @property
    def var_bounds(self) -> list[tuple[float, float]]:
        return [(float(lo), float(hi)) for lo, hi in zip(self.var_lo, self.var_hi)]

    def validate(self) -> None:
        if self.num_vars <= 0 or self.num_rows == 0:
            raise ValueError("instance must have at least one variable and one row")
        if not np.isfinite(self.objective).all():
            raise ValueError("objective has non-finite coefficients")
        if not np.isfinite(self.rhs).all():
            raise ValueError("constraint data has non-finite entries")
        if self.template_token is None and not np.isfinite(self.matrix).all():
            # Template matrices are validated once at template construction.
            raise ValueError("constraint data has non-finite entries")


class LpTemplate:
    """Constant structure of the horizon LP for one parameter set.

    The constraint matrix depends only on the system parameters, so a
    template is built once and each rolling step just fills in the
    right-hand side and the price-dependent objective entries.
    """

    def __init__(self, params: SystemParams, horizon: int):
        if horizon < 1:
            raise ValueError("horizon must be >= 1")
        params.validate()
        self.params = params
        self.horizon = horizon
        H = horizon
        self.n = 16 * H
        self.m = 15 * H
        self._re0 = 14 * H  # column of the first electric level variable
        self._rh0 = 15 * H

        p = params
        A = np.zeros((self.m, self.n))
        senses = np.zeros(self.m, dtype=np.int8)
        labels: list[str] = [""] * self.m
        rhs_const = np.zeros(self.m)
        start_basis = np.full(self.m, -1, dtype=np.int64)

        for t in range(H):
            base = 14 * t
            re_t = self._re0 + t
            rh_t = self._rh0 + t
            r = 13 * t

            A[r, base + _F["e_wu"]] = 1.0
            A[r, base + _F["e_wf"]] = 1.0
            A[r, base + _F["e_wr"]] = 1.0
            A[r, base + _F["e_wg"]] = 1.0
            labels[r] = f"wind_avail[{t}]"

            A[r + 1, base + _F["e_ru"]] = 1.0
            A[r + 1, base + _F["e_rf"]] = 1.0
            A[r + 1, base + _F["e_rg"]] = 1.0
            rhs_const[r + 1] = p.gamma_e_d
            labels[r + 1] = f"ees_discharge_rate[{t}]"

            A[r + 2, base + _F["e_ru"]] = 1.0
            A[r + 2, base + _F["e_rf"]] = 1.0
            A[r + 2, base + _F["e_rg"]] = 1.0
            A[r + 2, re_t] = -1.0
            labels[r + 2] = f"ees_discharge_level[{t}]"

            A[r + 3, base + _F["e_wr"]] = p.beta_e_c
            A[r + 3, base + _F["e_gr"]] = p.beta_e_c
            rhs_const[r + 3] = p.gamma_e_c
            labels[r + 3] = f"ees_charge_rate[{t}]"

            A[r + 4, base + _F["e_wu"]] = 1.0
            A[r + 4, base + _F["e_ru"]] = p.beta_e_d
            A[r + 4, base + _F["e_gu"]] = 1.0
            labels[r + 4] = f"urban_elec_cap[{t}]"

            A[r + 5, base + _F["e_wf"]] = 1.0
            A[r + 5, base + _F["e_rf"]] = p.beta_e_d
            A[r + 5, base + _F["e_gf"]] = 1.0
            labels[r + 5] = f"foundry_elec_cap[{t}]"

            A[r + 6, base + _F["h_ru"]] = 1.0
            rhs_const[r + 6] = p.gamma_h_d
            labels[r + 6] = f"tes_discharge_rate[{t}]"

            A[r + 7, base + _F["h_ru"]] = 1.0
            A[r + 7, rh_t] = -1.0
            labels[r + 7] = f"tes_discharge_level[{t}]"

            A[r + 8, base + _F["h_fr"]] = p.beta_h_c
            rhs_const[r + 8] = p.gamma_h_c
            labels[r + 8] = f"tes_charge_rate[{t}]"

            A[r + 9, base + _F["h_fu"]] = 1.0
            A[r + 9, base + _F["h_gu"]] = 1.0
            A[r + 9, base + _F["h_ru"]] = p.beta_h_d
            labels[r + 9] = f"urban_heat_cap[{t}]"

            A[r + 10, base + _F["h_fu"]] = 1.0
            A[r + 10, base + _F["h_fr"]] = 1.0
            A[r + 10, base + _F["e_wf"]] = -p.delta_eh
            A[r + 10, base + _F["e_rf"]] = -(p.delta_eh * p.beta_e_d)
            A[r + 10, base + _F["e_gf"]] = -p.delta_eh
            labels[r + 10] = f"foundry_heat_yield[{t}]"

            A[r + 11, re_t] = 1.0
            A[r + 11, base + _F["e_wr"]] = p.beta_e_c
            A[r + 11, base + _F["e_gr"]] = p.beta_e_c
            A[r + 11, base + _F["e_ru"]] = -1.0
            A[r + 11, base + _F["e_rf"]] = -1.0
            A[r + 11, base + _F["e_rg"]] = -1.0
            rhs_const[r + 11] = p.r_e_max
            labels[r + 11] = f"ees_cap[{t}]"

            A[r + 12, rh_t] = 1.0
            A[r + 12, base + _F["h_fr"]] = p.beta_h_c
            A[r + 12, base + _F["h_ru"]] = -1.0
            rhs_const[r + 12] = p.r_h_max
            labels[r + 12] = f"tes_cap[{t}]"

        r = 13 * H
        A[r, self._re0] = 1.0
        senses[r] = 1
        labels[r] = "ees_init"
        start_basis[r] = self._re0
        A[r + 1, self._rh0] = 1.0
        senses[r + 1] = 1
        labels[r + 1] = "tes_init"
        start_basis[r + 1] = self._rh0
        self._init_rows = (r, r + 1)

        for t in range(H - 1):
            base = 14 * t
            rr = 13 * H + 2 + 2 * t
            A[rr, self._re0 + t + 1] = 1.0
            A[rr, self._re0 + t] = -1.0
            A[rr, base + _F["e_wr"]] = -p.beta_e_c
            A[rr, base + _F["e_gr"]] = -p.beta_e_c
            A[rr, base + _F["e_ru"]] = 1.0
            A[rr, base + _F["e_rf"]] = 1.0
            A[rr, base + _F["e_rg"]] = 1.0
            senses[rr] = 1
            labels[rr] = f"ees_balance[{t}]"
            start_basis[rr] = self._re0 + t + 1

            A[rr + 1, self._rh0 + t + 1] = 1.0
            A[rr + 1, self._rh0 + t] = -1.0
            A[rr + 1, base + _F["h_fr"]] = -p.beta_h_c
            A[rr + 1, base + _F["h_ru"]] = 1.0
            senses[rr + 1] = 1
            labels[rr + 1] = f"tes_balance[{t}]"
            start_basis[rr + 1] = self._rh0 + t + 1

        if not np.isfinite(A).all():
            raise ValueError("template matrix has non-finite entries")
        A.setflags(write=False)
        self.matrix = A
        self.senses = senses
        self.labels = tuple(labels)
        self.rhs_const = rhs_const
        self.start_basis = start_basis

        names = []
        for t in range(H):
            names.extend(f"{f}[{t}]" for f in FLOW_FIELDS)
        names.extend(f"re_lvl[{t}]" for t in range(H))
        names.extend(f"rh_lvl[{t}]" for t in range(H))
        self.var_names = tuple(names)

        lo = np.zeros(self.n)
        lo[self._re0:self._rh0] = p.r_e_min
        lo[self._rh0:] = p.r_h_min
        self.var_lo = lo
        self.var_hi = np.full(self.n, np.inf)

        # Objective entries that do not depend on prices.
        c = np.zeros(self.n)
        for t in range(H):
            base = 14 * t
            c[base + _F["e_wu"]] = -p.c_p_eu
            c[base + _F["e_wf"]] = -p.c_p_ef
            c[base + _F["e_ru"]] = p.lcos_e - p.c_p_eu * p.beta_e_d
            c[base + _F["e_rf"]] = p.lcos_e - p.c_p_ef * p.beta_e_d
            c[base + _F["h_fu"]] = -p.c_p_hu
            c[base + _F["h_ru"]] = p.lcos_h - p.c_p_hu * p.beta_h_d
        self._c_const = c

    def instantiate(self, bundle: ForecastBundle,
                    alpha_sched: LeadSchedule | None,
                    state: StorageState) -> LpInstance:
        """Fill in forecasts, confidence schedule and storage state."""
        H = self.horizon
        p = self.params
        if bundle.horizon != H:
            raise ValueError(
                f"bundle horizon {bundle.horizon} does not match template {H}")
        if alpha_sched is not None and len(alpha_sched) != H:
            raise ValueError(
                f"alpha schedule length {len(alpha_sched)} does not match horizon {H}")
        if not (p.r_e_min <= state.r_e <= p.r_e_max
                and p.r_h_min <= state.r_h <= p.r_h_max):
            raise ValueError(f"storage state {state} outside capacity bounds")

        rhs = self.rhs_const.copy()
        random_rows = (
            (0, bundle.e_w, "supply_upper"),
            (4, bundle.d_eu, "demand_upper"),
            (5, bundle.d_ef, "demand_upper"),
            (9, bundle.d_hu, "demand_upper"),
        )
        for off, series, sense in random_rows:
            if alpha_sched is None:
                for t in range(H):
                    rhs[13 * t + off] = max(0.0, series[t].mu)
            else:
                av = alpha_sched.values
                for t in range(H):
                    rhs[13 * t + off] = max(
                        0.0, tighten_bound(series[t], av[t], sense))
        rhs[self._init_rows[0]] = state.r_e
        rhs[self._init_rows[1]] = state.r_h

        c = self._c_const.copy()
        offset = 0.0
        for t in range(H):
            base = 14 * t
            peg = bundle.p_eg[t].mu
            phg = bundle.p_hg[t].mu
            c[base + _F["e_wg"]] = -peg
            c[base + _F["e_rg"]] = p.lcos_e - peg * p.beta_e_d
            c[base + _F["e_gu"]] = peg - p.c_p_eu
            c[base + _F["e_gf"]] = peg - p.c_p_ef
            c[base + _F["e_gr"]] = peg
            c[base + _F["h_gu"]] = phg - p.c_p_hu
            offset += (p.c_p_eu * bundle.d_eu[t].mu
                       + p.c_p_hu * bundle.d_hu[t].mu
                       + p.c_p_ef * bundle.d_ef[t].mu)

        inst = LpInstance(
            num_vars=self.n, objective=c, offset=offset, matrix=self.matrix,
            senses=self.senses, rhs=rhs, labels=self.labels,
            var_names=self.var_names, var_lo=self.var_lo, var_hi=self.var_hi,
            start_basis=self.start_basis, flow_layout=True, template_token=self,
        )
        inst.validate()
        return inst


def build(bundle: ForecastBundle, alpha_sched: LeadSchedule | None,
          state: StorageState, params: SystemParams, horizon: int) -> LpInstance:
    """Assemble the horizon LP for one decision epoch."""
    return LpTemplate(params, horizon).instantiate(bundle, alpha_sched, state)


# ---------------------------------------------------------------------------
# Solver.
# ---------------------------------------------------------------------------

try:
    from ._kernel import phase_loop as _numba_phase_loop
except Exception:  # pragma: no cover - numba missing or broken
    _numba_phase_loop = None


@dataclass
class LpSolution:
    status: str  # "optimal" | "infeasible" | "unbounded"
    objective_value: float | None
    primal: np.ndarray | None
    first_step: FlowDecision | None
    duals: np.ndarray | None = None
    dual_objective: float | None = None
    iterations: int = 0
    detail: str | None = None
    basis: np.ndarray | None = field(default=None, repr=False)


class SolverNumericalError(RuntimeError):
    pass


class _Workspace:
    """Standard-form columns in CSC layout, shared across warm solves.

    Columns 0..n-1 are the structural variables, then one slack per
    inequality row, then up to m artificial slots filled per solve.  The
    matrix is 1-2% dense, so pricing and FTRAN walk short column lists.
    """

    _ART_NNZ = 24  # capacity per artificial column

    def __init__(self, inst: LpInstance):
        m, n = inst.matrix.shape
        self.m = m
        self.n = n
        ineq = np.where(inst.senses == 0)[0]
        self.n_slack = len(ineq)
        self.N = n + self.n_slack
        self.cap = self.N + m

        cols = [np.nonzero(inst.matrix[:, j])[0] for j in range(n)]
        nnz_struct = sum(len(cj) for cj in cols)
        nnz_cap = nnz_struct + self.n_slack + m * self._ART_NNZ
        self.cptr = np.zeros(self.cap + 1, dtype=np.int64)
        self.crow = np.zeros(nnz_cap, dtype=np.int64)
        self.cval = np.zeros(nnz_cap)
        pos = 0
        for j, rows_j in enumerate(cols):
            self.cptr[j] = pos
            k = len(rows_j)
            self.crow[pos:pos + k] = rows_j
            self.cval[pos:pos + k] = inst.matrix[rows_j, j]
            pos += k
        for s, row in enumerate(ineq):
            self.cptr[n + s] = pos
            self.crow[pos] = row
            self.cval[pos] = 1.0
            pos += 1
        self.cptr[self.N:] = pos  # artificial slots filled per solve
        self.slack_of_row = np.full(m, -1, dtype=np.int64)
        self.slack_of_row[ineq] = n + np.arange(self.n_slack)
        self.token = inst.template_token if inst.template_token is not None else object()

    def column(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.cptr[j], self.cptr[j + 1]
        return self.crow[lo:hi], self.cval[lo:hi]

    def dense_basis(self, basis: np.ndarray) -> np.ndarray:
        B = np.zeros((self.m, self.m))
        for i, j in enumerate(basis):
            rows_j, vals_j = self.column(int(j))
            B[rows_j, i] = vals_j
        return B


class _Simplex:
    """One solve over a workspace; supports warm basis + cached inverse.

    The basis inverse is kept transposed (binvt[k, i] = (B^-1)[i, k]) so
    the hot loops touch contiguous memory; apart from that this is a
    textbook revised simplex with Dantzig pricing switching to Bland's
    rule after a degenerate stall.
    """

    def __init__(self, ws: _Workspace, inst: LpInstance):
        self.ws = ws
        self.inst = inst
        self.m = ws.m
        self.lo = inst.var_lo
        # b shifted by the variable lower bounds (x = x' + lo, x' >= 0).
        if inst.var_lo.any():
            self.b = inst.rhs - inst.matrix @ self.lo
        else:
            self.b = inst.rhs.astype(float, copy=True)
        self.c = np.zeros(ws.cap)
        self.c[:ws.n] = inst.objective
        self.n_art = 0
        self.art_row = np.full(ws.m, -1, dtype=np.int64)
        self._art_pos = int(ws.cptr[ws.N])
        self.iterations = 0
        self.scale = max(1.0, float(np.max(np.abs(self.b))) if len(self.b) else 1.0)

    # -- basis plumbing ----------------------------------------------------

    def _new_art(self, rows: np.ndarray, vals: np.ndarray, row: int) -> int:
        """Append an artificial column (exact span, entries contiguous)."""
        ws = self.ws
        k = self.n_art
        j = ws.N + k
        lo = self._art_pos
        if lo + len(rows) > len(ws.crow):
            raise SolverNumericalError("artificial column capacity exceeded")
        ws.crow[lo:lo + len(rows)] = rows
        ws.cval[lo:lo + len(vals)] = vals
        ws.cptr[j] = lo
        ws.cptr[j + 1] = lo + len(rows)
        self._art_pos = lo + len(rows)
        self.art_row[k] = row
        self.n_art += 1
        return j

    def _release_arts(self) -> None:
        ws = self.ws
        ws.cptr[ws.N:] = ws.cptr[ws.N]

    def init_cold(self, basis_hint: np.ndarray | None):
        """Build a starting basis: hinted columns, else slacks + artificials."""
        ws = self.ws
        if basis_hint is not None:
            basis = np.empty(self.m, dtype=np.int64)
            for i in range(self.m):
                basis[i] = basis_hint[i] if basis_hint[i] >= 0 else ws.slack_of_row[i]
            if (basis < 0).any():
                return self.init_cold(None)
            B = ws.dense_basis(basis)
            try:
                binvt = np.linalg.inv(B.T.copy())
            except np.linalg.LinAlgError:
                return self.init_cold(None)
            self.basis = basis
            self.binvt = np.ascontiguousarray(binvt)
        else:
            basis = ws.slack_of_row.copy()
            binvt = np.eye(self.m)
            one = np.ones(1)
            for i in np.where(basis < 0)[0]:  # equality rows
                sign = 1.0 if self.b[i] >= 0.0 else -1.0
                basis[i] = self._new_art(np.array([i], dtype=np.int64),
                                         sign * one, i)
                binvt[i, i] = sign
            self.basis = basis
            self.binvt = binvt
        self.xb = self.b @ self.binvt
        self._repair_negative_rows()

    def init_warm(self, basis: np.ndarray, binvt: np.ndarray | None):
        """Adopt (and take ownership of) a previous basis and its inverse."""
        ws = self.ws
        if len(basis) != self.m or (basis >= ws.N).any():
            raise SolverNumericalError("warm basis invalid for this instance")
        self.basis = basis
        if binvt is None:
            try:
                binvt = np.ascontiguousarray(
                    np.linalg.inv(ws.dense_basis(basis).T.copy()))
            except np.linalg.LinAlgError:
                raise SolverNumericalError("warm basis is singular") from None
        self.binvt = binvt
        self.xb = self.b @ self.binvt
        self._repair_negative_rows()

    def _repair_negative_rows(self) -> None:
        """Swap artificials into rows whose basic value is negative.

        The artificial column for row i is the negated current basic
        column, so the basis inverse only needs row i (a binvt column)
        negated and the basic value flips positive.  Minimizing the
        artificials afterwards restores feasibility from wherever the
        warm basis left us.
        """
        tol = FEAS_TOL * self.scale
        for i in np.where(self.xb < -tol)[0]:
            rows_j, vals_j = self.ws.column(int(self.basis[i]))
            j = self._new_art(rows_j.copy(), -vals_j, int(i))
            self.basis[i] = j
            self.binvt[:, i] *= -1.0
            self.xb[i] = -self.xb[i]
        np.clip(self.xb, 0.0, None, out=self.xb)

    # -- simplex core --------------------------------------------------------

    def _refactor(self) -> None:
        try:
            binvt = np.linalg.inv(self.ws.dense_basis(self.basis).T.copy())
        except np.linalg.LinAlgError:
            raise SolverNumericalError("basis became singular") from None
        self.binvt = np.ascontiguousarray(binvt)
        self.xb = self.b @ self.binvt
        np.clip(self.xb, 0.0, None, out=self.xb)

    def _phase_numpy(self, c, ncols, elig, art_basic, any_arts, bland,
                     max_iter):
        """Pure-numpy fallback with the same pivot rules as the kernel."""
        ws = self.ws
        m = self.m
        cptr, crow, cval = ws.cptr, ws.crow, ws.cval
        nnz_end = cptr[ncols]
        weights = cval[:nnz_end] if nnz_end else cval[:0]
        rows_flat = crow[:nnz_end]
        y = self.binvt @ c[self.basis]
        y_exact = True
        it = 0
        starts = np.minimum(cptr[:ncols], max(nnz_end - 1, 0))
        empty = cptr[:ncols] == cptr[1:ncols + 1]
        while it < max_iter:
            contrib = weights * y[rows_flat]
            sums = np.add.reduceat(contrib, starts) \
                if nnz_end else np.zeros(ncols)
            sums[empty] = 0.0
            r = c[:ncols] - sums
            r[~elig[:ncols]] = np.inf
            if bland:
                neg = np.nonzero(r < -PIVOT_TOL)[0]
                j = int(neg[0]) if len(neg) else -1
            else:
                j = int(np.argmin(r))
                if r[j] >= -PIVOT_TOL:
                    j = -1
            if j < 0:
                if y_exact:
                    return 0, -1, it, bland
                y = self.binvt @ c[self.basis]
                y_exact = True
                continue
            rj = float(r[j])
            rows_j, vals_j = ws.column(j)
            d = vals_j @ self.binvt[rows_j]
            pos = d > PIVOT_TOL
            if any_arts:
                guard = art_basic & (np.abs(d) > PIVOT_TOL)
                cand = pos | guard
                denom = np.where(guard & ~pos, -d, d)
            else:
                cand = pos
                denom = d
            if not cand.any():
                return 1, j, it, bland
            xb_c = np.where(self.xb > 0.0, self.xb, 0.0)
            ratios = np.full(m, np.inf)
            ratios[cand] = xb_c[cand] / denom[cand]
            theta = float(ratios.min())
            ties = np.nonzero(ratios <= theta + 1e-12 * (1.0 + theta))[0]
            if bland:
                i = int(ties[np.argmin(self.basis[ties])])
            else:
                i = int(ties[np.argmax(np.abs(d[ties]))])
            piv = float(d[i])
            rowi = self.binvt[:, i] / piv
            y = y + rj * rowi
            y_exact = False
            d2 = d.copy()
            d2[i] -= 1.0
            self.binvt -= np.outer(rowi, d2)
            self.xb -= theta * d
            self.xb[i] = theta
            np.clip(self.xb, 0.0, None, out=self.xb)
            leaving = self.basis[i]
            elig[leaving] = bool(leaving < ws.N)
            elig[j] = False
            self.basis[i] = int(j)
            if any_arts:
                art_basic[i] = False
                any_arts = bool(art_basic.any())
            it += 1
            if theta <= 1e-11:
                self._degen += 1
                if self._degen > _BLAND_DEGEN_STREAK:
                    bland = True
            else:
                self._degen = 0
            if it >= _REFACTOR_EVERY:
                return 4, -1, it, bland
        return 2, -1, it, bland

    def _run_phase(self, c: np.ndarray, max_iter: int) -> str:
        ws = self.ws
        ncols = ws.N + self.n_art
        elig = self.elig
        art_basic = self.basis >= ws.N
        bland = False
        self._degen = 0
        remaining = max_iter
        while True:
            any_arts = bool(art_basic.any())
            if _numba_phase_loop is not None:
                y = self.binvt @ c[self.basis]
                status, j, done, bland = _numba_phase_loop(
                    ws.cptr, ws.crow, ws.cval, ncols, ws.N, c, self.basis,
                    self.binvt, self.xb, y, elig, art_basic, any_arts,
                    bland, remaining, _REFACTOR_EVERY, _BLAND_DEGEN_STREAK)
            else:
                status, j, done, bland = self._phase_numpy(
                    c, ncols, elig, art_basic, any_arts, bland, remaining)
            self.iterations += done
            remaining -= done
            if status == 4:
                self._refactor()
                continue
            if status == 0:
                return "optimal"
            if status == 1:
                self._unbounded_col = j
                return "unbounded"
            raise SolverNumericalError("simplex iteration limit exceeded")

    def run(self) -> LpSolution:
        ws = self.ws
        max_iter = 2000 + 80 * (self.m + ws.n)
        self.elig = np.ones(ws.cap, dtype=bool)
        self.elig[ws.N:] = False  # artificials never enter
        self.elig[self.basis] = False

        if (self.basis >= ws.N).any():
            c1 = np.zeros(ws.cap)
            c1[ws.N:ws.N + self.n_art] = 1.0
            status = self._run_phase(c1, max_iter)
            if status != "optimal":
                raise SolverNumericalError("phase 1 terminated abnormally")
            art_rows = np.where(self.basis >= ws.N)[0]
            infeas = float(self.xb[art_rows].sum()) if len(art_rows) else 0.0
            if infeas > FEAS_TOL * self.scale:
                worst = art_rows[np.argmax(self.xb[art_rows])]
                label = self.inst.labels[self.art_row[self.basis[worst] - ws.N]]
                return LpSolution(status="infeasible", objective_value=None,
                                  primal=None, first_step=None,
                                  iterations=self.iterations,
                                  detail=f"violated row: {label}")

        status = self._run_phase(self.c, max_iter)
        if status == "unbounded":
            j = self._unbounded_col
            name = (self.inst.var_names[j] if j < ws.n
                    else f"slack:{self.inst.labels[int(np.where(ws.slack_of_row == j)[0][0])]}")
            return LpSolution(status="unbounded", objective_value=None,
                              primal=None, first_step=None,
                              iterations=self.iterations,
                              detail=f"unbounded ray along {name}")

        return self._extract(refactored=False)

    def _extract(self, refactored: bool) -> LpSolution:
        ws = self.ws
        self.xb = self.b @ self.binvt
        np.clip(self.xb, 0.0, None, out=self.xb)
        x_std = np.zeros(ws.N + self.n_art)
        x_std[self.basis] = self.xb
        x = x_std[:ws.n] + self.lo
        resid = self.inst.matrix @ x - self.inst.rhs
        tol = 1e-6 * self.scale
        bad = np.where(self.inst.senses == 1, np.abs(resid) > tol, resid > tol)
        if bad.any():
            if refactored:
                raise SolverNumericalError(
                    f"solution violates row {self.inst.labels[int(np.argmax(bad))]}")
            self._refactor()
            return self._extract(refactored=True)

        obj = float(self.inst.objective @ x) + self.inst.offset
        y = self.binvt @ self.c[self.basis]
        dual_obj = float(y @ self.b) + float(self.inst.objective @ self.lo) \
            + self.inst.offset
        first = None
        if self.inst.flow_layout:
            vals = [float(v) if v > 0.0 else 0.0 for v in x[:N_FLOWS]]
            first = FlowDecision(**dict(zip(FLOW_FIELDS, vals)))
        basis_out = self.basis.copy()
        return LpSolution(status="optimal", objective_value=obj, primal=x,
                          first_step=first, duals=y, dual_objective=dual_obj,
                          iterations=self.iterations, basis=basis_out)


def _solve_with_bounds_rows(inst: LpInstance) -> LpInstance:
    """Fold finite upper bounds into explicit rows (rare, generic instances)."""
    finite = np.where(np.isfinite(inst.var_hi))[0]
    if len(finite) == 0:
        return inst
    m_extra = len(finite)
    A = np.vstack([inst.matrix, np.zeros((m_extra, inst.num_vars))])
    for k, j in enumerate(finite):
        A[inst.num_rows + k, j] = 1.0
    senses = np.concatenate([inst.senses, np.zeros(m_extra, dtype=np.int8)])
    rhs = np.concatenate([inst.rhs, inst.var_hi[finite]])
    labels = inst.labels + tuple(f"ub:{inst.var_names[j]}" for j in finite)
    return LpInstance(
        num_vars=inst.num_vars, objective=inst.objective, offset=inst.offset,
        matrix=A, senses=senses, rhs=rhs, labels=labels,
        var_names=inst.var_names, var_lo=inst.var_lo,
        var_hi=np.full(inst.num_vars, np.inf),
        start_basis=None, flow_layout=inst.flow_layout, template_token=None,
    )


def solve(inst: LpInstance) -> LpSolution:
    """Solve one instance from scratch (deterministic pivoting)."""
    inst.validate()
    work_inst = _solve_with_bounds_rows(inst)
    ws = _Workspace(work_inst)
    sx = _Simplex(ws, work_inst)
    try:
        sx.init_cold(work_inst.start_basis)
        return sx.run()
    except SolverNumericalError:
        # Retry once from the plain slack/artificial start.
        sx = _Simplex(ws, work_inst)
        sx.init_cold(None)
        return sx.run()


class RollingSolver:
    """Warm-started solves for a stream of instances from one template.

    Keeps the previous optimal basis and its (transposed) inverse;
    consecutive rolling instances share the constraint matrix, so
    re-solving usually takes a modest number of pivots.  Falls back to a
    cold start on numerical trouble.
    """

    def __init__(self):
        self._ws: _Workspace | None = None
        self._basis: np.ndarray | None = None
        self._binvt: np.ndarray | None = None

    def solve(self, inst: LpInstance) -> LpSolution:
        if self._ws is None or self._ws.token is not inst.template_token \
                or inst.template_token is None:
            self._ws = _Workspace(inst)
            self._basis = None
            self._binvt = None
        warm_basis, warm_binvt = self._basis, self._binvt
        self._basis = None
        self._binvt = None
        sx = _Simplex(self._ws, inst)
        try:
            if warm_basis is not None:
                sx.init_warm(warm_basis, warm_binvt)
            else:
                sx.init_cold(inst.start_basis)
            sol = sx.run()
        except SolverNumericalError:
            sx._release_arts()
            sx = _Simplex(self._ws, inst)
            sx.init_cold(inst.start_basis)
            sol = sx.run()
        if sol.status == "optimal" and (sol.basis < self._ws.N).all():
            self._basis = sol.basis.copy()
            self._binvt = sx.binvt
        sx._release_arts()
        return sol


# ---------------------------------------------------------------------------
# MPS export.
# ---------------------------------------------------------------------------


def _short_names(names, width: int = 8) -> list[str]:
    """Sanitized unique names of at most `width` characters."""
    out: list[str] = []
    seen: set[str] = set()
    for name in names:
        base = "".join(ch for ch in name.upper() if ch.isalnum()) or "X"
        cand = base[:width]
        k = 0
        while cand in seen:
            suffix = f"_{k}"
            cand = base[:width - len(suffix)] + suffix
            k += 1
        seen.add(cand)
        out.append(cand)
    return out


def _num(v: float) -> str:
    return f"{v:.11E}"


def export_mps(inst: LpInstance, path) -> None:
    """Write the instance as an MPS file (12 significant digits).

    Row names are the constraint labels truncated to 8 characters with a
    uniqueness suffix.  The objective constant is encoded as a negated RHS
    entry on the objective row, a convention most readers accept.
    """
    inst.validate()
    row_names = _short_names(inst.labels)
    col_names = _short_names(inst.var_names)
    lines = ["NAME          CCDISPATCH", "ROWS", " N  COST"]
    for i, rn in enumerate(row_names):
        tag = "L" if inst.senses[i] == 0 else "E"
        lines.append(f" {tag}  {rn}")
    lines.append("COLUMNS")
    mat = inst.matrix
    for j, cn in enumerate(col_names):
        entries = [("COST", float(inst.objective[j]))]
        for i in np.nonzero(mat[:, j])[0]:
            entries.append((row_names[int(i)], float(mat[i, j])))
        for a in range(0, len(entries), 2):
            pair = entries[a:a + 2]
            parts = [f"    {cn:<10}"]
            for rn, v in pair:
                parts.append(f"{rn:<10}{_num(v):>20}   ")
            lines.append("".join(parts).rstrip())
    lines.append("RHS")
    rhs_entries = [(row_names[i], float(inst.rhs[i]))
                   for i in range(inst.num_rows) if inst.rhs[i] != 0.0]
    if inst.offset != 0.0:
        rhs_entries.append(("COST", -float(inst.offset)))
    for a in range(0, len(rhs_entries), 2):
        pair = rhs_entries[a:a + 2]
        parts = ["    RHS       "]
        for rn, v in pair:
            parts.append(f"{rn:<10}{_num(v):>20}   ")
        lines.append("".join(parts).rstrip())
    lines.append("BOUNDS")
    for j, cn in enumerate(col_names):
        lo = float(inst.var_lo[j])
        hi = float(inst.var_hi[j])
        if lo != 0.0:
            lines.append(f" LO BND       {cn:<10}{_num(lo):>20}")
        if math.isfinite(hi):
            lines.append(f" UP BND       {cn:<10}{_num(hi):>20}")
    lines.append("ENDATA")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
