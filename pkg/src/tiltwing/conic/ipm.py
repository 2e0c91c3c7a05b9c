"""Homogeneous self-dual primal-dual interior-point method.

The program is brought to the standard form::

    minimize    c'x
    subject to  A x = b
                G x + s = h,   s in K

with K a product of a nonnegative orthant (variable bounds) and second-order
cones (rotated cones mapped by ``(U+V, U-V, sqrt(2) w)``). Iterates use
Nesterov-Todd scaling and a Mehrotra predictor-corrector. Each Newton system
is solved through the full quasi-definite KKT matrix, factored with SuperLU
and polished by iterative refinement against the unregularized system.
"""

from __future__ import annotations

import logging
import math

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .program import (
    CONST,
    ConicProgram,
    Residuals,
    SolverSolution,
    Status,
    ToleranceSet,
    primal_residuals,
)

log = logging.getLogger(__name__)

STEP_FRACTION = 0.99
# Static regularization ladder: the smallest value that factors is used.
# Small values keep iterative refinement effective when W^2 spans many
# orders of magnitude near the end of a solve.
REG_LADDER = (1e-12, 1e-10, 1e-8, 1e-6)
REFINE_STEPS = 10
# Relative KKT residual above which a pivoted factorization is tried.
PIVOT_FALLBACK_TOL = 1e-9


class _Cones:
    """Index bookkeeping and Jordan-algebra operations for K."""

    def __init__(self, n_lp, soc_groups):
        self.n_lp = n_lp
        # (start offset, number of cones, cone dimension)
        self.groups = soc_groups
        self.m = n_lp + sum(k * q for _, k, q in soc_groups)
        self.degree = n_lp + sum(k for _, k, _ in soc_groups)

    def blocks(self, v):
        for start, k, q in self.groups:
            yield v[start : start + k * q].reshape(k, q)

    def unit(self):
        e = np.zeros(self.m)
        e[: self.n_lp] = 1.0
        for blk in self.blocks(e):
            blk[:, 0] = 1.0
        return e

    def min_eig_violation(self, v):
        """Smallest ``t`` such that ``v + t e`` lies in the closed cone."""
        t = -np.inf
        if self.n_lp:
            t = max(t, float(np.max(-v[: self.n_lp])))
        for blk in self.blocks(v):
            if blk.shape[0]:
                t = max(t, float(np.max(np.linalg.norm(blk[:, 1:], axis=1) - blk[:, 0])))
        return t

    def circ(self, u, v):
        out = np.empty(self.m)
        out[: self.n_lp] = u[: self.n_lp] * v[: self.n_lp]
        for (ub, vb, ob) in zip(self.blocks(u), self.blocks(v), self.blocks(out)):
            ob[:, 0] = np.einsum("ij,ij->i", ub, vb)
            ob[:, 1:] = ub[:, :1] * vb[:, 1:] + vb[:, :1] * ub[:, 1:]
        return out

    def inv_circ(self, lam, v):
        """Solve ``lam o x = v`` for x."""
        out = np.empty(self.m)
        out[: self.n_lp] = v[: self.n_lp] / lam[: self.n_lp]
        for (lb, vb, ob) in zip(self.blocks(lam), self.blocks(v), self.blocks(out)):
            l0 = lb[:, 0]
            det = l0 * l0 - np.sum(lb[:, 1:] ** 2, axis=1)
            x0 = (l0 * vb[:, 0] - np.einsum("ij,ij->i", lb[:, 1:], vb[:, 1:])) / det
            ob[:, 0] = x0
            ob[:, 1:] = (vb[:, 1:] - x0[:, None] * lb[:, 1:]) / l0[:, None]
        return out

    def max_step(self, u, d):
        alpha = np.inf
        if self.n_lp:
            ul, dl = u[: self.n_lp], d[: self.n_lp]
            neg = dl < 0
            if np.any(neg):
                alpha = float(np.min(-ul[neg] / dl[neg]))
        for ub, db in zip(self.blocks(u), self.blocks(d)):
            if ub.shape[0]:
                alpha = min(alpha, float(kernels.max_step(ub, db)))
        return alpha


class _Scaling:
    """Nesterov-Todd scaling W (symmetric) at the pair (s, z)."""

    def __init__(self, cones: _Cones, s, z):
        self.cones = cones
        nl = cones.n_lp
        self.d = np.sqrt(s[:nl] / z[:nl])
        self.lam = np.empty(cones.m)
        self.lam[:nl] = np.sqrt(s[:nl] * z[:nl])
        self.W = []
        self.Winv = []
        for sb, zb, lb in zip(cones.blocks(s), cones.blocks(z), cones.blocks(self.lam)):
            W, Winv, lam = kernels.nt_scaling(np.ascontiguousarray(sb), np.ascontiguousarray(zb))
            self.W.append(W)
            self.Winv.append(Winv)
            lb[:] = lam

    def _apply(self, diag, mats, v):
        out = np.empty_like(v)
        nl = self.cones.n_lp
        out[:nl] = diag * v[:nl]
        for M, vb, ob in zip(mats, self.cones.blocks(v), self.cones.blocks(out)):
            ob[:] = np.einsum("ijk,ik->ij", M, vb)
        return out

    def W_mul(self, v):
        return self._apply(self.d, self.W, v)

    def Winv_mul(self, v):
        return self._apply(1.0 / self.d, self.Winv, v)

    def W2_mul(self, v):
        return self.W_mul(self.W_mul(v))


def _block_pattern(cones: _Cones):
    """Row/col index arrays for a block-diagonal matrix on K."""
    rows = [np.arange(cones.n_lp)]
    cols = [np.arange(cones.n_lp)]
    for start, k, q in cones.groups:
        base = start + q * np.arange(k)[:, None, None]
        r = base + np.arange(q)[None, :, None] + 0 * np.arange(q)[None, None, :]
        c = base + np.arange(q)[None, None, :] + 0 * np.arange(q)[None, :, None]
        rows.append(r.ravel())
        cols.append(c.ravel())
    return np.concatenate(rows), np.concatenate(cols)


class _StandardForm:
    def __init__(self, program: ConicProgram):
        n = program.num_vars
        lo, hi = program.lower, program.upper
        lo_idx = np.flatnonzero(np.isfinite(lo))
        hi_idx = np.flatnonzero(np.isfinite(hi))
        rows, cols, vals, h = [], [], [], []
        r = 0
        rows.append(np.arange(r, r + lo_idx.size))
        cols.append(lo_idx)
        vals.append(-np.ones(lo_idx.size))
        h.append(-lo[lo_idx])
        r += lo_idx.size
        rows.append(np.arange(r, r + hi_idx.size))
        cols.append(hi_idx)
        vals.append(np.ones(hi_idx.size))
        h.append(hi[hi_idx])
        r += hi_idx.size
        n_lp = r

        by_dim: dict[int, list] = {}
        for cone in program.cones:
            by_dim.setdefault(cone.dim, []).append(cone)
        groups = []
        sq2 = math.sqrt(2.0)
        for q in sorted(by_dim):
            group = by_dim[q]
            groups.append((r, len(group), q))
            for cone in group:
                hu = cone.u_scale if cone.u == CONST else 0.0
                hv = cone.v_scale if cone.v == CONST else 0.0
                for sign, row in ((1.0, r), (-1.0, r + 1)):
                    if cone.u != CONST:
                        rows.append(np.array([row]))
                        cols.append(np.array([cone.u]))
                        vals.append(np.array([-cone.u_scale]))
                    if cone.v != CONST:
                        rows.append(np.array([row]))
                        cols.append(np.array([cone.v]))
                        vals.append(np.array([-sign * cone.v_scale]))
                h.append(np.array([hu + hv, hu - hv]))
                for j, wi in enumerate(cone.w):
                    rows.append(np.array([r + 2 + j]))
                    cols.append(np.array([wi]))
                    vals.append(np.array([-sq2]))
                h.append(np.zeros(len(cone.w)))
                r += q
        self.cones = _Cones(n_lp, groups)
        self.G = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(r, n)
        )
        self.h = np.concatenate(h) if h else np.zeros(0)
        self.A = program.A.tocsr()
        self.b = program.b.copy()
        self.c = program.c.copy()
        self.n = n
        self.p = self.A.shape[0]
        self.col_scale = np.ones(n)
        self.row_scale_A = np.ones(self.p)
        self.row_scale_G = np.ones(r)

    def equilibrate(self, iters=15):
        """Ruiz scaling of [A; G] keeping each cone block's row scale uniform."""
        A, G = self.A.copy(), self.G.copy()
        D = np.ones(self.n)
        EA = np.ones(self.p)
        EG = np.ones(G.shape[0])
        for _ in range(iters):
            colmax = np.zeros(self.n)
            if A.nnz:
                colmax = np.maximum(colmax, abs(A).max(axis=0).toarray().ravel())
            if G.nnz:
                colmax = np.maximum(colmax, abs(G).max(axis=0).toarray().ravel())
            colmax[colmax == 0] = 1.0
            dD = 1.0 / np.sqrt(colmax)
            rA = abs(A).max(axis=1).toarray().ravel() if A.nnz else np.ones(self.p)
            rA[rA == 0] = 1.0
            rG = abs(G).max(axis=1).toarray().ravel() if G.nnz else np.ones(G.shape[0])
            for start, k, q in self.cones.groups:
                blk = rG[start : start + k * q].reshape(k, q)
                blk[:] = blk.max(axis=1, keepdims=True)
            rG[rG == 0] = 1.0
            dEA = 1.0 / np.sqrt(rA)
            dEG = 1.0 / np.sqrt(rG)
            A = sp.diags(dEA) @ A @ sp.diags(dD)
            G = sp.diags(dEG) @ G @ sp.diags(dD)
            D *= dD
            EA *= dEA
            EG *= dEG
        self.A, self.G = A.tocsr(), G.tocsr()
        self.b = EA * self.b
        self.h = EG * self.h
        self.c = D * self.c
        self.col_scale, self.row_scale_A, self.row_scale_G = D, EA, EG


class _KKT:
    """Quasi-definite KKT system ``[[0, A', G'], [A, 0, 0], [G, 0, -W^2]]``.

    Factored with static regularization; solutions are polished by iterative
    refinement against the unregularized matrix.
    """

    def __init__(self, sf: _StandardForm):
        self.sf = sf
        self.A = sf.A.tocsr()
        self.AT = sf.A.T.tocsr()
        self.G = sf.G.tocsr()
        self.GT = sf.G.T.tocsr()
        n, p, m = sf.n, sf.p, sf.cones.m
        self.n, self.p, self.m = n, p, m
        self.pat_rows, self.pat_cols = _block_pattern(sf.cones)
        self.static = sp.bmat(
            [[None, self.AT, self.GT], [self.A, None, None], [self.G, None, None]], format="csc"
        )
        self.reg_sign = sp.diags(
            np.concatenate([np.ones(n), -np.ones(p), -np.ones(m)])
        ).tocsc()
        self.perm_spec = "MMD_AT_PLUS_A"

    def factor(self, scaling: _Scaling):
        self.scaling = scaling
        n, p, m = self.n, self.p, self.m
        W2 = np.concatenate(
            [scaling.d**2] + [np.einsum("ijk,ikl->ijl", M, M).ravel() for M in scaling.W]
        )
        off = n + p
        blk = sp.csc_matrix(
            (-W2, (self.pat_rows + off, self.pat_cols + off)), shape=(off + m, off + m)
        )
        K0 = self.static + blk
        self.K0 = K0
        self.lu_pivoted = None
        for i, reg in enumerate(REG_LADDER):
            try:
                self.lu = spla.splu(
                    (K0 + reg * self.reg_sign).tocsc(),
                    permc_spec=self.perm_spec,
                    diag_pivot_thresh=0.0,
                    options={"SymmetricMode": True},
                )
                return
            except RuntimeError:
                if i == len(REG_LADDER) - 1:
                    raise

    def _refine(self, lu, rhs, sol):
        n, p = self.n, self.p
        W2_mul = self.scaling.W2_mul
        scale = 1.0 + np.max(np.abs(rhs), initial=0.0)
        prev = np.inf
        for _ in range(REFINE_STEPS):
            dx, dy, dz = sol[:n], sol[n : n + p], sol[n + p :]
            err = rhs - np.concatenate(
                [self.AT @ dy + self.GT @ dz, self.A @ dx, self.G @ dx - W2_mul(dz)]
            )
            enorm = np.max(np.abs(err), initial=0.0)
            # Stop once converged or when refinement no longer helps.
            if enorm <= 1e-14 * scale or enorm > 0.5 * prev:
                break
            prev = enorm
            sol = sol + lu.solve(err)
        return sol, min(enorm, prev) / scale

    def solve(self, r1, r2, r3):
        """Solve [[0, A', G'], [A, 0, 0], [G, 0, -W^2]] (dx, dy, dz) = (r1, r2, r3)."""
        n, p = self.n, self.p
        rhs = np.concatenate([r1, r2, r3])
        sol, rel = self._refine(self.lu, rhs, self.lu.solve(rhs))
        if rel > PIVOT_FALLBACK_TOL:
            # The unpivoted factor lost accuracy; retry with threshold pivoting.
            if self.lu_pivoted is None:
                K = (self.K0 + REG_LADDER[0] * self.reg_sign).tocsc()
                try:
                    self.lu_pivoted = spla.splu(K, permc_spec="COLAMD", diag_pivot_thresh=0.1)
                except RuntimeError:
                    self.lu_pivoted = False
            if self.lu_pivoted:
                alt, alt_rel = self._refine(self.lu_pivoted, rhs, self.lu_pivoted.solve(rhs))
                if alt_rel < rel:
                    sol = alt
        return sol[:n], sol[n : n + p], sol[n + p :]


def _unscale(sf: _StandardForm, x, y, tau):
    return sf.col_scale * x / tau, sf.row_scale_A * y / tau


class _Polisher:
    """Restores exact membership of cones whose ``u`` slot is a free epigraph
    variable (no equality row, no other cone) by raising that variable.

    Raising such a variable keeps every other constraint intact and can only
    increase the objective; callers add that increase to the duality gap so
    the optimality test stays honest.
    """

    def __init__(self, program: ConicProgram):
        in_rows = np.zeros(program.num_vars, dtype=bool)
        if program.A.nnz:
            in_rows[np.unique(program.A.tocoo().col)] = True
        uses = np.zeros(program.num_vars, dtype=int)
        for cone in program.cones:
            for i in (cone.u, cone.v, *cone.w):
                if i != CONST:
                    uses[i] += 1
        self.targets = [
            cone
            for cone in program.cones
            if cone.u != CONST
            and not in_rows[cone.u]
            and uses[cone.u] == 1
            and program.c[cone.u] >= 0
        ]
        self.upper = program.upper

    def __call__(self, x):
        x = x.copy()
        for cone in self.targets:
            v = cone.v_scale * (1.0 if cone.v == CONST else x[cone.v])
            if v <= 0:
                continue
            w2 = float(np.sum(x[list(cone.w)] ** 2))
            need = w2 / (2.0 * cone.u_scale * v)
            if need > x[cone.u]:
                x[cone.u] = min(need * (1.0 + 4e-16), self.upper[cone.u])
        return x


def solve(program: ConicProgram, tol: ToleranceSet | None = None) -> SolverSolution:
    """Solve ``program``; never raises on infeasibility (reported as status)."""
    tol = tol or ToleranceSet()
    sf = _StandardForm(program)
    if tol.equilibrate:
        sf.equilibrate()
    cones = sf.cones
    A, G, b, c, h = sf.A, sf.G, sf.b, sf.c, sf.h
    n, p, m = sf.n, sf.p, cones.m
    kkt = _KKT(sf)
    e = cones.unit()
    polish = _Polisher(program)

    def finish(status, x_std, y_std, tau, it, gap=0.0):
        x, y = _unscale(sf, x_std, y_std, tau)
        xp = polish(x)
        gap += float(program.c @ (xp - x)) / max(1.0, abs(float(program.c @ xp)))
        x = xp
        res = primal_residuals(program, x, gap)
        return SolverSolution(status, x, float(program.c @ x), res, it, y)

    if m == 0:
        raise ValueError("program without inequality or cone constraints is not supported")

    # Initial point from two least-squares style KKT solves with W = I.
    try:
        ones = _Scaling(cones, e, e)
        kkt.factor(ones)
        x, _, zt = kkt.solve(np.zeros(n), b, h)
        s = -zt
        _, y, z = kkt.solve(-c, np.zeros(p), np.zeros(m))
    except RuntimeError:
        return finish(Status.NUMERICAL_ERROR, np.zeros(n), np.zeros(p), 1.0, 0)
    ap = cones.min_eig_violation(s)
    if ap >= -1e-8 * max(1.0, np.linalg.norm(s)):
        s = s + (1.0 + max(ap, 0.0)) * e
    ad = cones.min_eig_violation(z)
    if ad >= -1e-8 * max(1.0, np.linalg.norm(z)):
        z = z + (1.0 + max(ad, 0.0)) * e
    tau, kappa = 1.0, 1.0

    bnorm = max(1.0, np.linalg.norm(b))
    hnorm = max(1.0, np.linalg.norm(h))
    cnorm = max(1.0, np.linalg.norm(c))
    status = Status.MAX_ITER
    best = None
    min_pres = np.inf
    it = 0
    for it in range(tol.max_iter + 1):
        rx = A.T @ y + G.T @ z + c * tau
        ry = A @ x - b * tau
        rz = s + G @ x - h * tau
        cx, by, hz = c @ x, b @ y, h @ z
        rt = kappa + cx + by + hz
        gap_sz = s @ z
        mu = (gap_sz + tau * kappa) / (cones.degree + 1)

        pcost = cx / tau
        dcost = -(by + hz) / tau
        gap = gap_sz / tau**2
        relgap = gap / max(1.0, min(abs(pcost), abs(dcost)))
        pres = max(np.linalg.norm(ry) / bnorm, np.linalg.norm(rz) / hnorm) / tau
        dres = np.linalg.norm(rx) / cnorm / tau
        log.debug(
            "it %2d pcost %.6e dcost %.6e gap %.1e pres %.1e dres %.1e tau %.1e kap %.1e",
            it, pcost, dcost, gap, pres, dres, tau, kappa,
        )

        # Judge optimality on unscaled residuals so the contract holds exactly.
        if pres < 1e-3 and dres < 1e-3:
            xu, _ = _unscale(sf, x, y, tau)
            xp = polish(xu)
            lift = float(program.c @ (xp - xu)) / max(1.0, abs(float(program.c @ xp)))
            res = primal_residuals(program, xp, relgap + lift)
            log.debug(
                "   unscaled eq %.1e bound %.1e cone %.1e gap %.1e (lift %.1e)",
                res.primal_eq, res.bound, res.cone, res.duality_gap, lift,
            )
            if res.within(tol) and dres <= tol.feas * 10:
                status = Status.OPTIMAL
                break
            score = max(res.primal_eq, res.bound, res.cone) + relgap
            if best is None or score < best[0]:
                best = (score, x.copy(), y.copy(), tau, relgap)

        # Accuracy lost after near-convergence: stop and fall back to the best iterate.
        min_pres = min(min_pres, pres)
        if min_pres < 1e-6 and pres > 1e3 * max(min_pres, 1e-12):
            status = Status.NUMERICAL_ERROR
            break

        # Infeasibility certificates.
        if tau < 1e-6 * max(1.0, kappa) or it == tol.max_iter:
            if by + hz < 0:
                pinf = np.linalg.norm(A.T @ y + G.T @ z) / -(by + hz)
                if pinf < tol.feas:
                    status = Status.INFEASIBLE
                    break
            if cx < 0:
                dinf = max(np.linalg.norm(A @ x), np.linalg.norm(G @ x + s)) / -cx
                if dinf < tol.feas:
                    status = Status.UNBOUNDED
                    break
        if it == tol.max_iter:
            break

        try:
            W = _Scaling(cones, s, z)
            lam = W.lam
            kkt.factor(W)
        except (RuntimeError, FloatingPointError, ValueError, ZeroDivisionError):
            status = Status.NUMERICAL_ERROR
            break
        if not np.all(np.isfinite(lam)):
            status = Status.NUMERICAL_ERROR
            break

        x1, y1, z1 = kkt.solve(-c, b, h)
        denom_base = c @ x1 + b @ y1 + h @ z1 - kappa / tau

        def direction(eta, ds_target, dt_target):
            x2, y2, z2 = kkt.solve(-eta * rx, -eta * ry, -eta * rz - W.W_mul(cones.inv_circ(lam, ds_target)))
            dtau = (-eta * rt - dt_target / tau - (c @ x2 + b @ y2 + h @ z2)) / denom_base
            dx = x2 + dtau * x1
            dy = y2 + dtau * y1
            dz = z2 + dtau * z1
            ds = W.W_mul(cones.inv_circ(lam, ds_target)) - W.W2_mul(dz)
            dkappa = (dt_target - kappa * dtau) / tau
            return dx, dy, dz, ds, dtau, dkappa

        def step_length(dz, ds, dtau, dkappa):
            # Cone membership checked in the scaled space around lambda.
            a = min(cones.max_step(lam, W.Winv_mul(ds)), cones.max_step(lam, W.W_mul(dz)))
            if dtau < 0:
                a = min(a, -tau / dtau)
            if dkappa < 0:
                a = min(a, -kappa / dkappa)
            return a

        try:
            # Affine-scaling predictor.
            ds_aff_t = -cones.circ(lam, lam)
            aff = direction(1.0, ds_aff_t, -tau * kappa)
            a_aff = min(1.0, step_length(aff[2], aff[3], aff[4], aff[5]))
            sigma = min(1.0, max(0.0, (1.0 - a_aff) ** 3))

            # Combined predictor-corrector.
            corr = cones.circ(W.Winv_mul(aff[3]), W.W_mul(aff[2]))
            ds_t = ds_aff_t - corr + sigma * mu * e
            dt_t = -tau * kappa - aff[4] * aff[5] + sigma * mu
            dx, dy, dz, ds, dtau, dkappa = direction(1.0 - sigma, ds_t, dt_t)
            alpha = min(1.0, STEP_FRACTION * step_length(dz, ds, dtau, dkappa))
        except (FloatingPointError, ValueError, RuntimeError, ZeroDivisionError):
            status = Status.NUMERICAL_ERROR
            break
        if not (np.isfinite(alpha) and alpha > 0):
            status = Status.NUMERICAL_ERROR
            break

        # Rounding can put a component on the boundary; back off if so.
        for _ in range(20):
            if (
                cones.min_eig_violation(s + alpha * ds) < 0
                and cones.min_eig_violation(z + alpha * dz) < 0
                and tau + alpha * dtau > 0
                and kappa + alpha * dkappa > 0
            ):
                break
            alpha *= 0.5
        else:
            status = Status.NUMERICAL_ERROR
            break

        x = x + alpha * dx
        y = y + alpha * dy
        z = z + alpha * dz
        s = s + alpha * ds
        tau = tau + alpha * dtau
        kappa = kappa + alpha * dkappa

    if status in (Status.INFEASIBLE, Status.UNBOUNDED):
        xs = sf.col_scale * x
        return SolverSolution(status, xs, float("nan"), Residuals(np.inf, np.inf, np.inf, np.inf), it)
    if status == Status.OPTIMAL:
        return finish(Status.OPTIMAL, x, y, tau, it, relgap)
    if best is not None:
        _, xb, yb, tb, gb = best
        return finish(status, xb, yb, tb, it, gb)
    return finish(status, x, y, tau, it, relgap)
