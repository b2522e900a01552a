"""Strict feasibility of small dense affine LMI systems.

Solves the eigenvalue-margin program

    maximize  t
    s.t.      F0_j + sum_k y_k F_jk  <=  -t * I     for every constraint j

by a primal log-det barrier with damped Newton steps and a geometrically
increasing path parameter. The feasible answer is "Feasible" only when
the achieved margin t reaches tol_feas AND the returned y passes an
independent dense eigenvalue verification (numpy eigvalsh, no shared
code with the barrier's Cholesky path). "Infeasible" is reported only
when the duality-gap bound certifies that no y can reach tol_feas and
the best centered t is <= 0; anything else is a numerical failure.

Problem sizes here are tiny (around a dozen variables, blocks up to
6x6) but the tuner issues these solves by the hundred thousand, so the
inner loop is compiled with numba. A wide box |y_k| <= 1e7 and a cap
t <= 1e6 keep the barrier problem bounded for degenerate inputs; they
are far outside the region any platoon certificate lives in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ParameterError
from .model import ClosedLoopMatrices

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
NUMERICAL_FAILURE = "numerical_failure"

_Y_BOX = 1.0e7
_T_CAP = 1.0e6
_DEFAULT_TOL_FEAS = 1e-7
_DEFAULT_GAP_TOL = 1e-9
_DEFAULT_MAX_NEWTON = 4000

# indices of the upper triangle of a symmetric 4x4, row-major
_TRIU4 = [(0, 0), (0, 1), (0, 2), (0, 3), (1, 1), (1, 2), (1, 3), (2, 2), (2, 3), (3, 3)]


@dataclass(frozen=True)
class AffineLmiSystem:
    """Constraints F0_j + sum_k y_k F_jk < 0, all blocks symmetric.

    F0: list of (d_j, d_j) arrays
    F: list of (n_vars, d_j, d_j) arrays, one slab per variable
    """

    F0: tuple[np.ndarray, ...]
    F: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.F0) != len(self.F) or len(self.F0) == 0:
            raise ParameterError("need one coefficient slab per constraint block")
        n = self.F[0].shape[0]
        for F0j, Fj in zip(self.F0, self.F):
            d = F0j.shape[0]
            if F0j.shape != (d, d) or Fj.shape != (n, d, d):
                raise ParameterError("inconsistent block shapes in LMI system")
            if not np.allclose(F0j, F0j.T, atol=1e-12):
                raise ParameterError("constraint blocks must be symmetric")
            if not np.allclose(Fj, np.transpose(Fj, (0, 2, 1)), atol=1e-12):
                raise ParameterError("coefficient blocks must be symmetric")

    @property
    def n_vars(self) -> int:
        return self.F[0].shape[0]

    @property
    def n_constraints(self) -> int:
        return len(self.F0)


@dataclass(frozen=True)
class FeasibilityResult:
    """Outcome of one margin-program solve."""

    status: str
    y: np.ndarray
    t_star: float
    margin: float  # independently verified min_j(-lambda_max) at y
    upper_bound: float  # certified upper bound on the achievable t
    newton_steps: int


def pack_system(system: AffineLmiSystem) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pad the blocks of an AffineLmiSystem into dense kernel arrays."""
    m = system.n_constraints
    n = system.n_vars
    d = max(F0j.shape[0] for F0j in system.F0)
    F0p = np.zeros((m, d, d))
    Fp = np.zeros((m, n, d, d))
    sizes = np.zeros(m, dtype=np.int64)
    for j, (F0j, Fj) in enumerate(zip(system.F0, system.F)):
        dj = F0j.shape[0]
        sizes[j] = dj
        F0p[j, :dj, :dj] = F0j
        Fp[j, :, :dj, :dj] = Fj
    return F0p, Fp, sizes


@njit(cache=True)
def _chol(A, d, L):
    """Lower Cholesky of the leading d x d block; False if not PD."""
    for i in range(d):
        for j in range(i + 1):
            s = A[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            if i == j:
                if s <= 0.0:
                    return False
                L[i, i] = np.sqrt(s)
            else:
                L[i, j] = s / L[j, j]
    return True


@njit(cache=True)
def _assemble_S(F0p, Fp, sizes, y, t, j, S):
    """S_j = -(F0_j + sum_k y_k F_jk + t I) on the leading block."""
    d = sizes[j]
    n = Fp.shape[1]
    for a in range(d):
        for b in range(d):
            v = F0p[j, a, b]
            for k in range(n):
                v += y[k] * Fp[j, k, a, b]
            S[a, b] = -v
        S[a, a] -= t
    return d


@njit(cache=True)
def _barrier_value(F0p, Fp, sizes, y, t, tau, t_cap, box, S, L):
    """tau*(-t) plus all barrier terms; +inf when out of domain."""
    m = F0p.shape[0]
    n = Fp.shape[1]
    if t >= t_cap:
        return np.inf
    for k in range(n):
        if abs(y[k]) >= box:
            return np.inf
    val = -tau * t - np.log(t_cap - t)
    for k in range(n):
        val -= np.log(box - y[k]) + np.log(box + y[k])
    for j in range(m):
        d = _assemble_S(F0p, Fp, sizes, y, t, j, S)
        if not _chol(S, d, L):
            return np.inf
        for i in range(d):
            val -= 2.0 * np.log(L[i, i])
    return val


@njit(cache=True)
def _margin_kernel(F0p, Fp, sizes, y0, t_cap, box, gap_tol, tol_feas, max_steps, mu):
    """Path-following barrier for the margin program.

    Returns (y, t, bound, code, steps) where bound is a certified upper
    bound on t* - t at exit and code is 0 (gap target reached), 1
    (stopped early: t* certified below tol_feas), 2 (numerical failure).
    """
    m = F0p.shape[0]
    n = Fp.shape[1]
    nz = n + 1
    dmax = F0p.shape[2]

    ndeg = 1.0 + 2.0 * n  # t-cap plus box terms
    for j in range(m):
        ndeg += sizes[j]

    y = np.empty(n)
    for k in range(n):
        v = y0[k]
        if v > 0.9 * box:
            v = 0.9 * box
        elif v < -0.9 * box:
            v = -0.9 * box
        y[k] = v

    # strictly feasible t from Gershgorin upper bounds
    S = np.empty((dmax, dmax))
    L = np.empty((dmax, dmax))
    gmax = -np.inf
    for j in range(m):
        d = _assemble_S(F0p, Fp, sizes, y, 0.0, j, S)
        for a in range(d):
            r = -S[a, a]
            for b in range(d):
                if b != a:
                    r += abs(S[a, b])
            if r > gmax:
                gmax = r
    t = -gmax - 1.0
    if t > 0.5 * t_cap:
        t = 0.5 * t_cap

    Sinv = np.empty((dmax, dmax))
    Li = np.empty((dmax, dmax))
    B = np.empty((nz, dmax, dmax))
    g = np.empty(nz)
    H = np.empty((nz, nz))
    dz = np.empty(nz)
    ytr = np.empty(n)
    HL = np.empty((nz, nz))

    tau = 1.0
    steps = 0
    code = 2
    bound = np.inf
    while steps < max_steps:
        # gradient and Hessian of the barrier at (y, t)
        for a in range(nz):
            g[a] = 0.0
            for b in range(nz):
                H[a, b] = 0.0
        g[n] = -tau
        ok = True
        for j in range(m):
            d = _assemble_S(F0p, Fp, sizes, y, t, j, S)
            if not _chol(S, d, L):
                ok = False
                break
            # Li = L^{-1}, Sinv = Li' Li
            for a in range(d):
                for b in range(d):
                    Li[a, b] = 0.0
                Li[a, a] = 1.0
            for col in range(d):
                for i in range(col, d):
                    s = Li[i, col]
                    for k in range(col, i):
                        s -= L[i, k] * Li[k, col]
                    Li[i, col] = s / L[i, i]
            for a in range(d):
                for b in range(a + 1):
                    s = 0.0
                    for k in range(max(a, b), d):
                        s += Li[k, a] * Li[k, b]
                    Sinv[a, b] = s
                    Sinv[b, a] = s
            # B_k = Sinv @ F_jk, B_t = Sinv
            for k in range(n):
                for a in range(d):
                    for b in range(d):
                        s = 0.0
                        for c in range(d):
                            s += Sinv[a, c] * Fp[j, k, c, b]
                        B[k, a, b] = s
            for a in range(d):
                for b in range(d):
                    B[n, a, b] = Sinv[a, b]
            for k in range(nz):
                tr = 0.0
                for a in range(d):
                    tr += B[k, a, a]
                g[k] += tr
            for a in range(nz):
                for b in range(a + 1):
                    s = 0.0
                    for p in range(d):
                        for q in range(d):
                            s += B[a, p, q] * B[b, q, p]
                    H[a, b] += s
                    if a != b:
                        H[b, a] += s
        if not ok:
            code = 2
            break
        # box and cap barrier terms
        for k in range(n):
            g[k] += 1.0 / (box - y[k]) - 1.0 / (box + y[k])
            H[k, k] += 1.0 / (box - y[k]) ** 2 + 1.0 / (box + y[k]) ** 2
        g[n] += 1.0 / (t_cap - t)
        H[n, n] += 1.0 / (t_cap - t) ** 2

        # Newton direction with escalating ridge regularization
        solved = False
        reg = 0.0
        hscale = 0.0
        for a in range(nz):
            if H[a, a] > hscale:
                hscale = H[a, a]
        for _ in range(8):
            for a in range(nz):
                for b in range(nz):
                    HL[a, b] = H[a, b]
                HL[a, a] += reg
            okh = True
            # in-place Cholesky on HL (L factors land in its lower triangle)
            for i in range(nz):
                for jj in range(i + 1):
                    s = HL[i, jj]
                    for k in range(jj):
                        s -= HL[i, k] * HL[jj, k]
                    if i == jj:
                        if s <= 0.0:
                            okh = False
                            break
                        HL[i, i] = np.sqrt(s)
                    else:
                        HL[i, jj] = s / HL[jj, jj]
                if not okh:
                    break
            if okh:
                for a in range(nz):
                    s = -g[a]
                    for b in range(a):
                        s -= HL[a, b] * dz[b]
                    dz[a] = s / HL[a, a]
                for a in range(nz - 1, -1, -1):
                    s = dz[a]
                    for b in range(a + 1, nz):
                        s -= HL[b, a] * dz[b]
                    dz[a] = s / HL[a, a]
                solved = True
                break
            reg = 1e-14 * hscale if reg == 0.0 else reg * 100.0
        if not solved:
            code = 2
            break

        lam2 = 0.0
        for a in range(nz):
            lam2 -= g[a] * dz[a]
        if not np.isfinite(lam2):
            code = 2
            break

        if lam2 <= 0.01:  # centered at this tau
            bound = 2.0 * ndeg / tau
            if t + bound < tol_feas:
                code = 1  # certified: no y reaches the feasibility margin
                break
            if ndeg / tau <= gap_tol:
                code = 0
                break
            tau *= mu
            continue

        lam = np.sqrt(lam2)
        alpha = 1.0 if lam < 0.25 else 1.0 / (1.0 + lam)
        f0 = _barrier_value(F0p, Fp, sizes, y, t, tau, t_cap, box, S, L)
        accepted = False
        for _ in range(60):
            for k in range(n):
                ytr[k] = y[k] + alpha * dz[k]
            ttr = t + alpha * dz[n]
            ftr = _barrier_value(F0p, Fp, sizes, ytr, ttr, tau, t_cap, box, S, L)
            if ftr <= f0 - 0.25 * alpha * lam2:
                for k in range(n):
                    y[k] = ytr[k]
                t = ttr
                accepted = True
                break
            alpha *= 0.5
        steps += 1
        if not accepted:
            code = 2
            break

    if code != 2 and bound == np.inf:
        bound = 2.0 * ndeg / tau
    return y, t, bound, code, steps


def solve_feasibility(
    system: AffineLmiSystem,
    tol_feas: float = _DEFAULT_TOL_FEAS,
    y0: np.ndarray | None = None,
    gap_tol: float = _DEFAULT_GAP_TOL,
    max_newton: int = _DEFAULT_MAX_NEWTON,
) -> FeasibilityResult:
    """Run the margin program on an affine LMI system.

    The solver is deterministic for fixed inputs. y0 seeds the path
    (default: origin); the answer does not depend on y0 beyond solver
    tolerance because the margin program is concave in (y, t).
    """
    if not (tol_feas > 0.0):
        raise ParameterError(f"tol_feas must be positive, got {tol_feas}")
    F0p, Fp, sizes = pack_system(system)
    if y0 is None:
        y0 = np.zeros(system.n_vars)
    else:
        y0 = np.asarray(y0, dtype=float)
        if y0.shape != (system.n_vars,):
            raise ParameterError(
                f"y0 must have shape ({system.n_vars},), got {y0.shape}"
            )
    y, t, bound, code, steps = _margin_kernel(
        F0p, Fp, sizes, y0, _T_CAP, _Y_BOX, gap_tol, tol_feas, max_newton, 20.0
    )
    status, margin = _classify(code, t, bound, tol_feas, system, y)
    if margin == -np.inf:
        margin = verified_margin(system, y)
    return FeasibilityResult(
        status=status,
        y=y,
        t_star=float(t),
        margin=float(margin),
        upper_bound=float(t + bound),
        newton_steps=int(steps),
    )


def verified_margin(system: AffineLmiSystem, y: np.ndarray) -> float:
    """min over constraints of -lambda_max(F0_j + sum_k y_k F_jk).

    Dense symmetric eigenvalue computation, independent of the barrier.
    """
    worst = np.inf
    for F0j, Fj in zip(system.F0, system.F):
        A = F0j + np.tensordot(y, Fj, axes=1)
        worst = min(worst, -float(np.linalg.eigvalsh(0.5 * (A + A.T))[-1]))
    return worst


def platoon_system(
    clm: ClosedLoopMatrices,
    Ts: float,
    Delta: int,
    delta: float,
    theta: float,
    h: float,
) -> AffineLmiSystem:
    """LMI system whose feasibility certifies one link for Delta drops.

    Decision variables: the 10 upper-triangle entries of P1 (row-major),
    then p2. Constraints: M(0) < 0, M((Delta+1)*Ts) < 0, -P1 < 0, -p2 < 0.
    """
    if Delta < 0:
        raise ParameterError(f"Delta must be >= 0, got {Delta}")
    if not (delta > 0.0):
        raise ParameterError(f"delta must be positive, got {delta}")
    if not (theta >= 1.0):
        raise ParameterError(f"theta must be >= 1, got {theta}")
    if not (Ts > 0.0 and h > 0.0):
        raise ParameterError("Ts and h must be positive")

    C = clm.C_omega
    F0_M = np.zeros((6, 6))
    F0_M[:4, :4] = np.outer(C, C)
    F0_M[:4, 4] = C
    F0_M[4, :4] = C
    F0_M[4, 4] = 1.0
    F0_M[5, 5] = -theta * theta

    def p1_slab():
        slab = np.zeros((10, 6, 6))
        for k, (i, j) in enumerate(_TRIU4):
            E = np.zeros((4, 4))
            E[i, j] = 1.0
            E[j, i] = 1.0
            if i == j:
                E[i, i] = 1.0
            EA = E @ clm.A_xx
            slab[k, :4, :4] = EA + EA.T
            v = E @ clm.A_xeta
            slab[k, :4, 4] = v
            slab[k, 4, :4] = v
            w = E @ clm.A_xomega
            slab[k, :4, 5] = w
            slab[k, 5, :4] = w
        return slab

    def p2_block(scale):
        Kb = np.zeros((6, 6))
        Kb[:4, 4] = scale * clm.A_etax
        Kb[4, :4] = scale * clm.A_etax
        Kb[4, 4] = -delta * scale
        Kb[4, 5] = -scale / h
        Kb[5, 4] = -scale / h
        return Kb

    base = p1_slab()
    s_end = float(np.exp(-delta * (Delta + 1) * Ts))

    F_M0 = np.concatenate([base, p2_block(1.0)[None, :, :]], axis=0)
    F_Mend = np.concatenate([base, p2_block(s_end)[None, :, :]], axis=0)

    F_P = np.zeros((11, 4, 4))
    for k, (i, j) in enumerate(_TRIU4):
        F_P[k, i, j] = -1.0
        F_P[k, j, i] = -1.0
    F_p2 = np.zeros((11, 1, 1))
    F_p2[10, 0, 0] = -1.0

    return AffineLmiSystem(
        F0=(F0_M, F0_M.copy(), np.zeros((4, 4)), np.zeros((1, 1))),
        F=(F_M0, F_Mend, F_P, F_p2),
    )


def identity_start() -> np.ndarray:
    """Initial iterate with P1 = I, p2 = 1 in the platoon variable order."""
    y0 = np.zeros(11)
    y0[0] = y0[4] = y0[7] = y0[9] = 1.0  # diagonal entries of P1
    y0[10] = 1.0
    return y0


def delta_provably_infeasible(delta: float, theta: float, h: float) -> bool:
    """True when no (P1, p2) can make M(0) negative definite at this delta.

    The principal submatrix of M(0) on the (eta, omega_prev) pair is
    [[-delta*p2 + 1, -p2/h], [-p2/h, -theta^2]]; its determinant,
    maximized over p2 > 0, is theta^2 * ((delta*theta*h/2)^2 - 1), so for
    delta*theta*h <= 2 the submatrix (hence M(0)) cannot be negative
    definite for any decision variables. Exact, not a heuristic: the
    margin program's optimum is <= 0 whenever this returns True.
    """
    return delta * theta * h <= 2.0


def _classify(code: int, t: float, bound: float, tol_feas: float,
              system_or_none, y: np.ndarray) -> tuple[str, float]:
    """Shared status classification; returns (status, verified_margin)."""
    margin = -np.inf
    if code in (0, 1) and t >= tol_feas:
        if system_or_none is not None:
            margin = verified_margin(system_or_none, y)
        if margin >= tol_feas:
            return FEASIBLE, margin
        return NUMERICAL_FAILURE, margin
    if code in (0, 1) and t <= 0.0 and t + bound < tol_feas:
        return INFEASIBLE, margin
    return NUMERICAL_FAILURE, margin


class PlatoonFeasibility:
    """Reusable margin-program solver for one link's closed loop.

    Repeated feasibility probes during tuning differ only in the hold
    duration (Delta+1)*Ts and the decay rate delta, which touch nine
    entries of the p2 coefficient slab. This keeps the packed kernel
    arrays alive and rewrites just those entries per probe; results are
    identical to platoon_system + solve_feasibility (asserted in tests).
    """

    def __init__(self, clm: ClosedLoopMatrices, Ts: float, theta: float, h: float,
                 tol_feas: float = _DEFAULT_TOL_FEAS, gap_tol: float = _DEFAULT_GAP_TOL):
        self._template = platoon_system(clm, Ts, 0, 1.0, theta, h)
        self.F0p, self.Fp, self.sizes = pack_system(self._template)
        self.clm = clm
        self.Ts = Ts
        self.theta = theta
        self.h = h
        self.tol_feas = tol_feas
        self.gap_tol = gap_tol

    def _write_p2_slab(self, j: int, scale: float, delta: float) -> None:
        slab = self.Fp[j, 10]
        v = scale * self.clm.A_etax[3]
        slab[3, 4] = v
        slab[4, 3] = v
        slab[4, 4] = -delta * scale
        slab[4, 5] = -scale / self.h
        slab[5, 4] = -scale / self.h

    def solve(self, Delta: int, delta: float,
              y0: np.ndarray | None = None) -> FeasibilityResult:
        if Delta < 0 or not (delta > 0.0):
            raise ParameterError(f"need Delta >= 0 and delta > 0, got {Delta}, {delta}")
        s_end = float(np.exp(-delta * (Delta + 1) * self.Ts))
        self._write_p2_slab(0, 1.0, delta)
        self._write_p2_slab(1, s_end, delta)
        if y0 is None:
            y0 = identity_start()
        y, t, bound, code, steps = _margin_kernel(
            self.F0p, self.Fp, self.sizes, y0, _T_CAP, _Y_BOX,
            self.gap_tol, self.tol_feas, _DEFAULT_MAX_NEWTON, 20.0,
        )
        system = None
        if code in (0, 1) and t >= self.tol_feas:
            system = platoon_system(self.clm, self.Ts, Delta, delta, self.theta, self.h)
        status, margin = _classify(code, t, bound, self.tol_feas, system, y)
        return FeasibilityResult(
            status=status, y=y, t_star=float(t), margin=float(margin),
            upper_bound=float(t + bound), newton_steps=int(steps),
        )
