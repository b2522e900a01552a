"""Vehicle, spacing-policy, and closed-loop error models.

Every vehicle is a third-order longitudinal model (position, speed,
acceleration) with powertrain lag tau_d; the spacing policy is constant
time gap, d_des = r + h*v. Each follower runs a PD controller on its
spacing error plus a feedforward of the predecessor's commanded input,
filtered through the time-gap dynamics:

    h * u_i' = -u_i + (kp*e_i + kd*e_i' + uhat_prev)

where uhat_prev is a zero-order-hold copy of the predecessor command,
refreshed only when a V2V packet gets through. With the hold mismatch
eta = uhat_prev - u_prev as an extra state, one link of the platoon is
the linear hybrid system

    xtilde = (e, e', e'', u_prev)
    xtilde' = A_xx xtilde + A_xeta * eta + A_xomega * omega_prev
    eta'    = A_etax xtilde - omega_prev / h
    omega_i = C_omega xtilde + eta

which flows between transmissions and jumps (eta, timer) -> (0, 0) on a
successful reception. This module builds those matrices and checks the
pole-placement performance target on the 3x3 spacing-error block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class PlatoonParams:
    """Physical platoon constants shared by every vehicle.

    h: time gap of the spacing policy, s (> 0)
    tau_d: powertrain lag, s (> 0)
    Ts: inter-transmission interval of the V2V link, s (> 0)
    m: number of follower vehicles (>= 1)
    """

    h: float
    tau_d: float
    Ts: float
    m: int

    def __post_init__(self):
        if not (self.h > 0.0):
            raise ParameterError(f"time gap h must be positive, got {self.h}")
        if not (self.tau_d > 0.0):
            raise ParameterError(f"powertrain lag tau_d must be positive, got {self.tau_d}")
        if not (self.Ts > 0.0):
            raise ParameterError(f"transmission interval Ts must be positive, got {self.Ts}")
        if self.m < 1:
            raise ParameterError(f"need at least one follower, got m={self.m}")


@dataclass(frozen=True)
class PerformanceSpec:
    """Pole-placement target for the spacing-error dynamics.

    lambda_M: required dominant (slowest) real part, < 0
    zeta_m: minimum damping ratio for complex eigenvalue pairs, in (0, 1]
    """

    lambda_M: float
    zeta_m: float

    def __post_init__(self):
        if not (self.lambda_M < 0.0):
            raise ParameterError(f"lambda_M must be negative, got {self.lambda_M}")
        if not (0.0 < self.zeta_m <= 1.0):
            raise ParameterError(f"zeta_m must lie in (0, 1], got {self.zeta_m}")


@dataclass(frozen=True)
class Gains:
    """PD gains of the spacing-error controller (kp, kd > 0)."""

    kp: float
    kd: float

    def __post_init__(self):
        if not (self.kp > 0.0):
            raise ParameterError(f"kp must be positive, got {self.kp}")
        if not (self.kd > 0.0):
            raise ParameterError(f"kd must be positive, got {self.kd}")


@dataclass(frozen=True)
class ClosedLoopMatrices:
    """Flow-map matrices of one platoon link.

    A_e: 3x3 spacing-error block (companion form)
    A_xx: 4x4 flow matrix of xtilde = (e, e', e'', u_prev)
    A_xeta: 4-vector, coupling of the hold mismatch into xtilde
    A_xomega: 4-vector, coupling of the upstream performance output
    A_etax: 4-vector, row that drives eta along the flow
    C_omega: 4-vector, performance output row (omega = C_omega x + eta)
    """

    A_e: np.ndarray
    A_xx: np.ndarray
    A_xeta: np.ndarray
    A_xomega: np.ndarray
    A_etax: np.ndarray
    C_omega: np.ndarray


def build_error_matrix(gains: Gains, tau_d: float) -> np.ndarray:
    """3x3 companion matrix of the spacing-error dynamics.

    Characteristic polynomial: s^3 + s^2/tau_d + kd*s/tau_d + kp/tau_d.
    """
    if not (tau_d > 0.0):
        raise ParameterError(f"tau_d must be positive, got {tau_d}")
    return np.array(
        [
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [-gains.kp / tau_d, -gains.kd / tau_d, -1.0 / tau_d],
        ]
    )


def build_closed_loop(gains: Gains, params: PlatoonParams) -> ClosedLoopMatrices:
    """Assemble the per-link hybrid flow matrices for given gains."""
    h, tau_d = params.h, params.tau_d
    A_e = build_error_matrix(gains, tau_d)
    A_xx = np.zeros((4, 4))
    A_xx[:3, :3] = A_e
    A_xx[3, 3] = -1.0 / h
    A_xeta = np.array([0.0, 0.0, -1.0 / tau_d, 0.0])
    A_xomega = np.array([0.0, 0.0, 0.0, 1.0 / h])
    A_etax = np.array([0.0, 0.0, 0.0, 1.0 / h])
    C_omega = np.array([gains.kp, gains.kd, 0.0, 1.0])
    return ClosedLoopMatrices(A_e, A_xx, A_xeta, A_xomega, A_etax, C_omega)


def _cubic_roots(a: float, b: float, c: float) -> np.ndarray:
    """Roots of s^3 + a s^2 + b s + c, analytically.

    Depressed-cubic path: trigonometric form for three real roots,
    Cardano (with the numerically stable cube-root pairing) otherwise.
    """
    p = b - a * a / 3.0
    q = 2.0 * a**3 / 27.0 - a * b / 3.0 + c
    shift = -a / 3.0
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    if disc < 0.0:
        # three distinct real roots
        rho = np.sqrt(-(p**3) / 27.0)
        theta = np.arccos(np.clip(-q / (2.0 * rho), -1.0, 1.0))
        r = 2.0 * np.sqrt(-p / 3.0)
        t = r * np.cos((theta + 2.0 * np.pi * np.arange(3)) / 3.0)
        return t + shift
    # one real root, possibly a complex pair (disc == 0: repeated roots)
    sq = np.sqrt(disc)
    # pick the cube root with the larger magnitude to avoid cancellation
    u3 = -q / 2.0 + sq if q <= 0.0 else -q / 2.0 - sq
    u = np.cbrt(u3)
    v = 0.0 if u == 0.0 else p / (-3.0 * u)  # u*v = -p/3
    t_real = u + v
    re = -t_real / 2.0
    im = (u - v) * np.sqrt(3.0) / 2.0
    return np.array(
        [t_real + shift, re + shift + 1j * im, re + shift - 1j * im], dtype=complex
    )


def _polish(roots: np.ndarray, a: float, b: float, c: float) -> np.ndarray:
    """One guarded complex Newton step per root on the original cubic."""
    roots = roots.astype(complex)
    for _ in range(2):
        f = ((roots + a) * roots + b) * roots + c
        df = (3.0 * roots + 2.0 * a) * roots + b
        step = np.where(np.abs(df) > 0.0, f / np.where(df == 0, 1.0, df), 0.0)
        ok = np.abs(step) < 0.1 * (1.0 + np.abs(roots))
        roots = roots - np.where(ok, step, 0.0)
    return roots


def eigenvalues_3x3(A: np.ndarray) -> np.ndarray:
    """Eigenvalues of a real 3x3 matrix via the analytic cubic solution.

    Returns the three eigenvalues sorted by descending real part, ties by
    ascending imaginary part. An exact conjugate pair is enforced when the
    imaginary parts are nonzero. Falls back to the LAPACK eigensolver if
    the analytic path leaves a large polynomial residual.
    """
    A = np.asarray(A, dtype=float)
    if A.shape != (3, 3):
        raise ParameterError(f"expected a 3x3 matrix, got shape {A.shape}")
    a = -np.trace(A)
    b = 0.5 * (np.trace(A) ** 2 - np.trace(A @ A))
    c = -np.linalg.det(A)
    roots = _polish(_cubic_roots(a, b, c), a, b, c)

    scale = 1.0 + max(abs(a), abs(b), abs(c))
    resid = np.max(np.abs(((roots + a) * roots + b) * roots + c))
    if not np.isfinite(resid) or resid > 1e-8 * scale**2:
        roots = _polish(np.linalg.eigvals(A).astype(complex), a, b, c)

    # enforce exact conjugate symmetry on a complex pair
    im = np.abs(roots.imag)
    if np.count_nonzero(im > 0.0) == 2:
        pair = np.argsort(-im)[:2]
        i, j = pair
        re = 0.5 * (roots[i].real + roots[j].real)
        om = 0.5 * (abs(roots[i].imag) + abs(roots[j].imag))
        roots[i] = re + 1j * om
        roots[j] = re - 1j * om

    order = np.lexsort((roots.imag, -roots.real))
    return roots[order]


def check_performance(
    A: np.ndarray, spec: PerformanceSpec, tol: float = 5e-3
) -> bool:
    """True iff the spectrum of A meets the pole-placement target.

    Requires the maximum real part to equal spec.lambda_M within tol and
    every complex-conjugate pair a +- jb (b != 0) to have damping ratio
    -a / sqrt(a^2 + b^2) >= spec.zeta_m - tol.
    """
    eigs = eigenvalues_3x3(A)
    if abs(np.max(eigs.real) - spec.lambda_M) > tol:
        return False
    im_thresh = 1e-8 * (1.0 + np.max(np.abs(eigs)))
    for lam in eigs:
        if lam.imag > im_thresh:  # one representative per conjugate pair
            damping = -lam.real / abs(lam)
            if damping < spec.zeta_m - tol:
                return False
    return True
