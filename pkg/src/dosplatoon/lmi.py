"""Timer-dependent matrix inequality and certificate verification.

Stability plus an L2 gain bound theta from omega_prev to omega_i for one
platoon link, robust to up to Delta consecutive packet drops, follows
from a Lyapunov function

    V(x) = xtilde' P1 xtilde + p2 * eta^2 * exp(-delta * sigma)

whose flow condition is M(sigma) < 0 on sigma in [0, (Delta+1)*Ts], with

    M(sigma) = [ He(P1 A_xx) + C'C   P1 A_xeta + C' + E p2 A_etax'   P1 A_xomega ]
               [        .                 -delta p2 E + 1            -E p2 / h   ]
               [        .                        .                    -theta^2   ]

where E = exp(-delta*sigma) and C = C_omega. M is affine in E, so it is
negative definite on the whole interval iff it is at the two endpoints
(the segment between the endpoint matrices contains M(sigma) for every
interior sigma). Verification here is by dense symmetric eigenvalue
computation only; it shares no code with the feasibility solver.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .model import ClosedLoopMatrices

_DEFAULT_MARGIN = 1e-7


@dataclass(frozen=True)
class StabilityCertificate:
    """A candidate Lyapunov certificate for one platoon link.

    P1: 4x4 symmetric positive definite matrix
    p2: positive scalar
    delta: decay rate of the hold-mismatch term, > 0
    theta: certified L2 gain bound, >= 1
    Delta: number of consecutive drops the certificate covers, >= 0
    """

    P1: np.ndarray
    p2: float
    delta: float
    theta: float
    Delta: int

    def __post_init__(self):
        P1 = np.asarray(self.P1, dtype=float)
        if P1.shape != (4, 4):
            raise ParameterError(f"P1 must be 4x4, got shape {P1.shape}")
        if not np.allclose(P1, P1.T, atol=1e-12):
            raise ParameterError("P1 must be symmetric")
        object.__setattr__(self, "P1", 0.5 * (P1 + P1.T))
        if not (self.p2 > 0.0):
            raise ParameterError(f"p2 must be positive, got {self.p2}")
        if not (self.delta > 0.0):
            raise ParameterError(f"delta must be positive, got {self.delta}")
        if not (self.theta >= 1.0):
            raise ParameterError(f"theta must be >= 1, got {self.theta}")
        if self.Delta < 0:
            raise ParameterError(f"Delta must be >= 0, got {self.Delta}")


def assemble_M(
    sigma: float,
    cert: StabilityCertificate,
    clm: ClosedLoopMatrices,
    h: float,
) -> np.ndarray:
    """The 6x6 flow-condition matrix M(sigma)."""
    if sigma < 0.0:
        raise ParameterError(f"sigma must be >= 0, got {sigma}")
    P1, p2, delta, theta = cert.P1, cert.p2, cert.delta, cert.theta
    C = clm.C_omega
    E = np.exp(-delta * sigma)
    M = np.zeros((6, 6))
    PA = P1 @ clm.A_xx
    M[:4, :4] = PA + PA.T + np.outer(C, C)
    M[:4, 4] = P1 @ clm.A_xeta + C + E * p2 * clm.A_etax
    M[:4, 5] = P1 @ clm.A_xomega
    M[4, 4] = -delta * p2 * E + 1.0
    M[4, 5] = -E * p2 / h
    M[5, 5] = -theta * theta
    M[4, :4] = M[:4, 4]
    M[5, :4] = M[:4, 5]
    M[5, 4] = M[4, 5]
    return M


def endpoint_matrices(
    cert: StabilityCertificate,
    clm: ClosedLoopMatrices,
    Ts: float,
    h: float,
) -> tuple[np.ndarray, np.ndarray]:
    """M at sigma = 0 and sigma = (Delta+1)*Ts, the extreme holds."""
    if not (Ts > 0.0):
        raise ParameterError(f"Ts must be positive, got {Ts}")
    return (
        assemble_M(0.0, cert, clm, h),
        assemble_M((cert.Delta + 1) * Ts, cert, clm, h),
    )


def interior_blend(sigma: float, delta: float, sigma_end: float) -> float:
    """Convex weight lam with M(sigma) = lam*M(0) + (1-lam)*M(sigma_end)."""
    if not (0.0 <= sigma <= sigma_end):
        raise ParameterError(f"sigma={sigma} outside [0, {sigma_end}]")
    e_end = np.exp(-delta * sigma_end)
    return (np.exp(-delta * sigma) - e_end) / (1.0 - e_end)


@dataclass(frozen=True)
class VerificationReport:
    """Outcome of the independent eigenvalue check of a certificate."""

    passed: bool
    lambda_max_M0: float
    lambda_max_Mend: float
    lambda_min_P1: float
    p2: float
    max_interior_lambda: float
    failures: tuple[str, ...] = field(default_factory=tuple)


def verify_certificate(
    cert: StabilityCertificate,
    clm: ClosedLoopMatrices,
    Ts: float,
    h: float,
    margin: float = _DEFAULT_MARGIN,
    n_interior: int = 100,
) -> VerificationReport:
    """Check a certificate by dense eigenvalue computation alone.

    Requires lambda_max of both endpoint matrices < -margin, lambda_min(P1)
    > margin, p2 > margin, and lambda_max(M(sigma)) < 0 on n_interior
    uniformly spaced interior sigma samples.
    """
    M0, Mend = endpoint_matrices(cert, clm, Ts, h)
    lam0 = float(np.linalg.eigvalsh(M0)[-1])
    lam_end = float(np.linalg.eigvalsh(Mend)[-1])
    lam_p1 = float(np.linalg.eigvalsh(cert.P1)[0])

    sigma_end = (cert.Delta + 1) * Ts
    max_int = -np.inf
    for sigma in np.linspace(0.0, sigma_end, n_interior + 2)[1:-1]:
        M = assemble_M(float(sigma), cert, clm, h)
        max_int = max(max_int, float(np.linalg.eigvalsh(M)[-1]))

    failures = []
    if not lam0 < -margin:
        failures.append(f"M(0) not negative definite: lambda_max = {lam0:g}")
    if not lam_end < -margin:
        failures.append(
            f"M({sigma_end:g}) not negative definite: lambda_max = {lam_end:g}"
        )
    if not lam_p1 > margin:
        failures.append(f"P1 not positive definite: lambda_min = {lam_p1:g}")
    if not cert.p2 > margin:
        failures.append(f"p2 not positive: {cert.p2:g}")
    if n_interior > 0 and not max_int < 0.0:
        failures.append(f"interior sample not negative definite: lambda_max = {max_int:g}")

    return VerificationReport(
        passed=not failures,
        lambda_max_M0=lam0,
        lambda_max_Mend=lam_end,
        lambda_min_P1=lam_p1,
        p2=cert.p2,
        max_interior_lambda=float(max_int) if n_interior > 0 else float("nan"),
        failures=tuple(failures),
    )
