"""One-parameter gain families that place the error poles on target.

The spacing-error block has characteristic polynomial
s^3 + s^2/tau_d + kd*s/tau_d + kp/tau_d. Two closed-form branches keep
the dominant dynamics exactly at lambda_M while sweeping kp:

C1: a real eigenvalue pinned at lambda_M, the remaining quadratic
    rho1(s) = s^2 + ((lambda_M*tau_d + 1)/tau_d) s - kp/(lambda_M*tau_d)
    kept no slower than lambda_M and no less damped than zeta_m.

C2: a complex pair pinned at real part lambda_M, the leftover real
    eigenvalue at -(2*lambda_M*tau_d + 1)/tau_d, always faster.

Both need lambda_M > -1/(3*tau_d); outside that the quadratic factor
would be slower than the pinned dynamics for every admissible kp.
kp_lower = lambda_M^2*(2*lambda_M*tau_d + 1) is shared: it is where the
C1 quadratic's upper root reaches lambda_M and where the C2 pair's
damping reaches 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConditionError, DomainError, ParameterError
from .model import Gains, PerformanceSpec

C1 = "C1"
C2 = "C2"


@dataclass(frozen=True)
class LocusBranch:
    """A kp interval plus the closed-form kd map for one branch."""

    branch: str
    kp_lower: float
    kp_upper: float
    lower_inclusive: bool
    empty: bool


def _validate(lambda_M: float, tau_d: float) -> None:
    if not (tau_d > 0.0):
        raise ParameterError(f"tau_d must be positive, got {tau_d}")
    if not (lambda_M < 0.0):
        raise ParameterError(f"lambda_M must be negative, got {lambda_M}")
    if not (lambda_M > -1.0 / (3.0 * tau_d)):
        raise ConditionError(
            f"need lambda_M > -1/(3*tau_d) = {-1.0 / (3.0 * tau_d):.6g} "
            f"(dominant pole too fast for powertrain lag tau_d={tau_d:g}), "
            f"got lambda_M={lambda_M:g}"
        )


def _shared_kp_lower(lambda_M: float, tau_d: float) -> float:
    return lambda_M**2 * (2.0 * lambda_M * tau_d + 1.0)


def c1_bounds(lambda_M: float, zeta_m: float, tau_d: float) -> LocusBranch:
    """kp interval of the pinned-real-eigenvalue branch (closed interval).

    zeta_m = 1 is allowed: the quadratic factor may be critically damped.
    """
    _validate(lambda_M, tau_d)
    if not (0.0 < zeta_m <= 1.0):
        raise DomainError(f"zeta_m must lie in (0, 1] for this branch, got {zeta_m}")
    lo = _shared_kp_lower(lambda_M, tau_d)
    hi = -lambda_M * (lambda_M * tau_d + 1.0) ** 2 / (4.0 * tau_d * zeta_m**2)
    return LocusBranch(C1, lo, hi, lower_inclusive=True, empty=not (lo < hi))


def c1_kd(kp: float, lambda_M: float, tau_d: float) -> float:
    """kd that pins a real eigenvalue at lambda_M for the given kp."""
    _validate(lambda_M, tau_d)
    if not (kp > 0.0):
        raise DomainError(f"kp must be positive, got {kp}")
    return -kp / lambda_M - lambda_M**2 * tau_d - lambda_M


def c2_bounds(lambda_M: float, zeta_m: float, tau_d: float) -> LocusBranch:
    """kp interval of the pinned-complex-pair branch (lower bound excluded).

    Requires zeta_m strictly inside (0, 1): at zeta_m = 1 the pair
    degenerates to a repeated real eigenvalue and the branch vanishes.
    """
    _validate(lambda_M, tau_d)
    if not (0.0 < zeta_m < 1.0):
        raise DomainError(
            f"zeta_m must lie strictly inside (0, 1) for this branch, got {zeta_m}"
        )
    lo = _shared_kp_lower(lambda_M, tau_d)
    hi = lo / zeta_m**2
    return LocusBranch(C2, lo, hi, lower_inclusive=False, empty=not (lo < hi))


def c2_kd(kp: float, lambda_M: float, tau_d: float) -> float:
    """kd that pins the complex pair's real part at lambda_M.

    Equivalent to matching s^3 + s^2/tau_d + kd*s/tau_d + kp/tau_d with
    (s + (2*lambda_M*tau_d + 1)/tau_d)(s^2 - 2*lambda_M*s + kp/(2*lambda_M*tau_d + 1)).
    """
    _validate(lambda_M, tau_d)
    if not (kp > 0.0):
        raise DomainError(f"kp must be positive, got {kp}")
    den = 2.0 * lambda_M * tau_d + 1.0
    return -(8.0 * lambda_M**3 * tau_d**2 + 8.0 * lambda_M**2 * tau_d
             + 2.0 * lambda_M - tau_d * kp) / den


def enumerate_locus(
    spec: PerformanceSpec, tau_d: float, n_k1: int, n_k2: int
) -> list[tuple[str, Gains]]:
    """Grid both branches into (branch, Gains) candidates.

    C1: n_k1 uniformly spaced kp over its closed interval (endpoints in).
    C2: n_k2 uniformly spaced kp over its half-open interval, starting one
    step above the excluded lower bound and ending at the upper bound.
    An empty branch contributes no candidates.
    """
    if n_k1 < 1 or n_k2 < 0:
        raise ParameterError(f"grid sizes must satisfy n_k1 >= 1, n_k2 >= 0, got {n_k1}, {n_k2}")
    out: list[tuple[str, Gains]] = []
    b1 = c1_bounds(spec.lambda_M, spec.zeta_m, tau_d)
    if not b1.empty:
        for kp in np.linspace(b1.kp_lower, b1.kp_upper, n_k1):
            out.append((C1, Gains(float(kp), c1_kd(float(kp), spec.lambda_M, tau_d))))
    if spec.zeta_m < 1.0 and n_k2 > 0:
        b2 = c2_bounds(spec.lambda_M, spec.zeta_m, tau_d)
        if not b2.empty:
            step = (b2.kp_upper - b2.kp_lower) / n_k2
            for j in range(1, n_k2 + 1):
                kp = b2.kp_lower + j * step
                out.append((C2, Gains(float(kp), c2_kd(float(kp), spec.lambda_M, tau_d))))
    return out
