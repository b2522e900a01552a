"""Hybrid simulator for a CACC platoon under lossy sampled communication.

Vehicles keep a constant time-gap spacing: the error of follower i is
e_i = (q_{i-1} - q_i - L) - (r + h*v_i). Each powertrain is a first
order lag a_dot = (-a + u)/tau_d; each follower runs

    h * du_i/dt = -u_i + kp*e_i + kd*de_i/dt + uhat_{i-1},

where uhat_{i-1} is the predecessor command held in zero-order-hold
fashion between successful receptions. Every link transmits once per
Ts; the attack schedule marks each transmission delivered or dropped.
A delivered transmission refreshes the hold with u_{i-1}(t) and resets
the link timer sigma_i to zero; a drop leaves both alone.

The chain is driven through vehicle 0 the same way every other vehicle
is driven: the exogenous maneuver profile is the leader's performance
input omega_0, and the leader's control input is its filtered version
h * du_0/dt = -u_0 + omega_0. With that convention every link, the
first included, is an instance of the same input-output block, so the
certified per-link L2 gain applies along the whole string. Follower 1
receives u_0 over the same lossy link semantics as the other links.

The per-vehicle performance output is omega_i = kp*e_i + kd*de_i/dt
+ uhat_{i-1} (the signal entering the h-filter that produces u_i) for
followers, and omega_0 is the exogenous profile itself.

The controller consumes the spacing error as an integrated state with
de_i/dt = v_{i-1} - v_i - h*a_i, which realizes the error-coordinate
closed loop exactly; positions integrate passively alongside, and
spacing_errors() recomputes e from them as an independent cross-check.

Flows integrate with classical fixed-step RK4, step Ts/substeps, so
transmission instants land exactly on step boundaries and a jump never
splits an integration step. Samples stored at a transmission instant
are post-jump; the event log keeps the pre-jump hold mismatch
eta = uhat - u_{i-1} and the timer value for Lyapunov bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConditionError, ParameterError, UndefinedRatioError
from .lmi import StabilityCertificate
from .model import Gains, PlatoonParams

_DEFAULT_R = 2.0
_DEFAULT_L = 4.5
_DEFAULT_V0 = 15.0


@dataclass(frozen=True)
class LeaderProfile:
    """Piecewise-constant exogenous maneuver input, right-continuous.

    segments: ordered (start_time, command) pairs; the first start must
    be 0 so the command is defined from t = 0 on. The command is the
    leader's performance input omega_0; its control input u_0 is the
    h-filtered response.
    """

    segments: tuple[tuple[float, float], ...]

    def __post_init__(self):
        segs = tuple((float(t), float(c)) for t, c in self.segments)
        if not segs:
            raise ParameterError("leader profile needs at least one segment")
        if segs[0][0] != 0.0:
            raise ParameterError(
                f"first leader segment must start at t=0, got {segs[0][0]}"
            )
        starts = [t for t, _ in segs]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ParameterError("leader segment start times must be strictly increasing")
        object.__setattr__(self, "segments", segs)

    @property
    def _starts(self) -> np.ndarray:
        return np.array([t for t, _ in self.segments])

    @property
    def _values(self) -> np.ndarray:
        return np.array([c for _, c in self.segments])

    def command(self, t: float) -> float:
        idx = int(np.searchsorted(self._starts, t, side="right")) - 1
        return float(self._values[max(idx, 0)])

    def sample(self, t: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self._starts, t, side="right") - 1
        return self._values[np.maximum(idx, 0)]

    @staticmethod
    def standard() -> "LeaderProfile":
        """Accelerate 2 m/s^2 on [1, 6) s, brake 4 m/s^2 on [16, 18.5) s."""
        return LeaderProfile(((0.0, 0.0), (1.0, 2.0), (6.0, 0.0), (16.0, -4.0), (18.5, 0.0)))

    @staticmethod
    def zero() -> "LeaderProfile":
        return LeaderProfile(((0.0, 0.0),))


def _max_drop_run(delivered: np.ndarray) -> int:
    worst = run = 0
    for ok in delivered:
        run = 0 if ok else run + 1
        worst = max(worst, run)
    return worst


@dataclass(frozen=True)
class AttackSchedule:
    """Per-link delivery pattern with a bounded run of consecutive drops.

    kind "none": every transmission succeeds. "worst_case": repeating
    Delta drops then one success, starting with a drop, identical on
    every link. "random": seeded per-link blocks of iota ~ U{0..Delta}
    drops followed by one success. "explicit": caller-supplied 1-based
    dropped transmission indices per link, checked against Delta.
    """

    kind: str
    Delta: int = 0
    seed: int | None = None
    explicit_drops: tuple[tuple[int, ...], ...] | None = None

    def __post_init__(self):
        if self.kind not in ("none", "worst_case", "random", "explicit"):
            raise ParameterError(f"unknown schedule kind {self.kind!r}")
        if self.Delta < 0:
            raise ParameterError(f"Delta must be >= 0, got {self.Delta}")
        if self.kind == "random" and self.seed is None:
            raise ParameterError("random schedule needs a seed")
        if self.kind == "explicit" and self.explicit_drops is None:
            raise ParameterError("explicit schedule needs explicit_drops")

    def realize(self, m: int, n_tx: int) -> np.ndarray:
        """Boolean (m, n_tx) array: delivered[i-1, k-1] for link i, transmission k."""
        out = np.ones((m, n_tx), dtype=bool)
        if self.kind == "none" or n_tx == 0:
            return out
        if self.kind == "worst_case":
            k = np.arange(1, n_tx + 1)
            out[:] = (k % (self.Delta + 1)) == 0
            return out
        if self.kind == "random":
            for link in range(1, m + 1):
                rng = np.random.default_rng((self.seed, link))
                row = []
                while len(row) < n_tx:
                    iota = int(rng.integers(0, self.Delta + 1))
                    row.extend([False] * iota + [True])
                out[link - 1] = row[:n_tx]
            return out
        if len(self.explicit_drops) != m:
            raise ParameterError(
                f"explicit_drops has {len(self.explicit_drops)} links, platoon has {m}"
            )
        for j, drops in enumerate(self.explicit_drops):
            for k in drops:
                if not (1 <= k <= n_tx):
                    raise ParameterError(
                        f"dropped transmission index {k} outside 1..{n_tx} on link {j + 1}"
                    )
                out[j, k - 1] = False
            worst = _max_drop_run(out[j])
            if worst > self.Delta:
                raise ParameterError(
                    f"explicit schedule has {worst} consecutive drops on link "
                    f"{j + 1}, exceeding Delta={self.Delta}"
                )
        return out


def worst_case_schedule(Delta: int, t_end: float, Ts: float) -> AttackSchedule:
    """Repeating Delta drops + one success on every link; first success
    lands at (Delta+1)*Ts."""
    if Delta < 0:
        raise ParameterError(f"Delta must be >= 0, got {Delta}")
    if t_end <= 0.0 or Ts <= 0.0:
        raise ParameterError("t_end and Ts must be positive")
    return AttackSchedule(kind="worst_case", Delta=Delta)


@dataclass
class PlatoonState:
    """Snapshot of the hybrid state. Arrays: q/v/a/u over vehicles 0..m
    (u_0 is the leader's input-filter state), e/uhat/sigma over
    followers 1..m (index shifted by one)."""

    q: np.ndarray
    v: np.ndarray
    a: np.ndarray
    u: np.ndarray
    e: np.ndarray
    uhat: np.ndarray
    sigma: np.ndarray

    def check(self, m: int):
        for name, arr, n in (("q", self.q, m + 1), ("v", self.v, m + 1),
                             ("a", self.a, m + 1), ("u", self.u, m + 1),
                             ("e", self.e, m), ("uhat", self.uhat, m),
                             ("sigma", self.sigma, m)):
            if np.asarray(arr).shape != (n,):
                raise ParameterError(f"init.{name} must have shape ({n},)")
        if np.any(self.sigma < 0.0):
            raise ParameterError("init.sigma must be nonnegative")


def equilibrium_state(params: PlatoonParams, v0: float = _DEFAULT_V0,
                      r: float = _DEFAULT_R, L: float = _DEFAULT_L) -> PlatoonState:
    """All vehicles at common speed v0, exact spacing, zero errors."""
    m = params.m
    gap = L + r + params.h * v0
    q = -gap * np.arange(m + 1, dtype=float)
    return PlatoonState(
        q=q,
        v=np.full(m + 1, float(v0)),
        a=np.zeros(m + 1),
        u=np.zeros(m + 1),
        e=np.zeros(m),
        uhat=np.zeros(m),
        sigma=np.zeros(m),
    )


@dataclass(frozen=True)
class SimTrace:
    """Uniform-grid trace plus the per-link transmission log.

    Column 0 of u carries the leader's filtered input and column 0 of
    omega the exogenous profile; e column 0 is zero. e columns 1..m are
    the integrated error states; spacing_errors() recomputes them from
    positions as a cross-check.
    """

    t: np.ndarray
    q: np.ndarray
    v: np.ndarray
    a: np.ndarray
    u: np.ndarray
    e: np.ndarray
    omega: np.ndarray
    uhat: np.ndarray
    sigma: np.ndarray
    event_t: np.ndarray
    event_link: np.ndarray
    event_delivered: np.ndarray
    event_eta_pre: np.ndarray
    event_sigma_pre: np.ndarray
    params: PlatoonParams
    gains: Gains
    r: float
    L: float


def simulate(params: PlatoonParams, gains: Gains, schedule: AttackSchedule,
             leader: LeaderProfile, t_end: float, substeps: int = 20,
             init: PlatoonState | None = None, r: float = _DEFAULT_R,
             L: float = _DEFAULT_L, v0: float = _DEFAULT_V0) -> SimTrace:
    """Integrate flows with RK4 and apply reception jumps at k*Ts.

    The first transmission happens at t = Ts; the sample stored at a
    transmission instant is the post-jump state. r and L locate the
    spacing policy; they cancel out of the error dynamics and only
    shift absolute positions.
    """
    if substeps < 1:
        raise ParameterError(f"substeps must be >= 1, got {substeps}")
    if t_end <= 0.0:
        raise ParameterError(f"t_end must be positive, got {t_end}")
    m = params.m
    h, tau_d, Ts = params.h, params.tau_d, params.Ts
    kp, kd = gains.kp, gains.kd

    if init is None:
        init = equilibrium_state(params, v0=v0, r=r, L=L)
    init.check(m)

    n_tx = int(np.floor(t_end / Ts + 1e-9))
    delivered = schedule.realize(m, n_tx)
    sigma_cap = (schedule.Delta + 1) * Ts + 1e-9

    bounds = [(k * Ts, k) for k in range(1, n_tx + 1)]
    if t_end - n_tx * Ts > 1e-9 * max(1.0, t_end):
        bounds.append((t_end, 0))

    uhat = np.array(init.uhat, dtype=float)
    sigma = np.array(init.sigma, dtype=float)

    nq = m + 1
    y = np.concatenate([np.asarray(init.q, dtype=float),
                        np.asarray(init.v, dtype=float),
                        np.asarray(init.a, dtype=float),
                        np.asarray(init.u, dtype=float),
                        np.asarray(init.e, dtype=float)])

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        vv = y[nq:2 * nq]
        av = y[2 * nq:3 * nq]
        uv = y[3 * nq:4 * nq]
        ev = y[4 * nq:]
        edot = vv[:-1] - vv[1:] - h * av[1:]
        dy = np.empty_like(y)
        dy[0:nq] = vv
        dy[nq:2 * nq] = av
        dy[2 * nq:3 * nq] = (-av + uv) / tau_d
        dy[3 * nq] = (-uv[0] + leader.command(t)) / h
        dy[3 * nq + 1:4 * nq] = (-uv[1:] + kp * ev + kd * edot + uhat) / h
        dy[4 * nq:] = edot
        return dy

    n_points = len(bounds) * substeps + 1
    t_rec = np.empty(n_points)
    q_rec = np.empty((n_points, nq))
    v_rec = np.empty((n_points, nq))
    a_rec = np.empty((n_points, nq))
    u_rec = np.empty((n_points, nq))
    e_rec = np.zeros((n_points, nq))
    w_rec = np.empty((n_points, nq))
    uhat_rec = np.empty((n_points, m))
    sigma_rec = np.empty((n_points, m))
    ev_t, ev_link, ev_del, ev_eta, ev_sig = [], [], [], [], []

    def record(idx: int, t: float):
        vv = y[nq:2 * nq]
        av = y[2 * nq:3 * nq]
        uv = y[3 * nq:4 * nq]
        ev = y[4 * nq:]
        edot = vv[:-1] - vv[1:] - h * av[1:]
        t_rec[idx] = t
        q_rec[idx] = y[0:nq]
        v_rec[idx] = vv
        a_rec[idx] = av
        u_rec[idx] = uv
        e_rec[idx, 1:] = ev
        w_rec[idx, 0] = leader.command(t)
        w_rec[idx, 1:] = kp * ev + kd * edot + uhat
        uhat_rec[idx] = uhat
        sigma_rec[idx] = sigma

    record(0, 0.0)
    idx = 1
    t0 = 0.0
    for t1, k in bounds:
        dt = (t1 - t0) / substeps
        for s in range(1, substeps + 1):
            t = t0 + (s - 1) * dt
            k1 = rhs(t, y)
            k2 = rhs(t + 0.5 * dt, y + 0.5 * dt * k1)
            k3 = rhs(t + 0.5 * dt, y + 0.5 * dt * k2)
            k4 = rhs(t + dt, y + dt * k3)
            y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            sigma = sigma + dt
            t_sample = t1 if s == substeps else t0 + s * dt
            if s == substeps and k > 0:
                assert np.all(sigma <= sigma_cap), "link timer left the flow set"
                u_pre = y[3 * nq:4 * nq - 1]
                col = delivered[:, k - 1]
                for j in range(m):
                    ev_t.append(t1)
                    ev_link.append(j + 1)
                    ev_del.append(int(col[j]))
                    ev_eta.append(uhat[j] - u_pre[j])
                    ev_sig.append(sigma[j])
                uhat = np.where(col, u_pre, uhat)
                sigma = np.where(col, 0.0, sigma)
            record(idx, t_sample)
            idx += 1
        t0 = t1

    return SimTrace(
        t=t_rec, q=q_rec, v=v_rec, a=a_rec, u=u_rec, e=e_rec, omega=w_rec,
        uhat=uhat_rec, sigma=sigma_rec,
        event_t=np.array(ev_t), event_link=np.array(ev_link, dtype=int),
        event_delivered=np.array(ev_del, dtype=int),
        event_eta_pre=np.array(ev_eta), event_sigma_pre=np.array(ev_sig),
        params=params, gains=gains, r=float(r), L=float(L),
    )


def spacing_errors(trace: SimTrace) -> np.ndarray:
    """Per-follower spacing errors recomputed from positions, (N, m).

    Cross-check target for the integrated error columns of the trace;
    the two evolve through different state variables and must agree to
    integration tolerance.
    """
    h = trace.params.h
    q, v = trace.q, trace.v
    return (q[:, :-1] - q[:, 1:] - trace.L) - (trace.r + h * v[:, 1:])


def max_overshoots(trace: SimTrace) -> np.ndarray:
    """Peak follower speed above the leader's peak, per follower."""
    return np.max(trace.v[:, 1:], axis=0) - np.max(trace.v[:, 0])


def final_abs_errors(trace: SimTrace) -> np.ndarray:
    return np.abs(spacing_errors(trace)[-1])


def l2_ratio(trace: SimTrace, i: int) -> float:
    """||omega_i|| / ||omega_{i-1}||, trapezoidal L2 norms on the grid."""
    if not (1 <= i <= trace.params.m):
        raise ParameterError(f"vehicle index must be in 1..{trace.params.m}, got {i}")
    num = np.trapezoid(trace.omega[:, i] ** 2, trace.t)
    den = np.trapezoid(trace.omega[:, i - 1] ** 2, trace.t)
    if den == 0.0:
        raise UndefinedRatioError(
            f"performance output of vehicle {i - 1} is identically zero"
        )
    return float(np.sqrt(num / den))


@dataclass(frozen=True)
class LyapunovReport:
    """V samples along the trace plus flow/jump monotonicity verdicts."""

    V: np.ndarray
    flow_violations: int
    jump_violations: int
    max_flow_increase: float
    tol: float
    passed: bool


def lyapunov_along_trace(trace: SimTrace, cert: StabilityCertificate,
                         gains: Gains, params: PlatoonParams, link: int = 1,
                         tol: float = 1e-9) -> LyapunovReport:
    """Evaluate V = x'P1x + p2*eta^2*exp(-delta*sigma) on one link.

    Requires the upstream performance output to vanish identically so
    the link subsystem is unforced; V must then be nonincreasing along
    flows and across reception jumps. x = (e, de, dde, u_prev) with the
    error taken from the integrated error state, matching the link
    realization the certificate refers to.
    """
    m = trace.params.m
    if not (1 <= link <= m):
        raise ParameterError(f"link must be in 1..{m}, got {link}")
    upstream = trace.omega[:, link - 1]
    if np.any(upstream != 0.0):
        raise ConditionError(
            "Lyapunov check needs the upstream performance output to be "
            f"identically zero; max |omega_{link - 1}| = {np.max(np.abs(upstream)):g}"
        )
    h, tau_d = params.h, params.tau_d
    e = trace.e[:, link]
    edot = trace.v[:, link - 1] - trace.v[:, link] - h * trace.a[:, link]
    u_self = trace.u[:, link]
    eddot = trace.a[:, link - 1] - trace.a[:, link] + (h / tau_d) * (trace.a[:, link] - u_self)
    x4 = trace.u[:, link - 1]
    eta = trace.uhat[:, link - 1] - x4
    sig = trace.sigma[:, link - 1]

    X = np.stack([e, edot, eddot, x4], axis=1)
    V = np.einsum("ni,ij,nj->n", X, cert.P1, X) + cert.p2 * eta ** 2 * np.exp(-cert.delta * sig)

    dV = np.diff(V)
    tol_abs = tol * max(1.0, float(np.max(np.abs(V))))
    flow_violations = int(np.sum(dV > tol_abs))
    max_increase = float(np.max(dV)) if dV.size else 0.0

    mask = (trace.event_link == link) & (trace.event_delivered == 1)
    jump_dV = -cert.p2 * trace.event_eta_pre[mask] ** 2 * np.exp(
        -cert.delta * trace.event_sigma_pre[mask])
    jump_violations = int(np.sum(jump_dV > 0.0))

    return LyapunovReport(
        V=V, flow_violations=flow_violations, jump_violations=jump_violations,
        max_flow_increase=max_increase, tol=tol_abs,
        passed=(flow_violations == 0 and jump_violations == 0),
    )


@dataclass(frozen=True)
class ReferenceTrace:
    """Continuous-communication closed loop on a uniform grid."""

    t: np.ndarray
    q: np.ndarray
    v: np.ndarray
    a: np.ndarray
    u: np.ndarray


def simulate_continuous_reference(params: PlatoonParams, gains: Gains,
                                  leader: LeaderProfile, t_end: float, dt: float,
                                  init: PlatoonState | None = None,
                                  r: float = _DEFAULT_R, L: float = _DEFAULT_L,
                                  v0: float = _DEFAULT_V0) -> ReferenceTrace:
    """Same closed loop with each controller fed u_{i-1} directly.

    This is the limit the sampled loop approaches as Ts shrinks; the
    sampled trajectories converge to it at first order in Ts.
    """
    if dt <= 0.0 or t_end <= 0.0:
        raise ParameterError("t_end and dt must be positive")
    n = int(round(t_end / dt))
    if abs(n * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ParameterError("t_end must be a multiple of dt")
    m = params.m
    h, tau_d = params.h, params.tau_d
    kp, kd = gains.kp, gains.kd
    if init is None:
        init = equilibrium_state(params, v0=v0, r=r, L=L)
    init.check(m)

    nq = m + 1
    y = np.concatenate([np.asarray(init.q, dtype=float),
                        np.asarray(init.v, dtype=float),
                        np.asarray(init.a, dtype=float),
                        np.asarray(init.u, dtype=float),
                        np.asarray(init.e, dtype=float)])

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        vv = y[nq:2 * nq]
        av = y[2 * nq:3 * nq]
        uv = y[3 * nq:4 * nq]
        ev = y[4 * nq:]
        edot = vv[:-1] - vv[1:] - h * av[1:]
        dy = np.empty_like(y)
        dy[0:nq] = vv
        dy[nq:2 * nq] = av
        dy[2 * nq:3 * nq] = (-av + uv) / tau_d
        dy[3 * nq] = (-uv[0] + leader.command(t)) / h
        dy[3 * nq + 1:4 * nq] = (-uv[1:] + kp * ev + kd * edot + uv[:m]) / h
        dy[4 * nq:] = edot
        return dy

    t_rec = np.arange(n + 1) * dt
    q_rec = np.empty((n + 1, nq))
    v_rec = np.empty((n + 1, nq))
    a_rec = np.empty((n + 1, nq))
    u_rec = np.empty((n + 1, nq))
    for idx in range(n + 1):
        q_rec[idx] = y[0:nq]
        v_rec[idx] = y[nq:2 * nq]
        a_rec[idx] = y[2 * nq:3 * nq]
        u_rec[idx] = y[3 * nq:4 * nq]
        if idx == n:
            break
        t = idx * dt
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * dt, y + 0.5 * dt * k1)
        k3 = rhs(t + 0.5 * dt, y + 0.5 * dt * k2)
        k4 = rhs(t + dt, y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    return ReferenceTrace(t=t_rec, q=q_rec, v=v_rec, a=a_rec, u=u_rec)
