"""Gain search maximizing tolerable consecutive packet drops.

For fixed physical parameters, every candidate gain pair on the
pole-placement locus is scored by the largest number Delta of
consecutive V2V drops for which a decay-rate delta exists making the
endpoint matrix-inequality pair feasible. The search is incremental:
Delta starts at 0 and grows while some grid delta is feasible; the
first level with no feasible delta stops the loop. The tuner runs the
estimation over both locus branches and keeps the candidate with the
largest Delta, breaking ties toward the smallest kd (then kp, then
branch order), which favors the least aggressive controller.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InconclusiveError, ParameterError
from .lmi import StabilityCertificate, verify_certificate
from .locus import enumerate_locus
from .model import Gains, PerformanceSpec, PlatoonParams, build_closed_loop
from .sdp import (
    FEASIBLE,
    INFEASIBLE,
    PlatoonFeasibility,
    delta_provably_infeasible,
    identity_start,
)

_TRIU4 = [(0, 0), (0, 1), (0, 2), (0, 3), (1, 1), (1, 2), (1, 3), (2, 2), (2, 3), (3, 3)]


def default_delta_grid(n: int = 241) -> np.ndarray:
    """Geometric decay-rate grid over [1e-2, 1e2]."""
    return np.geomspace(1e-2, 1e2, n)


@dataclass(frozen=True)
class TuningConfig:
    """Grid sizes and numerical knobs of the gain search.

    n_k1, n_k2: kp grid sizes of the two locus branches
    delta_grid: ascending candidate decay rates for the hold term
    Delta_max: cap on the drop count the search will certify
    epsilon: L2-gain slack; the certified gain bound is sqrt(1+epsilon)
    tol_feas: minimum margin for a feasibility verdict
    """

    n_k1: int = 162
    n_k2: int = 13
    delta_grid: np.ndarray = field(default_factory=default_delta_grid)
    Delta_max: int = 50
    epsilon: float = 0.01
    tol_feas: float = 1e-7

    def __post_init__(self):
        if self.n_k1 < 1 or self.n_k2 < 0:
            raise ParameterError(
                f"need n_k1 >= 1 and n_k2 >= 0, got {self.n_k1}, {self.n_k2}"
            )
        grid = np.asarray(self.delta_grid, dtype=float)
        if grid.ndim != 1 or grid.size == 0:
            raise ParameterError("delta_grid must be a nonempty 1-D array")
        if not np.all(grid > 0.0):
            raise ParameterError("delta_grid values must be positive")
        if not np.all(np.diff(grid) > 0.0):
            raise ParameterError("delta_grid must be strictly increasing")
        object.__setattr__(self, "delta_grid", grid)
        if self.Delta_max < 0:
            raise ParameterError(f"Delta_max must be >= 0, got {self.Delta_max}")
        if not (self.epsilon > 0.0):
            raise ParameterError(f"epsilon must be positive, got {self.epsilon}")
        if not (self.tol_feas > 0.0):
            raise ParameterError(f"tol_feas must be positive, got {self.tol_feas}")

    @property
    def theta(self) -> float:
        return float(np.sqrt(1.0 + self.epsilon))


def _certificate_from(y: np.ndarray, delta: float, theta: float, Delta: int) -> StabilityCertificate:
    P1 = np.zeros((4, 4))
    for k, (i, j) in enumerate(_TRIU4):
        P1[i, j] = y[k]
        P1[j, i] = y[k]
    return StabilityCertificate(P1=P1, p2=float(y[10]), delta=float(delta),
                                theta=theta, Delta=Delta)


def estimate_mansd(
    gains: Gains, params: PlatoonParams, cfg: TuningConfig
) -> tuple[int, StabilityCertificate | None]:
    """Largest certified consecutive-drop count for one gain pair.

    Returns (Delta, certificate); Delta = -1 (certificate None) means no
    grid delta is feasible even with zero drops. The line search per
    level scans delta_grid in ascending order and stops at the first
    feasible point. Raises InconclusiveError when the level-0 scan
    produces a numerical failure at every grid point, which is a
    different statement than certified infeasibility.
    """
    theta = cfg.theta
    clm = build_closed_loop(gains, params)
    probe = PlatoonFeasibility(clm, params.Ts, theta, params.h, tol_feas=cfg.tol_feas)
    y0 = identity_start()

    Delta = -1
    best: StabilityCertificate | None = None
    feasible_levels: list[int] = []
    level = 0
    while level <= cfg.Delta_max:
        found = False
        saw_verdict = False
        for delta in cfg.delta_grid:
            delta = float(delta)
            if delta_provably_infeasible(delta, theta, params.h):
                saw_verdict = True
                continue
            r = probe.solve(level, delta, y0=y0)
            if r.status == FEASIBLE:
                Delta = level
                best = _certificate_from(r.y, delta, theta, level)
                found = True
                saw_verdict = True
                break
            if r.status == INFEASIBLE:
                saw_verdict = True
        if found:
            feasible_levels.append(level)
            level += 1
            continue
        if level == 0 and not saw_verdict:
            raise InconclusiveError(
                "feasibility solver failed on every grid delta at zero drops; "
                "cannot distinguish infeasible from ill-conditioned"
            )
        break
    # the incremental loop can only report Delta = n with levels 0..n all
    # feasible; anything else would make the early stop unsound
    assert feasible_levels == list(range(Delta + 1)) if Delta >= 0 else not feasible_levels
    return Delta, best


@dataclass(frozen=True)
class LocusRow:
    """Per-candidate outcome of the tuning sweep."""

    branch: str
    kp: float
    kd: float
    Delta: int
    delta_star: float | None
    status: str  # "ok", "infeasible", "inconclusive"


@dataclass(frozen=True)
class TuningReport:
    """Winner, its certificate, and the full per-candidate table."""

    best_gains: Gains | None
    best_Delta: int
    branch: str | None
    certificate: StabilityCertificate | None
    locus_table: tuple[LocusRow, ...]
    stage1_seconds: float
    stage2_seconds: float
    total_seconds: float


def _score_candidate(args) -> tuple[LocusRow, StabilityCertificate | None]:
    branch, gains, params, cfg = args
    try:
        Delta, cert = estimate_mansd(gains, params, cfg)
        status = "ok" if Delta >= 0 else "infeasible"
    except InconclusiveError:
        Delta, cert, status = -1, None, "inconclusive"
    row = LocusRow(
        branch=branch,
        kp=gains.kp,
        kd=gains.kd,
        Delta=Delta,
        delta_star=None if cert is None else cert.delta,
        status=status,
    )
    return row, cert


def tune(
    params: PlatoonParams,
    spec: PerformanceSpec,
    cfg: TuningConfig | None = None,
    jobs: int = 1,
) -> TuningReport:
    """Two-stage gain search over the locus branches.

    Stage 1 scores the C1 grid, stage 2 the C2 grid. The reduction is
    order-independent: maximize Delta, then prefer smaller kd, smaller
    kp, and branch C1 before C2. jobs > 1 distributes candidates over
    processes; results are keyed by candidate index so the outcome is
    identical to the serial run.
    """
    cfg = cfg or TuningConfig()
    candidates = enumerate_locus(spec, params.tau_d, cfg.n_k1, cfg.n_k2)
    stage1 = [(b, g) for b, g in candidates if b == "C1"]
    stage2 = [(b, g) for b, g in candidates if b == "C2"]

    def run_stage(stage):
        tasks = [(b, g, params, cfg) for b, g in stage]
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                return list(pool.map(_score_candidate, tasks, chunksize=4))
        return [_score_candidate(t) for t in tasks]

    t0 = time.perf_counter()
    out1 = run_stage(stage1)
    t1 = time.perf_counter()
    out2 = run_stage(stage2)
    t2 = time.perf_counter()

    rows = tuple(r for r, _ in out1 + out2)
    certs = [c for _, c in out1 + out2]

    best_idx = None
    for i, row in enumerate(rows):
        if row.Delta < 0:
            continue
        if best_idx is None:
            best_idx = i
            continue
        cur = rows[best_idx]
        key_new = (-row.Delta, row.kd, row.kp, row.branch)
        key_cur = (-cur.Delta, cur.kd, cur.kp, cur.branch)
        if key_new < key_cur:
            best_idx = i

    if best_idx is None:
        return TuningReport(
            best_gains=None, best_Delta=-1, branch=None, certificate=None,
            locus_table=rows, stage1_seconds=t1 - t0, stage2_seconds=t2 - t1,
            total_seconds=t2 - t0,
        )

    winner = rows[best_idx]
    cert = certs[best_idx]
    clm = build_closed_loop(Gains(winner.kp, winner.kd), params)
    report = verify_certificate(cert, clm, params.Ts, params.h)
    if not report.passed:
        raise InconclusiveError(
            "winning certificate failed independent verification: "
            + "; ".join(report.failures)
        )
    return TuningReport(
        best_gains=Gains(winner.kp, winner.kd),
        best_Delta=winner.Delta,
        branch=winner.branch,
        certificate=cert,
        locus_table=rows,
        stage1_seconds=t1 - t0,
        stage2_seconds=t2 - t1,
        total_seconds=t2 - t0,
    )
