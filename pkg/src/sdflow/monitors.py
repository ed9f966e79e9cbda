"""Per-step diagnostics and trajectory-level audits.

Everything the flow is supposed to conserve, dissipate, or keep scale
invariant is computed here: area, enclosed volume, Willmore energy
(1/4) int H^2, tracefree curvature energy int |A^o|^2, the dissipation
integrals int |grad H|^2 and int |lap H|^2, the curvature concentration
eta(r), the isoperimetric sphericity, and the two 8*pi gates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .geometry import dirichlet_energy, enclosed_volume, integrate
from .mesh import edge_lengths, face_qualities

EIGHT_PI = 8.0 * math.pi

AREA = "area"
TRACEFREE_L2 = "tracefree_l2"
WILLMORE = "willmore"
AREA_RATE = "area_rate"
TRACEFREE_RATE = "tracefree_rate"


class NumericsError(Exception):
    """A diagnostic went non-finite or a numerical safeguard tripped."""


@dataclass(frozen=True)
class DiagnosticsRecord:
    step: int
    t: float
    area: float
    volume: float
    willmore: float
    tracefree_l2: float
    gradH_l2: float
    lapH_l2: float
    max_abs_A: float
    h_min: float
    quality: float
    sphericity: float
    li_yau_ok: bool
    smallness_ok: bool
    eta: tuple  # ((r, eta(r)), ...)
    eta_centers: tuple | None = None  # argmax centers, not serialized


@dataclass(frozen=True)
class MonotonicityAudit:
    quantity: str
    violations: tuple  # (step, before, after, allowed_slack)
    max_violation: float
    passed: bool


@dataclass(frozen=True)
class DissipationReport:
    which: str
    samples: int
    median_rel_error: float  # AREA_RATE agreement; nan for TRACEFREE_RATE
    violations: int
    best_constant: float  # largest c with dE/dt <= -c * int |lap H|^2
    passed: bool


@dataclass(frozen=True)
class DecayFit:
    t0: float
    t1: float
    lambda_fit: float
    r_squared: float
    samples: int


def concentration(state, r: float, tree: cKDTree | None = None):
    """eta(r): the largest curvature mass sum_{|x_i - x| <= r} |A|^2_i m_i
    over balls centered at vertex positions.  Returns (eta, center)."""
    if not r > 0:
        raise ValueError("radius must be positive")
    pts = state.mesh.vertices
    w = state.curvature.A_sq * state.mass.m
    # a ball at any vertex covers the whole mesh once r reaches the
    # bounding-box diagonal; the sum then equals integrate(|A|^2) bit for bit
    if r >= float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0))):
        return float(np.sum(w)), pts[0].copy()
    if tree is None:
        tree = cKDTree(pts)
    best = -1.0
    best_i = 0
    # sorted ball indices keep sums permutation-stable, so a covering ball
    # reproduces integrate(|A|^2) bit for bit
    for i, idx in enumerate(tree.query_ball_point(pts, r, return_sorted=True)):
        s = float(np.sum(w[idx]))
        if s > best:
            best = s
            best_i = i
    return best, pts[best_i].copy()


def sphericity_of(area: float, volume: float) -> float:
    return float((36.0 * math.pi) ** (1.0 / 3.0) * volume ** (2.0 / 3.0) / area)


def diagnostics(state, radii=(), eps0: float = EIGHT_PI) -> DiagnosticsRecord:
    """Assemble one record from a flow state; raises NumericsError on any
    non-finite value so a run aborts at the offending step."""
    mass, lap, curv = state.mass, state.lap, state.curvature
    area = mass.total_area
    volume = enclosed_volume(state.mesh)
    willmore = 0.25 * integrate(curv.H**2, mass)
    tracefree = integrate(curv.Ao_sq, mass)
    grad_h = dirichlet_energy(curv.H, lap)
    lap_h = integrate(curv.lapH**2, mass)
    scalars = [
        area,
        volume,
        willmore,
        tracefree,
        grad_h,
        lap_h,
        float(np.sqrt(curv.A_sq.max())),
        float(edge_lengths(state.mesh).min()),
        float(face_qualities(state.mesh).min()),
    ]
    eta = []
    centers = []
    if radii:
        tree = cKDTree(state.mesh.vertices)
        for r in radii:
            val, center = concentration(state, float(r), tree=tree)
            eta.append((float(r), val))
            centers.append(tuple(center))
            scalars.append(val)
    sph = sphericity_of(area, volume)
    scalars.append(sph)
    if not np.isfinite(scalars).all():
        raise NumericsError(f"non-finite diagnostic at step {state.step}")
    return DiagnosticsRecord(
        step=state.step,
        t=state.t,
        area=area,
        volume=volume,
        willmore=willmore,
        tracefree_l2=tracefree,
        gradH_l2=grad_h,
        lapH_l2=lap_h,
        max_abs_A=scalars[6],
        h_min=scalars[7],
        quality=scalars[8],
        sphericity=sph,
        li_yau_ok=bool(willmore < EIGHT_PI),
        smallness_ok=bool(tracefree < eps0),
        eta=tuple(eta),
        eta_centers=tuple(centers) if centers else None,
    )


def stationarity_residual(state):
    """sqrt(int |lap H|^2) raw and normalized by area (dimensionless)."""
    lap_h = integrate(state.curvature.lapH**2, state.mass)
    raw = math.sqrt(lap_h)
    return raw, raw * state.mass.total_area


def default_slack(before: DiagnosticsRecord, after: DiagnosticsRecord, value: float) -> float:
    dt = after.t - before.t
    return 1e-8 * abs(value) + dt * dt * before.lapH_l2


def audit_monotone(records, quantity: str, slack_rule=default_slack) -> MonotonicityAudit:
    """Flag every step where the quantity increased beyond the slack rule."""
    records = list(records)
    if len(records) < 2:
        raise ValueError("need at least two records")
    if quantity not in (AREA, TRACEFREE_L2, WILLMORE):
        raise ValueError(f"unknown audit quantity: {quantity}")
    violations = []
    max_violation = 0.0
    for before, after in zip(records, records[1:]):
        q0 = getattr(before, quantity)
        q1 = getattr(after, quantity)
        slack = slack_rule(before, after, q0)
        excess = q1 - q0 - slack
        if excess > 0:
            violations.append((after.step, q0, q1, slack))
            max_violation = max(max_violation, excess)
    return MonotonicityAudit(
        quantity=quantity,
        violations=tuple(violations),
        max_violation=max_violation,
        passed=not violations,
    )


_RATE_FLOOR = 1e-10


def audit_dissipation(records, which: str) -> DissipationReport:
    """AREA_RATE checks dArea/dt against -int |grad H|^2; TRACEFREE_RATE
    checks dE/dt <= -(1/8) int |lap H|^2 and reports the best constant."""
    records = list(records)
    if len(records) < 10:
        raise ValueError("need a window of at least 10 records")
    # rate estimates need comparable step sizes; CFL steps drift by a few
    # percent over a run, so reject only materially mixed windows
    dts = np.diff([r.t for r in records])
    if dts.max() - dts.min() > 0.25 * dts.max():
        raise ValueError("nonuniform dt window")
    if which == AREA_RATE:
        errs = []
        for before, after in zip(records, records[1:]):
            dt = after.t - before.t
            lhs = (after.area - before.area) / dt
            rhs = before.gradH_l2
            # vacuous when neither side would change the area measurably
            # over one step (stationary states are all noise)
            floor = _RATE_FLOOR * before.area
            if abs(lhs) * dt < floor and rhs * dt < floor:
                continue
            errs.append(abs(lhs + rhs) / max(rhs, _RATE_FLOOR))
        med = float(np.median(errs)) if errs else 0.0
        return DissipationReport(
            which=which,
            samples=len(errs),
            median_rel_error=med,
            violations=0,
            best_constant=math.nan,
            passed=med < 0.15,
        )
    if which == TRACEFREE_RATE:
        violations = 0
        best = math.inf
        samples = 0
        scale = max(records[0].tracefree_l2, 1.0)
        for before, after in zip(records, records[1:]):
            dt = after.t - before.t
            lhs = (after.tracefree_l2 - before.tracefree_l2) / dt
            rhs = before.lapH_l2
            floor = _RATE_FLOOR * scale
            if abs(lhs) * dt < floor and 0.125 * rhs * dt < floor:
                continue
            samples += 1
            best = min(best, -lhs / max(rhs, _RATE_FLOOR))
            if lhs > -0.125 * rhs + floor / dt:
                violations += 1
        return DissipationReport(
            which=which,
            samples=samples,
            median_rel_error=math.nan,
            violations=violations,
            best_constant=float(best) if np.isfinite(best) else math.nan,
            passed=violations == 0,
        )
    raise ValueError(f"unknown dissipation audit: {which}")


def fit_decay(records, window=None, min_samples: int = 10) -> DecayFit:
    """Least-squares line through ln(tracefree_l2) vs t on the tail window;
    lambda is minus half the slope.

    window=None starts where the energy first falls below half its initial
    value (post-transient tail) and ends where it last exceeds 1/32 of the
    initial value, keeping the fit above the discrete floor; both bounds are
    relative, so the window commutes with parabolic rescaling.  Pass an
    explicit (t0, t1) to override.
    """
    records = list(records)
    ts = np.array([r.t for r in records])
    es = np.array([r.tracefree_l2 for r in records])
    if window is None:
        below = np.nonzero(es < 0.5 * es[0])[0]
        if len(below) == 0:
            raise ValueError("no post-transient tail: energy never halved")
        above = np.nonzero(es > es[0] / 32.0)[0]
        sel = slice(below[0], above[-1] + 1)
    else:
        t0, t1 = window
        if not t1 > t0:
            raise ValueError("window must satisfy t1 > t0")
        mask = (ts >= t0) & (ts <= t1)
        sel = np.nonzero(mask)[0]
        if len(sel) == 0:
            raise ValueError("empty fit window")
        sel = slice(sel[0], sel[-1] + 1)
    ts, es = ts[sel], es[sel]
    if len(ts) < min_samples:
        raise ValueError(f"need at least {min_samples} samples in the window")
    if (es <= 0).any():
        raise ValueError("nonpositive energy in fit window")
    y = np.log(es)
    slope, intercept = np.polyfit(ts, y, 1)
    resid = y - (slope * ts + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r_sq = 1.0 if ss_tot == 0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return DecayFit(
        t0=float(ts[0]),
        t1=float(ts[-1]),
        lambda_fit=float(-slope / 2.0),
        r_squared=r_sq,
        samples=len(ts),
    )
