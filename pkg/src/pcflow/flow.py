"""Explicit RK4 integration of ∂ₜg = -S + Q, optionally coupled to ∂ₜφ = Δφ.

The time step is parabolic, ``dt = safety·(1/N)²·min_eig / max(1, max|Ω|)``,
clipped so that the run lands exactly on the horizon and on the start of
every probe window.  Around a probe time ``t_p`` the run takes four fixed
steps of ``Δt/2`` from ``t_p - Δt``; the five states give a snapshot triple at
spacing ``Δt`` and a nested one at ``Δt/2`` for the Richardson check.  The
main trajectory continues from the centre state, so restarting from a
snapshot written at ``t_p`` reproduces the rest of the run.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from functools import cached_property

import numpy as np

from .chern import ChernPackage, mixed_gradient_norms
from .field import HermitianMetric, TensorField, hermitian_part, hermitian_residual

log = logging.getLogger(__name__)

CSV_FIELDS = ("t", "dt", "max_curv", "max_torsion_sq", "max_phi_sq", "d1", "d2",
              "scaled1", "scaled2", "pluriclosed_residual", "hs_residual", "min_eig")

COMPLETED = "completed"
BLOWUP = "blow-up suspected"
BREAKDOWN = "positivity breakdown"


class PositivityError(ValueError):
    """A stage or step produced a metric that is not positive definite."""


@dataclass(frozen=True)
class FlowControls:
    safety: float = 0.2
    dt_max: float | None = None
    max_halvings: int = 10
    blowup_factor: float = 1e3
    probe_times: tuple[float, ...] = ()
    probe_dt: float = 1e-4
    dealias: bool = True
    derivative_monitors: bool = True
    monitor_interval: float | None = None
    residual_monitors: bool = True

    def __post_init__(self):
        if not self.safety > 0:
            raise ValueError(f"safety must be > 0, got {self.safety}")
        if not self.probe_dt > 0:
            raise ValueError(f"probe_dt must be > 0, got {self.probe_dt}")
        if self.max_halvings < 0:
            raise ValueError("max_halvings must be >= 0")
        if self.monitor_interval is not None and not self.monitor_interval > 0:
            raise ValueError(f"monitor_interval must be > 0, got {self.monitor_interval}")


@dataclass(eq=False)
class FlowState:
    t: float
    metric: HermitianMetric
    phi: TensorField | None = None

    def __post_init__(self):
        if self.phi is not None:
            if self.phi.slots != "uu":
                raise ValueError(f"phi must have slots 'uu', got {self.phi.slots!r}")
            if self.phi.chart != self.metric.chart:
                raise ValueError("phi and metric live on different charts")

    @property
    def chart(self):
        return self.metric.chart

    @cached_property
    def package(self) -> ChernPackage:
        return ChernPackage(self.metric)

    @cached_property
    def max_curv(self) -> float:
        return _sup_norm(self.package, self.package.curvature)

    @cached_property
    def _rates(self) -> dict:
        return {}


@dataclass
class DiagnosticsRecord:
    t: float
    dt: float
    max_curv: float
    max_torsion_sq: float
    max_phi_sq: float
    d1: float
    d2: float
    scaled1: float
    scaled2: float
    pluriclosed_residual: float
    hs_residual: float
    min_eig: float
    # kept out of the CSV schema
    max_ric_s: float = 0.0
    hermitian_residual: float = 0.0
    trace_q_residual: float = 0.0

    def row(self) -> tuple[float, ...]:
        return tuple(getattr(self, f) for f in CSV_FIELDS)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class ProbeTriple:
    """Snapshots at ``t - dt, t, t + dt`` and, when present, the ``dt/2`` triple."""

    t: float
    dt: float
    states: tuple[FlowState, FlowState, FlowState]
    half: tuple[FlowState, FlowState, FlowState] | None = None


@dataclass
class FlowResult:
    final: FlowState
    records: list[DiagnosticsRecord]
    probes: list[ProbeTriple]
    status: str
    message: str = ""
    K: float = 0.0
    steps: int = 0
    rejected: int = 0


def _sup_norm(pkg: ChernPackage, a: TensorField) -> float:
    return float(np.sqrt(max(float(np.max(pkg.norm_sq(a))), 0.0)))


def max_curvature(state: FlowState) -> float:
    """max over the grid of |Ω|_g."""
    return state.max_curv


def flow_rhs(state: FlowState, *, dealias: bool = True):
    """(-S + Q, Δφ or None), the metric rate Hermitian-symmetrized.

    With ``dealias`` both rates are truncated to the 2/3-rule band.  The
    result is cached on the state.
    """
    cache = state._rates
    if dealias not in cache:
        cache[dealias] = _compute_rhs(state, dealias)
    return cache[dealias]


def _compute_rhs(state: FlowState, dealias: bool):
    pkg = state.package
    chart = state.chart
    rate = hermitian_part(pkg.q_tensor.data - pkg.s_trace.data)
    phi_rate = pkg.laplacian(state.phi).data if state.phi is not None else None
    if dealias:
        mask = chart.dealias_mask
        rate = hermitian_part(chart.ifft(chart.fft(rate) * mask))
        if phi_rate is not None:
            phi_rate = chart.ifft(chart.fft(phi_rate) * mask)
    out_rate = TensorField(chart, rate, "ub")
    out_phi = None
    if phi_rate is not None:
        out_phi = TensorField(chart, 0.5 * (phi_rate - np.swapaxes(phi_rate, 0, 1)), "uu")
    return out_rate, out_phi


def _make_state(t: float, g: np.ndarray, phi: np.ndarray | None, chart) -> FlowState:
    try:
        metric = HermitianMetric(TensorField(chart, hermitian_part(g), "ub"))
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise PositivityError(str(exc)) from exc
    ph = None
    if phi is not None:
        ph = TensorField(chart, 0.5 * (phi - np.swapaxes(phi, 0, 1)), "uu")
    return FlowState(t, metric, ph)


def step_rk4(state: FlowState, dt: float, *, dealias: bool = True,
             t_new: float | None = None) -> FlowState:
    """One classical RK4 step of (g, φ); raises PositivityError on loss of positivity.

    Negative ``dt`` integrates backwards (used by the reversibility check).
    """
    if not math.isfinite(dt):
        raise ValueError(f"invalid step {dt!r}")
    chart = state.chart
    has_phi = state.phi is not None
    g0 = state.metric.g.data
    p0 = state.phi.data if has_phi else None

    def rates(s):
        r, pr = flow_rhs(s, dealias=dealias)
        return r.data, (pr.data if pr is not None else None)

    def shifted(h, kg, kp):
        return _make_state(state.t + h, g0 + h * kg, p0 + h * kp if has_phi else None, chart)

    k1 = rates(state)
    k2 = rates(shifted(dt / 2, *k1))
    k3 = rates(shifted(dt / 2, *k2))
    k4 = rates(shifted(dt, *k3))
    g = g0 + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    p = p0 + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]) if has_phi else None
    return _make_state(state.t + dt if t_new is None else t_new, g, p, chart)


def stable_dt(state: FlowState, safety: float = 0.2) -> float:
    h = 1.0 / state.chart.N
    return safety * h * h * state.metric.min_eig / max(1.0, max_curvature(state))


def diagnostics(state: FlowState, dt: float, K: float,
                controls: FlowControls = FlowControls(), *,
                derivatives: bool = True) -> DiagnosticsRecord:
    """One diagnostics record; ``derivatives=False`` leaves d1/d2 as NaN for this record."""
    from .identities import pluriclosed_residual, trace_q_residual

    pkg = state.package
    m = state.metric
    t = state.t
    curv = max_curvature(state)
    tsq = float(np.max(pkg.norm_sq(pkg.torsion)))
    if controls.derivative_monitors and derivatives:
        d1 = mixed_gradient_norms(pkg.curvature, m, pkg.gamma, 1)
        d2 = mixed_gradient_norms(pkg.curvature, m, pkg.gamma, 2)
    else:
        d1 = d2 = math.nan
    scaled1 = t * d1 / K if K > 0 else 0.0
    scaled2 = t ** 1.5 * d2 / K if K > 0 else 0.0
    if state.phi is not None:
        phi_sq = float(np.max(pkg.norm_sq(state.phi)))
        dbphi = np.einsum("kij...->ijk...", pkg.nabla(state.phi, bar=True).data)
        hs = float(np.max(np.abs(dbphi + pkg.torsion.data)))
    else:
        phi_sq, hs = 0.0, math.nan
    if controls.residual_monitors:
        pc = pluriclosed_residual(pkg).rel_residual
        trq = trace_q_residual(pkg).rel_residual
    else:
        pc = trq = math.nan
    rs = _sup_norm(pkg, pkg.ric_trace + pkg.s_trace)
    return DiagnosticsRecord(t, dt, curv, tsq, phi_sq, d1, d2, scaled1, scaled2, pc, hs,
                             m.min_eig, rs, hermitian_residual(m.g.data), trq)


def _guarded_step(state: FlowState, dt: float, controls: FlowControls, t_new: float):
    """Step with positivity guard and halving retries; returns (state, dt, rejections)."""
    rate, _ = flow_rhs(state, dealias=controls.dealias)
    max_rate = rate.sup()
    rejected = 0
    target = t_new
    for attempt in range(controls.max_halvings + 1):
        if state.metric.min_eig > 10 * dt * max_rate:
            try:
                return step_rk4(state, dt, dealias=controls.dealias, t_new=target), dt, rejected
            except PositivityError as exc:
                log.info("step at t=%.6g with dt=%.3g rejected: %s", state.t, dt, exc)
        rejected += 1
        dt *= 0.5
        target = state.t + dt
    raise PositivityError(f"positivity breakdown at t={state.t:.6g} after "
                          f"{controls.max_halvings} halvings (min_eig {state.metric.min_eig:.3g})")


def _pending_probes(t0: float, horizon: float, controls: FlowControls) -> list[float]:
    out = []
    for tp in sorted(set(controls.probe_times)):
        if tp - controls.probe_dt > t0 and tp + controls.probe_dt <= horizon + 1e-15:
            out.append(float(tp))
        else:
            log.warning("probe time %g outside (t0 + dt, horizon - dt]; skipped", tp)
    return out


def _monitor_due(t_prev: float, t: float, horizon: float, interval: float | None) -> bool:
    """Derivative monitors run on every record, or on the first record past each
    multiple of ``interval`` and on the last one."""
    if interval is None or math.isclose(t, horizon, rel_tol=0, abs_tol=1e-14):
        return True
    return math.floor(t / interval + 1e-9) > math.floor(t_prev / interval + 1e-9)


def run(initial: FlowState, horizon: float, controls: FlowControls = FlowControls(), *,
        K: float | None = None, richardson: bool = True, progress=None) -> FlowResult:
    """Integrate from ``initial`` to ``horizon``; partial results are always returned.

    ``K`` defaults to max|Ω| of ``initial``; pass the t = 0 value when resuming.
    """
    if not horizon > initial.t:
        raise ValueError(f"horizon {horizon} must exceed the start time {initial.t}")
    K = max_curvature(initial) if K is None else K
    state = initial
    records = [diagnostics(state, 0.0, K, controls)]
    probes: list[ProbeTriple] = []
    pending = _pending_probes(initial.t, horizon, controls)
    result = FlowResult(state, records, probes, COMPLETED, K=K)
    h = controls.probe_dt

    def accept(new, dt):
        nonlocal state
        deriv = _monitor_due(state.t, new.t, horizon, controls.monitor_interval)
        state = new
        rec = diagnostics(state, dt, K, controls, derivatives=deriv)
        records.append(rec)
        result.steps += 1
        if progress is not None:
            progress(rec)
        return rec

    try:
        while state.t < horizon and not math.isclose(state.t, horizon, rel_tol=0, abs_tol=1e-14):
            target = pending[0] - h if pending else horizon
            dt = stable_dt(state, controls.safety)
            if controls.dt_max is not None:
                dt = min(dt, controls.dt_max)
            clipped = dt >= target - state.t
            if clipped:
                dt = target - state.t
            new, dt_taken, rej = _guarded_step(state, dt, controls,
                                               target if clipped else state.t + dt)
            result.rejected += rej
            rec = accept(new, dt_taken)
            if K > 0 and rec.max_curv > controls.blowup_factor * K:
                result.status = BLOWUP
                result.message = f"max|Ω| = {rec.max_curv:.3g} exceeds {controls.blowup_factor:g}·K"
                break
            if pending and state.t == pending[0] - h:
                tp = pending.pop(0)
                probes.append(_probe(state, tp, h, controls, accept, richardson))
    except PositivityError as exc:
        result.status = BREAKDOWN
        result.message = str(exc)
    result.final = state
    return result


def _probe(start: FlowState, tp: float, h: float, controls: FlowControls, accept,
           richardson: bool) -> ProbeTriple:
    """Five states at spacing h/2 (or three at h) around tp; the centre joins the run."""
    if richardson:
        times = [tp - h + k * h / 2 for k in range(5)]
        times[2] = tp
        chain = [start]
        for k in range(1, 5):
            nxt = step_rk4(chain[-1], h / 2, dealias=controls.dealias, t_new=times[k])
            chain.append(nxt)
            if k <= 2:
                accept(nxt, h / 2)
        return ProbeTriple(tp, h, (chain[0], chain[2], chain[4]), (chain[1], chain[2], chain[3]))
    mid = step_rk4(start, h, dealias=controls.dealias, t_new=tp)
    accept(mid, h)
    end = step_rk4(mid, h, dealias=controls.dealias, t_new=tp + h)
    return ProbeTriple(tp, h, (start, mid, end))


# --------------------------------------------------------------------------
# estimate monitors

@dataclass
class EstimateReport:
    smoothing: dict = field(default_factory=dict)
    torsion_bound: dict = field(default_factory=dict)
    phi_monotone: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"smoothing": self.smoothing, "torsion_bound": self.torsion_bound,
                "phi_monotone": self.phi_monotone}

    @property
    def passed(self) -> bool:
        return all(m.get("pass", True) for m in (self.smoothing, self.torsion_bound,
                                                  self.phi_monotone))


def _get(rec, name):
    return rec[name] if isinstance(rec, dict) else getattr(rec, name)


def _finite(x) -> bool:
    return x is not None and math.isfinite(x)


def estimate_monitors(records, *, K: float | None = None, n: int | None = None,
                      bound: float = 50.0, hs_run: bool | None = None,
                      early_window: float = 0.25, increase_tol: float = 1e-10,
                      ric_s: list[float] | None = None) -> EstimateReport:
    """Shape checks on a run: smoothing, torsion bound and φ monotonicity.

    ``records`` are DiagnosticsRecords or CSV row dicts.  ``ric_s`` overrides
    the per-record max|Ric + S| (CSV rows do not carry it).
    """
    if not records:
        raise ValueError("no diagnostics records")
    rep = EstimateReport()
    ts = np.array([float(_get(r, "t")) for r in records])
    curv = np.array([float(_get(r, "max_curv")) for r in records])
    K = float(curv[0]) if K is None else float(K)

    # smoothing: sup t^{(m+1)/2} |D^m Ω| / K for m = 1, 2
    if K <= 0:
        rep.smoothing = {"status": "skipped: K=0"}
    else:
        d1 = np.array([float(_get(r, "d1")) for r in records])
        d2 = np.array([float(_get(r, "d2")) for r in records])
        s1 = ts * d1 / K
        s2 = ts ** 1.5 * d2 / K
        if not np.any(np.isfinite(d1)):
            rep.smoothing = {"status": "skipped: derivative monitors disabled"}
        else:
            sup1 = float(np.nanmax(s1))
            sup2 = float(np.nanmax(s2)) if np.any(np.isfinite(s2)) else math.nan
            ok = all(_finite(x) and x <= bound for x in (sup1, sup2))
            early = (ts > 0) & (ts <= early_window * ts[-1]) & np.isfinite(d1) & (d1 > 0)
            slope = None
            if early.sum() >= 2 and np.ptp(np.log(ts[early])) > 0:
                slope = float(np.polyfit(np.log(ts[early]), np.log(d1[early]), 1)[0])
            rep.smoothing = {"status": "evaluated", "K": K, "sup_scaled1": sup1,
                             "sup_scaled2": sup2, "bound": bound, "pass": bool(ok),
                             "early_loglog_slope_d1": slope, "reference_exponent_d1": -1.0}

    # torsion bound: max|T|² <= max(c·K_ric, initial max|T|²), n = 2 only
    tsq = np.array([float(_get(r, "max_torsion_sq")) for r in records])
    if ric_s is None and not isinstance(records[0], dict):
        ric_s = [r.max_ric_s for r in records]
    if n is not None and n != 2:
        rep.torsion_bound = {"status": f"skipped: requires n=2, got n={n}"}
    elif ric_s is None:
        rep.torsion_bound = {"status": "skipped: max|Ric+S| not available"}
    else:
        k_ric = float(np.max(ric_s))
        if k_ric <= 0 or tsq[0] == 0 and np.all(tsq == 0):
            rep.torsion_bound = {"status": "skipped: K_ric=0 or torsion-free run"}
        else:
            c = float(np.max(tsq) / k_ric)
            rhs = np.maximum(c * k_ric, tsq[0])
            holds = bool(np.all(tsq <= rhs * (1 + 1e-12)))
            rep.torsion_bound = {"status": "evaluated", "c": c, "K_ric": k_ric,
                                 "initial_max_torsion_sq": float(tsq[0]),
                                 "holds": holds, "pass": holds,
                                 "c_needed_beyond_initial": float(
                                     np.max(np.where(tsq > tsq[0], tsq, 0.0)) / k_ric)}

    # φ monotonicity for HS runs with torsion
    phi = np.array([float(_get(r, "max_phi_sq")) for r in records])
    if hs_run is None:
        hs_run = bool(np.any(phi > 0))
    if not hs_run:
        rep.phi_monotone = {"status": "skipped: no (2,0)-part"}
    elif np.max(tsq) == 0:
        rep.phi_monotone = {"status": "skipped: Kähler run (T = 0)"}
    elif len(phi) < 2:
        rep.phi_monotone = {"status": "skipped: single record"}
    else:
        diffs = np.diff(phi)
        scale = float(np.max(phi))
        violations = [int(k) + 1 for k in np.nonzero(diffs > increase_tol * scale)[0]]
        strict = bool(np.all(diffs < 0))
        rep.phi_monotone = {"status": "evaluated", "strictly_decreasing": strict,
                            "violations": violations, "max_increase": float(np.max(diffs)),
                            "pass": strict and not violations}
    return rep
