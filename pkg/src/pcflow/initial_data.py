"""Certified initial metrics: flat, Kähler, rank-one pluriclosed and HS pairs.

A single Fourier mode ``exp(2πi(k·x + m·y))`` has ∂_{z_j} symbol
``σ_j = π(i k_j + m_j)`` and ∂_{z̄_j} symbol ``τ_j = π(i k_j - m_j)``.  The
rank-one pluriclosed metric is

    g = δ + ε (b τᵀ e^{iθ} + conj(τ) b^H e^{-iθ}),

which satisfies ∂∂̄ω = 0 mode by mode.  Choosing ``b·τ = 0`` makes the
perturbation nilpotent at every point, so det g is constant and g⁻¹ stays a
trigonometric polynomial; the default vector follows that rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chern import ChernPackage
from .field import HermitianMetric, TensorField, TorusChart, hermitian_residual

__all__ = [
    "DataSpec",
    "HSState",
    "ConstructionError",
    "ValidationReport",
    "mode_symbols",
    "default_mode",
    "default_vector",
    "make_flat",
    "make_kahler_perturbation",
    "make_pluriclosed_rank_one",
    "make_hermitian_symplectic",
    "make_random_hermitian",
    "make_metric",
    "validate",
    "pluriclosed_symbol_residual",
]

KINDS = ("flat", "kahler", "pluriclosed_rank_one", "hermitian_symplectic", "random_hermitian")


class ConstructionError(ValueError):
    """Initial data rejected; ``max_epsilon`` is set for positivity failures."""

    def __init__(self, message: str, *, min_eig: float | None = None,
                 max_epsilon: float | None = None):
        super().__init__(message)
        self.min_eig = min_eig
        self.max_epsilon = max_epsilon


def default_mode(n: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    k = tuple(1 if j == 0 else 0 for j in range(n))
    m = tuple(1 if j == 1 else 0 for j in range(n)) if n > 1 else (0,)
    return k, m


def default_vector(n: int) -> tuple[complex, ...]:
    """b = (1, i, 0, ...): b·τ = 0 for the default mode, and b is not parallel to σ."""
    if n == 1:
        return (1.0 + 0j,)
    return (1.0 + 0j, 1j) + (0j,) * (n - 2)


@dataclass(frozen=True)
class DataSpec:
    kind: str = "pluriclosed_rank_one"
    epsilon: float = 0.05
    k: tuple[int, ...] | None = None
    m: tuple[int, ...] | None = None
    b: tuple[complex, ...] | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown data kind {self.kind!r}; expected one of {KINDS}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")

    def resolved(self, n: int) -> "DataSpec":
        k, m = default_mode(n)
        spec = DataSpec(self.kind, self.epsilon,
                        tuple(self.k) if self.k is not None else k,
                        tuple(self.m) if self.m is not None else m,
                        tuple(complex(x) for x in self.b) if self.b is not None else default_vector(n),
                        self.seed)
        for name in ("k", "m", "b"):
            if len(getattr(spec, name)) != n:
                raise ValueError(f"{name} must have length {n}, got {getattr(spec, name)}")
        return spec


@dataclass
class HSState:
    """A Hermitian-symplectic pair: the metric ω and the antisymmetric (2,0)-part φ."""

    omega: HermitianMetric
    phi: TensorField

    def __post_init__(self):
        if self.phi.slots != "uu":
            raise ValueError(f"phi must have slots 'uu', got {self.phi.slots!r}")
        if np.any(self.phi.data != -np.swapaxes(self.phi.data, 0, 1)):
            raise ValueError("phi is not antisymmetric")


def mode_symbols(k, m) -> tuple[np.ndarray, np.ndarray]:
    """(σ, τ) for the mode exp(2πi(k·x + m·y))."""
    k = np.asarray(k, float)
    m = np.asarray(m, float)
    return np.pi * (1j * k + m), np.pi * (1j * k - m)


def pluriclosed_symbol_residual(sigma, tau, ghat) -> float:
    """max over (i, j, p, q) of |σ_iτ_j ĝ_pq - σ_pτ_j ĝ_iq - σ_iτ_q ĝ_pj + σ_pτ_q ĝ_ij|."""
    r = (np.einsum("i,j,pq->ijpq", sigma, tau, ghat)
         - np.einsum("p,j,iq->ijpq", sigma, tau, ghat)
         - np.einsum("i,q,pj->ijpq", sigma, tau, ghat)
         + np.einsum("p,q,ij->ijpq", sigma, tau, ghat))
    return float(np.max(np.abs(r)))


def _identity(chart: TorusChart) -> np.ndarray:
    n = chart.n
    return np.einsum("ab,...->ab...", np.eye(n, dtype=complex), np.ones(chart.shape))


def _metric_or_reject(chart: TorusChart, data: np.ndarray, eps: float | None = None,
                      perturbation: np.ndarray | None = None) -> HermitianMetric:
    mats = np.moveaxis(data.reshape(chart.n, chart.n, -1), 2, 0)
    lo = float(np.linalg.eigvalsh(mats)[:, 0].min())
    if lo <= 0:
        max_eps = None
        if eps is not None and perturbation is not None:
            pm = np.moveaxis(perturbation.reshape(chart.n, chart.n, -1), 2, 0)
            worst = float(np.linalg.eigvalsh(pm)[:, 0].min())
            max_eps = 1.0 / -worst if worst < 0 else float("inf")
        raise ConstructionError(f"metric not positive: min eigenvalue {lo:.6g}",
                                min_eig=lo, max_epsilon=max_eps)
    return HermitianMetric(TensorField(chart, data, "ub"))


def make_flat(chart: TorusChart) -> HermitianMetric:
    return HermitianMetric(TensorField(chart, _identity(chart), "ub"))


def make_kahler_perturbation(chart: TorusChart, potential) -> HermitianMetric:
    """g = δ + ∂∂̄f for a real potential f = Σ c·cos(2π(k·x + m·y)).

    ``potential`` is a list of ``(c, k, m)`` triples.
    """
    f = np.zeros(chart.shape)
    for c, k, m in potential:
        f += c * chart.mode(k, m).real
    spec = chart.fft(f.astype(complex))
    n = chart.n
    ddf = np.stack([np.stack([chart.ifft(spec * chart.dz_symbol(i) * chart.dzbar_symbol(j))
                              for j in range(n)]) for i in range(n)])
    ddf = 0.5 * (ddf + np.conj(np.swapaxes(ddf, 0, 1)))
    return _metric_or_reject(chart, _identity(chart) + ddf)


def _rank_one_perturbation(chart: TorusChart, spec: DataSpec) -> np.ndarray:
    sigma, tau = mode_symbols(spec.k, spec.m)
    b = np.asarray(spec.b, complex)
    wave = chart.mode(spec.k, spec.m)
    a = np.einsum("p,q->pq", b, tau)
    return (np.einsum("pq,...->pq...", a, wave)
            + np.einsum("pq,...->pq...", np.conj(a.T), np.conj(wave)))


def _torsion_symbol(spec: DataSpec) -> np.ndarray:
    sigma, _ = mode_symbols(spec.k, spec.m)
    b = np.asarray(spec.b, complex)
    return np.outer(sigma, b) - np.outer(b, sigma)


def _check_rank_one(chart: TorusChart, spec: DataSpec) -> None:
    if chart.n < 2:
        raise ConstructionError("rank-one pluriclosed data needs complex dimension >= 2")
    if not any(spec.k) and not any(spec.m):
        raise ConstructionError("mode must be nonzero")
    if np.max(np.abs(_torsion_symbol(spec))) < 1e-12 * max(1.0, np.max(np.abs(spec.b))):
        raise ConstructionError("b is parallel to the ∂-symbol σ: torsion would vanish")


def make_pluriclosed_rank_one(chart: TorusChart, spec: DataSpec | None = None) -> HermitianMetric:
    spec = (spec or DataSpec()).resolved(chart.n)
    _check_rank_one(chart, spec)
    pert = _rank_one_perturbation(chart, spec)
    return _metric_or_reject(chart, _identity(chart) + spec.epsilon * pert, spec.epsilon, pert)


def make_hermitian_symplectic(chart: TorusChart, spec: DataSpec | None = None) -> HSState:
    """ω from the rank-one branch and φ_{ij} = -ε(σ_i b_j - σ_j b_i) e^{iθ}.

    Then ∂̄φ = -T and ∂φ = 0 hold exactly, so dH = 0.
    """
    spec = (spec or DataSpec(kind="hermitian_symplectic")).resolved(chart.n)
    omega = make_pluriclosed_rank_one(chart, spec)
    phat = -spec.epsilon * _torsion_symbol(spec)
    phi = np.einsum("ij,...->ij...", phat, chart.mode(spec.k, spec.m))
    phi = 0.5 * (phi - np.swapaxes(phi, 0, 1))  # exact antisymmetry in floating point
    return HSState(omega, TensorField(chart, phi, "uu"))


def make_random_hermitian(chart: TorusChart, spec: DataSpec | None = None, *,
                          kmax: int = 1) -> HermitianMetric:
    """δ plus a random low-mode Hermitian perturbation; generically not pluriclosed."""
    spec = spec or DataSpec(kind="random_hermitian")
    rng = np.random.default_rng(spec.seed)
    n = chart.n
    pert = np.zeros((n, n) + chart.shape, complex)
    rng_modes = range(-kmax, kmax + 1)
    for _ in range(3):
        k = tuple(int(rng.choice(rng_modes)) for _ in range(n))
        m = tuple(int(rng.choice(rng_modes)) for _ in range(n))
        c = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        pert += np.einsum("pq,...->pq...", c, chart.mode(k, m))
    pert = 0.5 * (pert + np.conj(np.swapaxes(pert, 0, 1)))
    pert /= np.max(np.abs(pert))
    return _metric_or_reject(chart, _identity(chart) + spec.epsilon * pert, spec.epsilon, pert)


def make_metric(chart: TorusChart, spec: DataSpec):
    """Build data of ``spec.kind``; HS data returns an HSState."""
    if spec.kind == "flat":
        return make_flat(chart)
    if spec.kind == "kahler":
        r = spec.resolved(chart.n)
        m = r.m if spec.m is not None else (0,) * chart.n
        return make_kahler_perturbation(chart, [(spec.epsilon, r.k, m)])
    if spec.kind == "pluriclosed_rank_one":
        return make_pluriclosed_rank_one(chart, spec)
    if spec.kind == "hermitian_symplectic":
        return make_hermitian_symplectic(chart, spec)
    return make_random_hermitian(chart, spec)


@dataclass
class ValidationReport:
    min_eig: float
    max_eig: float
    hermitian_residual: float
    pluriclosed_residual: float
    max_torsion_sq: float
    hs_residual: float | None
    tolerances: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        ok = (self.min_eig > 0
              and self.hermitian_residual <= self.tolerances["hermitian"]
              and self.pluriclosed_residual <= self.tolerances["pluriclosed"])
        if self.hs_residual is not None:
            ok = ok and self.hs_residual <= self.tolerances["hs"]
        return ok


def validate(data, tolerances: dict | None = None) -> ValidationReport:
    """Measure the invariants of a metric or HSState against the tolerance ladder."""
    from .identities import pluriclosed_residual, hs_compat_residual

    tol = {"hermitian": 1e-12, "pluriclosed": 1e-8, "hs": 1e-8}
    tol.update(tolerances or {})
    metric = data.omega if isinstance(data, HSState) else data
    pkg = ChernPackage(metric)
    herm = hermitian_residual(metric.g.data)
    pc = pluriclosed_residual(pkg).rel_residual
    tsq = float(np.max(pkg.norm_sq(pkg.torsion)))
    hs = hs_compat_residual(pkg, data.phi).rel_residual if isinstance(data, HSState) else None
    return ValidationReport(metric.min_eig, metric.max_eig, herm, pc, tsq, hs, tol)
