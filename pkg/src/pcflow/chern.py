"""Chern connection, torsion, curvature and their traces for a Hermitian metric.

Conventions (indices after the semicolon are slot order in storage):

* ``gamma[i, j, a] = Γ_{ij}^a = ∂_i g_{jb̄} g^{b̄a}``
* ``T_{ijk̄} = ∂_i g_{jk̄} - ∂_j g_{ik̄}``
* ``Ω_{ij̄pq̄} = -∂_{j̄}Γ_{ip}^a g_{aq̄} = -∂_i∂_{j̄} g_{pq̄} + g^{b̄a} ∂_i g_{pb̄} ∂_{j̄} g_{aq̄}``
* ``S_{ij̄} = g^{b̄a}Ω_{ab̄ij̄}``, ``Ric_{ij̄} = g^{b̄a}Ω_{ij̄ab̄}``,
  ``Q_{ij̄} = g^{b̄a}g^{t̄s}T_{iat̄}T_{j̄b̄s}``

Covariant derivatives put the new derivative slot first: ``∇A`` has slots
``'u' + A.slots`` and ``∇̄A`` has ``'b' + A.slots``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend
from .field import HermitianMetric, TensorField, gradient, metric_einsum, norm_sq

__all__ = [
    "ChernPackage",
    "MetricDerivatives",
    "metric_derivatives",
    "christoffel",
    "torsion",
    "chern_curvature",
    "curvature_traces",
    "covariant_derivative",
    "chern_laplacian",
    "divergence_T",
    "mixed_gradient_sq",
    "mixed_gradient_norms",
]


@dataclass(frozen=True)
class MetricDerivatives:
    """First and mixed second coordinate derivatives of g.

    ``dg[i, j, k] = ∂_i g_{jk̄}``, ``dbg[j, a, q] = ∂_{j̄} g_{aq̄}`` and
    ``ddg[i, j, p, q] = ∂_i ∂_{j̄} g_{pq̄}``.
    """

    dg: np.ndarray
    dbg: np.ndarray
    ddg: np.ndarray


def metric_derivatives(metric: HermitianMetric) -> MetricDerivatives:
    chart = metric.chart
    n = chart.n
    spec = chart.fft(metric.g.data)
    sig = [chart.dz_symbol(i) for i in range(n)]
    tau = [chart.dzbar_symbol(j) for j in range(n)]
    dg = np.stack([chart.ifft(spec * sig[i]) for i in range(n)])
    # g is Hermitian, so ∂_{j̄} g_{aq̄} = conj(∂_j g_{qā})
    dbg = np.conj(np.swapaxes(dg, 1, 2))
    # ∂_i∂_{j̄} g_{pq̄} = conj(∂_j∂_{ī} g_{qp̄}): transform only half the (i,p),(j,q) pairs
    ddg = np.empty((n,) * 4 + chart.shape, dtype=complex)
    for i in range(n):
        for j in range(n):
            for p in range(n):
                for q in range(n):
                    if (i, p) <= (j, q):
                        ddg[i, j, p, q] = chart.ifft(spec[p, q] * (sig[i] * tau[j]))
                        ddg[j, i, q, p] = np.conj(ddg[i, j, p, q])
    return MetricDerivatives(dg, dbg, ddg)


def christoffel(metric: HermitianMetric, derivs: MetricDerivatives | None = None) -> np.ndarray:
    d = derivs or metric_derivatives(metric)
    return np.einsum("ijb...,ba...->ija...", d.dg, metric.ginv)


def torsion(metric: HermitianMetric, derivs: MetricDerivatives | None = None) -> TensorField:
    d = derivs or metric_derivatives(metric)
    data = d.dg - np.swapaxes(d.dg, 0, 1)
    return TensorField(metric.chart, data, "uub")


def chern_curvature(metric: HermitianMetric, gamma: np.ndarray | None = None, *,
                    path: str = "expanded",
                    derivs: MetricDerivatives | None = None) -> TensorField:
    """Chern curvature Ω_{ij̄pq̄}.

    ``path="expanded"`` uses only derivatives of g and pointwise products, so
    it carries no product-rule aliasing; ``path="christoffel"`` spectrally
    differentiates Γ and serves as the cross-check.
    """
    chart = metric.chart
    if path == "expanded":
        d = derivs or metric_derivatives(metric)
        quad = np.einsum("ba...,ipb...,jaq...->ijpq...", metric.ginv, d.dg, d.dbg,
                         optimize=True)
        return TensorField(chart, quad - d.ddg, "ubub")
    if path == "christoffel":
        if gamma is None:
            gamma = christoffel(metric, derivs)
        dgam = gradient(TensorField(chart, gamma, "uuu"), bar=True).data  # [j, i, p, a]
        data = -np.einsum("jipa...,aq...->ijpq...", dgam, metric.g.data)
        return TensorField(chart, data, "ubub")
    raise ValueError(f"unknown curvature path {path!r}")


def curvature_traces(metric: HermitianMetric, curvature: TensorField, torsion_: TensorField):
    """Return (S, Ric, Q): first-pair trace, second-pair trace, torsion square."""
    G = metric.ginv
    chart = metric.chart
    om = curvature.data
    s = np.einsum("ba...,abij...->ij...", G, om)
    ric = np.einsum("ba...,ijab...->ij...", G, om)
    q = metric_einsum("iaT,JAt->iJ", torsion_, torsion_.conjugate(), ginv=G)
    return (TensorField(chart, s, "ub"), TensorField(chart, ric, "ub"),
            TensorField(chart, q, "ub"))


def _correct_slot(gam: np.ndarray, a: np.ndarray, slot: int) -> np.ndarray:
    """corr[d, ..., s, ...] = sum_c gam[d, s, c] a[..., c, ...] at tensor slot ``slot``."""
    moved = np.moveaxis(a, slot, 0)
    out = np.einsum("dsc...,c...->ds...", gam, moved)
    return np.moveaxis(out, 1, slot + 1)


def covariant_derivative(a: TensorField, metric: HermitianMetric, gamma: np.ndarray, *,
                         bar: bool = False) -> TensorField:
    """Chern covariant derivative ∇A (or ∇̄A with ``bar=True``).

    ∇ corrects unbarred slots with Γ, ∇̄ corrects barred slots with conj(Γ);
    slots of the other type are inert.
    """
    if a.chart != metric.chart:
        raise ValueError("field and metric live on different charts")
    out = gradient(a, bar=bar)
    data = out.data
    gam = np.conj(gamma) if bar else gamma
    kind = "b" if bar else "u"
    for k, s in enumerate(a.slots):
        if s == kind:
            data = data - _correct_slot(gam, a.data, k)
    return out.like(data)


def chern_laplacian(a: TensorField, metric: HermitianMetric, gamma: np.ndarray, *,
                    conjugate: bool = False) -> TensorField:
    """Δa = g^{b̄a}∇_a∇_{b̄}A, or Δ̄A = g^{b̄a}∇_{b̄}∇_a A with ``conjugate=True``."""
    if not conjugate and "b" not in a.slots and a.rank > 0:
        return _laplacian_holomorphic_slots(a, metric, gamma)
    if conjugate:
        x = covariant_derivative(covariant_derivative(a, metric, gamma), metric, gamma, bar=True)
        data = np.einsum("ba...,ba...->...", metric.ginv, x.data)
    else:
        x = covariant_derivative(covariant_derivative(a, metric, gamma, bar=True), metric, gamma)
        data = np.einsum("ba...,ab...->...", metric.ginv, x.data)
    return a.like(data)


def _laplacian_holomorphic_slots(a: TensorField, metric: HermitianMetric,
                                 gamma: np.ndarray) -> TensorField:
    """Δ on a field with only unbarred slots, straight from the spectrum.

    ∇̄ acts on such a field as ∂̄, so Δa = g^{b̄a}(∂_a∂_{b̄}A - Σ_slots Γ_{a·}^c ∂_{b̄}A_{..c..}).
    """
    chart = a.chart
    n = chart.n
    if a.rank == 2 and np.array_equal(a.data, -np.swapaxes(a.data, 0, 1)):
        # antisymmetric: transform only the i < j components
        return _antisymmetric_laplacian(a, metric, gamma)
    spec = chart.fft(a.data)
    sig = [chart.dz_symbol(i) for i in range(n)]
    tau = [chart.dzbar_symbol(j) for j in range(n)]
    G = metric.ginv
    out = np.zeros_like(a.data)
    for b in range(n):
        for c in range(n):
            out += G[b, c] * chart.ifft(spec * (sig[c] * tau[b]))
    # z[c] = g^{b̄c} ∂_{b̄}A, then subtract Γ_{cs}^e z[c]_{..e..} on every slot
    dbar = np.stack([chart.ifft(spec * tau[b]) for b in range(n)])
    z = np.einsum("bc...,b...->c...", G, dbar) if a.rank else None
    for k in range(a.rank):
        moved = np.moveaxis(z, k + 1, 1)  # [c, e, other slots..., grid]
        corr = np.einsum("cse...,ce...->s...", gamma, moved)
        out -= np.moveaxis(corr, 0, k)
    return a.like(out)


def _antisymmetric_laplacian(a: TensorField, metric: HermitianMetric,
                            gamma: np.ndarray) -> TensorField:
    """Δ of an antisymmetric (2,0)-field from its i < j components only."""
    chart = a.chart
    n = chart.n
    iu = np.triu_indices(n, 1)
    comps = a.data[iu]  # [pair, grid]
    spec = chart.fft(comps)
    G = metric.ginv
    lap = np.zeros_like(comps)
    for b in range(n):
        for c in range(n):
            lap += G[b, c] * chart.ifft(spec * (chart.dz_symbol(c) * chart.dzbar_symbol(b)))
    dbar_packed = np.stack([chart.ifft(spec * chart.dzbar_symbol(b)) for b in range(n)])
    dbar = np.zeros((n, n, n) + chart.shape, dtype=complex)  # [b, i, j]
    dbar[:, iu[0], iu[1]] = dbar_packed
    dbar[:, iu[1], iu[0]] = -dbar_packed
    z = np.einsum("bc...,b...->c...", G, dbar)
    # Γ corrections on both slots; for antisymmetric z the second equals the
    # transpose of the first
    corr = np.einsum("cie...,cej...->ij...", gamma, z)
    out = np.zeros_like(a.data)
    out[iu] = lap
    out[(iu[1], iu[0])] = -lap
    out -= corr - np.swapaxes(corr, 0, 1)
    return a.like(out)


def divergence_T(torsion_: TensorField, metric: HermitianMetric, gamma: np.ndarray,
                 nabla_t: TensorField | None = None) -> TensorField:
    """(div T)_{ij} = -g^{āb}∇_b T_{ijā}."""
    if nabla_t is None:
        nabla_t = covariant_derivative(torsion_, metric, gamma)
    data = -np.einsum("ca...,aijc...->ij...", metric.ginv, nabla_t.data)
    # the slot corrections round differently on (i, j) and (j, i)
    data = 0.5 * (data - np.swapaxes(data, 0, 1))
    return TensorField(metric.chart, data, "uu")


def _branches(a: TensorField, metric, gamma, m: int):
    level = [a]
    for _ in range(m):
        level = [covariant_derivative(f, metric, gamma, bar=b) for f in level for b in (False, True)]
    return level


def mixed_gradient_sq(a: TensorField, metric: HermitianMetric, gamma: np.ndarray,
                      m: int) -> np.ndarray:
    """Pointwise |D^m a|^2 summed over all 2^m mixed ∇/∇̄ branches."""
    if m < 1:
        raise ValueError("derivative order must be >= 1")
    if m > 3:
        raise ValueError(f"derivative order {m} unsupported (cost guard: m <= 3)")
    return sum(norm_sq(f, metric) for f in _branches(a, metric, gamma, m))


def mixed_gradient_norms(a: TensorField, metric: HermitianMetric, gamma: np.ndarray,
                         m: int) -> float:
    """Grid maximum of |D^m a|."""
    return float(np.sqrt(np.max(mixed_gradient_sq(a, metric, gamma, m))))


class ChernPackage:
    """All Chern-connection quantities of one metric, computed once."""

    def __init__(self, metric: HermitianMetric):
        self.metric = metric
        chart = metric.chart
        d = self.derivs = metric_derivatives(metric)
        gamma, omega, s, ric, q = backend.kernels.chern_bundle(metric.ginv, d.dg, d.dbg, d.ddg)
        self.gamma = gamma
        self.torsion = torsion(metric, d)
        self.curvature = TensorField(chart, omega, "ubub")
        self.s_trace = TensorField(chart, s, "ub")
        self.ric_trace = TensorField(chart, ric, "ub")
        self.q_tensor = TensorField(chart, q, "ub")

    @property
    def chart(self):
        return self.metric.chart

    def nabla(self, a: TensorField, bar: bool = False) -> TensorField:
        return covariant_derivative(a, self.metric, self.gamma, bar=bar)

    def laplacian(self, a: TensorField, conjugate: bool = False) -> TensorField:
        return chern_laplacian(a, self.metric, self.gamma, conjugate=conjugate)

    def norm_sq(self, a: TensorField) -> np.ndarray:
        return norm_sq(a, self.metric)

    def raised_torsion(self) -> np.ndarray:
        """T_{ij}^a = T_{ijb̄} g^{b̄a}."""
        return np.einsum("ijb...,ba...->ija...", self.torsion.data, self.metric.ginv)
