"""Complex tensor fields on the flat torus C^n / (Z + iZ)^n.

Every field is stored index-major, grid-major: ``data.shape`` is
``(n,) * rank + (N,) * 2n`` with the grid axes ordered ``x1, y1, x2, y2, ...``.
Each slot of a field is either unbarred (``'u'``) or barred (``'b'``); all
tensors are stored fully covariant and indices are raised only inside
contractions, through the inverse metric ``ginv[b, a] = g^{b̄a}``.

Index expressions use einsum syntax where a lowercase letter marks an
unbarred slot and the same letter in uppercase marks a barred slot.  A name
that occurs once in each case is traced with the inverse metric::

    metric_einsum("aBpQ,AJb->pJQ", nabla_curv, torsion_bar, ginv=g.ginv)
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from . import backend

__all__ = [
    "TorusChart",
    "TensorField",
    "HermitianMetric",
    "spectral_derivative",
    "gradient",
    "dealias",
    "metric_einsum",
    "contract",
    "inner_product",
    "norm_sq",
    "h_bracket",
    "circle_op",
]


class TorusChart:
    """Uniform periodic grid on the unit torus with complex coordinates.

    Parameters
    ----------
    n : int
        Complex dimension.
    N : int
        Grid points per real axis; even and at least 4 (smaller grids are
        accepted with ``allow_small=True`` for brute-force oracles).
    """

    def __init__(self, n: int, N: int, *, allow_small: bool = False):
        if n < 1:
            raise ValueError(f"complex dimension must be >= 1, got {n}")
        if N % 2 or (N < 4 and not allow_small) or N < 2:
            raise ValueError(f"grid size must be even and >= 4, got {N}")
        self.n = n
        self.N = N
        self.spacing = 1.0 / N
        self.shape = (N,) * (2 * n)
        self.grid_axes = tuple(range(-2 * n, 0))

        k = np.fft.fftfreq(N, d=1.0 / N)  # integer wave numbers
        self.wavenumbers = k.astype(int)
        kd = 2.0 * np.pi * k
        kd[N // 2] = 0.0  # odd derivatives drop the Nyquist mode
        self._dx = [self._axis_symbol(1j * kd, 2 * j) for j in range(n)]
        self._dy = [self._axis_symbol(1j * kd, 2 * j + 1) for j in range(n)]

    def _axis_symbol(self, values: np.ndarray, axis: int) -> np.ndarray:
        shape = [1] * (2 * self.n)
        shape[axis] = self.N
        return values.reshape(shape)

    def __repr__(self) -> str:
        return f"TorusChart(n={self.n}, N={self.N})"

    def __eq__(self, other) -> bool:
        return isinstance(other, TorusChart) and (self.n, self.N) == (other.n, other.N)

    def __hash__(self) -> int:
        return hash((self.n, self.N))

    @property
    def size(self) -> int:
        return self.N ** (2 * self.n)

    def dz_symbol(self, j: int) -> np.ndarray:
        """Multiplier of d/dz_j, (d/dx - i d/dy) / 2, broadcastable over the grid."""
        self._check_direction(j)
        return 0.5 * (self._dx[j] - 1j * self._dy[j])

    def dzbar_symbol(self, j: int) -> np.ndarray:
        self._check_direction(j)
        return 0.5 * (self._dx[j] + 1j * self._dy[j])

    def _check_direction(self, j: int) -> None:
        if not 0 <= j < self.n:
            raise ValueError(f"direction index {j} out of range [0, {self.n})")

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """Boolean mask of the modes kept by the 2/3 rule."""
        keep = np.abs(self.wavenumbers) <= self.N // 3
        mask = np.ones(self.shape, dtype=bool)
        for ax in range(2 * self.n):
            mask &= self._axis_symbol(keep, ax)
        return mask

    def coordinates(self) -> list[np.ndarray]:
        """Grid coordinates ``[x1, y1, x2, y2, ...]`` as dense arrays."""
        x = np.arange(self.N) * self.spacing
        return list(np.meshgrid(*([x] * (2 * self.n)), indexing="ij"))

    def mode(self, k, m) -> np.ndarray:
        """The Fourier mode exp(2 pi i (k.x + m.y)) sampled on the grid."""
        coords = self.coordinates()
        phase = sum(k[j] * coords[2 * j] + m[j] * coords[2 * j + 1] for j in range(self.n))
        return np.exp(2j * np.pi * phase)

    def fft(self, data: np.ndarray) -> np.ndarray:
        return sfft.fftn(data, axes=self.grid_axes)

    def ifft(self, data: np.ndarray) -> np.ndarray:
        return sfft.ifftn(data, axes=self.grid_axes)


@dataclass(frozen=True, eq=False)
class TensorField:
    """A complex covariant tensor field with per-slot variance.

    ``slots`` is a string over ``{'u', 'b'}``; e.g. the torsion T_{ijk̄} has
    ``slots="uub"`` and the curvature Ω_{ij̄pq̄} has ``slots="ubub"``.
    """

    chart: TorusChart
    data: np.ndarray
    slots: str = ""

    def __post_init__(self):
        if set(self.slots) - {"u", "b"}:
            raise ValueError(f"slots must be a string over 'u'/'b', got {self.slots!r}")
        expected = (self.chart.n,) * len(self.slots) + self.chart.shape
        if self.data.shape != expected:
            raise ValueError(f"data shape {self.data.shape} does not match {expected}")
        if self.data.dtype != np.complex128:
            object.__setattr__(self, "data", self.data.astype(np.complex128))

    @property
    def p(self) -> int:
        return self.slots.count("u")

    @property
    def q(self) -> int:
        return self.slots.count("b")

    @property
    def signature(self) -> tuple[int, int]:
        return self.p, self.q

    @property
    def rank(self) -> int:
        return len(self.slots)

    def conjugate(self) -> "TensorField":
        flipped = self.slots.translate(str.maketrans("ub", "bu"))
        return TensorField(self.chart, np.conj(self.data), flipped)

    def like(self, data: np.ndarray, slots: str | None = None) -> "TensorField":
        return TensorField(self.chart, data, self.slots if slots is None else slots)

    def transpose(self, order) -> "TensorField":
        """Permute slots; ``order[k]`` is the source slot of new slot ``k``."""
        order = tuple(order)
        axes = order + tuple(range(self.rank, self.data.ndim))
        return TensorField(self.chart, self.data.transpose(axes),
                           "".join(self.slots[k] for k in order))

    def sup(self) -> float:
        return float(np.max(np.abs(self.data))) if self.data.size else 0.0

    def _check_compatible(self, other: "TensorField") -> None:
        if other.chart != self.chart or other.slots != self.slots:
            raise ValueError(
                f"incompatible fields: {self.slots!r} on {self.chart} vs "
                f"{other.slots!r} on {other.chart}")

    def __add__(self, other: "TensorField") -> "TensorField":
        self._check_compatible(other)
        return self.like(self.data + other.data)

    def __sub__(self, other: "TensorField") -> "TensorField":
        self._check_compatible(other)
        return self.like(self.data - other.data)

    def __neg__(self) -> "TensorField":
        return self.like(-self.data)

    def __mul__(self, scalar) -> "TensorField":
        return self.like(self.data * scalar)

    __rmul__ = __mul__

    @classmethod
    def zeros(cls, chart: TorusChart, slots: str = "") -> "TensorField":
        return cls(chart, np.zeros((chart.n,) * len(slots) + chart.shape, complex), slots)

    @classmethod
    def scalar(cls, chart: TorusChart, values) -> "TensorField":
        return cls(chart, np.broadcast_to(np.asarray(values, complex), chart.shape).copy(), "")


@dataclass(frozen=True, eq=False)
class HermitianMetric:
    """A pointwise positive Hermitian (1,1)-tensor with cached inverse.

    Raises ``ValueError`` when the field is not Hermitian or not positive.
    """

    g: TensorField
    hermitian_tol: float = 1e-12
    ginv: np.ndarray = field(init=False, repr=False)
    min_eig: float = field(init=False)
    max_eig: float = field(init=False)

    def __post_init__(self):
        g = self.g
        if g.slots != "ub":
            raise ValueError(f"metric must have slots 'ub', got {g.slots!r}")
        scale = max(1.0, g.sup())
        herm = hermitian_residual(g.data)
        if herm > self.hermitian_tol * scale:
            raise ValueError(f"metric is not Hermitian: residual {herm:.3e}")
        ginv, lo, hi = backend.kernels.herm_inverse_eig(g.data)
        if not lo > 0:
            raise ValueError(f"metric is not positive definite: min eigenvalue {lo:.6g}")
        object.__setattr__(self, "ginv", ginv)
        object.__setattr__(self, "min_eig", float(lo))
        object.__setattr__(self, "max_eig", float(hi))

    @property
    def chart(self) -> TorusChart:
        return self.g.chart

    @property
    def n(self) -> int:
        return self.g.chart.n

    def inverse_field(self) -> TensorField:
        """g^{b̄a} as a field; slot 0 is the barred index b, slot 1 the unbarred a."""
        return TensorField(self.chart, self.ginv, "bu")

    def scaled(self, a: float) -> "HermitianMetric":
        return HermitianMetric(self.g * a, self.hermitian_tol)


def hermitian_residual(data: np.ndarray) -> float:
    """max |g_{ij̄} - conj(g_{jī})| over the grid."""
    return float(np.max(np.abs(data - np.conj(np.swapaxes(data, 0, 1)))))


def hermitian_part(data: np.ndarray) -> np.ndarray:
    return 0.5 * (data + np.conj(np.swapaxes(data, 0, 1)))


# --------------------------------------------------------------------------
# spectral differentiation

def spectral_derivative(f: TensorField, j: int, *, bar: bool = False,
                        dealiased: bool = False) -> TensorField:
    """Raw coordinate derivative d/dz_j (or d/dz̄_j) of every component.

    No slot is added.  ``j`` is zero-based.
    """
    chart = f.chart
    symbol = chart.dzbar_symbol(j) if bar else chart.dz_symbol(j)
    spec = chart.fft(f.data)
    if dealiased:
        spec = spec * chart.dealias_mask
    return f.like(chart.ifft(spec * symbol))


def gradient(f: TensorField, *, bar: bool = False) -> TensorField:
    """All n coordinate derivatives, stacked as a new leading slot."""
    chart = f.chart
    spec = chart.fft(f.data)
    sym = chart.dzbar_symbol if bar else chart.dz_symbol
    out = np.empty((chart.n,) + f.data.shape, dtype=complex)
    for j in range(chart.n):
        out[j] = chart.ifft(spec * sym(j))
    return TensorField(chart, out, ("b" if bar else "u") + f.slots)


def dealias(f: TensorField) -> TensorField:
    """Zero every Fourier mode outside the 2/3-rule band."""
    chart = f.chart
    return f.like(chart.ifft(chart.fft(f.data) * chart.dealias_mask))


# --------------------------------------------------------------------------
# metric contractions

_LETTERS = string.ascii_letters


def _operand(x):
    return x.data if isinstance(x, TensorField) else x


def metric_einsum(subscripts: str, *operands, ginv: np.ndarray | None = None) -> np.ndarray:
    """Pointwise einsum over tensor slots with bar-aware metric traces.

    Lowercase letters are unbarred slots, uppercase barred.  An index name
    that appears exactly once lowercase and once uppercase across the inputs
    (and not in the output) is traced with ``ginv``.  Names shared with the
    output must appear exactly once in the inputs with the same case.  Grid
    axes are carried implicitly as trailing dimensions.
    """
    lhs, _, out = subscripts.replace(" ", "").partition("->")
    terms = lhs.split(",")
    if len(terms) != len(operands):
        raise ValueError(f"{len(terms)} subscripts for {len(operands)} operands")

    occurrences: dict[str, list[tuple[int, int, bool]]] = {}
    for t, term in enumerate(terms):
        for pos, ch in enumerate(term):
            occurrences.setdefault(ch.lower(), []).append((t, pos, ch.isupper()))

    pool = iter(_LETTERS)
    new_terms = [list(term) for term in terms]
    new_out = list(out)
    extra = []  # (subscript, operand) pairs for inserted inverse metrics
    out_names = {ch.lower(): ch for ch in out}
    for name, occ in occurrences.items():
        if name in out_names:
            if len(occ) != 1 or occ[0][2] != out_names[name].isupper():
                raise ValueError(f"free index {name!r} must appear once with matching bar")
            letter = next(pool)
            t, pos, _ = occ[0]
            new_terms[t][pos] = letter
            new_out[out.index(out_names[name])] = letter
            continue
        if len(occ) != 2 or occ[0][2] == occ[1][2]:
            raise ValueError(
                f"index {name!r} must pair one unbarred and one barred slot, got {occ}")
        if ginv is None:
            raise ValueError("metric trace requested without an inverse metric")
        lo = next(pool)
        hi = next(pool)
        for t, pos, barred in occ:
            new_terms[t][pos] = hi if barred else lo
        extra.append(hi + lo)

    inputs = ["".join(t) + "..." for t in new_terms] + [s + "..." for s in extra]
    spec = ",".join(inputs) + "->" + "".join(new_out) + "..."
    arrays = [_operand(o) for o in operands] + [ginv] * len(extra)
    return np.einsum(spec, *arrays, optimize=len(arrays) > 2)


def _slot_letters(slots: str, start: int) -> list[str]:
    letters = _LETTERS[start:start + len(slots)]
    return [c.upper() if s == "b" else c for c, s in zip(letters, slots)]


def contract(a: TensorField, b: TensorField, pairing, metric: HermitianMetric) -> TensorField:
    """Trace slot pairs of ``a`` and ``b`` with the inverse metric.

    ``pairing`` lists ``(slot_in_a, slot_in_b)``; each pair must join one
    unbarred and one barred slot.  The result carries the leftover slots of
    ``a`` followed by those of ``b``.
    """
    if a.chart != b.chart or metric.chart != a.chart:
        raise ValueError("fields live on different charts")
    la = _slot_letters(a.slots, 0)
    lb = _slot_letters(b.slots, 26 - len(b.slots))
    used_a, used_b = set(), set()
    for ia, ib in pairing:
        if not (0 <= ia < a.rank and 0 <= ib < b.rank):
            raise ValueError(f"slot pair {(ia, ib)} out of range")
        if ia in used_a or ib in used_b:
            raise ValueError(f"slot pair {(ia, ib)} reuses a slot")
        if a.slots[ia] == b.slots[ib]:
            raise ValueError(f"slot pair {(ia, ib)} joins two {a.slots[ia]!r} slots")
        name = la[ia].lower()
        lb[ib] = name.upper() if b.slots[ib] == "b" else name
        used_a.add(ia)
        used_b.add(ib)
    out_a = [la[k] for k in range(a.rank) if k not in used_a]
    out_b = [lb[k] for k in range(b.rank) if k not in used_b]
    spec = "".join(la) + "," + "".join(lb) + "->" + "".join(out_a + out_b)
    data = metric_einsum(spec, a, b, ginv=metric.ginv)
    slots = "".join("b" if c.isupper() else "u" for c in out_a + out_b)
    return TensorField(a.chart, data, slots)


def inner_product(a: TensorField, b: TensorField, metric: HermitianMetric) -> np.ndarray:
    """Pointwise Hermitian inner product (a, b), complex-valued on the grid."""
    if a.slots != b.slots:
        raise ValueError(f"signature mismatch: {a.slots!r} vs {b.slots!r}")
    if a.rank == 0:
        return a.data * np.conj(b.data)
    pairs = [(k, k) for k in range(a.rank)]
    return contract(a, b.conjugate(), pairs, metric).data


def norm_sq(a: TensorField, metric: HermitianMetric) -> np.ndarray:
    """Pointwise |a|^2 (real)."""
    return inner_product(a, a, metric).real


def _apply_on_slot(mat: np.ndarray, a: np.ndarray, slot: int) -> np.ndarray:
    """out[..., s, ...] = sum_c mat[s, c] a[..., c, ...] at tensor slot ``slot``."""
    moved = np.moveaxis(a, slot, 0)
    out = np.einsum("sc...,c...->s...", mat, moved)
    return np.moveaxis(out, 0, slot)


def h_bracket(h: TensorField, a: TensorField, metric: HermitianMetric) -> TensorField:
    """The slot-signed action h[A]: minus h traced into every slot of A."""
    if h.slots != "ub":
        raise ValueError(f"h must be a (1,1)-tensor with slots 'ub', got {h.slots!r}")
    G = metric.ginv
    # h_p^a on unbarred slots, (g^{-1} h)^b_q on barred slots
    h_up = np.einsum("pb...,ba...->pa...", h.data, G)
    h_dn = np.einsum("ba...,aq...->qb...", G, h.data)
    out = np.zeros_like(a.data)
    for k, s in enumerate(a.slots):
        out -= _apply_on_slot(h_up if s == "u" else h_dn, a.data, k)
    return a.like(out)


def circle_op(z: TensorField, a: TensorField, metric: HermitianMetric,
              pair: tuple[int, int] | None = None) -> TensorField:
    """Z∘A: minus on the unbarred slots of A, plus on the barred ones.

    ``pair`` names the (unbarred, barred) slots of ``z`` that act on A; by
    default the last two.  The remaining slots of ``z`` lead the result.
    """
    if pair is None:
        pair = (z.rank - 2, z.rank - 1)
    i, j = pair
    if z.rank < 2 or not (0 <= i < z.rank and 0 <= j < z.rank) or i == j:
        raise ValueError(f"invalid acting pair {pair} for slots {z.slots!r}")
    if z.slots[i] != "u" or z.slots[j] != "b":
        raise ValueError(f"acting pair {pair} must be (unbarred, barred), got "
                         f"{z.slots[i]!r}, {z.slots[j]!r}")
    lead = [k for k in range(z.rank) if k not in pair]
    zt = z.transpose(lead + [i, j]).data
    nl = len(lead)
    G = metric.ginv
    lead_idx = "IJKLM"[:nl]
    z_up = np.einsum(f"{lead_idx}pb...,ba...->{lead_idx}pa...", zt, G)
    z_dn = np.einsum(f"ba...,{lead_idx}aq...->{lead_idx}qb...", G, zt)
    out = np.zeros((z.chart.n,) * nl + a.data.shape, dtype=complex)
    for k, s in enumerate(a.slots):
        mat, sign = (z_up, -1.0) if s == "u" else (z_dn, 1.0)
        moved = np.moveaxis(a.data, k, 0)
        term = np.einsum(f"{lead_idx}sc...,c...->{lead_idx}s...", mat, moved)
        out += sign * np.moveaxis(term, nl, nl + k)
    slots = "".join(z.slots[k] for k in lead) + a.slots
    return TensorField(z.chart, out, slots)
