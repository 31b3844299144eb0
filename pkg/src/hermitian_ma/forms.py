"""Complexified exterior algebra over dz^1..dz^n, dzbar^1..dzbar^n.

A form of bidegree (p, q) is stored as a mapping from pairs of strictly
increasing index tuples (dz multi-index, dzbar multi-index) to coefficient
arrays.  Coefficients may be scalars, per-sample batches, or grid-shaped
fields; the algebra only requires that they broadcast together, so the
same machinery serves single-point evaluation, Monte-Carlo samplers, and
full field computations.

Basis ordering convention: dz^{i1} ^ ... ^ dz^{ip} ^ dzbar^{j1} ^ ... ^
dzbar^{jq} with both index tuples increasing.  Products account for the
(-1)^{q1 p2} block swap plus the merge permutations of each index group.
"""

from __future__ import annotations

from math import factorial

import numpy as np

__all__ = [
    "Form",
    "PointForm",
    "point_exterior_product",
    "flat_volume_coefficient",
    "metric_form",
    "holo_one_form",
    "anti_one_form",
    "form_power",
]


def _merge(left: tuple, right: tuple):
    """Merge two increasing index tuples; (sign, merged) or (0, None)."""
    if not left:
        return 1, right
    if not right:
        return 1, left
    if set(left) & set(right):
        return 0, None
    combined = left + right
    sign = 1
    # Count inversions of the concatenation (tuples are tiny, n <= 3).
    for a in range(len(combined)):
        for b in range(a + 1, len(combined)):
            if combined[a] > combined[b]:
                sign = -sign
    return sign, tuple(sorted(combined))


class Form:
    """Homogeneous-bidegree exterior form with array coefficients."""

    __slots__ = ("n", "degree", "coeffs")

    def __init__(self, n: int, degree: tuple[int, int], coeffs: dict | None = None):
        self.n = n
        self.degree = degree
        self.coeffs = {} if coeffs is None else coeffs

    @classmethod
    def zero(cls, n, degree):
        return cls(n, degree, {})

    @classmethod
    def constant(cls, n, value=1.0):
        return cls(n, (0, 0), {((), ()): np.asarray(value, dtype=np.complex128)})

    def copy(self):
        return Form(self.n, self.degree, dict(self.coeffs))

    def add_term(self, key, value):
        if key in self.coeffs:
            self.coeffs[key] = self.coeffs[key] + value
        else:
            self.coeffs[key] = value

    def __add__(self, other):
        if self.n != other.n or self.degree != other.degree:
            raise ValueError("can only add forms of equal dimension and bidegree")
        out = self.copy()
        for key, val in other.coeffs.items():
            out.add_term(key, val)
        return out

    def scale(self, factor):
        return Form(self.n, self.degree, {k: v * factor for k, v in self.coeffs.items()})

    def __sub__(self, other):
        return self + other.scale(-1.0)

    def wedge(self, other: "Form") -> "Form":
        p1, q1 = self.degree
        p2, q2 = other.degree
        degree = (p1 + p2, q1 + q2)
        out = Form(self.n, degree)
        if degree[0] > self.n or degree[1] > self.n:
            return out
        block_sign = -1.0 if (q1 * p2) % 2 else 1.0
        for (i1, j1), c1 in self.coeffs.items():
            for (i2, j2), c2 in other.coeffs.items():
                si, mi = _merge(i1, i2)
                if si == 0:
                    continue
                sj, mj = _merge(j1, j2)
                if sj == 0:
                    continue
                out.add_term((mi, mj), (block_sign * si * sj) * (c1 * c2))
        return out

    def top_coefficient(self):
        """Coefficient on dz^{0..n-1} ^ dzbar^{0..n-1} (zero array if absent)."""
        full = tuple(range(self.n))
        if (full, full) in self.coeffs:
            return self.coeffs[(full, full)]
        return np.asarray(0.0, dtype=np.complex128)

    def sup_norm(self) -> float:
        """Largest absolute coefficient value across all basis terms."""
        if not self.coeffs:
            return 0.0
        return max(float(np.max(np.abs(v))) for v in self.coeffs.values())

    def conjugate(self) -> "Form":
        """Complex conjugate form; bidegree (p, q) becomes (q, p)."""
        p, q = self.degree
        sign = -1.0 if (p * q) % 2 else 1.0
        out = Form(self.n, (q, p))
        for (i, j), c in self.coeffs.items():
            out.add_term((j, i), sign * np.conj(c))
        return out


def flat_volume_coefficient(n: int) -> complex:
    """Top coefficient of the flat Hermitian volume form omega_I^n."""
    sign = -1.0 if (n * (n - 1) // 2) % 2 else 1.0
    return factorial(n) * (1j**n) * sign


def metric_form(values: np.ndarray, n: int) -> Form:
    """(1,1)-form i * sum h_{ij} dz^i ^ dzbar^j from a matrix array."""
    out = Form(n, (1, 1))
    for i in range(n):
        for j in range(n):
            out.add_term(((i,), (j,)), 1j * np.asarray(values[..., i, j]))
    return out


def holo_one_form(components, n: int) -> Form:
    """(1,0)-form sum c_i dz^i."""
    out = Form(n, (1, 0))
    for i in range(n):
        out.add_term(((i,), ()), np.asarray(components[i], dtype=np.complex128))
    return out


def anti_one_form(components, n: int) -> Form:
    """(0,1)-form sum c_j dzbar^j."""
    out = Form(n, (0, 1))
    for j in range(n):
        out.add_term(((), (j,)), np.asarray(components[j], dtype=np.complex128))
    return out


def form_power(form: Form, k: int) -> Form:
    """k-fold wedge power; k = 0 gives the constant function 1."""
    out = Form.constant(form.n)
    for _ in range(k):
        out = out.wedge(form)
    return out


class PointForm(Form):
    """Exterior-algebra element at a single point (scalar coefficients).

    Coefficient count for bidegree (p, q) is C(n,p) * C(n,q); the
    increasing-index representation keeps antisymmetry implicit.
    """

    def __init__(self, n, degree, coeffs=None):
        cleaned = {}
        if coeffs:
            for (i, j), val in coeffs.items():
                key = (tuple(i), tuple(j))
                if len(key[0]) != degree[0] or len(key[1]) != degree[1]:
                    raise ValueError(f"key {key} inconsistent with bidegree {degree}")
                if tuple(sorted(key[0])) != key[0] or tuple(sorted(key[1])) != key[1]:
                    raise ValueError(f"key {key} indices must be strictly increasing")
                cleaned[key] = complex(val)
        super().__init__(n, degree, cleaned)


def point_exterior_product(forms) -> Form:
    """Wedge a sequence of forms, rejecting total bidegree beyond (n, n)."""
    forms = list(forms)
    if not forms:
        raise ValueError("need at least one form")
    n = forms[0].n
    p_total = sum(f.degree[0] for f in forms)
    q_total = sum(f.degree[1] for f in forms)
    if p_total > n or q_total > n:
        raise ValueError(f"degree overflow: total bidegree ({p_total},{q_total}) exceeds ({n},{n})")
    out = forms[0]
    for f in forms[1:]:
        out = out.wedge(f)
    return out
