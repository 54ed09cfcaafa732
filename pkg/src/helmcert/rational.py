"""Exact rational matrices and univariate polynomials.

Everything here works on :class:`fractions.Fraction`, so determinants,
interpolation and Sturm counts carry no rounding error.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


class RationalMatrix:
    """Dense matrix of Fractions."""

    def __init__(self, rows: Iterable[Iterable]):
        self.rows = tuple(tuple(_frac(x) for x in r) for r in rows)
        n = len(self.rows[0]) if self.rows else 0
        if any(len(r) != n for r in self.rows):
            raise ValueError("ragged matrix")

    @classmethod
    def zeros(cls, n: int, m: int) -> "RationalMatrix":
        return cls([[0] * m for _ in range(n)])

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.rows), len(self.rows[0]) if self.rows else 0)

    def __getitem__(self, idx):
        r, c = idx
        return self.rows[r][c]

    def __eq__(self, other) -> bool:
        if isinstance(other, RationalMatrix):
            return self.rows == other.rows
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.rows)

    def __sub__(self, other: "RationalMatrix") -> "RationalMatrix":
        return RationalMatrix([[a - b for a, b in zip(r, s)] for r, s in zip(self.rows, other.rows)])

    def __add__(self, other: "RationalMatrix") -> "RationalMatrix":
        return RationalMatrix([[a + b for a, b in zip(r, s)] for r, s in zip(self.rows, other.rows)])

    def scale(self, c) -> "RationalMatrix":
        c = _frac(c)
        return RationalMatrix([[c * a for a in r] for r in self.rows])

    def transpose(self) -> "RationalMatrix":
        return RationalMatrix(zip(*self.rows))

    def det(self) -> Fraction:
        n, m = self.shape
        if n != m:
            raise ValueError("determinant of a non-square matrix")
        a = [list(r) for r in self.rows]
        det = Fraction(1)
        for col in range(n):
            piv = next((r for r in range(col, n) if a[r][col] != 0), None)
            if piv is None:
                return Fraction(0)
            if piv != col:
                a[col], a[piv] = a[piv], a[col]
                det = -det
            p = a[col][col]
            det *= p
            for r in range(col + 1, n):
                f = a[r][col] / p
                if f:
                    row, prow = a[r], a[col]
                    for c in range(col, n):
                        row[c] -= f * prow[c]
        return det

    def to_numpy(self) -> np.ndarray:
        return np.array([[float(x) for x in r] for r in self.rows])

    def __repr__(self) -> str:
        return f"RationalMatrix({[[str(x) for x in r] for r in self.rows]})"


class RationalPoly:
    """Polynomial with Fraction coefficients in ascending degree order."""

    def __init__(self, coeffs: Iterable = ()):
        c = [_frac(x) for x in coeffs]
        while c and c[-1] == 0:
            c.pop()
        self.coeffs = tuple(c)

    @classmethod
    def from_roots(cls, roots: Sequence) -> "RationalPoly":
        p = cls([1])
        for r in roots:
            p = p * cls([-_frac(r), 1])
        return p

    @classmethod
    def interpolate(cls, xs: Sequence, ys: Sequence) -> "RationalPoly":
        """Lagrange interpolation through the points ``(xs[i], ys[i])``."""
        xs = [_frac(x) for x in xs]
        if len(set(xs)) != len(xs):
            raise ValueError("interpolation nodes must be distinct")
        out = cls()
        for i, (xi, yi) in enumerate(zip(xs, ys)):
            basis = cls([1])
            denom = Fraction(1)
            for j, xj in enumerate(xs):
                if j != i:
                    basis = basis * cls([-xj, 1])
                    denom *= xi - xj
            out = out + basis.scale(_frac(yi) / denom)
        return out

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def lead(self) -> Fraction:
        return self.coeffs[-1] if self.coeffs else Fraction(0)

    def __call__(self, x):
        acc = 0 if not isinstance(x, Fraction) else Fraction(0)
        for c in reversed(self.coeffs):
            acc = acc * x + (c if isinstance(x, Fraction) else float(c))
        return acc

    def __eq__(self, other) -> bool:
        if isinstance(other, RationalPoly):
            return self.coeffs == other.coeffs
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.coeffs)

    def __add__(self, other: "RationalPoly") -> "RationalPoly":
        n = max(len(self.coeffs), len(other.coeffs))
        a = self.coeffs + (Fraction(0),) * (n - len(self.coeffs))
        b = other.coeffs + (Fraction(0),) * (n - len(other.coeffs))
        return RationalPoly(x + y for x, y in zip(a, b))

    def __neg__(self) -> "RationalPoly":
        return RationalPoly(-c for c in self.coeffs)

    def __sub__(self, other: "RationalPoly") -> "RationalPoly":
        return self + (-other)

    def __mul__(self, other: "RationalPoly") -> "RationalPoly":
        if self.is_zero() or other.is_zero():
            return RationalPoly()
        out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return RationalPoly(out)

    def __pow__(self, n: int) -> "RationalPoly":
        out = RationalPoly([1])
        for _ in range(n):
            out = out * self
        return out

    def scale(self, c) -> "RationalPoly":
        c = _frac(c)
        return RationalPoly(c * a for a in self.coeffs)

    def divmod(self, other: "RationalPoly") -> tuple["RationalPoly", "RationalPoly"]:
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        rem = list(self.coeffs)
        q = [Fraction(0)] * max(len(rem) - len(other.coeffs) + 1, 1)
        d = other.degree
        while len(rem) - 1 >= d and any(rem):
            shift = len(rem) - 1 - d
            f = rem[-1] / other.lead
            q[shift] = f
            for i, c in enumerate(other.coeffs):
                rem[i + shift] -= f * c
            rem.pop()
            while rem and rem[-1] == 0:
                rem.pop()
        return RationalPoly(q), RationalPoly(rem)

    def __floordiv__(self, other: "RationalPoly") -> "RationalPoly":
        return self.divmod(other)[0]

    def __mod__(self, other: "RationalPoly") -> "RationalPoly":
        return self.divmod(other)[1]

    def derivative(self) -> "RationalPoly":
        return RationalPoly(i * c for i, c in enumerate(self.coeffs) if i > 0)

    def monic(self) -> "RationalPoly":
        return self.scale(1 / self.lead) if self.coeffs else self

    def gcd(self, other: "RationalPoly") -> "RationalPoly":
        a, b = self, other
        while not b.is_zero():
            a, b = b, a % b
        return a.monic()

    def squarefree(self) -> "RationalPoly":
        g = self.gcd(self.derivative())
        return self // g if g.degree > 0 else self

    def sturm_sequence(self) -> list["RationalPoly"]:
        seq = [self, self.derivative()]
        while not seq[-1].is_zero():
            r = seq[-2] % seq[-1]
            if r.is_zero():
                break
            seq.append(-r)
        return seq

    def sign_changes(self, x, seq: list["RationalPoly"] | None = None) -> int:
        """Sign changes of the Sturm sequence at ``x`` (``None`` means +infinity)."""
        seq = seq if seq is not None else self.sturm_sequence()
        vals = [p.lead if x is None else p(_frac(x)) for p in seq]
        signs = [v > 0 for v in vals if v != 0]
        return sum(1 for s, t in zip(signs, signs[1:]) if s != t)

    def count_roots(self, a, b=None) -> int:
        """Distinct real roots in ``(a, b]``; ``b=None`` counts up to +infinity."""
        seq = self.sturm_sequence()
        return self.sign_changes(a, seq) - self.sign_changes(b, seq)

    def __repr__(self) -> str:
        return f"RationalPoly({[str(c) for c in self.coeffs]})"

    def __str__(self) -> str:
        return format_poly(self)


def format_poly(p: RationalPoly, var: str = "lam") -> str:
    if p.is_zero():
        return "0"
    terms = []
    for i, c in enumerate(p.coeffs):
        if c == 0:
            continue
        mono = "" if i == 0 else (var if i == 1 else f"{var}^{i}")
        coef = str(abs(c))
        if mono and abs(c) == 1:
            body = mono
        elif mono:
            body = f"{coef}*{mono}"
        else:
            body = coef
        terms.append(("-" if c < 0 else "+", body))
    head = ("-" if terms[0][0] == "-" else "") + terms[0][1]
    return " ".join([head] + [f"{s} {b}" for s, b in terms[1:]])
