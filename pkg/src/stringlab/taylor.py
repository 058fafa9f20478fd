"""Truncated bivariate Taylor arithmetic in the null coordinates (u, ub).

A ``Taylor2`` stores normalised coefficients

    c[i, j] = d_u^i d_ub^j f / (i! j!)      for i + j <= K

at a batch of base points.  Arithmetic and elementary functions propagate the
coefficients exactly (up to rounding), which gives exact partial derivatives
of composite expressions without symbolic algebra or finite differences.  It
is used as the independent oracle for all chain-rule based formulas.
"""

from __future__ import annotations

import math

import numpy as np


def _fact(n):
    return float(math.factorial(n))


class Taylor2:
    __slots__ = ("c", "K")

    def __init__(self, coeffs, K: int):
        self.c = np.asarray(coeffs, dtype=float)
        self.K = int(K)

    # -- constructors --------------------------------------------------------

    @classmethod
    def constant(cls, value, K: int, shape=None):
        value = np.asarray(value, dtype=float)
        if shape is None:
            shape = value.shape
        c = np.zeros((K + 1, K + 1) + tuple(shape))
        c[0, 0] = value
        return cls(c, K)

    @classmethod
    def variable(cls, value, axis: str, K: int):
        value = np.asarray(value, dtype=float)
        t = cls.constant(value, K)
        if K >= 1:
            if axis == "u":
                t.c[1, 0] = 1.0
            elif axis == "ub":
                t.c[0, 1] = 1.0
            else:
                raise ValueError(axis)
        return t

    @classmethod
    def from_derivatives_u(cls, derivs, K: int):
        """Series in u alone from [f, f', f'', ...] at the base point."""
        d0 = np.asarray(derivs[0], dtype=float)
        c = np.zeros((K + 1, K + 1) + d0.shape)
        for n in range(K + 1):
            c[n, 0] = np.asarray(derivs[n], dtype=float) / _fact(n)
        return cls(c, K)

    # -- access ---------------------------------------------------------------

    @property
    def value(self):
        return self.c[0, 0]

    def deriv(self, i: int, j: int):
        """Exact partial derivative d_u^i d_ub^j at the base point."""
        if i + j > self.K:
            raise ValueError(f"derivative order {i + j} exceeds truncation order {self.K}")
        return self.c[i, j] * _fact(i) * _fact(j)

    def d_u(self):
        K = self.K - 1
        if K < 0:
            raise ValueError("cannot differentiate an order-0 series")
        c = np.zeros((K + 1, K + 1) + self.c.shape[2:])
        for i in range(K + 1):
            for j in range(K + 1 - i):
                c[i, j] = (i + 1) * self.c[i + 1, j]
        return Taylor2(c, K)

    def d_ub(self):
        K = self.K - 1
        if K < 0:
            raise ValueError("cannot differentiate an order-0 series")
        c = np.zeros((K + 1, K + 1) + self.c.shape[2:])
        for i in range(K + 1):
            for j in range(K + 1 - i):
                c[i, j] = (j + 1) * self.c[i, j + 1]
        return Taylor2(c, K)

    def truncate(self, K: int):
        if K > self.K:
            raise ValueError("cannot raise truncation order")
        c = np.zeros((K + 1, K + 1) + self.c.shape[2:])
        for i in range(K + 1):
            for j in range(K + 1 - i):
                c[i, j] = self.c[i, j]
        return Taylor2(c, K)

    # -- arithmetic -----------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, Taylor2):
            if other.K != self.K:
                k = min(self.K, other.K)
                return self.truncate(k), other.truncate(k)
            return self, other
        return self, Taylor2.constant(np.broadcast_to(other, self.c.shape[2:]), self.K)

    def __add__(self, other):
        a, b = self._coerce(other)
        return Taylor2(a.c + b.c, a.K)

    __radd__ = __add__

    def __neg__(self):
        return Taylor2(-self.c, self.K)

    def __sub__(self, other):
        a, b = self._coerce(other)
        return Taylor2(a.c - b.c, a.K)

    def __rsub__(self, other):
        a, b = self._coerce(other)
        return Taylor2(b.c - a.c, a.K)

    def __mul__(self, other):
        if not isinstance(other, Taylor2):
            return Taylor2(self.c * np.asarray(other, dtype=float), self.K)
        a, b = self._coerce(other)
        K = a.K
        c = np.zeros(np.broadcast_shapes(a.c.shape, b.c.shape))
        for i in range(K + 1):
            for j in range(K + 1 - i):
                acc = 0.0
                for p in range(i + 1):
                    for q in range(j + 1):
                        acc = acc + a.c[p, q] * b.c[i - p, j - q]
                c[i, j] = acc
        return Taylor2(c, K)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Taylor2):
            return Taylor2(self.c / np.asarray(other, dtype=float), self.K)
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, n):
        if isinstance(n, int) and n >= 0:
            out = Taylor2.constant(np.ones(self.c.shape[2:]), self.K)
            for _ in range(n):
                out = out * self
            return out
        return self.power(float(n))

    # -- elementary functions ---------------------------------------------------

    def compose(self, derivs):
        """f(self) from derivs[n] = f^(n)(self.value), n = 0..K."""
        x0 = self.c[0, 0]
        h = Taylor2(self.c.copy(), self.K)
        h.c[0, 0] = 0.0
        out = Taylor2.constant(np.asarray(derivs[0], dtype=float) * np.ones_like(x0), self.K)
        hn = None
        for n in range(1, self.K + 1):
            hn = h if hn is None else hn * h
            out = out + hn * (np.asarray(derivs[n], dtype=float) / _fact(n))
        return out

    def power(self, alpha: float):
        x0 = self.c[0, 0]
        derivs = []
        coef = 1.0
        for n in range(self.K + 1):
            derivs.append(coef * x0 ** (alpha - n))
            coef *= alpha - n
        return self.compose(derivs)

    def reciprocal(self):
        return self.power(-1.0)

    def sqrt(self):
        return self.power(0.5)

    def exp(self):
        e = np.exp(self.c[0, 0])
        return self.compose([e] * (self.K + 1))

    def sin(self):
        s, c = np.sin(self.c[0, 0]), np.cos(self.c[0, 0])
        cyc = [s, c, -s, -c]
        return self.compose([cyc[n % 4] for n in range(self.K + 1)])

    def cos(self):
        s, c = np.sin(self.c[0, 0]), np.cos(self.c[0, 0])
        cyc = [c, -s, -c, s]
        return self.compose([cyc[n % 4] for n in range(self.K + 1)])
