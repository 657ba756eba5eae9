"""Operation-counting arithmetic for the adaptive-filter hot paths.

Every helper performs the numpy operation and tallies the complex
additions and multiplications it implies.  Divisions count as
multiplications; a real scalar times a complex vector counts one
multiplication per element.  Conjugation is free.
"""

from __future__ import annotations

import numpy as np


class OpCounter:
    __slots__ = ("adds", "mults")

    def __init__(self):
        self.adds = 0
        self.mults = 0

    def reset(self):
        self.adds = 0
        self.mults = 0

    def snapshot(self):
        return (self.adds, self.mults)

    def tally(self, adds=0, mults=0):
        self.adds += adds
        self.mults += mults

    # inner products and matrix products

    def vdot(self, x, y):
        """``x^H y``."""
        n = x.shape[0]
        self.adds += n - 1
        self.mults += n
        return np.vdot(x, y)

    def matvec(self, A, x):
        rows, cols = A.shape
        self.adds += rows * (cols - 1)
        self.mults += rows * cols
        return A @ x

    def rank1_update(self, A, x, y):
        """``A + x y^H``."""
        rows, cols = A.shape
        self.adds += rows * cols
        self.mults += rows * cols
        return A + np.outer(x, y.conj())

    # elementwise vector work

    def scale(self, c, x):
        self.mults += x.shape[0]
        return c * x

    def axpy(self, c, x, y):
        """``c*x + y``."""
        n = x.shape[0]
        self.mults += n
        self.adds += n
        return c * x + y

    def add(self, x, y):
        self.adds += x.shape[0]
        return x + y

    def sub(self, x, y):
        self.adds += x.shape[0]
        return x - y

    # scalars

    def smul(self, *factors):
        out = factors[0]
        for f in factors[1:]:
            out = out * f
        self.mults += len(factors) - 1
        return out

    def sdiv(self, a, b):
        self.mults += 1
        return a / b

    def sadd(self, *terms):
        self.adds += len(terms) - 1
        return sum(terms[1:], terms[0])


class NullCounter(OpCounter):
    """Same interface, no bookkeeping."""

    def tally(self, adds=0, mults=0):
        pass

    def vdot(self, x, y):
        return np.vdot(x, y)

    def matvec(self, A, x):
        return A @ x

    def rank1_update(self, A, x, y):
        return A + np.outer(x, y.conj())

    def scale(self, c, x):
        return c * x

    def axpy(self, c, x, y):
        return c * x + y

    def add(self, x, y):
        return x + y

    def sub(self, x, y):
        return x - y

    def smul(self, *factors):
        out = factors[0]
        for f in factors[1:]:
            out = out * f
        return out

    def sdiv(self, a, b):
        return a / b

    def sadd(self, *terms):
        return sum(terms[1:], terms[0])
