"""Parametric payoff and competition-kernel families.

Payoffs and kernels are deliberately restricted to small parametric
families rather than a general expression language: configs stay
auditable and the supermodularity/monotonicity checks stay meaningful.
All callables broadcast over numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import InputError, ValidationError

_DIFF_STEP = 1e-6


def _asarray(x):
    return np.asarray(x, dtype=float)


@dataclass(frozen=True)
class ScalarFn:
    """Scalar function of a vertical type, used for affine payoff coefficients.

    kind "affine": c0 + c1*v.  kind "table": piecewise-linear interpolation
    on (knots, values), clamped outside the knot range.
    """

    kind: str
    c0: float = 0.0
    c1: float = 0.0
    knots: tuple = ()
    values: tuple = ()

    def __post_init__(self):
        if self.kind not in ("affine", "table"):
            raise ValidationError(f"unknown scalar-function kind {self.kind!r}")
        if self.kind == "table":
            if len(self.knots) != len(self.values) or len(self.knots) < 1:
                raise ValidationError("scalar table needs matching knots/values")
            if len(self.knots) > 1 and np.any(np.diff(self.knots) <= 0):
                raise ValidationError("scalar table knots must be strictly increasing")

    def __call__(self, v):
        v = _asarray(v)
        if self.kind == "affine":
            return self.c0 + self.c1 * v
        if len(self.knots) == 1:
            return np.full_like(v, self.values[0])
        return np.interp(v, self.knots, self.values)

    @staticmethod
    def constant(c):
        return ScalarFn("affine", c0=float(c))

    @staticmethod
    def identity():
        return ScalarFn("affine", c1=1.0)

    @staticmethod
    def table(knots, values):
        return ScalarFn("table", knots=tuple(map(float, knots)), values=tuple(map(float, values)))


@dataclass(frozen=True)
class ShapeFn:
    """Shape function g(x) on match sizes.

    Kinds: "power" x**rho with rho > 0, "log1p" log(1+x),
    "affine" a*x + b, "table" piecewise-linear on (knots, values).
    """

    kind: str
    rho: float = 1.0
    a: float = 1.0
    b: float = 0.0
    knots: tuple = ()
    values: tuple = ()

    def __post_init__(self):
        if self.kind not in ("power", "log1p", "affine", "table"):
            raise ValidationError(f"unknown shape-function kind {self.kind!r}")
        if self.kind == "power" and not self.rho > 0:
            raise ValidationError("power shape needs rho > 0")
        if self.kind == "table":
            if len(self.knots) != len(self.values) or len(self.knots) < 2:
                raise ValidationError("shape table needs at least two knots")
            if np.any(np.diff(self.knots) <= 0):
                raise ValidationError("shape table knots must be strictly increasing")

    def __call__(self, x):
        x = _asarray(x)
        if self.kind == "power":
            return np.power(np.maximum(x, 0.0), self.rho)
        if self.kind == "log1p":
            return np.log1p(np.maximum(x, -1.0 + 1e-15))
        if self.kind == "affine":
            return self.a * x + self.b
        return np.interp(x, self.knots, self.values)

    @staticmethod
    def linear(a=1.0, b=0.0):
        return ShapeFn("affine", a=float(a), b=float(b))


@dataclass(frozen=True)
class PayoffFamily:
    """Two-argument payoff U(v, x): vertical type and match size/quality.

    kind "affine": a(v) + b(v)*x with ScalarFn coefficients.
    kind "multiplicative": v * g(x) with a ShapeFn g.
    kind "tabulated": bilinear interpolation on a (v, x) grid.
    Every kind additionally carries slope_bonus*x, which is how
    increasing-differences payoff shifts are represented.
    """

    kind: str
    a: ScalarFn | None = None
    b: ScalarFn | None = None
    g: ShapeFn | None = None
    v_knots: tuple = ()
    x_knots: tuple = ()
    table: tuple = ()  # rows indexed by v_knots, columns by x_knots
    slope_bonus: float = 0.0

    def __post_init__(self):
        if self.kind == "affine":
            if self.a is None or self.b is None:
                raise ValidationError("affine payoff needs both a(v) and b(v)")
        elif self.kind == "multiplicative":
            if self.g is None:
                raise ValidationError("multiplicative payoff needs g(x)")
        elif self.kind == "tabulated":
            rows = len(self.v_knots)
            cols = len(self.x_knots)
            if rows < 2 or cols < 2 or len(self.table) != rows or any(len(r) != cols for r in self.table):
                raise ValidationError("tabulated payoff needs a full (v, x) grid with >= 2 knots per axis")
        else:
            raise ValidationError(f"unknown payoff kind {self.kind!r}")

    def value(self, v, x):
        v = _asarray(v)
        x = _asarray(x)
        if self.kind == "affine":
            base = self.a(v) + self.b(v) * x
        elif self.kind == "multiplicative":
            base = v * self.g(x)
        else:
            base = _bilinear(self.v_knots, self.x_knots, self.table, v, x)
        if self.slope_bonus:
            base = base + self.slope_bonus * x
        return base

    __call__ = value

    def dx(self, v, x):
        """Central-difference derivative in the size argument, step 1e-6*max(1,|x|)."""
        x = _asarray(x)
        step = _DIFF_STEP * np.maximum(1.0, np.abs(x))
        return (self.value(v, x + step) - self.value(v, x - step)) / (2.0 * step)

    def dv(self, v, x):
        v = _asarray(v)
        step = _DIFF_STEP * np.maximum(1.0, np.abs(v))
        return (self.value(v + step, x) - self.value(v - step, x)) / (2.0 * step)

    @property
    def is_affine_in_x(self):
        if self.kind == "affine":
            return True
        return self.kind == "multiplicative" and self.g.kind == "affine"

    def slope(self, v):
        """Effective marginal value of size, b(v), for affine-in-x payoffs."""
        if not self.is_affine_in_x:
            raise InputError("payoff is not affine in the size argument")
        v = _asarray(v)
        if self.kind == "affine":
            return self.b(v) + self.slope_bonus
        return v * self.g.a + self.slope_bonus

    def intercept(self, v):
        return self.value(v, 0.0)

    def with_slope_bonus(self, extra):
        return replace(self, slope_bonus=self.slope_bonus + float(extra))

    @staticmethod
    def linear():
        """U(v, x) = v*x."""
        return PayoffFamily("multiplicative", g=ShapeFn.linear())

    @staticmethod
    def multiplicative(g):
        return PayoffFamily("multiplicative", g=g)

    @staticmethod
    def affine(a, b):
        return PayoffFamily("affine", a=a, b=b)

    @staticmethod
    def zero():
        return PayoffFamily("multiplicative", g=ShapeFn.linear(0.0, 0.0))


def _bilinear(v_knots, x_knots, table, v, x):
    vg = np.asarray(v_knots, float)
    xg = np.asarray(x_knots, float)
    tab = np.asarray(table, float)
    v, x = np.broadcast_arrays(_asarray(v), _asarray(x))
    vq = np.clip(v, vg[0], vg[-1])
    xq = np.clip(x, xg[0], xg[-1])
    iv = np.clip(np.searchsorted(vg, vq, side="right") - 1, 0, len(vg) - 2)
    ix = np.clip(np.searchsorted(xg, xq, side="right") - 1, 0, len(xg) - 2)
    tv = (vq - vg[iv]) / (vg[iv + 1] - vg[iv])
    tx = (xq - xg[ix]) / (xg[ix + 1] - xg[ix])
    f00 = tab[iv, ix]
    f01 = tab[iv, ix + 1]
    f10 = tab[iv + 1, ix]
    f11 = tab[iv + 1, ix + 1]
    return (1 - tv) * ((1 - tx) * f00 + tx * f01) + tv * ((1 - tx) * f10 + tx * f11)


def _ces_salience_constants(sigma, theta):
    # kappa in (-1, 0) and psi > 0 whenever sigma > 1, theta in (0,1), sigma*(1-theta) > 1
    kappa = (sigma * (1.0 - theta) - 1.0) / ((1.0 - theta) * (1.0 - sigma))
    psi = (sigma / (sigma - 1.0)) ** (kappa * (1.0 - sigma))
    return kappa, psi


@dataclass(frozen=True)
class CompetitionKernel:
    """Non-negative weight h(size, sigma_i, sigma_f) on a firm-individual match.

    Base kinds over the size argument:
      "constant"      value
      "affine_trunc"  max(0, c0 - c1*size)
      "power"         scale * (size + eps)**kappa
      "ces"           psi * size**kappa with (psi, kappa) induced by (sigma, theta)
      "table"         piecewise-linear on (knots, values), clamped
    Optional exp(-sigma_i_decay*sigma_i) and exp(-sigma_f_decay*sigma_f)
    factors supply salience dependence.
    """

    kind: str
    value: float = 1.0
    c0: float = 1.0
    c1: float = 0.0
    scale: float = 1.0
    eps: float = 0.0
    kappa: float = -1.0
    sigma: float = 2.0
    theta: float = 0.5
    knots: tuple = ()
    values: tuple = ()
    sigma_i_decay: float = 0.0
    sigma_f_decay: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "affine_trunc", "power", "ces", "table"):
            raise ValidationError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "constant" and self.value < 0:
            raise ValidationError("constant kernel must be >= 0")
        if self.kind == "power" and (self.scale < 0 or self.eps < 0):
            raise ValidationError("power kernel needs scale >= 0 and eps >= 0")
        if self.kind == "ces":
            if not (self.sigma > 1 and 0 < self.theta < 1):
                raise ValidationError("ces kernel needs sigma > 1 and theta in (0,1)")
            if not self.sigma * (1 - self.theta) > 1:
                raise ValidationError("ces kernel needs sigma*(1-theta) > 1")
        if self.kind == "table":
            if len(self.knots) != len(self.values) or len(self.knots) < 2:
                raise ValidationError("kernel table needs at least two knots")
            if np.any(np.diff(self.knots) <= 0):
                raise ValidationError("kernel table knots must be strictly increasing")
            if min(self.values) < 0:
                raise ValidationError("kernel table values must be >= 0")
        if self.sigma_i_decay < 0 or self.sigma_f_decay < 0:
            raise ValidationError("kernel salience decays must be >= 0")

    def _base(self, size):
        size = _asarray(size)
        if self.kind == "constant":
            return np.full(size.shape, self.value)
        if self.kind == "affine_trunc":
            return np.maximum(0.0, self.c0 - self.c1 * size)
        if self.kind == "power":
            with np.errstate(divide="ignore"):
                return self.scale * np.power(size + self.eps, self.kappa)
        if self.kind == "ces":
            kappa, psi = _ces_salience_constants(self.sigma, self.theta)
            with np.errstate(divide="ignore"):
                return psi * np.power(size, kappa)
        return np.interp(size, self.knots, self.values)

    def __call__(self, size, sigma_i=1.0, sigma_f=1.0):
        size, sigma_i, sigma_f = np.broadcast_arrays(
            _asarray(size), _asarray(sigma_i), _asarray(sigma_f)
        )
        out = self._base(size)
        if self.sigma_i_decay:
            out = out * np.exp(-self.sigma_i_decay * sigma_i)
        if self.sigma_f_decay:
            out = out * np.exp(-self.sigma_f_decay * sigma_f)
        return out

    @staticmethod
    def constant(value=1.0):
        return CompetitionKernel("constant", value=float(value))

    @staticmethod
    def table(knots, values):
        return CompetitionKernel(
            "table", knots=tuple(map(float, knots)), values=tuple(map(float, values))
        )

    @staticmethod
    def power(scale=1.0, eps=1.0, kappa=-1.0):
        return CompetitionKernel("power", scale=float(scale), eps=float(eps), kappa=float(kappa))
