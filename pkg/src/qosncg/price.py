"""Price functions over an interval of edge weights and tradeoff minimizers.

A price function maps an edge weight (lower weight = better quality) to the
price of buying an edge of that weight.  Every supported form admits an exact
minimizer of ``a * p(x) + c * x`` over its interval, which is what the rest
of the package relies on.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BadInterval, NonPositivePrice, NotDecreasing, OutOfDomain, ValidationError

DOMAIN_TOL = 1e-12
VALIDATION_GRID = 1024


@dataclass(frozen=True)
class WeightInterval:
    lo: float
    hi: float

    def check(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise BadInterval(f"interval bounds must be finite, got [{self.lo}, {self.hi}]")
        if not 0 < self.lo <= self.hi:
            raise BadInterval(f"need 0 < lo <= hi, got [{self.lo}, {self.hi}]")

    def contains(self, x, tol=DOMAIN_TOL):
        return self.lo - tol <= x <= self.hi + tol

    @property
    def degenerate(self):
        return self.lo == self.hi


@dataclass(frozen=True)
class TradeoffMinimizer:
    """Result of minimizing ``price_scale * p(x) + coefficient * x``."""

    coefficient: float
    argmin: float
    value: float
    price_scale: float = 1.0


class PriceFunction:
    """Common interface of the four supported price forms.

    Subclasses provide ``_raw`` (evaluation on the interval), ``_argmin``
    (exact minimizer of ``a*p(x) + c*x``), ``_check`` and ``spec``.
    """

    kind = "abstract"

    @property
    def interval(self) -> WeightInterval:
        return WeightInterval(self.lo, self.hi)

    def __call__(self, x: float) -> float:
        return evaluate(self, x)

    def prices(self, xs) -> np.ndarray:
        return np.array([evaluate(self, float(x)) for x in xs], dtype=float)

    def _clamp(self, x):
        return min(max(x, self.lo), self.hi)

    def _raw(self, x: float) -> float:
        raise NotImplementedError

    def _argmin(self, a: float, c: float) -> float:
        raise NotImplementedError

    def _check(self):
        raise NotImplementedError

    def spec(self) -> str:
        raise NotImplementedError

    def __str__(self):
        return self.spec()


def _fmt(x: float) -> str:
    x = float(x)
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


@dataclass(frozen=True)
class Reciprocal(PriceFunction):
    """p(x) = alpha / x."""

    alpha: float
    lo: float
    hi: float
    kind = "reciprocal"

    def _raw(self, x):
        return self.alpha / x

    def _argmin(self, a, c):
        # a*alpha/x + c*x is convex on x > 0.
        return self._clamp(math.sqrt(a * self.alpha / c))

    def _check(self):
        if not self.alpha > 0:
            raise NonPositivePrice(f"reciprocal needs alpha > 0, got {self.alpha}")

    def spec(self):
        return f"reciprocal:alpha={_fmt(self.alpha)},lo={_fmt(self.lo)},hi={_fmt(self.hi)}"


@dataclass(frozen=True)
class Linear(PriceFunction):
    """p(x) = alpha - (1 + eps) * x."""

    alpha: float
    eps: float
    lo: float
    hi: float
    kind = "linear"

    def _raw(self, x):
        return self.alpha - (1.0 + self.eps) * x

    def _argmin(self, a, c):
        slope = c - a * (1.0 + self.eps)
        return self.lo if slope >= 0 else self.hi

    def _check(self):
        if 1.0 + self.eps < 0:
            raise NotDecreasing(f"linear price increases for eps={self.eps} < -1")
        for x in (self.lo, self.hi):
            if not self._raw(x) > 0:
                raise NonPositivePrice(f"p({x!r}) = {self._raw(x)!r} is not positive")

    def spec(self):
        return (f"linear:alpha={_fmt(self.alpha)},eps={_fmt(self.eps)},"
                f"lo={_fmt(self.lo)},hi={_fmt(self.hi)}")


@dataclass(frozen=True)
class Constant(PriceFunction):
    """p(x) = alpha; on [1, 1] this is the classical fixed-price game."""

    alpha: float
    lo: float
    hi: float
    kind = "constant"

    def _raw(self, x):
        return self.alpha

    def _argmin(self, a, c):
        return self.lo

    def _check(self):
        if not self.alpha > 0:
            raise NonPositivePrice(f"constant price must be positive, got {self.alpha}")

    def spec(self):
        return f"constant:alpha={_fmt(self.alpha)},lo={_fmt(self.lo)},hi={_fmt(self.hi)}"


@dataclass(frozen=True)
class Tabulated(PriceFunction):
    """Piecewise-linear interpolation through sorted ``(x, p(x))`` breakpoints."""

    xs: tuple
    ps: tuple
    source: str | None = field(default=None, compare=False)
    kind = "table"

    @property
    def lo(self):
        return self.xs[0]

    @property
    def hi(self):
        return self.xs[-1]

    def _raw(self, x):
        return float(np.interp(x, self.xs, self.ps))

    def _argmin(self, a, c):
        # A piecewise-linear objective attains its minimum at a breakpoint;
        # first strict minimum gives the smallest weight on ties.
        best_x, best_v = None, math.inf
        for x, px in zip(self.xs, self.ps):
            v = a * px + c * x
            if v < best_v:
                best_x, best_v = x, v
        return best_x

    def _check(self):
        if len(self.xs) == 0 or len(self.xs) != len(self.ps):
            raise ValidationError("table needs matching non-empty x and p(x) columns")
        if any(b <= a for a, b in zip(self.xs, self.xs[1:])):
            raise ValidationError("table breakpoints must be strictly increasing in x")
        if any(not v > 0 for v in self.ps):
            raise NonPositivePrice("table contains a non-positive price")
        if any(b > a for a, b in zip(self.ps, self.ps[1:])):
            raise NotDecreasing("table prices increase between breakpoints")
        grid = np.linspace(self.lo, self.hi, VALIDATION_GRID)
        vals = np.interp(grid, self.xs, self.ps)
        if np.any(vals <= 0):
            raise NonPositivePrice("table interpolates to a non-positive price")
        if np.any(np.diff(vals) > 1e-12 * max(1.0, float(np.max(vals)))):
            raise NotDecreasing("table interpolation is not monotonically decreasing")

    def spec(self):
        if self.source is None:
            raise ValidationError("in-memory table has no file to reference")
        return f"table:file={self.source}"

    @classmethod
    def from_csv(cls, path):
        xs, ps = [], []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    xs.append(float(row[0]))
                    ps.append(float(row[1]))
                except (ValueError, IndexError) as exc:
                    raise ValidationError(f"{path}: bad table row {row!r}") from exc
        return cls(tuple(xs), tuple(ps), source=str(path))


def validate(p: PriceFunction) -> PriceFunction:
    """Raise a ValidationError subclass unless ``p`` is admissible; return ``p``."""
    if isinstance(p, Tabulated) and (not p.xs or len(p.xs) != len(p.ps)):
        raise ValidationError("table needs matching non-empty x and p(x) columns")
    p.interval.check()
    p._check()
    return p


def evaluate(p: PriceFunction, x: float) -> float:
    if not p.interval.contains(x):
        raise OutOfDomain(f"weight {x!r} outside [{p.lo!r}, {p.hi!r}]")
    return p._raw(p._clamp(float(x)))


def _minimize(p, a, c) -> TradeoffMinimizer:
    if not (a > 0 and c > 0):
        raise ValueError(f"coefficients must be positive, got price scale {a}, weight coefficient {c}")
    x = p._argmin(float(a), float(c))
    return TradeoffMinimizer(coefficient=float(c), argmin=x, value=a * evaluate(p, x) + c * x,
                             price_scale=float(a))


def minimize_tradeoff(p: PriceFunction, c: float) -> TradeoffMinimizer:
    """Global minimizer of ``p(x) + c*x``; ties go to the smaller weight."""
    return _minimize(p, 1.0, c)


def minimize_scaled(p: PriceFunction, a: float) -> TradeoffMinimizer:
    """Global minimizer of ``a*p(x) + x`` (used by the MAX-game constructions)."""
    return _minimize(p, a, 1.0)


def x_star(p):
    """Weight minimizing p(x) + x."""
    return minimize_tradeoff(p, 1.0).argmin


_FORMS = {
    "reciprocal": (Reciprocal, ("alpha", "lo", "hi")),
    "linear": (Linear, ("alpha", "eps", "lo", "hi")),
    "constant": (Constant, ("alpha", "lo", "hi")),
}


def parse_price(text: str, base_dir=None, check=True) -> PriceFunction:
    """Parse ``reciprocal:alpha=4,lo=1,hi=10`` style specs (also ``table:file=...``)."""
    text = text.strip()
    name, sep, rest = text.partition(":")
    if not sep:
        raise ValidationError(f"price spec {text!r} lacks a 'form:' prefix")
    params = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, value = item.partition("=")
        if not eq:
            raise ValidationError(f"bad parameter {item!r} in price spec {text!r}")
        params[key.strip()] = value.strip()
    if name == "table":
        if set(params) != {"file"}:
            raise ValidationError("table spec takes exactly one parameter: file")
        path = Path(params["file"])
        if base_dir is not None and not path.is_absolute() and not path.exists():
            path = Path(base_dir) / path
        p = Tabulated.from_csv(path)
        p = Tabulated(p.xs, p.ps, source=params["file"])
    elif name in _FORMS:
        cls, keys = _FORMS[name]
        if set(params) != set(keys):
            raise ValidationError(f"{name} spec needs parameters {', '.join(keys)}; got {sorted(params)}")
        try:
            p = cls(**{k: float(params[k]) for k in keys})
        except ValueError as exc:
            raise ValidationError(f"non-numeric parameter in {text!r}") from exc
    else:
        raise ValidationError(f"unknown price form {name!r}")
    return validate(p) if check else p
