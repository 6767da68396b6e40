"""Commute-satisfaction functions v(theta) and the checks that go with them.

Three parametric families are available::

    neg_quadratic    v(theta) = -a*theta**2 - b*theta      (a > 0, b >= 0)
    neg_exponential  v(theta) = a*(1 - exp(c*theta))       (a > 0, c > 0)
    log_resource     v(theta) = a*log(1 + theta)           (a > 0)

The first two are concave and decreasing (``paper_literal`` orientation), the
last is concave and increasing (``resource_mode``).  Any object exposing
``value``, ``derivative`` and ``orientation`` can be passed to
:func:`check_assumption1`, which is how the tests feed it deliberately broken
functions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InvalidAttributeError

PAPER_LITERAL = "paper_literal"
RESOURCE_MODE = "resource_mode"
ORIENTATIONS = (PAPER_LITERAL, RESOURCE_MODE)

# family -> (required parameters, orientation)
FAMILIES = {
    "neg_quadratic": (("a", "b"), PAPER_LITERAL),
    "neg_exponential": (("a", "c"), PAPER_LITERAL),
    "log_resource": (("a",), RESOURCE_MODE),
}


@dataclass(frozen=True)
class ValuationSpec:
    family: str
    params: dict = field(default_factory=dict)
    orientation: str | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidAttributeError(f"unknown valuation family {self.family!r}")
        names, natural = FAMILIES[self.family]
        params = dict(self.params)
        if self.family == "neg_quadratic":
            params.setdefault("b", 0.0)
        missing = [n for n in names if n not in params]
        if missing:
            raise InvalidAttributeError(f"{self.family}: missing parameters {missing}")
        extra = sorted(set(params) - set(names))
        if extra:
            raise InvalidAttributeError(f"{self.family}: unexpected parameters {extra}")
        params = {k: float(params[k]) for k in names}
        if params["a"] <= 0:
            raise InvalidAttributeError(f"{self.family}: a must be > 0")
        if self.family == "neg_quadratic" and params["b"] < 0:
            raise InvalidAttributeError("neg_quadratic: b must be >= 0")
        if self.family == "neg_exponential" and params["c"] <= 0:
            raise InvalidAttributeError("neg_exponential: c must be > 0")
        orientation = self.orientation or natural
        if orientation != natural:
            raise InvalidAttributeError(
                f"{self.family} is a {natural} family, not {orientation}")
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "orientation", orientation)

    def value(self, theta):
        """v(theta); works elementwise on arrays."""
        _check_domain(theta)
        return self._value(theta)

    def derivative(self, theta):
        """Closed-form v'(theta)."""
        _check_domain(theta)
        return self._derivative(theta)

    def second_derivative(self, theta):
        _check_domain(theta)
        p = self.params
        if self.family == "neg_quadratic":
            return np.full_like(np.asarray(theta, dtype=float), -2.0 * p["a"])[()]
        if self.family == "neg_exponential":
            return -p["a"] * p["c"] ** 2 * np.exp(p["c"] * np.asarray(theta, dtype=float))
        return -p["a"] / (1.0 + np.asarray(theta, dtype=float)) ** 2

    # unchecked versions, also valid slightly below zero (finite differences)
    def _value(self, theta):
        p = self.params
        theta = np.asarray(theta, dtype=float)
        if self.family == "neg_quadratic":
            out = -p["a"] * theta**2 - p["b"] * theta
        elif self.family == "neg_exponential":
            out = -p["a"] * np.expm1(p["c"] * theta)
        else:
            out = p["a"] * np.log1p(theta)
        return out[()] if out.ndim == 0 else out

    def _derivative(self, theta):
        p = self.params
        theta = np.asarray(theta, dtype=float)
        if self.family == "neg_quadratic":
            out = -2.0 * p["a"] * theta - p["b"]
        elif self.family == "neg_exponential":
            out = -p["a"] * p["c"] * np.exp(p["c"] * theta)
        else:
            out = p["a"] / (1.0 + theta)
        return out[()] if out.ndim == 0 else out

    def to_dict(self):
        return {"family": self.family, "params": dict(self.params),
                "orientation": self.orientation}

    @classmethod
    def from_dict(cls, data):
        return cls(family=data["family"], params=dict(data.get("params", {})),
                   orientation=data.get("orientation"))


def _check_domain(theta):
    arr = np.asarray(theta, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DomainError(f"travel time must be >= 0, got {theta!r}")


def eval_valuation(spec, theta):
    return spec.value(theta)


def valuation_derivative(spec, theta):
    return spec.derivative(theta)


@dataclass
class AssumptionReport:
    passed: bool
    violations: list

    def __bool__(self):
        return self.passed


def _fd_step(x):
    return 1e-5 * max(1.0, abs(x))


def check_assumption1(spec, grid):
    """Sample-based check of v(0) = 0, monotonicity, strict concavity and v'.

    Monotonicity is checked in the direction implied by ``spec.orientation``
    (decreasing for paper_literal, increasing for resource_mode).  The
    derivative must match central finite differences to 1e-6 relative.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 3 or grid[0] != 0.0 or np.any(np.diff(grid) <= 0):
        raise DomainError("grid needs >= 3 strictly increasing points starting at 0")

    violations = []
    value = getattr(spec, "_value", spec.value)
    deriv = getattr(spec, "_derivative", spec.derivative)
    vals = np.array([float(value(x)) for x in grid])
    scale = max(1.0, float(np.max(np.abs(vals))))

    if vals[0] != 0.0:
        violations.append(f"v(0) = {vals[0]!r}, expected 0")

    diffs = np.diff(vals)
    if spec.orientation == RESOURCE_MODE:
        if not np.all(diffs > 0):
            violations.append("not strictly increasing")
    elif not np.all(diffs < 0):
        violations.append("not strictly decreasing")

    # every pair of grid points, midpoint test
    tol = 1e-12 * scale
    concave = True
    for j in range(grid.size):
        for k in range(j + 1, grid.size):
            mid = float(value(0.5 * (grid[j] + grid[k])))
            if not mid - 0.5 * (vals[j] + vals[k]) > tol:
                concave = False
                break
        if not concave:
            break
    if not concave:
        violations.append("not strictly concave")

    for x in grid:
        h = _fd_step(x)
        fd = (float(value(x + h)) - float(value(x - h))) / (2 * h)
        d = float(deriv(x))
        if abs(fd - d) > 1e-6 * max(1.0, abs(d)):
            violations.append(f"derivative mismatch at {x}: closed form {d}, fd {fd}")
            break

    return AssumptionReport(passed=not violations, violations=violations)


def max_abs_value(spec, lo, hi, samples=65):
    """Largest sampled |v| on [lo, hi]; used to size the penalty constants."""
    xs = np.linspace(lo, hi, samples)
    return float(np.max(np.abs(spec.value(xs))))


def max_abs_derivative(spec, lo, hi, samples=65):
    xs = np.linspace(lo, hi, samples)
    return float(np.max(np.abs(spec.derivative(xs))))

