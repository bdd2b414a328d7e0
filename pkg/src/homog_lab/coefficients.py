"""Periodic coefficient fields A(y) in the admissible class.

Every field is a symmetric 2x2 matrix function of y that is 1-periodic,
uniformly elliptic and Lipschitz. Fields are described by a family name
and a short parameter tuple so that they can be round-tripped through
experiment configs.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

# Grid used to find the normalization factor. Divisible by 4 so the peaks of
# the built-in trigonometric profiles are sampled exactly.
_NORMALIZATION_SAMPLES = 64


@dataclass(frozen=True)
class SymMatrix2:
    """Symmetric 2x2 matrix stored through its three independent entries."""

    a11: float
    a12: float
    a22: float

    @classmethod
    def from_array(cls, m) -> SymMatrix2:
        m = np.asarray(m, dtype=float)
        return cls(float(m[0, 0]), 0.5 * float(m[0, 1] + m[1, 0]), float(m[1, 1]))

    def as_array(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a12, self.a22]])

    def eigenvalues(self) -> tuple[float, float]:
        """Closed-form eigenvalues, ascending."""
        mean = 0.5 * (self.a11 + self.a22)
        rad = math.hypot(0.5 * (self.a11 - self.a22), self.a12)
        return mean - rad, mean + rad

    def is_positive_definite(self) -> bool:
        return self.eigenvalues()[0] > 0.0

    def inverse(self) -> SymMatrix2:
        det = self.a11 * self.a22 - self.a12 * self.a12
        if det == 0.0:
            raise ZeroDivisionError("singular matrix")
        return SymMatrix2(self.a22 / det, -self.a12 / det, self.a11 / det)

    def sqrt(self) -> SymMatrix2:
        """Principal square root of a positive semi-definite matrix."""
        w, v = np.linalg.eigh(self.as_array())
        return SymMatrix2.from_array(v @ np.diag(np.sqrt(np.clip(w, 0.0, None))) @ v.T)

    def quadratic_form(self, x, y):
        """<M (x, y), (x, y)> evaluated elementwise."""
        return self.a11 * x * x + 2.0 * self.a12 * x * y + self.a22 * y * y


def eigenvalue_fields(a11, a12, a22):
    """Pointwise ascending eigenvalues of arrays of symmetric matrices."""
    mean = 0.5 * (a11 + a22)
    rad = np.hypot(0.5 * (a11 - a22), a12)
    return mean - rad, mean + rad


class Family(str, enum.Enum):
    CONSTANT = "constant"
    LAMINATE = "laminate"
    TRIG_PRODUCT = "trig_product"
    ROTATED_LAMINATE = "rotated_laminate"


def lamination_direction(angle: float, max_entry: int = 16) -> tuple[int, int]:
    """Smallest coprime integer vector (p, q) pointing along ``angle``.

    A profile a(p*y1 + q*y2) is 1-periodic only for integer p, q, so the
    layer normal of a rotated laminate must be a rational direction.
    """
    best = None
    for p in range(-max_entry, max_entry + 1):
        for q in range(-max_entry, max_entry + 1):
            if (p, q) == (0, 0) or math.gcd(p, q) != 1:
                continue
            diff = math.remainder(math.atan2(q, p) - angle, 2.0 * math.pi)
            if abs(diff) < 1e-9 and (best is None or p * p + q * q < best[0] ** 2 + best[1] ** 2):
                best = (p, q)
    if best is None:
        raise ValueError(
            f"angle {angle!r} is not the direction of an integer vector with entries <= {max_entry}; "
            "the rotated laminate would not be 1-periodic"
        )
    return best


@dataclass(frozen=True)
class CoefficientField:
    """A named parametric family of 1-periodic symmetric coefficient fields.

    ``params`` depend on the family:

    * ``constant``: (a11, a12, a22)
    * ``laminate``: (mu,) with profile 1 + mu cos(2 pi y1)
    * ``trig_product``: (mu,) with profile 1 + mu sin(2 pi y1) sin(2 pi y2)
    * ``rotated_laminate``: (mu, angle); layers normal to ``angle``, which
      must be the direction of a small integer vector

    The raw formula is divided by ``normalization`` (its sampled maximum
    eigenvalue, or 1 when that is already <= 1) so that the upper
    ellipticity bound is 1.
    """

    family: Family
    params: tuple[float, ...]
    normalization: float = dc_field(default=float("nan"), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        expected = {Family.CONSTANT: 3, Family.LAMINATE: 1, Family.TRIG_PRODUCT: 1, Family.ROTATED_LAMINATE: 2}
        if len(self.params) != expected[self.family]:
            raise ValueError(f"{self.family.value} expects {expected[self.family]} parameters, got {self.params}")
        if self.family is Family.CONSTANT:
            if not SymMatrix2(*self.params).is_positive_definite():
                raise ValueError("constant coefficient matrix must be positive definite")
        else:
            mu = self.params[0]
            if not 0.0 <= mu < 1.0:
                raise ValueError(f"amplitude mu must lie in [0, 1), got {mu}")
        if self.family is Family.ROTATED_LAMINATE:
            lamination_direction(self.params[1])
        if math.isnan(self.normalization):
            object.__setattr__(self, "normalization", self._sampled_normalization())

    # constructors -----------------------------------------------------
    @classmethod
    def constant(cls, a11=1.0, a12=0.0, a22=1.0) -> CoefficientField:
        return cls(Family.CONSTANT, (a11, a12, a22))

    @classmethod
    def identity(cls) -> CoefficientField:
        return cls.constant(1.0, 0.0, 1.0)

    @classmethod
    def laminate(cls, mu: float) -> CoefficientField:
        return cls(Family.LAMINATE, (mu,))

    @classmethod
    def trig_product(cls, mu: float) -> CoefficientField:
        return cls(Family.TRIG_PRODUCT, (mu,))

    @classmethod
    def rotated_laminate(cls, mu: float, angle: float) -> CoefficientField:
        return cls(Family.ROTATED_LAMINATE, (mu, angle))

    # config round trip --------------------------------------------------
    def to_spec(self) -> dict:
        if self.family is Family.CONSTANT:
            a11, a12, a22 = self.params
            return {"family": self.family.value, "a11": a11, "a12": a12, "a22": a22}
        spec = {"family": self.family.value, "mu": self.params[0]}
        if self.family is Family.ROTATED_LAMINATE:
            spec["angle"] = self.params[1]
        return spec

    @classmethod
    def from_spec(cls, spec: dict) -> CoefficientField:
        spec = dict(spec)
        try:
            family = Family(spec.pop("family"))
        except (KeyError, ValueError) as exc:
            raise ValueError(f"unknown or missing coefficient family in {spec!r}") from exc
        keys = {
            Family.CONSTANT: ("a11", "a12", "a22"),
            Family.LAMINATE: ("mu",),
            Family.TRIG_PRODUCT: ("mu",),
            Family.ROTATED_LAMINATE: ("mu", "angle"),
        }[family]
        defaults = {"a11": 1.0, "a12": 0.0, "a22": 1.0}
        unknown = set(spec) - set(keys)
        if unknown:
            raise ValueError(f"unexpected keys for {family.value}: {sorted(unknown)}")
        try:
            params = tuple(float(spec[k]) if k in spec else defaults[k] for k in keys)
        except KeyError as exc:
            raise ValueError(f"{family.value} requires parameter {exc.args[0]!r}") from exc
        return cls(family, params)

    @property
    def is_constant(self) -> bool:
        return self.family is Family.CONSTANT or self.params[0] == 0.0

    @property
    def label(self) -> str:
        return self.family.value

    # evaluation ---------------------------------------------------------
    def raw_components(self, y1, y2):
        """Unnormalized (a11, a12, a22) at points y; arrays broadcast."""
        y1 = np.asarray(y1, dtype=float)
        y2 = np.asarray(y2, dtype=float)
        shape = np.broadcast_shapes(y1.shape, y2.shape)
        if self.family is Family.CONSTANT:
            a11, a12, a22 = self.params
            return np.full(shape, a11), np.full(shape, a12), np.full(shape, a22)
        # reduce to the unit cell first so that y and y + z give identical values
        t1 = np.mod(y1, 1.0)
        t2 = np.mod(y2, 1.0)
        mu = self.params[0]
        if self.family is Family.LAMINATE:
            s = 1.0 + mu * np.cos(2.0 * np.pi * t1)
        elif self.family is Family.TRIG_PRODUCT:
            s = 1.0 + mu * np.sin(2.0 * np.pi * t1) * np.sin(2.0 * np.pi * t2)
        else:
            p, q = lamination_direction(self.params[1])
            s = 1.0 + mu * np.cos(2.0 * np.pi * np.mod(p * t1 + q * t2, 1.0))
        s = np.broadcast_to(s, shape)
        return s.copy(), np.zeros(shape), s.copy()

    def components(self, y1, y2):
        """Normalized (a11, a12, a22) at points y; arrays broadcast."""
        a11, a12, a22 = self.raw_components(y1, y2)
        if self.normalization != 1.0:
            a11 = a11 / self.normalization
            a12 = a12 / self.normalization
            a22 = a22 / self.normalization
        return a11, a12, a22

    def _sampled_normalization(self) -> float:
        t = np.arange(_NORMALIZATION_SAMPLES) / _NORMALIZATION_SAMPLES
        y1, y2 = np.meshgrid(t, t, indexing="ij")
        _, upper = eigenvalue_fields(*self.raw_components(y1, y2))
        return max(1.0, float(upper.max()))


def evaluate(field: CoefficientField, y) -> SymMatrix2:
    """Value of the normalized coefficient matrix at a single point."""
    a11, a12, a22 = field.components(y[0], y[1])
    return SymMatrix2(float(a11), float(a12), float(a22))


@dataclass(frozen=True)
class ValidationReport:
    lambda_min: float
    lambda_max: float
    lipschitz_estimate: float
    periodicity_residual: float
    sample_count: int

    @property
    def elliptic(self) -> bool:
        return self.lambda_min > 0.0


def validate(field: CoefficientField, n_samples: int = 64) -> ValidationReport:
    """Check ellipticity, periodicity and Lipschitz bounds on an n x n sample.

    Nonpositive ``lambda_min`` is reported through ``elliptic``, not raised.
    """
    if n_samples < 16:
        raise ValueError("validate needs at least 16 samples per axis")
    n = int(n_samples)
    t = np.arange(n) / n
    y1, y2 = np.meshgrid(t, t, indexing="ij")
    a11, a12, a22 = field.components(y1, y2)
    low, high = eigenvalue_fields(a11, a12, a22)

    # adjacent samples with periodic wrap, distance 1/n; Frobenius norm of the jump
    lip = 0.0
    for axis in (0, 1):
        jump = np.sqrt(
            (np.roll(a11, -1, axis) - a11) ** 2
            + 2.0 * (np.roll(a12, -1, axis) - a12) ** 2
            + (np.roll(a22, -1, axis) - a22) ** 2
        )
        lip = max(lip, float(jump.max()) * n)

    per = 0.0
    for shift in ((1.0, 0.0), (0.0, 1.0)):
        b11, b12, b22 = field.components(y1 + shift[0], y2 + shift[1])
        per = max(per, float(np.max(np.abs(b11 - a11))), float(np.max(np.abs(b12 - a12))),
                  float(np.max(np.abs(b22 - a22))))

    return ValidationReport(
        lambda_min=float(low.min()),
        lambda_max=float(high.max()),
        lipschitz_estimate=lip,
        periodicity_residual=per,
        sample_count=n * n,
    )

