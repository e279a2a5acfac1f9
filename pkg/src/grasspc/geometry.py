"""Geometric primitives on the Grassmann manifold G(n, 1) of complex lines.

A point of G(n, 1) is a one-dimensional subspace of C^n, represented here
by a unit-norm vector that is identified with all of its unit-modulus phase
rotations.  The metric is the chordal distance

    d(x, y) = sqrt(1 - |x^H y|^2) = |sin(theta)|,

where theta = arccos |x^H y| is the principal angle between the lines.
The module provides the closed-form log map, exponential map (geodesic),
parallel transport of the connecting tangent, and the one-step geodesic
extrapolation used by the predictive codec.

Everything operates on immutable values and 64-bit floats; the tolerance
constants below are part of the public contract.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "UNIT_NORM_TOL",
    "ORTHOGONALITY_TOL",
    "RHO_MIN",
    "ZERO_TANGENT_TOL",
    "PHASE_EQ_TOL",
    "DimensionMismatchError",
    "CutLocusError",
    "GrassmannPoint",
    "TangentVector",
    "InnerProductDecomposition",
    "chordal_distance",
    "inner_decomposition",
    "log_map",
    "exp_map",
    "parallel_transport",
    "predict_one_step",
    "sequence_correlation",
    "random_point",
]

#: Unit-norm construction tolerance for points and tangent directions.
UNIT_NORM_TOL = 1e-12
#: Allowed |base^H direction| for a tangent direction.
ORTHOGONALITY_TOL = 1e-10
#: Cut-locus guard: operations needing a well-defined connecting geodesic
#: refuse pairs with |x^H y| at or below this value.
RHO_MIN = 1e-9
#: Pairs closer than this chordal distance produce the zero tangent.
ZERO_TANGENT_TOL = 1e-12
#: Default tolerance for equality of points modulo phase.
PHASE_EQ_TOL = 1e-9


class DimensionMismatchError(ValueError):
    """Operands live in ambient spaces of different dimension."""


class CutLocusError(ArithmeticError):
    """The two lines are (numerically) orthogonal; no unique geodesic exists.

    Raised whenever an operation requires |x^H y| > RHO_MIN and the guard
    fails.  ``rho_abs`` carries the offending magnitude.
    """

    def __init__(self, rho_abs: float, message: str | None = None):
        self.rho_abs = float(rho_abs)
        super().__init__(
            message
            or f"|rho| = {rho_abs:.3e} <= {RHO_MIN:.0e}: points straddle the cut locus"
        )


def _as_unit_vector(values, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.complex128)
    if arr.ndim != 1:
        raise ValueError(f"{what} must be a 1-D complex vector, got shape {arr.shape}")
    if arr.size < 2:
        raise ValueError(f"{what} needs ambient dimension n >= 2, got n = {arr.size}")
    if not np.all(np.isfinite(arr.view(np.float64))):
        raise ValueError(f"{what} contains non-finite entries")
    return arr


@dataclass(frozen=True, eq=False)
class GrassmannPoint:
    """A line in C^n held as a unit-norm representative vector.

    The phase of the representative is not meaningful: two points compare
    equal iff their chordal distance is below ``PHASE_EQ_TOL``.
    """

    coords: np.ndarray

    def __post_init__(self):
        arr = _as_unit_vector(self.coords, "GrassmannPoint.coords").copy()
        nrm = np.linalg.norm(arr)
        if abs(nrm - 1.0) > UNIT_NORM_TOL:
            raise ValueError(
                f"representative must be unit norm within {UNIT_NORM_TOL:.0e}; "
                f"got ||x|| - 1 = {nrm - 1.0:.3e}"
            )
        arr.flags.writeable = False
        object.__setattr__(self, "coords", arr)

    @classmethod
    def from_vector(cls, values) -> "GrassmannPoint":
        """Normalize an arbitrary nonzero vector onto the manifold."""
        arr = _as_unit_vector(values, "vector")
        nrm = np.linalg.norm(arr)
        if nrm == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return cls(arr / nrm)

    @property
    def n(self) -> int:
        return self.coords.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, GrassmannPoint):
            return NotImplemented
        if other.n != self.n:
            return False
        return chordal_distance(self, other) < PHASE_EQ_TOL

    def __repr__(self) -> str:
        return f"GrassmannPoint(n={self.n}, coords={np.array2string(self.coords, precision=4)})"


@dataclass(frozen=True, eq=False)
class TangentVector:
    """A tangent vector at ``base``, split into magnitude and unit direction.

    ``magnitude`` is the arc length of the geodesic the vector generates and
    lies in [0, pi/2].  ``direction`` is a unit vector orthogonal to the
    base representative; by convention a zero-magnitude tangent stores the
    all-zeros direction.
    """

    base: GrassmannPoint
    magnitude: float
    direction: np.ndarray

    def __post_init__(self):
        mag = float(self.magnitude)
        if not np.isfinite(mag) or mag < 0.0 or mag > np.pi / 2 + 1e-12:
            raise ValueError(f"magnitude must lie in [0, pi/2], got {mag!r}")
        object.__setattr__(self, "magnitude", mag)
        arr = np.asarray(self.direction, dtype=np.complex128).copy()
        if arr.shape != self.base.coords.shape:
            raise DimensionMismatchError(
                f"direction shape {arr.shape} does not match base n = {self.base.n}"
            )
        if mag == 0.0:
            arr = np.zeros_like(arr)
        else:
            nrm = np.linalg.norm(arr)
            if abs(nrm - 1.0) > UNIT_NORM_TOL:
                raise ValueError(
                    f"direction must be unit norm within {UNIT_NORM_TOL:.0e}; got {nrm!r}"
                )
            cross = abs(np.vdot(self.base.coords, arr))
            if cross > ORTHOGONALITY_TOL:
                raise ValueError(
                    f"direction must be orthogonal to base within {ORTHOGONALITY_TOL:.0e}; "
                    f"got |<base, dir>| = {cross:.3e}"
                )
        arr.flags.writeable = False
        object.__setattr__(self, "direction", arr)

    @classmethod
    def zero(cls, base: GrassmannPoint) -> "TangentVector":
        return cls(base, 0.0, np.zeros(base.n, dtype=np.complex128))

    @property
    def is_zero(self) -> bool:
        return self.magnitude == 0.0

    def as_ambient(self) -> np.ndarray:
        """The plain vector magnitude * direction in C^n."""
        return self.magnitude * self.direction


@dataclass(frozen=True)
class InnerProductDecomposition:
    """The scalar geometry of a pair: rho = x^H y, chord, principal angle."""

    rho: complex
    chord: float
    angle: float


def _check_pair(x: GrassmannPoint, y: GrassmannPoint):
    if x.n != y.n:
        raise DimensionMismatchError(f"points have n = {x.n} and n = {y.n}")


def _chord_from_coords(xc: np.ndarray, yc: np.ndarray) -> float:
    rho = np.vdot(xc, yc)
    a = abs(rho)
    v = 1.0 - min(a * a, 1.0)
    if v > 1e-8 or a == 0.0:
        return float(np.sqrt(max(v, 0.0)))
    # Nearly coincident lines: 1 - |rho|^2 cancels catastrophically and has a
    # ~sqrt(eps) noise floor, but d = |rho| * ||y/rho - x|| is exact in the
    # same regime, keeping small distances accurate to ~1e-15.
    return float(a * np.linalg.norm(yc / rho - xc))


def chordal_distance(x: GrassmannPoint, y: GrassmannPoint) -> float:
    """Chordal distance sqrt(1 - |x^H y|^2), phase invariant, in [0, 1]."""
    _check_pair(x, y)
    return _chord_from_coords(x.coords, y.coords)


def inner_decomposition(x: GrassmannPoint, y: GrassmannPoint) -> InnerProductDecomposition:
    """Inner product rho together with the chord and angle it induces."""
    _check_pair(x, y)
    rho = complex(np.vdot(x.coords, y.coords))
    a = min(abs(rho), 1.0)
    chord = float(np.sqrt(max(0.0, 1.0 - a * a)))
    return InnerProductDecomposition(rho=rho, chord=chord, angle=float(np.arccos(a)))


def _orthonormal_direction(raw: np.ndarray, base: np.ndarray) -> np.ndarray:
    # Explicitly re-project against the base: for nearly coincident points the
    # raw difference vector is produced by catastrophic cancellation and its
    # residual component along the base can exceed ORTHOGONALITY_TOL.
    unit = raw / np.linalg.norm(raw)
    unit = unit - base * np.vdot(base, unit)
    return unit / np.linalg.norm(unit)


def log_map(base: GrassmannPoint, target: GrassmannPoint) -> TangentVector:
    """Tangent at ``base`` whose geodesic reaches ``target`` at t = 1.

    Magnitude equals the principal angle arctan(d / |rho|) = arccos |rho|;
    pairs with chordal distance below ``ZERO_TANGENT_TOL`` give the zero
    tangent, and |rho| <= RHO_MIN raises :class:`CutLocusError`.
    """
    _check_pair(base, target)
    rho = np.vdot(base.coords, target.coords)
    a = abs(rho)
    if a <= RHO_MIN:
        raise CutLocusError(a)
    w = target.coords / rho - base.coords
    wn = float(np.linalg.norm(w))
    # ||w|| = d / |rho| exactly, so d = |rho| ||w|| and the arc length is
    # arctan(||w||); both stay fully accurate for nearly coincident pairs.
    if a * wn < ZERO_TANGENT_TOL:
        return TangentVector.zero(base)
    magnitude = float(np.arctan(wn))
    return TangentVector(base, magnitude, _orthonormal_direction(w, base.coords))


def exp_map(base: GrassmannPoint, tangent: TangentVector, t: float = 1.0) -> GrassmannPoint:
    """Point reached after time ``t`` along the geodesic generated by ``tangent``.

    G(base, e, t) = base * cos(||e|| t) + e_hat * sin(||e|| t).  ``t`` is
    normally in [0, 1]; values above 1 extrapolate past the endpoint and are
    permitted.
    """
    if tangent.base is not base:
        if tangent.base.n != base.n or chordal_distance(tangent.base, base) >= ORTHOGONALITY_TOL:
            raise ValueError("tangent is not based at the given point")
    t = float(t)
    if not np.isfinite(t) or t < 0.0:
        raise ValueError(f"t must be a finite non-negative scalar, got {t!r}")
    if tangent.is_zero or t == 0.0:
        return GrassmannPoint(base.coords)
    ang = tangent.magnitude * t
    v = base.coords * np.cos(ang) + tangent.direction * np.sin(ang)
    return GrassmannPoint.from_vector(v)


def parallel_transport(x1: GrassmannPoint, x2: GrassmannPoint) -> TangentVector:
    """Transport of the tangent log_map(x1, x2) along the geodesic to ``x2``.

    Returns the tangent at ``x2`` pointing away from ``x1``, with the same
    magnitude as the connecting tangent:

        e_hat = arctan(d / |rho|) * (x2 rho^* - x1) / d.
    """
    _check_pair(x1, x2)
    rho = np.vdot(x1.coords, x2.coords)
    a = abs(rho)
    if a <= RHO_MIN:
        raise CutLocusError(a)
    u = x2.coords * np.conj(rho) - x1.coords
    un = float(np.linalg.norm(u))
    # ||u|| = d exactly; the ratio keeps precision for small separations.
    if un < ZERO_TANGENT_TOL:
        return TangentVector.zero(x2)
    magnitude = float(np.arctan(un / a))
    return TangentVector(x2, magnitude, _orthonormal_direction(u, x2.coords))


def predict_one_step(x_prev: GrassmannPoint, x_curr: GrassmannPoint) -> GrassmannPoint:
    """Extrapolate one step along the geodesic from ``x_prev`` through ``x_curr``.

    With rho = x_prev^H x_curr the prediction is

        x_tilde = (|rho| + rho^*) x_curr - x_prev,

    which is unit norm and preserves the step size:
    d(x_curr, x_tilde) = d(x_prev, x_curr).
    """
    _check_pair(x_prev, x_curr)
    rho = np.vdot(x_prev.coords, x_curr.coords)
    a = abs(rho)
    if a <= RHO_MIN:
        raise CutLocusError(a)
    v = (a + np.conj(rho)) * x_curr.coords - x_prev.coords
    return GrassmannPoint.from_vector(v)


def sequence_correlation(xs, ys, lag: int) -> float:
    """Mean chordal distance between ``xs[k]`` and ``ys[k + lag]``.

    ``lag`` may be any integer for which at least one index pair overlaps.
    """
    lag = int(lag)
    xs = list(xs)
    ys = list(ys)
    start = max(0, -lag)
    stop = min(len(xs), len(ys) - lag)
    if stop <= start:
        raise ValueError(f"no overlap between sequences at lag {lag}")
    total = 0.0
    for k in range(start, stop):
        total += chordal_distance(xs[k], ys[k + lag])
    return total / (stop - start)


def random_point(n: int, rng: np.random.Generator) -> GrassmannPoint:
    """Draw a point uniformly (Haar) on G(n, 1)."""
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return GrassmannPoint.from_vector(v)
