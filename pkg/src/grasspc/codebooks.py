"""Shape-gain tangent codebooks: containers, training, and file format.

A codeword is the product of a unit "shape" (a direction codeword, stored
as a unit vector in C^n and projected onto the local tangent space at use
time) and a scalar "gain" (a tangent magnitude in [0, pi/2]).  Training
follows the classic two-stage recipe: harvest prediction-error tangents
from a trace (open loop on raw observations, then closed loop through the
actual encoder), and run Lloyd iterations separately on directions and
magnitudes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .channel import rng_stream
from .geometry import (
    CutLocusError,
    GrassmannPoint,
    TangentVector,
    log_map,
    predict_one_step,
)

__all__ = [
    "FILE_NORM_TOL",
    "DirectionCodebook",
    "MagnitudeCodebook",
    "ShapeGainCodebook",
    "TrainingSet",
    "canonical_phase",
    "harvest_open_loop",
    "harvest_closed_loop",
    "lloyd_direction",
    "lloyd_magnitude",
    "uniform_magnitude",
    "best_packing",
    "save_codebook",
    "load_codebook",
]

#: Unit-norm tolerance accepted for direction codewords (file interchange).
FILE_NORM_TOL = 1e-9
#: Lloyd stops once the per-iteration distortion decrease falls below this.
LLOYD_TOL = 1e-8
# Floating-point slack for the hard monotonicity assertion: the analytic
# argument gives non-increase exactly, rounding can wobble a plateau.
_MONOTONE_SLACK = 1e-12


def _is_pow2(k: int) -> bool:
    return k >= 1 and (k & (k - 1)) == 0


@dataclass(frozen=True)
class DirectionCodebook:
    """A power-of-two collection of distinct unit shape codewords in C^n."""

    entries: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.entries, dtype=np.complex128).copy()
        if arr.ndim != 2 or arr.shape[1] < 2:
            raise ValueError(f"entries must have shape (N_d, n >= 2), got {arr.shape}")
        if not _is_pow2(arr.shape[0]):
            raise ValueError(f"N_d must be a power of two, got {arr.shape[0]}")
        norms = np.linalg.norm(arr, axis=1)
        bad = np.nonzero(np.abs(norms - 1.0) > FILE_NORM_TOL)[0]
        if bad.size:
            raise ValueError(
                f"direction codeword {bad[0]} has norm error {abs(norms[bad[0]] - 1.0):.3e} "
                f"> {FILE_NORM_TOL:.0e}"
            )
        if arr.shape[0] > 1:
            gram = np.abs(arr @ arr.conj().T) ** 2
            np.fill_diagonal(gram, 0.0)
            if gram.max() >= 1.0:
                i, j = np.unravel_index(int(gram.argmax()), gram.shape)
                raise ValueError(f"codewords {i} and {j} span the same line")
        arr.flags.writeable = False
        object.__setattr__(self, "entries", arr)

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    @property
    def n(self) -> int:
        return self.entries.shape[1]

    @property
    def bits(self) -> int:
        return int(math.log2(self.size))

    def min_chordal_distance(self) -> float:
        if self.size < 2:
            raise ValueError("spacing of a singleton codebook is undefined")
        gram = np.abs(self.entries @ self.entries.conj().T) ** 2
        off_diag = gram[~np.eye(self.size, dtype=bool)]
        return float(np.sqrt(max(0.0, 1.0 - off_diag.max())))

    def pairwise_chordal(self) -> np.ndarray:
        gram = np.abs(self.entries @ self.entries.conj().T) ** 2
        return np.sqrt(np.maximum(0.0, 1.0 - gram))


@dataclass(frozen=True)
class MagnitudeCodebook:
    """Sorted power-of-two set of gain codewords in [0, pi/2].

    Entries are normally distinct; ties are tolerated because Lloyd training
    on degenerate data (e.g. a stationary trace) legitimately collapses
    codewords.
    """

    entries: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.entries, dtype=np.float64).copy()
        if arr.ndim != 1:
            raise ValueError(f"entries must be 1-D, got shape {arr.shape}")
        if not _is_pow2(arr.shape[0]):
            raise ValueError(f"N_m must be a power of two, got {arr.shape[0]}")
        if np.any(np.diff(arr) < 0.0):
            raise ValueError("entries must be sorted ascending")
        if arr[0] < 0.0 or arr[-1] > np.pi / 2 + 1e-12:
            raise ValueError("entries must lie in [0, pi/2]")
        arr.flags.writeable = False
        object.__setattr__(self, "entries", arr)

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    @property
    def bits(self) -> int:
        return int(math.log2(self.size))

    def spacings(self) -> np.ndarray:
        if self.size < 2:
            raise ValueError("spacing of a singleton codebook is undefined")
        return np.diff(self.entries)


@dataclass(frozen=True)
class ShapeGainCodebook:
    """The product codebook: every (direction, magnitude) pair is a codeword."""

    directions: DirectionCodebook
    magnitudes: MagnitudeCodebook

    @property
    def n(self) -> int:
        return self.directions.n

    @property
    def size(self) -> int:
        return self.directions.size * self.magnitudes.size

    @property
    def bits(self) -> int:
        return self.directions.bits + self.magnitudes.bits


@dataclass(frozen=True)
class TrainingSet:
    """Harvested prediction-error tangents plus a skipped-step counter."""

    tangents: tuple[TangentVector, ...]
    skipped: int = 0

    def __post_init__(self):
        tangents = tuple(self.tangents)
        if not tangents:
            raise ValueError("training set must contain at least one tangent")
        n = tangents[0].base.n
        if any(t.base.n != n for t in tangents):
            raise ValueError("all tangents must share the ambient dimension")
        object.__setattr__(self, "tangents", tangents)

    def __len__(self) -> int:
        return len(self.tangents)

    @property
    def n(self) -> int:
        return self.tangents[0].base.n

    def magnitudes(self) -> np.ndarray:
        return np.array([t.magnitude for t in self.tangents], dtype=np.float64)

    def directions(self, min_magnitude: float = 0.0) -> np.ndarray:
        """Unit directions of tangents with magnitude above the floor,
        phase-canonicalized for reproducible clustering."""
        rows = [t.direction for t in self.tangents if t.magnitude > min_magnitude]
        if not rows:
            return np.zeros((0, self.n), dtype=np.complex128)
        return np.array([canonical_phase(r) for r in rows])


def canonical_phase(v: np.ndarray) -> np.ndarray:
    """Rotate a vector so its first non-negligible entry is real positive."""
    v = np.asarray(v, dtype=np.complex128)
    for z in v:
        if abs(z) > 1e-12:
            return v * (np.conj(z) / abs(z))
    return v.copy()


def harvest_open_loop(points) -> TrainingSet:
    """Prediction-error tangents of a trace, predicting from raw observations.

    For each k >= 1 the tangent log_map(predict(x[k-1], x[k]), x[k+1]) is
    recorded; cut-locus steps are skipped and counted.
    """
    points = list(points)
    if len(points) < 3:
        raise ValueError("need at least 3 points to harvest")
    tangents = []
    skipped = 0
    for k in range(1, len(points) - 1):
        try:
            predicted = predict_one_step(points[k - 1], points[k])
            tangents.append(log_map(predicted, points[k + 1]))
        except CutLocusError:
            skipped += 1
    if not tangents:
        raise ValueError("every step straddled the cut locus; nothing harvested")
    return TrainingSet(tuple(tangents), skipped)


def harvest_closed_loop(points, codebook: ShapeGainCodebook | None) -> TrainingSet:
    """Prediction-error tangents seen by the running encoder itself.

    The encoder is initialized exactly from the first two points; each step
    contributes log_map(predicted, observed) before the quantized update is
    applied.  Encoder cut-locus failures are counted and recover by exact
    re-initialization from the raw observations.  ``codebook=None`` is the
    infinite-resolution stand-in: every estimate equals the observation, so
    the harvested tangents coincide with the open-loop ones.
    """
    from .codec import encode_step, initialize  # local import to avoid a cycle

    points = list(points)
    if len(points) < 3:
        raise ValueError("need at least 3 points to harvest")
    state = initialize(points[0], points[1], codebook, mode="exact")
    tangents = []
    skipped = 0
    for k in range(2, len(points)):
        try:
            tangents.append(log_map(state.predicted, points[k]))
            if codebook is None:
                # Advance on the raw observation itself: bit-identical to the
                # open-loop predictor, which is the point of the stub.
                state = initialize(points[k - 1], points[k], None, mode="exact")
            else:
                _, state, _ = encode_step(state, points[k], codebook)
        except CutLocusError:
            skipped += 1
            state = initialize(points[k - 1], points[k], codebook, mode="exact")
    if not tangents:
        raise ValueError("every step straddled the cut locus; nothing harvested")
    return TrainingSet(tuple(tangents), skipped)


def _repair_empty(dist: np.ndarray, count: int) -> np.ndarray:
    """Indices of replacement samples for empty clusters: farthest-first."""
    return np.argsort(dist)[::-1][:count]


def lloyd_direction(
    samples,
    n_d: int,
    max_iters: int = 100,
    seed: int = 0,
    *,
    min_magnitude: float = 0.0,
    return_history: bool = False,
):
    """Lloyd clustering of tangent directions under the chordal metric.

    ``samples`` is a :class:`TrainingSet` or an (M, n) array of unit rows.
    Cluster centroids are principal eigenvectors of the cluster outer-product
    sums; empty clusters are repaired with the currently worst-quantized
    samples.  The per-iteration mean distortion is non-increasing by
    construction and this is asserted on every run.
    """
    if isinstance(samples, TrainingSet):
        X = samples.directions(min_magnitude)
    else:
        X = np.array([canonical_phase(r) for r in np.asarray(samples, dtype=np.complex128)])
    if X.ndim != 2:
        raise ValueError("samples must be a 2-D array of unit rows")
    m = X.shape[0]
    if not _is_pow2(n_d):
        raise ValueError(f"N_d must be a power of two, got {n_d}")
    if m < n_d:
        raise ValueError(f"need at least N_d = {n_d} usable samples, got {m}")
    rng = rng_stream(seed, 0xD1)
    centers = X[rng.choice(m, size=n_d, replace=False)].copy()
    history = []
    for _ in range(max_iters):
        scores = np.abs(X @ centers.conj().T) ** 2  # (M, N_d)
        assign = scores.argmax(axis=1)
        dist = 1.0 - np.minimum(scores[np.arange(m), assign], 1.0)
        distortion = float(dist.mean())
        if history and distortion > history[-1] + _MONOTONE_SLACK:
            raise AssertionError(
                f"Lloyd distortion increased: {history[-1]!r} -> {distortion!r}"
            )
        converged = bool(history) and history[-1] - distortion < LLOYD_TOL
        history.append(distortion)
        if converged:
            break
        empties = [k for k in range(n_d) if not np.any(assign == k)]
        if empties:
            for k, idx in zip(empties, _repair_empty(dist, len(empties))):
                centers[k] = X[idx]
                assign[idx] = k
        for k in range(n_d):
            members = X[assign == k]
            if members.shape[0] == 0:
                continue
            scatter = members.T @ members.conj()
            _, vecs = np.linalg.eigh(scatter)
            centers[k] = canonical_phase(vecs[:, -1])
    codebook = DirectionCodebook(centers)
    return (codebook, history) if return_history else codebook


def lloyd_magnitude(
    samples,
    n_m: int,
    max_iters: int = 100,
    *,
    return_history: bool = False,
):
    """Scalar Lloyd-Max on tangent magnitudes: midpoint cells, mean codewords.

    Initialization uses sample quantiles, so the run is deterministic.  The
    per-iteration distortion is asserted non-increasing.
    """
    if isinstance(samples, TrainingSet):
        vals = samples.magnitudes()
    else:
        vals = np.asarray(samples, dtype=np.float64).ravel()
    if vals.size == 0:
        raise ValueError("no magnitude samples")
    if not _is_pow2(n_m):
        raise ValueError(f"N_m must be a power of two, got {n_m}")
    vals = np.sort(vals)
    codewords = np.quantile(vals, (np.arange(n_m) + 0.5) / n_m)
    history = []
    for _ in range(max_iters):
        edges = 0.5 * (codewords[1:] + codewords[:-1])
        assign = np.searchsorted(edges, vals)
        err = vals - codewords[assign]
        distortion = float(np.mean(err * err))
        if history and distortion > history[-1] + _MONOTONE_SLACK:
            raise AssertionError(
                f"Lloyd distortion increased: {history[-1]!r} -> {distortion!r}"
            )
        converged = bool(history) and history[-1] - distortion < LLOYD_TOL
        history.append(distortion)
        if converged:
            break
        empties = [k for k in range(n_m) if not np.any(assign == k)]
        if empties:
            sq = err * err
            for k, idx in zip(empties, np.argsort(sq)[::-1][: len(empties)]):
                codewords[k] = vals[idx]
                assign[idx] = k
        for k in range(n_m):
            members = vals[assign == k]
            if members.size:
                codewords[k] = members.mean()
        codewords = np.sort(codewords)
    codebook = MagnitudeCodebook(np.sort(codewords))
    return (codebook, history) if return_history else codebook


def uniform_magnitude(n_m: int, lo: float = 0.0, hi: float = 1.0) -> MagnitudeCodebook:
    """Midpoints of ``n_m`` equal bins on [lo, hi]."""
    if not 0.0 <= lo < hi <= np.pi / 2 + 1e-12:
        raise ValueError(f"need 0 <= lo < hi <= pi/2, got [{lo}, {hi}]")
    step = (hi - lo) / n_m
    return MagnitudeCodebook(lo + step * (np.arange(n_m) + 0.5))


@lru_cache(maxsize=32)
def _best_packing_cached(n: int, size: int, seed: int, draws: int) -> np.ndarray:
    rng = rng_stream(seed, 0xBE5)
    # Batch size capped so the (chunk, size, size) Gram stack stays ~64 MB.
    chunk = max(1, min(256, (1 << 22) // (size * size)))
    best_score = np.inf
    best = None
    done = 0
    while done < draws:
        b = min(chunk, draws - done)
        cand = rng.standard_normal((b, size, n)) + 1j * rng.standard_normal((b, size, n))
        cand /= np.linalg.norm(cand, axis=2, keepdims=True)
        gram = np.abs(cand @ np.conj(np.swapaxes(cand, 1, 2))) ** 2
        idx = np.arange(size)
        gram[:, idx, idx] = 0.0
        scores = gram.reshape(b, -1).max(axis=1)  # max |inner|^2 off-diagonal
        k = int(scores.argmin())
        if scores[k] < best_score:
            best_score = float(scores[k])
            best = cand[k].copy()
        done += b
    return best


def best_packing(n: int, size: int, seed: int = 0, draws: int = 10_000) -> DirectionCodebook:
    """Best of ``draws`` random codebooks by minimum pairwise chordal distance.

    Deterministic in (n, size, seed, draws); results are cached in-process.
    """
    if size < 2:
        raise ValueError("a packing needs at least two codewords")
    return DirectionCodebook(_best_packing_cached(int(n), int(size), int(seed), int(draws)))


def save_codebook(codebook: ShapeGainCodebook, path):
    """Plain-text format: header 'n N_d N_m', direction rows (re im
    interleaved), then magnitude rows; 17 significant digits round-trip
    float64 exactly."""
    d = codebook.directions.entries
    m = codebook.magnitudes.entries
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{codebook.n} {d.shape[0]} {m.shape[0]}\n")
        for row in d:
            flat = np.empty(2 * row.size)
            flat[0::2] = row.real
            flat[1::2] = row.imag
            fh.write(" ".join(f"{v:.17g}" for v in flat) + "\n")
        for v in m:
            fh.write(f"{v:.17g}\n")


def load_codebook(path) -> ShapeGainCodebook:
    """Inverse of :func:`save_codebook`, validating counts and norms."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty codebook file")
    head = lines[0].split()
    if len(head) != 3:
        raise ValueError(f"{path}: malformed header {lines[0]!r}")
    try:
        n, n_d, n_m = (int(v) for v in head)
    except ValueError as exc:
        raise ValueError(f"{path}: malformed header {lines[0]!r}") from exc
    if len(lines) != 1 + n_d + n_m:
        raise ValueError(
            f"{path}: expected {1 + n_d + n_m} lines for header + {n_d} directions "
            f"+ {n_m} magnitudes, found {len(lines)}"
        )
    dirs = np.empty((n_d, n), dtype=np.complex128)
    for i in range(n_d):
        parts = lines[1 + i].split()
        if len(parts) != 2 * n:
            raise ValueError(f"{path}: direction row {i} has {len(parts)} fields, wanted {2 * n}")
        flat = np.array([float(v) for v in parts])
        dirs[i] = flat[0::2] + 1j * flat[1::2]
        err = abs(np.linalg.norm(dirs[i]) - 1.0)
        if err > FILE_NORM_TOL:
            raise ValueError(f"{path}: direction row {i} norm error {err:.3e} > {FILE_NORM_TOL:.0e}")
    mags = np.array([float(lines[1 + n_d + j]) for j in range(n_m)])
    return ShapeGainCodebook(DirectionCodebook(dirs), MagnitudeCodebook(mags))
