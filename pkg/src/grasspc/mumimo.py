"""Limited-feedback multiuser MIMO downlink with zero-forcing beamforming.

Single-antenna users feed back quantized channel directions; the
transmitter zero-forces on whatever directions it has (true, memoryless-
quantized, or predictively tracked) and splits the power budget equally.
The per-user SINR is evaluated against the *true* channels, so feedback
error shows up as residual inter-user interference.  The experiment
driver compares perfect CSI, per-step memoryless random codebooks, and
the predictive tangent codec across an SNR grid and a set of normalized
Doppler values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ar1_from_innovations, bessel_j0, complex_gaussian, rng_stream
from .codebooks import ShapeGainCodebook, best_packing, uniform_magnitude
from .codec import encode_trace
from .geometry import GrassmannPoint

__all__ = [
    "RankDeficientError",
    "CompositeChannel",
    "Beamformers",
    "SumRateResult",
    "SumRateConfig",
    "SumRateTableRow",
    "zf_beamformers",
    "per_user_sinr",
    "sum_rate",
    "evaluate_sum_rate",
    "default_gpc_codebook",
    "run_sumrate_experiment",
]

RANK_TOL = 1e-10
UNIT_COLUMN_TOL = 1e-12

SCHEMES = ("perfect_csi", "memoryless_random", "gpc")


class RankDeficientError(ArithmeticError):
    """Composite channel too close to rank deficient for zero-forcing."""


@dataclass(frozen=True)
class CompositeChannel:
    """Stacked user channel rows, shape (U, N_t) with U <= N_t."""

    rows: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.rows, dtype=np.complex128).copy()
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise ValueError(f"rows must have shape (U >= 1, N_t), got {arr.shape}")
        if arr.shape[0] > arr.shape[1]:
            raise ValueError(
                f"more users ({arr.shape[0]}) than transmit antennas ({arr.shape[1]})"
            )
        if not np.all(np.isfinite(arr.view(np.float64))):
            raise ValueError("channel rows must be finite")
        if np.any(np.linalg.norm(arr, axis=1) == 0.0):
            raise ValueError("channel rows must be nonzero")
        arr.setflags(write=False)
        object.__setattr__(self, "rows", arr)

    @property
    def users(self) -> int:
        return self.rows.shape[0]

    @property
    def n_t(self) -> int:
        return self.rows.shape[1]

    @property
    def gains(self) -> np.ndarray:
        """Per-user channel norms ||h_u||."""
        return np.linalg.norm(self.rows, axis=1)

    @property
    def directions(self) -> np.ndarray:
        """Unit-norm channel directions g_u, one per row."""
        return self.rows / self.gains[:, None]


@dataclass(frozen=True)
class Beamformers:
    """Unit-norm beamforming columns, shape (N_t, U)."""

    columns: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.columns, dtype=np.complex128).copy()
        if arr.ndim != 2 or arr.shape[1] < 1:
            raise ValueError(f"columns must have shape (N_t, U >= 1), got {arr.shape}")
        norms = np.linalg.norm(arr, axis=0)
        if np.any(np.abs(norms - 1.0) > UNIT_COLUMN_TOL):
            raise ValueError("beamforming columns must be unit norm")
        arr.setflags(write=False)
        object.__setattr__(self, "columns", arr)

    @property
    def users(self) -> int:
        return self.columns.shape[1]


def zf_beamformers(channels: CompositeChannel) -> Beamformers:
    """Zero-forcing beamformers: normalized columns of the pseudoinverse.

    By construction h_u^H v_n = 0 for n != u when the composite matrix has
    full row rank; a smallest singular value at or below ``RANK_TOL``
    raises :class:`RankDeficientError` instead of amplifying noise.
    """
    h = channels.rows
    smallest = np.linalg.svd(h, compute_uv=False)[-1]
    if smallest <= RANK_TOL:
        raise RankDeficientError(
            f"smallest singular value {smallest:.3e} <= {RANK_TOL:g}; "
            "zero-forcing needs a full-row-rank composite channel"
        )
    # Receive model is y_u = h_u^H x, so the matrix whose pseudoinverse
    # nulls the cross terms is the conjugated row stack.
    pinv = np.linalg.pinv(h.conj())
    return Beamformers(pinv / np.linalg.norm(pinv, axis=0, keepdims=True))


def _sinr_terms(channels: CompositeChannel, beamformers: Beamformers):
    """Per-user (||h||^2, |g^H v_u|^2, sum_{n != u} |g^H v_n|^2)."""
    if beamformers.users != channels.users:
        raise ValueError("beamformer count must match user count")
    cross = np.abs(channels.directions.conj() @ beamformers.columns) ** 2
    signal = np.diagonal(cross).copy()
    interference = cross.sum(axis=1) - signal
    return channels.gains**2, signal, interference


def per_user_sinr(
    channels: CompositeChannel, beamformers: Beamformers, snr_db: float
) -> np.ndarray:
    """SINR per user at equal power allocation and unit noise variance.

    SINR_u = (P/U) ||h_u||^2 |g_u^H v_u|^2
             / (1 + (P/U) ||h_u||^2 sum_{n != u} |g_u^H v_n|^2)
    with P = 10^(snr_db / 10) split equally over the U streams.
    """
    power_per_user = 10.0 ** (float(snr_db) / 10.0) / channels.users
    a, signal, interference = _sinr_terms(channels, beamformers)
    return power_per_user * a * signal / (1.0 + power_per_user * a * interference)


def sum_rate(sinrs) -> float:
    """Sum of per-user rates log2(1 + SINR) in bits/s/Hz."""
    s = np.asarray(sinrs, dtype=np.float64)
    if np.any(s < 0.0) or not np.all(np.isfinite(s)):
        raise ValueError("SINR values must be finite and nonnegative")
    return float(np.log2(1.0 + s).sum())


@dataclass(frozen=True)
class SumRateResult:
    """Per-user SINRs and rates plus their sum for one channel use."""

    per_user_sinr: np.ndarray
    per_user_rate: np.ndarray
    sum_rate: float
    snr_db: float

    def __post_init__(self):
        sinr = np.asarray(self.per_user_sinr, dtype=np.float64)
        rate = np.asarray(self.per_user_rate, dtype=np.float64)
        if sinr.shape != rate.shape or sinr.ndim != 1:
            raise ValueError("per-user SINR and rate must be 1-D with equal length")
        if not math.isclose(self.sum_rate, float(rate.sum()), rel_tol=0.0, abs_tol=1e-9):
            raise ValueError("sum_rate must equal the sum of per-user rates")
        object.__setattr__(self, "per_user_sinr", sinr)
        object.__setattr__(self, "per_user_rate", rate)


def evaluate_sum_rate(
    channels: CompositeChannel, beamformers: Beamformers, snr_db: float
) -> SumRateResult:
    """Evaluate SINRs, rates, and sum rate for one channel use."""
    sinr = per_user_sinr(channels, beamformers, snr_db)
    rate = np.log2(1.0 + sinr)
    return SumRateResult(sinr, rate, float(rate.sum()), float(snr_db))


@dataclass(frozen=True)
class SumRateConfig:
    """Settings for the sum-rate comparison experiment."""

    n_t: int = 4
    users: int = 4
    bits: int = 9
    magnitude_bits: int = 3
    snr_db_grid: tuple = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    fdts_grid: tuple = (0.001, 0.04)
    schemes: tuple = SCHEMES
    trials: int = 200
    steps: int = 60
    discard: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.n_t < 2:
            raise ValueError(f"n_t must be >= 2, got {self.n_t}")
        if not 1 <= self.users <= self.n_t:
            raise ValueError(f"need 1 <= users <= n_t={self.n_t}, got {self.users}")
        unknown = set(self.schemes) - set(SCHEMES)
        if unknown or not self.schemes:
            raise ValueError(f"schemes must be a nonempty subset of {SCHEMES}, got {self.schemes}")
        if "gpc" in self.schemes and self.bits <= self.magnitude_bits:
            raise ValueError(
                f"bits ({self.bits}) must exceed magnitude_bits ({self.magnitude_bits}) "
                "to leave at least one direction bit"
            )
        if self.bits < 1 or self.magnitude_bits < 0:
            raise ValueError("bits must be >= 1 and magnitude_bits >= 0")
        if not self.snr_db_grid or not all(math.isfinite(s) for s in self.snr_db_grid):
            raise ValueError("snr_db_grid must be nonempty and finite")
        if "gpc" in self.schemes and (not self.fdts_grid or min(self.fdts_grid) <= 0.0):
            raise ValueError("fdts_grid must be nonempty and positive")
        if self.trials < 2:
            raise ValueError("trials must be >= 2 to report a standard error")
        if self.discard < 2:
            raise ValueError("discard must be >= 2 (the tracker needs two seed steps)")
        if self.steps <= self.discard:
            raise ValueError(f"steps ({self.steps}) must exceed discard ({self.discard})")

    @property
    def window(self) -> int:
        """Number of measured channel uses per trial."""
        return self.steps - self.discard


@dataclass(frozen=True)
class SumRateTableRow:
    """One aggregated cell of the sum-rate comparison table."""

    scheme: str
    snr_db: float
    fdts: float
    bits: int
    trial_count: int
    sum_rate_mean: float
    sum_rate_stderr: float


def default_gpc_codebook(config: SumRateConfig) -> ShapeGainCodebook:
    """Shape-gain codebook used by the ``gpc`` scheme: a best-of-random
    chordal packing for directions and uniform [0, 1] magnitude levels."""
    n_d = 1 << (config.bits - config.magnitude_bits)
    return ShapeGainCodebook(
        best_packing(config.n_t, n_d),
        uniform_magnitude(1 << config.magnitude_bits, 0.0, 1.0),
    )


def _window_mean_rates(true_steps, quantized_steps, powers_per_user, users):
    """Mean sum rate over a window of channel uses, one value per SNR.

    ``true_steps`` and ``quantized_steps`` are (W, U, n) stacks; the
    quantized rows steer the zero-forcing beamformers while the true rows
    set the SINR.
    """
    totals = np.zeros(len(powers_per_user))
    for true_rows, quant_rows in zip(true_steps, quantized_steps):
        channels = CompositeChannel(true_rows)
        beams = zf_beamformers(CompositeChannel(quant_rows))
        a, signal, interference = _sinr_terms(channels, beams)
        sinr = (
            powers_per_user[:, None]
            * a
            * signal
            / (1.0 + powers_per_user[:, None] * a * interference)
        )
        totals += np.log2(1.0 + sinr).sum(axis=1)
    return totals / len(true_steps)


def _perfect_csi_trial(config: SumRateConfig, trial: int, powers) -> np.ndarray:
    rng = rng_stream(config.seed, 0x50, trial)
    h = complex_gaussian(rng, (config.window, config.users, config.n_t))
    return _window_mean_rates(h, h, powers, config.users)


def _memoryless_trial(config: SumRateConfig, trial: int, powers) -> np.ndarray:
    rng = rng_stream(config.seed, 0x3E, trial)
    h = complex_gaussian(rng, (config.window, config.users, config.n_t))
    quantized = np.empty_like(h)
    for u in range(config.users):
        cb_rng = rng_stream(config.seed, 0xCB, trial, u)
        raw = complex_gaussian(cb_rng, (1 << config.bits, config.n_t))
        codebook = raw / np.linalg.norm(raw, axis=1, keepdims=True)
        directions = h[:, u, :] / np.linalg.norm(h[:, u, :], axis=1, keepdims=True)
        picks = np.argmax(np.abs(directions.conj() @ codebook.T) ** 2, axis=1)
        quantized[:, u, :] = codebook[picks]
    return _window_mean_rates(h, quantized, powers, config.users)


def _gpc_trial(
    config: SumRateConfig, trial: int, fdts: float, codebook: ShapeGainCodebook, powers
) -> np.ndarray:
    alpha = bessel_j0(2.0 * math.pi * fdts)
    true_steps = np.empty((config.window, config.users, config.n_t), dtype=np.complex128)
    quantized = np.empty_like(true_steps)
    for u in range(config.users):
        z = complex_gaussian(rng_stream(config.seed, 0xA1, trial, u), (config.steps, config.n_t))
        raw = ar1_from_innovations(z, alpha)
        rows = raw / np.linalg.norm(raw, axis=1, keepdims=True)
        points = tuple(GrassmannPoint.from_vector(row) for row in rows)
        result = encode_trace(points, codebook, mode="memoryless", on_track_loss="reinit")
        true_steps[:, u, :] = raw[config.discard :]
        for j, k in enumerate(range(config.discard, config.steps)):
            quantized[j, u, :] = result.estimates[k - 2].coords
    return _window_mean_rates(true_steps, quantized, powers, config.users)


def run_sumrate_experiment(
    config: SumRateConfig, codebook: ShapeGainCodebook | None = None
) -> tuple[SumRateTableRow, ...]:
    """Run the sum-rate comparison and return one aggregated row per
    (scheme, Doppler, SNR) cell.

    Every scheme shares its channel draws across the whole SNR grid, and
    the ``gpc`` scheme reuses one innovation block per (trial, user) across
    all Doppler values, so comparisons along those axes are paired.  The
    first ``config.discard`` channel uses of each trial are excluded to let
    the tracker converge past its memoryless initialization.  Rows for the
    Doppler-free schemes report ``fdts = 0.0``, and ``perfect_csi`` reports
    ``bits = 0``.
    """
    powers = np.array([10.0 ** (s / 10.0) / config.users for s in config.snr_db_grid])
    if codebook is None and "gpc" in config.schemes:
        codebook = default_gpc_codebook(config)
    if codebook is not None and codebook.n != config.n_t:
        raise ValueError(f"codebook dimension {codebook.n} does not match n_t {config.n_t}")

    cells: list[SumRateTableRow] = []
    for scheme in config.schemes:
        fdts_values = config.fdts_grid if scheme == "gpc" else (0.0,)
        bits = 0 if scheme == "perfect_csi" else config.bits
        for fdts in fdts_values:
            per_trial = np.empty((config.trials, len(powers)))
            for trial in range(config.trials):
                if scheme == "perfect_csi":
                    per_trial[trial] = _perfect_csi_trial(config, trial, powers)
                elif scheme == "memoryless_random":
                    per_trial[trial] = _memoryless_trial(config, trial, powers)
                else:
                    per_trial[trial] = _gpc_trial(config, trial, fdts, codebook, powers)
            mean = per_trial.mean(axis=0)
            stderr = per_trial.std(axis=0, ddof=1) / math.sqrt(config.trials)
            for i, snr_db in enumerate(config.snr_db_grid):
                cells.append(
                    SumRateTableRow(
                        scheme=scheme,
                        snr_db=float(snr_db),
                        fdts=float(fdts),
                        bits=bits,
                        trial_count=config.trials,
                        sum_rate_mean=float(mean[i]),
                        sum_rate_stderr=float(stderr[i]),
                    )
                )
    return tuple(cells)
