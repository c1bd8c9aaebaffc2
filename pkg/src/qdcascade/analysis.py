"""Coincidence histograms and the g2(0) / HOM-visibility extraction pipeline.

The measurement chain mirrors standard pulsed correlation practice: build a
start-stop delay histogram between the two detector channels, integrate a
window around zero delay, normalize to the mean of the equivalent windows
around side peaks at multiples of the pulse period, and optionally subtract
a flat background whose level is chosen so that g2(0) versus integration
window flattens out (the plateau criterion).

All window sums follow the bin-center rule: a bin belongs to a window when
its center lies in [center - window/2, center + window/2), ties excluded at
the upper edge, which keeps every extraction bit-exact across runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    AnalysisError,
    DegenerateNormalizationError,
    FormatError,
    ParameterError,
    PlateauSelectionError,
)

DEFAULT_BIN_WIDTH = 10.0
DEFAULT_DELAY_RANGE = 150_000.0


@dataclass(frozen=True)
class CoincidenceHistogram:
    """Binned start-stop delay counts between channels 0 and 1.

    Delays are t_ch1 - t_ch0 in ps, covering [-delay_range, +delay_range)
    in uniform bins of bin_width; ``counts[k]`` belongs to the bin centered
    at ``-delay_range + (k + 1/2) bin_width``.
    """

    bin_width: float
    delay_range: float
    counts: np.ndarray
    total_pairs: int
    pulse_period: float

    def __post_init__(self):
        n = 2.0 * self.delay_range / self.bin_width
        if abs(n - round(n)) > 1e-9:
            raise ParameterError("2*delay_range must be an integer number of bins")
        object.__setattr__(self, "counts",
                           np.asarray(self.counts, dtype=np.int64))
        if len(self.counts) != int(round(n)):
            raise ParameterError(
                f"counts has {len(self.counts)} bins, expected {int(round(n))}"
            )
        if np.any(self.counts < 0):
            raise ParameterError("counts must be non-negative")

    @property
    def bin_centers(self):
        n = len(self.counts)
        return -self.delay_range + (np.arange(n) + 0.5) * self.bin_width


def build_histogram(stream, bin_width=DEFAULT_BIN_WIDTH,
                    delay_range=DEFAULT_DELAY_RANGE, pulse_period=None):
    """Correlate all channel-0 / channel-1 tag pairs into a delay histogram.

    Every pair with |t1 - t0| <= delay_range is binned at delay t1 - t0
    (a delay of exactly +delay_range lands in the last bin).

    Parameters
    ----------
    stream : TimeTagStream
    bin_width : float
        Bin width in ps, >= 1.
    delay_range : float
        Histogram half-range in ps; must be an integer number of bins.
    pulse_period : float, optional
        Override for the pulse period recorded in the stream header.
    """
    if bin_width < 1.0:
        raise ParameterError("bin_width must be >= 1 ps")
    if pulse_period is None:
        pulse_period = stream.pulse_period
        if pulse_period is None:
            raise FormatError("stream header lacks pulse_period_ps; pass pulse_period")
    t0 = stream.channel_times(0).astype(np.float64)
    t1 = stream.channel_times(1).astype(np.float64)
    n_bins = int(round(2.0 * delay_range / bin_width))
    counts = np.zeros(n_bins, dtype=np.int64)

    if len(t0) and len(t1):
        # slab over t0 to bound the size of the expanded pair arrays
        slab = max(1, int(2e6 / max(1.0, len(t1) * 2.0 * delay_range
                                    / max(t1[-1] - t1[0], 1.0))))
        for start in range(0, len(t0), slab):
            ts = t0[start:start + slab]
            lo = np.searchsorted(t1, ts - delay_range, side="left")
            hi = np.searchsorted(t1, ts + delay_range, side="right")
            lens = hi - lo
            total = int(lens.sum())
            if total == 0:
                continue
            rows = np.repeat(np.arange(len(ts)), lens)
            offsets = np.arange(total) - np.repeat(np.cumsum(lens) - lens, lens)
            deltas = t1[np.repeat(lo, lens) + offsets] - ts[rows]
            idx = np.floor((deltas + delay_range) / bin_width).astype(np.int64)
            np.clip(idx, 0, n_bins - 1, out=idx)
            counts += np.bincount(idx, minlength=n_bins)

    return CoincidenceHistogram(
        bin_width=float(bin_width),
        delay_range=float(delay_range),
        counts=counts,
        total_pairs=int(counts.sum()),
        pulse_period=float(pulse_period),
    )


def _window_slice(hist, center, window):
    """Bin indices whose centers lie in [center - window/2, center + window/2)."""
    if window > hist.pulse_period + 1e-9:
        raise ParameterError("window must not exceed the pulse period")
    lo = center - 0.5 * window
    hi = center + 0.5 * window
    if lo < -hist.delay_range or hi > hist.delay_range + 1e-9:
        raise ParameterError(
            f"window [{lo:g}, {hi:g}] ps exceeds the histogram range"
        )
    centers = hist.bin_centers
    sel = (centers >= lo) & (centers < hi)
    return np.flatnonzero(sel)


def integrate_peak(hist, center, window):
    """Sum of counts in the window around ``center`` (bin-center rule)."""
    idx = _window_slice(hist, center, window)
    return int(hist.counts[idx].sum())


def side_peak_centers(hist, window, n_side_peaks, first_side_peak=1):
    """Centers of the first ``n_side_peaks`` usable side-peak windows.

    Peaks sit at integer multiples of the pulse period and are taken in
    order of increasing |multiple| starting at ``first_side_peak``,
    alternating +/-; only windows fully inside the histogram are used.
    """
    if n_side_peaks < 1:
        raise ParameterError("n_side_peaks must be >= 1")
    centers = []
    m = first_side_peak
    while len(centers) < n_side_peaks:
        hit = False
        for sign in (1, -1):
            c = sign * m * hist.pulse_period
            if abs(c) + 0.5 * window <= hist.delay_range + 1e-9:
                centers.append(c)
                hit = True
                if len(centers) == n_side_peaks:
                    break
        if not hit:
            raise ParameterError(
                f"histogram range supports only {len(centers)} side peaks "
                f"of the requested {n_side_peaks}"
            )
        m += 1
    return centers


def _normalized_central(hist, window, n_side_peaks, background, first_side_peak):
    """Central window sum over mean side-peak window sum, with Poisson error.

    Returns (value, error, central_net, side_mean_net).
    """
    c_idx = _window_slice(hist, 0.0, window)
    c_raw = float(hist.counts[c_idx].sum())
    c_net = c_raw - background * len(c_idx)

    side_net = []
    side_raw_total = 0.0
    for center in side_peak_centers(hist, window, n_side_peaks, first_side_peak):
        idx = _window_slice(hist, center, window)
        raw = float(hist.counts[idx].sum())
        side_raw_total += raw
        side_net.append(raw - background * len(idx))
    k = len(side_net)
    s_mean = float(np.mean(side_net))
    if s_mean <= 0.0:
        raise DegenerateNormalizationError(
            "side-peak normalization is zero or negative; cannot normalize"
        )
    value = c_net / s_mean
    var_c = c_raw                      # Poisson variance of the raw sum
    var_s_mean = side_raw_total / k**2
    error = math.sqrt(var_c / s_mean**2 + (c_net**2 / s_mean**4) * var_s_mean)
    return value, error, c_net, s_mean


@dataclass(frozen=True)
class G2Result:
    """Normalized second-order correlation at zero delay."""

    g2_zero: float
    error: float
    window: float
    n_side_peaks: int
    background_level: float = 0.0
    noise_boundary: float | None = None

    def __post_init__(self):
        if self.error < 0.0:
            raise ParameterError("error must be >= 0")


def g2_zero(hist, window, n_side_peaks=10, background=0.0, first_side_peak=1):
    """g2(0) as central-window counts over the mean of side-peak windows.

    ``background`` (counts per bin) is subtracted from every window before
    normalizing.  Errors are Poisson, propagated through the ratio with the
    delta method.
    """
    value, error, _, _ = _normalized_central(
        hist, window, n_side_peaks, background, first_side_peak
    )
    return G2Result(
        g2_zero=value,
        error=error,
        window=window,
        n_side_peaks=n_side_peaks,
        background_level=background,
    )


def g2_vs_window(hist, windows, background=0.0, n_side_peaks=10,
                 first_side_peak=1):
    """g2(0) for each integration window; returns an (n, 3) array of
    (window_ps, g2, error) rows."""
    windows = np.asarray(windows, dtype=float)
    if np.any(np.diff(windows) <= 0.0):
        raise ParameterError("windows must be strictly ascending")
    rows = []
    for w in windows:
        res = g2_zero(hist, float(w), n_side_peaks, background, first_side_peak)
        rows.append((float(w), res.g2_zero, res.error))
    return np.array(rows)


def estimate_background(hist, noise_boundary):
    """Mean count of all bins below ``noise_boundary`` (0 if none qualify)."""
    if noise_boundary <= 0.0:
        raise ParameterError("noise_boundary must be > 0")
    sel = hist.counts < noise_boundary
    if not sel.any():
        return 0.0
    return float(hist.counts[sel].mean())


@dataclass(frozen=True)
class CandidateDiagnostics:
    """Plateau diagnostics for one noise-boundary candidate."""

    boundary: float
    background: float
    flatness_score: float
    curve: np.ndarray  # (window, g2, error) rows


@dataclass(frozen=True)
class BoundarySelection:
    boundary: float
    background: float
    flatness_score: float
    curve: np.ndarray
    candidates: tuple


def _flatness_score(curve, min_window):
    """Max |delta g2| between consecutive windows in units of its error."""
    sel = curve[:, 0] >= min_window
    g = curve[sel, 1]
    e = curve[sel, 2]
    if len(g) < 2:
        raise ParameterError("need at least two windows above the plateau region")
    dg = np.abs(np.diff(g))
    de = np.sqrt(e[:-1] ** 2 + e[1:] ** 2)
    de = np.maximum(de, 1e-30)
    return float(np.max(dg / de))


def select_noise_boundary(hist, candidates, windows, n_side_peaks=10,
                          first_side_peak=1, plateau_min_window=2000.0):
    """Choose the background noise boundary by the plateau criterion.

    For each candidate boundary, estimate the background level, subtract it,
    and score the flatness of g2(0) versus integration window above
    ``plateau_min_window``.  The smallest candidate whose maximum
    slope-to-error ratio is below 1 wins.

    Raises
    ------
    PlateauSelectionError
        If no candidate plateaus; the exception carries the per-candidate
        diagnostics.
    """
    cands = sorted(float(c) for c in candidates)
    if len(cands) < 2:
        raise ParameterError("need at least two candidate boundaries")
    windows = np.asarray(windows, dtype=float)
    if windows.min() > 2000.0 or windows.max() < 12000.0:
        raise ParameterError("windows must cover the range [2000, 12000] ps")

    diagnostics = []
    chosen = None
    for cand in cands:
        bg = estimate_background(hist, cand)
        curve = g2_vs_window(hist, windows, bg, n_side_peaks, first_side_peak)
        score = _flatness_score(curve, plateau_min_window)
        diagnostics.append(
            CandidateDiagnostics(cand, bg, score, curve)
        )
        if chosen is None and score < 1.0:
            chosen = diagnostics[-1]
    if chosen is None:
        raise PlateauSelectionError(
            "no candidate noise boundary produced a flat g2-vs-window curve",
            diagnostics=tuple(diagnostics),
        )
    return BoundarySelection(
        boundary=chosen.boundary,
        background=chosen.background,
        flatness_score=chosen.flatness_score,
        curve=chosen.curve,
        candidates=tuple(diagnostics),
    )


@dataclass(frozen=True)
class VisibilityReport:
    """Raw and corrected HOM visibility with the correction inputs used."""

    v_raw: float
    v_raw_error: float
    method: str                      # "two-config" | "single-config"
    window: float
    n_parallel: float
    n_parallel_error: float
    n_perp: float | None = None
    n_perp_error: float | None = None
    v_corrected: float | None = None
    v_corrected_error: float | None = None
    epsilon: float | None = None
    g2_zero: float | None = None
    reflectance: float | None = None
    transmittance: float | None = None

    def __post_init__(self):
        for name in ("v_raw", "v_corrected"):
            value = getattr(self, name)
            if value is not None and not (-1.0 <= value <= 1.2):
                raise AnalysisError(
                    f"{name} = {value:.4f} outside the sanity band [-1, 1.2]"
                )

    def with_correction(self, epsilon, g2_zero, reflectance, transmittance,
                        g2_error=0.0):
        """Return a copy with the corrected visibility filled in."""
        factor = correction_factor(epsilon, g2_zero, reflectance, transmittance)
        v_corr = factor * self.v_raw
        # propagated error: raw statistics plus the g2 contribution
        base = factor * self.v_raw_error
        dg = 2.0 * factor / (1.0 + 2.0 * g2_zero) * abs(self.v_raw) * g2_error
        return replace(
            self,
            v_corrected=v_corr,
            v_corrected_error=math.hypot(base, dg),
            epsilon=epsilon,
            g2_zero=g2_zero,
            reflectance=reflectance,
            transmittance=transmittance,
        )


def hom_visibility(hist_par, hist_perp=None, window=13100.0, n_side_peaks=10,
                   background=0.0, first_side_peak=2, background_perp=None):
    """Raw HOM visibility from co- (and optionally cross-) polarized data.

    n_par (n_perp) is the central-window sum normalized to the mean of
    ``n_side_peaks`` side-peak windows.  With both configurations the
    visibility is 1 - n_par/n_perp; with co-polarized data alone it is
    1 - 2 n_par.

    Side peaks start at ``first_side_peak`` pulse periods from zero; the
    default of 2 skips the +-1 peaks, which sit lower than the far peaks
    because a pulse cannot pair with itself across the interferometer.

    ``background`` (and ``background_perp``, defaulting to the same level)
    are flat counts-per-bin levels subtracted from every window.

    Returns
    -------
    VisibilityReport
        With ``v_corrected`` unset; see :meth:`VisibilityReport.with_correction`.
    """
    n_par, n_par_err, _, _ = _normalized_central(
        hist_par, window, n_side_peaks, background, first_side_peak
    )
    if hist_perp is not None:
        if background_perp is None:
            background_perp = background
        n_perp, n_perp_err, _, _ = _normalized_central(
            hist_perp, window, n_side_peaks, background_perp, first_side_peak
        )
        if n_perp <= 0.0:
            raise DegenerateNormalizationError("n_perp must be positive")
        v = 1.0 - n_par / n_perp
        err = (n_par / n_perp) * math.hypot(
            n_par_err / n_par if n_par else 0.0, n_perp_err / n_perp
        )
        return VisibilityReport(
            v_raw=v, v_raw_error=err, method="two-config", window=window,
            n_parallel=n_par, n_parallel_error=n_par_err,
            n_perp=n_perp, n_perp_error=n_perp_err,
        )
    v = 1.0 - 2.0 * n_par
    return VisibilityReport(
        v_raw=v, v_raw_error=2.0 * n_par_err, method="single-config",
        window=window, n_parallel=n_par, n_parallel_error=n_par_err,
    )


def correction_factor(epsilon, g2_zero, reflectance, transmittance):
    """Multiplier (1-eps)^-2 (1+2 g2) (R^2+T^2)/(2RT) applied to v_raw."""
    if not (0.0 <= epsilon < 1.0):
        raise ParameterError("epsilon must be in [0, 1)")
    if g2_zero < 0.0:
        raise ParameterError("g2_zero must be >= 0")
    r, t = reflectance, transmittance
    if not (0.0 < r < 1.0 and 0.0 < t < 1.0):
        raise ParameterError("reflectance and transmittance must be in (0, 1)")
    if abs(r + t - 1.0) > 1e-9:
        raise ParameterError("reflectance + transmittance must equal 1")
    return (1.0 - epsilon) ** -2 * (1.0 + 2.0 * g2_zero) * (r * r + t * t) / (2.0 * r * t)


def correct_visibility(v_raw, epsilon, g2_zero, reflectance, transmittance):
    """Visibility corrected for classical interference contrast, residual
    multi-photon events, and beam-splitter asymmetry.

    Reduces to (1 + 2 g2) * v_raw for epsilon = 0 and a balanced splitter.
    """
    return correction_factor(epsilon, g2_zero, reflectance, transmittance) * v_raw
