"""Lifetime extraction from delay histograms.

Decay models are closed-form convolutions of the emission dynamics with a
Gaussian instrument response of known FWHM (exponentially modified
Gaussians), fitted by weighted least squares with multi-start local
optimization.  Parameter uncertainties come from a parametric bootstrap:
bin counts are resampled as Poisson around the fitted curve and refitted.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import least_squares
from scipy.special import erfcx

from .core import DEGENERATE_RATE_THRESHOLD
from .errors import BootstrapError, FitError, FormatError, ParameterError

#: FWHM of a Gaussian divided by its standard deviation, 2 sqrt(2 ln 2).
GAUSSIAN_FWHM = 2.0 * math.sqrt(2.0 * math.log(2.0))

_MODEL_PARAMS = {
    "exponential": ("gamma", "amplitude", "t0", "baseline"),
    "cascade": ("gamma_xx", "gamma_x", "amplitude", "t0", "baseline"),
}

# erfcx overflows past roughly -26; switch to the asymptotic branch there
_ERFCX_CUT = -25.0


def _exp_gauss(t, gamma, mu, sigma):
    """Convolution of exp(-gamma (t - mu)) * step(t - mu) with a unit-area
    Gaussian of width sigma.  Stable over the full range of arguments."""
    t = np.asarray(t, dtype=float)
    z = (mu + gamma * sigma * sigma - t) / (sigma * math.sqrt(2.0))
    out = np.empty_like(t)
    tail = z < _ERFCX_CUT
    safe = ~tail
    out[safe] = 0.5 * np.exp(-((t[safe] - mu) ** 2) / (2.0 * sigma * sigma)) \
        * erfcx(z[safe])
    # far past the rise, erfc -> 2 and the convolution is the bare exponential
    out[tail] = np.exp(gamma * (mu - t[tail]) + 0.5 * (gamma * sigma) ** 2)
    return out


def _lin_exp_gauss(t, gamma, mu, sigma):
    """Convolution of (t - mu) exp(-gamma (t - mu)) * step with the Gaussian
    (the negative gamma-derivative of :func:`_exp_gauss`)."""
    t = np.asarray(t, dtype=float)
    base = _exp_gauss(t, gamma, mu, sigma)
    gauss = np.exp(-((t - mu) ** 2) / (2.0 * sigma * sigma)) / math.sqrt(2.0 * math.pi)
    return (t - mu - gamma * sigma * sigma) * base + sigma * gauss


def _check_model_args(gamma_values, irf_fwhm):
    for g in gamma_values:
        if not (g > 0.0):
            raise ParameterError("decay rates must be > 0")
    if not (irf_fwhm > 0.0):
        raise ParameterError("irf_fwhm must be > 0")


def model_exponential_irf(t, gamma, amplitude, t0, baseline, irf_fwhm):
    """Exponential decay convolved with a Gaussian instrument response.

    amplitude * gamma * exp(gamma (t0 + gamma sigma^2/2 - t))
        * erfc((t0 + gamma sigma^2 - t) / (sigma sqrt 2)) / 2  +  baseline

    with sigma = irf_fwhm / (2 sqrt(2 ln 2)).  ``amplitude`` is the
    integrated area above baseline; the curve tends to the bare exponential
    as the IRF width goes to zero.
    """
    _check_model_args((gamma,), irf_fwhm)
    sigma = irf_fwhm / GAUSSIAN_FWHM
    out = amplitude * gamma * _exp_gauss(t, gamma, t0, sigma) + baseline
    return float(out) if np.isscalar(t) else out


def model_cascade_irf(t, gamma_xx, gamma_x, amplitude, t0, baseline, irf_fwhm):
    """Two-step cascade population convolved with the Gaussian response.

    The X population rises with the XX decay and falls with the X decay:

        amplitude * gamma_XX/(gamma_X - gamma_XX) * (E(gamma_XX) - E(gamma_X))

    with E the IRF-convolved exponential of :func:`model_exponential_irf`'s
    kernel.  Within ``DEGENERATE_RATE_THRESHOLD`` of equal rates the analytic
    equal-rate limit is used.
    """
    _check_model_args((gamma_xx, gamma_x), irf_fwhm)
    sigma = irf_fwhm / GAUSSIAN_FWHM
    if abs(gamma_x - gamma_xx) / gamma_xx < DEGENERATE_RATE_THRESHOLD:
        gbar = 0.5 * (gamma_xx + gamma_x)
        shape = gamma_xx * _lin_exp_gauss(t, gbar, t0, sigma)
    else:
        shape = gamma_xx / (gamma_x - gamma_xx) * (
            _exp_gauss(t, gamma_xx, t0, sigma) - _exp_gauss(t, gamma_x, t0, sigma)
        )
    out = amplitude * shape + baseline
    return float(out) if np.isscalar(t) else out


def evaluate_model(model, t, params, irf_fwhm):
    """Evaluate a named decay model from a parameter dict."""
    if model == "exponential":
        return model_exponential_irf(
            t, params["gamma"], params["amplitude"], params["t0"],
            params["baseline"], irf_fwhm,
        )
    if model == "cascade":
        return model_cascade_irf(
            t, params["gamma_xx"], params["gamma_x"], params["amplitude"],
            params["t0"], params["baseline"], irf_fwhm,
        )
    raise ParameterError(f"unknown model {model!r}")


@dataclass(frozen=True)
class DecayHistogram:
    """Delay-from-pulse histogram of one detection channel."""

    bin_centers: np.ndarray
    counts: np.ndarray
    irf_fwhm: float

    def __post_init__(self):
        object.__setattr__(self, "bin_centers",
                           np.asarray(self.bin_centers, dtype=float))
        object.__setattr__(self, "counts",
                           np.asarray(self.counts, dtype=np.int64))
        if self.bin_centers.shape != self.counts.shape:
            raise FormatError("bin_centers and counts must have equal length")
        if len(self.bin_centers) >= 2:
            steps = np.diff(self.bin_centers)
            if np.any(np.abs(steps - steps[0]) > 1e-6 * abs(steps[0])):
                raise FormatError("bins must be uniform")
        if np.any(self.counts < 0):
            raise FormatError("counts must be non-negative")

    @property
    def bin_width(self):
        return float(self.bin_centers[1] - self.bin_centers[0])

    @classmethod
    def from_stream(cls, stream, bin_width=10.0, irf_fwhm=None,
                    wrap_fraction=0.25):
        """Fold a lifetime stream modulo the pulse period.

        Delays are mapped into [-wrap_fraction, 1 - wrap_fraction) pulse
        periods so that jitter just below the excitation time stays attached
        to the peak instead of wrapping to the far end.
        """
        period = stream.pulse_period
        if period is None:
            raise FormatError("stream header lacks pulse_period_ps")
        if irf_fwhm is None:
            value = stream.header.get("irf_fwhm_ps")
            if value is None:
                raise FormatError("pass irf_fwhm or include it in the header")
            irf_fwhm = float(value)
        t = stream.channel_times(0).astype(np.float64)
        shift = wrap_fraction * period
        delays = np.mod(t + shift, period) - shift
        n_bins = int(math.floor(period / bin_width))
        lo = -shift
        idx = np.floor((delays - lo) / bin_width).astype(np.int64)
        keep = (idx >= 0) & (idx < n_bins)
        counts = np.bincount(idx[keep], minlength=n_bins)
        centers = lo + (np.arange(n_bins) + 0.5) * bin_width
        return cls(bin_centers=centers, counts=counts, irf_fwhm=float(irf_fwhm))


@dataclass(frozen=True)
class FitResult:
    """Best-fit decay parameters with optional bootstrap uncertainties."""

    model: str
    params: dict
    fixed: dict
    residual_chi2: float
    n_points: int
    errors: dict | None = None
    n_bootstrap: int = 0
    ill_conditioned: bool = False

    def species_rate(self):
        """The collected species' decay rate: gamma for an exponential fit,
        gamma_x for a cascade fit."""
        return self.params["gamma" if self.model == "exponential" else "gamma_x"]

    def species_rate_error(self):
        name = "gamma" if self.model == "exponential" else "gamma_x"
        return 0.0 if not self.errors else self.errors.get(name, 0.0)

    def lifetimes(self):
        """Fitted lifetimes in ps, keyed like the rate parameters."""
        return {name: 1.0 / value for name, value in self.params.items()
                if name.startswith("gamma")}


def _initial_guess(hist, model, fixed):
    """Heuristic starting point: t0 near the peak bin, the rate from the
    log-slope of the decaying tail, the amplitude from the peak height."""
    t = hist.bin_centers
    c = hist.counts.astype(float)
    peak = int(np.argmax(c))
    t_peak = t[peak]
    pre = c[t < t_peak - 3.0 * hist.irf_fwhm]
    baseline = float(np.median(pre)) if len(pre) >= 5 else float(c.min())

    # decaying tail between ~80% and ~5% of the peak (above baseline)
    height = c[peak] - baseline
    tail = np.flatnonzero(
        (t > t_peak) & (c - baseline > 0.05 * height) & (c - baseline < 0.8 * height)
    )
    if len(tail) >= 3:
        y = np.log(np.maximum(c[tail] - baseline, 0.5))
        slope = np.polyfit(t[tail], y, 1)[0]
        gamma_tail = max(-slope, 1e-6)
    else:
        gamma_tail = 1.0 / max(t_peak - t[0], 10.0 * hist.bin_width)

    guess = {"t0": t_peak - 0.5 * hist.irf_fwhm, "baseline": max(baseline, 0.0)}
    if model == "exponential":
        guess["gamma"] = gamma_tail
    else:
        guess["gamma_x"] = gamma_tail
        guess["gamma_xx"] = fixed.get("gamma_xx", 4.0 * gamma_tail)
    guess["amplitude"] = 1.0
    probe = dict(guess)
    probe.update(fixed)
    unit = evaluate_model(model, t, probe, hist.irf_fwhm)
    scale = float(np.max(unit - guess["baseline"]))
    guess["amplitude"] = height / max(scale, 1e-300)
    return guess


def _perturb(guess, names, rng, hist):
    out = dict(guess)
    for name in names:
        if name.startswith("gamma") or name == "amplitude":
            out[name] = guess[name] * math.exp(rng.normal(0.0, 0.405))
        elif name == "t0":
            out[name] = guess[name] + rng.normal(0.0, max(hist.irf_fwhm,
                                                          hist.bin_width))
        elif name == "baseline":
            out[name] = abs(guess[name] * math.exp(rng.normal(0.0, 0.7))
                            + rng.normal(0.0, 1.0))
    return out


def fit(hist, model, initial_guess=None, fixed=None, n_starts=16, seed=0):
    """Weighted least-squares fit of a decay model to a histogram.

    Minimizes sum((model - counts)^2 / max(counts, 1)) with a trust-region
    optimizer, multi-started from the heuristic initialization plus random
    perturbations (about +-50% on scale parameters).

    Parameters
    ----------
    hist : DecayHistogram
    model : {"exponential", "cascade"}
    initial_guess : dict, optional
        Overrides for individual starting values.
    fixed : dict, optional
        Parameters pinned to given values (e.g. gamma_xx from a companion
        fit when fitting X-photon data).
    n_starts : int
        Multi-start budget.
    seed : int
        Seed for the start perturbations; fits are deterministic.

    Raises
    ------
    FitError
        If no start converges.
    """
    if model not in _MODEL_PARAMS:
        raise ParameterError(f"unknown model {model!r}")
    fixed = dict(fixed) if fixed else {}
    names = [n for n in _MODEL_PARAMS[model] if n not in fixed]
    if not names:
        raise ParameterError("all parameters are fixed; nothing to fit")

    t = hist.bin_centers
    counts = hist.counts.astype(float)
    if np.count_nonzero(counts > max(counts.min(), 0.0)) < 10:
        raise ParameterError("need at least 10 bins above baseline to fit")
    sqw = 1.0 / np.sqrt(np.maximum(counts, 1.0))

    guess = _initial_guess(hist, model, fixed)
    if initial_guess:
        guess.update(initial_guess)
    guess.update(fixed)

    lower = []
    upper = []
    for name in names:
        if name.startswith("gamma"):
            lower.append(1e-8)
            upper.append(10.0)
        elif name == "amplitude":
            lower.append(0.0)
            upper.append(np.inf)
        elif name == "t0":
            span = t[-1] - t[0]
            lower.append(t[0] - 0.5 * span)
            upper.append(t[-1])
        else:  # baseline
            lower.append(0.0)
            upper.append(np.inf)

    def residuals(x):
        params = dict(zip(names, x))
        params.update(fixed)
        return (evaluate_model(model, t, params, hist.irf_fwhm) - counts) * sqw

    best = None
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed))
    for start in range(n_starts):
        p = guess if start == 0 else _perturb(guess, names, rng, hist)
        x0 = np.clip([p[n] for n in names], lower, upper)
        try:
            res = least_squares(
                residuals, x0, bounds=(lower, upper),
                x_scale=np.maximum(np.abs(x0), 1e-8), method="trf",
            )
        except (ValueError, FloatingPointError):
            continue
        if not res.success or not np.all(np.isfinite(res.x)):
            continue
        chi2 = float(2.0 * res.cost)
        if best is None or chi2 < best[0]:
            best = (chi2, dict(zip(names, map(float, res.x))))

    if best is None:
        raise FitError(
            f"{model} fit failed to converge in {n_starts} starts "
            f"(n_points={len(t)}, peak={counts.max():g})"
        )
    chi2, fitted = best
    params = dict(fitted)
    params.update(fixed)

    ill = False
    if model == "cascade":
        g1, g2 = params["gamma_xx"], params["gamma_x"]
        if abs(g1 - g2) / max(g1, g2) < 0.10:
            ill = True
            warnings.warn(
                "cascade rates within 10% of each other; the fit is "
                "ill-conditioned (rates are nearly interchangeable)",
                stacklevel=2,
            )

    return FitResult(
        model=model,
        params=params,
        fixed=fixed,
        residual_chi2=chi2,
        n_points=len(t),
        ill_conditioned=ill,
    )


def bootstrap(hist, model, n_resamples=200, seed=0, base_result=None,
              fixed=None, max_failure_fraction=0.2):
    """Parametric-bootstrap standard deviations of the fitted parameters.

    Bin counts are resampled as Poisson around the fitted curve and refitted
    (warm-started at the base fit).  Deterministic for a fixed seed; each
    resample uses an independently derived substream.

    Returns
    -------
    dict
        Per-parameter standard deviations over the successful refits.

    Raises
    ------
    BootstrapError
        If more than ``max_failure_fraction`` of the refits fail.
    """
    if n_resamples < 2:
        raise ParameterError("n_resamples must be >= 2")
    if base_result is None:
        base_result = fit(hist, model, fixed=fixed, seed=seed)
    fixed = base_result.fixed
    curve = np.maximum(
        evaluate_model(model, hist.bin_centers, base_result.params,
                       hist.irf_fwhm),
        0.0,
    )
    free = [n for n in _MODEL_PARAMS[model] if n not in fixed]
    samples = []
    failures = 0
    for k in range(n_resamples):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(k,))
        )
        fake = DecayHistogram(
            bin_centers=hist.bin_centers,
            counts=rng.poisson(curve),
            irf_fwhm=hist.irf_fwhm,
        )
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                res = fit(fake, model, initial_guess=base_result.params,
                          fixed=fixed, n_starts=4, seed=k + 1)
        except (FitError, ParameterError):
            failures += 1
            continue
        samples.append([res.params[n] for n in free])
    if failures > max_failure_fraction * n_resamples:
        raise BootstrapError(
            f"{failures}/{n_resamples} bootstrap refits failed"
        )
    stds = np.std(np.asarray(samples), axis=0, ddof=1)
    return dict(zip(free, map(float, stds)))


def fit_with_bootstrap(hist, model, n_resamples=200, seed=0, **fit_kwargs):
    """Convenience wrapper: fit, then attach bootstrap errors."""
    result = fit(hist, model, seed=seed, **fit_kwargs)
    errors = bootstrap(hist, model, n_resamples=n_resamples, seed=seed,
                       base_result=result)
    return replace(result, errors=errors, n_bootstrap=n_resamples)


@dataclass(frozen=True)
class PurcellReport:
    """Enhanced-to-bare rate ratio and the inferred channel factor."""

    purcell_factor: float
    purcell_factor_error: float
    channel_f: float
    channel_f_error: float
    channels: str


def purcell_report(enhanced, bare, channels="one"):
    """Purcell factor from an enhanced and a bare fit of the same species.

    F_P = gamma_enhanced / gamma_bare.  For a species with two decay
    channels of which the cavity enhances one, the single-channel factor is
    f = 2 F_P - 1; for one channel f = F_P.  Bootstrap errors propagate in
    quadrature.

    Parameters
    ----------
    enhanced, bare : FitResult
    channels : {"one", "two"}
        Number of decay channels of the fitted species.
    """
    if channels not in ("one", "two"):
        raise ParameterError("channels must be 'one' or 'two'")
    g_e, g_b = enhanced.species_rate(), bare.species_rate()
    fp = g_e / g_b
    rel = math.hypot(
        enhanced.species_rate_error() / g_e,
        bare.species_rate_error() / g_b,
    )
    fp_err = fp * rel
    if channels == "two":
        f = 2.0 * fp - 1.0
        f_err = 2.0 * fp_err
    else:
        f = fp
        f_err = fp_err
    return PurcellReport(
        purcell_factor=fp,
        purcell_factor_error=fp_err,
        channel_f=f,
        channel_f_error=f_err,
        channels=channels,
    )
