"""Pulsed-excitation Monte Carlo for lifetime, HBT, and HOM experiments.

Each excitation pulse prepares the biexciton with some probability; the
emission times of the XX and X photons are sampled from the cascade rate
model and the collected photon species is routed through the optical layout
of the selected mode:

``lifetime``
    direct detection on channel 0.
``hbt``
    the collected stream hits one input of the R:T fiber beam splitter;
    clicks land on channels 0/1.
``hom``
    an unbalanced interferometer whose long arm delays by one pulse period
    (or an integer multiple).  A photon that takes the long arm meets the
    next pulse's photon in the short arm at the beam splitter; the pair's
    click statistics follow from the overlap of the two conditional
    single-photon wavepackets.

Detector imperfections are a Gaussian timing jitter, uncorrelated leakage
clicks at the pulse times, a flat ambient background, and an optional
reflection echo.  Timestamps are integer picoseconds.

Reproducibility: pulses are simulated in fixed blocks of ``BLOCK_SIZE``,
each with its own generator derived from (seed, block index) and a fixed
draw order, so output is byte-identical however the blocks are distributed
over workers.
"""

from __future__ import annotations

import hashlib
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import CascadeConfig, effective_rates
from .errors import ConfigError, ParameterError
from .streams import TimeTagStream

#: Pulses per simulation block.  Part of the reproducibility contract: the
#: same seed produces the same stream only for the same block size.
BLOCK_SIZE = 4096

#: FWHM of a Gaussian divided by its standard deviation.
GAUSSIAN_FWHM = 2.0 * math.sqrt(2.0 * math.log(2.0))

MODES = ("lifetime", "hbt", "hom")


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one simulated experiment.

    Rates and times in 1/ps and ps.  ``leakage_prob`` is the mean number of
    laser-leakage clicks per pulse (Poisson), ``ambient_rate`` the flat
    background click rate summed over detectors.
    """

    cascade: CascadeConfig
    n_pulses: int
    collected: str = "x"
    pulse_period: float = 13100.0
    prep_probability: float = 1.0
    collection_efficiency: float = 1.0
    leakage_prob: float = 0.0
    ambient_rate: float = 0.0
    irf_fwhm: float = 43.0
    bs_reflectance: float = 0.525
    bs_transmittance: float = 0.475
    classical_visibility: float = 0.985
    polarization: str = "co"
    delay_arm: float | None = None
    echo_prob: float = 0.0
    echo_delay: float = 6000.0
    seed: int = 0

    def __post_init__(self):
        if self.n_pulses < 1:
            raise ConfigError("n_pulses must be >= 1")
        if self.collected not in ("xx", "x"):
            raise ConfigError("collected must be 'xx' or 'x'")
        if self.polarization not in ("co", "cross"):
            raise ConfigError("polarization must be 'co' or 'cross'")
        if self.pulse_period <= 0.0:
            raise ConfigError("pulse_period must be > 0")
        for name in ("prep_probability", "collection_efficiency",
                     "classical_visibility", "echo_prob"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise ConfigError(f"{name} must be in [0, 1]")
        if self.leakage_prob < 0.0:
            raise ConfigError("leakage_prob must be >= 0")
        if self.ambient_rate < 0.0:
            raise ConfigError("ambient_rate must be >= 0")
        if self.irf_fwhm < 0.0:
            raise ConfigError("irf_fwhm must be >= 0")
        if abs(self.bs_reflectance + self.bs_transmittance - 1.0) > 1e-9:
            raise ConfigError("bs_reflectance + bs_transmittance must equal 1")
        if not (0.0 < self.bs_reflectance < 1.0):
            raise ConfigError("bs_reflectance must be in (0, 1)")
        if not (0 <= self.seed < 2**64):
            raise ConfigError("seed must be a 64-bit unsigned integer")
        rates = effective_rates(self.cascade)
        tau_max = max(rates.tau_xx, rates.tau_x)
        if self.pulse_period < 10.0 * tau_max:
            warnings.warn(
                f"pulse_period = {self.pulse_period:g} ps is less than ten "
                f"times the longest lifetime ({tau_max:g} ps); emission from "
                "adjacent pulses will overlap",
                stacklevel=2,
            )
        # timestamps must stay well inside the int64 range
        t_end = (self.n_pulses + 2) * self.pulse_period + 100.0 * tau_max
        if t_end >= 2.0**62:
            raise ConfigError("n_pulses * pulse_period overflows the timestamp range")

    @property
    def arm_delay(self):
        return self.pulse_period if self.delay_arm is None else self.delay_arm

    def rates(self):
        return effective_rates(self.cascade)

    def digest(self):
        """Stable hex digest of the physical configuration (seed excluded)."""
        items = []
        for name, value in sorted(vars(self).items()):
            if name == "seed":
                continue
            if isinstance(value, CascadeConfig):
                value = tuple(sorted(vars(value).items()))
            items.append(f"{name}={value!r}")
        text = ";".join(items)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def header(self, mode):
        rates = self.rates()
        return {
            "digest": self.digest(),
            "seed": str(self.seed),
            "mode": mode,
            "n_pulses": str(self.n_pulses),
            "pulse_period_ps": repr(self.pulse_period),
            "collected": self.collected,
            "polarization": self.polarization,
            "prep_probability": repr(self.prep_probability),
            "collection_efficiency": repr(self.collection_efficiency),
            "leakage_prob": repr(self.leakage_prob),
            "ambient_rate_per_ps": repr(self.ambient_rate),
            "irf_fwhm_ps": repr(self.irf_fwhm),
            "bs_reflectance": repr(self.bs_reflectance),
            "bs_transmittance": repr(self.bs_transmittance),
            "classical_visibility": repr(self.classical_visibility),
            "delay_arm_ps": repr(self.arm_delay),
            "tau_xx_ps": repr(rates.tau_xx),
            "tau_x_ps": repr(rates.tau_x),
            "lifetime_ratio": repr(rates.ratio),
        }


@dataclass(frozen=True)
class EmissionEvent:
    """One cascade emission: both photon times relative to the pulse."""

    pulse_index: int
    t_xx: float
    t_x: float

    def __post_init__(self):
        if not (0.0 <= self.t_xx <= self.t_x):
            raise ParameterError("emission times must satisfy 0 <= t_xx <= t_x")


@dataclass(frozen=True)
class HomOutcome:
    """Result of one two-photon beam-splitter event.

    ``kind`` is "coincidence" (one photon per output port) or "bunched"
    (both photons in the same port); ``ports`` gives the detector index for
    the (long-arm, short-arm) photon respectively.
    """

    kind: str
    ports: tuple


def sample_cascade(rng, rates, pulse_index=0):
    """Draw one cascade emission: t_xx ~ Exp(gamma_XX), then
    t_x = t_xx + Exp(gamma_X).

    Deterministic for a given generator state.
    """
    t_xx = rng.standard_exponential() * rates.tau_xx
    t_x = t_xx + rng.standard_exponential() * rates.tau_x
    return EmissionEvent(pulse_index, float(t_xx), float(t_x))


def sample_cascades(rng, rates, n):
    """Vectorized :func:`sample_cascade`; returns (t_xx, t_x) arrays."""
    t_xx = rng.standard_exponential(n) * rates.tau_xx
    t_x = t_xx + rng.standard_exponential(n) * rates.tau_x
    return t_xx, t_x


def _truncated_exp_norm(s, d):
    """integral_0^s exp(-d t) dt, stable for d of any sign including 0."""
    s = np.asarray(s, dtype=float)
    if d == 0.0:
        return s.copy()
    return -np.expm1(-d * s) / d


def overlap_x(delta_t_xx, gamma_x):
    """|<a|b>| of two X wavepackets whose start times differ by delta_t_xx.

    Conditioned on the XX emission time, the X photon is a one-sided
    exponential wavepacket of rate gamma_X; two such packets offset by dt
    overlap by exp(-gamma_X |dt| / 2).
    """
    return np.exp(-0.5 * gamma_x * np.abs(np.asarray(delta_t_xx, dtype=float)))


def overlap_xx(s_a, s_b, rates):
    """|<a|b>| of two XX wavepackets conditioned on partner times s_a, s_b.

    Conditioned on its partner's emission at s, the XX wavepacket is
    proportional to exp(-gamma_XX t/2) exp(-gamma_X (s-t)/2) on [0, s].  The
    inner product of two such truncated exponentials reduces to

        I(min(s_a, s_b)) / sqrt(I(s_a) I(s_b)),   I(s) = (1 - e^(-d s)) / d

    with d = gamma_XX - gamma_X (I(s) -> s as d -> 0).
    """
    s_a = np.asarray(s_a, dtype=float)
    s_b = np.asarray(s_b, dtype=float)
    d = rates.gamma_xx - rates.gamma_x
    num = _truncated_exp_norm(np.minimum(s_a, s_b), d)
    den = _truncated_exp_norm(s_a, d) * _truncated_exp_norm(s_b, d)
    return num / np.sqrt(den)


def conditional_overlap(photon, event_a, event_b, rates):
    """Overlap magnitude of two collected single-photon wavepackets.

    Parameters
    ----------
    photon : {"xx", "x"}
        Collected species.  X packets are conditioned on their start times
        (the partner XX emissions); XX packets on their partner X times.
    event_a, event_b : EmissionEvent
        Must come from the same rate configuration.
    """
    if photon == "x":
        return float(overlap_x(event_a.t_xx - event_b.t_xx, rates.gamma_x))
    if photon == "xx":
        return float(overlap_xx(event_a.t_x, event_b.t_x, rates))
    raise ParameterError("photon must be 'xx' or 'x'")


def coincidence_probability(overlap_mag, config):
    """Cross-port coincidence probability for one interfering pair.

    Co-polarized: R^2 + T^2 - 2 R T (classical_visibility^2) |O|^2.
    Cross-polarized: R^2 + T^2 (interference switched off).
    """
    o = np.asarray(overlap_mag, dtype=float)
    if np.any(o < 0.0) or np.any(o > 1.0 + 1e-12):
        raise ParameterError("overlap magnitude must be in [0, 1]")
    r, t = config.bs_reflectance, config.bs_transmittance
    base = r * r + t * t
    if config.polarization == "cross":
        return base if o.ndim else float(base)
    out = base - 2.0 * r * t * config.classical_visibility**2 * o**2
    return out if o.ndim else float(out)


def hom_click(rng, overlap_mag, config):
    """Sample the port outcome of one two-photon beam-splitter event.

    Returns a :class:`HomOutcome`.  Coincidence orientation and the bunched
    port are each equiprobable; the caller attaches timestamps (drawn from
    the photons' conditional wavepacket intensities, offset by arm delay and
    pulse index, then jittered).
    """
    p_c = coincidence_probability(overlap_mag, config)
    if rng.random() < p_c:
        ports = (0, 1) if rng.random() < 0.5 else (1, 0)
        return HomOutcome("coincidence", ports)
    port = 0 if rng.random() < 0.5 else 1
    return HomOutcome("bunched", (port, port))


def hbt_expected_g2(detection_prob, leakage_prob):
    """Closed-form g2(0) of an HBT run with one emitter plus Poisson leakage.

    With at most one collected photon per pulse (probability q) and a
    Poisson number of distinguishable leakage clicks (mean l), the
    central-to-side peak ratio is (2 q l + l^2) / (q + l)^2.
    """
    q, leak = detection_prob, leakage_prob
    return (2.0 * q * leak + leak * leak) / (q + leak) ** 2


def leakage_for_target_g2(g2_target, detection_prob):
    """Leakage level per pulse giving :func:`hbt_expected_g2` = g2_target.

    Inverts the closed form: l = q (1/sqrt(1 - g2) - 1).
    """
    if not (0.0 <= g2_target < 1.0):
        raise ParameterError("g2_target must be in [0, 1)")
    return detection_prob * (1.0 / math.sqrt(1.0 - g2_target) - 1.0)


# ---------------------------------------------------------------------------
# block machinery

def _block_rng(seed, block):
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(block,)))
    )


@dataclass
class _EmissionRows:
    """Per-pulse draws visible to neighboring blocks (fixed draw order)."""

    present: np.ndarray     # photon prepared, collected
    is_long: np.ndarray     # long-arm flag (HOM) / port draw (HBT)
    u_path: np.ndarray      # raw path uniform
    t_xx: np.ndarray        # XX emission time, ps after the pulse
    t_x: np.ndarray         # X emission time
    n_jit: np.ndarray       # unit-normal jitter draw
    u_echo: np.ndarray
    u_echo_ch: np.ndarray
    n_echo_jit: np.ndarray


def _draw_emission_rows(rng, size, config, rates):
    """First, fixed part of a block's draw sequence.

    The order of these calls is part of the reproducibility contract; the
    owner block continues drawing from the same generator afterwards.
    """
    u_prep = rng.random(size)
    t_xx = rng.standard_exponential(size) * rates.tau_xx
    t_x = t_xx + rng.standard_exponential(size) * rates.tau_x
    u_collect = rng.random(size)
    u_path = rng.random(size)
    n_jit = rng.standard_normal(size)
    u_echo = rng.random(size)
    u_echo_ch = rng.random(size)
    n_echo_jit = rng.standard_normal(size)
    present = (u_prep < config.prep_probability) & (
        u_collect < config.collection_efficiency
    )
    return _EmissionRows(
        present=present,
        is_long=u_path < 0.5,
        u_path=u_path,
        t_xx=t_xx,
        t_x=t_x,
        n_jit=n_jit,
        u_echo=u_echo,
        u_echo_ch=u_echo_ch,
        n_echo_jit=n_echo_jit,
    )


def _block_bounds(block, n_pulses):
    lo = block * BLOCK_SIZE
    return lo, min(lo + BLOCK_SIZE, n_pulses)


def _emission_rows_for(block, config, rates):
    """Regenerate the neighbor-visible rows of an arbitrary block."""
    lo, hi = _block_bounds(block, config.n_pulses)
    return _draw_emission_rows(_block_rng(config.seed, block), hi - lo, config, rates)


class _RowWindow:
    """Emission rows over an extended global index range, stitched from up
    to three blocks.  Indices outside [0, n_pulses) read as absent."""

    def __init__(self, block, config, rates, own_rows, margin):
        lo, hi = _block_bounds(block, config.n_pulses)
        self.lo = max(lo - margin, 0)
        self.hi = min(hi + margin, config.n_pulses)
        parts = []
        base = lo
        if self.lo < lo:
            parts.append(_emission_rows_for(block - 1, config, rates))
            base = _block_bounds(block - 1, config.n_pulses)[0]
        parts.append(own_rows)
        if self.hi > hi:
            parts.append(_emission_rows_for(block + 1, config, rates))
        skip = self.lo - base  # unused head of the previous block
        self.rows = _EmissionRows(
            **{name: np.concatenate([getattr(p, name) for p in parts])[skip:]
               for name in _EmissionRows.__dataclass_fields__}
        )

    def slice(self, g_lo, g_hi):
        """View of each row for global indices [g_lo, g_hi)."""
        i0, i1 = g_lo - self.lo, g_hi - self.lo
        return _EmissionRows(
            **{k: getattr(self.rows, k)[i0:i1]
               for k in _EmissionRows.__dataclass_fields__}
        )


def _append_clicks(buf, channels, times):
    if len(times):
        buf.append((np.asarray(channels, dtype=np.uint8),
                    np.asarray(times, dtype=np.float64)))


def _simulate_block(block, config, mode, rates):
    """Clicks owned by one block, as (channels uint8, times float ps)."""
    lo, hi = _block_bounds(block, config.n_pulses)
    size = hi - lo
    rng = _block_rng(config.seed, block)
    own = _draw_emission_rows(rng, size, config, rates)
    # owner-only fixed rows
    u_hom = rng.random(size)
    u_out2 = rng.random(size)
    n_leak = rng.poisson(config.leakage_prob, size) if config.leakage_prob > 0 \
        else np.zeros(size, dtype=np.int64)

    period = config.pulse_period
    sigma = config.irf_fwhm / GAUSSIAN_FWHM
    r_refl = config.bs_reflectance
    t_emission = own.t_xx if config.collected == "xx" else own.t_x
    pulse_t = (lo + np.arange(size)) * period

    buf = []
    echo_src = []  # (channel, time, pulse-local index) candidates for echoes

    if mode == "lifetime":
        det = own.present
        times = pulse_t[det] + t_emission[det] + sigma * own.n_jit[det]
        _append_clicks(buf, np.zeros(det.sum(), dtype=np.uint8), times)
        echo_src.append((np.zeros(det.sum(), dtype=np.uint8), times,
                         np.flatnonzero(det)))
    elif mode == "hbt":
        det = own.present
        ch = (own.u_path[det] >= r_refl).astype(np.uint8)
        times = pulse_t[det] + t_emission[det] + sigma * own.n_jit[det]
        _append_clicks(buf, ch, times)
        echo_src.append((ch, times, np.flatnonzero(det)))
    elif mode == "hom":
        k = config.arm_delay / period
        if abs(k - round(k)) > 1e-9 or not (1 <= round(k) <= BLOCK_SIZE):
            raise ConfigError(
                "delay_arm must be a positive integer multiple of "
                f"pulse_period, at most {BLOCK_SIZE} periods"
            )
        k = int(round(k))
        win = _RowWindow(block, config, rates, own, margin=k)

        # pair (i, i+k) interferes when photon i went long and photon i+k short
        pot_lo = max(lo - k, 0)
        nbr = win.slice(pot_lo, min(hi + k, config.n_pulses))

        g_own = lo + np.arange(size)

        # pair ownership: long photon i in this block
        partner = g_own + k
        valid_partner = partner < config.n_pulses
        i_idx = g_own - pot_lo
        p_idx = np.minimum(partner, config.n_pulses - 1) - pot_lo
        pair_mask = (
            own.present
            & own.is_long
            & valid_partner
            & nbr.present[p_idx]
            & ~nbr.is_long[p_idx]
        )

        # shorts consumed by a pair starting k pulses earlier (their clicks
        # are owned by the pair's block, possibly block - 1)
        prev = g_own - k
        has_prev = prev >= 0
        q_idx = np.maximum(prev, 0) - pot_lo
        short_taken = (
            has_prev
            & own.present
            & ~own.is_long
            & nbr.present[q_idx]
            & nbr.is_long[q_idx]
        )

        # --- interfering pairs owned by this block
        pm = np.flatnonzero(pair_mask)
        if len(pm):
            ii = i_idx[pm]
            pp = p_idx[pm]
            if config.collected == "x":
                o = overlap_x(nbr.t_xx[ii] - nbr.t_xx[pp], rates.gamma_x)
            else:
                o = overlap_xx(nbr.t_x[ii], nbr.t_x[pp], rates)
            p_c = coincidence_probability(o, config)
            coin = u_hom[pm] < p_c
            flip = u_out2[pm] < 0.5
            ch_long = np.where(flip, 0, 1)
            ch_short = np.where(coin, 1 - ch_long, ch_long)
            t_long = (
                (g_own[pm]) * period
                + (nbr.t_xx[ii] if config.collected == "xx" else nbr.t_x[ii])
                + config.arm_delay
                + sigma * nbr.n_jit[ii]
            )
            t_short = (
                (g_own[pm] + k) * period
                + (nbr.t_xx[pp] if config.collected == "xx" else nbr.t_x[pp])
                + sigma * nbr.n_jit[pp]
            )
            _append_clicks(buf, ch_long.astype(np.uint8), t_long)
            _append_clicks(buf, ch_short.astype(np.uint8), t_short)
            echo_src.append((ch_long.astype(np.uint8), t_long, pm))
            # the short photon's echo draw belongs to its own pulse; use the
            # neighbor rows directly
            esel = nbr.u_echo[pp] < config.echo_prob
            if config.echo_prob > 0.0 and esel.any():
                e_t = (t_short + config.echo_delay
                       + sigma * nbr.n_echo_jit[pp])[esel]
                e_ch = (nbr.u_echo_ch[pp][esel] >= 0.5).astype(np.uint8)
                _append_clicks(buf, e_ch, e_t)

        # --- singles: present, in no pair
        single = own.present & ~pair_mask & ~short_taken
        sm = np.flatnonzero(single)
        if len(sm):
            is_long = own.is_long[sm]
            # long arm enters the other splitter input: reaches channel 0
            # with probability T, the short arm with probability R
            thresh = np.where(is_long, config.bs_transmittance, r_refl)
            ch = (u_out2[sm] >= thresh).astype(np.uint8)
            times = (
                (lo + sm) * period
                + t_emission[sm]
                + np.where(is_long, config.arm_delay, 0.0)
                + sigma * own.n_jit[sm]
            )
            _append_clicks(buf, ch, times)
            echo_src.append((ch, times, sm))
    else:
        raise ParameterError(f"unknown mode {mode!r}")

    # --- leakage clicks: distinguishable photons at the pulse times
    total_leak = int(n_leak.sum())
    if total_leak:
        u_leak_path = rng.random(total_leak)
        u_leak_ch = rng.random(total_leak)
        n_leak_jit = rng.standard_normal(total_leak)
        leak_pulse = np.repeat(np.arange(size), n_leak)
        times = (lo + leak_pulse) * period + sigma * n_leak_jit
        if mode == "lifetime":
            ch = np.zeros(total_leak, dtype=np.uint8)
        elif mode == "hbt":
            ch = (u_leak_ch >= r_refl).astype(np.uint8)
        else:
            long_arm = u_leak_path < 0.5
            times = times + np.where(long_arm, config.arm_delay, 0.0)
            thresh = np.where(long_arm, config.bs_transmittance, r_refl)
            ch = (u_leak_ch >= thresh).astype(np.uint8)
        _append_clicks(buf, ch, times)

    # --- reflection echoes of signal clicks
    if config.echo_prob > 0.0:
        for ch, times, idx in echo_src:
            sel = own.u_echo[idx] < config.echo_prob
            if sel.any():
                e_t = times[sel] + config.echo_delay + sigma * own.n_echo_jit[idx][sel]
                e_ch = (own.u_echo_ch[idx][sel] >= 0.5).astype(np.uint8)
                if mode == "lifetime":
                    e_ch = np.zeros(sel.sum(), dtype=np.uint8)
                _append_clicks(buf, e_ch, e_t)

    # --- ambient background over this block's time span (drawn last)
    if config.ambient_rate > 0.0:
        span = size * period
        n_amb = rng.poisson(config.ambient_rate * span)
        if n_amb:
            times = lo * period + rng.random(n_amb) * span
            if mode == "lifetime":
                ch = np.zeros(n_amb, dtype=np.uint8)
            else:
                ch = (rng.random(n_amb) < 0.5).astype(np.uint8)
            _append_clicks(buf, ch, times)

    if not buf:
        return (np.empty(0, dtype=np.uint8), np.empty(0, dtype=np.float64))
    channels = np.concatenate([c for c, _ in buf])
    times = np.concatenate([t for _, t in buf])
    return channels, times


def _simulate_range(args):
    config, mode, b_lo, b_hi = args
    rates = config.rates()
    parts = [_simulate_block(b, config, mode, rates) for b in range(b_lo, b_hi)]
    channels = np.concatenate([p[0] for p in parts])
    times = np.concatenate([p[1] for p in parts])
    return channels, times


def simulate(config, mode, workers=1):
    """Run a pulsed experiment and return the sorted time-tag stream.

    Parameters
    ----------
    config : ExperimentConfig
    mode : {"lifetime", "hbt", "hom"}
    workers : int
        Number of processes over which to distribute the simulation blocks.
        The output is byte-identical for any worker count.

    Returns
    -------
    TimeTagStream
    """
    if mode not in MODES:
        raise ParameterError(f"mode must be one of {MODES}")
    n_blocks = (config.n_pulses + BLOCK_SIZE - 1) // BLOCK_SIZE
    if workers > 1 and n_blocks > 1:
        edges = np.linspace(0, n_blocks, min(workers, n_blocks) + 1).astype(int)
        jobs = [(config, mode, int(a), int(b))
                for a, b in zip(edges[:-1], edges[1:]) if b > a]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_simulate_range, jobs))
    else:
        parts = [_simulate_range((config, mode, 0, n_blocks))]

    channels = np.concatenate([p[0] for p in parts])
    times = np.concatenate([p[1] for p in parts])
    stamps = np.rint(times).astype(np.int64)
    order = np.lexsort((channels, stamps))
    return TimeTagStream(
        channels=channels[order],
        timestamps=stamps[order],
        header=config.header(mode),
    )
