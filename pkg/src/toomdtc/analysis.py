"""Ensemble statistics: decay fits, histograms, Binder cumulants, collapse.

All fitting helpers are pure functions over arrays; the autocorrelator is
the one routine here that drives the Clifford engine itself, since its
sampling protocol (steady-state preparation, projective probe, delayed
readout) is part of the measurement definition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize, stats

from .protocol import FloquetRunner, ProtocolParams
from .seeding import spawn_rng
from .stabilizer import PauliString


# ---------------------------------------------------------------------------
# decay and lifetime scaling
# ---------------------------------------------------------------------------

@dataclass
class DecayFit:
    tau: float          # decay time in periods; inf when unresolvable
    amplitude: float
    window: tuple[int, int]
    residual: float
    tau_stderr: float = np.nan
    resolvable: bool = True


def fit_decay(times, values, stderr=None, window=None) -> DecayFit:
    """Fit A * exp(-t / tau) to even-time mean magnetization data.

    Uses a log-linear least-squares fit when all windowed values are
    positive, refined by nonlinear least squares.  Data buried in noise
    (all values below 3x their standard error) yields an explicit
    unresolvable result instead of a number.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if window is None:
        window = (10, times.max())
    lo, hi = window
    m = (times >= lo) & (times <= hi)
    t, v = times[m], values[m]
    if t.size < 8:
        raise ValueError(f"need >= 8 points in window, got {t.size}")
    if np.any(np.abs(v) > 1.0 + 1e-9):
        raise ValueError("magnetization values must lie in [-1, 1]")
    if stderr is not None:
        se = np.asarray(stderr, dtype=float)[m]
        if np.all(np.abs(v) < 3 * se):
            return DecayFit(np.inf, float(np.mean(v)), (lo, hi),
                            float(np.mean(v ** 2)), resolvable=False)
    # constant model beats any finite-tau exponential -> unresolvable/inf
    if np.all(v > 0):
        slope, intercept = np.polyfit(t, np.log(v), 1)
        if slope >= 0:
            const_res = float(np.mean((v - v.mean()) ** 2))
            return DecayFit(np.inf, float(v.mean()), (lo, hi), const_res,
                            resolvable=False)
        tau0, a0 = -1.0 / slope, float(np.exp(intercept))
    else:
        tau0, a0 = max(t.max(), 1.0), float(np.abs(v).max())

    def model(t, a, tau):
        return a * np.exp(-t / tau)

    try:
        popt, pcov = optimize.curve_fit(
            model, t, v, p0=(a0, tau0), maxfev=10000,
            sigma=None if stderr is None else np.maximum(se, 1e-12),
        )
    except RuntimeError:
        return DecayFit(np.inf, a0, (lo, hi), np.inf, resolvable=False)
    a, tau = popt
    if tau <= 0:
        return DecayFit(np.inf, float(a), (lo, hi), np.inf, resolvable=False)
    res = float(np.mean((v - model(t, *popt)) ** 2))
    tau_se = float(np.sqrt(pcov[1, 1])) if np.all(np.isfinite(pcov)) else np.nan
    return DecayFit(float(tau), float(a), (lo, hi), res, tau_se)


@dataclass
class ScalingFit:
    xi: float           # tau ~ exp(L / xi)
    r_squared: float
    slope: float
    intercept: float
    exponential: bool   # False when the slope is non-positive


def fit_xi(taus) -> ScalingFit:
    """Linear regression of log tau on L; taus is a list of (L, tau)."""
    pts = [(L, tau) for L, tau in taus if np.isfinite(tau) and tau > 0]
    if len(pts) < 3:
        raise ValueError("need >= 3 sizes with resolvable tau")
    L = np.array([p[0] for p in pts], dtype=float)
    logtau = np.log([p[1] for p in pts])
    res = stats.linregress(L, logtau)
    if res.slope <= 0:
        return ScalingFit(np.inf, res.rvalue ** 2, res.slope, res.intercept, False)
    return ScalingFit(1.0 / res.slope, res.rvalue ** 2, res.slope,
                      res.intercept, True)


# ---------------------------------------------------------------------------
# autocorrelator
# ---------------------------------------------------------------------------

def autocorrelator(params: ProtocolParams, j: int, j_prime: int, t: int,
                   reps: int, seed: int, burn_in: int | None = None,
                   n_chains: int = 16, gap: int | None = None):
    """Estimate C_t(j, j') = <X_j(t) X_{j'}(0)> in the steady state.

    Protocol: prepare |0...0>, evolve burn_in periods, projectively measure
    X_{j'} (outcome m), evolve t periods, record m * <X_j>.  Sampling is
    split over independent chains; after each readout a chain evolves a
    decorrelation gap before the next probe.  Returns (estimate, stderr).
    """
    lat = params.lattice
    if burn_in is None:
        burn_in = 5 * max(lat.n_rows, lat.n_cols)
    if gap is None:
        gap = max(4, 2 * t)
    n_chains = min(n_chains, reps)
    per_chain = -(-reps // n_chains)
    probe = PauliString.x_string(lat.n_sites, [j_prime])
    runner = FloquetRunner(params)
    chain_means = []
    done = 0
    for chain in range(n_chains):
        rng = spawn_rng(seed, chain)
        state = runner.initial_state("all_zero", rng)
        for _ in range(burn_in):
            runner.step_pulse(state, rng)
            runner.step_correct(state, rng)
        samples = []
        todo = min(per_chain, reps - done)
        for _ in range(todo):
            m = state.measure_pauli(probe, rng).value
            for _ in range(t):
                runner.step_pulse(state, rng)
                runner.step_correct(state, rng)
            samples.append(m * state.expect_x(j))
            for _ in range(gap):
                runner.step_pulse(state, rng)
                runner.step_correct(state, rng)
        done += todo
        chain_means.append(np.mean(samples))
    chain_means = np.asarray(chain_means)
    est = float(chain_means.mean())
    se = float(chain_means.std(ddof=1) / np.sqrt(len(chain_means)))
    return est, se


# ---------------------------------------------------------------------------
# Binder cumulant and criticality
# ---------------------------------------------------------------------------

@dataclass
class BinderResult:
    u: float
    stderr: float
    defined: bool = True


def binder(samples) -> BinderResult:
    """U = (3 - <M^4>/<M^2>^2) / 2 with a jackknife standard error."""
    m = np.asarray(samples, dtype=float)
    if m.size < 2:
        raise ValueError("need >= 2 samples")
    m2, m4 = m ** 2, m ** 4
    s2, s4 = m2.sum(), m4.sum()
    if s2 == 0.0:
        return BinderResult(np.nan, np.nan, defined=False)
    n = m.size
    u_full = 0.5 * (3.0 - (s4 / n) / (s2 / n) ** 2)
    # leave-one-out estimates
    l2 = (s2 - m2) / (n - 1)
    l4 = (s4 - m4) / (n - 1)
    ok = l2 > 0
    u_jack = 0.5 * (3.0 - l4[ok] / l2[ok] ** 2)
    se = float(np.sqrt((n - 1) * np.mean((u_jack - u_jack.mean()) ** 2)))
    return BinderResult(float(u_full), se)


@dataclass
class CrossingResult:
    p_c: float
    spread: float
    pair_crossings: list


def binder_crossing(curves: dict) -> CrossingResult:
    """Pairwise crossing points of U(p) curves per system size.

    curves maps L -> (p_grid, U_values); all grids must be identical.
    Linear interpolation between the grid points bracketing each sign
    change of U_L - U_L'.  Raises when no pair brackets a crossing.
    """
    sizes = sorted(curves)
    if len(sizes) < 2:
        raise ValueError("need >= 2 sizes")
    grids = [np.asarray(curves[L][0], dtype=float) for L in sizes]
    for g in grids[1:]:
        if not np.array_equal(g, grids[0]):
            raise ValueError("curves must share a common grid")
    p = grids[0]
    crossings = []
    for i in range(len(sizes)):
        for k in range(i + 1, len(sizes)):
            d = np.asarray(curves[sizes[i]][1], float) - np.asarray(
                curves[sizes[k]][1], float)
            sign_change = np.nonzero(np.diff(np.sign(d)) != 0)[0]
            if sign_change.size == 0:
                continue
            a = sign_change[0]
            frac = d[a] / (d[a] - d[a + 1])
            crossings.append(((sizes[i], sizes[k]), p[a] + frac * (p[a + 1] - p[a])))
    if not crossings:
        raise ValueError("no pair of curves brackets a crossing")
    vals = np.array([c[1] for c in crossings])
    return CrossingResult(float(vals.mean()), float(vals.max() - vals.min()),
                          crossings)


def scaling_collapse(curves: dict, p_c: float, nu: float, beta: float = 0.0,
                     observable: str = "binder") -> float:
    """Quality of a finite-size-scaling collapse; lower is better.

    curves maps L -> (p_grid, values).  The abscissa is rescaled to
    (p - p_c) * L^(1/nu); for observable='rms' the ordinate is scaled by
    L^(beta/nu).  The master curve at each point is the piecewise-linear
    interpolation of the pooled points of the other curves; quality is the
    mean squared vertical deviation from it (points falling outside the
    other curves' range are skipped).  Identical rescaled curves score 0.
    """
    rescaled = []
    for L, (p, v) in curves.items():
        p = np.asarray(p, dtype=float)
        v = np.asarray(v, dtype=float)
        x = (p - p_c) * L ** (1.0 / nu)
        y = v * L ** (beta / nu) if observable == "rms" else v
        rescaled.append((x, y))
    total, count = 0.0, 0
    for i, (x, y) in enumerate(rescaled):
        ox = np.concatenate([rescaled[k][0] for k in range(len(rescaled))
                             if k != i])
        oy = np.concatenate([rescaled[k][1] for k in range(len(rescaled))
                             if k != i])
        order = np.argsort(ox, kind="stable")
        ox, oy = ox[order], oy[order]
        inside = (x >= ox[0]) & (x <= ox[-1])
        master = np.interp(x[inside], ox, oy)
        total += float(np.sum((y[inside] - master) ** 2))
        count += int(inside.sum())
    if count == 0:
        raise ValueError("rescaled curves do not overlap")
    return total / count


# ---------------------------------------------------------------------------
# histograms
# ---------------------------------------------------------------------------

@dataclass
class EnsembleStats:
    mean_m: np.ndarray
    mean_m2: np.ndarray
    mean_m4: np.ndarray
    stderr_m: np.ndarray
    samples: int
    hist_counts: np.ndarray | None = None
    hist_edges: np.ndarray | None = None


def ensemble_stats(mags: np.ndarray, bins: int = 40,
                   window: tuple[int, int] | None = None) -> EnsembleStats:
    """Moments per time plus the histogram of even-time sample M values."""
    n_traj, n_times = mags.shape
    mean = mags.mean(axis=0)
    se = mags.std(axis=0, ddof=1) / np.sqrt(n_traj)
    stats_ = EnsembleStats(
        mean, (mags ** 2).mean(axis=0), (mags ** 4).mean(axis=0), se, n_traj
    )
    counts, edges = histogram_even_m(mags, bins, window)
    stats_.hist_counts, stats_.hist_edges = counts, edges
    return stats_


def histogram_even_m(mags: np.ndarray, bins: int = 40,
                     window: tuple[int, int] | None = None):
    """Histogram of per-trajectory, per-even-time sample magnetization."""
    if bins < 8:
        raise ValueError("need >= 8 bins")
    n_times = mags.shape[1]
    lo, hi = window if window is not None else (0, n_times - 1)
    even_t = np.arange(lo + lo % 2, hi + 1, 2)
    vals = mags[:, even_t].ravel()
    return np.histogram(vals, bins=bins, range=(-1.0, 1.0))


def histogram_peaks(counts: np.ndarray, edges: np.ndarray):
    """Locations (bin centers) of strict local maxima of a histogram."""
    centers = 0.5 * (edges[:-1] + edges[1:])
    padded = np.concatenate([[-1.0], counts.astype(float), [-1.0]])
    peaks = [
        centers[i]
        for i in range(len(counts))
        if padded[i + 1] > padded[i] and padded[i + 1] >= padded[i + 2]
        and counts[i] > 0
    ]
    return peaks


def positive_peak_weight(mags: np.ndarray, t: int, half_window: int = 4) -> float:
    """Fraction of even-time samples near t with positive magnetization."""
    n_times = mags.shape[1]
    ts = [
        s for s in range(max(0, t - half_window), min(n_times, t + half_window + 1))
        if s % 2 == 0
    ]
    vals = mags[:, ts].ravel()
    return float(np.mean(vals > 0))
