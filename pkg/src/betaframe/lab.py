"""Monte Carlo distortion estimates, brute-force oracles, closed-form
probability bounds and the experiment drivers used by the CLI.

Every random draw comes from a stream keyed by ``(seed, *counters)`` through
``numpy.random.SeedSequence``; results do not depend on how work is split
across threads.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from . import linalg
from .duals import (
    TRUNCATE,
    BetaDualScheme,
    build_scheme,
    encode_many,
    error_bound,
    hsc_condensation_norm,
    optimal_params,
)
from .errors import BadEps, BadShape, RankDeficient, TooLarge
from .frames import gaussian_frame, hsc_frame
from .noise_shaping import Alphabet, alphabet_values

BRUTE_FORCE_LIMIT = 2_000_000
SAMPLE_MODES = ("sphere", "ball", "mixed")


def rng_for(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for the stream ``keys`` under master ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys)))


def derived_seed(seed: int, *keys: int) -> int:
    """A 64-bit integer seed for the stream ``keys``."""
    hi, lo = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys)).generate_state(2)
    return (int(hi) << 32) | int(lo)


def _pmap(fn, items, threads: int | None):
    items = list(items)
    if not threads or threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def sample_ball(k: int, n: int, seed: int, mode: str = "mixed") -> np.ndarray:
    """``n`` test points in the closed unit ball of ``R^k`` (rows).

    ``mixed`` returns the origin, then ``ceil((n-1)/2)`` sphere points, then
    uniform ball points.
    """
    if mode not in SAMPLE_MODES:
        raise ValueError(f"mode must be one of {SAMPLE_MODES}")
    rng = np.random.default_rng(seed)

    def sphere(count):
        g = rng.standard_normal((count, k))
        return g / np.linalg.norm(g, axis=1, keepdims=True)

    def ball(count):
        return sphere(count) * rng.random(count)[:, None] ** (1.0 / k)

    if mode == "sphere":
        return sphere(n)
    if mode == "ball":
        return ball(n)
    if n == 0:
        return np.zeros((0, k))
    n_sphere = n // 2  # ceil((n - 1) / 2)
    return np.vstack([np.zeros((1, k)), sphere(n_sphere), ball(n - 1 - n_sphere)])


# -- distortion ----------------------------------------------------------------


@dataclass(frozen=True)
class DistortionEstimate:
    sup_error: float
    mean_error: float
    n_samples: int
    n_skipped: int
    sampler: str
    seed: int


def pipeline_errors(scheme: BetaDualScheme, X: np.ndarray, unquantized: bool = False):
    """Per-point ``||x - F Q(E x)||_2`` and the admissibility mask."""
    Q, _, ok = encode_many(scheme, X)
    used = scheme.partition.used
    if unquantized:
        Q = scheme.frame.matrix[:used] @ X.T
    Xhat = scheme.dual.matrix[:, :used] @ Q
    return np.linalg.norm(X.T - Xhat, axis=0), ok


def mc_distortion(scheme: BetaDualScheme, n: int, seed: int, mode: str = "mixed", unquantized: bool = False) -> DistortionEstimate:
    """Monte Carlo estimate of the worst-case reconstruction error over the unit ball.

    Points whose measurements exceed ``mu`` are skipped and counted.  The
    estimate is a lower bound on the true supremum.
    """
    X = sample_ball(scheme.frame.k, n, seed, mode)
    err, ok = pipeline_errors(scheme, X, unquantized)
    err = err[ok]
    if err.size == 0:
        return DistortionEstimate(0.0, 0.0, 0, int(n), mode, int(seed))
    return DistortionEstimate(float(err.max()), float(err.mean()), int(err.size), int(n - err.size), mode, int(seed))


def synthesis_distortion_brute(F, alphabet: Alphabet, points) -> float:
    """``max_x min_{q in A^m} ||x - F q||_2`` by full enumeration of ``A^m``."""
    F = linalg.as_matrix(F, "F")
    k, m = F.shape
    n_codes = alphabet.levels**m
    if n_codes > BRUTE_FORCE_LIMIT:
        raise TooLarge(f"L^m = {n_codes} codewords exceeds {BRUTE_FORCE_LIMIT}")
    codes = np.array(list(itertools.product(alphabet_values(alphabet), repeat=m)))
    images = codes @ F.T  # n_codes x k
    P = np.atleast_2d(np.asarray(points, dtype=float))
    worst = 0.0
    for x in P:
        d2 = np.sum((images - x) ** 2, axis=1)
        worst = max(worst, float(np.sqrt(d2.min())))
    return worst


def volumetric_bound(L: int, m: int, k: int) -> float:
    """Covering lower bound ``L^(-m/k)`` for any ``L``-level scheme on the unit ball."""
    return float(L) ** (-m / k)


# -- probability bounds ---------------------------------------------------------


class TailBound(NamedTuple):
    value: float
    viable: bool


def tail_bound_A1(l: int, k: int, eps: float) -> TailBound:
    """Bound on ``P(sigma_min(G) <= eps sqrt(l)/2)`` for an ``l x k`` Gaussian ``G``, ``l > k``.

    ``(10 + 8 sqrt(log(1/eps)))^k e^(l/2) eps^(l-k)``; ``viable`` is False
    when the value is not below one.
    """
    if not 0.0 < eps < 1.0:
        raise BadEps(f"eps must lie in (0, 1), got {eps}")
    if not l > k >= 1:
        raise BadShape(f"need l > k >= 1, got l={l}, k={k}")
    log_val = k * math.log(10.0 + 8.0 * math.sqrt(math.log(1.0 / eps))) + l / 2.0 + (l - k) * math.log(eps)
    value = math.exp(log_val)
    return TailBound(value, value < 1.0)


def gaussian_small_ball_bound(l: int, eps: float) -> float:
    """``P(||g||_2 <= eps sqrt(l)) <= eps^l e^((1-eps^2) l/2)`` for ``g ~ N(0, I_l)``."""
    if not 0.0 < eps <= 1.0:
        raise BadEps(f"eps must lie in (0, 1], got {eps}")
    return eps**l * math.exp((1.0 - eps**2) * l / 2.0)


def square_case_bound(m: int, k: int, L: int, eta: float) -> tuple[float, float]:
    """Distortion bound and success probability when ``l = k``.

    Returns ``(8 e m^1.5 L^(-(1-eta) floor(m/k)),
    1 - L^(-eta floor(m/k)) e^(eta/(1-eta)) - e^(-2m))``.
    """
    r = m // k
    bound = 8.0 * math.e * m**1.5 * float(L) ** (-(1.0 - eta) * r)
    prob = 1.0 - float(L) ** (-eta * r) * math.exp(eta / (1.0 - eta)) - math.exp(-2.0 * m)
    return bound, prob


def rect_case_bound(m: int, k: int, l: int, L: int, eta: float) -> tuple[float, float]:
    """Distortion bound and success probability when ``l > k``."""
    r = m // l
    bound = 16.0 * math.e * m**1.5 / l * float(L) ** (-(1.0 - eta) * r)
    fail = (
        math.exp(l / 2.0)
        * (10.0 + 8.0 * math.sqrt(eta * r * math.log(L))) ** k
        * math.exp(eta / (1.0 - eta) * (l - k))
        * float(L) ** (-eta * r * (l - k))
    )
    return bound, 1.0 - fail - math.exp(-2.0 * m)


def hsc_distortion_bound(m: int, L: int) -> float:
    """``sqrt(2e) m L^(-m/2)``, the harmonic semicircle distortion bound."""
    return math.sqrt(2.0 * math.e) * m * float(L) ** (-m / 2.0)


# -- experiments ----------------------------------------------------------------


@dataclass(frozen=True)
class TailReport:
    l: int
    k: int
    eps: float
    trials: int
    threshold: float
    empirical_prob: float
    bound_A1: float | None
    bound_P43: float | None

    @property
    def bound(self) -> float:
        return self.bound_P43 if self.l == self.k else self.bound_A1

    @property
    def binomial_sd(self) -> float:
        p = min(self.bound, 1.0)
        return math.sqrt(p * (1.0 - p) / self.trials)

    def to_dict(self) -> dict:
        return asdict(self)


def _min_singular_values(rng, l, k, trials, chunk=20_000):
    out = np.empty(trials)
    for s in range(0, trials, chunk):
        n = min(chunk, trials - s)
        out[s : s + n] = np.linalg.svd(rng.standard_normal((n, l, k)), compute_uv=False)[:, -1]
    return out


def svtail_experiment(l: int, k: int, eps: float, trials: int, seed: int) -> TailReport:
    """Empirical small-singular-value probability for ``l x k`` Gaussian matrices.

    Square case: event ``sigma_min <= eps/sqrt(k)``, bound ``eps``.
    Tall case: event ``sigma_min <= eps sqrt(l)/2``, bound from :func:`tail_bound_A1`.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not l >= k >= 1:
        raise BadShape(f"need l >= k >= 1, got l={l}, k={k}")
    if not 0.0 < eps < 1.0:
        raise BadEps(f"eps must lie in (0, 1), got {eps}")
    if l == k:
        threshold, b43, ba1 = eps / math.sqrt(k), eps, None
    else:
        threshold, b43, ba1 = eps * math.sqrt(l) / 2.0, None, tail_bound_A1(l, k, eps).value
    smin = _min_singular_values(rng_for(seed, l, k), l, k, trials)
    freq = float(np.mean(smin <= threshold))
    return TailReport(l, k, float(eps), int(trials), threshold, freq, ba1, b43)


def gauss_norm_event(m: int, k: int, trials: int, seed: int) -> float:
    """Empirical ``P(||E||_2 > 4 sqrt(m))`` for ``m x k`` standard Gaussian ``E``.

    The theoretical value is below ``exp(-2m)``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = rng_for(seed, m, k)
    hits = 0
    for s in range(0, trials, 20_000):
        n = min(20_000, trials - s)
        smax = np.linalg.svd(rng.standard_normal((n, m, k)), compute_uv=False)[:, 0]
        hits += int(np.sum(smax > 4.0 * math.sqrt(m)))
    return hits / trials


def hsc_experiment(m_list, L_list, n: int, seed: int) -> list[dict]:
    """Harmonic semicircle frames with two blocks, ``beta = mL/(1+m)``,
    ``delta = (1+m)/L`` and ``mu = 1``.

    One row per ``(m, L)``; ``ok`` is True when the Monte Carlo sup error,
    the certified bound, and the closed-form distortion bound are ordered.
    """
    rows = []
    for m in m_list:
        frame = hsc_frame(int(m))
        for L in L_list:
            beta = m * L / (1.0 + m)
            delta = (1.0 + m) / L
            scheme = build_scheme(frame, 2, int(L), beta=beta, delta=delta, mu_policy=1.0)
            est = mc_distortion(scheme, n, derived_seed(seed, m, L), "mixed")
            cert = error_bound(scheme)
            closed = hsc_distortion_bound(m, L)
            c_closed = hsc_condensation_norm(beta, m)
            c_numeric = linalg.sigma_min(scheme.condensed())
            rows.append(
                {
                    "m": int(m),
                    "L": int(L),
                    "beta": beta,
                    "delta": delta,
                    "sup_error": est.sup_error,
                    "mean_error": est.mean_error,
                    "n_samples": est.n_samples,
                    "n_skipped": est.n_skipped,
                    "error_bound": cert,
                    "hsc_bound": closed,
                    "C_closed_form": c_closed,
                    "C_numeric": c_numeric,
                    "ok": bool(est.sup_error <= cert <= closed and abs(c_closed - c_numeric) <= 1e-10),
                }
            )
    return rows


def optimal_params_check(alpha: float, mu: float, L: int, n_grid: int = 200) -> dict:
    """Compare the closed-form minimizer of ``delta beta^-alpha`` with a grid over the stability region.

    The grid is ``beta`` in the open interval ``(1, L)`` times
    ``delta = s mu/(L - beta)`` with ``s`` in ``[1, 3]``, every point of which
    is admissible.
    """
    beta, delta, value = optimal_params(alpha, mu, L)
    b = np.linspace(1.0, L, n_grid + 2)[1:-1]
    s = np.linspace(1.0, 3.0, n_grid)
    D = (mu / (L - b))[:, None] * s[None, :]
    grid = D * b[:, None] ** (-alpha)
    grid_min = float(grid.min())
    return {
        "alpha": alpha,
        "mu": mu,
        "L": L,
        "beta": beta,
        "delta": delta,
        "value": value,
        "objective_at_optimum": delta * beta ** (-alpha),
        "grid_min": grid_min,
        "boundary_residual": abs(beta + mu / delta - L),
        "ok": bool(value <= grid_min * (1.0 + 1e-12)),
    }


@dataclass
class DecayResult:
    rows: list
    frame_rows: list
    rate: float
    intercept: float
    target_rate: float
    violations: int


def _decay_frame(args):
    m, i, k, L, l, eta, x_per_frame, seed, mu_policy = args
    frame = gaussian_frame(m, k, derived_seed(seed, 0, m, i))
    try:
        scheme = build_scheme(frame, l, L, mode=TRUNCATE, eta=eta, mu_policy=mu_policy)
    except RankDeficient:
        return {"m": m, "frame": i, "sup_error": math.nan, "error_bound": math.nan, "n_skipped": x_per_frame}
    X = sample_ball(k, x_per_frame, derived_seed(seed, 1, m, i), "mixed")
    err, ok = pipeline_errors(scheme, X)
    sup = float(err[ok].max()) if ok.any() else math.nan
    return {
        "m": m,
        "frame": i,
        "beta": scheme.beta,
        "delta": scheme.delta,
        "mu": scheme.mu,
        "sigma_min_VE": linalg.sigma_min(scheme.condensed()),
        "sup_error": sup,
        "error_bound": error_bound(scheme),
        "n_skipped": int((~ok).sum()),
    }


def gaussian_decay_experiment(
    k: int,
    L: int,
    m_list,
    l_policy: str = "square",
    eta: float = 0.0,
    frames_per_m: int = 100,
    x_per_frame: int = 500,
    seed: int = 0,
    mu_policy: str = "exact",
    threads: int | None = None,
) -> DecayResult:
    """Error decay of beta duals on Gaussian frames as ``m`` grows.

    For each ``m`` the sup error over ``x_per_frame`` sampled points is
    computed for ``frames_per_m`` frames; the median over frames is then
    regressed as ``log_L(error) ~ c - rate * m``.  ``l_policy`` is ``square``
    (``l = k``) or ``rect`` (``l = k + ceil(eta k)``).  Frames use truncated
    blocks; ``mu_policy="gaussian"`` switches to ``mu = 4 sqrt(m)``.
    """
    if l_policy == "square":
        l = k
    elif l_policy == "rect":
        l = k + max(1, math.ceil(eta * k))
    else:
        raise ValueError(f"unknown l_policy {l_policy!r}")
    jobs = [(int(m), i, k, L, l, eta, x_per_frame, seed, mu_policy) for m in m_list for i in range(frames_per_m)]
    frame_rows = _pmap(_decay_frame, jobs, threads)
    rows = []
    for m in m_list:
        sel = [r for r in frame_rows if r["m"] == m]
        sups = np.array([r["sup_error"] for r in sel])
        bounds = np.array([r["error_bound"] for r in sel])
        if l == k:
            theory, prob = square_case_bound(m, k, L, eta)
        else:
            theory, prob = rect_case_bound(m, k, l, L, eta)
        rows.append(
            {
                "m": int(m),
                "k": k,
                "l": l,
                "L": L,
                "eta": eta,
                "frames": len(sel),
                "median_sup_error": float(np.nanmedian(sups)),
                "max_sup_error": float(np.nanmax(sups)),
                "median_error_bound": float(np.nanmedian(bounds)),
                "violations": int(np.sum(sups > bounds)),
                "volumetric_bound": volumetric_bound(L, m, k),
                "theory_bound": theory,
                "theory_probability": prob,
            }
        )
    ms = np.array([r["m"] for r in rows], dtype=float)
    logs = np.log([r["median_sup_error"] for r in rows]) / math.log(L)
    slope, intercept = np.polyfit(ms, logs, 1)
    return DecayResult(
        rows=rows,
        frame_rows=frame_rows,
        rate=float(-slope),
        intercept=float(intercept),
        target_rate=(1.0 - eta) / k,
        violations=sum(r["violations"] for r in rows),
    )
