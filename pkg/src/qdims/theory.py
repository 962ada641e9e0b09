"""Critical exponents of moment sums over the address tree.

For a level-varying similarity system with a Bernoulli measure, the moment
sums over scale cut sets switch from bounded to unbounded at a critical
exponent; that exponent (one per moment order q) is the theoretical value of
the generalized q-dimension of the projected measure under the separation
conditions certified elsewhere. This module computes those exponents four
ways: a closed form for stationary similarity tables, truncated per-level
product limits, truncated cut-set limits, and level-sum limits built on the
singular value function for affine tables.

Boundedness of a limsup/liminf cannot be decided numerically, so the solvers
substitute the sign of the asymptotic growth trend over a trailing window of
depths, and report the bisection bracket they achieved. For stationary
inputs the trend is exact (per-level terms are constant), which is why the
stationary tolerances are far tighter than the truncated ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .codespace import BernoulliMeasure, scale_cut_set_masses
from .errors import BranchBudgetError, IndeterminateTrendError, InsufficientScalesError
from .singular import batched_log_singular_values, svf_log
from .systems import AffineSystem, SimilarSystem

__all__ = [
    "Q_ONE_TOL",
    "CriticalExponents",
    "stationary_dimension",
    "product_dimension",
    "cutset_dimension",
    "affine_series_dimension",
    "stationary_affine_dimension",
    "lq_spectrum",
    "clamp_dimension",
]

# the (1-q) exponents degenerate near q = 1; route to the entropy forms there
Q_ONE_TOL = 1e-6

XTOL_STATIONARY = 1e-6
XTOL_TRUNCATED = 1e-3

ENUMERATION_CAP = 2**24


@dataclass(frozen=True)
class CriticalExponents:
    """Lower/upper critical exponents for one moment order q.

    ``lower`` and ``upper`` are the estimates for the lower and upper
    exponents; the method tag records which solver produced them and the
    diagnostics carry depths, brackets, and one-sided-bound flags.
    """

    q: float
    lower: float
    upper: float
    method: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def value(self) -> float:
        return 0.5 * (self.lower + self.upper)

    @property
    def bracket_width(self) -> float:
        return self.upper - self.lower


def clamp_dimension(value: float, ambient_dim: int) -> float:
    """Dimensions of projected measures never exceed the ambient dimension."""
    return min(float(value), float(ambient_dim))


def lq_spectrum(d_q: float, q: float) -> float:
    """Moment-scaling exponent tau = (1 - q) * D_q; undefined at q = 1."""
    if abs(q - 1.0) < Q_ONE_TOL:
        raise ValueError("the q = 1 spectrum value needs a derivative, not supported")
    return (1.0 - q) * float(d_q)


# ---------------------------------------------------------------------------
# stationary similarity closed form
# ---------------------------------------------------------------------------


def stationary_dimension(ratios, probs, q: float) -> float:
    """Critical exponent for one repeated similarity level.

    For q != 1 this is the unique d with ``sum c_i**(d (1-q)) p_i**q = 1``
    (the map d -> sum is strictly monotone); at q = 1 it is the entropy
    ratio ``sum p log p / sum p log c``. The root is bisected until the
    residual drops below 1e-12.
    """
    c = np.asarray(ratios, dtype=float)
    p = np.asarray(probs, dtype=float)
    if c.shape != p.shape or c.ndim != 1:
        raise ValueError("ratios and probs must be 1-D vectors of equal length")
    if np.any(c <= 0) or np.any(c >= 1):
        raise ValueError("ratios must lie strictly in (0, 1)")
    if np.any(p <= 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("probs must be strictly positive and sum to 1")
    if q <= 0:
        raise ValueError(f"q must be positive, got {q}")
    log_c = np.log(c)
    log_p = np.log(p)
    if abs(q - 1.0) < Q_ONE_TOL:
        return float((p @ log_p) / (p @ log_c))

    def f(d: float) -> float:
        return float(np.exp(d * (1.0 - q) * log_c + q * log_p).sum()) - 1.0

    increasing = q > 1.0
    lo, hi = 0.0, 1.0
    f_lo = f(lo)
    if (f_lo > 0) == increasing:
        return 0.0
    while (f(hi) > 0) != increasing:
        hi *= 2.0
        if hi > 1024:
            raise RuntimeError("failed to bracket the stationary root")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if abs(f_mid) < 1e-13 and hi - lo < 1e-12:
            return mid
        if (f_mid > 0) == increasing:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-15 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# trend machinery
# ---------------------------------------------------------------------------


def _envelope_trend(values: np.ndarray, mode: str) -> float:
    """Growth trend of the upper/lower envelope over the trailing window.

    The sum is classified as bounded when its envelope sets no new extreme
    across the later half of the window; the signed trend is the difference
    of the window-half extremes.
    """
    v = np.asarray(values, dtype=float)
    window = v[len(v) // 2 :] if len(v) >= 8 else v
    h = max(1, len(window) // 2)
    first, second = window[:h], window[h:]
    if len(second) == 0:
        second = first
    agg = np.max if mode == "limsup" else np.min
    return float(agg(second) - agg(first))


def _root_of_increasing(f, xtol: float, hi0: float = 1.0, cap: float = 512.0):
    """Root of a continuous increasing function on s >= 0, with its bracket."""
    lo = 0.0
    if f(lo) >= 0.0:
        return 0.0, (0.0, 0.0)
    hi = hi0
    while f(hi) <= 0.0:
        hi *= 2.0
        if hi > cap:
            raise IndeterminateTrendError(
                "trend never turned positive; sum appears bounded for all s",
                bracket_lower=lo, bracket_upper=cap,
            )
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        if f(mid) <= 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi), (lo, hi)


def _padded(levels: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    width = max(len(v) for v in levels)
    out = np.full((len(levels), width), -np.inf)
    for i, v in enumerate(levels):
        out[i, : len(v)] = v
    return out, np.isfinite(out)


def _logsumexp(a: np.ndarray, axis=-1) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    out = np.log(np.exp(a - m).sum(axis=axis)) + np.squeeze(m, axis=axis)
    return out


# ---------------------------------------------------------------------------
# product-form limits for similarity tables
# ---------------------------------------------------------------------------


def product_dimension(system: SimilarSystem, measure: BernoulliMeasure,
                      q: float, depth: int = 200) -> CriticalExponents:
    """Critical exponents from per-level product sums through ``depth`` levels.

    The level-k sum contributes a factor ``sum_j c_{k,j}**(s(1-q)) p_{k,j}**q``
    to a running product whose boundedness in k decides the exponent. For
    q > 1 the upper-envelope root is the exact lower exponent and the
    lower-envelope root only bounds the upper exponent from above; for
    0 < q < 1 the roles swap; at q = 1 the entropy sums give one-sided
    bounds in both directions. Stationary tables make every level identical,
    so both envelopes coincide and the bisection is exact to its tolerance.
    """
    if q <= 0:
        raise ValueError(f"q must be positive, got {q}")
    if not measure.profile().matches(system.profile, depth=depth):
        raise ValueError("measure branching does not match the system")
    stationary = system.ratio_schedule.stationary and measure.stationary
    xtol = XTOL_STATIONARY if stationary else XTOL_TRUNCATED

    log_c, c_mask = _padded([system.log_ratios_at(k) for k in range(1, depth + 1)])
    log_p, _ = _padded([measure.log_probs(k) for k in range(1, depth + 1)])

    if abs(q - 1.0) < Q_ONE_TOL:
        p = np.where(c_mask, np.exp(log_p), 0.0)
        ent = (p * np.where(c_mask, log_p, 0.0)).sum(axis=1)
        lya = (p * np.where(c_mask, log_c, 0.0)).sum(axis=1)
        cum_ent = np.cumsum(ent)
        cum_lya = np.cumsum(lya)

        def seq(s):
            return cum_ent - s * cum_lya

        bounds_note = {"lower": "one-sided (lower bound)", "upper": "one-sided (upper bound)"}
    else:
        q_log_p = np.where(c_mask, q * log_p, -np.inf)
        coeff = np.where(c_mask, (1.0 - q) * log_c, 0.0)

        def seq(s):
            return np.cumsum(_logsumexp(np.where(c_mask, s * coeff + q_log_p, -np.inf), axis=1))

        if q > 1:
            bounds_note = {"lower": "exact", "upper": "one-sided (upper bound)"}
        else:
            bounds_note = {"lower": "one-sided (lower bound)", "upper": "exact"}

    # the trend rises with s for q >= 1 and falls for q < 1; flipping the
    # sign keeps the root finder on one orientation
    sign = 1.0 if (q > 1 or abs(q - 1.0) < Q_ONE_TOL) else -1.0

    def trend(mode):
        def f(s):
            return sign * _envelope_trend(seq(s), mode)
        return f

    root_limsup, br_limsup = _root_of_increasing(trend("limsup"), xtol)
    root_liminf, br_liminf = _root_of_increasing(trend("liminf"), xtol)

    if q > 1 or abs(q - 1.0) < Q_ONE_TOL:
        lower, upper = root_limsup, root_liminf
        brackets = {"lower": br_limsup, "upper": br_liminf}
    else:
        lower, upper = root_liminf, root_limsup
        brackets = {"lower": br_liminf, "upper": br_limsup}
    if stationary:
        lower = upper = 0.5 * (lower + upper)

    diag = {
        "depth": depth,
        "stationary": stationary,
        "xtol": xtol,
        "brackets": brackets,
        "bound_direction": bounds_note,
    }
    return CriticalExponents(q=q, lower=lower, upper=upper,
                             method="product-limit", diagnostics=diag)


# ---------------------------------------------------------------------------
# cut-set limits for similarity tables
# ---------------------------------------------------------------------------


def _default_r_grid(system: SimilarSystem, measure: BernoulliMeasure,
                    max_words: int, n_scales: int = 12, shrink: float = 0.55):
    r = 0.8 * system.c_lower
    grids = []
    for _ in range(n_scales):
        try:
            logs = scale_cut_set_masses(system.ratio_schedule, measure, r,
                                        max_depth=system.max_depth, budget=max_words)
        except BranchBudgetError:
            break
        grids.append((r, logs))
        if len(logs[0]) * shrink ** -2.5 > max_words:
            break
        r *= shrink
    return grids


def cutset_dimension(system: SimilarSystem, measure: BernoulliMeasure, q: float,
                     r_grid=None, max_words: int = 250_000) -> CriticalExponents:
    """Critical exponents straight from cut-set moment sums over a scale grid.

    Evaluates ``sum_u c_u**(s(1-q)) p_u**q`` over the cut set at every grid
    scale and bisects s against the growth trend across scales: for q > 1 a
    growing sequence means s is too large. Accepts q = 0, where the sums
    count contraction only and the root is the support's box exponent.
    """
    if q < 0:
        raise ValueError(f"q must be nonnegative, got {q}")
    stationary = system.ratio_schedule.stationary and measure.stationary
    xtol = XTOL_STATIONARY if stationary else XTOL_TRUNCATED

    if r_grid is None:
        grids = _default_r_grid(system, measure, max_words)
    else:
        grids = []
        for r in sorted(set(float(r) for r in r_grid), reverse=True):
            if not 0.0 < r < system.c_lower:
                raise ValueError(
                    f"grid scale {r} must lie in (0, c_lower={system.c_lower})"
                )
            grids.append((r, scale_cut_set_masses(system.ratio_schedule, measure, r,
                                                  max_depth=system.max_depth,
                                                  budget=max_words)))
    if len(grids) < 4:
        raise InsufficientScalesError(
            f"only {len(grids)} usable cut-set scales under the word budget"
        )

    entropy_mode = abs(q - 1.0) < Q_ONE_TOL
    if entropy_mode:
        a = np.array([(np.exp(lp) * lp).sum() for _, (lc, lp) in grids])
        b = np.array([(np.exp(lp) * lc).sum() for _, (lc, lp) in grids])

        def seq(s):
            return a - s * b
    else:
        packed = [(lc, q * lp) for _, (lc, lp) in grids]

        def seq(s):
            return np.array([_logsumexp(s * (1.0 - q) * lc + qlp) for lc, qlp in packed])

    sign = 1.0 if (q > 1 or entropy_mode) else -1.0

    def trend(mode):
        def f(s):
            return sign * _envelope_trend(seq(s), mode)
        return f

    root_limsup, br_limsup = _root_of_increasing(trend("limsup"), xtol)
    root_liminf, br_liminf = _root_of_increasing(trend("liminf"), xtol)

    if q > 1 or entropy_mode:
        lower, upper = root_limsup, root_liminf
        brackets = {"lower": br_limsup, "upper": br_liminf}
    else:
        lower, upper = root_liminf, root_limsup
        brackets = {"lower": br_liminf, "upper": br_limsup}
    if stationary:
        lower = upper = 0.5 * (lower + upper)

    diag = {
        "scales": [r for r, _ in grids],
        "words": [len(lc) for _, (lc, _) in grids],
        "stationary": stationary,
        "xtol": xtol,
        "brackets": brackets,
    }
    return CriticalExponents(q=q, lower=lower, upper=upper,
                             method="cutset-truncation", diagnostics=diag)


# ---------------------------------------------------------------------------
# affine level sums
# ---------------------------------------------------------------------------


def _auto_depth(profile, cap: int, requested: int | None) -> int:
    total = 1
    depth = 0
    while depth < 10_000:
        total *= profile.size(depth + 1)
        if total > cap:
            break
        depth += 1
        if requested is not None and depth >= requested:
            break
    if depth < 2:
        raise BranchBudgetError("enumeration cap too small for even two levels")
    return depth


def _enumerate_level_spectra(system: AffineSystem, measure: BernoulliMeasure,
                             depth: int, keep_from: int):
    """Log singular values and log masses for every word, per kept level.

    Products are renormalized entry-wise each level with the magnitude
    carried separately, so deep products cannot underflow; spectra come from
    one batched SVD per level.
    """
    d = system.ambient_dim
    mats = np.eye(d)[None, :, :]
    log_scale = np.zeros(1)
    log_p = np.zeros(1)
    out = {}
    for k in range(1, depth + 1):
        level = system.linear_maps(k)
        lp = measure.log_probs(k)
        mats = np.einsum("wij,njk->wnik", mats, level).reshape(-1, d, d)
        log_scale = (log_scale[:, None] + np.zeros(len(level))[None, :]).ravel()
        log_p = (log_p[:, None] + lp[None, :]).ravel()
        norms = np.abs(mats).max(axis=(1, 2))
        mats = mats / norms[:, None, None]
        log_scale = log_scale + np.log(norms)
        if k >= keep_from:
            logs = batched_log_singular_values(mats)
            out[k] = (logs + log_scale[:, None], log_p.copy())
    return out


def _sample_level_spectra(system: AffineSystem, measure: BernoulliMeasure,
                          depth: int, keep_from: int, size: int, seed: int):
    d = system.ambient_dim
    rng = np.random.default_rng(seed)
    mats = np.broadcast_to(np.eye(d), (size, d, d)).copy()
    log_scale = np.zeros(size)
    log_p = np.zeros(size)
    out = {}
    for k in range(1, depth + 1):
        p = measure.probs(k)
        letters = rng.choice(len(p), size=size, p=p)
        level = system.linear_maps(k)[letters]
        mats = np.einsum("nij,njk->nik", mats, level)
        log_p = log_p + measure.log_probs(k)[letters]
        norms = np.abs(mats).max(axis=(1, 2))
        mats = mats / norms[:, None, None]
        log_scale = log_scale + np.log(norms)
        if k >= keep_from:
            logs = batched_log_singular_values(mats)
            out[k] = (logs + log_scale[:, None], log_p.copy())
    return out


def _level_sum_log(log_alpha: np.ndarray, log_p: np.ndarray, s: float, q: float,
                   sampled: bool) -> float:
    term = (1.0 - q) * svf_log(log_alpha, s)
    if sampled:
        # E_mu[svf**(1-q) p**(q-1)] estimated over words drawn from the measure
        term = term + (q - 1.0) * log_p
        return float(_logsumexp(term) - np.log(len(log_p)))
    return float(_logsumexp(term + q * log_p))


def _near_integer_guard(root: float, diag: dict) -> float:
    if abs(root - round(root)) < 1e-9 and root > 0:
        diag["near_integer"] = True
        return root + 1e-9
    return root


def affine_series_dimension(system: AffineSystem, measure: BernoulliMeasure,
                            q: float, depth: int | None = None,
                            level_cap: int = 2**20, sampling: bool = False,
                            sample_size: int = 10**6, seed: int = 0) -> CriticalExponents:
    """Critical exponent from the summed level series of an affine table, q > 1.

    The level-k sum ``A_k(s) = sum_u svf(T_u, s)**(1-q) p_u**q`` has a
    geometric-like growth rate in k; the root of the fitted rate over a
    trailing window of levels locates the exponent where the full series
    over k switches between convergent and divergent.

    Exhaustive enumeration is used while the tree fits under ``level_cap``
    words; beyond that the per-level sums are estimated by importance
    sampling under the measure when ``sampling`` is set, and the Monte Carlo
    error is carried in the diagnostics.
    """
    if q <= 1.0 + Q_ONE_TOL:
        raise ValueError(f"the series form needs q > 1, got {q}")
    if not measure.profile().matches(system.profile, depth=system.max_depth):
        raise ValueError("measure branching does not match the system")
    cap = min(level_cap, ENUMERATION_CAP)
    enum_depth = _auto_depth(system.profile, cap, depth)
    sampled = depth is not None and depth > enum_depth
    if sampled and not sampling:
        raise BranchBudgetError(
            f"depth {depth} needs more than {cap} words; enable sampling to estimate"
        )
    K = depth if (sampled and depth is not None) else enum_depth
    keep_from = max(2, K // 2)
    if sampled:
        spectra = _sample_level_spectra(system, measure, K, keep_from, sample_size, seed)
    else:
        spectra = _enumerate_level_spectra(system, measure, K, keep_from)

    ks = np.array(sorted(spectra))

    def rate(s: float) -> float:
        logs = np.array([_level_sum_log(*spectra[k], s, q, sampled) for k in ks])
        return float(np.polyfit(ks, logs, 1)[0])

    root, bracket = _root_of_increasing(rate, XTOL_STATIONARY if system.stationary else XTOL_TRUNCATED)
    diag = {
        "depth": int(K),
        "window": (int(ks[0]), int(ks[-1])),
        "bracket": bracket,
        "mode": "sampled" if sampled else "exact",
    }
    if sampled:
        diag["sample_size"] = sample_size
    root = _near_integer_guard(root, diag)
    return CriticalExponents(q=q, lower=root, upper=root,
                             method="affine-k-limit", diagnostics=diag)


def stationary_affine_dimension(matrices, probs, q: float, depth: int | None = None,
                                level_cap: int = 2**20) -> CriticalExponents:
    """Critical exponent for one repeated affine level, q >= 1.

    For q > 1 the exponent solves ``lim_k A_k(s)**(1/k) = 1`` with
    ``A_k(s) = sum_u svf(T_u, s)**(1-q) p_u**q``; the rate is fitted over a
    trailing window of exactly enumerated levels, and the single-level
    bound from superadditivity is kept as a diagnostic bracket. At q = 1
    the exponent is the root of the entropy-against-contraction rate
    ``h_K(s) = (1/K) sum_u p_u log(svf(T_u, s)**(-1) p_u)``, which is
    strictly increasing and continuous in s.
    """
    system = AffineSystem([matrices])
    measure = BernoulliMeasure([probs])
    if q < 1.0 - Q_ONE_TOL:
        raise ValueError(f"the stationary affine solver needs q >= 1, got {q}")
    cap = min(level_cap, ENUMERATION_CAP)
    K = _auto_depth(system.profile, cap, depth)

    if abs(q - 1.0) < Q_ONE_TOL:
        spectra = _enumerate_level_spectra(system, measure, K, keep_from=K)
        log_alpha, log_p = spectra[K]
        w = np.exp(log_p)
        ent = float(w @ log_p)

        def h(s: float) -> float:
            return (ent - float(w @ svf_log(log_alpha, s))) / K

        root, bracket = _root_of_increasing(h, 1e-8)
        diag = {"depth": int(K), "bracket": bracket, "mode": "entropy"}
        root = _near_integer_guard(root, diag)
        return CriticalExponents(q=q, lower=root, upper=root,
                                 method="affine-k-limit", diagnostics=diag)

    keep_from = max(2, K // 2)
    spectra = _enumerate_level_spectra(system, measure, K, keep_from)
    ks = np.array(sorted(spectra))

    def rate(s: float) -> float:
        logs = np.array([_level_sum_log(*spectra[k], s, q, False) for k in ks])
        return float(np.polyfit(ks, logs, 1)[0])

    def rate_last(s: float) -> float:
        return _level_sum_log(*spectra[K], s, q, False) / K

    root, bracket = _root_of_increasing(rate, 1e-7)
    root_single, _ = _root_of_increasing(rate_last, 1e-7)
    diag = {
        "depth": int(K),
        "window": (int(ks[0]), int(ks[-1])),
        "bracket": bracket,
        "single_level_root": float(root_single),
    }
    root = _near_integer_guard(root, diag)
    return CriticalExponents(q=q, lower=root, upper=root,
                             method="affine-k-limit", diagnostics=diag)
