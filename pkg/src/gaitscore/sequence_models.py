"""Sequence-level machinery: histogram-change deltas, GMM-HMM, cross-correlation.

The per-frame keypoint histograms are reduced to scalar observations by a
Hamming distance between consecutive frames' bin-occupancy codes. A fully
connected hidden Markov model with Gaussian-mixture emissions is trained on
those delta sequences with Baum-Welch EM and scored with the scaled forward
algorithm. Posture-symmetry sequences are compared with a max-over-lags
normalized cross-correlation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BinCountMismatch,
    DegenerateDataWarning,
    EmptyTrainingSet,
    EmptyWindow,
    InsufficientData,
    LengthMismatch,
    TooShort,
)

VARIANCE_FLOOR = 1e-4
TRANS_JITTER = 1e-3
EM_MAX_ITER = 100
EM_REL_TOL = 1e-4
# Dirichlet-style pseudocount on transition/start statistics. Near-discrete
# observations make responsibilities one-hot and would otherwise drive unused
# transitions to exactly zero, so windows with unseen transitions would score
# -inf; the perturbation is second-order, far below the EM monotonicity slack.
TRANS_SMOOTHING = 1e-10
_LOG_2PI = math.log(2.0 * math.pi)
_TINY_POSTERIOR = 1e-12

HAMMING_MODES = ("occupancy", "unequal-bins")


# --- histogram deltas ---------------------------------------------------------

def hamming_delta(hist, hist_prev, mode: str = "occupancy") -> int:
    """Distance between two count histograms, as a scalar observation.

    ``occupancy`` (default) binarizes each histogram by bin occupancy
    (count > 0) and counts differing bits; ``unequal-bins`` counts bins whose
    raw counts differ.

    Raises:
        BinCountMismatch: histograms have different bin counts.
    """
    a = np.asarray(getattr(hist, "bins", hist))
    b = np.asarray(getattr(hist_prev, "bins", hist_prev))
    if a.shape != b.shape:
        raise BinCountMismatch(f"bin counts differ: {a.shape} vs {b.shape}")
    if mode == "occupancy":
        return int(np.count_nonzero((a > 0) != (b > 0)))
    if mode == "unequal-bins":
        return int(np.count_nonzero(a != b))
    raise ValueError(f"unknown hamming mode {mode!r}")


@dataclass
class DeltaSequence:
    """Scalar observations: one delta per consecutive frame pair."""

    values: np.ndarray
    max_value: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if np.any(v < 0) or np.any(v > self.max_value):
            raise ValueError(f"delta values outside [0, {self.max_value}]")
        self.values = v

    def __len__(self) -> int:
        return self.values.shape[0]


def delta_sequence(histograms: list, mode: str = "occupancy") -> DeltaSequence:
    """Deltas between consecutive histograms of one sequence (length n-1)."""
    n_bins = int(np.asarray(histograms[0].bins).shape[0])
    values = [hamming_delta(histograms[t], histograms[t - 1], mode=mode)
              for t in range(1, len(histograms))]
    return DeltaSequence(values=np.asarray(values, dtype=np.float64), max_value=n_bins)


# --- GMM-HMM -------------------------------------------------------------------

@dataclass
class GmmHmm:
    """Fully connected HMM with per-state scalar Gaussian-mixture emissions."""

    pi: np.ndarray             # (S,)
    trans: np.ndarray          # (S, S), rows stochastic
    mix_weights: np.ndarray    # (S, M), rows stochastic
    mix_means: np.ndarray      # (S, M)
    mix_variances: np.ndarray  # (S, M), floored
    ll_history: list = field(default_factory=list, repr=False, compare=False)

    @property
    def n_states(self) -> int:
        return self.pi.shape[0]

    @property
    def n_mix(self) -> int:
        return self.mix_weights.shape[1]

    def validate(self) -> None:
        if abs(self.pi.sum() - 1.0) > 1e-9 or np.any(self.pi < 0):
            raise ValueError("pi is not a distribution")
        if np.max(np.abs(self.trans.sum(axis=1) - 1.0)) > 1e-9 or np.any(self.trans < 0):
            raise ValueError("transition rows are not distributions")
        if np.max(np.abs(self.mix_weights.sum(axis=1) - 1.0)) > 1e-9 \
                or np.any(self.mix_weights < 0):
            raise ValueError("mixture weight rows are not distributions")
        if np.any(self.mix_variances < VARIANCE_FLOOR * (1 - 1e-12)):
            raise ValueError(f"variance below floor {VARIANCE_FLOOR}")


def _component_logpdf(model: GmmHmm, x: np.ndarray) -> np.ndarray:
    """(T, S, M) log of weight * Gaussian density at each observation."""
    mu = model.mix_means[None, :, :]
    var = model.mix_variances[None, :, :]
    xx = x[:, None, None]
    log_n = -0.5 * (_LOG_2PI + np.log(var) + (xx - mu) ** 2 / var)
    with np.errstate(divide="ignore"):
        log_w = np.log(model.mix_weights)[None, :, :]
    return log_w + log_n


def frame_log_likelihood(model: GmmHmm, x: np.ndarray) -> np.ndarray:
    """(T, S) per-state emission log-likelihoods."""
    comp = _component_logpdf(model, x)
    m = comp.max(axis=2, keepdims=True)
    m_safe = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.exp(comp - m_safe).sum(axis=2)) + m_safe[:, :, 0]
    return out


def forward_log_likelihood(model: GmmHmm, observations: np.ndarray) -> float:
    """Scaled forward-algorithm log-likelihood of a scalar sequence."""
    x = np.asarray(observations, dtype=np.float64).reshape(-1)
    if x.size == 0:
        raise EmptyWindow("cannot score an empty observation window")
    flp = frame_log_likelihood(model, x)
    ll, _, _ = _forward_pass(model.pi, model.trans, flp)
    return ll


def _forward_pass(pi, trans, flp):
    """Per-step-normalized forward pass.

    Emissions are shifted by their per-step maximum before exponentiation so
    the recursion never underflows; the shifts are added back into the
    log-likelihood.

    Returns:
        (log_likelihood, alpha_hat (T, S), e (T, S) shifted emissions).
    """
    t_len, _ = flp.shape
    shifts = flp.max(axis=1)
    shifts = np.where(np.isfinite(shifts), shifts, 0.0)
    e = np.exp(flp - shifts[:, None])
    alphas = np.empty_like(e)

    a = pi * e[0]
    c = a.sum()
    if c <= 0.0:
        return -np.inf, None, e
    alphas[0] = a / c
    ll = math.log(c) + shifts[0]
    for t in range(1, t_len):
        a = (alphas[t - 1] @ trans) * e[t]
        c = a.sum()
        if c <= 0.0:
            return -np.inf, None, e
        alphas[t] = a / c
        ll += math.log(c) + shifts[t]
    return ll, alphas, e


def _backward_pass(trans, e):
    """Per-step-normalized backward companion to _forward_pass."""
    t_len, n_states = e.shape
    betas = np.empty_like(e)
    b = np.full(n_states, 1.0 / n_states)
    betas[-1] = b
    for t in range(t_len - 2, -1, -1):
        raw = trans @ (e[t + 1] * betas[t + 1])
        s = raw.sum()
        if s <= 0.0:
            raw = np.full(n_states, 1.0)
            s = float(n_states)
        betas[t] = raw / s
    return betas


def train_hmm(sequences: list, n_states: int = 8, n_mix: int = 3,
              seed: int = 0, max_iter: int = EM_MAX_ITER,
              tol: float = EM_REL_TOL) -> GmmHmm:
    """Baum-Welch EM over all delta sequences pooled into one model.

    Initialization: seeded k-means with n_states * n_mix centers over the
    pooled deltas, sorted and dealt out in contiguous blocks so each state
    starts on a distinct value range (states with identical emissions would
    leave EM on a saddle); uniform start distribution; uniform transitions
    plus seeded jitter of 1e-3, row-renormalized. Stops after ``max_iter``
    iterations or when the relative improvement of the total log-likelihood
    falls below ``tol``. Variances are floored at 1e-4 in every M-step, so
    EM stays monotone under the floor constraint. The per-iteration total
    log-likelihood is kept in ``ll_history``.

    Raises:
        EmptyTrainingSet: no sequences.
        InsufficientData: a sequence shorter than n_states.
    """
    if not sequences:
        raise EmptyTrainingSet("no delta sequences to train on")
    obs = [np.asarray(getattr(s, "values", s), dtype=np.float64).reshape(-1)
           for s in sequences]
    for i, x in enumerate(obs):
        if x.size < n_states:
            raise InsufficientData(
                f"sequence {i} has {x.size} observations, need >= {n_states}"
            )
    pooled = np.concatenate(obs)
    rng = np.random.default_rng(seed)

    if np.ptp(pooled) == 0.0:
        warnings.warn(
            "all training deltas identical; single-component fallback",
            DegenerateDataWarning,
        )
        model = GmmHmm(
            pi=np.full(n_states, 1.0 / n_states),
            trans=np.full((n_states, n_states), 1.0 / n_states),
            mix_weights=np.ones((n_states, 1)),
            mix_means=np.full((n_states, 1), pooled[0]),
            mix_variances=np.full((n_states, 1), VARIANCE_FLOOR),
        )
        total = sum(forward_log_likelihood(model, x) for x in obs)
        model.ll_history.append(total)
        model.validate()
        return model

    centers, cluster_w, cluster_var = _kmeans_1d(pooled, n_states * n_mix, rng)
    mix_means = centers.reshape(n_states, n_mix)
    mix_variances = cluster_var.reshape(n_states, n_mix)
    mix_weights = cluster_w.reshape(n_states, n_mix).copy()
    row_mass = mix_weights.sum(axis=1, keepdims=True)
    empty_rows = row_mass[:, 0] <= 0
    mix_weights[empty_rows] = 1.0 / n_mix
    row_mass[empty_rows] = 1.0
    mix_weights /= row_mass

    pi = np.full(n_states, 1.0 / n_states)
    trans = np.full((n_states, n_states), 1.0 / n_states)
    trans = trans + rng.uniform(0.0, TRANS_JITTER, size=trans.shape)
    trans = trans / trans.sum(axis=1, keepdims=True)
    model = GmmHmm(
        pi=pi,
        trans=trans,
        mix_weights=mix_weights,
        mix_means=mix_means,
        mix_variances=mix_variances,
    )

    prev_ll = None
    for _ in range(max_iter):
        stats, total_ll = _em_expectation(model, obs)
        model.ll_history.append(total_ll)
        if prev_ll is not None and total_ll - prev_ll < tol * max(1.0, abs(prev_ll)):
            break
        _em_maximization(model, stats, len(obs))
        model.validate()
        prev_ll = total_ll
    return model


def _em_expectation(model: GmmHmm, obs: list):
    s_states, s_mix = model.n_states, model.n_mix
    stats = {
        "start": np.zeros(s_states),
        "trans": np.zeros((s_states, s_states)),
        "post": np.zeros((s_states, s_mix)),
        "x": np.zeros((s_states, s_mix)),
        "xx": np.zeros((s_states, s_mix)),
    }
    total_ll = 0.0
    for x in obs:
        comp = _component_logpdf(model, x)
        m = comp.max(axis=2, keepdims=True)
        m_safe = np.where(np.isfinite(m), m, 0.0)
        with np.errstate(divide="ignore"):
            flp = np.log(np.exp(comp - m_safe).sum(axis=2)) + m_safe[:, :, 0]
        ll, alphas, e = _forward_pass(model.pi, model.trans, flp)
        total_ll += ll
        if alphas is None:
            continue
        betas = _backward_pass(model.trans, e)

        gamma = alphas * betas
        gamma /= gamma.sum(axis=1, keepdims=True)

        stats["start"] += gamma[0]
        for t in range(x.size - 1):
            xi = alphas[t][:, None] * model.trans * (e[t + 1] * betas[t + 1])[None, :]
            s = xi.sum()
            if s > 0:
                stats["trans"] += xi / s

        # per-component responsibilities within each state
        with np.errstate(invalid="ignore"):
            resp = np.exp(comp - flp[:, :, None])
        resp = np.where(np.isfinite(resp), resp, 0.0)
        weighted = gamma[:, :, None] * resp
        stats["post"] += weighted.sum(axis=0)
        stats["x"] += (weighted * x[:, None, None]).sum(axis=0)
        stats["xx"] += (weighted * (x ** 2)[:, None, None]).sum(axis=0)
    return stats, total_ll


def _em_maximization(model: GmmHmm, stats: dict, n_sequences: int) -> None:
    pi = stats["start"] + TRANS_SMOOTHING
    model.pi = pi / pi.sum()

    num = stats["trans"] + TRANS_SMOOTHING
    model.trans = num / num.sum(axis=1, keepdims=True)

    post = stats["post"]
    state_mass = post.sum(axis=1)
    for s in range(model.n_states):
        if state_mass[s] <= 0:
            continue  # unused state keeps its previous emission parameters
        w = post[s] / state_mass[s]
        model.mix_weights[s] = w / w.sum()
        for m in range(model.n_mix):
            if post[s, m] > _TINY_POSTERIOR:
                mean = stats["x"][s, m] / post[s, m]
                var = stats["xx"][s, m] / post[s, m] - mean ** 2
                model.mix_means[s, m] = mean
                model.mix_variances[s, m] = max(var, VARIANCE_FLOOR)


def _kmeans_1d(x: np.ndarray, k: int, rng, n_iter: int = 50):
    """Seeded k-means++ with Lloyd refinement on scalar data.

    Returns:
        (centers ascending, cluster weights, cluster variances floored).
    """
    centers = np.empty(k)
    centers[0] = x[rng.integers(x.size)]
    for j in range(1, k):
        d2 = np.min((x[:, None] - centers[None, :j]) ** 2, axis=1)
        total = d2.sum()
        if total <= 0:
            centers[j:] = centers[0]
            break
        centers[j] = x[rng.choice(x.size, p=d2 / total)]

    for _ in range(n_iter):
        assign = np.argmin(np.abs(x[:, None] - centers[None, :]), axis=1)
        new = centers.copy()
        for j in range(k):
            members = x[assign == j]
            if members.size:
                new[j] = members.mean()
        if np.array_equal(new, centers):
            break
        centers = new

    order = np.argsort(centers)
    centers = centers[order]
    assign = np.argmin(np.abs(x[:, None] - centers[None, :]), axis=1)
    weights = np.array([np.count_nonzero(assign == j) for j in range(k)], dtype=np.float64)
    pooled_var = max(float(x.var()), VARIANCE_FLOOR)
    variances = np.empty(k)
    for j in range(k):
        members = x[assign == j]
        variances[j] = max(float(members.var()), VARIANCE_FLOOR) if members.size >= 2 \
            else pooled_var
    if weights.sum() == 0:
        weights[:] = 1.0
    weights /= weights.sum()
    return centers, weights, variances


def poi_score(model: GmmHmm, window) -> float:
    """Forward log-likelihood of one delta window, clamped to be <= 0.

    The clamp keeps the downstream weight formula's sign assumptions valid:
    Gaussian mixtures can exceed density 1 on near-constant integer deltas,
    which would otherwise push the log-likelihood positive.

    Raises:
        EmptyWindow: the window has no observations.
    """
    values = np.asarray(getattr(window, "values", window), dtype=np.float64).reshape(-1)
    if values.size == 0:
        raise EmptyWindow("empty scoring window")
    return min(0.0, forward_log_likelihood(model, values))


# --- cross-correlation ------------------------------------------------------------

def xcorr_similarity(a, b, max_lag: int = None) -> float:
    """Max-over-lags similarity of two equal-length sequences, in [0, 1].

    At each lag the overlapping segments (overlap >= 2) are compared with
    zero-mean normalized cross-correlation. Segments with no variance fall
    back to the raw cosine of the segments (0 if either is all-zero), so a
    constant-but-equal pair still counts as similar. Negative correlation
    clamps to 0.

    Raises:
        LengthMismatch: inputs differ in length.
        TooShort: fewer than 2 samples.
    """
    av = np.asarray(a, dtype=np.float64).reshape(-1)
    bv = np.asarray(b, dtype=np.float64).reshape(-1)
    if av.size != bv.size:
        raise LengthMismatch(f"lengths differ: {av.size} vs {bv.size}")
    n = av.size
    if n < 2:
        raise TooShort(f"need at least 2 samples, got {n}")
    if max_lag is None:
        max_lag = n // 2
    max_lag = min(max_lag, n - 2)

    best = -np.inf
    for lag in range(-max_lag, max_lag + 1):
        if lag >= 0:
            sa, sb = av[lag:], bv[:n - lag]
        else:
            sa, sb = av[:n + lag], bv[-lag:]
        best = max(best, _segment_similarity(sa, sb))
    return min(1.0, max(0.0, best))


def _segment_similarity(sa: np.ndarray, sb: np.ndarray) -> float:
    am = sa - sa.mean()
    bm = sb - sb.mean()
    va = float(am @ am)
    vb = float(bm @ bm)
    # variance at numerical-noise level counts as constant
    if va <= 1e-18 * max(1.0, float(sa @ sa)) or vb <= 1e-18 * max(1.0, float(sb @ sb)):
        na = float(np.linalg.norm(sa))
        nb = float(np.linalg.norm(sb))
        if na == 0.0 or nb == 0.0:
            return 0.0
        return float(sa @ sb) / (na * nb)
    return float(am @ bm) / math.sqrt(va * vb)
