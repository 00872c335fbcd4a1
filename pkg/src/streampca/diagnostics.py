"""Alignment diagnostics and closed-form reference dynamics.

Conventions. Ground truth is Sigma = R Lambda R^T with eigenvalues sorted
non-increasing. All diagnostics act on the rotated frame U_bar = R^T U.
For a target rank r:

* gamma_i^2 = ||e_i^T U_bar||^2 measures alignment with eigendirection i;
  the trailing total sum_{i>r} gamma_i^2 is the squared-cosine distance
  between span(U) and the top-r eigenspace, and is 0 exactly at optima.
* gamma~_i^2 = ||e_i^T U_bar (E_r^T U_bar)^{-1}||^2 dominates gamma_i^2 and
  follows a closed-form exponential in the small-step deterministic limit.
* zeta_ij = eta^{-1/2} (U_bar V)_{ij}, with V the eigenbasis of
  U_bar(0)^T Lambda U_bar(0), are the noise-rescaled coordinates whose
  small-step limits are Ornstein-Uhlenbeck processes; their closed-form
  moments are evaluated here and compared against replicate ensembles.

Stage-time predictions evaluate the exact escape/traverse/converge time
formulas; the standard normal quantile they need is computed by a rational
approximation with a Halley refinement (absolute error far below 1.5e-7).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .linalg import SpectralTruth, singular_values, sym_eig
from .solver import stage_of as _stage_of

__all__ = [
    "AngleSet",
    "ZetaCoordinates",
    "OUReference",
    "StageTimePrediction",
    "ZetaSeries",
    "EnsembleReport",
    "principal_angles",
    "gamma_tail",
    "gamma_tilde",
    "zeta_transform",
    "ode_reference",
    "ode_rates",
    "ou_moments",
    "inverse_normal_cdf",
    "stage_times",
    "ensemble_stats",
    "estimate_zeta_drift",
    "stage_label",
]

# Heuristic moment bands for "looks Gaussian" at ~100 replicates.
SKEWNESS_BAND = 0.3
EXCESS_KURTOSIS_BAND = 0.5


def _check_orthonormal(u, name: str) -> np.ndarray:
    a = np.asarray(u, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D")
    r = a.shape[1]
    if float(np.linalg.norm(a.T @ a - np.eye(r))) > 1e-8:
        raise ValueError(f"{name} does not have orthonormal columns (defect above 1e-8)")
    return a


@dataclass(frozen=True)
class AngleSet:
    """Principal angles plus squared-cosine alignments and their total."""

    thetas: np.ndarray
    gamma_sq: np.ndarray
    tail_sum: float


def principal_angles(u, v) -> AngleSet:
    """Principal angles between the column spans of u (m x r1) and v (m x r2).

    Requires r1 <= r2 and orthonormal columns on both sides. Angles are
    arccos of the singular values of u^T v (clamped into [0, 1] to absorb
    roundoff), reported non-decreasing; ``gamma_sq`` holds the squared
    cosines and ``tail_sum`` their total, which equals ||u^T v||_F^2.
    """
    a = _check_orthonormal(u, "u")
    b = _check_orthonormal(v, "v")
    if a.shape[0] != b.shape[0]:
        raise ValueError("u and v must have the same number of rows")
    if a.shape[1] > b.shape[1]:
        raise ValueError(f"need r1 <= r2, got r1={a.shape[1]}, r2={b.shape[1]}")
    cosines = np.clip(singular_values(a.T @ b), 0.0, 1.0)
    thetas = np.arccos(cosines)
    gamma_sq = cosines**2
    return AngleSet(thetas=thetas, gamma_sq=gamma_sq, tail_sum=float(np.sum(gamma_sq)))


def gamma_tail(u_bar, r: int) -> AngleSet:
    """Trailing alignments of a rotated frame: gamma_i^2 for i = r+1..m.

    ``gamma_sq`` holds the squared row norms of rows r+1..m of U_bar and
    ``tail_sum`` their total; ``thetas`` are the principal angles between
    span(U_bar) and the trailing coordinate subspace, so that
    tail_sum == sum cos^2(theta).
    """
    ub = _check_orthonormal(u_bar, "u_bar")
    m, rc = ub.shape
    if not 1 <= r <= rc or r > m:
        raise ValueError(f"invalid r={r} for a {m}x{rc} frame")
    rows = ub[r:, :]
    gamma_sq = np.einsum("ij,ij->i", rows, rows)
    cosines = np.clip(singular_values(rows), 0.0, 1.0)
    thetas = np.sort(np.arccos(cosines))
    return AngleSet(thetas=thetas, gamma_sq=gamma_sq, tail_sum=float(np.sum(gamma_sq)))


def gamma_tilde(u_bar, r: int) -> np.ndarray:
    """Upper bounds gamma~_i^2 >= gamma_i^2 for i = r+1..m.

    gamma~_i^2 = ||e_i^T U_bar (E_r^T U_bar)^{-1}||^2. The top block
    E_r^T U_bar must be well conditioned; at or near a saddle it is
    singular and the bound is undefined.
    """
    ub = _check_orthonormal(u_bar, "u_bar")
    top = ub[:r, :]
    if float(singular_values(top)[-1]) <= 1e-10:
        raise ValueError(
            "top block E_r^T U_bar is singular: frame is at/near a saddle, bound undefined"
        )
    y = np.linalg.solve(top.T, ub[r:, :].T).T  # rows i>r of U_bar (top)^{-1}
    return np.einsum("ij,ij->i", y, y)


@dataclass(frozen=True)
class ZetaCoordinates:
    """Noise-rescaled coordinates zeta_ij = eta^{-1/2} (U_bar V)_{ij}.

    ``q`` is the orthogonal factor of U_bar(0)^T Lambda U_bar(0) = Q^T D Q
    (so Q = V^T), ``lam_tilde`` its eigenvalues sorted non-increasing, and
    ``zeta`` the full m x r coordinate matrix. By orthogonality of V,
    gamma_i^2 == eta * sum_j zeta_ij^2 for every row i.
    """

    q: np.ndarray
    lam_tilde: np.ndarray
    zeta: np.ndarray
    eta: float


def zeta_transform(u_bar, u_bar0, truth: SpectralTruth, eta: float) -> ZetaCoordinates:
    """Rescaled coordinates of ``u_bar`` anchored at ``u_bar0``."""
    if not eta > 0:
        raise ValueError("eta must be positive")
    ub = _check_orthonormal(u_bar, "u_bar")
    ub0 = _check_orthonormal(u_bar0, "u_bar0")
    if ub.shape != ub0.shape:
        raise ValueError("u_bar and u_bar0 must have matching shapes")
    lam = truth.eigvals
    anchor = ub0.T @ (lam[:, None] * ub0)
    lam_tilde, v = sym_eig((anchor + anchor.T) / 2.0)
    zeta = (ub @ v) / math.sqrt(eta)
    return ZetaCoordinates(q=v.T, lam_tilde=lam_tilde, zeta=zeta, eta=eta)


def ode_rates(truth: SpectralTruth, r: int) -> np.ndarray:
    """Boundary decay rates 2*(lambda_i - lambda_r) for i = r+1..m."""
    lam = truth.eigvals
    return 2.0 * (lam[r:] - lam[r - 1])


def ode_reference(gamma_tilde0, b, t: float) -> np.ndarray:
    """Closed-form exponential reference: gamma~^2(t) = gamma~^2(0) exp(b t)."""
    if t < 0:
        raise ValueError("t must be >= 0")
    g0 = np.asarray(gamma_tilde0, dtype=np.float64)
    rates = np.broadcast_to(np.asarray(b, dtype=np.float64), g0.shape)
    return g0 * np.exp(rates * t)


@dataclass(frozen=True)
class OUReference:
    """Ornstein-Uhlenbeck reference d z = K z dt + G dB from a point start."""

    k_drift: float
    g_diff: float
    initial: float = 0.0

    def __post_init__(self):
        if not self.g_diff > 0:
            raise ValueError("g_diff must be positive")


def ou_moments(ref: OUReference, t) -> tuple:
    """Mean and variance of the O-U reference at time(s) t >= 0.

    mean(t) = z0 e^{Kt}; var(t) = G^2/(2K) (e^{2Kt} - 1), valid for either
    sign of K, with the K -> 0 limit G^2 t.
    """
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0):
        raise ValueError("t must be >= 0")
    k, g = ref.k_drift, ref.g_diff
    mean = ref.initial * np.exp(k * t)
    if k == 0.0:
        var = g**2 * t
    else:
        var = g**2 / (2.0 * k) * np.expm1(2.0 * k * t)
    if np.ndim(var) == 0:
        return float(mean), float(var)
    return mean, var


# --- standard normal quantile ------------------------------------------------

_ACKLAM_A = (
    -3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
    1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00,
)
_ACKLAM_B = (
    -5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
    6.680131188771972e01, -1.328068155288572e01,
)
_ACKLAM_C = (
    -7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
    -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00,
)
_ACKLAM_D = (
    7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
    3.754408661907416e00,
)


def inverse_normal_cdf(p: float) -> float:
    """Quantile of the standard normal distribution.

    Rational initial guess (Acklam's coefficients) sharpened by one Halley
    step through erfc; absolute error is far below 1.5e-7 over (0, 1).
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must be in (0, 1), got {p}")
    a, b, c, d = _ACKLAM_A, _ACKLAM_B, _ACKLAM_C, _ACKLAM_D
    p_low = 0.02425
    if p < p_low:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / (
            (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0
        )
    elif p <= 1.0 - p_low:
        q = p - 0.5
        s = q * q
        x = (((((a[0] * s + a[1]) * s + a[2]) * s + a[3]) * s + a[4]) * s + a[5]) * q / (
            ((((b[0] * s + b[1]) * s + b[2]) * s + b[3]) * s + b[4]) * s + 1.0
        )
    else:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / (
            (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0
        )
    # One Halley refinement.
    err = 0.5 * math.erfc(-x / math.sqrt(2.0)) - p
    u = err * math.sqrt(2.0 * math.pi) * math.exp(x * x / 2.0)
    return x - u / (1.0 + x * u / 2.0)


@dataclass(frozen=True)
class StageTimePrediction:
    """Exact evaluation of the three stage-time formulas.

    T1 is the saddle-escape time, T2 the traverse time, T3 the final
    convergence time; S_i = round(T_i / eta) are the iteration counts and
    ``n_samples`` = (S1+S2+S3) * h the sample complexity.
    """

    t1: float
    t2: float
    t3: float
    s1: int
    s2: int
    s3: int
    n_samples: int
    eta: float
    delta: float
    nu: float
    eps: float
    eigengap: float
    g_rr: float
    g_m: float
    r: int

    @property
    def total_time(self) -> float:
        return self.t1 + self.t2 + self.t3


def stage_times(
    eigs,
    r: int,
    eta: float,
    delta: float,
    nu: float,
    eps: float,
    g_rr: float,
    g_m: float,
    h: int = 1,
) -> StageTimePrediction:
    """Evaluate the closed-form stage times for the given problem constants.

    With gap = lambda_r - lambda_{r+1}:

        T1 = log(K + 1) / (2 gap),
             K = 2 gap delta^2 / (eta * Phi^{-1}((1-nu/2)/2)^2 * g_rr^2)
        T2 = log(sqrt(1 - delta^2) / delta^2) / gap
        T3 = log(8 gap delta^2 / (gap eps - 4 eta r g_m)) / (2 gap)

    Raises if the eigengap is not positive or if ``gap*eps <= 4*eta*r*g_m``
    (the accuracy target is infeasible for this step size).
    """
    lam = np.asarray(eigs, dtype=np.float64)
    if lam.size <= r:
        raise ValueError("need at least r+1 eigenvalues")
    if np.any(np.diff(lam) > 1e-12):
        raise ValueError("eigenvalues must be sorted non-increasing")
    gap = float(lam[r - 1] - lam[r])
    if not gap > 0:
        raise ValueError(f"eigengap must be positive, got {gap}")
    if not (eta > 0 and 0 < delta < 1 and 0 < nu < 1 and eps > 0 and g_rr > 0 and g_m > 0):
        raise ValueError("eta, delta, nu, eps, g_rr, g_m must be positive (delta, nu in (0,1))")

    delta_sq = delta * delta
    phi_q = inverse_normal_cdf((1.0 - nu / 2.0) / 2.0)
    big_k = 2.0 * gap * delta_sq / (eta * phi_q**2 * g_rr**2)
    t1 = math.log1p(big_k) / (2.0 * gap)
    t2 = math.log(math.sqrt(1.0 - delta_sq) / delta_sq) / gap
    denom = gap * eps - 4.0 * eta * r * g_m
    if denom <= 0.0:
        raise ValueError(
            f"eps too small for this eta: gap*eps - 4*eta*r*g_m = {denom:.3e} <= 0"
        )
    t3 = math.log(8.0 * gap * delta_sq / denom) / (2.0 * gap)
    s1, s2, s3 = (int(round(t / eta)) for t in (t1, t2, t3))
    return StageTimePrediction(
        t1=t1, t2=t2, t3=t3, s1=s1, s2=s2, s3=s3,
        n_samples=(s1 + s2 + s3) * int(h),
        eta=eta, delta=delta, nu=nu, eps=eps,
        eigengap=gap, g_rr=g_rr, g_m=g_m, r=r,
    )


def stage_label(
    gamma_r_sq: float,
    tail_sum: float,
    delta_sq: float,
    tail_threshold: float | None = None,
) -> int:
    """Stage of a trajectory point: 3 once tail <= the tail threshold
    (default delta^2), 1 while the r-th alignment is below delta^2, else 2."""
    return _stage_of(gamma_r_sq, tail_sum, delta_sq, tail_threshold)


# --- replicate ensembles -----------------------------------------------------

@dataclass
class ZetaSeries:
    """Moments of one rescaled coordinate across a replicate ensemble."""

    i: int
    j: int
    stage: int
    anchor_index: int
    s: np.ndarray
    t: np.ndarray  # time since the anchor record
    mean: np.ndarray
    var: np.ndarray
    skew: np.ndarray
    exkurt: np.ndarray
    k_drift: float
    g_est: float
    ou_mean: np.ndarray
    ou_var: np.ndarray
    gaussian_ok: bool


@dataclass
class EnsembleReport:
    """Cross-replicate statistics on a shared recording grid."""

    n_replicates: int
    eta: float
    s: np.ndarray
    t: np.ndarray
    tail_mean: np.ndarray
    tail_lo: np.ndarray
    tail_hi: np.ndarray
    series: list

    def to_json(self, path) -> None:
        payload = {
            "n_replicates": self.n_replicates,
            "eta": self.eta,
            "s": self.s.tolist(),
            "tail_mean": self.tail_mean.tolist(),
            "tail_lo": self.tail_lo.tolist(),
            "tail_hi": self.tail_hi.tolist(),
            "series": [
                {
                    "i": z.i,
                    "j": z.j,
                    "stage": z.stage,
                    "anchor_index": z.anchor_index,
                    "t": z.t.tolist(),
                    "mean": z.mean.tolist(),
                    "var": z.var.tolist(),
                    "skew": z.skew.tolist(),
                    "exkurt": z.exkurt.tolist(),
                    "k_drift": z.k_drift,
                    "g_est": z.g_est,
                    "gaussian_ok": z.gaussian_ok,
                }
                for z in self.series
            ],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")

    def series_to_csv(self, path, series: ZetaSeries) -> None:
        tail_window = slice(series.anchor_index, series.anchor_index + series.t.size)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["t", "mean_zeta", "var_zeta", "ou_mean", "ou_var",
                 "tail_mean", "tail_lo", "tail_hi"]
            )
            for n in range(series.t.size):
                writer.writerow([
                    repr(float(series.t[n])),
                    repr(float(series.mean[n])),
                    repr(float(series.var[n])),
                    repr(float(series.ou_mean[n])),
                    repr(float(series.ou_var[n])),
                    repr(float(self.tail_mean[tail_window][n])),
                    repr(float(self.tail_lo[tail_window][n])),
                    repr(float(self.tail_hi[tail_window][n])),
                ])


def _require_aligned(records) -> np.ndarray:
    grid = records[0].s
    for rec in records[1:]:
        if rec.s.shape != grid.shape or np.any(rec.s != grid):
            raise ValueError("misaligned recording grids across replicates")
    return grid


def _moments(samples: np.ndarray) -> tuple:
    """Mean, variance, skewness, excess kurtosis along axis 0 (plain
    moment statistics, no small-sample corrections)."""
    mean = samples.mean(axis=0)
    centered = samples - mean
    m2 = np.mean(centered**2, axis=0)
    m3 = np.mean(centered**3, axis=0)
    m4 = np.mean(centered**4, axis=0)
    safe = np.where(m2 > 0, m2, 1.0)
    skew = np.where(m2 > 0, m3 / safe**1.5, 0.0)
    exkurt = np.where(m2 > 0, m4 / safe**2 - 3.0, 0.0)
    return mean, m2, skew, exkurt


def _stage1_window(records, grid) -> tuple:
    ends = []
    for rec in records:
        not1 = np.nonzero(rec.stage != 1)[0]
        ends.append(int(not1[0]) if not1.size else grid.size)
    end = min(ends)
    if end < 2:
        raise ValueError("no usable stage-1 window: a replicate leaves stage 1 immediately")
    return 0, end


def _stage3_anchor(records) -> int:
    starts = []
    for n, rec in enumerate(records):
        in3 = np.nonzero(rec.stage == 3)[0]
        if not in3.size:
            raise ValueError(f"replicate {n} never reached stage 3")
        starts.append(int(in3[0]))
    return max(starts)


def _zeta_paths(records, truth, eta, i, j, anchor_index, end_index) -> tuple:
    """Per-replicate zeta_ij series over [anchor, end), with the anchor
    eigenbasis computed per replicate. Returns (paths, lam_tilde_j_mean)."""
    paths = np.empty((len(records), end_index - anchor_index))
    lam_j = np.empty(len(records))
    lam = truth.eigvals
    sqrt_eta = math.sqrt(eta)
    for n, rec in enumerate(records):
        ub0 = rec.u_bar[anchor_index]
        anchor = ub0.T @ (lam[:, None] * ub0)
        lam_tilde, v = sym_eig((anchor + anchor.T) / 2.0)
        col = v[:, j - 1]
        paths[n] = rec.u_bar[anchor_index:end_index, i - 1, :] @ col / sqrt_eta
        lam_j[n] = lam_tilde[j - 1]
    return paths, float(lam_j.mean())


def ensemble_stats(records, truth: SpectralTruth, eta: float, zeta_coords=()) -> EnsembleReport:
    """Cross-replicate moments of selected rescaled coordinates.

    ``zeta_coords`` is a sequence of (i, j, stage) triples with 1-based
    indices; stage 1 anchors the coordinate frame at the first record and
    uses the window before any replicate leaves stage 1, stage 3 anchors
    at the first record where every replicate has entered stage 3 and uses
    the window from there to the end. Each series carries an O-U overlay
    whose drift is lambda_i - lambda~_j from the anchor decomposition and
    whose diffusion level is estimated from the first-gap increments.

    Requires at least 30 replicates recorded on identical iteration grids,
    with rotated-frame snapshots present.
    """
    records = list(records)
    if len(records) < 30:
        raise ValueError(f"need at least 30 replicates, got {len(records)}")
    for rec in records:
        if rec.u_bar is None:
            raise ValueError("records must carry diagnostics (run with truth)")
    grid = _require_aligned(records)
    t_grid = grid.astype(np.float64) * eta

    tails = np.stack([rec.tail_sum for rec in records])
    tail_mean = tails.mean(axis=0)
    tail_se = tails.std(axis=0, ddof=1) / math.sqrt(len(records))

    series = []
    for (i, j, stage) in zeta_coords:
        if stage == 1:
            a0, end = _stage1_window(records, grid)
        elif stage == 3:
            a0, end = _stage3_anchor(records), grid.size
        else:
            raise ValueError(f"stage must be 1 or 3, got {stage}")
        if end - a0 < 2:
            raise ValueError(f"window for zeta_({i},{j}) in stage {stage} is too short")
        paths, lam_tilde_j = _zeta_paths(records, truth, eta, i, j, a0, end)
        mean, var, skew, exkurt = _moments(paths)
        t_rel = t_grid[a0:end] - t_grid[a0]

        k_drift = float(truth.eigvals[i - 1] - lam_tilde_j)
        dt0 = t_rel[1] - t_rel[0]
        g_sq = float(np.var(paths[:, 1] - paths[:, 0], ddof=1) / dt0)
        g_est = math.sqrt(max(g_sq, 1e-300))
        ref = OUReference(k_drift=k_drift, g_diff=g_est, initial=float(mean[0]))
        ou_mean, ou_var = ou_moments(ref, t_rel)
        # Propagate the anchor variance through the O-U recursion.
        ou_var = ou_var + var[0] * np.exp(2.0 * k_drift * t_rel)
        gauss_ok = bool(
            abs(skew[-1]) < SKEWNESS_BAND and abs(exkurt[-1]) < EXCESS_KURTOSIS_BAND
        )
        series.append(
            ZetaSeries(
                i=i, j=j, stage=stage, anchor_index=a0,
                s=grid[a0:end].copy(), t=t_rel,
                mean=mean, var=var, skew=skew, exkurt=exkurt,
                k_drift=k_drift, g_est=g_est,
                ou_mean=np.asarray(ou_mean), ou_var=np.asarray(ou_var),
                gaussian_ok=gauss_ok,
            )
        )

    return EnsembleReport(
        n_replicates=len(records),
        eta=eta,
        s=grid.copy(),
        t=t_grid,
        tail_mean=tail_mean,
        tail_lo=tail_mean - 2.0 * tail_se,
        tail_hi=tail_mean + 2.0 * tail_se,
        series=series,
    )


def estimate_zeta_drift(records, truth: SpectralTruth, eta: float, i: int, j: int) -> tuple:
    """Regressed drift of zeta_ij over the shared stage-3 window.

    Pools consecutive record pairs across replicates, fits the through-
    origin AR coefficient beta of zeta_{n+1} on zeta_n, and maps it to a
    drift estimate K = log(beta)/dt. Returns (k_hat, se_k).
    """
    records = list(records)
    grid = _require_aligned(records)
    a0 = _stage3_anchor(records)
    if grid.size - a0 < 3:
        raise ValueError("stage-3 window too short for drift regression")
    paths, _ = _zeta_paths(records, truth, eta, i, j, a0, grid.size)
    dt = float(grid[a0 + 1] - grid[a0]) * eta
    x = paths[:, :-1].ravel()
    y = paths[:, 1:].ravel()
    sxx = float(x @ x)
    beta = float(x @ y) / sxx
    resid = y - beta * x
    se_beta = math.sqrt(float(resid @ resid) / (x.size - 1) / sxx)
    if beta <= 0:
        raise ValueError("AR coefficient is non-positive; window too coarse for drift")
    k_hat = math.log(beta) / dt
    se_k = se_beta / (beta * dt)
    return k_hat, se_k
