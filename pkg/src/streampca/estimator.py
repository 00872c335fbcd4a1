"""Downsampled covariance estimation and empirical bias probes.

A geometrically ergodic chain forgets its state at rate rho^k, so the
conditional second moment of a sample taken h steps ahead is the stationary
covariance up to a multiplicative bias that shrinks like rho^(2h). The
block estimator here exploits that: it consumes the stream in blocks and
forms a rank-one estimate per block, either from the block-end sample
(zero-mean chains) or from the difference of two half-block samples.

For Gaussian VAR chains the conditional bias has a closed form, which the
Monte Carlo probe in this module checks empirically.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .linalg import lyapunov_stationary, sym_eig
from .timeseries import StreamHandle, VarModel, derive_stream_seed

__all__ = [
    "DownsamplePlan",
    "BiasReport",
    "var_kappa_rho",
    "block_estimate",
    "var_conditional_bias",
    "bias_probe",
]


def var_kappa_rho(model: VarModel) -> float:
    """Mixing constant kappa_rho = 1/(1 - rho) for a VAR with rho = ||A||_2."""
    return 1.0 / (1.0 - model.rho)


@dataclass(frozen=True)
class DownsamplePlan:
    """Block layout for the stream estimator.

    ``h`` is the half-block length. With ``zero_mean`` the estimator uses
    every h-th sample directly (X = z z^T, one block = h samples); otherwise
    it differences the two half-block endpoints (one block = 2h samples).
    """

    h: int
    zero_mean: bool = True
    kappa_rho: float | None = None
    tau: float | None = None

    def __post_init__(self):
        if int(self.h) != self.h or self.h < 1:
            raise ValueError(f"h must be an integer >= 1, got {self.h}")
        object.__setattr__(self, "h", int(self.h))

    @classmethod
    def from_mixing(cls, kappa_rho: float, tau: float, zero_mean: bool = True) -> "DownsamplePlan":
        """Block size h = ceil(kappa_rho * ln(1/tau)) for a target bias tau."""
        if not kappa_rho > 0:
            raise ValueError("kappa_rho must be positive")
        if not 0 < tau < 1:
            raise ValueError("tau must be in (0, 1)")
        h = max(1, math.ceil(kappa_rho * math.log(1.0 / tau)))
        return cls(h=h, zero_mean=zero_mean, kappa_rho=kappa_rho, tau=tau)

    @property
    def samples_per_block(self) -> int:
        return self.h if self.zero_mean else 2 * self.h


def block_estimate(
    stream: StreamHandle,
    plan: DownsamplePlan,
    perturbation_eps: float = 0.0,
    perturbation_rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Advance the stream by one block and return its rank-one PSD estimate.

    Zero-mean plans return z z^T from the block-end sample; general plans
    return (1/2) d d^T with d the difference of the two half-block samples.
    If ``perturbation_eps`` > 0, independent N(0, eps*I) noise is added to
    each sample before the outer product (the degenerate-covariance fix;
    the effective target becomes Sigma + eps*I).
    """
    w = _block_vector(stream, plan, perturbation_eps, perturbation_rng)
    return np.outer(w, w)


def _block_vector(stream, plan, perturbation_eps=0.0, perturbation_rng=None):
    """Factor w of the block estimate X = w w^T. Shared with the solver loop."""
    if perturbation_eps > 0.0 and perturbation_rng is None:
        raise ValueError("perturbation_eps > 0 requires perturbation_rng")
    if plan.zero_mean:
        z = stream.advance(plan.h)
        if perturbation_eps > 0.0:
            z = z + math.sqrt(perturbation_eps) * perturbation_rng.standard_normal(z.shape[0])
        return z
    z1 = stream.advance(plan.h)
    z2 = stream.advance(plan.h)
    d = (z2 - z1) / math.sqrt(2.0)
    if perturbation_eps > 0.0:
        # independent noise on each endpoint: variance eps on the scaled diff
        nu = perturbation_rng.standard_normal((2, d.shape[0]))
        d = d + math.sqrt(perturbation_eps / 2.0) * (nu[1] - nu[0])
    return d


def var_conditional_bias(model: VarModel, z0, h: int) -> np.ndarray:
    """Exact conditional bias E[z_h z_h^T | z_0] - Sigma for a Gaussian VAR.

    Equals A^h z_0 z_0^T (A^T)^h - sum_{i>=h} A^i Gamma (A^T)^i; the tail is
    accumulated until its increments are negligible (1e-14 relative).
    """
    if h < 1:
        raise ValueError("h must be >= 1")
    a = model.a
    z0 = np.asarray(z0, dtype=np.float64).reshape(model.dim)
    ah = np.linalg.matrix_power(a, h)
    state_term = ah @ np.outer(z0, z0) @ ah.T

    term = ah @ model.noise_cov @ ah.T
    tail = term.copy()
    if float(np.linalg.norm(term)) > 0.0:
        for _ in range(200_000):
            term = a @ term @ a.T
            tail += term
            if float(np.linalg.norm(term)) < 1e-14 * float(np.linalg.norm(tail)):
                break
        else:
            raise ValueError("bias tail series did not converge")
    return state_term - tail


@dataclass
class BiasReport:
    """Per-h empirical bias of the downsampled estimator, with closed forms.

    ``bias_norm`` is the operator norm of E_hat solving
    (Sigma_hat - Sigma) = E_hat Sigma, i.e. E_hat = (Sigma_hat - Sigma)
    Sigma^{-1} via the spectral inverse. If Sigma is near-singular the raw
    difference norm is reported instead and ``sigma_near_singular`` is set.
    """

    h_values: list
    bias_norm: list
    raw_diff_norm: list
    closed_form_norm: list
    empirical_bias: list
    closed_form_bias: list
    std_error: list
    log_slope: float
    sigma_near_singular: bool
    n_mc: int
    seed: int

    def to_json(self, path) -> None:
        payload = {
            "h_values": [int(h) for h in self.h_values],
            "bias_norm": [float(v) for v in self.bias_norm],
            "raw_diff_norm": [float(v) for v in self.raw_diff_norm],
            "closed_form_norm": [float(v) for v in self.closed_form_norm],
            "log_slope": float(self.log_slope),
            "sigma_near_singular": self.sigma_near_singular,
            "n_mc": self.n_mc,
            "seed": self.seed,
            "empirical_bias": [b.tolist() for b in self.empirical_bias],
            "closed_form_bias": [b.tolist() for b in self.closed_form_bias],
            "std_error": [b.tolist() for b in self.std_error],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")

    def to_csv(self, path) -> None:
        """Two-column plot file: h, bias_norm."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["h", "bias_norm"])
            for h, v in zip(self.h_values, self.bias_norm):
                writer.writerow([int(h), repr(float(v))])


def _spectral_inverse(sigma):
    vals, vecs = sym_eig(sigma)
    if vals[0] <= 0.0 or vals[-1] < 1e-10 * vals[0]:
        return None
    return vecs @ np.diag(1.0 / vals) @ vecs.T


def bias_probe(
    model: VarModel,
    h_grid,
    n_mc: int,
    seed: int,
    z0=None,
    batch: int = 20_000,
) -> BiasReport:
    """Monte Carlo estimate of the conditional bias E[z_h z_h^T | z_0] - Sigma.

    Runs ``n_mc`` independent chains from the fixed start ``z0`` (default:
    all-ones) out to max(h_grid) steps, recording the outer product at every
    h in the grid. Chains are generated in vectorized batches from one
    derived-seed generator per batch; this matches averaging n_mc
    independent streams up to floating-point summation order. Reports the
    bias operator norm per h, its Monte Carlo standard errors, the VAR
    closed form, and the fitted slope of log ||bias|| against h.
    """
    h_grid = sorted(int(h) for h in h_grid)
    if not h_grid:
        raise ValueError("h_grid must be non-empty")
    if h_grid[0] < 1:
        raise ValueError("h values must be >= 1")
    if n_mc < 1_000:
        raise ValueError("n_mc must be at least 1000")
    m = model.dim
    z0 = np.ones(m) if z0 is None else np.asarray(z0, dtype=np.float64).reshape(m)

    sigma = lyapunov_stationary(model.a, model.noise_cov)
    sigma_inv = _spectral_inverse(sigma)
    factor = model.noise_factor()

    # Accumulate sum and sum-of-squares of the outer-product entries per h.
    sums = {h: np.zeros((m, m)) for h in h_grid}
    sq_sums = {h: np.zeros((m, m)) for h in h_grid}
    h_max = h_grid[-1]
    h_set = set(h_grid)
    done = 0
    batch_index = 0
    while done < n_mc:
        nb = min(batch, n_mc - done)
        rng = np.random.Generator(np.random.PCG64(derive_stream_seed(seed, batch_index)))
        z = np.tile(z0, (nb, 1))
        for step in range(1, h_max + 1):
            z = z @ model.a.T + rng.standard_normal((nb, m)) @ factor.T
            if step in h_set:
                sums[step] += z.T @ z
                zsq = z**2
                sq_sums[step] += zsq.T @ zsq
        done += nb
        batch_index += 1

    bias_norm, raw_norm, cf_norm = [], [], []
    emp_list, cf_list, se_list = [], [], []
    for h in h_grid:
        mean_outer = sums[h] / n_mc
        second = sq_sums[h] / n_mc
        var_entries = np.clip(second - mean_outer**2, 0.0, None)
        se = np.sqrt(var_entries / n_mc)
        emp_bias = mean_outer - sigma
        cf_bias = var_conditional_bias(model, z0, h)
        raw = float(np.linalg.norm(emp_bias, 2))
        if sigma_inv is None:
            op_norm = raw
        else:
            op_norm = float(np.linalg.norm(emp_bias @ sigma_inv, 2))
        cf = float(np.linalg.norm(cf_bias, 2)) if sigma_inv is None else float(
            np.linalg.norm(cf_bias @ sigma_inv, 2)
        )
        bias_norm.append(op_norm)
        raw_norm.append(raw)
        cf_norm.append(cf)
        emp_list.append(emp_bias)
        cf_list.append(cf_bias)
        se_list.append(se)

    log_slope = _fit_log_slope(h_grid, bias_norm)
    return BiasReport(
        h_values=h_grid,
        bias_norm=bias_norm,
        raw_diff_norm=raw_norm,
        closed_form_norm=cf_norm,
        empirical_bias=emp_list,
        closed_form_bias=cf_list,
        std_error=se_list,
        log_slope=log_slope,
        sigma_near_singular=sigma_inv is None,
        n_mc=n_mc,
        seed=seed,
    )


def _fit_log_slope(h_values, norms) -> float:
    """Least-squares slope of log(norm) against h; NaN if any norm is ~0."""
    h = np.asarray(h_values, dtype=np.float64)
    v = np.asarray(norms, dtype=np.float64)
    if h.size < 2 or np.any(v <= 1e-300):
        return float("nan")
    y = np.log(v)
    hc = h - h.mean()
    denom = float(hc @ hc)
    if denom == 0.0:
        return float("nan")
    return float(hc @ (y - y.mean()) / denom)
