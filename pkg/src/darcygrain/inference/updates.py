"""Closed-form mean-field updates and the evidence lower bound.

Each ``update_q_*`` is the exact coordinate-ascent optimum of its factor given
the current moments of all others, so with frozen latent caches a full sweep
can only increase the bound.  ``elbo`` evaluates the bound exactly (up to
data-independent constants it includes anyway); ``elbo_compact`` is the short
form valid after a full sweep, whose terms split into per-cell contributions
used as refinement scores.
"""

from __future__ import annotations

import numpy as np
from scipy.special import digamma, gammaln

from ..errors import ValidationError
from .state import VariationalState

LOG2PI = float(np.log(2.0 * np.pi))


# ---------------------------------------------------------------------------
# model densities
# ---------------------------------------------------------------------------

def encoder_logpdf(lambda_c, phi, theta, tau_c) -> float:
    """Sum over cells of log N(lambda_m | theta_m . phi_m, 1/tau_m)."""
    lambda_c = np.asarray(lambda_c, dtype=float)
    tau_c = np.asarray(tau_c, dtype=float)
    if np.any(tau_c <= 0):
        raise ValidationError("encoder precisions must be positive")
    mean = np.einsum("mj,mj->m", np.asarray(theta, dtype=float), np.asarray(phi, dtype=float))
    resid = lambda_c - mean
    return float(0.5 * np.sum(np.log(tau_c) - LOG2PI - tau_c * resid**2))


def decoder_logpdf(uf, uc, tau_cf, W) -> float:
    """log N(uf | W uc, diag(1/tau_cf))."""
    tau_cf = np.asarray(tau_cf, dtype=float)
    if np.any(tau_cf <= 0):
        raise ValidationError("decoder precisions must be positive")
    resid = np.asarray(uf, dtype=float) - W @ np.asarray(uc, dtype=float)
    return float(0.5 * np.sum(np.log(tau_cf) - LOG2PI - tau_cf * resid**2))


# ---------------------------------------------------------------------------
# expected residuals shared by updates and the bound
# ---------------------------------------------------------------------------

def encoder_expected_sq_residuals(state: VariationalState) -> np.ndarray:
    """(N, M) values of <(lambda_m - theta_m . phi_m)^2> over Q(lambda)Q(theta)."""
    phi = state.phi_stack()  # (N, M, J)
    lam_mean = state.lam_mean_stack()  # (N, M)
    lam_sq = state.lam_sq_stack()
    mu_t = state.encoder.mu_theta  # (M, J)
    var_t = state.encoder.var_theta
    mean = np.einsum("nmj,mj->nm", phi, mu_t)
    lam_var = np.maximum(lam_sq - lam_mean**2, 0.0)
    cross_var = np.einsum("nmj,mj->nm", phi**2, var_t)
    return (lam_mean - mean) ** 2 + lam_var + cross_var


def decoder_expected_sq_residuals(state: VariationalState) -> np.ndarray:
    """(N, dim_uf) values of <(uf - W uc)_i^2> from the cached output moments."""
    uf = state.uf_stack()
    v_mean = state.v_mean_stack()
    v_sq = state.v_sq_stack()
    v_var = np.maximum(v_sq - v_mean**2, 0.0)
    return (uf - v_mean) ** 2 + v_var


# ---------------------------------------------------------------------------
# closed-form coordinate updates
# ---------------------------------------------------------------------------

def update_q_gamma(state: VariationalState) -> VariationalState:
    enc = state.encoder
    h = state.hyper
    if enc.tied_gamma:
        enc.gamma_shape = h.a + state.n_cells / 2.0
        enc.gamma_rate = h.b + 0.5 * enc.exp_theta_sq.sum(axis=0)
    else:
        enc.gamma_shape = h.a + 0.5
        enc.gamma_rate = h.b + 0.5 * enc.exp_theta_sq
    return state


def update_q_tau_c(state: VariationalState) -> VariationalState:
    enc = state.encoder
    h = state.hyper
    enc.tau_c_shape = h.c + state.n_samples / 2.0
    enc.tau_c_rate = h.d + 0.5 * encoder_expected_sq_residuals(state).sum(axis=0)
    return state


def update_q_tau_cf(state: VariationalState) -> VariationalState:
    dec = state.decoder
    h = state.hyper
    dec.tau_cf_shape = h.e + state.n_samples / 2.0
    dec.tau_cf_rate = h.f + 0.5 * decoder_expected_sq_residuals(state).sum(axis=0)
    return state


def update_q_theta(state: VariationalState) -> VariationalState:
    """Coordinate-wise Gaussian updates, sweeping features in fixed order."""
    enc = state.encoder
    phi = state.phi_stack()  # (N, M, J)
    lam_mean = state.lam_mean_stack()  # (N, M)
    tau_c = enc.exp_tau_c  # (M,)
    gamma = enc.gamma_per_cell()  # (M, J)
    sum_phi_sq = np.einsum("nmj,nmj->mj", phi, phi)  # (M, J)

    mu = enc.mu_theta
    var = enc.var_theta
    # residual r_nm = <lambda_nm> - phi_nm . mu_m, maintained through the sweep
    resid = lam_mean - np.einsum("nmj,mj->nm", phi, mu)
    for j in range(state.n_features):
        phi_j = phi[:, :, j]  # (N, M)
        var_j = 1.0 / (tau_c * sum_phi_sq[:, j] + gamma[:, j])  # (M,)
        numer = tau_c * np.einsum("nm,nm->m", phi_j, resid + phi_j * mu[:, j])
        mu_new = var_j * numer
        resid += phi_j * (mu[:, j] - mu_new)
        mu[:, j] = mu_new
        var[:, j] = var_j
    return state


# ---------------------------------------------------------------------------
# evidence lower bound
# ---------------------------------------------------------------------------

def _gamma_entropy(shape: float, rate: np.ndarray) -> float:
    rate = np.atleast_1d(rate)
    return float(
        np.sum(shape - np.log(rate) + gammaln(shape) + (1.0 - shape) * digamma(shape))
    )


def elbo(state: VariationalState) -> float:
    """Exact bound value for the current state (any factor configuration)."""
    h = state.hyper
    enc = state.encoder
    dec = state.decoder
    N = state.n_samples
    M = state.n_cells
    J = state.n_features
    duf = state.dim_uf

    exp_log_tau_cf = digamma(dec.tau_cf_shape) - np.log(dec.tau_cf_rate)  # (duf,)
    exp_tau_cf = dec.exp_tau_cf
    exp_log_tau_c = digamma(enc.tau_c_shape) - np.log(enc.tau_c_rate)  # (M,)
    exp_tau_c = enc.exp_tau_c
    exp_log_gamma = digamma(enc.gamma_shape) - np.log(enc.gamma_rate)  # (J,) or (M,J)
    exp_gamma = enc.exp_gamma

    r_dec = decoder_expected_sq_residuals(state)  # (N, duf)
    t_dec = (
        0.5 * N * exp_log_tau_cf.sum()
        - 0.5 * N * duf * LOG2PI
        - 0.5 * float(exp_tau_cf @ r_dec.sum(axis=0))
    )

    r_enc = encoder_expected_sq_residuals(state)  # (N, M)
    t_enc = (
        0.5 * N * exp_log_tau_c.sum()
        - 0.5 * N * M * LOG2PI
        - 0.5 * float(exp_tau_c @ r_enc.sum(axis=0))
    )

    theta_sq = enc.exp_theta_sq  # (M, J)
    if enc.tied_gamma:
        t_theta = (
            0.5 * M * exp_log_gamma.sum()
            - 0.5 * M * J * LOG2PI
            - 0.5 * float(exp_gamma @ theta_sq.sum(axis=0))
        )
        t_gamma_prior = float(
            np.sum(h.a * np.log(h.b) - gammaln(h.a) + (h.a - 1.0) * exp_log_gamma - h.b * exp_gamma)
        )
        h_gamma = _gamma_entropy(enc.gamma_shape, enc.gamma_rate)
    else:
        t_theta = float(
            np.sum(0.5 * exp_log_gamma - 0.5 * LOG2PI - 0.5 * exp_gamma * theta_sq)
        )
        t_gamma_prior = float(
            np.sum(h.a * np.log(h.b) - gammaln(h.a) + (h.a - 1.0) * exp_log_gamma - h.b * exp_gamma)
        )
        h_gamma = _gamma_entropy(enc.gamma_shape, enc.gamma_rate)

    t_tau_c_prior = float(
        np.sum(h.c * np.log(h.d) - gammaln(h.c) + (h.c - 1.0) * exp_log_tau_c - h.d * exp_tau_c)
    )
    t_tau_cf_prior = float(
        np.sum(h.e * np.log(h.f) - gammaln(h.e) + (h.e - 1.0) * exp_log_tau_cf - h.f * exp_tau_cf)
    )

    log_sigma_lam = np.stack([lat.log_sigma for lat in state.latents])
    h_lam = float(np.sum(0.5 * (LOG2PI + 1.0) + log_sigma_lam))
    h_theta = float(np.sum(0.5 * (LOG2PI + 1.0) + 0.5 * np.log(enc.var_theta)))
    h_tau_c = _gamma_entropy(enc.tau_c_shape, enc.tau_c_rate)
    h_tau_cf = _gamma_entropy(dec.tau_cf_shape, dec.tau_cf_rate)

    return (
        t_dec
        + t_enc
        + t_theta
        + t_gamma_prior
        + t_tau_c_prior
        + t_tau_cf_prior
        + h_lam
        + h_theta
        + h_gamma
        + h_tau_c
        + h_tau_cf
    )


def elbo_compact(state: VariationalState) -> float:
    """Short-form bound (constants dropped), valid after a full update sweep."""
    enc = state.encoder
    dec = state.decoder
    log_sigma_lam = np.stack([lat.log_sigma for lat in state.latents])
    value = (
        -dec.tau_cf_shape * float(np.log(dec.tau_cf_rate).sum())
        + float(log_sigma_lam.sum())
        - enc.tau_c_shape * float(np.log(enc.tau_c_rate).sum())
        - enc.gamma_shape * float(np.log(enc.gamma_rate).sum())
        + 0.5 * float(np.log(enc.var_theta).sum())
    )
    return value


def elbo_per_cell(state: VariationalState) -> np.ndarray:
    """Per-cell additive contributions of the compact bound (the cell scores)."""
    enc = state.encoder
    log_sigma_lam = np.stack([lat.log_sigma for lat in state.latents])  # (N, M)
    scores = (
        log_sigma_lam.sum(axis=0)
        - enc.tau_c_shape * np.log(enc.tau_c_rate)
        + 0.5 * np.log(enc.var_theta).sum(axis=1)
    )
    if not enc.tied_gamma:
        scores = scores - enc.gamma_shape * np.log(enc.gamma_rate).sum(axis=1)
    return scores


def elbo_cell_free_terms(state: VariationalState) -> float:
    """Compact-bound terms that carry no cell index (decomposition remainder)."""
    dec = state.decoder
    enc = state.encoder
    value = -dec.tau_cf_shape * float(np.log(dec.tau_cf_rate).sum())
    if enc.tied_gamma:
        value -= enc.gamma_shape * float(np.log(enc.gamma_rate).sum())
    return value
