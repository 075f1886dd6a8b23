"""Per-sample black-box variational updates of the latent permeability factors.

Each sample's diagonal Gaussian is fitted by stochastic ascent on the
reparametrized objective

    E_eps[ log-decoder + log-encoder ](mu + sigma*eps)  +  sum_m log sigma_m,

with gradients through the coarse solver supplied by adjoint solves and the
scale parametrized as log sigma, so positivity never needs clamping.  ADAM is
re-initialized on every call; the variational parameters warm-start from the
previous outer iteration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import SolverError
from ..parallel import pmap
from ..rng import substream
from .state import LatentMoments, LatentPosterior, VariationalState


@dataclass(frozen=True)
class AdamConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    steps: int = 100
    mc_samples: int = 10


def objective_and_grads(mu, log_sigma, eps, model, uf, tau_cf, enc_mean, enc_prec):
    """Monte Carlo value and (mu, log_sigma) gradients of the latent objective.

    eps: (S, M) standard normal draws (fixed by the caller, so the value is a
    deterministic function of the parameters; finite differences on it must
    match the returned gradients).
    """
    n_mc = eps.shape[0]
    sigma = np.exp(log_sigma)
    lam = mu[None, :] + sigma[None, :] * eps  # (S, M)
    uc, pullback = model.solve_batch_with_pullback(lam)
    v = model.W @ uc.T  # (dim_uf, S)
    np.subtract(uf[:, None], v, out=v)  # v now holds the residual
    wr = tau_cf[:, None] * v
    w_batch = (model.W_T @ wr).T  # (S, n_nodes)
    g_dec = pullback(w_batch)  # (S, M) d/d lam of the decoder term
    diff = lam - enc_mean[None, :]
    g_lam = g_dec - enc_prec[None, :] * diff

    obj = (
        -0.5 * float(np.einsum("is,is->", v, wr)) / n_mc
        - 0.5 * float(np.einsum("sm,m,sm->", diff, enc_prec, diff)) / n_mc
        + float(np.sum(log_sigma))
    )
    grad_mu = g_lam.mean(axis=0)
    grad_log_sigma = (g_lam * eps).mean(axis=0) * sigma + 1.0
    return obj, grad_mu, grad_log_sigma


def fit_latent(
    latent: LatentPosterior,
    model,
    uf: np.ndarray,
    tau_cf: np.ndarray,
    enc_mean: np.ndarray,
    enc_prec: np.ndarray,
    adam: AdamConfig,
    rng: np.random.Generator,
):
    """Run the ADAM ascent for one sample; returns (mu, log_sigma)."""
    mu = latent.mu.copy()
    rho = latent.log_sigma.copy()
    m_mu = np.zeros_like(mu)
    v_mu = np.zeros_like(mu)
    m_rho = np.zeros_like(rho)
    v_rho = np.zeros_like(rho)
    b1, b2 = adam.beta1, adam.beta2
    for t in range(1, adam.steps + 1):
        eps = rng.standard_normal((adam.mc_samples, mu.size))
        try:
            _, g_mu, g_rho = objective_and_grads(mu, rho, eps, model, uf, tau_cf, enc_mean, enc_prec)
        except SolverError:
            # one retry with fresh draws, then give up
            eps = rng.standard_normal((adam.mc_samples, mu.size))
            _, g_mu, g_rho = objective_and_grads(mu, rho, eps, model, uf, tau_cf, enc_mean, enc_prec)
        corr1 = 1.0 - b1**t
        corr2 = 1.0 - b2**t
        for g, m, v, x in ((g_mu, m_mu, v_mu, mu), (g_rho, m_rho, v_rho, rho)):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            x += adam.learning_rate * (m / corr1) / (np.sqrt(v / corr2) + adam.eps)
    return mu, rho


def refresh_moments(latent: LatentPosterior, model, eps_cache: np.ndarray) -> None:
    """Recompute the moment caches: analytic for lambda, Monte Carlo for the
    coarse output and its fine-grid projection.

    eps_cache holds common random numbers fixed per sample for the whole run,
    which keeps the evaluated bound a deterministic function of the
    variational parameters.
    """
    sigma = latent.sigma
    lam = latent.mu[None, :] + sigma[None, :] * eps_cache
    uc = model.solve_batch(lam)  # (S, n_nodes)
    v = model.W @ uc.T  # (dim_uf, S)
    latent.moments = LatentMoments(
        lam_mean=latent.mu.copy(),
        lam_sq=latent.mu**2 + sigma**2,
        uc_mean=uc.mean(axis=0),
        uc_sq=np.mean(uc**2, axis=0),
        v_mean=v.mean(axis=1),
        v_sq=np.mean(v**2, axis=1),
        n_draws=eps_cache.shape[0],
    )


def bbvi_update_latents(
    state: VariationalState,
    models_by_bc: dict,
    adam: AdamConfig,
    root_seed: int,
    outer_iter: int,
    eps_caches: dict,
    workers: int = 1,
) -> VariationalState:
    """Fit every sample's latent factor and refresh its moment caches.

    Per-sample randomness comes from substream(root, "bbvi", sample_id, iter),
    so results are identical under any worker count or sample ordering.
    """
    enc = state.encoder
    tau_cf = state.decoder.exp_tau_cf
    tau_c = enc.exp_tau_c

    def work(idx):
        sample = state.samples[idx]
        latent = state.latents[idx]
        model = models_by_bc[sample.bc]
        enc_mean = np.einsum("mj,mj->m", sample.phi, enc.mu_theta)
        rng = substream(root_seed, "bbvi", sample.sample_id, outer_iter)
        mu, rho = fit_latent(latent, model, sample.uf, tau_cf, enc_mean, tau_c, adam, rng)
        return mu, rho

    results = pmap(work, range(state.n_samples), workers=workers)
    for idx, (mu, rho) in enumerate(results):
        state.latents[idx].set_params(mu, rho)

    def refresh(idx):
        sample = state.samples[idx]
        refresh_moments(state.latents[idx], models_by_bc[sample.bc], eps_caches[sample.sample_id])
        return None

    pmap(refresh, range(state.n_samples), workers=workers)
    return state
