"""Variational posterior containers and their expected-value caches.

All Gamma factors use the shape/rate convention.  The latent permeability
moments ``lam_*`` are analytic Gaussian moments; coarse-output moments
``uc_*`` and their fine-grid projections ``v_* = W uc`` are Monte Carlo
estimates refreshed once per outer iteration and consumed by the closed-form
updates and the training objective.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import StaleCacheError, ValidationError


@dataclass(frozen=True)
class HyperPriorConfig:
    """Gamma hyperprior constants; tiny values keep the priors uninformative
    while avoiding division by zero in the updates."""

    a: float = 1e-10
    b: float = 1e-10
    c: float = 1e-10
    d: float = 1e-10
    e: float = 1e-10
    f: float = 1e-10

    def validate(self) -> None:
        for name in "abcdef":
            if getattr(self, name) <= 0:
                raise ValidationError(f"hyperprior constant {name} must be > 0")


@dataclass
class EncoderPosterior:
    """Gaussian coefficient factors with their ARD Gamma precisions and the
    per-cell noise precision factors."""

    mu_theta: np.ndarray  # (M, J)
    var_theta: np.ndarray  # (M, J)
    gamma_shape: float
    gamma_rate: np.ndarray  # (J,) tied across cells, (M, J) untied
    tau_c_shape: float
    tau_c_rate: np.ndarray  # (M,)
    tied_gamma: bool = True

    @property
    def exp_gamma(self) -> np.ndarray:
        return self.gamma_shape / self.gamma_rate

    @property
    def exp_tau_c(self) -> np.ndarray:
        return self.tau_c_shape / self.tau_c_rate

    @property
    def exp_theta(self) -> np.ndarray:
        return self.mu_theta

    @property
    def exp_theta_sq(self) -> np.ndarray:
        return self.mu_theta**2 + self.var_theta

    def gamma_per_cell(self) -> np.ndarray:
        """<gamma> broadcast to (M, J) regardless of tying."""
        g = self.exp_gamma
        if self.tied_gamma:
            return np.broadcast_to(g, self.mu_theta.shape)
        return g


@dataclass
class DecoderPosterior:
    tau_cf_shape: float
    tau_cf_rate: np.ndarray  # (dim_uf,)

    @property
    def exp_tau_cf(self) -> np.ndarray:
        return self.tau_cf_shape / self.tau_cf_rate

    @property
    def mean_inv_tau_cf(self) -> np.ndarray:
        """<1/tau_cf> = rate/(shape-1); defined only for shape > 1."""
        if self.tau_cf_shape <= 1.0:
            raise ValidationError(
                f"mean inverse precision undefined for shape {self.tau_cf_shape} <= 1"
            )
        return self.tau_cf_rate / (self.tau_cf_shape - 1.0)


@dataclass
class LatentMoments:
    lam_mean: np.ndarray  # (M,)
    lam_sq: np.ndarray  # (M,)
    uc_mean: np.ndarray  # (n_nodes,)
    uc_sq: np.ndarray  # (n_nodes,)
    v_mean: np.ndarray  # (dim_uf,) moments of W uc
    v_sq: np.ndarray  # (dim_uf,)
    n_draws: int = 0


@dataclass
class LatentPosterior:
    """Diagonal Gaussian over one sample's cell log-permeabilities."""

    mu: np.ndarray  # (M,)
    log_sigma: np.ndarray  # (M,)
    moments: LatentMoments | None = None

    @property
    def sigma(self) -> np.ndarray:
        return np.exp(self.log_sigma)

    def set_params(self, mu: np.ndarray, log_sigma: np.ndarray) -> None:
        self.mu = np.asarray(mu, dtype=float)
        self.log_sigma = np.asarray(log_sigma, dtype=float)
        self.moments = None  # caches now stale

    def require_moments(self) -> LatentMoments:
        if self.moments is None:
            raise StaleCacheError("latent moment caches are stale; refresh them first")
        return self.moments


@dataclass
class TrainingSample:
    """One FGM input/output pair with its assembled feature rows."""

    sample_id: int
    uf: np.ndarray  # (dim_uf,)
    phi: np.ndarray  # (M, J)
    bc: tuple
    micro: object = None


@dataclass
class VariationalState:
    hyper: HyperPriorConfig
    encoder: EncoderPosterior
    decoder: DecoderPosterior
    latents: list  # [LatentPosterior] aligned with samples
    samples: list  # [TrainingSample] sorted by sample_id
    elbo_trace: list = field(default_factory=list)
    update_elbos: list = field(default_factory=list)
    n_outer: int = 0
    feature_ids: list | None = None

    def __post_init__(self):
        self.validate_dims()

    @property
    def n_samples(self) -> int:
        return len(self.samples)

    @property
    def n_cells(self) -> int:
        return self.encoder.mu_theta.shape[0]

    @property
    def n_features(self) -> int:
        return self.encoder.mu_theta.shape[1]

    @property
    def dim_uf(self) -> int:
        return self.decoder.tau_cf_rate.size

    def validate_dims(self) -> None:
        M, J = self.encoder.mu_theta.shape
        if self.encoder.var_theta.shape != (M, J):
            raise ValidationError("var_theta shape mismatch")
        if self.encoder.tau_c_rate.shape != (M,):
            raise ValidationError("tau_c rate must have one entry per cell")
        expected_gamma = (J,) if self.encoder.tied_gamma else (M, J)
        if self.encoder.gamma_rate.shape != expected_gamma:
            raise ValidationError(f"gamma rate must have shape {expected_gamma}")
        if len(self.latents) != len(self.samples):
            raise ValidationError("one latent factor per sample required")
        for lat, s in zip(self.latents, self.samples):
            if lat.mu.shape != (M,) or lat.log_sigma.shape != (M,):
                raise ValidationError("latent parameter dims do not match the partition")
            if s.phi.shape != (M, J):
                raise ValidationError(
                    f"sample {s.sample_id}: feature matrix {s.phi.shape} != ({M}, {J})"
                )
            if s.uf.shape != (self.dim_uf,):
                raise ValidationError(f"sample {s.sample_id}: uf dim mismatch")

    # ---- stacked views used by the closed-form updates --------------------

    def phi_stack(self) -> np.ndarray:
        return np.stack([s.phi for s in self.samples])  # (N, M, J)

    def uf_stack(self) -> np.ndarray:
        return np.stack([s.uf for s in self.samples])  # (N, dim_uf)

    def lam_mean_stack(self) -> np.ndarray:
        return np.stack([lat.require_moments().lam_mean for lat in self.latents])

    def lam_sq_stack(self) -> np.ndarray:
        return np.stack([lat.require_moments().lam_sq for lat in self.latents])

    def v_mean_stack(self) -> np.ndarray:
        return np.stack([lat.require_moments().v_mean for lat in self.latents])

    def v_sq_stack(self) -> np.ndarray:
        return np.stack([lat.require_moments().v_sq for lat in self.latents])

    def sigma_lam_stack(self) -> np.ndarray:
        return np.stack([lat.sigma for lat in self.latents])  # (N, M)
