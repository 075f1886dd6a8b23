from .bbvi import AdamConfig, bbvi_update_latents, fit_latent, objective_and_grads, refresh_moments
from .state import (
    DecoderPosterior,
    EncoderPosterior,
    HyperPriorConfig,
    LatentMoments,
    LatentPosterior,
    TrainingSample,
    VariationalState,
)
from .train import (
    TrainConfig,
    TrainedModel,
    build_training_samples,
    cache_eps_draws,
    init_state,
    load_model,
    models_by_bc,
    outer_iteration,
    save_model,
    state_to_json,
    train,
)
from .updates import (
    decoder_logpdf,
    elbo,
    elbo_cell_free_terms,
    elbo_compact,
    elbo_per_cell,
    encoder_logpdf,
    update_q_gamma,
    update_q_tau_c,
    update_q_tau_cf,
    update_q_theta,
)

__all__ = [
    "AdamConfig",
    "HyperPriorConfig",
    "EncoderPosterior",
    "DecoderPosterior",
    "LatentPosterior",
    "LatentMoments",
    "TrainingSample",
    "VariationalState",
    "TrainConfig",
    "TrainedModel",
    "train",
    "init_state",
    "outer_iteration",
    "models_by_bc",
    "cache_eps_draws",
    "build_training_samples",
    "save_model",
    "load_model",
    "state_to_json",
    "encoder_logpdf",
    "decoder_logpdf",
    "update_q_theta",
    "update_q_gamma",
    "update_q_tau_c",
    "update_q_tau_cf",
    "elbo",
    "elbo_compact",
    "elbo_per_cell",
    "elbo_cell_free_terms",
    "bbvi_update_latents",
    "fit_latent",
    "objective_and_grads",
    "refresh_moments",
]
