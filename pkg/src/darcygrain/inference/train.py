"""Training loop: per-sample latent fits, then the closed-form factor sweep.

One outer iteration runs the (parallel) latent updates, refreshes the moment
caches once, then applies the coefficient, relevance, encoder-noise and
decoder-noise updates in that order.  The bound is recorded per iteration;
convergence is declared after a window of small relative changes.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .. import cgm
from ..errors import TrainingDivergedError, ValidationError
from ..features.ops import Region, effective_medium
from ..rng import substream
from .bbvi import AdamConfig, bbvi_update_latents
from .state import (
    DecoderPosterior,
    EncoderPosterior,
    HyperPriorConfig,
    LatentPosterior,
    TrainingSample,
    VariationalState,
)
from .updates import (
    elbo,
    update_q_gamma,
    update_q_tau_c,
    update_q_tau_cf,
    update_q_theta,
)

log = logging.getLogger("darcygrain.train")

INIT_SIGMA_LAM = 0.5


@dataclass(frozen=True)
class TrainConfig:
    hyper: HyperPriorConfig = field(default_factory=HyperPriorConfig)
    adam: AdamConfig = field(default_factory=AdamConfig)
    max_outer: int = 500
    elbo_rel_tol: float = 1e-5
    tol_window: int = 5
    moment_samples: int = 100
    tie_gamma: bool = True
    seed: int = 0
    workers: int = 1
    track_update_elbos: bool = False  # per-update bound values (costly, for audits)


def models_by_bc(model: cgm.CoarseModel, samples) -> dict:
    out = {}
    for s in samples:
        if s.bc not in out:
            out[s.bc] = model if s.bc == model.bc else model.with_bc(s.bc)
    return out


def _init_mu_lambda(sample: TrainingSample, partition: cgm.Partition) -> np.ndarray:
    """Warm start from the per-cell effective-medium permeability when the
    microstructure is available, otherwise zero."""
    if sample.micro is None:
        return np.zeros(partition.n_cells)
    res = sample.micro.resolution
    out = np.empty(partition.n_cells)
    for m, box in enumerate(partition.cell_boxes()):
        k = effective_medium(sample.micro.pixels, Region.from_domain(box, res), kind="maxwell")
        out[m] = np.log(max(k, 1e-6))
    return out


def init_state(samples, model: cgm.CoarseModel, config: TrainConfig) -> VariationalState:
    config.hyper.validate()
    samples = sorted(samples, key=lambda s: s.sample_id)
    ids = [s.sample_id for s in samples]
    if len(set(ids)) != len(ids):
        raise ValidationError("sample_id values must be unique")
    n = len(samples)
    if n == 0:
        raise ValidationError("training requires a nonempty dataset")
    m_cells = model.n_cells
    j_feat = samples[0].phi.shape[1]
    h = config.hyper

    encoder = EncoderPosterior(
        mu_theta=np.zeros((m_cells, j_feat)),
        var_theta=np.ones((m_cells, j_feat)),
        gamma_shape=(h.a + m_cells / 2.0) if config.tie_gamma else (h.a + 0.5),
        gamma_rate=np.full(j_feat if config.tie_gamma else (m_cells, j_feat), h.b + 0.5),
        tau_c_shape=h.c + n / 2.0,
        tau_c_rate=np.full(m_cells, h.d + 0.5),
        tied_gamma=config.tie_gamma,
    )
    decoder = DecoderPosterior(
        tau_cf_shape=h.e + n / 2.0,
        tau_cf_rate=np.full(samples[0].uf.size, h.f + 0.5),
    )
    latents = [
        LatentPosterior(
            mu=_init_mu_lambda(s, model.partition),
            log_sigma=np.full(m_cells, np.log(INIT_SIGMA_LAM)),
        )
        for s in samples
    ]
    return VariationalState(
        hyper=h,
        encoder=encoder,
        decoder=decoder,
        latents=latents,
        samples=samples,
        feature_ids=None,
    )


def cache_eps_draws(state: VariationalState, config: TrainConfig) -> dict:
    """Common random numbers for the moment caches, one block per sample."""
    return {
        s.sample_id: substream(config.seed, "cache", s.sample_id).standard_normal(
            (config.moment_samples, state.n_cells)
        )
        for s in state.samples
    }


def outer_iteration(
    state: VariationalState,
    models: dict,
    config: TrainConfig,
    eps_caches: dict,
    outer_iter: int,
) -> VariationalState:
    bbvi_update_latents(
        state,
        models,
        config.adam,
        root_seed=config.seed,
        outer_iter=outer_iter,
        eps_caches=eps_caches,
        workers=config.workers,
    )
    if config.track_update_elbos:
        values = {"after_bbvi": elbo(state)}
        for name, fn in (
            ("theta", update_q_theta),
            ("gamma", update_q_gamma),
            ("tau_c", update_q_tau_c),
            ("tau_cf", update_q_tau_cf),
        ):
            fn(state)
            values[f"after_{name}"] = elbo(state)
        state.update_elbos.append(values)
    else:
        update_q_theta(state)
        update_q_gamma(state)
        update_q_tau_c(state)
        update_q_tau_cf(state)
    state.n_outer += 1
    return state


def _converged(trace, tol: float, window: int) -> bool:
    if tol is None or len(trace) < window + 1:
        return False
    recent = trace[-(window + 1) :]
    scale = max(abs(recent[-1]), 1.0)
    return all(abs(recent[i + 1] - recent[i]) / scale < tol for i in range(window))


def train(dataset, model: cgm.CoarseModel, config: TrainConfig = TrainConfig()) -> VariationalState:
    """Run Algorithm-style training to convergence; returns the fitted state."""
    state = init_state(dataset, model, config)
    models = models_by_bc(model, state.samples)
    eps_caches = cache_eps_draws(state, config)

    for it in range(config.max_outer):
        outer_iteration(state, models, config, eps_caches, it)
        value = elbo(state)
        if not np.isfinite(value):
            dump = _dump_diagnostics(state)
            raise TrainingDivergedError(f"bound became non-finite at iteration {it}; {dump}")
        state.elbo_trace.append(value)
        if _converged(state.elbo_trace, config.elbo_rel_tol, config.tol_window):
            log.info("converged after %d outer iterations (elbo %.6g)", it + 1, value)
            break
    else:
        log.info("stopped at max_outer=%d (elbo %.6g)", config.max_outer, state.elbo_trace[-1])
    return state


def _dump_diagnostics(state: VariationalState) -> str:
    import tempfile

    payload = {
        "elbo_trace": state.elbo_trace,
        "tau_c_rate": state.encoder.tau_c_rate.tolist(),
        "gamma_rate": np.asarray(state.encoder.gamma_rate).tolist(),
        "mu_lambda": [lat.mu.tolist() for lat in state.latents],
    }
    fh = tempfile.NamedTemporaryFile(
        "w", prefix="dgrain_diverged_", suffix=".json", delete=False
    )
    json.dump(payload, fh)
    fh.close()
    return f"diagnostics dumped to {fh.name}"


# ---------------------------------------------------------------------------
# model state (de)serialization
# ---------------------------------------------------------------------------

def state_to_json(state: VariationalState, model: cgm.CoarseModel, registry=None, config=None) -> dict:
    doc = {
        "format": "darcygrain-model-v1",
        "n_el": model.n_el,
        "fine_grid": model.fine_grid,
        "partition": model.partition.to_json(),
        "hyper": vars(state.hyper).copy(),
        "tied_gamma": state.encoder.tied_gamma,
        "encoder": {
            "mu_theta": state.encoder.mu_theta.tolist(),
            "var_theta": state.encoder.var_theta.tolist(),
            "gamma_shape": state.encoder.gamma_shape,
            "gamma_rate": np.asarray(state.encoder.gamma_rate).tolist(),
            "tau_c_shape": state.encoder.tau_c_shape,
            "tau_c_rate": state.encoder.tau_c_rate.tolist(),
        },
        "decoder": {
            "tau_cf_shape": state.decoder.tau_cf_shape,
            "tau_cf_rate": state.decoder.tau_cf_rate.tolist(),
        },
        "latents": [
            {
                "sample_id": s.sample_id,
                "mu": lat.mu.tolist(),
                "log_sigma": lat.log_sigma.tolist(),
                "bc": list(s.bc),
            }
            for s, lat in zip(state.samples, state.latents)
        ],
        "elbo_trace": state.elbo_trace,
        "feature_ids": state.feature_ids,
        "registry": [spec.to_dict() for spec in registry] if registry else None,
        "train_config": _config_echo(config) if config else None,
    }
    return doc


def _config_echo(config: TrainConfig) -> dict:
    return {
        "max_outer": config.max_outer,
        "elbo_rel_tol": config.elbo_rel_tol,
        "tol_window": config.tol_window,
        "moment_samples": config.moment_samples,
        "tie_gamma": config.tie_gamma,
        "seed": config.seed,
        "adam": vars(config.adam).copy(),
        "hyper": vars(config.hyper).copy(),
    }


def save_model(path, state, model, registry=None, config=None) -> None:
    with open(path, "w") as fh:
        json.dump(state_to_json(state, model, registry, config), fh)


@dataclass
class TrainedModel:
    """Deserialized posterior plus the coarse discretization it was fit on."""

    partition: cgm.Partition
    n_el: int
    fine_grid: int
    hyper: HyperPriorConfig
    encoder: EncoderPosterior
    decoder: DecoderPosterior
    latents: list
    sample_ids: list
    elbo_trace: list
    feature_ids: list | None
    registry: list | None

    def coarse_model(self, bc) -> cgm.CoarseModel:
        return cgm.CoarseModel(self.n_el, self.partition, bc, self.fine_grid)


def load_model(path) -> TrainedModel:
    from ..features.registry import FeatureSpec

    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != "darcygrain-model-v1":
        raise ValidationError(f"{path}: unknown model format {doc.get('format')!r}")
    enc = doc["encoder"]
    dec = doc["decoder"]
    encoder = EncoderPosterior(
        mu_theta=np.array(enc["mu_theta"]),
        var_theta=np.array(enc["var_theta"]),
        gamma_shape=enc["gamma_shape"],
        gamma_rate=np.array(enc["gamma_rate"]),
        tau_c_shape=enc["tau_c_shape"],
        tau_c_rate=np.array(enc["tau_c_rate"]),
        tied_gamma=doc["tied_gamma"],
    )
    decoder = DecoderPosterior(
        tau_cf_shape=dec["tau_cf_shape"],
        tau_cf_rate=np.array(dec["tau_cf_rate"]),
    )
    latents = [
        LatentPosterior(mu=np.array(l["mu"]), log_sigma=np.array(l["log_sigma"]))
        for l in doc["latents"]
    ]
    registry = None
    if doc.get("registry"):
        registry = [FeatureSpec.from_dict(d) for d in doc["registry"]]
    return TrainedModel(
        partition=cgm.Partition.from_json(doc["partition"]),
        n_el=doc["n_el"],
        fine_grid=doc["fine_grid"],
        hyper=HyperPriorConfig(**doc["hyper"]),
        encoder=encoder,
        decoder=decoder,
        latents=latents,
        sample_ids=[l["sample_id"] for l in doc["latents"]],
        elbo_trace=doc["elbo_trace"],
        feature_ids=doc.get("feature_ids"),
        registry=registry,
    )


def build_training_samples(data_samples, partition: cgm.Partition, registry) -> list:
    """Assemble feature matrices for ingested (micro, field) pairs."""
    from ..features.registry import assemble_feature_matrix

    out = []
    feature_ids = None
    for ds in data_samples:
        fm = assemble_feature_matrix(ds.micro, partition, registry)
        if feature_ids is None:
            feature_ids = fm.column_ids
        out.append(
            TrainingSample(
                sample_id=ds.index,
                uf=ds.field.values,
                phi=fm.values,
                bc=ds.field.bc,
                micro=ds.micro,
            )
        )
    return out
