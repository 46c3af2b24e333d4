"""The joint probability model: link probabilities, peer-influenced adoption,
log-joint density, analytic gradients, and forward simulation.

A pair (j, i) of the pairwise influence matrix reads "sender j acting on
receiver i": entry [j, i] is (M F M^T)_{ji} masked by the sender-side
awareness/adjacency mask, so directionality lives entirely in F.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .data import Dataset, LatentState
from .transforms import transform, unflatten

PROB_EPS = 1e-12

MASK_MODES = ("awareness", "all_neighbors", "adopters_only")
NOISE_MODES = ("zero", "gaussian_unit")


@dataclass(frozen=True)
class ModelConfig:
    """Which sender mask gates pairwise influence, and how the idiosyncratic
    noise term is treated."""

    awareness_mask_mode: str = "awareness"
    noise_mode: str = "zero"

    def __post_init__(self):
        if self.awareness_mask_mode not in MASK_MODES:
            raise ValueError(f"awareness_mask_mode must be one of {MASK_MODES}")
        if self.noise_mode not in NOISE_MODES:
            raise ValueError(f"noise_mode must be one of {NOISE_MODES}")


@dataclass(frozen=True)
class InfluenceTerm:
    """per_pair[j, i] is the masked influence of sender j on receiver i;
    per_node[i] sums over senders."""

    per_node: np.ndarray
    per_pair: np.ndarray


class NonFiniteGradientError(ValueError):
    def __init__(self, coordinate):
        super().__init__(f"non-finite gradient at unconstrained coordinate {coordinate}")
        self.coordinate = coordinate


def sigmoid(x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


def sender_mask(data, config):
    """(N, N) mask with rows indexed by sender: entry [j, i] gates j -> i."""
    adj = data.adjacency.astype(float)
    if config.awareness_mask_mode == "awareness":
        return data.awareness.astype(float)[:, None] * adj
    if config.awareness_mask_mode == "adopters_only":
        return data.adoption.astype(float)[:, None] * adj
    return adj


def link_probability(state, i, j):
    """(M B M^T)_{ij}; a convex combination of B entries, hence in [0, 1]."""
    if i == j:
        raise ValueError("no self-links: i must differ from j")
    mi = state.membership[i]
    mj = state.membership[j]
    return float(mi @ state.connectivity @ mj)


def link_probability_matrix(state):
    return state.membership @ state.connectivity @ state.membership.T


def influence_term(state, data, config):
    w = state.membership @ state.influence @ state.membership.T
    per_pair = w * sender_mask(data, config)
    return InfluenceTerm(per_node=per_pair.sum(axis=0), per_pair=per_pair)


def adoption_probability(state, data, config, i, noise=0.0):
    """Sigmoid of covariate utility plus aggregated neighbor influence."""
    if config.noise_mode == "zero" and noise != 0.0:
        raise ValueError("noise must be 0 unless noise_mode is gaussian_unit")
    term = influence_term(state, data, config).per_node[i]
    eta = float(data.covariates[i] @ state.coefficients) + term + noise
    return float(sigmoid(eta))


def predict(state, data, config):
    """Adoption probability for every node with the noise term at zero."""
    eta = data.covariates @ state.coefficients + influence_term(state, data, config).per_node
    return sigmoid(eta)


def _bernoulli_loglik(prob, outcome):
    p = np.clip(prob, PROB_EPS, 1.0 - PROB_EPS)
    return outcome * np.log(p) + (1.0 - outcome) * np.log1p(-p)


def log_joint_terms(state, data, hyper, config, outcome_mask=None):
    """Named additive pieces of the log-joint; their sum is log_joint.

    outcome_mask selects which nodes' adoption terms enter the likelihood
    (used to hide held-out outcomes while the network stays fully observed).
    """
    m = np.clip(state.membership, PROB_EPS, 1.0)
    b = np.clip(state.connectivity, PROB_EPS, 1.0 - PROB_EPS)
    c = state.n_blocks
    hc = hyper.dirichlet_c

    prior_m = data.n * (math.lgamma(c * hc) - c * math.lgamma(hc)) \
        + (hc - 1.0) * float(np.sum(np.log(m)))
    prior_b = c * c * (math.lgamma(hyper.beta_a + hyper.beta_b)
                       - math.lgamma(hyper.beta_a) - math.lgamma(hyper.beta_b)) \
        + (hyper.beta_a - 1.0) * float(np.sum(np.log(b))) \
        + (hyper.beta_b - 1.0) * float(np.sum(np.log1p(-b)))
    prior_f = float(np.sum(-0.5 * math.log(2.0 * math.pi) - math.log(hyper.influence_sd)
                           - (state.influence - hyper.influence_mean) ** 2
                           / (2.0 * hyper.influence_sd ** 2)))
    prior_beta = float(np.sum(-0.5 * math.log(2.0 * math.pi) - math.log(hyper.coeff_sd)
                              - (state.coefficients - hyper.coeff_mean) ** 2
                              / (2.0 * hyper.coeff_sd ** 2)))

    p = link_probability_matrix(state)
    iu = np.triu_indices(data.n, k=1)
    links = float(np.sum(_bernoulli_loglik(p[iu], data.adjacency[iu].astype(float))))

    eta = data.covariates @ state.coefficients + influence_term(state, data, config).per_node
    per_node = _bernoulli_loglik(sigmoid(eta), data.adoption.astype(float))
    if outcome_mask is not None:
        per_node = per_node * np.asarray(outcome_mask, dtype=float)
    outcomes = float(np.sum(per_node))

    return {"prior_membership": prior_m, "prior_connectivity": prior_b,
            "prior_influence": prior_f, "prior_coefficients": prior_beta,
            "links": links, "outcomes": outcomes}


def log_joint(state, data, hyper, config, outcome_mask=None):
    """Log prior plus Bernoulli log-likelihood of the network and outcomes.

    Probabilities are clamped away from {0, 1} by 1e-12, so valid states never
    evaluate to -inf.
    """
    if data.covariates.shape[1] != state.coefficients.size:
        raise ValueError("coefficient length must match covariate columns")
    if state.membership.shape[0] != data.n:
        raise ValueError("membership rows must match dataset size")
    return float(sum(log_joint_terms(state, data, hyper, config, outcome_mask).values()))


def log_joint_gradient(u, data, hyper, config, outcome_mask=None):
    """Gradient of log_joint(transform(u)) plus the transform's log-Jacobian,
    with respect to the flat unconstrained vector.

    u may be an UnconstrainedState or an already-flat vector.
    """
    flat = u if isinstance(u, np.ndarray) else u.flatten()
    n_blocks = u.shape if isinstance(u, np.ndarray) else u.n_blocks
    if not isinstance(n_blocks, int):
        n_blocks = u.n_blocks
    _, grad = kernels.logp_and_grad(np.asarray(flat, dtype=float),
                                    *kernels.pack_arrays(data, sender_mask(data, config), outcome_mask),
                                    *kernels.pack_hyper(hyper), n_blocks)
    bad = np.nonzero(~np.isfinite(grad))[0]
    if bad.size:
        raise NonFiniteGradientError(int(bad[0]))
    return grad


def simulate_from_state(state, covariates, config, seed, awareness=None):
    """Draw a network and adoption outcomes from a fixed latent state.

    Draw order (a single seeded stream): upper-triangle edge uniforms in
    row-major (i, j < i+1...) order, then noise (if gaussian_unit), then
    adoption uniforms.
    """
    rng = np.random.default_rng(seed)
    return _simulate_outcomes(state, covariates, config, rng, awareness)


def _simulate_outcomes(state, covariates, config, rng, awareness=None):
    covariates = np.asarray(covariates, dtype=float)
    n = covariates.shape[0]
    if state.membership.shape[0] != n:
        raise ValueError("state and covariates disagree on N")
    if config.awareness_mask_mode == "adopters_only":
        raise ValueError("adopters_only is a likelihood variant, not a generative mode")
    h = np.ones(n, dtype=np.int64) if awareness is None else np.asarray(awareness, dtype=np.int64)

    p = link_probability_matrix(state)
    iu = np.triu_indices(n, k=1)
    draws = rng.random(iu[0].size)
    adjacency = np.zeros((n, n), dtype=np.int64)
    adjacency[iu] = (draws < p[iu]).astype(np.int64)
    adjacency = np.maximum(adjacency, adjacency.T)

    eps = rng.standard_normal(n) if config.noise_mode == "gaussian_unit" else np.zeros(n)

    w = state.membership @ state.influence @ state.membership.T
    mask = (h.astype(float)[:, None] * adjacency
            if config.awareness_mask_mode == "awareness" else adjacency.astype(float))
    eta = covariates @ state.coefficients + (w * mask).sum(axis=0) + eps
    adoption = (rng.random(n) < sigmoid(eta)).astype(np.int64)

    dataset = Dataset(adjacency=adjacency, covariates=covariates, adoption=adoption,
                      awareness=h)
    return dataset, state


def simulate(hyper, n, c_blocks, covariates, config, seed, awareness=None):
    """Full generative run: sample the latent state from its priors, then a
    network and outcomes. Reproducible from the seed alone."""
    if n < 2:
        raise ValueError("need n >= 2")
    if c_blocks < 1:
        raise ValueError("need c_blocks >= 1")
    covariates = np.asarray(covariates, dtype=float)
    d = covariates.shape[1]
    rng = np.random.default_rng(seed)
    membership = rng.dirichlet(np.full(c_blocks, hyper.dirichlet_c), size=n)
    connectivity = rng.beta(hyper.beta_a, hyper.beta_b, size=(c_blocks, c_blocks))
    influence = rng.normal(hyper.influence_mean, hyper.influence_sd, size=(c_blocks, c_blocks))
    coefficients = rng.normal(hyper.coeff_mean, hyper.coeff_sd, size=d)
    state = LatentState(membership=membership, connectivity=np.clip(connectivity, PROB_EPS, 1 - PROB_EPS),
                        influence=influence, coefficients=coefficients)
    return _simulate_outcomes(state, covariates, config, rng, awareness)
