"""Discrete prior distributions over joint valuation/observation grids.

Independent private-value priors are discretized by evaluating the marginal
density on the grid and normalizing.  Latent-variable priors (common value,
affiliated values, correlated local bidders) have no closed-form density on
the grid and are discretized by binning Monte-Carlo draws from the latent
model to the nearest grid points.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .grids import Grid, discretize_density

DEFAULT_SAMPLE_COUNT = 1_000_000
MIN_SAMPLE_COUNT = 100_000
_BIN_CHUNK = 1 << 20


@dataclass
class DiscretePrior:
    """Probability mass over the joint discrete valuation x observation space.

    ``obs_joint`` holds the mass over the product of observation grids
    (``None`` only for independent priors too large to materialize, in which
    case the factorization through ``marginals`` is exact).  For models where
    valuations differ from observations, ``value_joints[i]`` holds the mass
    over (own valuation of agent i) x (all observations); summing out the
    value axis reproduces ``obs_joint`` exactly.
    """

    obs_grids: tuple[Grid, ...]
    val_grids: tuple[Grid, ...]
    marginals: tuple[np.ndarray, ...]
    obs_joint: np.ndarray | None
    value_joints: tuple[np.ndarray, ...] | None
    values_equal_observations: bool
    independent: bool
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    @property
    def n_agents(self) -> int:
        return len(self.obs_grids)

    def validate(self):
        n = len(self.obs_grids)
        if len(self.marginals) != n or len(self.val_grids) != n:
            raise ValueError("per-agent fields must all have one entry per agent")
        for g, m in zip(self.obs_grids, self.marginals):
            if m.shape != (g.count,):
                raise ValueError("marginal length must match observation grid")
            if np.any(m < 0) or abs(m.sum() - 1.0) > 1e-12:
                raise ValueError("marginals must be probability vectors (sum 1 within 1e-12)")
        if self.obs_joint is not None:
            if self.obs_joint.shape != tuple(g.count for g in self.obs_grids):
                raise ValueError("obs_joint shape must match observation grids")
            if abs(self.obs_joint.sum() - 1.0) > 1e-10 or np.any(self.obs_joint < 0):
                raise ValueError("obs_joint must be a probability mass (sum 1 within 1e-10)")
            for i in range(n):
                axes = tuple(a for a in range(n) if a != i)
                marg = self.obs_joint.sum(axis=axes)
                if np.max(np.abs(marg - self.marginals[i])) > 1e-8:
                    raise ValueError(f"obs_joint does not marginalize to agent {i}'s marginal")
        if self.values_equal_observations:
            if self.value_joints is not None:
                raise ValueError("private-value priors must not carry value joints")
        elif self.value_joints is not None:
            for i, vj in enumerate(self.value_joints):
                if vj.shape[0] != self.val_grids[i].count or vj.shape[1:] != self.obs_joint.shape:
                    raise ValueError(f"value joint of agent {i} has wrong shape")
                if np.max(np.abs(vj.sum(axis=0) - self.obs_joint)) > 1e-10:
                    raise ValueError(f"value joint of agent {i} does not sum back to obs_joint")

    def value_weighted_joint(self, agent: int) -> np.ndarray:
        """Observation-space mass weighted by agent's conditional-mean value.

        Returns ``sum_m v_m * J_i[m, k]`` which, for private values, is just
        ``o_k_i * obs_joint[k]``.  Exact contraction of the own-value axis for
        utilities affine in the value.
        """
        if self.obs_joint is None:
            raise ValueError("dense observation joint is not materialized for this prior")
        if self.values_equal_observations:
            n = self.n_agents
            o = self.obs_grids[agent].points
            shape = [1] * n
            shape[agent] = o.size
            return self.obs_joint * o.reshape(shape)
        vals = self.val_grids[agent].points
        return np.tensordot(vals, self.value_joints[agent], axes=(0, 0))


def _bin_counts(latent_sampler, val_grids, obs_grids, sample_count, seed,
                values_equal_observations, density_correction):
    """Accumulate bin weights of latent draws, chunked for memory.

    With ``density_correction``, draws are weighted by the inverse cell width
    on every observation axis (boundary points own half a cell on an
    equidistant grid), so the binned mass estimates density-at-the-point
    times a uniform cell volume and agrees with the density-evaluation
    recipe.  Disable it for latent models whose joint is singular (mass on
    lower-dimensional sets), where a volume correction over-weights boundary
    atoms.
    """
    n = len(obs_grids)
    obs_shape = tuple(g.count for g in obs_grids)
    obs_counts = np.zeros(int(np.prod(obs_shape)))
    boundary_factor = []
    for g in obs_grids:
        f = np.ones(g.count)
        if density_correction:
            f[0] = f[-1] = 2.0
        boundary_factor.append(f)
    val_counts = None
    if not values_equal_observations:
        val_counts = [np.zeros(val_grids[i].count * obs_counts.size) for i in range(n)]
    rng = np.random.default_rng(seed)
    done = 0
    while done < sample_count:
        m = min(_BIN_CHUNK, sample_count - done)
        values, obs = latent_sampler(rng, m)
        values = np.atleast_2d(np.asarray(values, dtype=np.float64))
        obs = np.atleast_2d(np.asarray(obs, dtype=np.float64))
        if obs.shape != (m, n) or values.shape != (m, n):
            raise ValueError("sampler must return (values, observations) of shape (size, n)")
        obs_idx = [obs_grids[i].nearest_index(obs[:, i]) for i in range(n)]
        w = boundary_factor[0][obs_idx[0]].copy()
        for i in range(1, n):
            w *= boundary_factor[i][obs_idx[i]]
        flat = np.ravel_multi_index(obs_idx, obs_shape)
        obs_counts += np.bincount(flat, weights=w, minlength=obs_counts.size)
        if val_counts is not None:
            for i in range(n):
                mi = val_grids[i].nearest_index(values[:, i])
                val_counts[i] += np.bincount(mi * obs_counts.size + flat, weights=w,
                                             minlength=val_counts[i].size)
        done += m
    return obs_counts.reshape(obs_shape), val_counts


def _group_permutations(groups, n: int):
    """All agent permutations acting within the declared symmetric groups."""
    from itertools import permutations, product

    fixed = [g for g in groups if len(g) > 1]
    perms = [tuple(range(n))]
    if fixed:
        combos = product(*[permutations(g) for g in fixed])
        perms = []
        for combo in combos:
            sigma = list(range(n))
            for g, pg in zip(fixed, combo):
                for src, dst in zip(g, pg):
                    sigma[src] = dst
            perms.append(tuple(sigma))
    return perms


def _symmetrize(obs_joint, value_joints, groups):
    """Average joints over within-group agent permutations.

    The latent models are exchangeable within the declared groups; averaging
    the binned counts over the group action makes the discrete prior exactly
    exchangeable too (so grouped agents share identical marginals) and
    reduces Monte-Carlo noise.
    """
    n = obs_joint.ndim
    perms = _group_permutations(groups, n)
    if len(perms) == 1:
        return obs_joint, value_joints
    j_sym = np.zeros_like(obs_joint)
    for sigma in perms:
        j_sym += obs_joint.transpose(sigma)
    j_sym /= len(perms)
    vj_sym = None
    if value_joints is not None:
        vj_sym = []
        for i in range(n):
            acc = np.zeros_like(value_joints[i])
            for sigma in perms:
                acc += value_joints[sigma[i]].transpose((0,) + tuple(1 + a for a in sigma))
            vj_sym.append(acc / len(perms))
        vj_sym = tuple(vj_sym)
    return j_sym, vj_sym


def joint_from_latent(sampler, val_grids, obs_grids, sample_count: int = DEFAULT_SAMPLE_COUNT,
                      seed: int = 0, *, values_equal_observations: bool = False,
                      allow_small_sample: bool = False, require_full_support: bool = True,
                      symmetry_groups=None, density_correction: bool = True,
                      meta: dict | None = None) -> DiscretePrior:
    """Empirical discrete prior from a latent-variable sampler.

    ``sampler(rng, size)`` must return ``(values, observations)`` arrays of
    shape ``(size, n)``; draws are clamped to the grid bounds and binned to
    the nearest point on every axis.  Marginals are recomputed from the
    binned joint so marginal consistency holds exactly.  Observation points
    with zero empirical mass are an error unless ``require_full_support`` is
    disabled.
    """
    if sample_count < MIN_SAMPLE_COUNT and not allow_small_sample:
        raise ValueError(f"sample_count below {MIN_SAMPLE_COUNT}; pass allow_small_sample=True "
                         "to accept a noisier prior")
    obs_grids = tuple(obs_grids)
    val_grids = tuple(val_grids) if not values_equal_observations else obs_grids
    obs_counts, val_counts = _bin_counts(sampler, val_grids, obs_grids, int(sample_count),
                                         seed, values_equal_observations,
                                         density_correction)
    total = float(obs_counts.sum())
    obs_joint = obs_counts.astype(np.float64) / total
    n = len(obs_grids)
    value_joints = None
    if val_counts is not None:
        value_joints = tuple(val_counts[i].astype(np.float64).reshape(
            (val_grids[i].count,) + obs_joint.shape) / total for i in range(n))
    if symmetry_groups:
        obs_joint, value_joints = _symmetrize(obs_joint, value_joints, symmetry_groups)
    marginals = []
    for i in range(n):
        axes = tuple(a for a in range(n) if a != i)
        m = obs_joint.sum(axis=axes)
        m /= m.sum()
        if require_full_support and np.any(m == 0):
            raise ValueError(f"agent {i} has observation grid points with zero empirical mass; "
                             "use a coarser grid or more samples")
        marginals.append(m)
    if symmetry_groups:
        # grouped agents share one strategy whose rows sum to one marginal:
        # make their (already symmetrized) marginals bitwise identical
        for g in symmetry_groups:
            for j in g[1:]:
                marginals[j] = marginals[g[0]]
    info = {"sample_count": int(sample_count), "seed": int(seed)}
    info.update(meta or {})
    return DiscretePrior(obs_grids, val_grids, tuple(marginals), obs_joint, value_joints,
                         values_equal_observations, independent=False, meta=info)


def independent_prior(obs_grids, densities, meta: dict | None = None,
                      max_dense_cells: int = 20_000_000) -> DiscretePrior:
    """Private-value prior with independent per-agent marginal densities."""
    obs_grids = tuple(obs_grids)
    marginals = tuple(discretize_density(g, d) for g, d in zip(obs_grids, densities))
    cells = np.prod([g.count for g in obs_grids], dtype=np.float64)
    joint = None
    if cells <= max_dense_cells:
        joint = marginals[0]
        for m in marginals[1:]:
            joint = np.multiply.outer(joint, m)
    return DiscretePrior(obs_grids, obs_grids, marginals, joint, None,
                         values_equal_observations=True, independent=True, meta=meta or {})


# ---------------------------------------------------------------------------
# Continuous prior models: each couples a latent/continuous sampler (used for
# evaluation in the continuous game) with its discretization recipe.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UniformMarginal:
    lower: float
    upper: float

    def density(self, x):
        return np.ones_like(np.asarray(x, dtype=np.float64))

    def sample(self, rng, size):
        return rng.uniform(self.lower, self.upper, size)


@dataclass(frozen=True)
class TruncatedGaussianMarginal:
    mu: float
    sigma: float
    lower: float
    upper: float

    def density(self, x):
        x = np.asarray(x, dtype=np.float64)
        return np.exp(-0.5 * ((x - self.mu) / self.sigma) ** 2)

    def sample(self, rng, size):
        a = (self.lower - self.mu) / self.sigma
        b = (self.upper - self.mu) / self.sigma
        return stats.truncnorm.rvs(a, b, loc=self.mu, scale=self.sigma,
                                   size=size, random_state=rng)


@dataclass(frozen=True)
class CustomDensityMarginal:
    """Marginal given by an arbitrary nonnegative density on a bounded interval."""

    fn: object
    lower: float
    upper: float
    table_size: int = 8193

    def density(self, x):
        return np.asarray(self.fn(np.asarray(x, dtype=np.float64)), dtype=np.float64)

    def _cdf_table(self):
        x = np.linspace(self.lower, self.upper, self.table_size)
        pdf = np.clip(self.density(x), 0.0, None)
        cdf = np.concatenate([[0.0], np.cumsum((pdf[1:] + pdf[:-1]) / 2 * np.diff(x))])
        if cdf[-1] <= 0:
            raise ValueError("custom density integrates to zero")
        return x, cdf / cdf[-1]

    def sample(self, rng, size):
        x, cdf = self._cdf_table()
        return np.interp(rng.random(size), cdf, x)


class IndependentPrivatePrior:
    """Independent private values: each agent observes its own valuation."""

    kind = "independent"
    values_equal_observations = True

    def __init__(self, marginal_specs):
        self.marginal_specs = tuple(marginal_specs)
        self.n_agents = len(self.marginal_specs)
        self.obs_bounds = tuple((s.lower, s.upper) for s in self.marginal_specs)
        self.val_bounds = self.obs_bounds

    def symmetry_groups(self):
        groups: dict = {}
        for i, spec in enumerate(self.marginal_specs):
            groups.setdefault(spec, []).append(i)
        return list(groups.values())

    def sample(self, rng, size):
        obs = np.column_stack([s.sample(rng, size) for s in self.marginal_specs])
        return obs, obs

    def discretize(self, obs_grids, val_grids=None, *, sample_count=DEFAULT_SAMPLE_COUNT,
                   seed=0) -> DiscretePrior:
        return independent_prior(obs_grids, [s.density for s in self.marginal_specs],
                                 meta={"kind": self.kind})


class CommonValuePrior:
    """One hidden value shared by all agents, observed through noisy signals.

    With latent uniform draws ``w`` on the unit cube, the shared value is the
    last coordinate and agent i observes ``2 * w_i * value``.
    """

    kind = "common_value"
    values_equal_observations = False

    def __init__(self, n_agents: int = 3):
        self.n_agents = n_agents
        self.obs_bounds = tuple((0.0, 2.0) for _ in range(n_agents))
        self.val_bounds = tuple((0.0, 1.0) for _ in range(n_agents))

    def symmetry_groups(self):
        return [list(range(self.n_agents))]

    def sample(self, rng, size):
        w = rng.random((size, self.n_agents + 1))
        value = w[:, self.n_agents]
        obs = 2.0 * w[:, : self.n_agents] * value[:, None]
        values = np.repeat(value[:, None], self.n_agents, axis=1)
        return values, obs

    def discretize(self, obs_grids, val_grids, *, sample_count=DEFAULT_SAMPLE_COUNT,
                   seed=0, **kwargs):
        return joint_from_latent(self.sample, val_grids, obs_grids, sample_count, seed,
                                 symmetry_groups=self.symmetry_groups(),
                                 meta={"kind": self.kind}, **kwargs)


class AffiliatedValuesPrior:
    """Two bidders with positively correlated signals and a shared value.

    Observations are ``w_i + w_3`` for independent uniform ``w``; the common
    value is the average of the individual components plus the shared one.
    """

    kind = "affiliated"
    values_equal_observations = False

    def __init__(self):
        self.n_agents = 2
        self.obs_bounds = ((0.0, 2.0), (0.0, 2.0))
        self.val_bounds = ((0.0, 2.0), (0.0, 2.0))

    def symmetry_groups(self):
        return [[0, 1]]

    def sample(self, rng, size):
        w = rng.random((size, 3))
        obs = np.column_stack([w[:, 0] + w[:, 2], w[:, 1] + w[:, 2]])
        value = 0.5 * (w[:, 0] + w[:, 1]) + w[:, 2]
        return np.repeat(value[:, None], 2, axis=1), obs

    def discretize(self, obs_grids, val_grids, *, sample_count=DEFAULT_SAMPLE_COUNT, seed=0):
        return joint_from_latent(self.sample, val_grids, obs_grids, sample_count, seed,
                                 symmetry_groups=self.symmetry_groups(),
                                 meta={"kind": self.kind})


class BernoulliWeightsLLGPrior:
    """Correlated local-bidder values for the two-local/one-global model.

    With probability ``gamma`` both locals share the common component (their
    values coincide), otherwise they draw independent uniforms; the global
    bidder's value is an independent uniform on [0, 2].  Private values.
    """

    kind = "bernoulli_llg"
    values_equal_observations = True

    def __init__(self, gamma: float):
        if not 0.0 <= gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
        self.gamma = float(gamma)
        self.n_agents = 3
        self.obs_bounds = ((0.0, 1.0), (0.0, 1.0), (0.0, 2.0))
        self.val_bounds = self.obs_bounds

    def symmetry_groups(self):
        return [[0, 1], [2]]

    def sample(self, rng, size):
        w = rng.random((size, 5))
        shared = w[:, 4] < self.gamma
        v1 = np.where(shared, w[:, 3], w[:, 0])
        v2 = np.where(shared, w[:, 3], w[:, 1])
        v3 = 2.0 * w[:, 2]
        values = np.column_stack([v1, v2, v3])
        return values, values

    def discretize(self, obs_grids, val_grids=None, *, sample_count=DEFAULT_SAMPLE_COUNT,
                   seed=0, **kwargs):
        # the shared-component mass lives on the diagonal (no joint density):
        # plain binning keeps the latent correlation intact
        return joint_from_latent(self.sample, obs_grids, obs_grids, sample_count, seed,
                                 values_equal_observations=True,
                                 symmetry_groups=self.symmetry_groups(),
                                 density_correction=False,
                                 meta={"kind": self.kind, "gamma": self.gamma}, **kwargs)


def bernoulli_weights_prior(gamma: float, grids, sample_count: int = DEFAULT_SAMPLE_COUNT,
                            seed: int = 0) -> DiscretePrior:
    """Discrete prior for the correlated-locals model at correlation ``gamma``."""
    return BernoulliWeightsLLGPrior(gamma).discretize(grids, sample_count=sample_count, seed=seed)
