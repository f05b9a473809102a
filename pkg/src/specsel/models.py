"""Candidate network model families and their samplers.

Six families are supported:

* ``Bernoulli`` -- iid dyads with edge probability logistic(theta1).
* ``Sbm`` -- stochastic block model with fixed or random memberships.
* ``LpmEuclidean`` / ``LpmBilinear`` -- latent position models: node
  positions drawn N(0, sigma2 * I) in R^dim, edge log-odds
  theta - ||z_i - z_j|| (Euclidean) or theta + z_i . z_j (bilinear).
* ``GwespErgm`` -- curved exponential family with an edge term and
  geometrically weighted edgewise shared partner statistics, sampled by
  Metropolis dyad toggles using local change statistics.
* ``DirectedDyad`` -- directed dyad-independent model with density and
  reciprocity terms; sampled exactly per dyad.

Every sampler is a deterministic function of (spec, generator state):
the same seed reproduces the same graph bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Iterator, Union

import numpy as np
from numba import njit

from .graphs import Graph

_U64 = np.uint64
_GOLDEN = _U64(0x9E3779B97F4A7C15)
_MIX1 = _U64(0xBF58476D1CE4E5B9)
_MIX2 = _U64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0

WEIGHT_VARIANTS = ("standard", "paper-literal")


def logistic(x: float) -> float:
    """Numerically stable logistic function; handles +-inf."""
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def _logistic_array(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _dyad_count(n: int) -> int:
    return n * (n - 1) // 2


# ---------------------------------------------------------------------------
# Model specifications
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class McmcConfig:
    """Metropolis chain settings; None means the n-dependent default.

    Defaults: burn_in = 20 * C(n,2) dyad-toggle proposals, thin =
    5 * C(n,2) proposals between retained samples.
    """

    burn_in: int | None = None
    thin: int | None = None

    def __post_init__(self):
        if self.burn_in is not None and self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if self.thin is not None and self.thin < 1:
            raise ValueError("thin must be >= 1")

    def resolved(self, n: int) -> tuple[int, int]:
        nd = _dyad_count(n)
        burn = 20 * nd if self.burn_in is None else self.burn_in
        thin = 5 * nd if self.thin is None else self.thin
        return burn, thin


def _check_n(n: int) -> None:
    if n < 2:
        raise ValueError("model needs n >= 2 nodes")


@dataclass(frozen=True)
class Bernoulli:
    n: int
    theta1: float

    def __post_init__(self):
        _check_n(self.n)


@dataclass(frozen=True)
class Sbm:
    """Stochastic block model with K blocks.

    Exactly one of ``blocks`` (explicit 0-indexed membership per node) or
    ``block_probs`` (membership distribution, drawn fresh per sample) must
    be given.  ``prob_matrix`` is the symmetric K-by-K edge probability
    matrix, stored as nested tuples so specs stay hashable.
    """

    n: int
    prob_matrix: tuple[tuple[float, ...], ...]
    blocks: tuple[int, ...] | None = None
    block_probs: tuple[float, ...] | None = None

    def __post_init__(self):
        _check_n(self.n)
        pm = tuple(tuple(float(p) for p in row) for row in self.prob_matrix)
        object.__setattr__(self, "prob_matrix", pm)
        k = len(pm)
        if k == 0 or any(len(row) != k for row in pm):
            raise ValueError("prob_matrix must be square and non-empty")
        arr = np.array(pm)
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("prob_matrix entries must lie in [0, 1]")
        if not np.allclose(arr, arr.T):
            raise ValueError("prob_matrix must be symmetric")
        if (self.blocks is None) == (self.block_probs is None):
            raise ValueError("give exactly one of blocks / block_probs")
        if self.blocks is not None:
            b = tuple(int(x) for x in self.blocks)
            object.__setattr__(self, "blocks", b)
            if len(b) != self.n:
                raise ValueError(f"blocks must list {self.n} memberships")
            if any(not 0 <= x < k for x in b):
                raise ValueError(f"block ids must lie in 0..{k - 1}")
        else:
            q = tuple(float(x) for x in self.block_probs)
            object.__setattr__(self, "block_probs", q)
            if len(q) != k:
                raise ValueError("block_probs length must match prob_matrix")
            if any(x < 0 for x in q) or not math.isclose(sum(q), 1.0, abs_tol=1e-9):
                raise ValueError("block_probs must be a probability vector")

    @property
    def k(self) -> int:
        return len(self.prob_matrix)

    @classmethod
    def equal_blocks(cls, n: int, k: int, p_in: float, p_out: float) -> "Sbm":
        """K equal-size blocks (remainder spread over the first blocks)."""
        if k < 1:
            raise ValueError("need k >= 1 blocks")
        sizes = [n // k + (1 if b < n % k else 0) for b in range(k)]
        blocks = tuple(b for b, s in enumerate(sizes) for _ in range(s))
        pm = tuple(tuple(p_in if a == b else p_out for b in range(k))
                   for a in range(k))
        return cls(n=n, prob_matrix=pm, blocks=blocks)


@dataclass(frozen=True)
class LpmEuclidean:
    n: int
    theta: float
    dim: int
    sigma2: float = 1.0

    def __post_init__(self):
        _check_n(self.n)
        if self.dim < 1:
            raise ValueError("latent dimension must be >= 1")
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")


@dataclass(frozen=True)
class LpmBilinear:
    n: int
    theta: float
    dim: int
    sigma2: float = 1.0

    def __post_init__(self):
        _check_n(self.n)
        if self.dim < 1:
            raise ValueError("latent dimension must be >= 1")
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")


@dataclass(frozen=True)
class GwespErgm:
    n: int
    theta1: float
    theta2: float
    theta3: float
    weight_variant: str = "standard"
    mcmc: McmcConfig = field(default_factory=McmcConfig)

    def __post_init__(self):
        _check_n(self.n)
        if self.weight_variant not in WEIGHT_VARIANTS:
            raise ValueError(f"unknown weight_variant {self.weight_variant!r}; "
                             f"expected one of {WEIGHT_VARIANTS}")
        if self.theta3 <= -math.log(2.0):
            raise ValueError("theta3 must exceed -log(2) (stability region)")


@dataclass(frozen=True)
class DirectedDyad:
    n: int
    theta1: float
    theta2: float

    def __post_init__(self):
        _check_n(self.n)


ModelSpec = Union[Bernoulli, Sbm, LpmEuclidean, LpmBilinear, GwespErgm, DirectedDyad]

_FAMILIES: dict[str, type] = {
    "bernoulli": Bernoulli,
    "sbm": Sbm,
    "lpm_euclidean": LpmEuclidean,
    "lpm_bilinear": LpmBilinear,
    "gwesp_ergm": GwespErgm,
    "directed_dyad": DirectedDyad,
}
_FAMILY_OF = {cls: tag for tag, cls in _FAMILIES.items()}


def is_directed(spec: ModelSpec) -> bool:
    return isinstance(spec, DirectedDyad)


def family_name(spec: ModelSpec) -> str:
    return _FAMILY_OF[type(spec)]


def spec_to_json(spec: ModelSpec) -> dict:
    """JSON-ready dict with a ``family`` tag; inverse of :func:`spec_from_json`."""
    out: dict = {"family": family_name(spec)}
    for f in fields(spec):
        value = getattr(spec, f.name)
        if isinstance(spec, Sbm) and value is None:
            continue
        if isinstance(value, McmcConfig):
            value = {"burn_in": value.burn_in, "thin": value.thin}
            value = {k: v for k, v in value.items() if v is not None}
        elif isinstance(value, tuple):
            value = [list(v) if isinstance(v, tuple) else v for v in value]
        out[f.name] = value
    return out


def spec_from_json(obj: dict) -> ModelSpec:
    """Parse a model spec dict; unknown families or fields are rejected."""
    if not isinstance(obj, dict):
        raise ValueError(f"model spec must be an object, got {type(obj).__name__}")
    if "family" not in obj:
        raise ValueError("model spec is missing the 'family' field")
    tag = obj["family"]
    cls = _FAMILIES.get(tag)
    if cls is None:
        raise ValueError(f"unknown model family {tag!r}; "
                         f"expected one of {sorted(_FAMILIES)}")
    allowed = {f.name for f in fields(cls)}
    extra = set(obj) - allowed - {"family"}
    if extra:
        raise ValueError(f"unknown field(s) {sorted(extra)} for family {tag!r}")
    kwargs = {}
    for f in fields(cls):
        if f.name not in obj:
            continue
        value = obj[f.name]
        if f.name == "mcmc":
            if not isinstance(value, dict):
                raise ValueError("'mcmc' must be an object")
            bad = set(value) - {"burn_in", "thin"}
            if bad:
                raise ValueError(f"unknown mcmc field(s) {sorted(bad)}")
            value = McmcConfig(**value)
        elif f.name == "prob_matrix":
            value = tuple(tuple(row) for row in value)
        elif f.name in ("blocks", "block_probs") and value is not None:
            value = tuple(value)
        kwargs[f.name] = value
    return cls(**kwargs)


# ---------------------------------------------------------------------------
# Dyad-independent samplers
# ---------------------------------------------------------------------------

def _fill_upper(n: int, mask: np.ndarray) -> np.ndarray:
    adj = np.zeros((n, n), dtype=np.uint8)
    iu = np.triu_indices(n, 1)
    adj[iu] = mask.astype(np.uint8)
    adj |= adj.T
    return adj


def sample_bernoulli(n: int, theta1: float, rng: np.random.Generator) -> Graph:
    """Erdos-Renyi draw with edge probability logistic(theta1)."""
    _check_n(n)
    p = logistic(theta1)
    mask = rng.random(_dyad_count(n)) < p
    return Graph(n, False, _fill_upper(n, mask))


def sample_sbm(spec: Sbm, rng: np.random.Generator) -> Graph:
    """Block-model draw; memberships fixed or drawn from block_probs."""
    if spec.blocks is not None:
        b = np.asarray(spec.blocks, dtype=np.int64)
    else:
        b = rng.choice(spec.k, size=spec.n, p=np.asarray(spec.block_probs))
    pm = np.asarray(spec.prob_matrix, dtype=np.float64)
    iu = np.triu_indices(spec.n, 1)
    probs = pm[b[iu[0]], b[iu[1]]]
    mask = rng.random(probs.size) < probs
    return Graph(spec.n, False, _fill_upper(spec.n, mask))


def sample_lpm(spec: LpmEuclidean | LpmBilinear, rng: np.random.Generator) -> Graph:
    """Latent position draw; positions are re-drawn for every sample."""
    z = rng.normal(0.0, math.sqrt(spec.sigma2), size=(spec.n, spec.dim))
    if isinstance(spec, LpmEuclidean):
        diff = z[:, None, :] - z[None, :, :]
        kernel = -np.sqrt((diff * diff).sum(axis=2))
    else:
        kernel = z @ z.T
    iu = np.triu_indices(spec.n, 1)
    probs = _logistic_array(spec.theta + kernel[iu])
    mask = rng.random(probs.size) < probs
    return Graph(spec.n, False, _fill_upper(spec.n, mask))


def dyad_state_probs(theta1: float, theta2: float) -> np.ndarray:
    """Exact probabilities of the four states (00, 10, 01, 11) of a dyad."""
    w = np.array([1.0, math.exp(theta1), math.exp(theta1),
                  math.exp(2.0 * theta1 + theta2 / 2.0)])
    return w / w.sum()


def sample_directed_dyad(spec: DirectedDyad, rng: np.random.Generator) -> Graph:
    """Exact draw: each unordered dyad takes one of 4 states independently."""
    probs = dyad_state_probs(spec.theta1, spec.theta2)
    cut = np.cumsum(probs)[:3]
    states = np.searchsorted(cut, rng.random(_dyad_count(spec.n)), side="right")
    adj = np.zeros((spec.n, spec.n), dtype=np.uint8)
    iu, ju = np.triu_indices(spec.n, 1)
    fwd = (states == 1) | (states == 3)
    bwd = (states == 2) | (states == 3)
    adj[iu[fwd], ju[fwd]] = 1
    adj[ju[bwd], iu[bwd]] = 1
    return Graph(spec.n, True, adj)


# ---------------------------------------------------------------------------
# Shared partner statistics and GWESP weights
# ---------------------------------------------------------------------------

def sp_histogram(g: Graph) -> np.ndarray:
    """counts[t] = number of edges whose endpoints share exactly t partners.

    Length n-1 (t = 0 .. n-2); index 0 counts edges with no shared partner.
    """
    if g.directed:
        raise ValueError("shared partner statistics are for undirected graphs")
    a = g.adj.astype(np.int64)
    common = a @ a
    iu = np.triu_indices(g.n, 1)
    on_edges = common[iu][a[iu] == 1]
    return np.bincount(on_edges, minlength=max(g.n - 1, 1))[:max(g.n - 1, 1)]


def sp_count(g: Graph, t: int) -> int:
    """Number of edges between nodes with exactly t mutual connections."""
    if not 1 <= t <= g.n - 2:
        raise ValueError(f"t must lie in 1..{g.n - 2}, got {t}")
    return int(sp_histogram(g)[t])


def gwesp_weight(theta2: float, theta3: float, t: int, variant: str = "standard") -> float:
    """Weight applied to the count of edges with exactly t shared partners.

    ``standard`` is the geometrically weighted form
    theta2 * e^theta3 * (1 - (1 - e^-theta3)^t); ``paper-literal`` is the
    pure geometric decay theta2 * e^theta3 * e^(-theta3 * t).
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    if variant == "standard":
        return theta2 * math.exp(theta3) * (1.0 - (1.0 - math.exp(-theta3)) ** t)
    if variant == "paper-literal":
        return theta2 * math.exp(theta3) * math.exp(-theta3 * t)
    raise ValueError(f"unknown weight variant {variant!r}; "
                     f"expected one of {WEIGHT_VARIANTS}")


def gwesp_weight_table(n: int, theta2: float, theta3: float,
                       variant: str = "standard") -> np.ndarray:
    """eta[t] for t = 0..n-2 with eta[0] = 0 (edges without shared partners)."""
    eta = np.zeros(max(n - 1, 1), dtype=np.float64)
    for t in range(1, n - 1):
        eta[t] = gwesp_weight(theta2, theta3, t, variant)
    return eta


def gwesp_statistic(g: Graph, theta2: float, theta3: float,
                    variant: str = "standard") -> float:
    """Sum over t of weight(t) * SP_t(g)."""
    eta = gwesp_weight_table(g.n, theta2, theta3, variant)
    return float(eta @ sp_histogram(g))


@njit(cache=True)
def _splitmix_next(state):
    state = state + _GOLDEN
    z = state
    z = (z ^ (z >> _U64(30))) * _MIX1
    z = (z ^ (z >> _U64(27))) * _MIX2
    z = z ^ (z >> _U64(31))
    return state, z


@njit(cache=True)
def _gwesp_add_delta(adj, eta, i, j, buf):
    """Change in the GWESP statistic from adding edge (i, j); needs adj[i,j]=0.

    The new edge enters with its shared-partner count, and each edge from
    i or j to a common neighbour gains one shared partner.
    """
    n = adj.shape[0]
    cn = 0
    for h in range(n):
        if adj[i, h] == 1 and adj[j, h] == 1:
            buf[cn] = h
            cn += 1
    delta = eta[cn]
    for t in range(cn):
        h = buf[t]
        c_ih = 0
        c_jh = 0
        for w in range(n):
            if adj[h, w] == 1:
                if adj[i, w] == 1:
                    c_ih += 1
                if adj[j, w] == 1:
                    c_jh += 1
        delta += eta[c_ih + 1] - eta[c_ih]
        delta += eta[c_jh + 1] - eta[c_jh]
    return delta


@njit(cache=True)
def _list_add(nbr, pos, deg, u, v):
    nbr[u, deg[u]] = v
    pos[u, v] = deg[u]
    deg[u] += 1


@njit(cache=True)
def _list_remove(nbr, pos, deg, u, v):
    k = pos[u, v]
    last = nbr[u, deg[u] - 1]
    nbr[u, k] = last
    pos[u, last] = k
    deg[u] -= 1


@njit(cache=True)
def _ergm_toggles(adj, cn, nbr, pos, deg, eta, theta1, steps, state):
    """Run Metropolis dyad-toggle proposals in place; returns the RNG state.

    ``cn`` holds common-neighbour counts and ``nbr``/``pos``/``deg`` are
    adjacency lists, all kept consistent with ``adj`` across accepted
    toggles.  A proposal then costs one scan over the sparser endpoint's
    neighbours plus O(shared partners) table lookups.
    """
    n = adj.shape[0]
    un = _U64(n)
    for _ in range(steps):
        while True:
            state, z = _splitmix_next(state)
            i = np.int64(z % un)
            state, z = _splitmix_next(state)
            j = np.int64(z % un)
            if i != j:
                break
        state, z = _splitmix_next(state)
        logu = np.log((z >> _U64(11)) * _INV53)
        removing = adj[i, j] == 1
        # GWESP change; cn[i, j] and the common-neighbour set do not depend
        # on the toggled entry itself, but for the flanking edges (i, h)
        # and (j, h) the stored counts include the edge when present, so
        # their shared-partner counts step down on removal.
        nc = cn[i, j]
        gdelta = eta[nc]
        if nc > 0:
            a = i if deg[i] <= deg[j] else j
            b = j if a == i else i
            if removing:
                for t in range(deg[a]):
                    h = nbr[a, t]
                    if adj[b, h] == 1:
                        gdelta += eta[cn[i, h]] - eta[cn[i, h] - 1]
                        gdelta += eta[cn[j, h]] - eta[cn[j, h] - 1]
            else:
                for t in range(deg[a]):
                    h = nbr[a, t]
                    if adj[b, h] == 1:
                        gdelta += eta[cn[i, h] + 1] - eta[cn[i, h]]
                        gdelta += eta[cn[j, h] + 1] - eta[cn[j, h]]
        delta = -(theta1 + gdelta) if removing else theta1 + gdelta
        if logu < delta:
            # accepted: flip the edge and refresh counts and lists,
            # updating cn from lists that exclude the toggled edge itself
            if removing:
                adj[i, j] = 0
                adj[j, i] = 0
                _list_remove(nbr, pos, deg, i, j)
                _list_remove(nbr, pos, deg, j, i)
                for t in range(deg[i]):
                    w = nbr[i, t]
                    cn[j, w] -= 1
                    cn[w, j] -= 1
                for t in range(deg[j]):
                    w = nbr[j, t]
                    cn[i, w] -= 1
                    cn[w, i] -= 1
            else:
                for t in range(deg[i]):
                    w = nbr[i, t]
                    cn[j, w] += 1
                    cn[w, j] += 1
                for t in range(deg[j]):
                    w = nbr[j, t]
                    cn[i, w] += 1
                    cn[w, i] += 1
                adj[i, j] = 1
                adj[j, i] = 1
                _list_add(nbr, pos, deg, i, j)
                _list_add(nbr, pos, deg, j, i)
    return state


def gwesp_change(g: Graph, i: int, j: int, theta2: float, theta3: float,
                 variant: str = "standard") -> float:
    """Change in the GWESP statistic from toggling dyad (i, j).

    Computed locally from the neighbourhoods of i and j; equals
    statistic(toggled) - statistic(g) exactly.
    """
    if g.directed:
        raise ValueError("gwesp_change is for undirected graphs")
    if i == j or not (0 <= i < g.n and 0 <= j < g.n):
        raise ValueError(f"invalid dyad ({i}, {j})")
    eta = gwesp_weight_table(g.n, theta2, theta3, variant)
    adj = g.adj.copy()
    buf = np.empty(g.n, dtype=np.int64)
    if adj[i, j] == 1:
        adj[i, j] = 0
        adj[j, i] = 0
        return -float(_gwesp_add_delta(adj, eta, i, j, buf))
    return float(_gwesp_add_delta(adj, eta, i, j, buf))


class ErgmChain:
    """A single Metropolis chain over graphs for a :class:`GwespErgm` spec.

    The chain starts at the empty graph.  ``advance`` runs toggle proposals
    in place; ``current`` snapshots the state.  Sampling helpers below
    handle burn-in and thinning.
    """

    def __init__(self, spec: GwespErgm, seed: int):
        self.spec = spec
        n = spec.n
        self._adj = np.zeros((n, n), dtype=np.uint8)
        self._cn = np.zeros((n, n), dtype=np.int64)
        self._nbr = np.zeros((n, n), dtype=np.int64)
        self._pos = np.zeros((n, n), dtype=np.int64)
        self._deg = np.zeros(n, dtype=np.int64)
        self._eta = gwesp_weight_table(n, spec.theta2, spec.theta3,
                                       spec.weight_variant)
        self._state = _U64(seed & ((1 << 64) - 1))
        self.toggles_run = 0

    def advance(self, toggles: int) -> None:
        if toggles < 0:
            raise ValueError("toggle count must be >= 0")
        # numba hands uint64 back as a Python int; rewrap so the next call
        # dispatches on the uint64 signature again
        self._state = _U64(_ergm_toggles(self._adj, self._cn, self._nbr,
                                         self._pos, self._deg, self._eta,
                                         self.spec.theta1, toggles, self._state))
        self.toggles_run += toggles

    def current(self) -> Graph:
        return Graph(self.spec.n, False, self._adj.copy())


def ergm_sample_stream(spec: GwespErgm, rng: np.random.Generator,
                       count: int) -> Iterator[Graph]:
    """Yield ``count`` states of one chain: burn-in, then thin-spaced samples."""
    burn, thin = spec.mcmc.resolved(spec.n)
    chain = ErgmChain(spec, seed=int(rng.integers(0, 2**64, dtype=np.uint64)))
    chain.advance(burn)
    yield chain.current()
    for _ in range(count - 1):
        chain.advance(thin)
        yield chain.current()


def sample_ergm_mcmc(spec: GwespErgm, rng: np.random.Generator) -> Graph:
    """One draw from an independent chain (burn-in toggles, then snapshot)."""
    return next(ergm_sample_stream(spec, rng, 1))


def sample(spec: ModelSpec, rng: np.random.Generator) -> Graph:
    """Draw one network from any model family."""
    if isinstance(spec, Bernoulli):
        return sample_bernoulli(spec.n, spec.theta1, rng)
    if isinstance(spec, Sbm):
        return sample_sbm(spec, rng)
    if isinstance(spec, (LpmEuclidean, LpmBilinear)):
        return sample_lpm(spec, rng)
    if isinstance(spec, GwespErgm):
        return sample_ergm_mcmc(spec, rng)
    if isinstance(spec, DirectedDyad):
        return sample_directed_dyad(spec, rng)
    raise TypeError(f"unknown model spec type {type(spec).__name__}")


def with_size(spec: ModelSpec, n: int) -> ModelSpec:
    """Copy of a spec with the node count replaced (grids over n)."""
    return replace(spec, n=n)
