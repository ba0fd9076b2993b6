"""Blockmodel parameters, probability matrices, random generation, and
plug-in fits for the bootstrap null.

Three nested models over labels tau in [1..K]:

* SBM:  P_ij = omega[tau_i, tau_j]
* DCBM: P_ij = theta_i * omega[tau_i, tau_j] * theta_j, block-wise
  max theta = 1 for identifiability
* PABM: P_ij = lam[i, tau_j] * lam[j, tau_i] with an n x K popularity
  matrix lam

Generators target an expected density (or average degree) by solving for a
single multiplicative scalar; a target that would push any probability
above 1 is an error, never a silent clamp.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import IO, Union

import numpy as np

from ._seeds import derive_seed
from .errors import DegenerateModelError, InfeasibleModelError
from .netcore import Graph, degrees

_EPS = 1e-12


# ---------------------------------------------------------------------------
# degree-parameter sampling laws
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Beta:
    """Beta(a, b) draws in (0, 1)."""

    a: float
    b: float

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.beta(self.a, self.b, size)


@dataclass(frozen=True)
class PowerLaw:
    """Pareto draws on [xmin, inf) with density proportional to x^-alpha.

    Inverse-CDF sampling: x = xmin * u^{-1/(alpha-1)}. Mean is
    xmin * (alpha-1)/(alpha-2) for alpha > 2.
    """

    xmin: float = 1.0
    alpha: float = 5.0

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        u = 1.0 - rng.random(size)  # in (0, 1]; avoids u = 0
        return self.xmin * u ** (-1.0 / (self.alpha - 1.0))


@dataclass(frozen=True)
class Constant:
    """Degenerate law; every draw equals ``value``."""

    value: float = 1.0

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.full(size, self.value)


ThetaLaw = Union[Beta, PowerLaw, Constant]


# ---------------------------------------------------------------------------
# parameter containers
# ---------------------------------------------------------------------------

def _validate_labels(labels: np.ndarray, k: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim != 1:
        raise ValueError("labels must be a 1-d vector")
    if labels.size == 0:
        raise ValueError("labels must be nonempty")
    if labels.min() < 1 or labels.max() > k:
        raise ValueError(f"labels must lie in [1, {k}]")
    counts = np.bincount(labels, minlength=k + 1)[1:]
    if np.any(counts == 0):
        missing = int(np.flatnonzero(counts == 0)[0]) + 1
        raise ValueError(f"community {missing} is empty")
    return labels


def _validate_omega(omega: np.ndarray, k: int) -> np.ndarray:
    omega = np.asarray(omega, dtype=np.float64)
    if omega.shape != (k, k):
        raise ValueError(f"omega must be {k}x{k}")
    if np.max(np.abs(omega - omega.T), initial=0.0) > _EPS:
        raise ValueError("omega must be symmetric")
    if omega.min() < -_EPS or omega.max() > 1.0 + _EPS:
        raise ValueError("omega entries must lie in [0, 1]")
    return np.clip((omega + omega.T) / 2.0, 0.0, 1.0)


@dataclass(frozen=True)
class SbmParams:
    k: int
    omega: np.ndarray = field(repr=False)
    labels: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "labels", _validate_labels(self.labels, self.k))
        object.__setattr__(self, "omega", _validate_omega(self.omega, self.k))

    @property
    def n(self) -> int:
        return self.labels.size


def _validate_omega_nonneg(omega: np.ndarray, k: int) -> np.ndarray:
    """Symmetric nonnegative block matrix; entries may exceed 1 because
    under max-theta-1 normalization only the products theta_i omega theta_j
    are probabilities (they are clamped at 1 in prob_matrix)."""
    omega = np.asarray(omega, dtype=np.float64)
    if omega.shape != (k, k):
        raise ValueError(f"omega must be {k}x{k}")
    if np.max(np.abs(omega - omega.T), initial=0.0) > _EPS * max(1.0, omega.max(initial=1.0)):
        raise ValueError("omega must be symmetric")
    if omega.min() < -_EPS:
        raise ValueError("omega entries must be nonnegative")
    return np.maximum((omega + omega.T) / 2.0, 0.0)


@dataclass(frozen=True)
class DcbmParams:
    """Degree-corrected parameters, canonicalized at construction.

    The identifiability constraint max theta = 1 within every community is
    applied by rescaling theta block-wise and absorbing the scale into
    omega (omega_kl <- s_k * s_l * omega_kl), which leaves the edge
    probability matrix unchanged.
    """

    k: int
    omega: np.ndarray = field(repr=False)
    theta: np.ndarray = field(repr=False)
    labels: np.ndarray = field(repr=False)

    def __post_init__(self):
        labels = _validate_labels(self.labels, self.k)
        omega = _validate_omega_nonneg(self.omega, self.k)
        theta = np.asarray(self.theta, dtype=np.float64)
        if theta.shape != labels.shape:
            raise ValueError("theta must have one entry per node")
        if theta.min() < 0.0 or theta.max() > 1.0 + _EPS:
            raise ValueError("theta entries must lie in [0, 1]")
        scale = np.ones(self.k)
        for k in range(1, self.k + 1):
            block_max = theta[labels == k].max()
            if block_max <= 0.0:
                raise ValueError(f"community {k} has all-zero theta")
            scale[k - 1] = block_max
        theta = theta / scale[labels - 1]
        omega = _validate_omega_nonneg(omega * np.outer(scale, scale), self.k)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "theta", theta)

    @property
    def n(self) -> int:
        return self.labels.size


@dataclass(frozen=True)
class PabmParams:
    k: int
    lam: np.ndarray = field(repr=False)
    labels: np.ndarray = field(repr=False)

    def __post_init__(self):
        labels = _validate_labels(self.labels, self.k)
        lam = np.asarray(self.lam, dtype=np.float64)
        if lam.shape != (labels.size, self.k):
            raise ValueError(f"lambda must be n x {self.k}")
        if lam.min() < 0.0 or lam.max() > 1.0 + _EPS:
            raise ValueError("lambda entries must lie in [0, 1]")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "lam", np.clip(lam, 0.0, 1.0))

    @property
    def n(self) -> int:
        return self.labels.size


ModelParams = Union[SbmParams, DcbmParams, PabmParams]


@dataclass(frozen=True)
class ProbMatrix:
    """Symmetric edge-probability matrix with zero diagonal."""

    p: np.ndarray = field(repr=False)

    def __post_init__(self):
        p = np.asarray(self.p, dtype=np.float64)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValueError("probability matrix must be square")
        if p.size:
            if np.max(np.abs(p - p.T)) > _EPS:
                raise ValueError("probability matrix must be symmetric")
            if p.min() < -_EPS or p.max() > 1.0 + _EPS:
                raise ValueError("probabilities must lie in [0, 1]")
            if np.max(np.abs(np.diag(p))) > 0.0:
                raise ValueError("diagonal must be zero")
        object.__setattr__(self, "p", np.clip(p, 0.0, 1.0))

    @property
    def n(self) -> int:
        return self.p.shape[0]


# ---------------------------------------------------------------------------
# probability matrices and sampling
# ---------------------------------------------------------------------------

def prob_matrix(params: ModelParams) -> ProbMatrix:
    """Edge-probability matrix implied by the model parameters.

    Degree-corrected products theta_i omega theta_j are clamped at 1: with
    block-wise max theta = 1, heavy-tailed degree draws can push a few
    top pairs past 1 at realistic density targets.
    """
    t = params.labels - 1
    if isinstance(params, SbmParams):
        p = params.omega[np.ix_(t, t)].copy()
    elif isinstance(params, DcbmParams):
        p = params.theta[:, None] * params.omega[np.ix_(t, t)] * params.theta[None, :]
        np.minimum(p, 1.0, out=p)
    elif isinstance(params, PabmParams):
        popularity_toward = params.lam[:, t]  # [i, j] = lam[i, tau_j]
        p = popularity_toward * popularity_toward.T
    else:
        raise TypeError(f"unsupported params type {type(params).__name__}")
    np.fill_diagonal(p, 0.0)
    return ProbMatrix(p)


def expected_edge_count(p: ProbMatrix) -> float:
    iu = np.triu_indices(p.n, 1)
    return float(p.p[iu].sum())


def expected_density(p: ProbMatrix) -> float:
    pairs = p.n * (p.n - 1) / 2
    return expected_edge_count(p) / pairs if pairs else 0.0


def sample_graph(p: ProbMatrix, seed: int) -> Graph:
    """Independent Bernoulli draws on the upper triangle, mirrored."""
    rng = np.random.default_rng(seed)
    i, j = np.triu_indices(p.n, 1)
    hit = rng.random(i.size) < p.p[i, j]
    return Graph(n=p.n, edges=np.column_stack([i[hit], j[hit]]))


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def _block_sizes(n: int, fractions) -> np.ndarray:
    f = np.asarray(fractions, dtype=np.float64)
    if f.ndim != 1 or f.size == 0:
        raise ValueError("block fractions must be a nonempty vector")
    if abs(f.sum() - 1.0) > 1e-9:
        raise ValueError(f"block fractions must sum to 1, got {f.sum()}")
    bounds = np.rint(np.cumsum(f) * n).astype(np.int64)
    sizes = np.diff(np.concatenate([[0], bounds]))
    if np.any(sizes <= 0):
        raise ValueError("every block must receive at least one node")
    return sizes


def _contiguous_labels(sizes: np.ndarray) -> np.ndarray:
    return np.repeat(np.arange(1, sizes.size + 1), sizes)


def _pair_target(n: int, target_density, target_avg_degree) -> float:
    if (target_density is None) == (target_avg_degree is None):
        raise ValueError("specify exactly one of target_density / target_avg_degree")
    if target_density is not None:
        return float(target_density) * n * (n - 1) / 2.0
    return float(target_avg_degree) * n / 2.0


def _scale_omega(base_omega: np.ndarray, pair_sum: float, target_pairs: float) -> np.ndarray:
    if pair_sum <= 0.0:
        raise InfeasibleModelError("base parameters give zero expected edges")
    c = target_pairs / pair_sum
    scaled = c * base_omega
    if scaled.max() > 1.0 + _EPS:
        raise InfeasibleModelError(
            f"density target needs omega entry {scaled.max():.4g} > 1"
        )
    return np.clip(scaled, 0.0, 1.0)


def gen_sbm(
    n: int,
    k: int,
    block_fractions,
    base_omega,
    *,
    target_density: float | None = None,
    target_avg_degree: float | None = None,
    seed: int,
) -> tuple[Graph, SbmParams]:
    """Sample an SBM with omega proportional to ``base_omega``, scaled so
    the expected density (or expected average degree) hits the target."""
    sizes = _block_sizes(n, block_fractions)
    if sizes.size != k:
        raise ValueError("block_fractions length must equal k")
    labels = _contiguous_labels(sizes)
    base = _validate_base_omega(base_omega, k)
    within = sizes * (sizes - 1) / 2.0
    cross = np.outer(sizes, sizes)
    pair_sum = float((np.diag(base) * within).sum())
    iu = np.triu_indices(k, 1)
    pair_sum += float((base[iu] * cross[iu]).sum())
    omega = _scale_omega(base, pair_sum, _pair_target(n, target_density, target_avg_degree))
    params = SbmParams(k=k, omega=omega, labels=labels)
    g = sample_graph(prob_matrix(params), derive_seed(seed, "graph"))
    return g, params


def _validate_base_omega(base_omega, k: int) -> np.ndarray:
    base = np.asarray(base_omega, dtype=np.float64)
    if base.shape != (k, k):
        raise ValueError(f"base omega must be {k}x{k}")
    if np.max(np.abs(base - base.T), initial=0.0) > _EPS:
        raise ValueError("base omega must be symmetric")
    if base.min() < 0:
        raise ValueError("base omega must be nonnegative")
    return (base + base.T) / 2.0


def beta_ratio_omega(k: int, beta: float) -> np.ndarray:
    """Base matrix proportional to (1-beta) I + beta 11^T: ``beta`` is the
    ratio of between-block to within-block edge probability."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    return (1.0 - beta) * np.eye(k) + beta * np.ones((k, k))


def gen_dcbm(
    n: int,
    k: int,
    block_fractions,
    base_omega,
    theta_law: ThetaLaw,
    *,
    target_density: float | None = None,
    target_avg_degree: float | None = None,
    seed: int,
) -> tuple[Graph, DcbmParams]:
    """Sample a DCBM: theta drawn i.i.d. from ``theta_law`` and rescaled
    block-wise to max 1, then omega scaled to the density/degree target
    given the realized theta."""
    sizes = _block_sizes(n, block_fractions)
    if sizes.size != k:
        raise ValueError("block_fractions length must equal k")
    labels = _contiguous_labels(sizes)
    base = _validate_base_omega(base_omega, k)
    rng = np.random.default_rng(derive_seed(seed, "theta"))
    theta = theta_law.sample(rng, n)
    if np.any(theta <= 0):
        raise ValueError("theta draws must be positive")
    for block in range(1, k + 1):
        mask = labels == block
        theta[mask] /= theta[mask].max()
    block_sums = np.array([theta[labels == b].sum() for b in range(1, k + 1)])
    block_sq = np.array([(theta[labels == b] ** 2).sum() for b in range(1, k + 1)])
    weighted_within = (block_sums**2 - block_sq) / 2.0
    pair_sum = float((np.diag(base) * weighted_within).sum())
    iu = np.triu_indices(k, 1)
    pair_sum += float((base[iu] * np.outer(block_sums, block_sums)[iu]).sum())
    if pair_sum <= 0.0:
        raise InfeasibleModelError("base parameters give zero expected edges")
    target_pairs = _pair_target(n, target_density, target_avg_degree)
    if target_pairs > n * (n - 1) / 2.0:
        raise InfeasibleModelError("density target exceeds 1")
    omega = base * (target_pairs / pair_sum)
    params = DcbmParams(k=k, omega=omega, theta=theta, labels=labels)
    # heavy-tailed theta can push the very top pair products past 1; those
    # pairs become deterministic edges. A target that clamps more than 1%
    # of pairs is treated as infeasible rather than a changed model.
    raw = params.theta[:, None] * params.omega[np.ix_(labels - 1, labels - 1)] * params.theta[None, :]
    n_clamped = int((raw[np.triu_indices(n, 1)] > 1.0).sum())
    if n_clamped > 0.01 * n * (n - 1) / 2.0:
        raise InfeasibleModelError(
            f"density target clamps {n_clamped} pair probabilities (> 1% of pairs)"
        )
    if n_clamped:
        warnings.warn(
            f"degree target clamped {n_clamped} pair probabilit"
            f"{'y' if n_clamped == 1 else 'ies'} at 1",
            stacklevel=2,
        )
    g = sample_graph(prob_matrix(params), derive_seed(seed, "graph"))
    return g, params


def gen_pabm(
    n: int,
    k: int,
    diag_law: Beta = Beta(2, 1),
    offdiag_law: Beta = Beta(1, 2),
    *,
    density_scale: float | None = None,
    seed: int,
) -> tuple[Graph, PabmParams]:
    """Sample a PABM with K equal-sized communities.

    Within-community popularity entries come from ``diag_law``, cross ones
    from ``offdiag_law``. When ``density_scale`` is set, lambda is
    multiplied by sqrt(s) with s chosen so the expected density equals the
    target; an s that would push entries above 1 is an error.
    """
    if n % k != 0:
        raise InfeasibleModelError(f"n={n} not divisible by K={k}")
    block = n // k
    labels = _contiguous_labels(np.full(k, block))
    rng = np.random.default_rng(derive_seed(seed, "lambda"))
    lam = np.empty((n, k))
    for kb in range(k):
        rows = slice(kb * block, (kb + 1) * block)
        for col in range(k):
            law = diag_law if col == kb else offdiag_law
            lam[rows, col] = law.sample(rng, block)
    if density_scale is not None:
        params0 = PabmParams(k=k, lam=lam, labels=labels)
        current = expected_density(prob_matrix(params0))
        if current <= 0:
            raise InfeasibleModelError("zero base density, cannot scale")
        s = float(density_scale) / current
        lam_scaled = lam * np.sqrt(s)
        if lam_scaled.max() > 1.0 + _EPS:
            raise InfeasibleModelError(
                f"density target {density_scale} needs lambda entry "
                f"{lam_scaled.max():.4g} > 1"
            )
        lam = np.clip(lam_scaled, 0.0, 1.0)
    params = PabmParams(k=k, lam=lam, labels=labels)
    g = sample_graph(prob_matrix(params), derive_seed(seed, "graph"))
    return g, params


# ---------------------------------------------------------------------------
# plug-in fits for the bootstrap null
# ---------------------------------------------------------------------------

def _block_edge_counts(g: Graph, labels: np.ndarray, k: int) -> np.ndarray:
    """counts[a, b] = number of edges between communities a+1 and b+1
    (each unordered edge counted once; within-block on the diagonal)."""
    counts = np.zeros((k, k), dtype=np.float64)
    if g.edge_count:
        a = labels[g.edges[:, 0]] - 1
        b = labels[g.edges[:, 1]] - 1
        lo = np.minimum(a, b)
        hi = np.maximum(a, b)
        np.add.at(counts, (lo, hi), 1.0)
        counts = counts + np.triu(counts, 1).T
    return counts


def fit_sbm(g: Graph, labels: np.ndarray) -> ProbMatrix:
    """Plug-in SBM fit: block-wise edge frequencies.

    omega_hat[k, l] = (edges between communities k, l) / (available pairs).
    A singleton community has no within pairs; its diagonal entry is set
    to 0 with a warning.
    """
    labels = np.asarray(labels, dtype=np.int64)
    k = int(labels.max())
    _validate_labels(labels, k)
    sizes = np.bincount(labels, minlength=k + 1)[1:].astype(np.float64)
    counts = _block_edge_counts(g, labels, k)
    pairs = np.outer(sizes, sizes)
    np.fill_diagonal(pairs, sizes * (sizes - 1) / 2.0)
    omega = np.zeros((k, k))
    ok = pairs > 0
    omega[ok] = counts[ok] / pairs[ok]
    if not ok.all():
        warnings.warn(
            "singleton community: within-block probability set to 0", stacklevel=2
        )
    t = labels - 1
    p = omega[np.ix_(t, t)].copy()
    np.fill_diagonal(p, 0.0)
    return ProbMatrix(np.clip(p, 0.0, 1.0))


def fit_dcbm(g: Graph, labels: np.ndarray) -> ProbMatrix:
    """Degree-ratio plug-in DCBM fit.

    theta_hat_i = deg(i) / (total degree of i's community);
    O_hat[k, l] = edge endpoints between communities k and l (twice the
    within count on the diagonal); P_hat = theta theta^T O, clamped to
    [0, 1] with zero diagonal.

    Raises ``DegenerateModelError`` when a community has zero total degree.
    """
    labels = np.asarray(labels, dtype=np.int64)
    k = int(labels.max())
    _validate_labels(labels, k)
    deg = degrees(g).astype(np.float64)
    block_deg = np.array([deg[labels == b].sum() for b in range(1, k + 1)])
    if np.any(block_deg == 0):
        dead = int(np.flatnonzero(block_deg == 0)[0]) + 1
        raise DegenerateModelError(
            f"community {dead} has zero total degree; merge it or fail the test"
        )
    theta = deg / block_deg[labels - 1]
    o_hat = _block_edge_counts(g, labels, k)
    o_hat = o_hat + np.diag(np.diag(o_hat))  # within-block endpoints count twice
    t = labels - 1
    p = theta[:, None] * o_hat[np.ix_(t, t)] * theta[None, :]
    np.fill_diagonal(p, 0.0)
    return ProbMatrix(np.clip(p, 0.0, 1.0))


# ---------------------------------------------------------------------------
# parameter serialization (experiment provenance)
# ---------------------------------------------------------------------------

def write_prob_matrix_csv(p: ProbMatrix, stream: IO[str]) -> None:
    """Debug CSV dump of a fitted probability matrix, one row per line."""
    for row in p.p:
        stream.write(",".join(f"{v:.17g}" for v in row) + "\n")


def _write_matrix(stream: IO[str], name: str, m: np.ndarray) -> None:
    stream.write(f"[{name}]\n")
    m = np.atleast_2d(m)
    for row in m:
        stream.write(" ".join(f"{v:.17g}" for v in row) + "\n")
    stream.write("\n")


def write_params(params: ModelParams, stream: IO[str]) -> None:
    """Key/value header plus matrix blocks; round-trips via read_params."""
    model = {SbmParams: "sbm", DcbmParams: "dcbm", PabmParams: "pabm"}[type(params)]
    stream.write(f"model = {model}\n")
    stream.write(f"n = {params.n}\n")
    stream.write(f"k = {params.k}\n\n")
    if isinstance(params, (SbmParams, DcbmParams)):
        _write_matrix(stream, "omega", params.omega)
    if isinstance(params, DcbmParams):
        _write_matrix(stream, "theta", params.theta[None, :])
    if isinstance(params, PabmParams):
        _write_matrix(stream, "lambda", params.lam)
    _write_matrix(stream, "labels", params.labels[None, :].astype(np.float64))


def read_params(stream: IO[str]) -> ModelParams:
    header: dict[str, str] = {}
    blocks: dict[str, list[list[float]]] = {}
    current: list[list[float]] | None = None
    for raw in stream:
        line = raw.strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = blocks.setdefault(line[1:-1], [])
        elif current is not None:
            current.append([float(tok) for tok in line.split()])
        elif "=" in line:
            key, _, value = line.partition("=")
            header[key.strip()] = value.strip()
    model = header.get("model")
    k = int(header["k"])
    labels = np.asarray(blocks["labels"], dtype=np.float64).ravel().astype(np.int64)
    if model == "sbm":
        return SbmParams(k=k, omega=np.asarray(blocks["omega"]), labels=labels)
    if model == "dcbm":
        theta = np.asarray(blocks["theta"], dtype=np.float64).ravel()
        return DcbmParams(k=k, omega=np.asarray(blocks["omega"]), theta=theta, labels=labels)
    if model == "pabm":
        return PabmParams(k=k, lam=np.asarray(blocks["lambda"]), labels=labels)
    raise ValueError(f"unknown model {model!r} in params file")
