"""Reproducible generators for geometrically ergodic time series.

Three model classes are supported, each a Markov chain with a stationary
distribution whose covariance the streaming estimator targets:

* ``VarModel`` -- linear vector autoregression z' = A z + eps with
  Gaussian noise; stationary whenever ||A||_2 < 1.
* ``GvarModel`` -- generalized (exponential-family) autoregression where
  each coordinate is drawn conditionally on the natural parameter a_i^T z.
  Ergodicity is enforced constructively by clamping the natural parameter
  to [-c, c].
* ``CopulaModel`` -- coordinatewise monotone transforms of a latent
  Gaussian VAR skeleton.

Randomness policy: every stream owns a PCG64 generator; Gaussian draws use
numpy's ziggurat ``standard_normal`` and nothing else, so a (seed, model,
call sequence) triple reproduces the sample path exactly. Replicate i of a
sweep uses the derived seed ``base_seed XOR splitmix64(i)``.

Model definitions can be loaded from JSON configs; matrices are given
either as nested lists or as constructor expressions such as
``"diag([1, 2])"``, ``"random_orthogonal(16, 7)"`` or ``"scaled(0.1, D0)"``
where bare names refer to entries of the config's ``defs`` table.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass, field

import numpy as np

from .linalg import _as_matrix, orthonormalize, singular_values, sym_eig

__all__ = [
    "VarModel",
    "GvarModel",
    "CopulaModel",
    "StreamHandle",
    "var_step",
    "gvar_step",
    "copula_step",
    "warm_up",
    "derive_stream_seed",
    "random_orthogonal",
    "rotated_var_model",
    "parse_matrix_expr",
    "model_from_config",
]

_MASK64 = (1 << 64) - 1

GVAR_FAMILIES = ("poisson", "bernoulli", "gaussian-unit-variance")
COPULA_TRANSFORMS = ("identity", "cube", "exp", "scaled-sigmoid")


def _splitmix64(x: int) -> int:
    """One step of the splitmix64 mixer (public-domain constants)."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive_stream_seed(base_seed: int, replicate_index: int) -> int:
    """Seed for replicate ``replicate_index``: base_seed XOR splitmix64(index)."""
    return (int(base_seed) & _MASK64) ^ _splitmix64(int(replicate_index))


@dataclass(frozen=True)
class VarModel:
    """First-order vector autoregression z_{k+1} = a z_k + eps_k.

    ``noise_cov`` is the covariance of the i.i.d. Gaussian innovations.
    ``rho`` (the spectral norm of ``a``) must be < 1 for stationarity.
    """

    a: np.ndarray
    noise_cov: np.ndarray

    def __post_init__(self):
        a = _as_matrix(self.a, "a")
        g = _as_matrix(self.noise_cov, "noise_cov")
        m = a.shape[0]
        if a.shape != (m, m) or g.shape != (m, m):
            raise ValueError("a and noise_cov must be square with matching size")
        if float(np.linalg.norm(g - g.T)) > 1e-10 * max(float(np.linalg.norm(g)), 1e-30):
            raise ValueError("noise_cov must be symmetric")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "noise_cov", g)
        if self.rho >= 1.0:
            raise ValueError(f"model is not stationary: ||a||_2 = {self.rho:.6g} >= 1")

    @property
    def dim(self) -> int:
        return self.a.shape[0]

    @property
    def rho(self) -> float:
        return float(singular_values(self.a)[0])

    def noise_factor(self) -> np.ndarray:
        """L with L L^T = noise_cov, from the (clamped) eigendecomposition."""
        vals, vecs = sym_eig(self.noise_cov)
        if vals.size and vals[-1] < -1e-10 * max(vals[0], 1.0):
            raise ValueError("noise_cov is not positive semidefinite")
        return vecs * np.sqrt(np.clip(vals, 0.0, None))


@dataclass(frozen=True)
class GvarModel:
    """Generalized VAR: coordinate i drawn from the exponential family
    with natural parameter clamp(a_i^T z, [-c, c])."""

    coeffs: np.ndarray
    family: str = "poisson"
    natural_param_clip: float = 5.0

    def __post_init__(self):
        c = _as_matrix(self.coeffs, "coeffs")
        if c.shape[0] != c.shape[1]:
            raise ValueError("coeffs must be square")
        if self.family not in GVAR_FAMILIES:
            raise ValueError(f"family must be one of {GVAR_FAMILIES}, got {self.family!r}")
        if not self.natural_param_clip > 0:
            raise ValueError("natural_param_clip must be positive")
        object.__setattr__(self, "coeffs", c)

    @property
    def dim(self) -> int:
        return self.coeffs.shape[0]


def _scaled_sigmoid(w: np.ndarray) -> np.ndarray:
    # 4*sigmoid(w) - 2: strictly increasing, unit slope at 0, range (-2, 2).
    return 4.0 / (1.0 + np.exp(-w)) - 2.0


_TRANSFORM_FNS = {
    "identity": lambda w: w,
    "cube": lambda w: w**3,
    "exp": np.exp,
    "scaled-sigmoid": _scaled_sigmoid,
}


@dataclass(frozen=True)
class CopulaModel:
    """Monotone marginal transforms z^i = f_i(w^i) of a latent Gaussian VAR."""

    skeleton: VarModel
    transforms: tuple = ()

    def __post_init__(self):
        tags = self.transforms
        if isinstance(tags, str):
            tags = (tags,) * self.skeleton.dim
        tags = tuple(tags)
        if len(tags) != self.skeleton.dim:
            raise ValueError(
                f"need one transform per coordinate ({self.skeleton.dim}), got {len(tags)}"
            )
        for t in tags:
            if t not in COPULA_TRANSFORMS:
                raise ValueError(f"unknown transform {t!r}; choose from {COPULA_TRANSFORMS}")
        object.__setattr__(self, "transforms", tags)

    @property
    def dim(self) -> int:
        return self.skeleton.dim

    def apply_transforms(self, w: np.ndarray) -> np.ndarray:
        return np.array([_TRANSFORM_FNS[t](wi) for t, wi in zip(self.transforms, w)])


class StreamHandle:
    """Single-owner iterator over one sample path of a model.

    Holds the PCG64 generator and the current chain state; ``step`` advances
    one observation, ``advance`` skips ahead and returns the last one. Not
    thread-safe; create one handle per replicate.
    """

    def __init__(self, model, seed: int, z0=None):
        self.model = model
        self.seed = int(seed)
        self.rng = np.random.Generator(np.random.PCG64(self.seed))
        m = model.dim
        if z0 is None:
            self.z = np.zeros(m)
        else:
            self.z = np.asarray(z0, dtype=np.float64).reshape(m).copy()
        self.samples_emitted = 0
        if isinstance(model, VarModel):
            self._noise_factor = model.noise_factor()
            self._identity_noise = bool(np.array_equal(self._noise_factor, np.eye(m)))
        elif isinstance(model, CopulaModel):
            self._noise_factor = model.skeleton.noise_factor()
            self._identity_noise = bool(np.array_equal(self._noise_factor, np.eye(m)))

    def step(self) -> np.ndarray:
        model = self.model
        if isinstance(model, VarModel):
            return self._var_step(model.a)
        if isinstance(model, GvarModel):
            return self._gvar_step()
        if isinstance(model, CopulaModel):
            w = self._var_step(model.skeleton.a)
            return model.apply_transforms(w)
        raise TypeError(f"unsupported model type: {type(model).__name__}")

    def _var_step(self, a: np.ndarray) -> np.ndarray:
        n = self.rng.standard_normal(a.shape[0])
        eps = n if self._identity_noise else self._noise_factor @ n
        self.z = a @ self.z + eps
        self.samples_emitted += 1
        return self.z.copy()

    def _gvar_step(self) -> np.ndarray:
        model = self.model
        c = model.natural_param_clip
        theta = np.clip(model.coeffs @ self.z, -c, c)
        if model.family == "poisson":
            z = self.rng.poisson(np.exp(theta)).astype(np.float64)
        elif model.family == "bernoulli":
            p = 1.0 / (1.0 + np.exp(-theta))
            z = (self.rng.random(theta.shape[0]) < p).astype(np.float64)
        else:  # gaussian-unit-variance
            z = theta + self.rng.standard_normal(theta.shape[0])
        self.z = z
        self.samples_emitted += 1
        return self.z.copy()

    def advance(self, n_steps: int) -> np.ndarray:
        """Advance ``n_steps`` observations and return the last one.

        For (latent) VAR chains the Gaussian draws are batched into a single
        generator call; the value stream is identical to repeated ``step``.
        """
        if n_steps < 0:
            raise ValueError("n_steps must be >= 0")
        if n_steps == 0:
            return self.z.copy()
        model = self.model
        if isinstance(model, (VarModel, CopulaModel)):
            a = model.a if isinstance(model, VarModel) else model.skeleton.a
            noise = self.rng.standard_normal((n_steps, a.shape[0]))
            if not self._identity_noise:
                noise = noise @ self._noise_factor.T
            z = self.z
            for t in range(n_steps):
                z = a @ z + noise[t]
            self.z = z
            self.samples_emitted += n_steps
            if isinstance(model, CopulaModel):
                return model.apply_transforms(z)
            return z.copy()
        out = None
        for _ in range(n_steps):
            out = self.step()
        return out


def var_step(handle: StreamHandle) -> np.ndarray:
    """One observation from a VAR stream: A z_k + eps_k, eps_k ~ N(0, noise_cov)."""
    if not isinstance(handle.model, VarModel):
        raise TypeError("var_step requires a StreamHandle over a VarModel")
    return handle.step()


def gvar_step(handle: StreamHandle) -> np.ndarray:
    """One observation from a generalized VAR stream."""
    if not isinstance(handle.model, GvarModel):
        raise TypeError("gvar_step requires a StreamHandle over a GvarModel")
    return handle.step()


def copula_step(handle: StreamHandle) -> np.ndarray:
    """One observation from a copula stream (transformed latent VAR)."""
    if not isinstance(handle.model, CopulaModel):
        raise TypeError("copula_step requires a StreamHandle over a CopulaModel")
    return handle.step()


def warm_up(handle: StreamHandle, n_burn: int) -> StreamHandle:
    """Advance the chain ``n_burn`` steps, discarding output; returns the handle."""
    if n_burn < 0:
        raise ValueError("n_burn must be >= 0")
    if n_burn:
        handle.advance(n_burn)
    return handle


def random_orthogonal(m: int, seed: int) -> np.ndarray:
    """Seeded random m x m orthogonal matrix (QR of a Gaussian matrix)."""
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    return orthonormalize(rng.standard_normal((m, m)))


def rotated_var_model(d0, scale: float, noise_diag, v_seed: int) -> tuple[VarModel, np.ndarray]:
    """VAR model with coefficient A = V^T (scale * diag(d0)) V, V random orthogonal.

    Returns ``(model, v)``. This is the construction behind the simulated
    experiments in this package: a rotated diagonal contraction driven by
    diagonal noise ``diag(noise_diag)``.
    """
    d0 = np.asarray(d0, dtype=np.float64)
    v = random_orthogonal(d0.size, v_seed)
    a = v.T @ np.diag(scale * d0) @ v
    return VarModel(a=a, noise_cov=np.diag(np.asarray(noise_diag, dtype=np.float64))), v


# --- JSON model configs -----------------------------------------------------

def _eval_matrix_node(node, defs):
    if isinstance(node, ast.Expression):
        return _eval_matrix_node(node.body, defs)
    if isinstance(node, ast.Constant):
        if isinstance(node.value, (int, float)):
            return float(node.value)
        raise ValueError(f"unsupported constant {node.value!r} in matrix expression")
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
        return -_eval_matrix_node(node.operand, defs)
    if isinstance(node, ast.List):
        return [_eval_matrix_node(el, defs) for el in node.elts]
    if isinstance(node, ast.Name):
        if node.id in defs:
            return parse_matrix_expr(defs[node.id], defs)
        raise ValueError(f"unknown name {node.id!r} in matrix expression (not in defs)")
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
        fn = node.func.id
        args = [_eval_matrix_node(a, defs) for a in node.args]
        return _apply_constructor(fn, args)
    raise ValueError("unsupported syntax in matrix expression")


def _apply_constructor(fn: str, args: list):
    if fn == "diag":
        (values,) = args
        return np.diag(np.asarray(values, dtype=np.float64))
    if fn == "identity":
        (m,) = args
        return np.eye(int(m))
    if fn == "zeros":
        if len(args) == 1:
            return np.zeros((int(args[0]), int(args[0])))
        m, n = args
        return np.zeros((int(m), int(n)))
    if fn == "random_orthogonal":
        m, seed = args
        return random_orthogonal(int(m), int(seed))
    if fn == "scaled":
        c, x = args
        return float(c) * np.asarray(x, dtype=np.float64)
    if fn == "conjugate":
        v, d = args
        v = np.asarray(v, dtype=np.float64)
        return v.T @ np.asarray(d, dtype=np.float64) @ v
    raise ValueError(f"unknown matrix constructor {fn!r}")


def parse_matrix_expr(spec, defs=None) -> np.ndarray:
    """Evaluate a matrix given as a nested list or a constructor expression.

    Supported constructors: ``diag([...])``, ``identity(m)``, ``zeros(m[, n])``,
    ``random_orthogonal(m, seed)``, ``scaled(c, X)``, ``conjugate(V, D)``
    (returning V^T D V). Bare names resolve through ``defs``.
    """
    defs = defs or {}
    if isinstance(spec, str):
        try:
            tree = ast.parse(spec, mode="eval")
        except SyntaxError as exc:
            raise ValueError(f"cannot parse matrix expression {spec!r}: {exc}") from exc
        out = _eval_matrix_node(tree, defs)
    else:
        out = spec
    arr = np.asarray(out, dtype=np.float64)
    if arr.ndim == 1:
        raise ValueError(f"matrix expression produced a vector of length {arr.size}, expected 2-D")
    return arr


def model_from_config(cfg: dict):
    """Build a model from its JSON description.

    ``cfg["type"]`` selects the class:

    * ``var``: fields ``a``, ``noise_cov`` (matrix specs)
    * ``gvar``: fields ``coeffs``, ``family``, optional ``natural_param_clip``
    * ``copula``: fields ``skeleton`` (a var config) and ``transforms``

    ``cfg["defs"]`` (optional) maps names to matrix specs usable inside
    constructor expressions.
    """
    kind = cfg.get("type")
    defs = cfg.get("defs", {})
    if kind == "var":
        return VarModel(
            a=parse_matrix_expr(cfg["a"], defs),
            noise_cov=parse_matrix_expr(cfg["noise_cov"], defs),
        )
    if kind == "gvar":
        return GvarModel(
            coeffs=parse_matrix_expr(cfg["coeffs"], defs),
            family=cfg.get("family", "poisson"),
            natural_param_clip=float(cfg.get("natural_param_clip", 5.0)),
        )
    if kind == "copula":
        skel = dict(cfg["skeleton"])
        skel.setdefault("type", "var")
        skel.setdefault("defs", defs)
        skeleton = model_from_config(skel)
        return CopulaModel(skeleton=skeleton, transforms=tuple(cfg["transforms"]))
    raise ValueError(f"unknown model type {kind!r} (field 'type')")
