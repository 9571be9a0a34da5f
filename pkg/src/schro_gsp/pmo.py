"""Position-momentum alignment of feature coordinates.

Given raw feature columns q, find a linear recombination f = q T whose
feature set behaves like a commuting coordinate system: the squared
derivative along one output feature should commute with the location
observable of every other.  The objective is the summed squared spectral
norm of those cross commutators over ordered pairs, plus a penalty keeping
each derivative's infinity norm near one (otherwise T = 0 is a trivial
minimizer).

The optimizer is first/second-moment gradient descent (Adam-style) on the
entries of T, with gradients from central finite differences by default or
from singular-pair perturbation identities (``spectral-pair``), which cost
one norm estimate per commutator instead of one per perturbed entry.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import ContractError, DivergedError
from .graph_core import FeatureLocations, Graph
from .observe import commuting_deficiency
from .operators import (
    NORM_MAX_ITER,
    SparseOperator,
    _derivative_csr,
    commutator,
    infinity_norm,
    operator_norm,
)

_GRAD_MODES = ("finite-difference", "spectral-pair")

# Central-difference step on entries of T.
FD_STEP = 1e-5

# Stop when the best objective improves by less than this relative amount
# over a window of iterations.
_STALL_WINDOW = 20
_STALL_RTOL = 1e-8

_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPS = 1e-8


@dataclass(frozen=True)
class PMOConfig:
    """Settings for the alignment fit."""

    out_features: int
    lam: float = 1.0
    # Larger steps reach a collapsed local basin (both outputs on one
    # direction); 0.02 tracks the descent into the separating minimum.
    learning_rate: float = 0.02
    max_iters: int = 2000
    grad_mode: str = "finite-difference"
    seed: int = 0
    norm_tol: float = 1e-8

    def __post_init__(self):
        if self.out_features < 1:
            raise ContractError("out_features must be at least 1")
        if self.lam < 0:
            raise ContractError("penalty weight must be nonnegative")
        if self.learning_rate <= 0:
            raise ContractError("learning_rate must be positive")
        if self.max_iters < 1:
            raise ContractError("max_iters must be at least 1")
        if self.grad_mode not in _GRAD_MODES:
            raise ContractError(f"grad_mode must be one of {_GRAD_MODES}")
        if self.norm_tol <= 0:
            raise ContractError("norm_tol must be positive")


@dataclass(frozen=True)
class PMOResult:
    """Fitted transform with its improvement trace.

    ``objective_trace`` records (iteration, objective) whenever the running
    best improved, so the recorded values are non-increasing.
    """

    transform: np.ndarray
    objective_trace: tuple[tuple[int, float], ...]
    final_deficiency: float

    def __post_init__(self):
        t = np.asarray(self.transform, dtype=np.float64)
        t.setflags(write=False)
        object.__setattr__(self, "transform", t)
        object.__setattr__(self, "objective_trace", tuple(
            (int(i), float(v)) for i, v in self.objective_trace
        ))

    def as_dict(self) -> dict:
        return {
            "transform": [[float(x) for x in row] for row in self.transform],
            "objective_trace": [[i, v] for i, v in self.objective_trace],
            "final_deficiency": self.final_deficiency,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True)


class _Workspace:
    """Precomputed raw-column derivatives; everything else depends on T."""

    def __init__(self, graph: Graph, q: FeatureLocations):
        self.graph = graph
        self.q = q
        self.raw_grads = [
            _derivative_csr(graph, q.column(a)) for a in range(q.n_features)
        ]
        self.n = graph.n_nodes

    def out_grad(self, t_col: np.ndarray) -> sparse.csr_matrix:
        # The derivative is linear in the feature column.
        acc = None
        for a, coef in enumerate(t_col):
            if coef == 0.0:
                continue
            term = self.raw_grads[a] * coef
            acc = term if acc is None else acc + term
        if acc is None:
            return sparse.csr_matrix((self.n, self.n))
        return acc.tocsr()

    def features(self, transform: np.ndarray) -> FeatureLocations:
        return FeatureLocations(self.q.values @ transform)


def _objective_terms(
    ws: _Workspace,
    transform: np.ndarray,
    lam: float,
    norm_tol: float,
) -> tuple[float, float]:
    """Return (cross-commutator mass, penalty) at the given transform."""
    k_out = transform.shape[1]
    cols = [ws.q.values @ transform[:, k] for k in range(k_out)]
    grads = [ws.out_grad(transform[:, k]) for k in range(k_out)]
    squares = [SparseOperator((g @ g).tocsr()) for g in grads]
    cross = 0.0
    for i in range(k_out):
        loc = SparseOperator(sparse.diags(cols[i], format="csr"))
        for j in range(k_out):
            if i == j:
                continue
            sigma = operator_norm(
                commutator(squares[j], loc), norm_tol, NORM_MAX_ITER
            )
            cross += float(sigma) ** 2
    penalty = 0.0
    for g in grads:
        inf = infinity_norm(SparseOperator(g))
        penalty += (inf - 1.0) ** 2
    return cross, lam * penalty


def pmo_objective(
    graph: Graph,
    q: FeatureLocations,
    transform: np.ndarray,
    lam: float,
    norm_tol: float = 1e-8,
) -> float:
    """Alignment objective at a given transform.

    At ``transform = 0`` every derivative vanishes, so the value is
    ``lam * K`` from the penalty alone.
    """
    transform = np.asarray(transform, dtype=np.float64)
    if transform.ndim != 2 or transform.shape[0] != q.n_features:
        raise ContractError(
            f"transform must be ({q.n_features}, K), got {transform.shape}")
    ws = _Workspace(graph, q)
    cross, penalty = _objective_terms(ws, transform, lam, norm_tol)
    return cross + penalty


def _fd_gradient(fun, transform: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    grad = np.zeros_like(transform)
    for a in range(transform.shape[0]):
        for k in range(transform.shape[1]):
            bump = np.zeros_like(transform)
            bump[a, k] = step
            grad[a, k] = (fun(transform + bump) - fun(transform - bump)) / (2 * step)
    return grad


def _top_singular_pair(mat: sparse.csr_matrix, tol: float, max_iter: int):
    """Top singular triple (sigma, u, v) by power iteration on mat* mat."""
    n = mat.shape[0]
    adj = mat.conjugate().T.tocsr()
    v = np.ones(n) / np.sqrt(n)
    sigma = 0.0
    for _ in range(max_iter):
        av = mat @ v
        new_sigma = float(np.linalg.norm(av))
        if new_sigma == 0.0:
            return 0.0, None, None
        w = adj @ av
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            break
        v = w / nw
        if abs(new_sigma - sigma) <= tol * max(new_sigma, 1e-300):
            sigma = new_sigma
            break
        sigma = new_sigma
    av = mat @ v
    sigma = float(np.linalg.norm(av))
    if sigma == 0.0:
        return 0.0, None, None
    return sigma, av / sigma, v


def _spectral_gradient(
    ws: _Workspace,
    transform: np.ndarray,
    lam: float,
    norm_tol: float,
) -> np.ndarray:
    """Objective gradient from top singular pairs of each cross commutator.

    Uses d(sigma)/d(M) = u v^T at a simple top singular value; at the rare
    nonsimple points this is a subgradient, which is all descent needs.
    """
    m_in, k_out = transform.shape
    cols = [ws.q.values @ transform[:, k] for k in range(k_out)]
    grads = [ws.out_grad(transform[:, k]) for k in range(k_out)]
    squares = [(g @ g).tocsr() for g in grads]
    grad = np.zeros_like(transform)

    for i in range(k_out):
        xi = cols[i]
        for j in range(k_out):
            if i == j:
                continue
            comm = (squares[j] @ sparse.diags(xi) - sparse.diags(xi) @ squares[j])
            sigma, u, v = _top_singular_pair(comm.tocsr(), norm_tol, NORM_MAX_ITER)
            if sigma == 0.0:
                continue
            gj = grads[j]
            gj_v = gj @ v
            gj_xiv = gj @ (xi * v)
            sq_v = gj @ gj_v
            for a in range(m_in):
                ga = ws.raw_grads[a]
                qa = ws.q.column(a)
                # d/dT[a,j]: [Ga Gj + Gj Ga, X_i]
                dm_v = (
                    ga @ gj_xiv + gj @ (ga @ (xi * v))
                    - xi * (ga @ gj_v) - xi * (gj @ (ga @ v))
                )
                grad[a, j] += 2.0 * sigma * float(np.real(np.vdot(u, dm_v)))
                # d/dT[a,i]: [Gj^2, X_{q_a}]
                dm_v = gj @ (gj @ (qa * v)) - qa * sq_v
                grad[a, i] += 2.0 * sigma * float(np.real(np.vdot(u, dm_v)))

    if lam > 0.0:
        for k in range(k_out):
            gk = grads[k]
            if gk.nnz == 0:
                inf = 0.0
                row = None
            else:
                sums = np.asarray(np.abs(gk).sum(axis=1)).ravel()
                row = int(np.argmax(sums))
                inf = float(sums[row])
            coef = 2.0 * lam * (inf - 1.0)
            if row is None:
                continue
            gk_row = gk.getrow(row).toarray().ravel()
            signs = np.sign(gk_row)
            for a in range(m_in):
                ga_row = ws.raw_grads[a].getrow(row).toarray().ravel()
                grad[a, k] += coef * float(np.dot(signs, ga_row))
    return grad


def _adam_run(objective, grad_fn, t0: np.ndarray, cfg: PMOConfig):
    t = t0.copy()
    obj = objective(t)
    if not np.isfinite(obj):
        raise DivergedError("objective not finite at the starting transform",
                            last_good=None)
    best_t, best_obj = t.copy(), obj
    trace = [(0, obj)]
    best_history = [obj]
    m = np.zeros_like(t)
    v = np.zeros_like(t)
    for it in range(1, cfg.max_iters + 1):
        g = grad_fn(t)
        if not np.all(np.isfinite(g)):
            raise DivergedError(
                f"gradient not finite at iteration {it}", last_good=best_t)
        m = _ADAM_BETA1 * m + (1 - _ADAM_BETA1) * g
        v = _ADAM_BETA2 * v + (1 - _ADAM_BETA2) * g * g
        mhat = m / (1 - _ADAM_BETA1 ** it)
        vhat = v / (1 - _ADAM_BETA2 ** it)
        t = t - cfg.learning_rate * mhat / (np.sqrt(vhat) + _ADAM_EPS)
        obj = objective(t)
        if not np.isfinite(obj):
            raise DivergedError(
                f"objective not finite at iteration {it}", last_good=best_t)
        if obj < best_obj:
            best_obj = obj
            best_t = t.copy()
            trace.append((it, obj))
        best_history.append(best_obj)
        if it >= _STALL_WINDOW:
            ref = best_history[-1 - _STALL_WINDOW]
            if ref - best_obj < _STALL_RTOL * max(abs(ref), 1e-300):
                break
    return best_t, best_obj, trace


def pmo_fit(graph: Graph, q: FeatureLocations, cfg: PMOConfig) -> PMOResult:
    """Fit the transform from an identity-padded start.

    Falls back to one seeded random restart when the first run improves the
    starting objective by less than one percent, and returns whichever run
    ends lower.  The result never has a higher objective than the start.
    """
    m_in = q.n_features
    k_out = cfg.out_features
    if m_in < k_out:
        raise ContractError(
            f"need at least {k_out} raw columns, got {m_in}")
    if not graph.is_connected():
        warnings.warn("alignment fit on a disconnected graph", stacklevel=2)
    ws = _Workspace(graph, q)

    def objective(t):
        cross, penalty = _objective_terms(ws, t, cfg.lam, cfg.norm_tol)
        return cross + penalty

    if cfg.grad_mode == "finite-difference":
        def grad_fn(t):
            return _fd_gradient(objective, t)
    else:
        def grad_fn(t):
            return _spectral_gradient(ws, t, cfg.lam, cfg.norm_tol)

    t0 = np.zeros((m_in, k_out))
    t0[:k_out, :k_out] = np.eye(k_out)
    init_obj = objective(t0)
    best_t, best_obj, trace = _adam_run(objective, grad_fn, t0, cfg)

    if init_obj > 0 and (init_obj - best_obj) < 0.01 * abs(init_obj):
        rng = np.random.default_rng(cfg.seed)
        t_rand = rng.normal(0.0, 1.0, size=(m_in, k_out))
        alt_t, alt_obj, alt_trace = _adam_run(objective, grad_fn, t_rand, cfg)
        if alt_obj < best_obj:
            best_t, best_obj, trace = alt_t, alt_obj, alt_trace

    deficiency = commuting_deficiency(graph, ws.features(best_t))
    return PMOResult(best_t, tuple(trace), float(deficiency))
