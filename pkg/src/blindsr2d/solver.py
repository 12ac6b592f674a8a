"""First-order solvers for the dual feasibility program and the nuclear-norm fit.

Both programs are handled by the same operator-splitting loop: one side
enforces the affine constraints (with the linear objective folded into the
proximal step), the other enforces cone membership or applies the
nuclear-norm proximal map.  PSD blocks are small enough that dense
eigendecompositions per iteration are cheap, and the affine projections
reduce to closed forms on disjoint coordinate groups, so no iterative
linear algebra is needed inside an iteration.

A solve is single-threaded and deterministic: identical inputs and
configuration produce bit-identical iterates.  Distinct solves share no
state and may run concurrently.
"""

import csv
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .model import MatrixTuple, adjoint_operator, forward_operator


@dataclass
class SolverConfig:
    """Knobs of the operator-splitting loop.

    ``rho`` is the penalty parameter; with ``adaptive_rho`` it is rescaled
    by a residual-ratio test every ``check_interval`` iterations.
    ``over_relax`` in (1, 2) blends the affine iterate toward the cone
    iterate and typically speeds convergence; 1 disables it.  Setting
    ``log_path`` writes an iteration log CSV (iteration, objective,
    primal residual, dual residual).
    """

    max_iters: int = 50000
    eps_primal: float = 1e-6
    eps_dual: float = 1e-6
    rho: float = 1.0
    adaptive_rho: bool = True
    check_interval: int = 25
    over_relax: float = 1.6
    log_path: str = None

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.eps_primal <= 0 or self.eps_dual <= 0:
            raise ValueError("tolerances must be positive")
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if self.check_interval < 1:
            raise ValueError("check_interval must be at least 1")
        if not 0 < self.over_relax < 2:
            raise ValueError("over_relax must lie in (0, 2)")


@dataclass
class SolveReport:
    """Solver output at the returned iterate."""

    status: str
    objective: float
    primal_residual: float
    dual_residual: float
    iterations: int
    rho: float
    q: np.ndarray = None
    psd_blocks: list = None
    parts: MatrixTuple = None

    def summary(self):
        return {
            "status": self.status,
            "objective": self.objective,
            "primal_residual": self.primal_residual,
            "dual_residual": self.dual_residual,
            "iterations": self.iterations,
        }


def project_psd(H, hermitian_tol=1e-10):
    """Frobenius-nearest positive semidefinite matrix to a Hermitian input.

    Eigenvalues are clipped at zero.  Raises if the input deviates from
    Hermitian symmetry by more than ``hermitian_tol`` relative to its norm.
    """
    H = np.asarray(H)
    scale = max(float(np.linalg.norm(H)), 1.0)
    if float(np.linalg.norm(H - H.conj().T)) > hermitian_tol * scale:
        raise ValueError("input is not Hermitian within tolerance")
    Hs = (H + H.conj().T) / 2.0
    w, V = np.linalg.eigh(Hs)
    if w[0] >= 0.0:
        return Hs
    P = (V * np.maximum(w, 0.0)) @ V.conj().T
    return (P + P.conj().T) / 2.0


def soft_threshold_singular(A, level):
    """Singular-value soft thresholding, the nuclear-norm proximal map."""
    U, s, Vh = np.linalg.svd(np.asarray(A, dtype=complex), full_matrices=False)
    s = np.maximum(s - level, 0.0)
    return (U * s) @ Vh


def _stack_norm(arrays):
    return float(np.sqrt(sum(float(np.vdot(a, a).real) for a in arrays)))


def _consensus_admm(prox_affine, prox_cone, z0, config, objective_fn,
                    convergence_fn=None):
    """Two-block splitting loop over a list of arrays.

    ``prox_affine(V, rho)`` minimizes the (possibly objective-shifted)
    quadratic over the affine set; ``prox_cone(W, rho)`` is the proximal
    map of the nonsmooth side.  Returns the cone-side iterate ``z``, the
    affine-side iterate ``x``, and loop diagnostics.
    """
    z = [np.array(b) for b in z0]
    u = [np.zeros_like(b) for b in z]
    rho = config.rho
    alpha = config.over_relax
    status = "max_iters"
    r_rel = s_rel = np.inf
    x = z
    log_rows = []
    iteration = 0

    for iteration in range(1, config.max_iters + 1):
        x = prox_affine([zj - uj for zj, uj in zip(z, u)], rho)
        if alpha != 1.0:
            x_hat = [alpha * xj + (1.0 - alpha) * zj for xj, zj in zip(x, z)]
        else:
            x_hat = x
        z_new = prox_cone([xh + uj for xh, uj in zip(x_hat, u)], rho)
        u = [uj + xh - zn for uj, xh, zn in zip(u, x_hat, z_new)]

        if convergence_fn is not None:
            r_rel, s_rel = convergence_fn(x, z_new, z, u, rho)
        else:
            r_norm = _stack_norm([xj - zn for xj, zn in zip(x, z_new)])
            s_norm = rho * _stack_norm([zn - zj for zn, zj in zip(z_new, z)])
            x_scale = max(_stack_norm(x), _stack_norm(z_new), 1.0)
            u_scale = max(rho * _stack_norm(u), 1.0)
            r_rel = r_norm / x_scale
            s_rel = s_norm / u_scale
        z_prev = z
        z = z_new

        if config.log_path is not None and iteration % config.check_interval == 0:
            log_rows.append((iteration, objective_fn(x), r_rel, s_rel))

        if not np.isfinite(r_rel) or r_rel > 1e8:
            status = "infeasible_suspected"
            break
        if r_rel <= config.eps_primal and s_rel <= config.eps_dual:
            status = "optimal"
            break
        if config.adaptive_rho and iteration % config.check_interval == 0:
            if r_rel > 10.0 * s_rel and rho < 1e6:
                rho *= 2.0
                u = [uj / 2.0 for uj in u]
            elif s_rel > 10.0 * r_rel and rho > 1e-6:
                rho /= 2.0
                u = [uj * 2.0 for uj in u]

    if config.log_path is not None:
        with open(config.log_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "objective", "primal_residual",
                             "dual_residual"])
            writer.writerows(log_rows)

    return x, z, u, rho, iteration, r_rel, s_rel, status


# ---------------------------------------------------------------------------
# Dual feasibility program
# ---------------------------------------------------------------------------


def solve_sdp(sdp, config=None):
    """Maximize ``Re <q, y>`` over the assembled feasibility program.

    Alternates a closed-form projection onto the affine constraint set
    (diagonal sums, coupling columns tied to ``q``, fixed identity corner,
    objective ascent on ``q``) with PSD projections of the per-input
    blocks.  Internally the blocks are rescaled by a congruence with
    ``diag(L I, I)`` so that all block entries are O(1); results are mapped
    back to the original scale on exit.
    """
    if config is None:
        config = SolverConfig()
    dims = sdp.dims
    L = dims.num_samples
    L2 = L * L
    scale = float(L)
    target_scale = scale * scale
    y_scaled = sdp.y / scale
    gamma = sdp.line_norm
    directions = sdp.line_directions          # [j] -> (L, K_j, L) as (p, i, m)
    conj_dirs = [np.conj(d) for d in directions]
    eyes = [np.eye(k) for k in dims.subspace_dims]

    last_q = {"value": np.zeros(L, dtype=complex)}

    def prox_affine(V, rho):
        q = np.zeros(L, dtype=complex)
        for j, Vj in enumerate(V):
            low = Vj[L2:, :L2].reshape(dims.subspace_dims[j], L, L)
            q += np.einsum("pim,ipm->p", conj_dirs[j], low)
        q = (q + y_scaled / (2.0 * rho)) / gamma
        last_q["value"] = q
        out = []
        for j, Vj in enumerate(V):
            X = np.empty_like(Vj)
            X[:L2, :L2] = sdp.diag.project(Vj[:L2, :L2], scale=target_scale)
            low = np.einsum("p,pim->ipm", q, directions[j]).reshape(
                dims.subspace_dims[j], L2)
            X[L2:, :L2] = low
            X[:L2, L2:] = low.conj().T
            X[L2:, L2:] = eyes[j]
            out.append(X)
        return out

    def prox_cone(W, rho):
        return [project_psd(Wj) for Wj in W]

    def objective_fn(x_blocks):
        return sdp.objective(last_q["value"] / scale)

    z0 = [np.eye(size, dtype=complex) for size in sdp.block_sizes]
    x, z, u, rho, iters, r_rel, s_rel, status = _consensus_admm(
        prox_affine, prox_cone, z0, config, objective_fn)

    q = last_q["value"] / scale
    psd_blocks = []
    for j, Zj in enumerate(z):
        Q = Zj[:L2, :L2] / target_scale
        psd_blocks.append(Q)
    return SolveReport(status=status, objective=sdp.objective(q),
                       primal_residual=r_rel, dual_residual=s_rel,
                       iterations=iters, rho=rho, q=q, psd_blocks=psd_blocks)


# ---------------------------------------------------------------------------
# Nuclear-norm constrained fit
# ---------------------------------------------------------------------------


def solve_nuclear_ls(dictionary, y, config=None):
    """Minimize the summed nuclear norms subject to exact data consistency.

    The equality constraints are enforced by projecting onto their solution
    set (a least-norm correction through the adjoint, using a Gram matrix
    factored once and cached); the nuclear-norm proximal step is
    singular-value soft thresholding.  Converged when the constraint
    residual of the thresholded iterate falls below ``eps_primal`` and its
    change per iteration below ``eps_dual``.
    """
    if config is None:
        config = SolverConfig()
    dims = dictionary.dims
    y = np.asarray(y, dtype=complex)
    gram = np.zeros((dims.num_samples, dims.num_samples), dtype=complex)
    for blk in dictionary.blocks:
        gram += np.einsum("pri,qri->pq", blk, np.conj(blk))
    factor = cho_factor((gram + gram.conj().T) / 2.0)
    y_scale = max(float(np.linalg.norm(y)), 1.0)

    def project_affine(V, rho):
        resid = forward_operator(MatrixTuple(list(V)), dictionary) - y
        w = cho_solve(factor, resid)
        correction = adjoint_operator(w, dictionary).parts
        return [Vj - c for Vj, c in zip(V, correction)]

    def prox_cone(W, rho):
        return [soft_threshold_singular(Wj, 1.0 / rho) for Wj in W]

    def objective_fn(parts):
        return float(sum(np.linalg.svd(p, compute_uv=False).sum() for p in parts))

    def convergence_fn(x, z_new, z_old, u, rho):
        constraint = forward_operator(MatrixTuple(list(z_new)), dictionary) - y
        r_rel = float(np.linalg.norm(constraint)) / y_scale
        step = _stack_norm([zn - zo for zn, zo in zip(z_new, z_old)])
        s_rel = step / max(_stack_norm(z_old), 1.0)
        return r_rel, s_rel

    z0 = MatrixTuple.zeros(dims).parts
    x, z, u, rho, iters, r_rel, s_rel, status = _consensus_admm(
        project_affine, prox_cone, z0, config, objective_fn, convergence_fn)

    parts = MatrixTuple([np.array(p) for p in z])
    return SolveReport(status=status, objective=objective_fn(parts.parts),
                       primal_residual=r_rel, dual_residual=s_rel,
                       iterations=iters, rho=rho, parts=parts)
