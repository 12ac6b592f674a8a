"""Assembly of the dual feasibility semidefinite program.

The dual of the lifted atomic-norm problem maximizes the real inner product
of a dual vector ``q`` with the observation, subject to each vector-valued
dual polynomial staying inside the unit ball everywhere on the torus.  That
sup-norm constraint is expressed, per input ``j``, as the linear matrix
inequality ``[[Q_j, C_j(q)^H], [C_j(q), I]] >= 0`` together with one scalar
constraint per diagonal of ``Q_j``: entries summed along the diagonal with
offset ``(u, v)`` must equal 1 at the zero offset and 0 elsewhere.  Here
``C_j(q)`` is the coefficient matrix of the dual polynomial, linear in
``q``, and ``Q_j`` is a free Hermitian matrix of order ``L**2``.

Rows and columns of ``Q_j`` (and columns of ``C_j``) are indexed by the
double index ``(p, m)`` laid out p-major: ``flat = (p + N) * L + (m + N)``.

Assembly is pure; a :class:`DualSDP` is immutable in practice and safe to
share across threads.
"""

from dataclasses import dataclass

import numpy as np

from .model import Dimensions, basis_spectrum


# ---------------------------------------------------------------------------
# Coupling block: dual vector -> polynomial coefficient matrix
# ---------------------------------------------------------------------------


def coupling_block(q, basis, dims):
    """Coefficient matrix of one input's dual polynomial, linear in ``q``.

    Entry ``(i, (p, m))`` equals ``(1/L) q_p sum_l conj(D[l, i])
    e^{i 2 pi m (p - l) / L}``; columns follow the p-major layout.
    """
    N = dims.n_half
    L = dims.num_samples
    q = np.asarray(q, dtype=complex)
    if q.shape != (L,):
        raise ValueError("dual vector length must equal the sample count")
    spectrum = basis_spectrum(basis, dims)            # (K, L) over m
    idx = np.arange(-N, N + 1)
    cross = np.exp(2j * np.pi * np.outer(idx, idx) / L)  # (p, m) phases
    # arr[i, p, m] = (1/L) q[p] cross[p, m] spectrum[i, m]
    arr = (q[None, :, None] * cross[None, :, :] * spectrum[:, None, :]) / L
    return arr.reshape(spectrum.shape[0], L * L)


# ---------------------------------------------------------------------------
# Diagonal-sum constraints
# ---------------------------------------------------------------------------


@dataclass
class DiagonalConstraints:
    """Sparse description of the per-diagonal sum constraints on ``Q_j``.

    ``diag_id`` labels every entry of an ``L**2 x L**2`` matrix with the
    flat id of its offset pair; ``counts`` and ``targets`` are indexed by
    that id.  The dense Kronecker selector matrices are never materialized.
    """

    n_half: int
    diag_id: np.ndarray
    counts: np.ndarray
    targets: np.ndarray

    @property
    def num_offsets(self):
        return self.targets.size

    def offset_id(self, u, v):
        """Flat id of the diagonal with offsets ``u`` (outer) and ``v`` (inner)."""
        L = 2 * self.n_half + 1
        span = 2 * L - 1
        if not (-(L - 1) <= u <= L - 1 and -(L - 1) <= v <= L - 1):
            raise ValueError("offset outside the representable band")
        return (u + L - 1) * span + (v + L - 1)

    def entry_indices(self, u, v):
        """Flat ``(row, col)`` index pairs of the ``(u, v)`` diagonal."""
        rows, cols = np.nonzero(self.diag_id == self.offset_id(u, v))
        return rows, cols

    def diagonal_sums(self, Q):
        """Sum of the entries of ``Q`` along every offset diagonal."""
        flat = np.asarray(Q).ravel()
        ids = self.diag_id.ravel()
        sums = np.bincount(ids, weights=flat.real, minlength=self.num_offsets)
        if np.iscomplexobj(flat):
            sums = sums + 1j * np.bincount(ids, weights=flat.imag,
                                           minlength=self.num_offsets)
        return sums

    def project(self, Q, scale=1.0):
        """Nearest matrix whose diagonal sums equal ``scale * targets``.

        Each entry lies on exactly one diagonal, so the projection shifts
        every diagonal by its own mean violation; Hermitian inputs stay
        Hermitian because mirror diagonals receive conjugate shifts.
        """
        sums = self.diagonal_sums(Q)
        shift = (sums - scale * self.targets) / self.counts
        return Q - shift[self.diag_id]

    def residual(self, Q, scale=1.0):
        sums = self.diagonal_sums(Q)
        return float(np.linalg.norm(sums - scale * self.targets))


def diagonal_constraints(dims):
    """Index machinery for the ``(2L-1)**2`` diagonal-sum constraints."""
    L = dims.num_samples
    span = 2 * L - 1
    flat = np.arange(L * L)
    outer = flat // L
    inner = flat % L
    du = outer[None, :] - outer[:, None]
    dv = inner[None, :] - inner[:, None]
    diag_id = (du + L - 1) * span + (dv + L - 1)
    counts = np.bincount(diag_id.ravel(), minlength=span * span).astype(float)
    targets = np.zeros(span * span)
    targets[(L - 1) * span + (L - 1)] = 1.0
    return DiagonalConstraints(n_half=dims.n_half, diag_id=diag_id,
                               counts=counts, targets=targets)


# ---------------------------------------------------------------------------
# Assembled program
# ---------------------------------------------------------------------------


@dataclass
class DualSDP:
    """Data of the assembled dual program.

    Maximize ``Re <q, y>`` over ``q`` and Hermitian ``Q_j >= 0`` subject to
    the per-input LMI blocks and the diagonal-sum constraints.  The point
    ``q = 0``, ``Q_j = I / L**2`` is feasible: the main-diagonal sum is 1
    and every off-diagonal sum vanishes.

    ``spectra[j]`` caches the basis transform through which ``q`` enters
    the coupling blocks; ``line_directions[j][p]`` is the fixed matrix
    multiplying ``q_p`` in the p-th column group, and ``line_norm`` its
    total squared norm (independent of ``p``).
    """

    dims: Dimensions
    y: np.ndarray
    bases: list
    spectra: list
    diag: DiagonalConstraints
    line_directions: list
    line_norm: float

    @property
    def block_sizes(self):
        L2 = self.dims.num_samples ** 2
        return [L2 + k for k in self.dims.subspace_dims]

    @property
    def num_constraints_per_input(self):
        return (2 * self.dims.num_samples - 1) ** 2

    def coupling(self, j, q):
        return coupling_block(q, self.bases[j], self.dims)

    def objective(self, q):
        """Real inner product of the dual vector with the observation."""
        return float(np.vdot(self.y, np.asarray(q, dtype=complex)).real)

    def feasible_blocks(self):
        """Strictly feasible starting blocks: ``diag(I / L**2, I)`` per input."""
        L2 = self.dims.num_samples ** 2
        blocks = []
        for k in self.dims.subspace_dims:
            M = np.zeros((L2 + k, L2 + k), dtype=complex)
            M[:L2, :L2] = np.eye(L2) / L2
            M[L2:, L2:] = np.eye(k)
            blocks.append(M)
        return blocks

    def constraint_violation(self, q, blocks):
        """Max violation of the affine constraints at ``(q, blocks)``."""
        L2 = self.dims.num_samples ** 2
        worst = 0.0
        for j, M in enumerate(blocks):
            k = self.dims.subspace_dims[j]
            worst = max(worst, float(np.abs(M[L2:, L2:] - np.eye(k)).max()))
            worst = max(worst, float(np.abs(M[L2:, :L2] - self.coupling(j, q)).max()))
            sums = self.diag.diagonal_sums(M[:L2, :L2])
            worst = max(worst, float(np.abs(sums - self.diag.targets).max()))
        return worst


def assemble_dual_sdp(instance):
    """Build the dual program for one problem instance (observation included)."""
    dims = instance.dims
    N = dims.n_half
    L = dims.num_samples
    idx = np.arange(-N, N + 1)
    spectra = [basis_spectrum(b, dims) for b in instance.bases]
    cross = np.exp(2j * np.pi * np.outer(idx, idx) / L)  # (p, m)
    line_directions = []
    for spec in spectra:
        # direction[p][i, m] multiplies q_p in column group p
        line_directions.append(cross[:, None, :] * spec[None, :, :] / L)
    line_norm = float(sum(np.linalg.norm(d[0]) ** 2 for d in line_directions))
    return DualSDP(dims=dims, y=np.asarray(instance.y, dtype=complex),
                   bases=list(instance.bases), spectra=spectra,
                   diag=diagonal_constraints(dims),
                   line_directions=line_directions, line_norm=line_norm)


# ---------------------------------------------------------------------------
# Complex-to-real symmetric embedding
# ---------------------------------------------------------------------------


def embed_hermitian(H):
    """Real symmetric embedding ``[[Re H, -Im H], [Im H, Re H]]``.

    The embedding is positive semidefinite exactly when ``H`` is, each
    eigenvalue of ``H`` appearing twice; its trace is ``2 trace(Re H)``.
    """
    H = np.asarray(H, dtype=complex)
    return np.block([[H.real, -H.imag], [H.imag, H.real]])


def extract_hermitian(R):
    """Inverse of :func:`embed_hermitian`, averaging the redundant copies."""
    R = np.asarray(R, dtype=float)
    n = R.shape[0] // 2
    real = (R[:n, :n] + R[n:, n:]) / 2.0
    imag = (R[n:, :n] - R[:n, n:]) / 2.0
    return real + 1j * imag


def embed_vector(q):
    """Real coordinates ``[Re q; Im q]`` of a complex vector."""
    q = np.asarray(q, dtype=complex)
    return np.concatenate([q.real, q.imag])


def extract_vector(v):
    v = np.asarray(v, dtype=float)
    n = v.size // 2
    return v[:n] + 1j * v[n:]


@dataclass
class RealEmbeddedSDP:
    """Real symmetric-cone form of a :class:`DualSDP`.

    Blocks double in order; the complex objective ``Re <q, y>`` becomes the
    plain dot product with ``objective_vector`` in the embedded coordinates
    ``[Re q; Im q]``.  Each complex diagonal-sum constraint splits into a
    pair of real constraints (real and imaginary part), except the
    Hermitian-coefficient case where the imaginary part vanishes
    identically and a single real constraint remains.
    """

    source: DualSDP
    block_sizes: list
    objective_vector: np.ndarray

    def embed_solution(self, q, blocks):
        return embed_vector(q), [embed_hermitian(M) for M in blocks]

    def extract_solution(self, v, real_blocks):
        return extract_vector(v), [extract_hermitian(R) for R in real_blocks]

    def objective(self, v):
        return float(self.objective_vector @ np.asarray(v, dtype=float))

    def real_constraints(self, u, v):
        """Number of real scalar equations the ``(u, v)`` diagonal induces.

        The zero offset has a Hermitian coefficient matrix and a real
        target, so its imaginary part is identically zero; every other
        offset contributes a real and an imaginary equation.
        """
        return 1 if (u, v) == (0, 0) else 2

    def constraint_violation(self, v, real_blocks):
        q, blocks = self.extract_solution(v, real_blocks)
        return self.source.constraint_violation(q, blocks)


def embed_real(sdp):
    """Embed the assembled program over the real symmetric cone.

    The optimum of the embedded program equals the complex optimum (PSD
    membership and all affine constraints commute with the embedding), and
    extracting ``q`` from embedded coordinates preserves the objective.
    """
    objective_vector = embed_vector(sdp.y)
    return RealEmbeddedSDP(source=sdp,
                           block_sizes=[2 * s for s in sdp.block_sizes],
                           objective_vector=objective_vector)


# ---------------------------------------------------------------------------
# Sparse text export
# ---------------------------------------------------------------------------


def export_program(sdp, path):
    """Write the assembled program in a plain sparse text format.

    Layout (one record per line, whitespace separated):

    * ``dims N L num_inputs S`` followed by the subspace dimensions;
    * ``objective p re im`` for each entry of the observation vector;
    * ``block j size`` for each input;
    * ``coupling j p i m re im`` giving the fixed matrix that multiplies
      ``q_p`` in the column group of ``p`` (nonzero entries only);
    * ``constraint u v target`` for each diagonal offset of ``Q_j`` (the
      same set applies to every input block).
    """
    dims = sdp.dims
    N = dims.n_half
    L = dims.num_samples
    with open(path, "w") as fh:
        fh.write(f"dims {N} {L} {dims.num_inputs} {dims.num_shifts} "
                 + " ".join(str(k) for k in dims.subspace_dims) + "\n")
        for p in range(-N, N + 1):
            yp = sdp.y[p + N]
            fh.write(f"objective {p} {yp.real!r} {yp.imag!r}\n")
        for j, size in enumerate(sdp.block_sizes):
            fh.write(f"block {j} {size}\n")
        for j, directions in enumerate(sdp.line_directions):
            K = directions.shape[1]
            for p in range(-N, N + 1):
                block = directions[p + N]
                for i in range(K):
                    for m in range(-N, N + 1):
                        val = block[i, m + N]
                        if val != 0:
                            fh.write(f"coupling {j} {p} {i} {m} "
                                     f"{val.real!r} {val.imag!r}\n")
        for u in range(-(L - 1), L):
            for v in range(-(L - 1), L):
                target = 1.0 if (u == 0 and v == 0) else 0.0
                fh.write(f"constraint {u} {v} {target}\n")
