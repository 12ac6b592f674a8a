"""Discrete signal model with lifted linear measurements.

A single observed vector of odd length ``L = 2N + 1`` is a weighted
superposition of time- and frequency-shifted input signals.  Each input
lives in a known low-dimensional subspace, so the bilinear unknowns
(amplitudes and subspace coordinates) can be lifted into per-input
coefficient matrices that enter the measurements linearly.

Index conventions used repo-wide:

* sample / frequency indices run over ``-N .. N`` and map to array
  positions via ``idx = value + N``;
* double indices ``(m, l)`` are laid out m-major, i.e. a length ``L**2``
  vector reshapes to an ``(L, L)`` array with axis 0 = m and axis 1 = l;
* the index ``p - l`` wraps modulo ``L`` back into ``-N .. N``.

All functions are pure; instance generation is deterministic given a seed.
"""

from dataclasses import dataclass, field
import json

import numpy as np

TWO_PI = 2.0 * np.pi


class SeparationError(RuntimeError):
    """Rejection sampling could not place shifts at the requested separation."""


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Dimensions:
    """Problem sizes: bandwidth index, inputs, subspace dims, shift count."""

    n_half: int
    num_inputs: int
    subspace_dims: tuple
    num_shifts: int

    def __post_init__(self):
        object.__setattr__(self, "subspace_dims", tuple(int(k) for k in self.subspace_dims))
        if self.n_half < 0:
            raise ValueError("n_half must be nonnegative")
        if self.num_inputs < 1:
            raise ValueError("need at least one input")
        if len(self.subspace_dims) != self.num_inputs:
            raise ValueError("one subspace dimension per input required")
        if self.num_shifts < 1:
            raise ValueError("need at least one shift pair")
        for k in self.subspace_dims:
            if not 1 <= k <= self.num_samples:
                raise ValueError(f"subspace dimension {k} outside 1..{self.num_samples}")

    @property
    def num_samples(self):
        """Number of observed samples, always odd."""
        return 2 * self.n_half + 1


@dataclass(frozen=True)
class ShiftPair:
    """Normalized time shift and frequency shift, each reduced modulo 1."""

    tau: float
    nu: float

    def __post_init__(self):
        object.__setattr__(self, "tau", float(self.tau) % 1.0)
        object.__setattr__(self, "nu", float(self.nu) % 1.0)

    def as_array(self):
        return np.array([self.tau, self.nu])


@dataclass
class SubspaceBasis:
    """Known basis of one input's subspace; row ``l + N`` spans sample ``l``."""

    entries: np.ndarray

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=complex)
        if self.entries.ndim != 2:
            raise ValueError("basis must be a 2-D array")

    @property
    def dim(self):
        return self.entries.shape[1]


@dataclass
class ModelInstance:
    """Ground truth and known quantities of one recovery problem."""

    dims: Dimensions
    bases: list
    orientations: list
    amplitudes: np.ndarray
    shifts: list
    y: np.ndarray

    def __post_init__(self):
        L = self.dims.num_samples
        if len(self.bases) != self.dims.num_inputs:
            raise ValueError("one basis per input required")
        for j, basis in enumerate(self.bases):
            if basis.entries.shape != (L, self.dims.subspace_dims[j]):
                raise ValueError(f"basis {j} has shape {basis.entries.shape}, "
                                 f"expected {(L, self.dims.subspace_dims[j])}")
        self.orientations = [np.asarray(h, dtype=complex) for h in self.orientations]
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        self.y = np.asarray(self.y, dtype=complex)
        if self.amplitudes.shape != (self.dims.num_shifts,):
            raise ValueError("one amplitude per shift required")
        if len(self.shifts) != self.dims.num_shifts:
            raise ValueError("shift count does not match dims")
        if self.y.shape != (L,):
            raise ValueError("observation length must equal the sample count")

    def basis_arrays(self):
        return [b.entries for b in self.bases]

    def input_signals(self):
        """Per-input sample vectors, i.e. each basis applied to its coordinates."""
        return [b.entries @ h for b, h in zip(self.bases, self.orientations)]


@dataclass
class LiftedDictionary:
    """Per-input, per-sample lifted measurement matrices.

    ``blocks[j]`` has shape ``(L, L**2, K_j)``; ``blocks[j][p + N]`` is the
    matrix pairing sample ``p`` with the rank-one lifted coefficients of
    input ``j``.
    """

    dims: Dimensions
    blocks: list

    def block(self, j, p):
        """Matrix of input ``j`` at sample index ``p`` in ``-N .. N``."""
        return self.blocks[j][p + self.dims.n_half]


@dataclass
class MatrixTuple:
    """Tuple of per-input coefficient matrices, each ``K_j x L**2``."""

    parts: list

    def __post_init__(self):
        self.parts = [np.asarray(part, dtype=complex) for part in self.parts]

    @classmethod
    def zeros(cls, dims):
        L2 = dims.num_samples ** 2
        return cls([np.zeros((k, L2), dtype=complex) for k in dims.subspace_dims])

    def copy(self):
        return MatrixTuple([part.copy() for part in self.parts])

    def real_inner(self, other):
        """Real inner product summed over all parts."""
        return float(sum(np.vdot(o, s).real for s, o in zip(self.parts, other.parts)))

    def norm(self):
        return float(np.sqrt(sum(np.linalg.norm(part) ** 2 for part in self.parts)))


# ---------------------------------------------------------------------------
# Kernels and atoms
# ---------------------------------------------------------------------------


def dirichlet_kernel(t, n_half):
    """Periodic interpolation kernel ``(1/L) * sum_{m=-N..N} cos(2 pi t m)``.

    Evaluated through the closed form ``sin(L pi t) / (L sin(pi t))`` with a
    direct cosine-series fallback where the denominator is tiny, so integer
    arguments return exactly 1 and grid offsets return 0 to round-off.

    Parameters
    ----------
    t : float or array_like
        Evaluation points; any real values (the kernel has period 1).
    n_half : int
        Half-bandwidth index N; the kernel sums ``2 N + 1`` harmonics.
    """
    L = 2 * n_half + 1
    t_arr = np.asarray(t, dtype=float)
    scalar = t_arr.ndim == 0
    t_arr = np.atleast_1d(t_arr)

    # fold into [-1/2, 1/2]: keeps both sine arguments well conditioned
    t_arr = np.mod(t_arr, 1.0)
    t_arr = np.where(t_arr > 0.5, t_arr - 1.0, t_arr)

    denom = np.sin(np.pi * t_arr)
    small = np.abs(denom) < 1e-8
    safe = np.where(small, 1.0, denom)
    out = np.sin(L * np.pi * t_arr) / (L * safe)
    if np.any(small):
        ts = t_arr[small]
        if n_half == 0:
            series = np.ones_like(ts)
        else:
            m = np.arange(1, n_half + 1)
            series = (1.0 + 2.0 * np.cos(TWO_PI * np.outer(ts, m)).sum(axis=1)) / L
        out[small] = series
    return float(out[0]) if scalar else out


def _as_shift(s):
    return s if isinstance(s, ShiftPair) else ShiftPair(*s)


def build_atom(shift, dims):
    """Unit-norm rank-one atom sampled on the two-dimensional kernel grid.

    Entry ``(m, l)`` equals the time kernel at ``l/L - tau`` times the
    frequency kernel at ``m/L - nu``; the vector is m-major and real valued.
    """
    s = _as_shift(shift)
    N = dims.n_half
    L = dims.num_samples
    grid = np.arange(-N, N + 1) / L
    k_tau = dirichlet_kernel(grid - s.tau, N)
    k_nu = dirichlet_kernel(grid - s.nu, N)
    return np.outer(k_nu, k_tau).ravel()


def build_lifted_dictionary(bases, dims):
    """Assemble the lifted measurement matrices for every input and sample.

    Row ``(m, l)`` of the block at sample ``p`` is the basis row at index
    ``p - l`` (wrapped modulo L into ``-N .. N``) scaled by the unit-modulus
    phase ``exp(i 2 pi m p / L)``.
    """
    N = dims.n_half
    L = dims.num_samples
    m_vals = np.arange(-N, N + 1)
    blocks = []
    for j, basis in enumerate(bases):
        D = basis.entries
        if D.shape != (L, dims.subspace_dims[j]):
            raise ValueError(f"basis {j} has shape {D.shape}, expected "
                             f"{(L, dims.subspace_dims[j])}")
        per_p = np.empty((L, L * L, D.shape[1]), dtype=complex)
        for p in range(-N, N + 1):
            row_idx = np.mod(p - m_vals + N, L)  # m_vals doubles as l values
            rows = D[row_idx, :]                 # (L, K): row l -> basis row p - l
            phases = np.exp(2j * np.pi * p * m_vals / L)
            per_p[p + N] = (phases[:, None, None] * rows[None, :, :]).reshape(L * L, -1)
        blocks.append(per_p)
    return LiftedDictionary(dims=dims, blocks=blocks)


# ---------------------------------------------------------------------------
# Measurement operator and synthesis
# ---------------------------------------------------------------------------


def forward_operator(parts, dictionary):
    """Map a coefficient-matrix tuple to the length-L observation vector.

    Sample ``p`` is ``sum_j trace(block(j, p) @ B_j)``, i.e. the inner
    product ``<B_j, block(j, p)^H>`` under the convention
    ``<A, B> = trace(B^H A)`` shared with :func:`adjoint_operator`.
    """
    dims = dictionary.dims
    L = dims.num_samples
    mats = parts.parts if isinstance(parts, MatrixTuple) else list(parts)
    if len(mats) != dims.num_inputs:
        raise ValueError("tuple length does not match the dictionary")
    y = np.zeros(L, dtype=complex)
    for j, B in enumerate(mats):
        B = np.asarray(B, dtype=complex)
        if B.shape != (dims.subspace_dims[j], L * L):
            raise ValueError(f"part {j} has shape {B.shape}, expected "
                             f"{(dims.subspace_dims[j], L * L)}")
        y += np.einsum("pri,ir->p", dictionary.blocks[j], B)
    return y


def adjoint_operator(q, dictionary):
    """Adjoint of :func:`forward_operator`; returns a coefficient tuple.

    Part ``j`` is ``sum_p q_p block(j, p)^H``, which satisfies
    ``<q, forward(B)> = <adjoint(q), B>`` in the complex inner product.
    """
    dims = dictionary.dims
    q = np.asarray(q, dtype=complex)
    if q.shape != (dims.num_samples,):
        raise ValueError("dual vector length must equal the sample count")
    parts = [np.einsum("p,pri->ir", q, np.conj(blk)) for blk in dictionary.blocks]
    return MatrixTuple(parts)


def lifted_tuple(instance):
    """Ground-truth coefficient tuple: one rank-one term per shift and input."""
    atoms = [build_atom(s, instance.dims) for s in instance.shifts]
    parts = []
    for h in instance.orientations:
        B = np.zeros((h.size, instance.dims.num_samples ** 2), dtype=complex)
        for b_k, atom in zip(instance.amplitudes, atoms):
            B += b_k * np.outer(h, atom)
        parts.append(B)
    return MatrixTuple(parts)


def synthesize_observation(dims, bases, orientations, amplitudes, shifts):
    """Observation vector from the sampled double-sum model.

    Computes, for each sample ``p``,
    ``(1/L) sum_k b_k sum_j sum_{m,l} x_j(l) e^{i2pi m(p-l)/L}
    e^{i2pi(p nu_k - m tau_k)}`` with ``x_j`` the input signals.  This path
    uses only exponential sums; the lifted path through
    :func:`forward_operator` must agree with it and is exercised in tests.
    """
    N = dims.n_half
    L = dims.num_samples
    idx = np.arange(-N, N + 1)
    x_total = np.zeros(L, dtype=complex)
    for basis, h in zip(bases, orientations):
        x_total += basis.entries @ np.asarray(h, dtype=complex)
    # centered DFT of the summed inputs over l, one value per harmonic m
    E = np.exp(-2j * np.pi * np.outer(idx, idx) / L)
    spectrum = E @ x_total
    F = np.exp(2j * np.pi * np.outer(idx, idx) / L)  # rows p, cols m
    y = np.zeros(L, dtype=complex)
    for b_k, s in zip(np.asarray(amplitudes, dtype=complex), shifts):
        s = _as_shift(s)
        shifted = np.exp(-2j * np.pi * idx * s.tau) * spectrum
        y += b_k * np.exp(2j * np.pi * idx * s.nu) * (F @ shifted) / L
    return y


# ---------------------------------------------------------------------------
# Random instances
# ---------------------------------------------------------------------------


def _complex_normal(rng, shape):
    # unit total variance: each part has variance 1/2
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def wrap_distance(a, b):
    """Distance on the unit circle: ``min(|a-b|, 1-|a-b|)`` after reduction."""
    d = abs((float(a) - float(b)) % 1.0)
    return min(d, 1.0 - d)


def shift_distance_inf(s1, s2):
    """Wrap-around infinity-norm distance between two shift pairs."""
    s1, s2 = _as_shift(s1), _as_shift(s2)
    return max(wrap_distance(s1.tau, s2.tau), wrap_distance(s1.nu, s2.nu))


def shift_distance_l2(s1, s2):
    """Wrap-around Euclidean distance between two shift pairs."""
    s1, s2 = _as_shift(s1), _as_shift(s2)
    return float(np.hypot(wrap_distance(s1.tau, s2.tau), wrap_distance(s1.nu, s2.nu)))


def default_min_separation(dims):
    """Default pairwise shift separation, ``2.5 / N`` (zero when S = 1)."""
    if dims.num_shifts == 1:
        return 0.0
    return 2.5 / max(dims.n_half, 1)


def generate_random_instance(dims, seed, min_separation=None, shifts=None):
    """Draw a random problem instance, deterministic in ``seed``.

    Basis entries, orientation coordinates, and amplitudes are i.i.d.
    complex standard normal; orientations are normalized to unit Euclidean
    norm and amplitudes to unit modulus.  Shift pairs are uniform on the
    unit square, re-drawn until every pair is at least ``min_separation``
    apart in the wrap-around infinity norm (default ``2.5 / N`` when more
    than one shift is requested).  Passing ``shifts`` pins them explicitly
    and skips the rejection loop.
    """
    rng = np.random.default_rng(seed)
    bases = [SubspaceBasis(_complex_normal(rng, (dims.num_samples, k)))
             for k in dims.subspace_dims]
    orientations = []
    for k in dims.subspace_dims:
        h = _complex_normal(rng, k)
        orientations.append(h / np.linalg.norm(h))
    b = _complex_normal(rng, dims.num_shifts)
    amplitudes = b / np.abs(b)

    if shifts is None:
        sep = default_min_separation(dims) if min_separation is None else float(min_separation)
        if not 0.0 <= sep < 0.5:
            raise ValueError("min_separation must lie in [0, 0.5)")
        accepted = []
        attempts = 0
        cap = 5000 * dims.num_shifts
        while len(accepted) < dims.num_shifts:
            if attempts >= cap:
                raise SeparationError(
                    f"could not place {dims.num_shifts} shifts at separation {sep}")
            candidate = ShiftPair(rng.random(), rng.random())
            attempts += 1
            if all(shift_distance_inf(candidate, s) >= sep for s in accepted):
                accepted.append(candidate)
        shifts = accepted
    else:
        shifts = [_as_shift(s) for s in shifts]
        if len(shifts) != dims.num_shifts:
            raise ValueError("explicit shift count does not match dims")

    y = synthesize_observation(dims, bases, orientations, amplitudes, shifts)
    return ModelInstance(dims=dims, bases=bases, orientations=orientations,
                         amplitudes=amplitudes, shifts=shifts, y=y)


# ---------------------------------------------------------------------------
# Shared spectral helper
# ---------------------------------------------------------------------------


def basis_spectrum(basis, dims):
    """Centered DFT of the conjugated basis columns over the sample index.

    Returns a ``(K, L)`` array whose ``(i, m + N)`` entry is
    ``sum_l conj(D[l, i]) e^{-i 2 pi m l / L}``.  This is the only quantity
    through which a basis enters the dual-polynomial coefficients and the
    feasibility-program coupling blocks.
    """
    N = dims.n_half
    L = dims.num_samples
    idx = np.arange(-N, N + 1)
    E = np.exp(-2j * np.pi * np.outer(idx, idx) / L)
    return (E @ np.conj(basis.entries)).T


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _complex_to_pairs(arr):
    arr = np.asarray(arr, dtype=complex)
    return np.stack([arr.real, arr.imag], axis=-1).tolist()


def _pairs_to_complex(data):
    arr = np.asarray(data, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]


def instance_to_dict(instance):
    """JSON-ready dict; complex entries become ``[re, im]`` pairs.

    Schema: ``dims`` (n_half, num_samples, num_inputs, subspace_dims,
    num_shifts), ``bases`` (per input, row-major L x K_j), ``orientations``,
    ``amplitudes``, ``shifts`` (tau/nu records), ``y``.
    """
    d = instance.dims
    return {
        "dims": {
            "n_half": d.n_half,
            "num_samples": d.num_samples,
            "num_inputs": d.num_inputs,
            "subspace_dims": list(d.subspace_dims),
            "num_shifts": d.num_shifts,
        },
        "bases": [_complex_to_pairs(b.entries) for b in instance.bases],
        "orientations": [_complex_to_pairs(h) for h in instance.orientations],
        "amplitudes": _complex_to_pairs(instance.amplitudes),
        "shifts": [{"tau": s.tau, "nu": s.nu} for s in instance.shifts],
        "y": _complex_to_pairs(instance.y),
    }


def instance_from_dict(data):
    dims = Dimensions(
        n_half=int(data["dims"]["n_half"]),
        num_inputs=int(data["dims"]["num_inputs"]),
        subspace_dims=tuple(data["dims"]["subspace_dims"]),
        num_shifts=int(data["dims"]["num_shifts"]),
    )
    return ModelInstance(
        dims=dims,
        bases=[SubspaceBasis(_pairs_to_complex(b)) for b in data["bases"]],
        orientations=[_pairs_to_complex(h) for h in data["orientations"]],
        amplitudes=_pairs_to_complex(data["amplitudes"]),
        shifts=[ShiftPair(s["tau"], s["nu"]) for s in data["shifts"]],
        y=_pairs_to_complex(data["y"]),
    )


def save_instance(instance, path):
    with open(path, "w") as fh:
        json.dump(instance_to_dict(instance), fh, sort_keys=True)


def load_instance(path):
    with open(path) as fh:
        return instance_from_dict(json.load(fh))
