"""Compressed quantum memory models built from exponential-sum amplitudes.

Each decaying term of the amplitude gets a generator state; the pairwise
overlaps that make one discrete step of the dynamics an exact isometry form
a Gram matrix, whose rank-revealing factorization embeds the generators in
the smallest usable memory space.  A unitary on (memory x ancilla) then
implements the step: the ancilla reads 0 for "no event" and 1 for "event",
and the memory returns to a fixed reset state whenever an event fires.

The kernel-spectrum analysis discretizes the steady-state memory ensemble
as an integral kernel; for an amplitude that is a sum of N exponentials the
kernel is a sum of N separable products, so at most N eigenvalues are
non-zero at any grid resolution.
"""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from qcoarse._util import fmt_float
from qcoarse.errors import (
    ConstructionFailureError,
    DomainError,
    InconsistentDecompositionError,
    InputError,
    NumericalFailureError,
    TailUnderflowError,
)
from qcoarse.expsum import ExpSum

__all__ = [
    "GramMatrix",
    "QuantumModel",
    "MemoryState",
    "KernelSpectrum",
    "gram_matrix",
    "embed_generators",
    "build_unitary",
    "memory_state",
    "model_survival",
    "kernel_spectrum",
]

RANK_THRESHOLD = 1e-10
PSD_TOLERANCE = 1e-10
ISOMETRY_GATE = 1e-9
UNITARITY_GATE = 1e-10


@dataclass(frozen=True)
class GramMatrix:
    """Generator-state overlaps for one timestep.

    ``matrix`` is Hermitian PSD with every diagonal entry equal to
    ``eta**2``; ``event_amps[j]`` is the amplitude ``eta * s_j`` sent to the
    reset state when generator j fires within one step.
    """

    matrix: np.ndarray
    eta: float
    delta_t: float
    c_prime: np.ndarray
    event_amps: np.ndarray


def gram_matrix(exp_sum: ExpSum, delta_t: float) -> GramMatrix:
    """Overlap matrix making one discrete step an exact isometry.

    The fixed point of the step recursion is
    ``M_jk = s_j s_k / (1 - exp((conj(z_j) + z_k) dt))`` with
    ``s_j = sqrt(1 - exp(-2 gamma_j dt))``; the uniform rescale
    ``eta^2 = 1 / (c'^dag M c')`` with ``c'_j = c_j / sqrt(2 gamma_j)``
    gives ``G = eta^2 M`` and a reset state of exactly unit norm.
    """
    if delta_t <= 0 or not np.isfinite(delta_t):
        raise InputError("delta_t must be a positive finite number")
    norm_sq = sum(abs(t.c) ** 2 / (2 * t.gamma) for t in exp_sum.terms)
    # quick normalization guard; the full pairwise check lives in ExpSum
    if not np.isfinite(norm_sq):
        raise InputError("exponential sum has non-finite weights")

    c = np.array([t.c for t in exp_sum.terms], dtype=complex)
    z = np.array([t.z for t in exp_sum.terms], dtype=complex)
    gamma = np.array([t.gamma for t in exp_sum.terms], dtype=float)

    s = np.sqrt(1.0 - np.exp(-2.0 * gamma * delta_t))
    m_mat = np.outer(s, s) / (1.0 - np.exp((z.conj()[:, None] + z[None, :]) * delta_t))
    np.fill_diagonal(m_mat, 1.0)

    # componentwise real division: exact when c is real, so the normalized
    # single-term case lands on c' = 1 and G = [1] bit-exactly
    root2g = np.sqrt(2.0 * gamma)
    c_prime = c.real / root2g + 1j * (c.imag / root2g)
    val = complex(c_prime.conj() @ m_mat @ c_prime)
    if not np.isfinite(val.real) or abs(val.imag) > 1e-10 * max(abs(val), 1e-300):
        raise InconsistentDecompositionError(
            f"reset-state norm form is not real: {val}"
        )
    if val.real <= 0:
        raise InconsistentDecompositionError(
            f"reset-state norm form is not positive: {val.real}"
        )
    eta = 1.0 / np.sqrt(val.real)
    g_mat = eta**2 * m_mat

    evals = np.linalg.eigvalsh(g_mat)
    trace = float(np.real(np.trace(g_mat)))
    if evals[0] < -PSD_TOLERANCE * trace:
        raise NumericalFailureError(
            "Gram matrix is not positive semidefinite", residual=float(evals[0])
        )
    return GramMatrix(matrix=g_mat, eta=float(eta), delta_t=float(delta_t),
                      c_prime=c_prime, event_amps=eta * s)


def embed_generators(gram: GramMatrix):
    """Factor G = V^dag V with V of shape (d, N), d the numerical rank.

    Eigenvalues below ``1e-10 * trace(G)`` are clipped; row i of V is
    ``sqrt(lambda_i) q_i^dag`` in descending eigenvalue order, so ``V V^dag``
    is diagonal (the embedding basis is the eigenbasis of G).
    """
    return factor_gram(gram.matrix)


def factor_gram(g_mat: np.ndarray):
    """embed_generators on a bare Hermitian matrix; same clipping rule."""
    evals, evecs = np.linalg.eigh(g_mat)
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    evecs = evecs[:, order]
    trace = float(np.real(np.trace(g_mat)))
    keep = evals > RANK_THRESHOLD * trace
    d = int(np.count_nonzero(keep))
    if d == 0:
        raise ConstructionFailureError("Gram matrix has no usable eigenvalues")
    v_mat = np.sqrt(evals[:d])[:, None] * evecs[:, :d].conj().T
    return d, v_mat


@dataclass(frozen=True)
class MemoryState:
    """Normalized memory vector plus its pre-normalization squared norm.

    The pre-normalization norm squared approximates the survival
    probability at the same time, up to O(delta_t) from the finite-step
    Gram construction.
    """

    vector: np.ndarray
    prenorm_sq: float
    t: float


class QuantumModel:
    """Compressed model: memory of dimension d plus a binary-event ancilla.

    The unitary acts on the (2d)-dimensional product space with flat index
    ``2 * memory + ancilla``.  Applying it to (state x ancilla-0) and
    reading the ancilla realizes one timestep: outcome 0 keeps the evolved
    memory, outcome 1 is an event and collapses the memory to the reset
    state.
    """

    def __init__(self, exp_sum, gram, generators, reset, unitary, diagnostics=None):
        self.exp_sum = exp_sum
        self.gram = gram
        self.generators = np.asarray(generators, dtype=complex)
        self.reset = np.asarray(reset, dtype=complex)
        self.unitary = np.asarray(unitary, dtype=complex)
        self.diagnostics = dict(diagnostics or {})
        self.memory_dim = self.generators.shape[0]
        self.n_generators = self.generators.shape[1]
        self.delta_t = gram.delta_t
        self.eta = gram.eta
        self._z = np.array([t.z for t in exp_sum.terms], dtype=complex)

    def __repr__(self):
        return (f"QuantumModel(memory_dim={self.memory_dim}, "
                f"n_generators={self.n_generators}, delta_t={self.delta_t})")

    @property
    def no_event_block(self) -> np.ndarray:
        """d x d block mapping memory to memory when no event fires."""
        return self.unitary[0::2, 0::2]

    @property
    def event_block(self) -> np.ndarray:
        """d x d block mapping memory to (event, new memory) amplitudes."""
        return self.unitary[1::2, 0::2]

    def memory_state(self, t: float) -> MemoryState:
        """State conditioned on time t since the last event."""
        if t < 0:
            raise DomainError("memory states are defined for t >= 0")
        coeff = self.gram.c_prime * np.exp(self._z * t)
        vec = self.generators @ coeff
        norm = float(np.linalg.norm(vec))
        if norm < 1e-14:
            raise TailUnderflowError(
                f"memory state vanished at t={t}; beyond numerical support"
            )
        return MemoryState(vector=vec / norm, prenorm_sq=norm**2, t=float(t))

    def model_survival(self, n: int) -> float:
        """Probability of no event in the first n steps."""
        return self.survival_curve([n])[0]

    def survival_curve(self, steps) -> np.ndarray:
        """model_survival evaluated on an increasing sequence of steps."""
        steps = [int(n) for n in steps]
        if any(n < 0 for n in steps):
            raise InputError("step counts must be non-negative")
        if any(b < a for a, b in zip(steps, steps[1:])):
            raise InputError("step counts must be non-decreasing")
        a_block = self.no_event_block
        x = self.reset.copy()
        out = []
        current = 0
        for n in steps:
            for _ in range(n - current):
                x = a_block @ x
            current = n
            out.append(float(np.linalg.norm(x) ** 2))
        return np.asarray(out)

    def wait_pmf(self, n_max: int):
        """Discrete wait-time law: mass at n*delta_t of the first event.

        Returns a :class:`qcoarse.metrics.DiscretePmf`; the unassigned tail
        probability (no event within n_max steps) goes to its residual.
        """
        from qcoarse.metrics import DiscretePmf

        if n_max < 1:
            raise InputError("n_max must be at least 1")
        a_block = self.no_event_block
        t_block = self.event_block
        masses = np.zeros(n_max + 1)
        x = self.reset.copy()
        for n in range(1, n_max + 1):
            masses[n] = float(np.linalg.norm(t_block @ x) ** 2)
            x = a_block @ x
        residual = float(np.linalg.norm(x) ** 2)
        return DiscretePmf(masses=masses, delta_t=self.delta_t, residual=residual)

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps())

    def dumps(self) -> str:
        buf = io.StringIO()
        buf.write("# qcoarse quantum model\n")
        buf.write(f"delta_t {fmt_float(self.delta_t)}\n")
        buf.write(f"eta {fmt_float(self.eta)}\n")
        buf.write(f"dims {self.memory_dim} {self.n_generators}\n")
        buf.write("begin expsum\n")
        buf.write(self.exp_sum.dumps())
        buf.write("end expsum\n")
        for name, mat in (("generators", self.generators),
                          ("reset", self.reset.reshape(1, -1)),
                          ("unitary", self.unitary)):
            buf.write(f"begin {name}\n")
            for row in mat:
                buf.write(" ".join(
                    f"{fmt_float(v.real)} {fmt_float(v.imag)}" for v in row) + "\n")
            buf.write(f"end {name}\n")
        return buf.getvalue()

    @classmethod
    def load(cls, path) -> "QuantumModel":
        with open(path) as fh:
            return cls.loads(fh.read())

    @classmethod
    def loads(cls, text: str) -> "QuantumModel":
        delta_t = None
        sections = {}
        current = None
        plain = []
        for line in text.splitlines():
            stripped = line.strip()
            if current is not None:
                if stripped == f"end {current}":
                    current = None
                else:
                    sections[current].append(line)
                continue
            if not stripped or stripped.startswith("#"):
                continue
            if stripped.startswith("begin "):
                current = stripped[6:].strip()
                sections[current] = []
                continue
            plain.append(stripped)
        header = dict(p.split(None, 1) for p in plain)
        if "delta_t" not in header or "dims" not in header:
            raise InputError("model file is missing delta_t or dims")
        delta_t = float(header["delta_t"])
        d, n = (int(x) for x in header["dims"].split())
        if "expsum" not in sections:
            raise InputError("model file is missing the expsum section")
        exp_sum = ExpSum.loads("\n".join(sections["expsum"]))

        def matrix(name, rows, cols):
            if name not in sections:
                raise InputError(f"model file is missing the {name} section")
            data = np.array([[float(v) for v in ln.split()]
                             for ln in sections[name] if ln.strip()])
            if data.shape != (rows, 2 * cols):
                raise InputError(f"{name} section has shape {data.shape}, "
                                 f"expected {(rows, 2 * cols)}")
            return data[:, 0::2] + 1j * data[:, 1::2]

        generators = matrix("generators", d, n)
        reset = matrix("reset", 1, d)[0]
        unitary = matrix("unitary", 2 * d, 2 * d)
        gram = gram_matrix(exp_sum, delta_t)
        model = cls(exp_sum, gram, generators, reset, unitary)
        defect = _max_abs(model.unitary.conj().T @ model.unitary
                          - np.eye(2 * d))
        if defect > UNITARITY_GATE:
            raise InputError(f"stored unitary is not unitary (defect {defect:.2e})")
        return model


def _max_abs(mat) -> float:
    return float(np.max(np.abs(mat)))


def build_unitary(exp_sum: ExpSum, delta_t: float) -> QuantumModel:
    """Assemble the full model for one amplitude and timestep.

    The map ``v_j (x) e0 -> exp(z_j dt) v_j (x) e0 + eta s_j r (x) e1`` is an
    exact isometry by the Gram construction; its matrix on the memory basis
    is re-orthonormalized by a QR factorization (phase-fixed to a positive
    real diagonal) before the remaining columns are filled with canonical
    basis vectors orthogonalized in index order.  The QR step strips the
    floating-point noise amplified by small Gram eigenvalues, keeping the
    unitarity defect at machine scale regardless of conditioning.
    """
    gram = gram_matrix(exp_sum, delta_t)
    d, v_mat = embed_generators(gram)
    n = v_mat.shape[1]

    # eta is already inside G (hence inside V): ||V c'||^2 = c'^dag G c' = 1
    reset = v_mat @ gram.c_prime
    reset_norm = float(np.linalg.norm(reset))
    if abs(reset_norm - 1.0) > 1e-9:
        raise ConstructionFailureError(
            f"reset state norm {reset_norm} deviates from 1 beyond tolerance"
        )
    reset = reset / reset_norm

    z = np.array([t.z for t in exp_sum.terms], dtype=complex)
    phases = np.exp(z * delta_t)
    amps = gram.event_amps

    # prescribed-image overlap check: step images must reproduce G exactly
    vtv = v_mat.conj().T @ v_mat
    image_gram = np.outer(phases.conj(), phases) * vtv + np.outer(amps, amps)
    isometry_defect = _max_abs(image_gram - vtv)
    if isometry_defect > ISOMETRY_GATE:
        raise ConstructionFailureError(
            f"step map is not an isometry (defect {isometry_defect:.2e}); "
            "Gram matrix inconsistent with the amplitude"
        )

    # action on the memory basis via the minimum-norm generator preimage
    lam = np.real(np.einsum("ij,ij->i", v_mat, v_mat.conj()))
    v_pinv = v_mat.conj().T / lam[None, :]
    a_block = v_mat @ (phases[:, None] * v_pinv)
    event_row = amps @ v_pinv
    b_block = np.outer(reset, event_row)

    stacked = np.zeros((2 * d, d), dtype=complex)
    stacked[0::2, :] = a_block
    stacked[1::2, :] = b_block
    unitary, basis_defect, action_shift = complete_unitary(stacked, 2)

    diagnostics = {
        "isometry_defect": isometry_defect,
        "basis_defect": basis_defect,
        "action_shift": action_shift,
        "unitarity_defect": _max_abs(
            unitary.conj().T @ unitary - np.eye(2 * d)),
    }
    return QuantumModel(exp_sum, gram, v_mat, reset, unitary, diagnostics)


def complete_unitary(stacked: np.ndarray, stride: int):
    """Extend prescribed isometry columns to a full unitary.

    ``stacked`` holds the images of the inputs (memory basis tensor the
    first ancilla letter) as columns; rows are flat-indexed memory-major
    with ``stride`` ancilla letters per memory index.  The columns are
    re-orthonormalized by QR (phase-fixed to a positive real diagonal),
    then the remaining input slots are filled with canonical basis vectors
    double-orthogonalized in index order.  Returns
    ``(unitary, basis_defect, action_shift)``.
    """
    big, d = stacked.shape
    if big != d * stride:
        raise ConstructionFailureError("stacked image has inconsistent shape")
    basis_defect = _max_abs(stacked.conj().T @ stacked - np.eye(d))

    q_mat, r_mat = np.linalg.qr(stacked)
    r_diag = np.diagonal(r_mat)
    if np.min(np.abs(r_diag)) < 0.5:
        raise ConstructionFailureError(
            "memory-basis images are numerically rank deficient"
        )
    q_mat = q_mat * (r_diag / np.abs(r_diag))[None, :]
    action_shift = _max_abs(q_mat - stacked)

    unitary = np.zeros((big, big), dtype=complex)
    unitary[:, 0::stride] = q_mat
    filled = list(range(0, big, stride))
    free = iter(k for k in range(big) if k % stride != 0)
    for k in range(big):
        cols = unitary[:, filled]
        w = np.zeros(big, dtype=complex)
        w[k] = 1.0
        for _ in range(2):
            w = w - cols @ (cols.conj().T @ w)
        norm = np.linalg.norm(w)
        if norm <= 0.5:
            continue
        slot = next(free, None)
        if slot is None:
            break
        unitary[:, slot] = w / norm
        filled.append(slot)
        filled.sort()
    if len(filled) != big:
        raise ConstructionFailureError("unitary completion did not terminate")

    unit_defect = _max_abs(unitary.conj().T @ unitary - np.eye(big))
    if unit_defect > UNITARITY_GATE:
        raise ConstructionFailureError(
            f"assembled matrix is not unitary (defect {unit_defect:.2e})"
        )
    return unitary, basis_defect, action_shift


def memory_state(model: QuantumModel, t: float) -> MemoryState:
    """Functional form of :meth:`QuantumModel.memory_state`."""
    return model.memory_state(t)


def model_survival(model: QuantumModel, n: int) -> float:
    """Functional form of :meth:`QuantumModel.model_survival`."""
    return model.model_survival(n)


@dataclass(frozen=True)
class KernelSpectrum:
    """Spectrum of the discretized steady-state memory kernel."""

    eigenvalues: np.ndarray
    trace: float
    n_grid: int
    t_max: float
    mu: float
    truncation_bound: float
    warning: str = ""
    vectors: np.ndarray | None = None

    def rank(self, threshold_ratio: float = 1e-8) -> int:
        """Count of eigenvalues above ``threshold_ratio * trace``."""
        return int(np.count_nonzero(self.eigenvalues > threshold_ratio * self.trace))


def _extend_tail(survival, start: float = 1.0, tail: float = 1e-6,
                 cap: float = 64.0) -> float:
    t_max = start
    while float(survival(t_max)) >= tail and t_max < cap:
        t_max *= 2.0
    return t_max


def kernel_spectrum(source, n_grid: int = 400, t_max=None,
                    return_vectors: bool = False) -> KernelSpectrum:
    """Eigenvalues of the discretized memory-ensemble kernel, descending.

    The kernel ``rho(t, t') = mu * int_0^inf psi(t+s) conj(psi(t'+s)) ds``
    is discretized on a K x K midpoint grid over [0, T]^2 with the tail
    integral truncated at the same cutoff; the entry at (i, j) becomes
    ``mu h^2 sum_m psi((i+m+1)h) conj(psi((j+m+1)h))`` with ``h = T/K``,
    manifestly PSD of rank at most the number of amplitude terms.  The
    neglected tail mass is bounded by ``mu * (T * Phi(T) + int_T Phi)`` and
    reported as ``truncation_bound``.

    ``source`` is an ExpSum or a wait-time distribution (anything with
    ``sqrt_wave``, ``survival``, and ``mean_wait``).
    """
    if n_grid < 8:
        raise InputError("kernel grid needs at least 8 points")
    mean = source.mean_wait()
    mu = 1.0 / mean
    if t_max is None:
        if hasattr(source, "terms"):
            t_max = _extend_tail(source.survival)
        else:
            from qcoarse.processes import tail_cutoff

            t_max = tail_cutoff(source)
    t_max = float(t_max)
    tail_prob = float(source.survival(t_max))
    if tail_prob >= 1e-6:
        raise InputError(
            f"cutoff {t_max} does not cover the tail (survival {tail_prob:.2e})"
        )

    h = t_max / n_grid
    samples = source.sqrt_wave(h * np.arange(1, 2 * n_grid))
    samples = np.asarray(samples, dtype=complex)
    psi_mat = scipy.linalg.hankel(samples[:n_grid], samples[n_grid - 1:])
    kernel = (mu * h * h) * (psi_mat @ psi_mat.conj().T)
    kernel = 0.5 * (kernel + kernel.conj().T)

    if return_vectors:
        evals, evecs = np.linalg.eigh(kernel)
        evals = evals[::-1]
        vectors = evecs[:, ::-1]
    else:
        evals = np.linalg.eigvalsh(kernel)[::-1]
        vectors = None
    trace = float(np.real(np.trace(kernel)))
    warning = ""
    if evals[-1] < -1e-8 * trace:
        warning = (f"kernel matrix has negative eigenvalue {evals[-1]:.3e} "
                   f"beyond tolerance for trace {trace:.3e}")

    # rectangle rule on a doubling tail grid; crude but only informational
    t_tail = t_max * (1 + np.arange(2048) / 2048 * 7)
    tail_int = float(np.trapezoid(np.asarray(source.survival(t_tail), dtype=float),
                                  t_tail))
    bound = mu * (t_max * tail_prob + tail_int)
    return KernelSpectrum(eigenvalues=evals, trace=trace, n_grid=n_grid,
                          t_max=t_max, mu=mu, truncation_bound=bound,
                          warning=warning, vectors=vectors)
