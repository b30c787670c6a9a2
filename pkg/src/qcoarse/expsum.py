"""Exponential-sum approximation of square-root wait-time amplitudes.

The amplitude ``psi = sqrt(phi)`` sampled on the unit interval is approximated
by ``psi~(t) = sum_j c_j exp(z_j t)`` with ``z_j = -gamma_j + i omega_j``,
following the Hankel-eigenvector construction of Beylkin & Monzon
(Appl. Comput. Harmon. Anal. 19, 2005): build the Hankel matrix of the
samples, take the eigenvector whose eigenvalue magnitude is closest to the
target accuracy ``eps``, locate the roots of its polynomial through the
companion matrix, and fit the weights by least squares on the overdetermined
Vandermonde system.  Post-processing keeps the decaying terms with the
largest weights and rescales them to a unit-norm amplitude; a scan over
``eps`` picks the model that minimizes the KS distance to the exact law.
"""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from qcoarse._util import fmt_float, parallel_map
from qcoarse.errors import (
    DomainError,
    EmptyDecompositionError,
    InputError,
    NumericalFailureError,
    QcoarseError,
)
from qcoarse.metrics import GRID_POINTS, ks_survival
from qcoarse.processes import sample_grid, tail_cutoff

__all__ = [
    "ExpTerm",
    "Candidates",
    "ExpSum",
    "ScanEntry",
    "beylkin_monzon",
    "postprocess",
    "scan_epsilon",
    "scan_epsilon_multi",
    "default_eps_grid",
    "l2_norm",
    "phi_tilde",
    "survival_tilde",
]

COND_LIMIT = 1e14
SVD_CUTOFF = 1e-14


@dataclass(frozen=True)
class ExpTerm:
    """One term ``c * exp(z t)`` with ``z = -gamma + i omega``."""

    c: complex
    gamma: float
    omega: float

    @property
    def z(self) -> complex:
        return complex(-self.gamma, self.omega)


@dataclass(frozen=True)
class Candidates:
    """Raw decomposition output, exponents per sample index.

    Multiplying the exponents by ``domain_scale`` converts them to the unit
    domain; :func:`postprocess` does that while filtering.
    """

    terms: tuple
    domain_scale: int
    eps: float
    eigenvalue: float
    residual: float
    cond: float
    used_pseudo_solve: bool


def _term_arrays(terms):
    c = np.array([t.c for t in terms], dtype=complex)
    z = np.array([t.z for t in terms], dtype=complex)
    return c, z


def _pair_weights(c, z):
    """w[j,k] = conj(c_j) c_k and s[j,k] = conj(z_j) + z_k, flattened."""
    w = np.outer(c.conj(), c)
    s = z.conj()[:, None] + z[None, :]
    return w.ravel(), s.ravel()


def l2_norm_sq(terms) -> float:
    """Squared L2 norm of ``sum_j c_j exp(z_j t)`` on ``[0, inf)``.

    Equals ``sum_jk conj(c_j) c_k / ((gamma_j + gamma_k) - i(omega_k - omega_j))``;
    requires every ``gamma > 0``.
    """
    if not terms:
        return 0.0
    if any(t.gamma <= 0 for t in terms):
        raise DomainError("L2 norm requires strictly decaying terms (gamma > 0)")
    c, z = _term_arrays(terms)
    w, s = _pair_weights(c, z)
    return float(np.real(np.sum(w / (-s))))


class ExpSum:
    """Normalized exponential-sum amplitude on the unit domain.

    Attributes
    ----------
    terms : tuple of ExpTerm
        Unit-domain terms, all with ``gamma > 0``, scaled to unit L2 norm.
    domain_scale : int
        Sample count of the decomposition the terms came from (0 when the
        sum was constructed directly from terms).
    time_scale : float
        Length of the source-time approximation region mapped onto ``[0, 1]``.
    truncated_weight : float
        Total ``|c|`` of decaying candidates dropped by the size cut.
    metadata : dict
        Free-form provenance (chosen eps, KS value, source spec, ...).
    """

    def __init__(self, terms, domain_scale=0, time_scale=1.0,
                 truncated_weight=0.0, metadata=None):
        terms = tuple(terms)
        if not terms:
            raise EmptyDecompositionError("an exponential sum needs at least one term")
        if any(t.gamma <= 0 for t in terms):
            raise DomainError("exponential-sum terms must decay (gamma > 0)")
        self.terms = terms
        self.domain_scale = int(domain_scale)
        self.time_scale = float(time_scale)
        self.truncated_weight = float(truncated_weight)
        self.metadata = dict(metadata or {})
        self._c, self._z = _term_arrays(terms)
        self._w, self._s = _pair_weights(self._c, self._z)

    @classmethod
    def from_terms(cls, terms, normalize=True, **kwargs):
        """Build a sum directly from terms, normalizing unless told not to."""
        terms = [t if isinstance(t, ExpTerm) else ExpTerm(*t) for t in terms]
        if normalize:
            norm = np.sqrt(l2_norm_sq(terms))
            if not np.isfinite(norm) or norm <= 0:
                raise NumericalFailureError("cannot normalize terms", residual=norm)
            terms = [ExpTerm(t.c / norm, t.gamma, t.omega) for t in terms]
        return cls(terms, **kwargs)

    def __len__(self):
        return len(self.terms)

    def __eq__(self, other):
        return isinstance(other, ExpSum) and self.terms == other.terms

    def __repr__(self):
        return f"ExpSum(n_terms={len(self.terms)}, time_scale={self.time_scale})"

    def l2_norm(self) -> float:
        return float(np.sqrt(l2_norm_sq(self.terms)))

    def amplitude(self, t):
        """Complex amplitude ``sum_j c_j exp(z_j t)``."""
        tt = np.asarray(t, dtype=float)
        if np.any(tt < 0):
            raise DomainError("amplitude is defined for t >= 0")
        out = np.exp(np.multiply.outer(tt, self._z)) @ self._c
        return out if tt.ndim else complex(out)

    def pdf(self, t):
        """Approximate density ``|amplitude(t)|^2``."""
        amp = self.amplitude(t)
        return np.abs(amp) ** 2 if np.ndim(amp) else abs(amp) ** 2

    def survival(self, t):
        """Tail integral of the approximate density, in closed form."""
        tt = np.asarray(t, dtype=float)
        if np.any(tt < 0):
            raise DomainError("survival is defined for t >= 0")
        core = np.exp(np.multiply.outer(tt, self._s)) @ (self._w / (-self._s))
        out = np.real(core)
        return out if tt.ndim else float(out)

    def mean_wait(self) -> float:
        """First moment of the approximate density, in closed form."""
        return float(np.real(np.sum(self._w / self._s**2)))

    def mean_firing_rate(self) -> float:
        return 1.0 / self.mean_wait()

    def sqrt_wave(self, t):
        """Alias for :meth:`amplitude` (duck-types the distribution API)."""
        return self.amplitude(t)

    def wave_overlap(self, other: "ExpSum") -> complex:
        """Analytic ``int_0^inf conj(psi_a) psi_b dt``."""
        s = self._z.conj()[:, None] + other._z[None, :]
        w = np.outer(self._c.conj(), other._c)
        return complex(np.sum(w / (-s)))

    def density_overlap(self, other: "ExpSum") -> float:
        """Analytic ``int_0^inf pdf_a pdf_b dt`` (quadruple sum)."""
        denom = -(self._s[:, None] + other._s[None, :])
        val = np.sum(np.outer(self._w, other._w) / denom)
        return float(np.real(val))

    def rescaled(self, scale: float) -> "ExpSum":
        """Sum for time dilated by ``scale`` (L2 norm preserved)."""
        if scale <= 0:
            raise InputError("scale must be positive")
        if scale == 1.0:
            return self
        root = np.sqrt(scale)
        terms = [ExpTerm(t.c / root, t.gamma / scale, t.omega / scale) for t in self.terms]
        return ExpSum(terms, domain_scale=self.domain_scale,
                      time_scale=self.time_scale / scale,
                      truncated_weight=self.truncated_weight,
                      metadata=dict(self.metadata))

    def save(self, path):
        """Write the text format: header ``N domain_scale`` then term rows."""
        with open(path, "w") as fh:
            fh.write(self.dumps())

    def dumps(self) -> str:
        buf = io.StringIO()
        buf.write("# qcoarse expsum: rows are c_re c_im gamma omega\n")
        buf.write(f"# time_scale={fmt_float(self.time_scale)}\n")
        buf.write(f"# truncated_weight={fmt_float(self.truncated_weight)}\n")
        for key in sorted(self.metadata):
            buf.write(f"# meta {key}={self.metadata[key]}\n")
        buf.write(f"{len(self.terms)} {self.domain_scale}\n")
        for t in self.terms:
            buf.write(
                f"{fmt_float(t.c.real)} {fmt_float(t.c.imag)} "
                f"{fmt_float(t.gamma)} {fmt_float(t.omega)}\n"
            )
        return buf.getvalue()

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.loads(fh.read())

    @classmethod
    def loads(cls, text: str) -> "ExpSum":
        time_scale = 1.0
        truncated = 0.0
        metadata = {}
        header = None
        terms = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("meta "):
                    key, _, value = body[5:].partition("=")
                    metadata[key.strip()] = value.strip()
                elif body.startswith("time_scale="):
                    time_scale = float(body.split("=", 1)[1])
                elif body.startswith("truncated_weight="):
                    truncated = float(body.split("=", 1)[1])
                continue
            if header is None:
                parts = line.split()
                if len(parts) != 2:
                    raise InputError("expsum header must be 'n_terms domain_scale'")
                header = (int(parts[0]), int(parts[1]))
                continue
            vals = [float(x) for x in line.split()]
            if len(vals) != 4:
                raise InputError("expsum rows must be 'c_re c_im gamma omega'")
            terms.append(ExpTerm(complex(vals[0], vals[1]), vals[2], vals[3]))
        if header is None:
            raise InputError("missing expsum header")
        if header[0] != len(terms):
            raise InputError(f"expected {header[0]} terms, found {len(terms)}")
        return cls(terms, domain_scale=header[1], time_scale=time_scale,
                   truncated_weight=truncated, metadata=metadata)


def _guarded_solve(a_mat, b_vec):
    """Solve normal equations by pivoted QR with a condition guard.

    Falls back to a truncated-spectrum pseudo-solve when the estimated
    condition number exceeds ``COND_LIMIT``.
    """
    q, r, piv = scipy.linalg.qr(a_mat, pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0:
        raise NumericalFailureError("empty least-squares system", residual=1.0)
    cond = float(diag[0] / diag[-1]) if diag[-1] > 0 else np.inf
    if cond <= COND_LIMIT:
        y = q.conj().T @ b_vec
        z = scipy.linalg.solve_triangular(r, y)
        c = np.empty_like(z)
        c[piv] = z
        return c, cond, False
    u, s, vh = np.linalg.svd(a_mat)
    keep = s > SVD_CUTOFF * s[0]
    proj = (u.conj().T @ b_vec)[keep] / s[keep]
    c = vh.conj().T[:, keep] @ proj
    return c, cond, True


def beylkin_monzon(h, eps: float, transpose: str = "conjugate") -> Candidates:
    """Decompose amplitude samples into candidate exponential terms.

    Parameters
    ----------
    h : array
        ``m + 1`` real samples ``psi(j / m)``, ``m`` even.
    eps : float
        Target accuracy; the Hankel eigenvector with eigenvalue magnitude
        closest to ``eps`` is used (ties break toward the smaller magnitude).
    transpose : {'conjugate', 'plain'}
        ``'conjugate'`` minimizes the complex least-squares residual.
        ``'plain'`` uses the plain-transpose normal equations
        ``c = (V^T V)^{-1} V^T h`` for comparisons.

    Every companion-matrix root is kept; growing roots (``|root| >= 1``) map
    to ``gamma <= 0`` and are removed later by :func:`postprocess`.  Columns
    of the Vandermonde are rescaled in log space so growing roots cannot
    overflow; the rescaling is undone on the weights.
    """
    h = np.asarray(h, dtype=float)
    if h.ndim != 1 or h.size < 3:
        raise InputError("need a 1-D sample vector with at least 3 entries")
    if not np.all(np.isfinite(h)):
        raise InputError("amplitude samples must be finite")
    m = h.size - 1
    if m % 2 != 0:
        raise InputError("sample count m must be even")
    if eps <= 0 or not np.isfinite(eps):
        raise InputError("eps must be a positive finite number")
    h_norm = float(np.linalg.norm(h))
    if h_norm == 0.0:
        raise InputError("amplitude samples are identically zero")

    half = m // 2
    hankel = scipy.linalg.hankel(h[: half + 1], h[half:])
    try:
        evals, evecs = np.linalg.eigh(hankel)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError(f"Hankel eigendecomposition failed: {exc}",
                                    residual=np.inf) from exc
    gap = np.abs(np.abs(evals) - eps)
    order = np.lexsort((np.arange(evals.size), np.abs(evals), gap))
    pick = int(order[0])
    sigma = evecs[:, pick]

    roots = np.roots(sigma[::-1])
    roots = roots[np.abs(roots) > 0.0]
    if roots.size == 0:
        raise NumericalFailureError("eigenpolynomial produced no usable roots",
                                    residual=1.0)

    log_mag = np.log(np.abs(roots))
    ang = np.angle(roots)
    j = np.arange(m + 1)
    offset = np.where(log_mag > 0, m * log_mag, 0.0)
    w_mat = np.exp(np.outer(j, log_mag) - offset[None, :] + 1j * np.outer(j, ang))

    if transpose == "conjugate":
        a_mat = w_mat.conj().T @ w_mat
        b_vec = w_mat.conj().T @ h
    elif transpose == "plain":
        a_mat = w_mat.T @ w_mat
        b_vec = w_mat.T @ h
    else:
        raise InputError("transpose must be 'conjugate' or 'plain'")

    c_scaled, cond, used_pseudo = _guarded_solve(a_mat, b_vec)
    residual = float(np.linalg.norm(w_mat @ c_scaled - h) / h_norm)
    c = c_scaled * np.exp(-offset)

    terms = [
        ExpTerm(complex(ck), float(-lg), float(an))
        for ck, lg, an in zip(c, log_mag, ang)
    ]
    terms.sort(key=lambda t: (-abs(t.c), t.gamma, t.omega))
    return Candidates(
        terms=tuple(terms),
        domain_scale=m,
        eps=float(eps),
        eigenvalue=float(evals[pick]),
        residual=residual,
        cond=cond,
        used_pseudo_solve=used_pseudo,
    )


def l2_norm(terms) -> float:
    """L2 norm of a term list or ExpSum; empty input gives 0."""
    if isinstance(terms, ExpSum):
        terms = terms.terms
    return float(np.sqrt(l2_norm_sq(tuple(terms))))


def phi_tilde(exp_sum: ExpSum, t):
    """Approximate wait-time density ``|psi~(t)|^2``."""
    return exp_sum.pdf(t)


def survival_tilde(exp_sum: ExpSum, t):
    """Approximate survival probability, analytic tail integral."""
    return exp_sum.survival(t)


def postprocess(cands, n_terms: int) -> ExpSum:
    """Filter candidates into a normalized unit-domain sum.

    Drops non-decaying terms, keeps the ``n_terms`` largest weights, and
    rescales all kept weights by a single real constant to unit L2 norm.
    The total weight of decaying terms lost to the size cut is recorded.
    Accepts a :class:`Candidates` container or a plain term list whose
    exponents are already on the unit domain.
    """
    if n_terms < 1:
        raise InputError("n_terms must be at least 1")
    if not isinstance(cands, Candidates):
        cands = Candidates(terms=tuple(cands), domain_scale=1, eps=np.nan,
                           eigenvalue=np.nan, residual=np.nan, cond=np.nan,
                           used_pseudo_solve=False)
    scale = cands.domain_scale if cands.domain_scale else 1
    unit = [ExpTerm(t.c, t.gamma * scale, t.omega * scale) for t in cands.terms]
    decaying = [t for t in unit if t.gamma > 0]
    if not decaying:
        raise EmptyDecompositionError(
            "no decaying terms survived the growth filter"
        )
    decaying.sort(key=lambda t: (-abs(t.c), t.gamma, t.omega))
    kept = decaying[:n_terms]
    truncated = float(sum(abs(t.c) for t in decaying[n_terms:]))
    norm_sq = l2_norm_sq(kept)
    if not np.isfinite(norm_sq) or norm_sq <= 0:
        raise NumericalFailureError("kept terms have no usable L2 norm",
                                    residual=norm_sq)
    norm = float(np.sqrt(norm_sq))
    kept = [ExpTerm(t.c / norm, t.gamma, t.omega) for t in kept]
    return ExpSum(kept, domain_scale=cands.domain_scale,
                  truncated_weight=truncated,
                  metadata={"eps": cands.eps, "residual": cands.residual})


def default_eps_grid(lo: float = 1e-12, hi: float = 1e-1, count: int = 23) -> np.ndarray:
    """Logarithmic eps grid used by the scan."""
    return np.geomspace(lo, hi, count)


@dataclass(frozen=True)
class ScanEntry:
    """One row of the eps-scan report."""

    eps: float
    ks: float = np.nan
    n_terms: int = 0
    truncated_weight: float = np.nan
    residual: float = np.nan
    error: str = ""


def scan_epsilon_multi(dist, n_list, eps_list=None, m: int = 1000, domain=None,
                       n_grid: int = GRID_POINTS, transpose: str = "conjugate",
                       workers=None):
    """Scan eps once, post-process for several sizes ``n``.

    Returns ``{n: (best ExpSum, [ScanEntry, ...])}``.  The decomposition per
    eps is shared across sizes; ties in KS break toward the smaller eps.
    """
    n_list = sorted(set(int(n) for n in n_list))
    if any(n < 1 for n in n_list):
        raise InputError("term counts must be positive")
    eps_arr = default_eps_grid() if eps_list is None else np.asarray(eps_list, dtype=float)
    if eps_arr.size == 0:
        raise InputError("eps list is empty")
    t_max = float(domain) if domain is not None else tail_cutoff(dist)
    h = sample_grid(dist, m, domain=t_max)
    unit = dist.rescaled(1.0 / t_max)

    def decompose(eps):
        try:
            return beylkin_monzon(h, eps, transpose=transpose)
        except QcoarseError as exc:
            return exc

    outcomes = parallel_map(decompose, eps_arr, workers=workers)

    entries = {n: [] for n in n_list}
    best = {n: None for n in n_list}
    for eps, outcome in zip(eps_arr, outcomes):
        if isinstance(outcome, QcoarseError):
            for n in n_list:
                entries[n].append(ScanEntry(eps=float(eps), error=str(outcome)))
            continue
        for n in n_list:
            try:
                total = postprocess(outcome, n)
                ks = ks_survival(unit.survival, total.survival, n_points=n_grid)
            except QcoarseError as exc:
                entries[n].append(ScanEntry(eps=float(eps), error=str(exc)))
                continue
            entries[n].append(ScanEntry(
                eps=float(eps), ks=ks.statistic, n_terms=len(total),
                truncated_weight=total.truncated_weight,
                residual=outcome.residual,
            ))
            key = (ks.statistic, float(eps))
            if best[n] is None or key < best[n][0]:
                total.metadata.update(
                    eps=float(eps), ks=ks.statistic, m=m,
                    dist=dist.spec_string(),
                )
                total.time_scale = t_max
                best[n] = (key, total)

    results = {}
    for n in n_list:
        if best[n] is None:
            raise NumericalFailureError(
                f"every eps failed for n={n}: "
                + "; ".join(e.error for e in entries[n] if e.error),
                residual=np.nan,
            )
        results[n] = (best[n][1], entries[n])
    return results


def scan_epsilon(dist, n_terms: int, eps_list=None, m: int = 1000, domain=None,
                 n_grid: int = GRID_POINTS, transpose: str = "conjugate",
                 workers=None):
    """Pick the eps minimizing the KS distance for a single model size.

    Returns ``(best ExpSum, [ScanEntry, ...])``.
    """
    out = scan_epsilon_multi(dist, [n_terms], eps_list=eps_list, m=m,
                             domain=domain, n_grid=n_grid, transpose=transpose,
                             workers=workers)
    return out[int(n_terms)]
