"""Multi-mode, multi-event processes and their compression.

A process here is a finite set of modes emitting symbols: each stay in a
mode ends with an event drawn from the outgoing edges, where an edge fixes
the symbol, the next mode, the probability of that pair, and the dwell-time
law of the stay.  Compression approximates every edge dwell by an
exponential sum (reusing the single-edge scan unchanged) and assembles one
quantum memory shared by all modes: generator states for all edges live in
a single space whose Gram matrix is closed under the step map, with event
branches landing on the reset state of the target mode and writing the
symbol to an ancilla letter.

The construction requires the transition structure to be deterministic
given (mode, symbol).  Processes where the same (mode, symbol) can lead to
different targets depending on the dwell time are accepted for validation
and for the overlap diagnostic, but not for compression.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse
import scipy.sparse.csgraph

from qcoarse import _kernels
from qcoarse.errors import (
    ConstructionFailureError,
    InputError,
    NumericalFailureError,
    QcoarseError,
    ReducibleChainError,
    TailUnderflowError,
)
from qcoarse.expsum import ExpSum, scan_epsilon
from qcoarse.metrics import averaged_ks
from qcoarse.processes import (
    AlternatingPoisson,
    BimodalGaussian,
    TopHat,
    WaitTimeDistribution,
    parse_dist_spec,
    tail_cutoff,
    unit_rate,
)
from qcoarse.qmodel import (
    ISOMETRY_GATE,
    PSD_TOLERANCE,
    MemoryState,
    _max_abs,
    complete_unitary,
    factor_gram,
)
from qcoarse._util import fmt_float

__all__ = [
    "Edge",
    "Hsmm",
    "HsmmReport",
    "validate",
    "modal_survival",
    "closed_classes",
    "stationary_event_weights",
    "equalize_rates",
    "example_process",
    "split_uniform_process",
    "CompressedHsmm",
    "compress",
    "HsmmTrajectory",
    "run_hsmm_trajectory",
    "OverlapRecord",
    "interference_diagnostic",
    "parse_hsmm",
    "format_hsmm",
    "load_hsmm",
    "save_hsmm",
]

ROW_SUM_TOL = 1e-9
DWELL_NORM_TOL = 1e-9
FIXED_POINT_TOL = 1e-14
FIXED_POINT_MAX_ITER = 500
RESET_GATE = 1e-9
_BLOCK = 1 << 16


@dataclass(frozen=True)
class Edge:
    """One transition: from ``mode``, emit ``symbol``, land in ``target``."""

    mode: str
    symbol: str
    target: str
    prob: float
    dwell: WaitTimeDistribution

    def __post_init__(self):
        for name in (self.mode, self.symbol, self.target):
            if not name or any(ch.isspace() for ch in name):
                raise InputError(f"name {name!r} must be non-empty without spaces")
        if not 0.0 < self.prob <= 1.0:
            raise InputError(
                f"edge {self.key} has probability {self.prob}; zero-probability "
                "edges are omitted rather than listed"
            )

    @property
    def key(self) -> str:
        return f"{self.mode}-{self.symbol}->{self.target}"


@dataclass(frozen=True)
class Hsmm:
    """Finite mode/symbol process defined by its edge list."""

    modes: tuple
    symbols: tuple
    edges: tuple

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        object.__setattr__(self, "symbols", tuple(self.symbols))
        object.__setattr__(self, "edges", tuple(self.edges))
        if len(set(self.modes)) != len(self.modes) or not self.modes:
            raise InputError("modes must be non-empty and unique")
        if len(set(self.symbols)) != len(self.symbols) or not self.symbols:
            raise InputError("symbols must be non-empty and unique")
        seen = set()
        for e in self.edges:
            if e.mode not in self.modes or e.target not in self.modes:
                raise InputError(f"edge {e.key} references an unknown mode")
            if e.symbol not in self.symbols:
                raise InputError(f"edge {e.key} references an unknown symbol")
            triple = (e.mode, e.symbol, e.target)
            if triple in seen:
                raise InputError(f"duplicate edge {e.key}")
            seen.add(triple)

    def mode_index(self, mode: str) -> int:
        return self.modes.index(mode)

    def symbol_index(self, symbol: str) -> int:
        return self.symbols.index(symbol)

    def out_edges(self, mode: str) -> tuple:
        return tuple(e for e in self.edges if e.mode == mode)

    def transition_matrix(self) -> np.ndarray:
        """Embedded mode chain T[g, g'] = sum_x P(x, g'|g)."""
        n = len(self.modes)
        t_mat = np.zeros((n, n))
        for e in self.edges:
            t_mat[self.mode_index(e.mode), self.mode_index(e.target)] += e.prob
        return t_mat


@dataclass(frozen=True)
class HsmmReport:
    """validate() output: row sums per mode plus the condition flags."""

    row_sums: dict
    strong_condition: bool
    weak_pairs: tuple
    warnings: tuple


def validate(h: Hsmm) -> HsmmReport:
    """Check row normalization, dwell normalization, and determinism.

    Raises on broken normalization; a process that is only dwell-time
    deterministic (several targets for one (mode, symbol)) is legal and
    reported with a warning, since it can be diagnosed but not compressed.
    """
    row_sums = {}
    for g in h.modes:
        out = h.out_edges(g)
        if not out:
            raise InputError(f"mode {g!r} has no outgoing edges")
        total = sum(e.prob for e in out)
        row_sums[g] = total
        if abs(total - 1.0) > ROW_SUM_TOL:
            raise InputError(
                f"outgoing probabilities of mode {g!r} sum to {total!r}, not 1"
            )
    for e in h.edges:
        phi0 = float(np.asarray(e.dwell.survival(0.0)))
        if abs(phi0 - 1.0) > DWELL_NORM_TOL:
            raise InputError(
                f"dwell of edge {e.key} is not normalized: survival(0)={phi0!r}"
            )
        probe = np.linspace(0.0, tail_cutoff(e.dwell), 257)
        if np.any(np.asarray(e.dwell.pdf(probe)) < 0):
            raise InputError(f"dwell of edge {e.key} has negative density")

    groups = {}
    for e in h.edges:
        groups.setdefault((e.mode, e.symbol), []).append(e.target)
    weak_pairs = tuple(
        (pair, tuple(targets)) for pair, targets in groups.items()
        if len(targets) > 1
    )
    warnings = tuple(
        f"(mode {pair[0]!r}, symbol {pair[1]!r}) has targets {targets}; "
        "the next mode is only determined together with the dwell time"
        for pair, targets in weak_pairs
    )
    return HsmmReport(
        row_sums=row_sums,
        strong_condition=not weak_pairs,
        weak_pairs=weak_pairs,
        warnings=warnings,
    )


def modal_survival(h: Hsmm, mode: str, t):
    """Probability the stay in ``mode`` exceeds ``t`` (mixture over edges)."""
    out = h.out_edges(mode)
    if not out:
        raise InputError(f"mode {mode!r} has no outgoing edges")
    return sum(e.prob * e.dwell.survival(t) for e in out)


def _strong_components(t_mat: np.ndarray):
    graph = scipy.sparse.csr_matrix(t_mat > 0)
    n_comp, labels = scipy.sparse.csgraph.connected_components(
        graph, directed=True, connection="strong")
    return n_comp, labels


def closed_classes(h: Hsmm):
    """Closed communicating classes of the embedded mode chain."""
    t_mat = h.transition_matrix()
    n_comp, labels = _strong_components(t_mat)
    classes = []
    for comp in range(n_comp):
        members = np.flatnonzero(labels == comp)
        leaves = t_mat[np.ix_(members, np.flatnonzero(labels != comp))]
        if leaves.size == 0 or not np.any(leaves > 0):
            classes.append([h.modes[i] for i in members])
    classes.sort(key=lambda ms: h.mode_index(ms[0]))
    return classes


def stationary_event_weights(h: Hsmm, weight_by_dwell: bool = False) -> dict:
    """Long-run weight of each (mode, symbol) pair.

    Solves the stationary distribution of the embedded mode chain and
    multiplies by the per-mode symbol probabilities.  With equalized mean
    firing rates this is the per-event weighting; ``weight_by_dwell``
    multiplies in the mean dwell of each pair instead (time weighting).
    """
    t_mat = h.transition_matrix()
    n_comp, _ = _strong_components(t_mat)
    if n_comp > 1:
        names = "; ".join("{" + ",".join(c) + "}" for c in closed_classes(h))
        raise ReducibleChainError(
            f"embedded mode chain is reducible; closed classes: {names}"
        )
    n = len(h.modes)
    a_mat = t_mat.T - np.eye(n)
    a_mat[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    pi = np.linalg.solve(a_mat, b)
    if np.any(pi < -1e-12):
        raise NumericalFailureError(
            f"stationary solve produced negative weights {pi}", residual=np.nan)
    pi = np.clip(pi, 0.0, None)
    pi = pi / pi.sum()

    weights = {}
    for e in h.edges:
        key = (e.mode, e.symbol)
        w = pi[h.mode_index(e.mode)] * e.prob
        if weight_by_dwell:
            w *= e.dwell.mean_wait()
        weights[key] = weights.get(key, 0.0) + w
    total = sum(weights.values())
    return {key: w / total for key, w in weights.items()}


def equalize_rates(h: Hsmm, rate: float = 1.0) -> Hsmm:
    """Rescale every dwell to the common mean firing rate ``rate``.

    Dwells already at the target rate are passed through untouched, so a
    process built from rate-matched laws is returned edge for edge.
    """
    edges = tuple(
        Edge(e.mode, e.symbol, e.target, e.prob, unit_rate(e.dwell, rate))
        for e in h.edges
    )
    return Hsmm(h.modes, h.symbols, edges)


def example_process(p: float, q: float, rate: float = 1.0) -> Hsmm:
    """Two modes, two symbols: 'x' switches the mode, 'y' keeps it.

    Each 'x' edge dwells like the two-pulse Poisson example and each 'y'
    edge like the two-peak Gaussian example; p and q are the 'y'
    probabilities of the two modes.  Dwells are rescaled to a common mean
    firing rate (default 1, matching the single-mode examples).
    """
    for name, value in (("p", p), ("q", q)):
        if not 0.0 <= value <= 1.0:
            raise InputError(f"{name} must be a probability, got {value}")
    ap = AlternatingPoisson(2.0)
    bm = BimodalGaussian(1.0, 1.0, np.sqrt(5.0), np.sqrt(33.8), 1.0, 1.0)
    edges = []
    if p < 1.0:
        edges.append(Edge("A", "x", "B", 1.0 - p, ap))
    if p > 0.0:
        edges.append(Edge("A", "y", "A", p, bm))
    if q < 1.0:
        edges.append(Edge("B", "x", "A", 1.0 - q, ap))
    if q > 0.0:
        edges.append(Edge("B", "y", "B", q, bm))
    return equalize_rates(Hsmm(("A", "B"), ("x", "y"), tuple(edges)), rate)


def split_uniform_process(tau: float = 1.0) -> Hsmm:
    """Uniform dwell on [0, tau] whose target depends on the dwell time.

    From mode "g" the event lands in "lo" when the dwell is below tau/2 and
    in "hi" otherwise, so (mode, symbol) alone does not determine the next
    mode; both continuation modes return to "g" with the full uniform
    dwell.  The canonical input for the overlap diagnostic.
    """
    if tau <= 0:
        raise InputError("tau must be positive")
    half = 0.5 * tau
    lo = TopHat(half, half)
    hi = TopHat(tau, half)
    full = TopHat(tau, tau)
    edges = (
        Edge("g", "x", "lo", 0.5, lo),
        Edge("g", "x", "hi", 0.5, hi),
        Edge("lo", "x", "g", 1.0, full),
        Edge("hi", "x", "g", 1.0, full),
    )
    return Hsmm(("g", "lo", "hi"), ("x",), edges)


def _scan_edges(h: Hsmm, n_terms: int, eps_list, m: int, workers):
    """One scan per distinct dwell; edges share results by spec string."""
    by_spec = {}
    entries = {}
    for e in h.edges:
        spec = e.dwell.spec_string()
        if spec in by_spec:
            continue
        try:
            best, scan = scan_epsilon(
                e.dwell, n_terms, eps_list=eps_list, m=m, workers=workers)
        except QcoarseError as exc:
            raise NumericalFailureError(
                f"decomposition failed for edge {e.key} (dwell {spec}): {exc}",
                residual=np.nan,
            ) from exc
        by_spec[spec] = best
        entries[spec] = scan
    unit_sums = tuple(by_spec[e.dwell.spec_string()] for e in h.edges)
    return unit_sums, entries


@dataclass(frozen=True)
class CompressedHsmm:
    """Shared-memory quantum model of a validated multi-mode process.

    ``edge_sums`` hold the per-edge approximations in physical time;
    ``unit_sums`` keep the scan-native unit-domain versions whose metadata
    carries the per-edge KS.  ``resets`` has one row per mode; symbol
    blocks act on the memory and the ancilla letter 0 means "no event".
    """

    hsmm: Hsmm
    delta_t: float
    edge_sums: tuple
    unit_sums: tuple
    scan_entries: dict
    generators: np.ndarray
    resets: np.ndarray
    eta: np.ndarray
    mode_overlaps: np.ndarray
    unitary: np.ndarray
    a_block: np.ndarray
    event_blocks: np.ndarray
    mode_target: np.ndarray
    basis_z: np.ndarray
    basis_weights: np.ndarray
    basis_mode: np.ndarray
    basis_symbol: np.ndarray
    basis_target: np.ndarray
    n_terms: int
    diagnostics: dict = field(default_factory=dict)

    @property
    def memory_dim(self) -> int:
        return int(self.generators.shape[0])

    @property
    def basis_size(self) -> int:
        return int(self.generators.shape[1])

    @property
    def max_dim(self) -> int:
        return self.n_terms * len(self.hsmm.symbols) * len(self.hsmm.modes)

    @property
    def unused_dims(self) -> int:
        return self.max_dim - self.memory_dim

    def edge_ks(self) -> tuple:
        return tuple(s.metadata["ks"] for s in self.unit_sums)

    def averaged_ks(self, weights: dict | None = None) -> float:
        """Stationary-weighted mean of the per-edge KS statistics."""
        if weights is None:
            weights = stationary_event_weights(self.hsmm)
        ks_values = {}
        for e, ks in zip(self.hsmm.edges, self.edge_ks()):
            ks_values[(e.mode, e.symbol)] = ks
        return averaged_ks(weights, ks_values)

    def memory_state(self, mode: str, t: float) -> MemoryState:
        """Memory vector of ``mode`` at time ``t`` since its last event."""
        if t < 0:
            raise InputError("time must be non-negative")
        g = self.hsmm.mode_index(mode)
        coeff = np.where(self.basis_mode == g,
                         self.basis_weights * np.exp(self.basis_z * t), 0.0)
        vec = self.generators @ coeff
        norm = float(np.linalg.norm(vec))
        if norm < 1e-14:
            raise TailUnderflowError(
                f"memory state of mode {mode!r} at t={t} has norm {norm}")
        return MemoryState(vector=vec / norm, prenorm_sq=norm * norm, t=t)

    def modal_survival(self, mode: str, t):
        """Approximate stay-length survival of ``mode`` (mixture over edges)."""
        out = [
            (e.prob, s) for e, s in zip(self.hsmm.edges, self.edge_sums)
            if e.mode == mode
        ]
        if not out:
            raise InputError(f"mode {mode!r} has no outgoing edges")
        return sum(prob * s.survival(t) for prob, s in out)


def _fixed_point_gram(base, tgt_idx, w0_rows):
    """Solve for the mode-overlap matrix the Gram construction implies.

    The Gram entries need the overlaps of the reset states they themselves
    define, so iterate: overlaps -> Gram -> normalized resets -> overlaps,
    until stationary.  Identity start corresponds to orthogonal modes.
    """
    n_modes = w0_rows.shape[0]
    w_mat = np.eye(n_modes, dtype=complex)
    for iteration in range(1, FIXED_POINT_MAX_ITER + 1):
        g_mat = base * w_mat[np.ix_(tgt_idx, tgt_idx)]
        np.fill_diagonal(g_mat, 1.0)
        raw = w0_rows.conj() @ g_mat @ w0_rows.T
        norms = np.real(np.diag(raw)).copy()
        if np.any(norms <= 0) or np.any(~np.isfinite(norms)):
            raise NumericalFailureError(
                f"reset norms {norms} are not positive", residual=np.nan)
        eta = 1.0 / np.sqrt(norms)
        w_new = raw * np.outer(eta, eta)
        w_new = 0.5 * (w_new + w_new.conj().T)
        np.fill_diagonal(w_new, 1.0)
        shift = _max_abs(w_new - w_mat)
        w_mat = w_new
        if shift < FIXED_POINT_TOL:
            return g_mat, w_mat, eta, iteration, shift
    raise NumericalFailureError(
        f"mode-overlap iteration did not reach {FIXED_POINT_TOL} "
        f"in {FIXED_POINT_MAX_ITER} rounds (last shift {shift:.2e})",
        residual=shift,
    )


def compress(h: Hsmm, n_terms: int, delta_t: float, eps_list=None,
             m: int = 1000, workers=None) -> CompressedHsmm:
    """Build the shared quantum memory for every edge of ``h``.

    Each distinct dwell is scanned once; generator states for all edge
    terms share one Gram matrix whose event branches point at the target
    mode's reset, so the memory dimension is at most ``n_terms`` per
    (symbol, mode) pair and drops further when edges are linearly
    dependent.
    """
    if delta_t <= 0:
        raise InputError("delta_t must be positive")
    report = validate(h)
    if not report.strong_condition:
        pairs = ", ".join(f"({g},{x})" for (g, x), _ in report.weak_pairs)
        raise InputError(
            f"compression needs a unique target per (mode, symbol); {pairs} "
            "have several (see interference_diagnostic for the overlap cost)"
        )

    unit_sums, scan_entries = _scan_edges(h, n_terms, eps_list, m, workers)
    edge_sums = tuple(s.rescaled(s.time_scale) for s in unit_sums)

    # flattened generator basis: one slot per (edge, term)
    z_parts, w_parts, mode_parts, sym_parts, tgt_parts = [], [], [], [], []
    for e, s in zip(h.edges, edge_sums):
        c = np.array([t.c for t in s.terms], dtype=complex)
        gamma = np.array([t.gamma for t in s.terms])
        z_parts.append(np.array([t.z for t in s.terms], dtype=complex))
        w_parts.append(np.sqrt(e.prob) * c / np.sqrt(2.0 * gamma))
        n = len(s.terms)
        mode_parts.append(np.full(n, h.mode_index(e.mode)))
        sym_parts.append(np.full(n, h.symbol_index(e.symbol)))
        tgt_parts.append(np.full(n, h.mode_index(e.target)))
    z_all = np.concatenate(z_parts)
    w_all = np.concatenate(w_parts)
    mode_idx = np.concatenate(mode_parts)
    sym_idx = np.concatenate(sym_parts)
    tgt_idx = np.concatenate(tgt_parts)
    a_size = z_all.size
    n_modes = len(h.modes)
    n_syms = len(h.symbols)

    # z.real = -gamma, so the event amplitude sqrt(1 - e^{-2 gamma dt})
    s_amp = np.sqrt(-np.expm1(2.0 * z_all.real * delta_t))
    denom = 1.0 - np.exp((z_all.conj()[:, None] + z_all[None, :]) * delta_t)
    sym_match = sym_idx[:, None] == sym_idx[None, :]
    base = np.where(sym_match, np.outer(s_amp, s_amp), 0.0) / np.where(
        sym_match, denom, 1.0)

    w0_rows = np.zeros((n_modes, a_size), dtype=complex)
    for g in range(n_modes):
        w0_rows[g, mode_idx == g] = w_all[mode_idx == g]

    g_mat, w_mat, eta, iters, shift = _fixed_point_gram(base, tgt_idx, w0_rows)

    trace = float(np.real(np.trace(g_mat)))
    min_eig = float(np.linalg.eigvalsh(g_mat)[0])
    if min_eig < -PSD_TOLERANCE * trace:
        raise NumericalFailureError(
            f"block Gram matrix is not positive semidefinite "
            f"(min eigenvalue {min_eig:.2e})", residual=min_eig)

    d, v_mat = factor_gram(g_mat)
    weights = eta[mode_idx] * w_all
    resets = np.zeros((n_modes, d), dtype=complex)
    for g in range(n_modes):
        r = v_mat @ np.where(mode_idx == g, weights, 0.0)
        norm = float(np.linalg.norm(r))
        if abs(norm - 1.0) > RESET_GATE:
            raise ConstructionFailureError(
                f"reset of mode {h.modes[g]!r} has norm {norm}")
        resets[g] = r / norm

    # the step must reproduce the Gram on the embedded vectors exactly
    vtv = v_mat.conj().T @ v_mat
    r_overlap = resets.conj() @ resets.T
    image = (np.exp((z_all.conj()[:, None] + z_all[None, :]) * delta_t) * vtv
             + np.where(sym_match, np.outer(s_amp, s_amp), 0.0)
             * r_overlap[np.ix_(tgt_idx, tgt_idx)])
    isometry_defect = _max_abs(image - vtv)
    if isometry_defect > ISOMETRY_GATE:
        raise ConstructionFailureError(
            f"step map is not an isometry (defect {isometry_defect:.2e})")

    lam = np.real(np.einsum("ij,ij->i", v_mat, v_mat.conj()))
    v_pinv = v_mat.conj().T / lam[None, :]
    a_block = v_mat @ (np.exp(z_all * delta_t)[:, None] * v_pinv)
    event_blocks = np.zeros((n_syms, d, d), dtype=complex)
    for x in range(n_syms):
        coeff = np.where(sym_idx == x, s_amp, 0.0)
        c_cols = resets[tgt_idx].T * coeff[None, :]
        event_blocks[x] = c_cols @ v_pinv

    n_anc = 1 + n_syms
    stacked = np.zeros((d * n_anc, d), dtype=complex)
    stacked[0::n_anc, :] = a_block
    for x in range(n_syms):
        stacked[1 + x::n_anc, :] = event_blocks[x]
    unitary, basis_defect, action_shift = complete_unitary(stacked, n_anc)

    mode_target = np.full((n_modes, n_syms), -1, dtype=np.int64)
    for e in h.edges:
        mode_target[h.mode_index(e.mode), h.symbol_index(e.symbol)] = (
            h.mode_index(e.target))

    diagnostics = {
        "fixed_point_iterations": iters,
        "fixed_point_shift": shift,
        "gram_min_eig_ratio": min_eig / trace,
        "isometry_defect": isometry_defect,
        "basis_defect": basis_defect,
        "action_shift": action_shift,
        "unitarity_defect": _max_abs(
            unitary.conj().T @ unitary - np.eye(d * n_anc)),
        "reset_overlap_max": float(
            np.max(np.abs(r_overlap - np.eye(n_modes)))),
    }
    return CompressedHsmm(
        hsmm=h, delta_t=delta_t, edge_sums=edge_sums, unit_sums=unit_sums,
        scan_entries=scan_entries, generators=v_mat, resets=resets, eta=eta,
        mode_overlaps=w_mat, unitary=unitary, a_block=a_block,
        event_blocks=event_blocks, mode_target=mode_target, basis_z=z_all,
        basis_weights=weights, basis_mode=mode_idx, basis_symbol=sym_idx,
        basis_target=tgt_idx, n_terms=n_terms, diagnostics=diagnostics,
    )


@dataclass(frozen=True)
class HsmmTrajectory:
    """Event record of one compressed-model run."""

    seed: int
    delta_t: float
    start_mode: int
    symbols: np.ndarray
    counts: np.ndarray
    truncated: bool = False
    total_steps: int = 0

    def wait_times(self) -> np.ndarray:
        return self.counts * self.delta_t

    def mode_path(self, mode_target: np.ndarray) -> np.ndarray:
        """Mode occupied during each wait, reconstructed from the targets."""
        modes = np.empty(self.symbols.size, dtype=np.int64)
        g = self.start_mode
        for i, x in enumerate(self.symbols):
            modes[i] = g
            g = int(mode_target[g, x])
        return modes


def run_hsmm_trajectory(model: CompressedHsmm, seed: int,
                        n_events: int, max_steps: int = 10_000_000,
                        start_mode: int = 0) -> HsmmTrajectory:
    """Sample waits and symbols by stepping the shared-memory unitary."""
    if n_events < 1:
        raise InputError("n_events must be positive")
    if not 0 <= start_mode < len(model.hsmm.modes):
        raise InputError("start_mode must index a mode")
    rng = np.random.default_rng(seed)
    a_block = np.ascontiguousarray(model.a_block)
    event_blocks = np.ascontiguousarray(model.event_blocks)
    resets = np.ascontiguousarray(model.resets)
    x = resets[start_mode].copy()
    counts = np.zeros(n_events, dtype=np.int64)
    syms = np.zeros(n_events, dtype=np.int64)
    done = 0
    total = 0
    in_progress = 0
    mode = start_mode
    while done < n_events and total < max_steps:
        uniforms = rng.random(min(_BLOCK, max_steps - total))
        got, used, in_progress, mode, status = _kernels.hsmm_sweep(
            a_block, event_blocks, resets, model.mode_target, mode, x,
            in_progress, uniforms, counts[done:], syms[done:])
        if status == 1:
            raise NumericalFailureError(
                "per-step probabilities stopped summing to 1", residual=np.nan)
        if status == 2:
            raise NumericalFailureError(
                "sampled a symbol with no outgoing edge", residual=np.nan)
        done += got
        total += used
    return HsmmTrajectory(
        seed=int(seed), delta_t=model.delta_t, start_mode=start_mode,
        symbols=syms[:done], counts=counts[:done],
        truncated=in_progress > 0 and done < n_events, total_steps=total,
    )


@dataclass(frozen=True)
class OverlapRecord:
    """Cross-target overlap for one (mode, symbol) pair of edges."""

    mode: str
    symbol: str
    target_a: str
    target_b: str
    density_overlap: float
    wave_overlap: complex
    exact_overlap: float


def interference_diagnostic(h: Hsmm, sums=None, n_terms: int = 16,
                            eps_list=None, m: int = 1000, workers=None,
                            n_quad: int = 4096):
    """Quantify target ambiguity introduced by the approximation.

    For every pair of edges sharing (mode, symbol) with different targets,
    integrates the product of the two approximate dwell densities (and the
    corresponding wave overlap) analytically, plus the exact-density
    product by midpoint quadrature.  Exact dwells of a dwell-time
    deterministic process never overlap; the approximations can.

    ``sums`` maps edge index to an ExpSum to reuse existing decompositions;
    otherwise each distinct dwell among the ambiguous pairs is scanned.
    """
    validate(h)
    groups = {}
    for i, e in enumerate(h.edges):
        groups.setdefault((e.mode, e.symbol), []).append(i)
    pairs = []
    for (g, x), idxs in groups.items():
        for a in range(len(idxs)):
            for b in range(a + 1, len(idxs)):
                pairs.append((g, x, idxs[a], idxs[b]))
    if not pairs:
        return ()

    needed = sorted({i for _, _, a, b in pairs for i in (a, b)})
    if sums is None:
        sums = {}
        by_spec = {}
        for i in needed:
            e = h.edges[i]
            spec = e.dwell.spec_string()
            if spec not in by_spec:
                try:
                    best, _ = scan_epsilon(
                        e.dwell, n_terms, eps_list=eps_list, m=m,
                        workers=workers)
                except QcoarseError as exc:
                    raise NumericalFailureError(
                        f"decomposition failed for edge {e.key}: {exc}",
                        residual=np.nan,
                    ) from exc
                by_spec[spec] = best
            sums[i] = by_spec[spec]
    physical = {
        i: (s.rescaled(s.time_scale) if s.time_scale != 1.0 else s)
        for i, s in sums.items()
    }

    records = []
    for g, x, a, b in pairs:
        ea, eb = h.edges[a], h.edges[b]
        t_hi = max(tail_cutoff(ea.dwell), tail_cutoff(eb.dwell))
        # even midpoint count keeps the shared support endpoint off the grid
        mid = (np.arange(n_quad) + 0.5) * (t_hi / n_quad)
        exact = float(np.sum(
            np.asarray(ea.dwell.pdf(mid)) * np.asarray(eb.dwell.pdf(mid)))
            * (t_hi / n_quad))
        records.append(OverlapRecord(
            mode=g, symbol=x, target_a=ea.target, target_b=eb.target,
            density_overlap=physical[a].density_overlap(physical[b]),
            wave_overlap=physical[a].wave_overlap(physical[b]),
            exact_overlap=exact,
        ))
    return tuple(records)


def format_hsmm(h: Hsmm) -> str:
    """Definition text: modes, symbols, then one edge per line."""
    lines = [
        "# hsmm definition: edge <mode> <symbol> <target> <prob> <dwell>",
        "modes " + " ".join(h.modes),
        "symbols " + " ".join(h.symbols),
    ]
    for e in h.edges:
        lines.append(
            f"edge {e.mode} {e.symbol} {e.target} {fmt_float(e.prob)} "
            f"{e.dwell.spec_string()}"
        )
    return "\n".join(lines) + "\n"


def parse_hsmm(text: str) -> Hsmm:
    modes = None
    symbols = None
    edges = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if fields[0] == "modes":
            modes = tuple(fields[1:])
        elif fields[0] == "symbols":
            symbols = tuple(fields[1:])
        elif fields[0] == "edge":
            if len(fields) != 6:
                raise InputError(f"bad edge line: {line!r}")
            _, g, x, tgt, prob, spec = fields
            edges.append(Edge(g, x, tgt, float(prob), parse_dist_spec(spec)))
        else:
            raise InputError(f"unknown directive {fields[0]!r} in hsmm text")
    if modes is None or symbols is None:
        raise InputError("hsmm text must declare modes and symbols")
    return Hsmm(modes, symbols, tuple(edges))


def save_hsmm(path, h: Hsmm) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_hsmm(h))


def load_hsmm(path) -> Hsmm:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_hsmm(fh.read())
