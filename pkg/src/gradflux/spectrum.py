"""Two-mode qubit-resonator spectra in a truncated Fock basis.

The coupled Hamiltonian, with energies expressed as frequencies (GHz) and
phases dimensionless, is

    H = 4 E_Cr n_r^2 + E_Lr phi_r^2 / 2          (readout mode)
      + 4 E_Cq n_q^2 + E_Lq phi_q^2 / 2          (fluxonium mode)
      - E_J cos(phi_q + 2 pi phi_ext)            (junction, flux-biased)
      - E_Lrq phi_r phi_q / 2                    (inductive coupling)

with E_C = e^2/2C and E_L = (Phi_0/2pi)^2/L for each mode, and
E_Lrq = (Phi_0/2pi)^2 / L_rq for the coupling. Each mode is expanded in the
Fock basis of its own harmonic part; the cosine is evaluated by
diagonalizing the truncated phase operator, applying the cosine to its
eigenvalues and rotating back, which avoids series-truncation artifacts.

Eigenvalues are reported relative to the harmonic zero-point energy, so two
uncoupled linear modes give exactly n*f_r + m*f_q.

Dressed levels are labeled |n_r m_q> by maximal squared overlap with the
product states of the uncoupled junction-included qubit and the bare
resonator. Near avoided crossings this overlap drops and label-dependent
quantities (transition frequencies, dispersive shift) are flagged invalid
below a configurable confidence.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .circuit import EffectiveFluxonium
from .units import EL_GHZ_NH, charging_energy, inductive_energy


class SolverError(RuntimeError):
    """Dense eigensolver failure, carrying matrix diagnostics."""


class LabelError(RuntimeError):
    """A requested |n_r m_q> label could not be resolved confidently."""

    def __init__(self, message, label=None, confidence=None):
        super().__init__(message)
        self.label = label
        self.confidence = confidence


@dataclass(frozen=True)
class FockBasisSpec:
    """Truncation of the product Fock basis (qubit x resonator)."""

    m_qubit: int = 25
    n_res: int = 15

    def __post_init__(self):
        if self.m_qubit < 2 or self.n_res < 2:
            raise ValueError("need at least 2 Fock states per mode")

    @property
    def dim(self) -> int:
        return self.m_qubit * self.n_res


#: Default truncation: 25 qubit and 15 resonator Fock states.
DEFAULT_BASIS = FockBasisSpec(25, 15)


@dataclass(frozen=True)
class HamiltonianMatrix:
    """Dense real-symmetric two-mode Hamiltonian with basis metadata.

    Basis ordering is qubit-major: composite index k = i_q * n_res + i_r.
    Entries are in GHz.
    """

    matrix: np.ndarray
    basis: FockBasisSpec
    phi_eff: float
    eff: EffectiveFluxonium
    f_qubit: float
    f_res: float


def _ladder(n):
    return np.diag(np.sqrt(np.arange(1, n)), 1)


def _phase_quadrature(n):
    a = _ladder(n)
    return a + a.T


def qubit_hamiltonian(lq: float, cj: float, ej: float, phi_eff: float,
                      m: int) -> np.ndarray:
    """Fluxonium Hamiltonian (m x m, GHz) in its harmonic Fock basis.

    The cosine is evaluated exactly on the truncated phase operator: the
    tridiagonal phi matrix is diagonalized, cos(theta + 2 pi phi_eff) is
    applied to its eigenvalues, and the result rotated back.
    """
    if lq <= 0 or cj <= 0:
        raise ValueError("inductance and capacitance must be positive")
    if m < 2:
        raise ValueError("need at least 2 Fock states")
    ec = charging_energy(cj)
    el = inductive_energy(lq)
    f_q = math.sqrt(8.0 * ec * el)
    zpf = (2.0 * ec / el) ** 0.25
    theta, v = np.linalg.eigh(zpf * _phase_quadrature(m))
    cos_op = (v * np.cos(theta + 2.0 * np.pi * phi_eff)) @ v.T
    h = np.diag(f_q * np.arange(m)) - ej * cos_op
    return 0.5 * (h + h.T)


def single_loop_reference(lq: float, cj: float, ej: float, phi_ext: float,
                          m_qubit: int) -> np.ndarray:
    """Eigenvalues of a standalone single-loop fluxonium, ascending [GHz].

    Serves as the oracle for the gradiometric-equivalence checks: a balanced
    gradiometer with ls = 0, l2 = 0 and l1 = l3 = 2 lq reproduces this
    spectrum as a function of the inner-loop flux imbalance.
    """
    return np.linalg.eigvalsh(qubit_hamiltonian(lq, cj, ej, phi_ext, m_qubit))


def build_hamiltonian(eff: EffectiveFluxonium, phi_eff: float,
                      basis: FockBasisSpec = DEFAULT_BASIS) -> HamiltonianMatrix:
    """Assemble the dense two-mode Hamiltonian at a given effective flux."""
    if not math.isfinite(phi_eff):
        raise ValueError("phi_eff must be finite")
    m, n = basis.m_qubit, basis.n_res
    h_q = qubit_hamiltonian(eff.lq, eff.cj, eff.ej, phi_eff, m)
    f_q = math.sqrt(8.0 * charging_energy(eff.cj) * inductive_energy(eff.lq))
    f_r = math.sqrt(8.0 * charging_energy(eff.cr) * inductive_energy(eff.lr))
    h_r = np.diag(f_r * np.arange(n))
    h = np.kron(h_q, np.eye(n)) + np.kron(np.eye(m), h_r)
    if math.isfinite(eff.lrq):
        el_rq = EL_GHZ_NH / eff.lrq
        zq = (2.0 * charging_energy(eff.cj) / inductive_energy(eff.lq)) ** 0.25
        zr = (2.0 * charging_energy(eff.cr) / inductive_energy(eff.lr)) ** 0.25
        h -= 0.5 * el_rq * zq * zr * np.kron(_phase_quadrature(m),
                                             _phase_quadrature(n))
    return HamiltonianMatrix(matrix=0.5 * (h + h.T), basis=basis,
                             phi_eff=phi_eff, eff=eff,
                             f_qubit=f_q, f_res=f_r)


def hermiticity_defect(matrix: np.ndarray) -> float:
    """max|H - H^dag| normalized by max|H|; zero for exactly symmetric H."""
    scale = np.abs(matrix).max()
    if scale == 0.0:
        return 0.0
    return float(np.abs(matrix - matrix.conj().T).max() / scale)


def solve_hermitian(matrix: np.ndarray, lowest: int | None = None):
    """Ascending eigenvalues and eigenvectors of a Hermitian matrix.

    ``lowest`` restricts the solve to the lowest-k pairs (subset driver);
    failures raise :class:`SolverError` with matrix diagnostics.
    """
    try:
        if lowest is not None and lowest < matrix.shape[0]:
            return sla.eigh(matrix, subset_by_index=(0, lowest - 1))
        return np.linalg.eigh(matrix)
    except (np.linalg.LinAlgError, sla.LinAlgError, ValueError) as exc:
        raise SolverError(
            f"eigensolver failed: {exc} "
            f"[dim={matrix.shape[0]}, non-finite entries="
            f"{int(np.count_nonzero(~np.isfinite(matrix)))}, "
            f"hermiticity defect={hermiticity_defect(np.nan_to_num(matrix)):.3e}]"
        ) from exc


@dataclass(frozen=True)
class SpectrumResult:
    """Labeled spectrum of the coupled system.

    ``labels[j]`` is the (n_r, m_q) product label retained for level j, or
    None where another level claims the same label with larger overlap.
    ``confidence[j]`` is the squared overlap with the best-matching bare
    product state.
    """

    energies: np.ndarray
    labels: list
    confidence: np.ndarray
    basis: FockBasisSpec
    phi_eff: float
    index_of: dict = field(repr=False, default_factory=dict)

    def level_index(self, label, min_confidence: float = 0.0) -> int:
        label = tuple(label)
        if label not in self.index_of:
            raise LabelError(f"label {label} not retained in spectrum",
                             label=label)
        j = self.index_of[label]
        if self.confidence[j] < min_confidence:
            raise LabelError(
                f"label {label} resolved with overlap "
                f"{self.confidence[j]:.3f} < {min_confidence:.3f} "
                "(near an avoided crossing)",
                label=label, confidence=float(self.confidence[j]))
        return j

    def energy(self, label, min_confidence: float = 0.0) -> float:
        return float(self.energies[self.level_index(label, min_confidence)])


def _bare_overlaps(h: HamiltonianMatrix, vectors: np.ndarray) -> np.ndarray:
    """Squared overlaps of bare product states with dressed eigenvectors.

    Returns an (m_qubit, n_res, n_vec) array: entry [mq, nr, j] is the
    squared overlap of |n_r=nr, m_q=mq> with eigenvector j. The bare qubit
    reference includes the junction (it is the uncoupled fluxonium at the
    same flux), so labels stay meaningful at any E_J.
    """
    m, n = h.basis.m_qubit, h.basis.n_res
    hq = qubit_hamiltonian(h.eff.lq, h.eff.cj, h.eff.ej, h.phi_eff, m)
    _, u_q = np.linalg.eigh(hq)
    v3 = vectors.reshape(m, n, vectors.shape[1])
    amps = np.tensordot(u_q.T, v3, axes=1)   # (mq, nr, j)
    return np.abs(amps) ** 2


def diagonalize_labeled(h: HamiltonianMatrix) -> SpectrumResult:
    """Full ascending spectrum with |n_r m_q> labels by maximal overlap.

    Every eigenvector is matched against the bare product states; when two
    levels claim the same bare label (possible near avoided crossings) only
    the higher-overlap claimant retains it.
    """
    w, v = solve_hermitian(h.matrix)
    ov = _bare_overlaps(h, v)
    m, n = h.basis.m_qubit, h.basis.n_res
    flat = ov.reshape(m * n, -1)
    best_bare = np.argmax(flat, axis=0)          # per level: best bare index
    conf = flat[best_bare, np.arange(flat.shape[1])]
    labels = [None] * w.size
    index_of = {}
    for j in range(w.size):
        mq, nr = divmod(int(best_bare[j]), n)
        label = (nr, mq)
        prev = index_of.get(label)
        if prev is None or conf[j] > conf[prev]:
            if prev is not None:
                labels[prev] = None
            index_of[label] = j
            labels[j] = label
    return SpectrumResult(energies=w, labels=labels, confidence=conf,
                          basis=h.basis, phi_eff=h.phi_eff,
                          index_of=index_of)


def parse_transition(name):
    """Map a transition name to a ((n_r, m_q), (n_r, m_q)) label pair.

    Accepts qubit transitions like "f01"/"f12", the readout "fr", or an
    explicit pair of labels.
    """
    if isinstance(name, str):
        if name == "fr":
            return (0, 0), (1, 0)
        if len(name) == 3 and name[0] == "f" and name[1:].isdigit():
            return (0, int(name[1])), (0, int(name[2]))
        raise ValueError(f"unknown transition name {name!r}")
    pair = tuple(tuple(lbl) for lbl in name)
    if len(pair) != 2 or any(len(lbl) != 2 for lbl in pair):
        raise ValueError(f"transition must be a pair of (n_r, m_q) labels, "
                         f"got {name!r}")
    return pair


def transition_frequency(spec: SpectrumResult, from_label, to_label,
                         min_confidence: float = 0.7) -> float:
    """Energy difference E(to) - E(from) in GHz between labeled levels."""
    e0 = spec.energy(from_label, min_confidence)
    e1 = spec.energy(to_label, min_confidence)
    return e1 - e0


class _LevelSet:
    """Lowest-lying labeled levels from a subset eigensolve."""

    def __init__(self, h: HamiltonianMatrix, n_lowest: int):
        k = min(n_lowest, h.basis.dim)
        self.energies, vectors = solve_hermitian(h.matrix, lowest=k)
        self._ov = _bare_overlaps(h, vectors)

    def energy(self, label):
        """(energy [GHz], overlap confidence) of the best match for label."""
        nr, mq = label
        if mq >= self._ov.shape[0] or nr >= self._ov.shape[1]:
            raise LabelError(f"label {label} outside basis", label=label)
        scores = self._ov[mq, nr, :]
        j = int(np.argmax(scores))
        return float(self.energies[j]), float(scores[j])


def _resolved_transition(levels: _LevelSet, pair, min_confidence):
    (e0, c0) = levels.energy(pair[0])
    (e1, c1) = levels.energy(pair[1])
    conf = min(c0, c1)
    if conf < min_confidence:
        lbl = pair[0] if c0 <= c1 else pair[1]
        raise LabelError(
            f"transition {pair} unresolved: overlap {conf:.3f} < "
            f"{min_confidence:.3f}", label=lbl, confidence=conf)
    return e1 - e0, conf


@dataclass(frozen=True)
class DispersiveShiftResult:
    """Qubit-state-dependent pull of the readout mode at one flux point.

    chi_mhz = [E(1,1) - E(0,1)] - [E(1,0) - E(0,0)] in MHz, i.e. the full
    change of the resonator frequency when the qubit is excited. Invalid
    (chi_mhz None) inside avoided-crossing exclusion zones where the label
    overlap drops below the confidence threshold.
    """

    flux_phi0: float
    chi_mhz: float | None
    valid: bool
    min_overlap: float
    reason: str | None = None


def _chi_from_levels(levels: _LevelSet, phi_eff: float,
                     min_confidence: float) -> DispersiveShiftResult:
    pulls = {}
    worst = 1.0
    for label in [(0, 0), (1, 0), (0, 1), (1, 1)]:
        e, c = levels.energy(label)
        pulls[label] = e
        worst = min(worst, c)
    if worst < min_confidence:
        return DispersiveShiftResult(flux_phi0=phi_eff, chi_mhz=None,
                                     valid=False, min_overlap=worst,
                                     reason="avoided-crossing exclusion zone")
    chi_ghz = (pulls[(1, 1)] - pulls[(0, 1)]) - (pulls[(1, 0)] - pulls[(0, 0)])
    return DispersiveShiftResult(flux_phi0=phi_eff, chi_mhz=1e3 * chi_ghz,
                                 valid=True, min_overlap=worst)


def dispersive_shift(eff: EffectiveFluxonium, phi_eff: float,
                     basis: FockBasisSpec = DEFAULT_BASIS,
                     min_confidence: float = 0.7,
                     n_lowest: int = 80) -> DispersiveShiftResult:
    """Dispersive shift chi at one flux bias, in MHz.

    Uses a lowest-``n_lowest`` subset solve, sufficient because the four
    levels (0,0), (1,0), (0,1), (1,1) lie at the bottom of the spectrum for
    the device regime. Results are flagged invalid near avoided crossings.
    """
    levels = _LevelSet(build_hamiltonian(eff, phi_eff, basis), n_lowest)
    return _chi_from_levels(levels, phi_eff, min_confidence)


@dataclass(frozen=True)
class SweepPoint:
    flux_phi0: float
    transition: str
    freq_ghz: float
    chi_mhz: float | None
    chi_valid: bool


@dataclass(frozen=True)
class SweepError:
    flux_phi0: float
    transition: str
    message: str


@dataclass(frozen=True)
class SweepResult:
    points: list
    errors: list
    transitions: tuple
    basis: FockBasisSpec
    min_confidence: float


def _transition_name(tr):
    if isinstance(tr, str):
        return tr
    pair = parse_transition(tr)
    return f"{pair[0]}->{pair[1]}"


def flux_sweep(eff: EffectiveFluxonium, flux_grid,
               basis: FockBasisSpec = DEFAULT_BASIS,
               transitions=("f01",), min_confidence: float = 0.7,
               n_lowest: int = 80, workers: int | None = None) -> SweepResult:
    """Transition frequencies and chi over a flux grid.

    Each grid point is independent; with ``workers`` > 1 points are solved
    on a thread pool (LAPACK releases the GIL) and results are re-assembled
    in grid order, so the output never depends on scheduling. Per-point
    label failures are recorded in ``errors`` and the sweep continues.
    """
    flux_grid = np.atleast_1d(np.asarray(flux_grid, dtype=float))
    if not np.all(np.isfinite(flux_grid)):
        raise ValueError("flux grid must be finite")
    pairs = [(str(_transition_name(tr)), parse_transition(tr))
             for tr in transitions]

    def solve_point(phi):
        points, errors = [], []
        try:
            levels = _LevelSet(build_hamiltonian(eff, phi, basis), n_lowest)
        except SolverError as exc:
            return [], [SweepError(phi, "*", str(exc))]
        shift = _chi_from_levels(levels, phi, min_confidence)
        for name, pair in pairs:
            try:
                freq, _ = _resolved_transition(levels, pair, min_confidence)
            except LabelError as exc:
                errors.append(SweepError(phi, name, str(exc)))
                continue
            points.append(SweepPoint(flux_phi0=float(phi), transition=name,
                                     freq_ghz=freq, chi_mhz=shift.chi_mhz,
                                     chi_valid=shift.valid))
        return points, errors

    if workers is not None and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(solve_point, flux_grid))
    else:
        results = [solve_point(phi) for phi in flux_grid]

    points, errors = [], []
    for pts, errs in results:
        points.extend(pts)
        errors.extend(errs)
    return SweepResult(points=points, errors=errors,
                       transitions=tuple(name for name, _ in pairs),
                       basis=basis, min_confidence=min_confidence)


@dataclass(frozen=True)
class ConvergenceRow:
    m_qubit: int
    n_res: int
    dim: int
    f01_ghz: float
    chi_mhz: float | None
    delta_f01_ghz: float | None
    delta_chi_mhz: float | None


def convergence_report(eff: EffectiveFluxonium, phi_eff: float,
                       basis_ladder, min_confidence: float = 0.7,
                       n_lowest: int = 80) -> list:
    """f01 and chi versus basis size, with successive differences.

    ``basis_ladder`` is an ascending sequence of (m_qubit, n_res) pairs.
    Quote chi at the +-0.01 MHz level only after the chi deltas at the top
    of the ladder drop below that scale.
    """
    rows = []
    prev_f01 = prev_chi = None
    for m, n in basis_ladder:
        basis = FockBasisSpec(int(m), int(n))
        levels = _LevelSet(build_hamiltonian(eff, phi_eff, basis), n_lowest)
        f01, _ = _resolved_transition(levels, ((0, 0), (0, 1)), 0.0)
        shift = _chi_from_levels(levels, phi_eff, min_confidence)
        chi = shift.chi_mhz
        rows.append(ConvergenceRow(
            m_qubit=basis.m_qubit, n_res=basis.n_res, dim=basis.dim,
            f01_ghz=f01, chi_mhz=chi,
            delta_f01_ghz=None if prev_f01 is None else f01 - prev_f01,
            delta_chi_mhz=(None if (prev_chi is None or chi is None)
                           else chi - prev_chi)))
        prev_f01 = f01
        if chi is not None:
            prev_chi = chi
    return rows
