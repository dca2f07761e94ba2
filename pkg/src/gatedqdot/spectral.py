"""Laplace-Dirichlet spectra of the rectangle (0,pi) x (0,L) and perturbation tools.

Eigenpairs are indexed by (j1, j2) with

    lambda = j1**2 + j2**2 * pi**2 / L**2
    phi(x) = (2 / sqrt(pi*L)) * sin(j1*x1) * sin(j2*pi*x2/L)

Resonance scans, Galerkin spectra of -Delta + rho*V0, and Hadamard shape
derivatives of simple eigenvalues all operate on this parameterization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import DegenerateEigenvalueError

WALLS = ("left", "right", "bottom", "top")


class ModeIndex(NamedTuple):
    j1: int
    j2: int


class EigenPair(NamedTuple):
    index: ModeIndex
    lam: float
    norm_const: float


@dataclass(frozen=True)
class Spectrum:
    """Ordered truncation of the rectangle spectrum.

    Eigenvalues are nondecreasing; exact ties are broken lexicographically
    in (j1, j2) so enumeration is reproducible in degenerate geometries
    (L**2 a rational multiple of pi**2).
    """

    L: float
    pairs: tuple[EigenPair, ...]

    def __len__(self):
        return len(self.pairs)

    @property
    def modes(self) -> list[ModeIndex]:
        return [p.index for p in self.pairs]

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.array([p.lam for p in self.pairs])

    def position(self, mode: ModeIndex) -> int:
        """Index of `mode` in the ordering; ValueError if absent."""
        for i, p in enumerate(self.pairs):
            if p.index == tuple(mode):
                return i
        raise ValueError(f"mode {tuple(mode)} not in spectrum")


@dataclass(frozen=True)
class ShiftedSpectrum:
    """Galerkin spectrum of -Delta + rho*V0 on the first `truncation` modes.

    `eigenvectors[:, k]` holds the coefficients of the k-th shifted
    eigenfunction in the unshifted eigenbasis.
    """

    rho: float
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    truncation: int


@dataclass(frozen=True)
class BoundaryDisplacement:
    """Normal displacement X.nu of one rectangle wall.

    `profile` maps arclength along the wall (x2 on vertical walls, x1 on
    horizontal ones) to the displacement speed; the default is the uniform
    outward displacement X.nu = 1.
    """

    wall: str
    profile: Callable[[np.ndarray], np.ndarray] = field(default=lambda s: np.ones_like(s))

    def __post_init__(self):
        if self.wall not in WALLS:
            raise ValueError(f"wall must be one of {WALLS}, got {self.wall!r}")


def mode_eigenvalue(mode: ModeIndex, L: float) -> float:
    return mode[0] ** 2 + mode[1] ** 2 * (math.pi**2 / L**2)


def eigenfunction_on_grid(mode: ModeIndex, L: float, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """Normalized eigenfunction evaluated on the outer product of node arrays."""
    c = 2.0 / math.sqrt(math.pi * L)
    return c * np.outer(np.sin(mode[0] * x1), np.sin(mode[1] * math.pi * x2 / L))


def enumerate_modes(L: float, count: int) -> Spectrum:
    """Return the `count` smallest eigenpairs of the rectangle, sorted.

    The candidate box is grown until the smallest eigenvalue outside it
    strictly exceeds the last included one, so no mode below the cutoff
    can be missed.
    """
    if L <= 0:
        raise ValueError("L must be positive")
    if count < 1:
        raise ValueError("count must be >= 1")
    vert = math.pi**2 / L**2
    box = max(2, math.ceil(math.sqrt(count) * max(1.0, L / math.pi, math.pi / L)) + 1)
    while True:
        j1 = np.arange(1, box + 1)
        j2 = np.arange(1, box + 1)
        lam = (j1**2)[:, None] + vert * (j2**2)[None, :]
        order = sorted(
            ((lam[a, b], int(j1[a]), int(j2[b])) for a in range(box) for b in range(box))
        )
        if count <= len(order):
            cutoff = order[count - 1][0]
            outside = min((box + 1) ** 2 + vert, 1 + vert * (box + 1) ** 2)
            if cutoff < outside:
                break
        box *= 2
    pairs = tuple(
        EigenPair(ModeIndex(a, b), lv, 2.0 / math.sqrt(math.pi * L))
        for lv, a, b in order[:count]
    )
    return Spectrum(L=L, pairs=pairs)


def check_simplicity(spectrum: Spectrum, tol: float) -> list[tuple[ModeIndex, ModeIndex, float]]:
    """All listed mode pairs whose eigenvalues collide within `tol`.

    An empty list certifies simplicity at this truncation and tolerance.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    out = []
    pairs = spectrum.pairs
    # sorted eigenvalues: collisions are confined to a sliding window
    for i in range(len(pairs)):
        for j in range(i + 1, len(pairs)):
            gap = abs(pairs[j].lam - pairs[i].lam)
            if gap > tol:
                break
            out.append((pairs[i].index, pairs[j].index, gap))
    return out


def check_weak_nonresonance(
    eigenvalues: Sequence[float], tol: float
) -> list[tuple[tuple[int, int], tuple[int, int], float]]:
    """Scan for coinciding eigenvalue differences.

    Returns quadruples ((s1, s2), (t1, t2), gap) of 0-based positions with
    s1 != s2, (s1, s2) != (t1, t2) and |（lam_s1 - lam_s2) - (lam_t1 - lam_t2)| <= tol.
    Each violation is reported once, oriented so both differences are
    nonnegative (the (s <-> t) and joint-swap symmetries are deduplicated).
    An empty list certifies weak non-resonance at this truncation/tolerance.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    lam = np.asarray(eigenvalues, dtype=float)
    n = lam.size
    if n < 2:
        return []
    if np.any(np.diff(lam) < 0):
        raise ValueError("eigenvalues must be sorted ascending")
    lo, hi = np.triu_indices(n, k=1)
    # orient each pair as (larger position, smaller position): differences >= 0
    diffs = lam[hi] - lam[lo]
    order = np.argsort(diffs, kind="stable")
    d = diffs[order]
    s1 = hi[order]
    s2 = lo[order]
    out = []
    for i in range(d.size):
        j = i + 1
        while j < d.size and d[j] - d[i] <= tol:
            a = (int(s1[i]), int(s2[i]))
            b = (int(s1[j]), int(s2[j]))
            first, second = (a, b) if a <= b else (b, a)
            out.append((first, second, float(abs(d[j] - d[i]))))
            j += 1
    out.sort()
    return out


def shifted_spectrum(spectrum: Spectrum, coupling, rho: float, truncation: int) -> ShiftedSpectrum:
    """Diagonalize diag(lambda) + rho * coupling on the first `truncation` modes.

    `coupling` is a CouplingMatrix (or any object with a to_dense method) or
    a symmetric ndarray. rho may be slightly negative: central differencing
    of eigenvalue slopes at rho = 0 needs both signs even though physical
    controls live in [0, delta].
    """
    if truncation < 1:
        raise ValueError("truncation must be >= 1")
    if truncation > len(spectrum):
        raise ValueError("truncation exceeds spectrum size")
    if isinstance(coupling, np.ndarray):
        if coupling.shape[0] < truncation:
            raise ValueError("truncation exceeds coupling matrix size")
        mat = coupling[:truncation, :truncation]
    else:
        mat = coupling.to_dense(truncation)
    h = np.diag(spectrum.eigenvalues[:truncation]) + rho * mat
    vals, vecs = np.linalg.eigh(h)
    return ShiftedSpectrum(rho=rho, eigenvalues=vals, eigenvectors=vecs, truncation=truncation)


def _normal_derivative_sq(mode: ModeIndex, L: float, wall: str, s: np.ndarray) -> np.ndarray:
    # squared outward normal derivative of the normalized eigenfunction,
    # as a function of arclength s along the wall
    j1, j2 = mode
    if wall in ("left", "right"):
        return (4.0 * j1**2 / (math.pi * L)) * np.sin(j2 * math.pi * s / L) ** 2
    return (4.0 * j2**2 * math.pi / L**3) * np.sin(j1 * s) ** 2


def eigenvalue_shape_derivative(
    spectrum: Spectrum,
    mode: ModeIndex,
    disp: BoundaryDisplacement,
    *,
    simplicity_tol: float = 1e-9,
    panels: int = 16,
    nodes: int = 16,
) -> float:
    """Hadamard derivative -int_wall (d(phi)/d(nu))**2 (X.nu) ds of a simple eigenvalue."""
    mode = ModeIndex(*mode)
    pos = spectrum.position(mode)
    lam0 = spectrum.pairs[pos].lam
    for i, p in enumerate(spectrum.pairs):
        if i != pos and abs(p.lam - lam0) <= simplicity_tol:
            raise DegenerateEigenvalueError(
                f"eigenvalue of mode {tuple(mode)} collides with {tuple(p.index)}; "
                "the Hadamard formula requires a simple eigenvalue"
            )
    length = spectrum.L if disp.wall in ("left", "right") else math.pi
    xs, ws = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(0.0, length, panels + 1)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        pts = mid + half * xs
        vals = _normal_derivative_sq(mode, spectrum.L, disp.wall, pts) * np.asarray(
            disp.profile(pts), dtype=float
        )
        total += half * float(np.dot(ws, vals))
    return -total
