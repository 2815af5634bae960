"""Flat tori R^m / A Z^m and their sign-invariant Laplace spectrum.

The columns of ``A`` generate the period lattice.  Only lattices that are
mapped to themselves by every sign-diagonal matrix support the symmetric
construction; these include all rectangular lattices.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import InvalidLatticeError, SymmetryError


@lru_cache(maxsize=None)
def _sphere_volume(k: int) -> float:
    return 2.0 * math.pi ** ((k + 1) / 2.0) / math.gamma((k + 1) / 2.0)


SPHERE_VOLUMES = {k: _sphere_volume(k) for k in range(9)}


def sphere_volume(k: int) -> float:
    """Volume of the unit sphere S^k in R^{k+1}."""
    if k < 0:
        raise ValueError("sphere dimension must be non-negative")
    return SPHERE_VOLUMES.get(k) or _sphere_volume(k)


@dataclass(frozen=True)
class Lattice:
    A: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        if A.shape[0] != A.shape[1]:
            raise InvalidLatticeError(f"generator matrix must be square, got {A.shape}")
        if not np.all(np.isfinite(A)):
            raise InvalidLatticeError("generator matrix has non-finite entries")
        if abs(np.linalg.det(A)) <= 1e-300 or np.linalg.matrix_rank(A) < A.shape[0]:
            raise InvalidLatticeError("generator matrix is singular")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)
        if self.normalized:
            target = sphere_volume(self.m)
            if abs(abs(np.linalg.det(A)) - target) > 1e-12 * target:
                raise InvalidLatticeError("lattice flagged normalized but |det A| != vol(S^m)")

    @classmethod
    def from_diag(cls, diag, normalized=False) -> "Lattice":
        return cls(np.diag(np.asarray(diag, dtype=float)), normalized=normalized)

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def is_diagonal(self) -> bool:
        return bool(np.all(self.A == np.diag(np.diag(self.A))))

    @property
    def periods(self) -> np.ndarray:
        """Periods a_1..a_m of a rectangular lattice."""
        if not self.is_diagonal:
            raise SymmetryError("periods are only defined for rectangular lattices")
        return np.abs(np.diag(self.A))

    def canonical(self) -> "Lattice":
        """Sort a rectangular lattice so that a_1 <= ... <= a_m."""
        if not self.is_diagonal:
            return self
        return Lattice.from_diag(np.sort(self.periods), normalized=self.normalized)

    def to_config(self) -> dict:
        if self.is_diagonal:
            return {"lattice_diag": [float(a) for a in np.diag(self.A)]}
        return {"lattice": [[float(v) for v in row] for row in self.A]}


def lattice_volume(lattice: Lattice) -> float:
    return float(abs(np.linalg.det(lattice.A)))


def normalize_volume(lattice: Lattice) -> Lattice:
    """Rescale so that vol(T^m) = vol(S^m)."""
    target = sphere_volume(lattice.m)
    vol = lattice_volume(lattice)
    if abs(vol - target) <= 1e-12 * target:
        return Lattice(lattice.A, normalized=True)
    scale = (target / vol) ** (1.0 / lattice.m)
    A = lattice.A * scale
    # det of the scaled matrix can miss target by a few ulps; fold the defect into A
    A = A * (target / abs(np.linalg.det(A))) ** (1.0 / lattice.m)
    return Lattice(A, normalized=True)


def is_sign_compatible(lattice: Lattice, tol: float = 1e-9) -> bool:
    """True when D A Z^m = A Z^m for every sign-diagonal D."""
    A = lattice.A
    Ainv = np.linalg.inv(A)
    for ell in range(lattice.m):
        D = np.eye(lattice.m)
        D[ell, ell] = -1.0
        M = Ainv @ D @ A
        if np.max(np.abs(M - np.round(M))) > tol:
            return False
        if abs(abs(np.linalg.det(np.round(M))) - 1.0) > tol:
            return False
    return True


def require_sign_compatible(lattice: Lattice) -> None:
    if not is_sign_compatible(lattice):
        raise SymmetryError("lattice is not invariant under the sign-diagonal group")


@dataclass(frozen=True)
class TorusMode:
    index: int
    k: tuple
    eigenvalue: float
    amplitude: float
    dual_vectors: np.ndarray = field(repr=False)

    def __call__(self, lattice: Lattice, x) -> np.ndarray:
        return eval_torus_mode(self, lattice, x)


@dataclass(frozen=True)
class TorusSpectrum:
    lattice: Lattice
    modes: tuple

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.array([md.eigenvalue for md in self.modes])

    def __len__(self):
        return len(self.modes)

    def __getitem__(self, i):
        return self.modes[i]


def _sign_orbit(K: np.ndarray) -> list:
    """Distinct +/- classes of the orbit of a dual vector under sign flips."""
    m = K.size
    seen = []
    for signs in itertools.product((1.0, -1.0), repeat=m):
        v = K * np.array(signs)
        if any(np.allclose(v, w, atol=1e-12) or np.allclose(v, -w, atol=1e-12) for w in seen):
            continue
        seen.append(v)
    return seen


def invariant_torus_spectrum(lattice: Lattice, mu_max: float) -> TorusSpectrum:
    """All sign-invariant Laplace eigenmodes with eigenvalue <= mu_max.

    Modes are sorted by eigenvalue, counted with multiplicity and normalized
    in L^2(T^m).  Mode 0 is the constant vol^{-1/2}.
    """
    if mu_max <= 0:
        raise ValueError("mu_max must be positive")
    require_sign_compatible(lattice)
    m = lattice.m
    A = lattice.A
    B = np.linalg.inv(A).T  # dual lattice generators
    vol = lattice_volume(lattice)
    kmax = math.sqrt(mu_max) / (2 * math.pi)
    bound = int(math.ceil(kmax * np.linalg.norm(A, 2))) + 1

    found = []
    claimed = []
    for k in itertools.product(range(-bound, bound + 1), repeat=m):
        K = B @ np.array(k, dtype=float)
        mu = 4 * math.pi**2 * float(K @ K)
        if mu > mu_max * (1 + 1e-12):
            continue
        if any(np.allclose(np.abs(K), c, atol=1e-10) for c in claimed):
            continue
        claimed.append(np.abs(K))
        reps = _sign_orbit(K)
        if mu == 0.0:
            amp = 1.0 / math.sqrt(vol)
        else:
            amp = math.sqrt(2.0 / (vol * len(reps)))
        # canonical label: the integer vector of the representative with K >= 0
        kk = np.rint(A.T @ np.abs(K)).astype(int)
        if lattice.is_diagonal:
            kk = np.abs(kk)
        found.append((mu, tuple(int(v) for v in kk), amp, np.array(reps)))

    found.sort(key=lambda t: (t[0], t[1]))
    modes = tuple(
        TorusMode(index=i, k=k, eigenvalue=mu, amplitude=amp, dual_vectors=reps)
        for i, (mu, k, amp, reps) in enumerate(found)
    )
    return TorusSpectrum(lattice=lattice, modes=modes)


def default_mu_max(lattice: Lattice, min_modes: int = 12) -> float:
    """Grow 4 pi^2 / a_max^2 geometrically until ``min_modes`` invariant modes fit."""
    mu = 4 * math.pi**2 / np.max(np.linalg.svd(lattice.A, compute_uv=False)) ** 2
    while len(invariant_torus_spectrum(lattice, mu)) < min_modes:
        mu *= 1.5
    return mu


def eval_torus_mode(mode: TorusMode, lattice: Lattice, x) -> np.ndarray:
    """Evaluate E_i at points ``x`` of shape (..., m)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != lattice.m:
        raise ValueError("point dimension does not match the lattice")
    if lattice.is_diagonal:
        a = lattice.periods
        # the sign classes sum to 2^(j-1) times the product of cosines
        val = np.full(x.shape[:-1], mode.amplitude * len(mode.dual_vectors))
        for ell, kl in enumerate(mode.k):
            if kl:
                val = val * np.cos(2 * math.pi * kl * x[..., ell] / a[ell])
        return val
    if mode.eigenvalue == 0.0:
        return np.full(x.shape[:-1], mode.amplitude)
    phase = 2 * math.pi * np.tensordot(x, mode.dual_vectors.T, axes=1)
    return mode.amplitude * np.cos(phase).sum(axis=-1)
