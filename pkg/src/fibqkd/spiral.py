"""Vogel spiral scatterers, their Fraunhofer far field and its OAM content.

Lengths are in micrometres throughout, so spatial frequencies are in 1/um.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from .bessel import jn_all
from .errors import ConfigurationError
from .fibcode import is_fibonacci

PHI = (1 + math.sqrt(5)) / 2
GOLDEN_ANGLE = 2 * math.pi * (1 - 1 / PHI)

# the source configuration used throughout the demos and acceptance tests
FIG1_PARTICLES = 2000
FIG1_A0_UM = 9.28
FIG1_WAVELENGTH_UM = 0.405
FIG1_CONE_DEG = 2.0


@dataclass(frozen=True)
class SpiralGeometry:
    """Points r_n = sqrt(n) * a0, theta_n = n * alpha for n = 1..N."""

    n_particles: int
    a0: float
    alpha: float
    rotation: float = 0.0

    def __post_init__(self):
        if self.n_particles < 1:
            raise ConfigurationError("need at least one particle")
        if not self.a0 > 0:
            raise ConfigurationError("a0 must be positive")
        if not math.isfinite(self.alpha):
            raise ConfigurationError("alpha must be finite")

    @property
    def n(self) -> np.ndarray:
        return np.arange(1, self.n_particles + 1)

    @property
    def r(self) -> np.ndarray:
        return np.sqrt(self.n) * self.a0

    @property
    def theta(self) -> np.ndarray:
        return self.n * self.alpha + self.rotation

    def xy(self) -> np.ndarray:
        return np.column_stack([self.r * np.cos(self.theta), self.r * np.sin(self.theta)])

    def rotated(self, angle: float) -> "SpiralGeometry":
        return SpiralGeometry(self.n_particles, self.a0, self.alpha, self.rotation + angle)


def vogel_points(n_particles: int, a0: float, alpha: float = GOLDEN_ANGLE) -> SpiralGeometry:
    return SpiralGeometry(int(n_particles), float(a0), float(alpha))


def fig1_geometry() -> SpiralGeometry:
    return vogel_points(FIG1_PARTICLES, FIG1_A0_UM, GOLDEN_ANGLE)


@dataclass(frozen=True)
class FarFieldGrid:
    """Field sampled on a regular polar grid of spatial frequencies.

    ``nu_r`` runs from 0 to ``nu_max`` inclusive; ``nu_theta`` holds
    ``n_theta`` equally spaced angles starting at 0.  ``field`` has shape
    (len(nu_r), len(nu_theta)).
    """

    nu_r: np.ndarray
    nu_theta: np.ndarray
    field: np.ndarray
    e0: complex = 1.0
    wavelength: float | None = None
    cone_deg: float | None = None

    @property
    def nu_max(self) -> float:
        return float(self.nu_r[-1])

    @classmethod
    def from_function(cls, func, nu_max: float, n_r: int = 256, n_theta: int = 512) -> "FarFieldGrid":
        """Sample ``func(nu_r, nu_theta)`` (broadcasting) on the standard grid."""
        nu_r, nu_t = polar_grid(nu_max, n_r, n_theta)
        return cls(nu_r, nu_t, np.asarray(func(nu_r[:, None], nu_t[None, :]), dtype=complex))


def polar_grid(nu_max: float, n_r: int, n_theta: int) -> tuple[np.ndarray, np.ndarray]:
    if n_r < 2 or n_theta < 1:
        raise ConfigurationError("grid needs n_r >= 2 and n_theta >= 1")
    return np.linspace(0.0, nu_max, n_r), np.arange(n_theta) * (2 * math.pi / n_theta)


def cone_frequency(wavelength: float, cone_deg: float) -> float:
    """Largest radial spatial frequency inside the collection cone."""
    if not wavelength > 0 or not 0 < cone_deg <= 90:
        raise ConfigurationError("wavelength must be positive and cone in (0, 90] degrees")
    return math.sin(math.radians(cone_deg)) / wavelength


def far_field(
    geometry: SpiralGeometry,
    wavelength: float = FIG1_WAVELENGTH_UM,
    cone_deg: float = FIG1_CONE_DEG,
    n_r: int = 256,
    n_theta: int = 512,
    e0: complex = 1.0,
    reanchor: int = 32,
) -> FarFieldGrid:
    """E(nu_r, nu_theta) = E0 * sum_n exp(i 2 pi r_n nu_r cos(nu_theta - theta_n)).

    Summed directly over every scatterer.  The sum at nu_theta + pi is the
    complex conjugate of the sum at nu_theta, so with an even ``n_theta``
    only half the angles are evaluated.
    """
    nu_max = cone_frequency(wavelength, cone_deg)
    nu_r, nu_t = polar_grid(nu_max, n_r, n_theta)
    half = n_theta // 2 if n_theta % 2 == 0 else n_theta
    # projected radius of every scatterer along each evaluated direction
    proj = (2 * math.pi) * geometry.r[None, :] * np.cos(nu_t[:half, None] - geometry.theta[None, :])
    # nu_r is evenly spaced, so each radial step multiplies every phasor by
    # the same factor; re-anchor periodically to stop rounding drift
    step = np.exp(1j * nu_r[1] * proj)
    total = np.empty((n_r, n_theta), dtype=complex)
    phasors = None
    for i in range(n_r):
        phasors = np.exp(1j * nu_r[i] * proj) if i % reanchor == 0 else phasors * step
        total[i, :half] = phasors.sum(-1)
    if half != n_theta:
        total[:, half:] = total[:, :half].conj()
    total[0] = geometry.n_particles  # every exponent vanishes at the origin
    return FarFieldGrid(nu_r, nu_t, e0 * total, complex(e0), wavelength, cone_deg)


@dataclass(frozen=True)
class OamSpectrum:
    """f(k, m) over radial samples k and azimuthal orders -m_max..m_max."""

    k: np.ndarray
    m: np.ndarray
    f: np.ndarray

    @property
    def S(self) -> np.ndarray:
        return np.abs(self.f).sum(axis=0)

    def at(self, m: int) -> float:
        return float(self.S[int(m) + int(self.m[-1])])

    def rows(self) -> list[tuple[int, float]]:
        return [(int(m), float(s)) for m, s in zip(self.m, self.S)]


def azimuthal_coefficients(field: FarFieldGrid, m_max: int) -> np.ndarray:
    """c_m(nu_r) = (1/2pi) int E e^{-i m nu_theta} d nu_theta, shape (n_r, 2 m_max + 1)."""
    n_theta = field.field.shape[1]
    if n_theta < 4 * m_max:
        raise ConfigurationError(
            f"{n_theta} azimuthal samples alias orders up to {m_max}; need at least {4 * m_max}"
        )
    c = np.fft.fft(field.field, axis=1) / n_theta
    ms = np.arange(-m_max, m_max + 1)
    return c[:, ms % n_theta]


def radial_weights(nu_r: np.ndarray) -> np.ndarray:
    """Simpson weights times nu_r (the polar area element).

    The integrand oscillates a few samples per period at the largest k, so
    the trapezoid rule is too coarse to be grid-independent at the 1% level.
    """
    return simpson(np.eye(len(nu_r)), x=nu_r, axis=1) * nu_r


def default_k(n_k: int = 256, k_max: float = 450.0) -> np.ndarray:
    """Radial-frequency samples (midpoints) in (0, k_max], in micrometres."""
    return (np.arange(n_k) + 0.5) * (k_max / n_k)


def fourier_hankel(field: FarFieldGrid, m_max: int = 100, k: np.ndarray | None = None) -> OamSpectrum:
    """f(k, m) = 2 pi sum_r c_m(nu_r) J_m(2 pi k nu_r) nu_r d nu_r.

    The azimuthal integral is done exactly by FFT, the radial one by
    Simpson's rule.  Negative orders use J_{-m} = (-1)^m J_m.
    """
    if m_max < 0:
        raise ConfigurationError("m_max must be >= 0")
    k = default_k() if k is None else np.asarray(k, dtype=float)
    c = azimuthal_coefficients(field, m_max)
    ms = np.arange(-m_max, m_max + 1)
    weighted = c * radial_weights(field.nu_r)[:, None]
    parity = np.where(ms < 0, (-1.0) ** np.abs(ms), 1.0)
    f = np.empty((len(k), len(ms)), dtype=complex)
    # keep each Bessel block near 64 MB
    step = max(1, 8_000_000 // ((m_max + 1) * len(field.nu_r)))
    for i in range(0, len(k), step):
        x = 2 * math.pi * k[i : i + step, None] * field.nu_r[None, :]
        J = jn_all(m_max, x)  # (m_max + 1, nk, nr)
        Jm = J[np.abs(ms)] * parity[:, None, None]
        f[i : i + step] = 2 * math.pi * np.einsum("mkr,rm->km", Jm, weighted)
    return OamSpectrum(k, ms, f)


def jacobi_anger_coefficients(geometry: SpiralGeometry, nu_r: np.ndarray, m_max: int) -> np.ndarray:
    """Exact c_m(nu_r) = i^m sum_n J_m(2 pi r_n nu_r) e^{-i m theta_n} for unit E0.

    Independent of the angular grid, so it checks the FFT path.
    """
    ms = np.arange(-m_max, m_max + 1)
    out = np.empty((len(nu_r), len(ms)), dtype=complex)
    phase = np.exp(-1j * np.outer(np.abs(ms), geometry.theta))  # (m, n)
    for i, v in enumerate(nu_r):
        J = jn_all(m_max, 2 * math.pi * geometry.r * v)  # (m_max + 1, n)
        pos = (1j ** np.arange(m_max + 1)) * (J * phase[m_max:]).sum(axis=1)
        out[i, m_max:] = pos
        # c_{-m} = i^{-m} sum J_{-m} e^{i m theta} = i^m sum J_m e^{i m theta}
        neg = (1j ** np.arange(m_max + 1)) * (J * phase[m_max:].conj()).sum(axis=1)
        out[i, : m_max + 1] = neg[::-1]
    return out


@dataclass(frozen=True)
class Peak:
    m: int
    height: float
    relative: float
    is_fibonacci: bool


def classify_peaks(spectrum: OamSpectrum, threshold: float = 0.5, include_dc: bool = False) -> list[Peak]:
    """Local maxima of S(m) at or above ``threshold`` times the largest one.

    The m = 0 term is the undiffracted background and is left out unless
    ``include_dc`` is set; it then also takes part in the normalization.
    """
    S = spectrum.S
    ms = spectrum.m
    keep = np.ones(len(ms), dtype=bool) if include_dc else ms != 0
    if not keep.any():
        return []
    top = S[keep].max()
    if top <= 0:
        return []
    out = []
    for i in np.flatnonzero(keep):
        left = S[i - 1] if i > 0 and keep[i - 1] else -np.inf
        right = S[i + 1] if i + 1 < len(S) and keep[i + 1] else -np.inf
        if S[i] > left and S[i] > right and S[i] >= threshold * top:
            m = int(ms[i])
            out.append(Peak(m, float(S[i]), float(S[i] / top), m != 0 and is_fibonacci(abs(m))))
    return out
