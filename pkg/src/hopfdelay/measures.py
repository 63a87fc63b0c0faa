"""Scalar delay distributions and matrix-valued delay measures.

Lags are stored as nonnegative numbers s, meaning the term acts on x(t - s).
All trigonometric moments below are stated in this lag variable; the sign
convention is fixed here once and used consistently by the stability layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial

from .exceptions import DimensionMismatch, SupportViolation

GL_NODES, GL_WEIGHTS = np.polynomial.legendre.leggauss(16)

MASS_TOL = 1e-12
MAX_DENSITY_DEGREE = 3


def _subintervals(a, b, max_span):
    """Split [a, b] into pieces no longer than max_span."""
    if b <= a:
        return []
    n = max(1, int(math.ceil((b - a) / max_span - 1e-12)))
    edges = np.linspace(a, b, n + 1)
    return list(zip(edges[:-1], edges[1:]))


@dataclass(frozen=True)
class DensityPiece:
    """Polynomial density (degree <= 3) on a compact lag interval [a, b]."""

    a: float
    b: float
    coeffs: tuple  # ascending coefficients in the lag variable

    def __post_init__(self):
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if self.b <= self.a:
            raise ValueError(f"empty density interval [{self.a}, {self.b}]")
        if len(self.coeffs) > MAX_DENSITY_DEGREE + 1:
            raise ValueError("density degree must be <= 3")

    def density(self, s):
        return np.polynomial.polynomial.polyval(s, np.asarray(self.coeffs))


@dataclass(frozen=True)
class ScalarDelayDistribution:
    """Atoms plus piecewise-polynomial densities on [0, tau_max].

    With probability=True the usual normalization is enforced: nonnegative
    weights and densities, total mass 1 (within MASS_TOL).
    """

    atoms: tuple = ()
    pieces: tuple = ()
    tau_max: float = 0.0
    probability: bool = False

    def __post_init__(self):
        object.__setattr__(
            self, "atoms", tuple((float(s), float(w)) for s, w in self.atoms)
        )
        object.__setattr__(self, "pieces", tuple(self.pieces))
        object.__setattr__(self, "tau_max", float(self.tau_max))
        for s, _ in self.atoms:
            if s < -1e-12 or s > self.tau_max + 1e-9:
                raise SupportViolation(
                    f"atom lag {s} outside [0, {self.tau_max}]"
                )
        for pc in self.pieces:
            if pc.a < -1e-12 or pc.b > self.tau_max + 1e-9:
                raise SupportViolation(
                    f"density interval [{pc.a}, {pc.b}] outside [0, {self.tau_max}]"
                )
        if self.probability:
            self._check_probability()

    def _check_probability(self):
        for s, w in self.atoms:
            if w < -MASS_TOL:
                raise ValueError(f"negative atom weight {w} at lag {s}")
        for pc in self.pieces:
            half = 0.5 * (pc.b - pc.a)
            nodes = 0.5 * (pc.a + pc.b) + half * GL_NODES
            if float(np.min(pc.density(nodes))) < -1e-10:
                raise ValueError(
                    f"density negative on [{pc.a}, {pc.b}]"
                )
        mass = stieltjes_integral(self, lambda s: np.ones_like(s))
        if abs(mass - 1.0) > MASS_TOL:
            raise ValueError(f"total mass {mass!r} is not 1")

    def density_at(self, s):
        """Total density at lag s (atoms excluded)."""
        val = 0.0
        for pc in self.pieces:
            if pc.a - 1e-12 <= s <= pc.b + 1e-12:
                val += float(pc.density(s))
        return val


@dataclass(frozen=True)
class TrigMoments:
    """alpha = int cos(theta) dh, beta = int sin(theta) dh with theta = -s."""

    alpha: float
    beta: float


def stieltjes_integral(h, f, max_span=1.0):
    """Integrate a (vectorized) function of the lag against the measure.

    Density pieces use 16-node Gauss-Legendre quadrature on subintervals of
    length <= max_span, which is machine-precision for polynomial-times-trig
    integrands of unit frequency; pass a smaller max_span for faster
    oscillations.
    """
    total = 0.0
    if h.atoms:
        lags = np.array([s for s, _ in h.atoms])
        weights = np.array([w for _, w in h.atoms])
        total = total + np.dot(weights, np.asarray(f(lags)))
    for pc in h.pieces:
        for lo, hi in _subintervals(pc.a, pc.b, max_span):
            half = 0.5 * (hi - lo)
            x = 0.5 * (hi + lo) + half * GL_NODES
            total = total + half * np.dot(
                GL_WEIGHTS, np.asarray(f(x)) * pc.density(x)
            )
    return total


def moments(h):
    """Return (mass, mean, variance) of the measure."""
    mass = stieltjes_integral(h, lambda s: np.ones_like(s))
    mean = stieltjes_integral(h, lambda s: s)
    var = stieltjes_integral(h, lambda s: (s - mean) ** 2)
    return float(mass), float(mean), float(var)


def trig_moments(h):
    """First trigonometric moments in the theta = -s convention."""
    alpha = float(stieltjes_integral(h, np.cos))
    beta = -float(stieltjes_integral(h, np.sin))
    return TrigMoments(alpha=alpha, beta=beta)


def _affine_pushforward(h, m, c, probability=None):
    """Push the measure through s -> c + m*s (m != 0); mass is preserved."""
    if m == 0:
        raise ValueError("affine scale must be nonzero")
    new_atoms = []
    for s, w in h.atoms:
        s2 = c + m * s
        if s2 < -1e-12:
            raise SupportViolation(f"atom lag {s} maps to negative lag {s2}")
        new_atoms.append((max(s2, 0.0), w))
    new_pieces = []
    for pc in h.pieces:
        e1, e2 = c + m * pc.a, c + m * pc.b
        lo, hi = (e1, e2) if m > 0 else (e2, e1)
        if lo < -1e-12:
            raise SupportViolation(
                f"density interval [{pc.a}, {pc.b}] maps below lag 0"
            )
        # rho2(y) = rho((y - c) / m) / |m|
        comp = Polynomial(pc.coeffs)(Polynomial([-c / m, 1.0 / m]))
        new_pieces.append(
            DensityPiece(max(lo, 0.0), hi, tuple(comp.coef / abs(m)))
        )
    support = [s for s, _ in new_atoms] + [pc.b for pc in new_pieces]
    tau_max = max(support) if support else 0.0
    flag = h.probability if probability is None else probability
    if flag and new_pieces:
        # polynomial re-composition loses a few ulps at large means; divide
        # the roundoff drift back out so the mass-1 invariant stays exact
        raw = ScalarDelayDistribution(
            atoms=tuple(new_atoms), pieces=tuple(new_pieces), tau_max=tau_max
        )
        mass = float(stieltjes_integral(raw, lambda s: np.ones_like(s)))
        if 0.0 < abs(mass - 1.0) <= 1e-9:
            new_atoms = [(s, w / mass) for s, w in new_atoms]
            new_pieces = [
                DensityPiece(pc.a, pc.b, tuple(c / mass for c in pc.coeffs))
                for pc in new_pieces
            ]
    return ScalarDelayDistribution(
        atoms=tuple(new_atoms),
        pieces=tuple(new_pieces),
        tau_max=tau_max,
        probability=flag,
    )


def scale_about_mean(h, mu):
    """Radial rescaling about the mean: s -> tau_bar + mu*(s - tau_bar).

    Accepts any nonzero mu (negative mu reflects about the mean); the public
    variance family uses mu > 0 only.
    """
    _, tau_bar, _ = moments(h)
    return _affine_pushforward(h, mu, tau_bar * (1.0 - mu))


def scale_family(h, mu):
    """The fixed-mean family h_mu: same mean, variance multiplied by mu**2."""
    if mu <= 0:
        raise ValueError(
            "mu must be positive; use dirac(tau_bar) for the mu -> 0 limit"
        )
    return scale_about_mean(h, mu)


def is_symmetric(h, tol=1e-9):
    """True iff the distribution is a mirror image of itself about its mean."""
    _, tau_bar, _ = moments(h)
    unmatched = list(h.atoms)
    while unmatched:
        s, w = unmatched.pop()
        target = 2.0 * tau_bar - s
        if abs(target - s) <= tol:
            continue  # atom sitting at the mean is its own mirror
        hit = None
        for k, (s2, w2) in enumerate(unmatched):
            if abs(s2 - target) <= tol and abs(w2 - w) <= tol:
                hit = k
                break
        if hit is None:
            return False
        unmatched.pop(hit)
    scale = 1.0
    samples = []
    for pc in h.pieces:
        half = 0.5 * (pc.b - pc.a)
        nodes = 0.5 * (pc.a + pc.b) + half * GL_NODES
        samples.extend(nodes.tolist())
        scale = max(scale, float(np.max(np.abs(pc.density(nodes)))))
    for s in samples:
        if abs(h.density_at(s) - h.density_at(2.0 * tau_bar - s)) > tol * scale:
            return False
    return True


# --- constructors -----------------------------------------------------------


def dirac(tau_bar):
    """Point mass at lag tau_bar (the explicit mu -> 0 limit of the family)."""
    if tau_bar < 0:
        raise SupportViolation(f"negative lag {tau_bar}")
    return ScalarDelayDistribution(
        atoms=((tau_bar, 1.0),), tau_max=tau_bar, probability=True
    )


def uniform(tau_bar, halfwidth):
    """Uniform density on [tau_bar - halfwidth, tau_bar + halfwidth]."""
    if halfwidth <= 0:
        raise ValueError("halfwidth must be positive")
    a, b = tau_bar - halfwidth, tau_bar + halfwidth
    if a < 0:
        raise SupportViolation(f"support [{a}, {b}] extends below lag 0")
    return ScalarDelayDistribution(
        pieces=(DensityPiece(a, b, (0.5 / halfwidth,)),),
        tau_max=b,
        probability=True,
    )


def triangular(tau_bar, halfwidth):
    """Symmetric triangular density with support halfwidth about the mean."""
    if halfwidth <= 0:
        raise ValueError("halfwidth must be positive")
    a, b = tau_bar - halfwidth, tau_bar + halfwidth
    if a < 0:
        raise SupportViolation(f"support [{a}, {b}] extends below lag 0")
    w2 = halfwidth * halfwidth
    rising = DensityPiece(a, tau_bar, (-a / w2, 1.0 / w2))
    falling = DensityPiece(tau_bar, b, (b / w2, -1.0 / w2))
    return ScalarDelayDistribution(
        pieces=(rising, falling), tau_max=b, probability=True
    )


def truncated_gamma(shape, rate, support, n_pieces=24):
    """Gamma(shape, rate) density restricted to [a, b], renormalized to mass 1.

    The density is spline-fit by interpolating cubics on n_pieces
    subintervals, so downstream quadrature stays exact.
    """
    a, b = float(support[0]), float(support[1])
    if a < 0 or b <= a:
        raise SupportViolation(f"invalid support [{a}, {b}]")
    if shape <= 0 or rate <= 0:
        raise ValueError("shape and rate must be positive")
    if a == 0.0 and shape < 1.0:
        raise ValueError("shape < 1 has a singular density at lag 0")
    norm = rate**shape / math.gamma(shape)

    def pdf(s):
        return norm * s ** (shape - 1.0) * np.exp(-rate * s)

    edges = np.linspace(a, b, n_pieces + 1)
    raw = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        xs = np.linspace(lo, hi, 4)
        coeffs = np.linalg.solve(np.vander(xs, 4, increasing=True), pdf(xs))
        raw.append(DensityPiece(lo, hi, tuple(coeffs)))
    unnorm = ScalarDelayDistribution(pieces=tuple(raw), tau_max=b)
    mass = stieltjes_integral(unnorm, lambda s: np.ones_like(s))
    pieces = tuple(
        DensityPiece(pc.a, pc.b, tuple(np.asarray(pc.coeffs) / mass))
        for pc in raw
    )
    return ScalarDelayDistribution(pieces=pieces, tau_max=b, probability=True)


# --- matrix-valued measures -------------------------------------------------


@dataclass(frozen=True)
class MatrixPiece:
    """Matrix-valued density piece: dM(s) = matrix * density(s) ds on [a, b]."""

    a: float
    b: float
    matrix: np.ndarray
    coeffs: tuple

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=float)
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if self.b <= self.a:
            raise ValueError(f"empty interval [{self.a}, {self.b}]")
        if len(self.coeffs) > MAX_DENSITY_DEGREE + 1:
            raise ValueError("density degree must be <= 3")

    def density(self, s):
        return np.polynomial.polynomial.polyval(s, np.asarray(self.coeffs))


@dataclass(frozen=True)
class MatrixDelayMeasure:
    """Matrix-valued Stieltjes measure: atoms plus polynomial density pieces."""

    dim: int
    atoms: tuple = ()
    pieces: tuple = ()
    tau_max: float = 0.0

    def __post_init__(self):
        fixed = []
        for s, mat in self.atoms:
            arr = np.array(mat, dtype=float)
            if arr.shape != (self.dim, self.dim):
                raise DimensionMismatch(
                    f"atom matrix shape {arr.shape}, expected {(self.dim, self.dim)}"
                )
            arr.setflags(write=False)
            fixed.append((float(s), arr))
        object.__setattr__(self, "atoms", tuple(fixed))
        object.__setattr__(self, "pieces", tuple(self.pieces))
        object.__setattr__(self, "tau_max", float(self.tau_max))
        for s, _ in self.atoms:
            if s < -1e-12 or s > self.tau_max + 1e-9:
                raise SupportViolation(f"atom lag {s} outside [0, {self.tau_max}]")
        for pc in self.pieces:
            if pc.matrix.shape != (self.dim, self.dim):
                raise DimensionMismatch(
                    f"piece matrix shape {pc.matrix.shape}, expected {(self.dim, self.dim)}"
                )
            if pc.a < -1e-12 or pc.b > self.tau_max + 1e-9:
                raise SupportViolation(
                    f"density interval [{pc.a}, {pc.b}] outside [0, {self.tau_max}]"
                )

    def total_variation(self):
        tv = sum(np.linalg.norm(a) for _, a in self.atoms)
        for pc in self.pieces:
            tv += np.linalg.norm(pc.matrix) * abs(
                stieltjes_integral(
                    ScalarDelayDistribution(
                        pieces=(DensityPiece(pc.a, pc.b, pc.coeffs),),
                        tau_max=pc.b,
                    ),
                    lambda s: np.ones_like(s),
                )
            )
        return float(tv)


def zero_measure(dim):
    return MatrixDelayMeasure(dim=dim)


def integrate_matrix(measure, fun, zero, max_span=1.0):
    """Accumulate fun(s, A) over atoms plus int rho(s) fun(s, A) ds over pieces.

    fun may return arrays of any fixed shape; zero supplies the identity
    element of that shape.
    """
    total = zero
    for s, mat in measure.atoms:
        total = total + fun(s, mat)
    for pc in measure.pieces:
        for lo, hi in _subintervals(pc.a, pc.b, max_span):
            half = 0.5 * (hi - lo)
            x = 0.5 * (hi + lo) + half * GL_NODES
            dens = pc.density(x)
            for node, wq, rho in zip(x, GL_WEIGHTS, dens):
                total = total + (half * wq * rho) * fun(node, pc.matrix)
    return total


def scale_matrix_measure(measure, omega):
    """Time rescaling t' = omega * t: lags multiply by omega, mass divides by omega."""
    new_atoms = tuple((s * omega, mat / omega) for s, mat in measure.atoms)
    new_pieces = []
    for pc in measure.pieces:
        comp = Polynomial(pc.coeffs)(Polynomial([0.0, 1.0 / omega]))
        new_pieces.append(
            MatrixPiece(
                pc.a * omega,
                pc.b * omega,
                pc.matrix / omega,
                tuple(comp.coef / omega),
            )
        )
    return MatrixDelayMeasure(
        dim=measure.dim,
        atoms=new_atoms,
        pieces=tuple(new_pieces),
        tau_max=measure.tau_max * omega,
    )
