"""Spectral large-deviation toolkit for tilted jump generators.

theta(s), the scaled cumulant generating function of the counted-jump
statistics, is the largest real eigenvalue of the tilted generator.  The
mean jump rate is -theta'(0), the variance rate theta''(0), and the Mandel
parameter Q(s) = -theta''(s)/theta'(s) - 1 flags sub- (Q<0) versus
super-Poissonian (Q>0) trajectory ensembles.  The rate function phi(k) is
the Legendre transform of theta.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.optimize

from .generator import TiltedGenerator

__all__ = [
    "SpectralError",
    "UndefinedMandelError",
    "NonConvexThetaWarning",
    "ScanPoint",
    "RateFunctionPoint",
    "CrossoverReport",
    "ParameterScan",
    "theta",
    "theta_derivatives",
    "mandel",
    "scan",
    "rate_function",
    "legendre_reconstruct",
    "find_crossover",
    "scan_mandel_vs_parameter",
    "default_s_grid",
]

# Default scan range; matches the figure-style window on the inactive side.
S_MIN_DEFAULT = -2.0
S_MAX_DEFAULT = 12.0
S_POINTS_DEFAULT = 281

# Step for the second-derivative finite difference of theta'(s).
_FD_STEP = 1e-4


class SpectralError(RuntimeError):
    """Top eigenvalue of the tilted generator is ambiguous or defective."""


class UndefinedMandelError(ValueError):
    """Mandel parameter requested where the activity vanishes."""


class NonConvexThetaWarning(UserWarning):
    """Numerical theta(s) violated convexity beyond tolerance."""


@dataclass(frozen=True)
class ScanPoint:
    """One s-grid sample: theta, activity -theta'(s), and Mandel Q(s)."""

    s: float
    theta: float
    activity: float
    mandel: float | None


@dataclass(frozen=True)
class RateFunctionPoint:
    """Legendre-transform sample phi(k) at jump rate k (both cm^-1)."""

    k: float
    phi: float


@dataclass(frozen=True)
class CrossoverReport:
    """Sign change of Q(s) (if any) plus the strongest local maximum of Q."""

    s_star: float | None
    q_at_zero: float
    local_max: tuple[float, float] | None


@dataclass(frozen=True)
class ParameterScan:
    """Q(0) versus an external parameter, with grid-local maxima."""

    points: tuple[tuple[float, float], ...]
    local_maxima: tuple[tuple[float, float], ...]


def default_s_grid(
    s_min: float = S_MIN_DEFAULT,
    s_max: float = S_MAX_DEFAULT,
    n_points: int = S_POINTS_DEFAULT,
) -> np.ndarray:
    return np.linspace(s_min, s_max, n_points)


def _perron_root(mat: np.ndarray, rel_tol: float = 1e-15, max_iter: int = 2000) -> float:
    """Largest real eigenvalue of a real Metzler matrix.

    Shifted power iteration: with c = max |diagonal| + 1 the matrix B =
    mat + c*I is nonnegative with positive diagonal, so its Perron root is
    its spectral radius and equals the sought eigenvalue plus c.  The
    Collatz-Wielandt ratios (Bv)_i / v_i bracket the root and certify
    convergence; a stalled iteration (reducible matrix) falls back to a
    dense solve.
    """
    n = mat.shape[0]
    shift = float(np.max(np.abs(np.diag(mat)))) + 1.0
    b = mat + shift * np.eye(n)
    v = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        w = b @ v
        ratios = w / v
        lo = float(ratios.min())
        hi = float(ratios.max())
        if hi - lo <= rel_tol * hi:
            return 0.5 * (lo + hi) - shift
        v = w / w.sum()
    top = np.max(np.linalg.eigvals(mat).real)
    return float(top)


def _top_eigenvalue(mat: np.ndarray) -> complex:
    """Eigenvalue of largest real part, with an ambiguity diagnostic."""
    eigs = np.linalg.eigvals(mat)
    order = np.argsort(eigs.real)
    top = eigs[order[-1]]
    near = eigs[np.abs(eigs.real - top.real) < 1e-12]
    if near.size > 1 and np.any(np.abs(near.imag) > 1e-9):
        raise SpectralError(
            f"ambiguous top eigenvalue: {near.size} eigenvalues share the real "
            f"part {top.real:.6g} with nonzero imaginary parts"
        )
    return complex(top)


def theta(generator: TiltedGenerator, s: float, method: str = "population") -> float:
    """theta(s): largest real eigenvalue of the tilted generator.

    ``method="population"`` (default) works on the N x N population block,
    exact here because the secular structure decouples populations from
    coherences; ``method="full"`` solves the dense N^2 superoperator.
    """
    if method == "population":
        return _perron_root(generator.population_block(s))
    if method == "full":
        top = _top_eigenvalue(generator.assemble(s))
        if abs(top.imag) > 1e-9:
            raise SpectralError(
                f"top eigenvalue has imaginary part {top.imag:.3e} at s={s}"
            )
        return top.real
    raise ValueError(f"unknown method {method!r}")


def _eig_pieces(generator: TiltedGenerator, s: float, method: str):
    if method == "population":
        mat = generator.population_block(s)
        dmat = generator.population_block_derivative(s)
    else:
        mat = generator.assemble(s)
        dmat = generator.assemble_derivative(s)
    w, vl, vr = scipy.linalg.eig(mat, left=True, right=True)
    i = int(np.argmax(w.real))
    top = w[i]
    if abs(top.imag) > 1e-9:
        raise SpectralError(f"top eigenvalue has imaginary part {top.imag:.3e} at s={s}")
    l = vl[:, i].conj()
    r = vr[:, i]
    overlap = l @ r
    if abs(overlap) < 1e-12 * np.linalg.norm(l) * np.linalg.norm(r):
        raise SpectralError(f"defective top eigenpair at s={s}")
    return w, vl, vr, i, dmat


def _theta_prime(generator: TiltedGenerator, s: float, method: str) -> tuple[float, float]:
    """(theta, theta') via the left/right-eigenvector stationarity identity."""
    w, vl, vr, i, dmat = _eig_pieces(generator, s, method)
    l = vl[:, i].conj()
    r = vr[:, i]
    d1 = (l @ dmat @ r) / (l @ r)
    if abs(np.imag(d1)) > 1e-9 * max(1.0, abs(d1)):
        raise SpectralError(f"theta'({s}) came out complex: {d1}")
    return float(w[i].real), float(np.real(d1))


def theta_derivatives(
    generator: TiltedGenerator,
    s: float,
    method: str = "population",
    second_order: str = "exact",
) -> tuple[float, float, float]:
    """(theta, theta', theta'') at the given s.

    theta' comes from the eigenvector identity <l|dW/ds|r>/<l|r>.  For
    theta'' the default is the exact second-order eigenvalue-perturbation
    sum over the remaining eigenpairs; ``second_order="fd"`` selects a
    Richardson-refined central difference of theta' with step 1e-4 instead
    (cheaper conceptually but noise-limited where the activity is tiny).
    """
    if second_order == "fd":
        th, d1 = _theta_prime(generator, s, method)

        def slope(h: float) -> float:
            up = _theta_prime(generator, s + h, method)[1]
            dn = _theta_prime(generator, s - h, method)[1]
            return (up - dn) / (2.0 * h)

        h = _FD_STEP
        d2 = (4.0 * slope(h / 2.0) - slope(h)) / 3.0
        return th, d1, d2
    if second_order != "exact":
        raise ValueError(f"unknown second_order {second_order!r}")

    w, vl, vr, i, dmat = _eig_pieces(generator, s, method)
    top = w[i]
    l0 = vl[:, i].conj()
    r0 = vr[:, i]
    s0 = l0 @ r0
    d1 = (l0 @ dmat @ r0) / s0
    if abs(np.imag(d1)) > 1e-9 * max(1.0, abs(d1)):
        raise SpectralError(f"theta'({s}) came out complex: {d1}")
    # d2W/ds2 = -dW/ds for an exponential tilt, so the diagonal term is -d1;
    # the cross terms are the usual second-order perturbation sum.
    left_all = vl.conj().T @ dmat @ r0
    right_all = l0 @ dmat @ vr
    d2 = -d1
    for j in range(w.size):
        if j == i:
            continue
        num = right_all[j] * left_all[j]
        if num == 0.0:
            continue
        denom = top - w[j]
        if abs(denom) < 1e-9:
            raise SpectralError(
                f"eigenvalue {w[j]:.6g} crowds the top eigenvalue at s={s}"
            )
        sj = vl[:, j].conj() @ vr[:, j]
        d2 += 2.0 * num / (denom * s0 * sj)
    if abs(np.imag(d2)) > 1e-9 * max(1.0, abs(d2)):
        raise SpectralError(f"theta''({s}) came out complex: {d2}")
    return float(top.real), float(np.real(d1)), float(np.real(d2))


def mandel(generator: TiltedGenerator, s: float, method: str = "population") -> float:
    """Q(s) = -theta''(s)/theta'(s) - 1."""
    _, d1, d2 = theta_derivatives(generator, s, method)
    if abs(d1) < 1e-14:
        raise UndefinedMandelError(f"activity vanishes at s={s}; Q undefined")
    return -d2 / d1 - 1.0


def scan(generator: TiltedGenerator, s_values) -> list[ScanPoint]:
    """Evaluate theta, activity and Mandel Q on a grid of s values."""
    points = []
    for s in np.asarray(s_values, dtype=float):
        th = theta(generator, s)
        _, d1, d2 = theta_derivatives(generator, s)
        activity = -d1
        q = None if abs(d1) < 1e-14 else -d2 / d1 - 1.0
        points.append(ScanPoint(s=float(s), theta=th, activity=activity, mandel=q))
    return points


def _check_convexity(s: np.ndarray, th: np.ndarray, tol: float = 1e-9) -> bool:
    second = th[2:] - 2.0 * th[1:-1] + th[:-2]
    return bool(second.size == 0 or second.min() >= -tol)


def rate_function(scan_points) -> list[RateFunctionPoint]:
    """Legendre transform of a theta scan: samples of phi on the scanned
    activity range, via phi(k(s)) = -theta(s) - s*k(s).

    The parametric values are cross-checked against the direct grid
    minimum -min_s[theta(s) + k s]; a convexity violation of the numerical
    theta triggers a NonConvexThetaWarning and the result is still
    returned.
    """
    pts = sorted(scan_points, key=lambda p: p.s)
    s = np.array([p.s for p in pts])
    th = np.array([p.theta for p in pts])
    k = np.array([p.activity for p in pts])
    convex = _check_convexity(s, th)
    if not convex:
        warnings.warn(
            "theta(s) is not numerically convex; rate function may be unreliable",
            NonConvexThetaWarning,
            stacklevel=2,
        )
    phi = -th - s * k
    # Direct transform on the same grid; equals the parametric value when
    # theta is convex (the touching point is a grid point).
    direct = -(th[None, :] + np.outer(k, s)).min(axis=1)
    mismatch = float(np.max(np.abs(direct - phi)))
    if convex and mismatch > 1e-9 * max(1.0, float(np.max(np.abs(th)))):
        warnings.warn(
            f"parametric and direct Legendre transforms disagree by {mismatch:.3e}",
            NonConvexThetaWarning,
            stacklevel=2,
        )
    phi = np.where((phi < 0.0) & (phi > -1e-9), 0.0, phi)
    order = np.argsort(k)
    return [RateFunctionPoint(k=float(k[i]), phi=float(phi[i])) for i in order]


def legendre_reconstruct(rate_points, s_values) -> np.ndarray:
    """Rebuild theta_hat(s) = -min_k [phi(k) + k*s] from a phi grid."""
    k = np.array([p.k for p in rate_points])
    phi = np.array([p.phi for p in rate_points])
    s = np.asarray(s_values, dtype=float)
    return -(phi[None, :] + np.outer(s, k)).min(axis=1)


def _bisect_sign_change(f, lo: float, hi: float, f_lo: float, tol: float = 1e-6) -> float:
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if f_mid == 0.0:
            return mid
        if (f_lo < 0) == (f_mid < 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def find_crossover(generator: TiltedGenerator, s_grid) -> CrossoverReport:
    """Locate sign changes and local maxima of Q(s) on the given grid.

    The first sign change of Q is refined by bisection to 1e-6 in s; the
    strongest interior local maximum of Q (a phase-coexistence indicator)
    is refined by bounded minimization.  Absent features are reported as
    None rather than raised.
    """
    s = np.asarray(s_grid, dtype=float)
    if s.size < 32:
        raise ValueError(f"s grid needs at least 32 points, got {s.size}")
    if not np.all(np.isfinite(s)):
        raise ValueError("s grid must be finite")
    s = np.sort(s)
    q = np.array([mandel(generator, x) for x in s])

    s_star = None
    for i in range(s.size - 1):
        if q[i] == 0.0:
            s_star = float(s[i])
            break
        if (q[i] < 0) != (q[i + 1] < 0):
            s_star = float(
                _bisect_sign_change(lambda x: mandel(generator, x), s[i], s[i + 1], q[i])
            )
            break

    local_max = None
    best_q = -np.inf
    for i in range(1, s.size - 1):
        if q[i] > q[i - 1] and q[i] >= q[i + 1] and q[i] > best_q:
            res = scipy.optimize.minimize_scalar(
                lambda x: -mandel(generator, x),
                bounds=(s[i - 1], s[i + 1]),
                method="bounded",
                options={"xatol": 1e-8},
            )
            local_max = (float(res.x), float(-res.fun))
            best_q = q[i]

    return CrossoverReport(
        s_star=s_star, q_at_zero=mandel(generator, 0.0), local_max=local_max
    )


def scan_mandel_vs_parameter(family, values) -> ParameterScan:
    """Q at s=0 across a family of generators indexed by a control parameter.

    ``family`` maps a parameter value to a TiltedGenerator; grid-local
    maxima of Q(0) are reported as phase-coexistence candidates.
    """
    points = tuple((float(v), mandel(family(v), 0.0)) for v in values)
    q = [p[1] for p in points]
    maxima = tuple(
        points[i]
        for i in range(1, len(points) - 1)
        if q[i] > q[i - 1] and q[i] >= q[i + 1]
    )
    return ParameterScan(points=points, local_maxima=maxima)
