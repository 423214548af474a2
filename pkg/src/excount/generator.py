"""Secular Lindblad generator, jump channels, and the s-tilted superoperator.

Density operators are vectorized by column stacking: component (i, j) of a
density matrix sits at vector index i + j*N, so a sandwich A.sigma.B maps to
kron(B.T, A).  Under the secular structure the exciton populations close on
themselves, so the largest real eigenvalue of the full N^2-dimensional tilted
superoperator is also the largest real eigenvalue of the N x N population
block; both constructions are exposed.

Counting: a channel selector names an ordered exciton pair.  The e^{-s}
counting factor multiplies the sandwich terms of the selected channels and
nothing else.  Pure-dephasing (zero-frequency) channels enter the generator
but are never countable since they produce no population jump.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace

import numpy as np

from .bath import BathSpec, gamma
from .model import ExcitonBasis, intensity_factor

__all__ = [
    "DegenerateGapError",
    "SelectorError",
    "JumpChannel",
    "TiltedGenerator",
    "ClassicalTwoState",
    "enumerate_channels",
    "resolve_counted",
    "tilted_generator",
    "build_tilted",
    "population_block",
    "classical_two_state",
]

# Transition frequencies closer than this (cm^-1) would have to share a
# Lindblad operator, which the per-pair channel structure cannot express.
GAP_TOL = 1e-9


class DegenerateGapError(ValueError):
    """Two distinct exciton pairs share a transition frequency."""


class SelectorError(ValueError):
    """A channel selector does not resolve to an existing channel."""


@dataclass(frozen=True, eq=False)
class JumpChannel:
    """One dissipative transition between exciton states.

    ``omega`` is the signed energy change of the system (energy of the
    destination minus the source), ``rate`` is gamma(omega) times the
    intensity factor, and ``site_weights`` holds the per-site exciton
    interference c_m(from) * c_m(to).  Channels with ``from_exciton ==
    to_exciton`` are the pure-dephasing group (omega = 0).
    """

    from_exciton: int
    to_exciton: int
    omega: float
    rate: float
    site_weights: np.ndarray
    counted: bool = False

    @property
    def is_dephasing(self) -> bool:
        return self.from_exciton == self.to_exciton

    @property
    def pair(self) -> tuple[int, int]:
        return (self.from_exciton, self.to_exciton)

    def __repr__(self):
        kind = "dephasing" if self.is_dephasing else "transport"
        flag = ", counted" if self.counted else ""
        return (
            f"JumpChannel({kind} a{self.from_exciton + 1}->a{self.to_exciton + 1}, "
            f"omega={self.omega:.6g}, rate={self.rate:.6g}{flag})"
        )


def enumerate_channels(basis: ExcitonBasis, bath: BathSpec) -> list[JumpChannel]:
    """All jump channels of the secular generator, none counted yet.

    Returns the N(N-1) ordered transport channels followed by the N-member
    zero-frequency dephasing group.  Raises DegenerateGapError when two
    distinct exciton pairs sit closer than 1e-9 cm^-1 in transition
    frequency (including a transport gap colliding with zero).
    """
    n = basis.n_excitons
    amps = basis.amplitudes
    pairs = [(a, b) for a in range(n) for b in range(n) if a != b]

    gaps: list[tuple[float, tuple[int, int]]] = []
    for a, b in pairs:
        if a > b:
            continue
        gap = abs(basis.gap(a, b))
        if gap < GAP_TOL:
            raise DegenerateGapError(
                f"transition a{a + 1}<->a{b + 1} has zero frequency "
                f"({gap:.3e} cm^-1), colliding with the dephasing group"
            )
        gaps.append((gap, (a, b)))
    sorted_gaps = sorted(gaps)
    for (g1, p1), (g2, p2) in zip(sorted_gaps, sorted_gaps[1:]):
        if g2 - g1 < GAP_TOL:
            raise DegenerateGapError(
                f"transitions a{p1[0] + 1}<->a{p1[1] + 1} and "
                f"a{p2[0] + 1}<->a{p2[1] + 1} share the frequency "
                f"{g1:.6g} cm^-1 within {GAP_TOL}"
            )

    channels = []
    for a, b in pairs:
        omega = basis.gap(a, b)
        channels.append(
            JumpChannel(
                from_exciton=a,
                to_exciton=b,
                omega=omega,
                rate=gamma(bath, omega) * intensity_factor(basis, a, b),
                site_weights=amps[:, a] * amps[:, b],
            )
        )
    gamma0 = gamma(bath, 0.0)
    for a in range(n):
        channels.append(
            JumpChannel(
                from_exciton=a,
                to_exciton=a,
                omega=0.0,
                rate=gamma0 * intensity_factor(basis, a, a),
                site_weights=amps[:, a] * amps[:, a],
            )
        )
    return channels


_DOWN_RE = re.compile(r"^down:a(\d+)->a(\d+)$")
_UP_RE = re.compile(r"^up:a(\d+)->a(\d+)$")
_PAIR_RE = re.compile(r"^pair:a(\d+)<->a(\d+)$")


def _parse_label(text: str, value: str, n: int) -> int:
    idx = int(value) - 1
    if not 0 <= idx < n:
        raise SelectorError(
            f"selector {text!r}: exciton a{value} out of range (model has {n} excitons)"
        )
    return idx


def resolve_counted(channels, selectors) -> tuple[JumpChannel, ...]:
    """Return a channel tuple with counted flags set from the selectors.

    Selector syntax (1-based, ascending-energy exciton labels):
    ``down:a2->a1`` one downward channel, ``up:a1->a2`` one upward channel,
    ``pair:a1<->a2`` both directions, ``all-down`` every downward channel.
    Ordered (from, to) index tuples are accepted programmatically.
    """
    transport = [c for c in channels if not c.is_dephasing]
    n = max(max(c.from_exciton, c.to_exciton) for c in channels) + 1
    counted_pairs: set[tuple[int, int]] = set()
    for sel in selectors:
        if isinstance(sel, tuple):
            frm, to = sel
            if frm == to:
                raise SelectorError(f"cannot count a dephasing channel: {sel}")
            if not (0 <= frm < n and 0 <= to < n):
                raise SelectorError(f"selector {sel}: exciton index out of range")
            counted_pairs.add((frm, to))
            continue
        text = sel.strip()
        if text == "all-down":
            counted_pairs.update(c.pair for c in transport if c.omega < 0)
            continue
        if m := _DOWN_RE.match(text):
            frm = _parse_label(text, m.group(1), n)
            to = _parse_label(text, m.group(2), n)
            if frm <= to:
                raise SelectorError(
                    f"selector {text!r} is not downward (labels ascend in energy)"
                )
            counted_pairs.add((frm, to))
        elif m := _UP_RE.match(text):
            frm = _parse_label(text, m.group(1), n)
            to = _parse_label(text, m.group(2), n)
            if frm >= to:
                raise SelectorError(f"selector {text!r} is not upward")
            counted_pairs.add((frm, to))
        elif m := _PAIR_RE.match(text):
            i = _parse_label(text, m.group(1), n)
            j = _parse_label(text, m.group(2), n)
            if i == j:
                raise SelectorError(f"selector {text!r} names a single exciton")
            counted_pairs.add((i, j))
            counted_pairs.add((j, i))
        else:
            raise SelectorError(
                f"bad channel selector {text!r}; expected down:aJ->aI, "
                "up:aI->aJ, pair:aI<->aJ or all-down"
            )
    if not counted_pairs:
        raise SelectorError("empty counted set: theta(s) would be structure-free")
    existing = {c.pair for c in transport}
    missing = counted_pairs - existing
    if missing:
        raise SelectorError(f"selectors name non-existing channels: {sorted(missing)}")
    return tuple(
        replace(c, counted=c.pair in counted_pairs and not c.is_dephasing)
        for c in channels
    )


class TiltedGenerator:
    """The s-parameterized family W_s over vectorized density operators.

    Static (untilted) and counted (tilted) parts are precomputed once, so
    ``assemble`` and ``population_block`` are cheap, pure functions of s and
    safe to call concurrently.
    """

    def __init__(self, basis: ExcitonBasis, bath: BathSpec, channels):
        channels = tuple(channels)
        if not any(c.counted for c in channels):
            raise SelectorError("tilted generator needs a non-empty counted set")
        if any(c.counted and c.is_dephasing for c in channels):
            raise SelectorError("dephasing channels are not countable")
        self.basis = basis
        self.bath = bath
        self.channels = channels
        n = basis.n_excitons
        self._n = n

        # Full-space pieces: everything except the counted sandwiches is
        # independent of s.
        dim = n * n
        eye = np.eye(n)
        ham = np.diag(basis.energies).astype(complex)
        static = -1j * (np.kron(eye, ham) - np.kron(ham, eye))
        counted = np.zeros((dim, dim), dtype=complex)
        block_static = np.zeros((n, n))
        block_counted = np.zeros((n, n))
        for ch in channels:
            if ch.is_dephasing:
                continue
            a, b = ch.from_exciton, ch.to_exciton
            e_ba = np.zeros((n, n))
            e_ba[b, a] = 1.0
            p_a = np.zeros((n, n))
            p_a[a, a] = 1.0
            sandwich = ch.rate * np.kron(e_ba, e_ba)
            static -= 0.5 * ch.rate * (np.kron(eye, p_a) + np.kron(p_a, eye))
            block_static[a, a] -= ch.rate
            if ch.counted:
                counted += sandwich
                block_counted[b, a] += ch.rate
            else:
                static += sandwich
                block_static[b, a] += ch.rate
        # Pure dephasing: one diagonal operator per site built from the
        # zero-frequency channel group, weighted by gamma(0).
        gamma0 = gamma(bath, 0.0)
        for m in range(basis.n_sites):
            d_m = np.diag(basis.amplitudes[m, :] ** 2)
            d_m2 = d_m @ d_m
            static += gamma0 * (
                np.kron(d_m, d_m) - 0.5 * (np.kron(eye, d_m2) + np.kron(d_m2, eye))
            )
        self._static = static
        self._counted = counted
        self._block_static = block_static
        self._block_counted = block_counted

    @property
    def n_excitons(self) -> int:
        return self._n

    @property
    def dimension(self) -> int:
        return self._n * self._n

    @property
    def counted_channels(self) -> tuple[JumpChannel, ...]:
        return tuple(c for c in self.channels if c.counted)

    def assemble(self, s: float) -> np.ndarray:
        """W_s on the N^2-dimensional vectorized space (complex)."""
        return self._static + math.exp(-s) * self._counted

    def assemble_derivative(self, s: float) -> np.ndarray:
        """dW_s/ds: the counted sandwiches scaled by -e^{-s}."""
        return -math.exp(-s) * self._counted

    def population_block(self, s: float) -> np.ndarray:
        """Classical tilted rate matrix over exciton populations (real)."""
        return self._block_static + math.exp(-s) * self._block_counted

    def population_block_derivative(self, s: float) -> np.ndarray:
        return -math.exp(-s) * self._block_counted


def tilted_generator(basis: ExcitonBasis, bath: BathSpec, counted) -> TiltedGenerator:
    """Enumerate channels, apply counting selectors, return the generator."""
    channels = resolve_counted(enumerate_channels(basis, bath), counted)
    return TiltedGenerator(basis, bath, channels)


def build_tilted(basis: ExcitonBasis, bath: BathSpec, counted, s: float) -> np.ndarray:
    """The matrix of W_s with the selected channels counted."""
    return tilted_generator(basis, bath, counted).assemble(s)


def population_block(basis: ExcitonBasis, bath: BathSpec, counted, s: float) -> np.ndarray:
    """The tilted classical generator acting on exciton populations."""
    return tilted_generator(basis, bath, counted).population_block(s)


def classical_two_state(kappa: float, Gamma: float, s: float) -> np.ndarray:
    """The two-state rate matrix [[-kappa, Gamma e^{-s}], [kappa, -Gamma]]."""
    if kappa <= 0 or Gamma <= 0:
        raise ValueError(f"rates must be positive, got kappa={kappa}, Gamma={Gamma}")
    return np.array([[-kappa, Gamma * math.exp(-s)], [kappa, -Gamma]])


@dataclass(frozen=True)
class ClassicalTwoState:
    """Closed forms for the two-state chain with counting on the Gamma leg.

    ``kappa`` is the upward and ``Gamma`` the downward equilibrium rate;
    detailed balance ties them through the counted jump's signed frequency,
    Gamma = kappa * exp(-beta * omega) with omega < 0 for a downward jump.
    """

    kappa: float
    Gamma: float

    def __post_init__(self):
        if self.kappa <= 0 or self.Gamma <= 0:
            raise ValueError("rates must be positive")

    @classmethod
    def from_channels(cls, channels, bath: BathSpec) -> "ClassicalTwoState":
        """Build from an enumerated two-exciton channel list, with a
        detailed-balance consistency check."""
        transport = [c for c in channels if not c.is_dephasing]
        if len(transport) != 2:
            raise ValueError("expected exactly one exciton pair")
        down = next(c for c in transport if c.omega < 0)
        up = next(c for c in transport if c.omega > 0)
        expected = up.rate * math.exp(-bath.beta * down.omega)
        if not math.isclose(down.rate, expected, rel_tol=1e-10):
            raise ValueError("channel rates violate detailed balance")
        return cls(kappa=up.rate, Gamma=down.rate)

    def matrix(self, s: float) -> np.ndarray:
        return classical_two_state(self.kappa, self.Gamma, s)

    def _discriminant(self, s: float) -> float:
        # (kappa+Gamma)^2 - 4 kappa Gamma (1 - e^{-s}), in cancellation-free form
        return (self.kappa - self.Gamma) ** 2 + 4.0 * self.kappa * self.Gamma * math.exp(-s)

    def theta(self, s: float) -> float:
        """Largest eigenvalue of the tilted matrix."""
        return -0.5 * (self.kappa + self.Gamma) + 0.5 * math.sqrt(self._discriminant(s))

    def activity(self, s: float) -> float:
        return self.kappa * self.Gamma * math.exp(-s) / math.sqrt(self._discriminant(s))

    def mandel(self, s: float) -> float:
        """Q(s) = -2 kappa Gamma e^{-s} / [(kappa+Gamma)^2 - 4 kappa Gamma (1-e^{-s})]."""
        return -2.0 * self.kappa * self.Gamma * math.exp(-s) / self._discriminant(s)
