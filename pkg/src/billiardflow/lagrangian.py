"""Chord-length generating function on a boundary: partials, forces, gradient.

For boundary points gamma(x), gamma(X) the generating function is the chord
length l(x, X) = |gamma(X) - gamma(x)|, smooth away from x - X in Z.  Its
partials are expressed through the angles the chord makes with the two
tangents; all trigonometry here is done with cross/dot ratios or atan2, never
arccos, to keep full precision near the diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Boundary, curvature_at

#: within this distance of the diagonal, first partials switch to their
#: continuous boundary extension (the raw quotient loses precision there)
DIAG_GUARD = 1e-9
#: closer than this to the diagonal counts as coincident points
COINCIDENT_TOL = 1e-12


@dataclass(frozen=True)
class ChordAngles:
    """Angles between the chord and the tangents at its two endpoints."""

    theta: np.ndarray  # at the departure point, in (0, pi)
    phi: np.ndarray    # at the arrival point, in (0, pi)


@dataclass(frozen=True)
class SecondPartials:
    d11: np.ndarray
    d12: np.ndarray
    d22: np.ndarray


def _cross(u, v):
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


def _dot(u, v):
    return u[..., 0] * v[..., 0] + u[..., 1] * v[..., 1]


def _gap(x, X):
    """Fractional part of X - x in [0, 1)."""
    return np.mod(np.asarray(X, dtype=float) - np.asarray(x, dtype=float), 1.0)


def _check_not_coincident(x, X):
    t = _gap(x, X)
    t = np.minimum(t, 1.0 - t)
    if np.any(t <= COINCIDENT_TOL):
        raise ValueError("coincident boundary points: x - X is an integer")


def chord_length(boundary: Boundary, x, X):
    d = boundary.gamma(X) - boundary.gamma(x)
    return np.sqrt(np.sum(d * d, axis=-1))


def chord_angles(boundary: Boundary, x, X) -> ChordAngles:
    """Chord-tangent angles via atan2 of cross/dot products."""
    _check_not_coincident(x, X)
    tx = boundary.dgamma(x)
    tX = boundary.dgamma(X)
    d = boundary.gamma(X) - boundary.gamma(x)
    theta = np.arctan2(_cross(tx, d), _dot(tx, d))
    phi = np.arctan2(_cross(d, tX), _dot(d, tX))
    return ChordAngles(theta=theta, phi=phi)


def d1_chord(boundary: Boundary, x, X):
    """d/dx of the chord length; -|gamma'(x)| cos(theta).

    Within DIAG_GUARD of the diagonal the continuous extension is returned
    (-|gamma'| as X -> x+, +|gamma'| as X -> (x+1)-).
    """
    _check_not_coincident(x, X)
    x = np.asarray(x, dtype=float)
    X = np.asarray(X, dtype=float)
    t = _gap(x, X)
    tx = boundary.dgamma(x)
    speed = np.sqrt(np.sum(tx * tx, axis=-1))
    d = boundary.gamma(X) - boundary.gamma(x)
    length = np.sqrt(np.sum(d * d, axis=-1))
    raw = -_dot(tx, d) / np.where(length > 0, length, 1.0)
    return np.where(t <= DIAG_GUARD, -speed,
                    np.where(1.0 - t <= DIAG_GUARD, speed, raw))


def d2_chord(boundary: Boundary, x, X):
    """d/dX of the chord length; +|gamma'(X)| cos(phi)."""
    _check_not_coincident(x, X)
    x = np.asarray(x, dtype=float)
    X = np.asarray(X, dtype=float)
    t = _gap(x, X)
    tX = boundary.dgamma(X)
    speed = np.sqrt(np.sum(tX * tX, axis=-1))
    d = boundary.gamma(X) - boundary.gamma(x)
    length = np.sqrt(np.sum(d * d, axis=-1))
    raw = _dot(tX, d) / np.where(length > 0, length, 1.0)
    return np.where(t <= DIAG_GUARD, speed,
                    np.where(1.0 - t <= DIAG_GUARD, -speed, raw))


def second_partials(boundary: Boundary, x, X) -> SecondPartials:
    """Second partials of the chord length, constant-speed parametrization only.

    With c the (constant) speed, L the chord length, theta/phi the chord
    angles and kappa the curvature:

        d11 = c^2 (sin^2 theta / L - kappa(x) sin theta)
        d12 = c^2 sin theta sin phi / L            (always positive)
        d22 = c^2 (sin^2 phi / L - kappa(X) sin phi)
    """
    if not boundary.constant_speed:
        raise ValueError("second partials require a constant-speed boundary; "
                         "reparametrize first")
    _check_not_coincident(x, X)
    c = boundary.total_length
    tx = boundary.dgamma(x)
    tX = boundary.dgamma(X)
    d = boundary.gamma(X) - boundary.gamma(x)
    length = np.sqrt(np.sum(d * d, axis=-1))
    # sines from cross products; both positive for 0 < X - x < 1 on a convex curve
    sin_theta = _cross(tx, d) / (c * length)
    sin_phi = _cross(d, tX) / (c * length)
    kx = curvature_at(boundary, x)
    kX = curvature_at(boundary, X)
    c2 = c * c
    return SecondPartials(
        d11=c2 * (sin_theta * sin_theta / length - kx * sin_theta),
        d12=c2 * sin_theta * sin_phi / length,
        d22=c2 * (sin_phi * sin_phi / length - kX * sin_phi),
    )


def _force_domain_check(x, X):
    x = np.asarray(x, dtype=float)
    X = np.asarray(X, dtype=float)
    if np.any(X < x - 1e-12) or np.any(X > x + 1.0 + 1e-12):
        raise ValueError("forces are defined for x <= X <= x + 1")
    return x, X


def force_minus(boundary: Boundary, x, X):
    """Continuous extension of d2_chord to the closed strip x <= X <= x + 1.

    Equals +|gamma'(x)| at X = x and -|gamma'(x)| at X = x + 1; strictly
    increasing in x for fixed X on a strictly convex table.
    """
    x, X = _force_domain_check(x, X)
    t = X - x
    tX = boundary.dgamma(X)
    speed = np.sqrt(np.sum(tX * tX, axis=-1))
    d = boundary.gamma(X) - boundary.gamma(x)
    length = np.sqrt(np.sum(d * d, axis=-1))
    raw = _dot(tX, d) / np.where(length > 0, length, 1.0)
    return np.where(t <= DIAG_GUARD, speed,
                    np.where(t >= 1.0 - DIAG_GUARD, -speed, raw))


def force_plus(boundary: Boundary, x, X):
    """Continuous extension of d1_chord to the closed strip x <= X <= x + 1.

    Equals -|gamma'(x)| at X = x and +|gamma'(x)| at X = x + 1; strictly
    increasing in X for fixed x on a strictly convex table.
    """
    x, X = _force_domain_check(x, X)
    t = X - x
    tx = boundary.dgamma(x)
    speed = np.sqrt(np.sum(tx * tx, axis=-1))
    d = boundary.gamma(X) - boundary.gamma(x)
    length = np.sqrt(np.sum(d * d, axis=-1))
    raw = -_dot(tx, d) / np.where(length > 0, length, 1.0)
    return np.where(t <= DIAG_GUARD, -speed,
                    np.where(t >= 1.0 - DIAG_GUARD, speed, raw))


def _gradient_coords(boundary: Boundary, coords: np.ndarray, q: int) -> np.ndarray:
    """Gradient of the periodic action in plain-array form (hot path).

    Evaluates the curve once per vertex and assembles
    F_i = <gamma'(x_i), d_{i-1}/|d_{i-1}| - d_i/|d_i|> with chords
    d_i = gamma(x_{i+1}) - gamma(x_i); by 1-periodicity of the curve the
    wrapped chord needs no special casing.  Equal to
    force_minus(x_{i-1}, x_i) + force_plus(x_i, x_{i+1}) on admissible lifts.
    """
    x = coords
    p = x.shape[0]
    inc = np.empty(p)
    inc[:-1] = x[1:] - x[:-1]
    inc[-1] = x[0] + q - x[-1]
    bad = np.nonzero((inc <= 0.0) | (inc >= 1.0))[0]
    if bad.size:
        i = int(bad[0])
        raise ValueError(
            f"lift leaves the admissible region at increment {i}: "
            f"x[{(i + 1) % p}] - x[{i}] = {inc[i]:.6g}")
    pts = boundary.gamma(x)
    tangents = boundary.dgamma(x)
    chords = np.roll(pts, -1, axis=0) - pts
    unit = chords / np.sqrt(np.sum(chords * chords, axis=-1))[:, None]
    return np.sum(tangents * (np.roll(unit, 1, axis=0) - unit), axis=-1)


def gradient_field(boundary: Boundary, lift) -> np.ndarray:
    """Action gradient F_i = force_minus(x_{i-1}, x_i) + force_plus(x_i, x_{i+1}).

    Uses the wraparound x_{-1} = x_{p-1} - q and x_p = x_0 + q.  Zero exactly
    at billiard configurations.  Raises ValueError (naming the first violating
    index) if any increment leaves (0, 1).
    """
    return _gradient_coords(boundary, np.asarray(lift.coords, dtype=float), lift.q)


def periodic_action(boundary: Boundary, lift) -> float:
    """Total chord length W of the closed polygon the lift traces."""
    x = np.asarray(lift.coords, dtype=float)
    nxt = np.concatenate((x[1:], (x[0] + lift.q,)))
    return float(np.sum(chord_length(boundary, x, nxt)))
