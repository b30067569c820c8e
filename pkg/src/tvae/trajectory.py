"""Closed-form latent trajectories mapping time to points in R^d.

A trajectory is a smooth curve ``t -> l(t)`` in latent space built from a
frequency ``f`` (cycles per second), a phase offset ``omega`` (radians), a
spatial code ``b`` in R^d, and - for the spiral variant - a drift velocity
``v``.  Three variants are provided:

* ``eval_circular``: a unit circle in the first two coordinates,
  ``(cos(2*pi*f*t - omega) + b_1, sin(2*pi*f*t - omega) + b_2, b_3, ..., b_d)``.
* ``eval_rot``: the circle rotated so every coordinate oscillates;
  coordinate 1 carries ``cos - sin`` and coordinates 2..d carry
  ``cos + sin``, each offset by the matching entry of ``b``.
* ``eval_spiral``: the rotated circle plus a linear drift ``t * v`` added
  to every coordinate.

All evaluators accept a scalar time or an arbitrary array of times and
return an array with a trailing dimension of size d.  They are pure
functions of their inputs and hold no state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class TrajectoryParams:
    """Validated parameter set for one latent trajectory.

    ``f`` must be strictly positive.  ``omega`` is stored reduced to the
    canonical interval [0, 2*pi).  ``b`` is kept as a float64 vector and
    defines the latent dimension d; it must have at least one entry (two
    for the circular variant, checked at evaluation time).  ``v`` is the
    drift velocity in latent units per second and is ignored by the
    non-spiral variants.
    """

    f: float
    omega: float
    b: np.ndarray
    v: float = 0.0

    def __post_init__(self):
        f = float(self.f)
        if not np.isfinite(f) or f <= 0.0:
            raise ValueError(f"frequency must be finite and > 0, got {self.f!r}")
        omega = float(self.omega)
        if not np.isfinite(omega):
            raise ValueError(f"phase must be finite, got {self.omega!r}")
        b = np.asarray(self.b, dtype=np.float64)
        if b.ndim != 1 or b.size < 1:
            raise ValueError(f"spatial code must be a 1-d vector, got shape {b.shape}")
        if not np.all(np.isfinite(b)):
            raise ValueError("spatial code must be finite")
        v = float(self.v)
        if not np.isfinite(v):
            raise ValueError(f"drift velocity must be finite, got {self.v!r}")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "omega", omega % TWO_PI)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "v", v)

    @property
    def dim(self) -> int:
        return self.b.size

    @property
    def period(self) -> float:
        return 1.0 / self.f


def _phase(t, params: TrajectoryParams) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    return TWO_PI * params.f * t - params.omega


def eval_circular(t, params: TrajectoryParams) -> np.ndarray:
    """Evaluate the circular trajectory at times ``t``.

    Returns an array of shape ``np.shape(t) + (d,)``.  The curve lives on
    a circle of radius 1 in the plane of the first two coordinates,
    centred at ``(b_1, b_2)``; the remaining coordinates are constant.
    """
    if params.dim < 2:
        raise ValueError("circular trajectory requires a latent dimension >= 2")
    phase = _phase(t, params)
    out = np.broadcast_to(params.b, phase.shape + (params.dim,)).copy()
    out[..., 0] += np.cos(phase)
    out[..., 1] += np.sin(phase)
    return out


def eval_rot(t, params: TrajectoryParams) -> np.ndarray:
    """Evaluate the rotated-circle trajectory at times ``t``.

    Every coordinate oscillates with amplitude sqrt(2): coordinate 1 as
    ``cos - sin`` and coordinates 2..d as ``cos + sin``, each offset by
    the corresponding entry of ``b``.
    """
    phase = _phase(t, params)
    cos, sin = np.cos(phase), np.sin(phase)
    out = np.empty(phase.shape + (params.dim,), dtype=np.float64)
    out[..., 0] = cos - sin + params.b[0]
    out[..., 1:] = (cos + sin)[..., None] + params.b[1:]
    return out


def eval_spiral(t, params: TrajectoryParams) -> np.ndarray:
    """Evaluate the spiral trajectory: the rotated circle plus drift ``t*v``."""
    t = np.asarray(t, dtype=np.float64)
    return eval_rot(t, params) + (t * params.v)[..., None]


_EVALUATORS = {
    "circular": eval_circular,
    "rotated": eval_rot,
    "spiral": eval_spiral,
}


def evaluate(variant: str, t, params: TrajectoryParams) -> np.ndarray:
    """Dispatch to the evaluator for ``variant`` (circular/rotated/spiral)."""
    try:
        fn = _EVALUATORS[variant]
    except KeyError:
        raise ValueError(f"unknown trajectory variant {variant!r}") from None
    return fn(t, params)
