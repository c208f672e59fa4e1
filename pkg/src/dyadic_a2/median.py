"""Distribution functions, medians and generalized medians on finite measure spaces.

For values ``f`` with masses ``m`` on a finite set ``Q`` with normalized
measure ``mu``::

    F(a)        = mu(f < a)
    omega_lam   = sup{a : F(a) <= 1 - lam}
    median      = omega_{1/2}

The supremum is attained and equals the first sorted value at which the
cumulative mass exceeds ``(1 - lam)`` of the total, so everything here is
evaluated exactly by sorting.  No bisection is involved.

Masses are converted to "units" first: equal masses become counts and
integer-valued masses stay integers, so cumulative sums are exact and the
batched, grouped and scalar entry points agree bit for bit.

Most functions accept stacked inputs: the last axis indexes points of ``Q``
and any leading axes index independent cases.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "mass_units",
    "distribution",
    "omega_lambda",
    "median",
    "oscillation",
    "grouped_omega",
    "grouped_median",
    "sharp_maximal",
]


def mass_units(mass) -> np.ndarray:
    """Rescale masses so cumulative sums are exact whenever possible."""
    m = np.asarray(mass, dtype=float)
    if m.size == 0:
        return m
    first = m.reshape(-1)[0]
    if np.all(m == first):
        return np.ones_like(m)
    if np.all(m == np.round(m)):
        return m
    return m


def _prepare(f, mass):
    f = np.asarray(f, dtype=float)
    if f.shape[-1] == 0:
        raise ValueError("empty set: the distribution of f is undefined")
    if not np.all(np.isfinite(f)):
        raise ValueError("f must be finite")
    if mass is None:
        units = np.ones_like(f)
    else:
        units = np.broadcast_to(mass_units(mass), f.shape)
    return f, units


def distribution(f, mass=None, a=0.0):
    """``mu(f < a)`` over the last axis."""
    f, units = _prepare(f, mass)
    below = np.where(f < a, units, 0.0).sum(axis=-1)
    return below / units.sum(axis=-1)


def omega_lambda(f, mass=None, lam=0.5):
    """``sup{a : mu(f < a) <= 1 - lam}`` over the last axis.

    ``lam`` may be a scalar or an array broadcastable to the leading axes.
    """
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0) or np.any(lam >= 1):
        raise ValueError(f"lambda must lie in (0, 1), got {lam}")
    f, units = _prepare(f, mass)
    order = np.argsort(f, axis=-1, kind="stable")
    vals = np.take_along_axis(f, order, axis=-1)
    cum = np.cumsum(np.take_along_axis(units, order, axis=-1), axis=-1)
    thresh = (1.0 - lam)[..., None] * cum[..., -1:]
    first = np.argmax(cum > thresh, axis=-1)
    out = np.take_along_axis(vals, first[..., None], axis=-1)[..., 0]
    return out if out.ndim else float(out)


def median(f, mass=None):
    return omega_lambda(f, mass, 0.5)


def oscillation(f, mass=None, lam=0.5):
    """Local mean oscillation ``omega_lam(|f - m(f)|)``."""
    f = np.asarray(f, dtype=float)
    m = np.asarray(median(f, mass))
    return omega_lambda(np.abs(f - m[..., None]), mass, lam)


def grouped_omega(values, mass, labels, lam=0.5):
    """``omega_lam`` of ``values`` restricted to each group of ``labels``.

    Returns ``(group_ids, omega)`` with ``group_ids`` ascending.
    """
    if not 0 < lam < 1:
        raise ValueError(f"lambda must lie in (0, 1), got {lam}")
    values = np.asarray(values, dtype=float)
    labels = np.asarray(labels)
    units = mass_units(mass) if mass is not None else np.ones_like(values)
    units = np.broadcast_to(units, values.shape)
    order = np.lexsort((values, labels))
    lab = labels[order]
    vals = values[order]
    u = units[order]
    starts = np.flatnonzero(np.r_[True, lab[1:] != lab[:-1]])
    group_ids = lab[starts]
    sizes = np.diff(np.r_[starts, lab.size])
    # segmented cumulative sums; exact when units are integers
    cum = np.cumsum(u)
    offset = np.repeat(np.r_[0.0, cum[starts[1:] - 1]], sizes)
    local = cum - offset
    totals = np.repeat(local[starts + sizes - 1], sizes)
    hit = local > (1.0 - lam) * totals
    idx = np.flatnonzero(hit)
    _, first = np.unique(lab[idx], return_index=True)
    return group_ids, vals[idx[first]]


def grouped_median(values, mass, labels):
    return grouped_omega(values, mass, labels, 0.5)


def sharp_maximal(f, q0, lam, system, space):
    """``sup{omega_lam(|f - m(f, Q)|, Q) : x in Q, Q dyadic, Q inside Q0}`` at every point.

    Points outside ``Q0`` get 0.
    """
    from .dyadic import as_cube

    f = np.asarray(f, dtype=float)
    cube = as_cube(system, q0)
    members = cube.members
    out = np.zeros(space.n)
    best = np.zeros(members.size)
    mass = space.mass[members]
    vals = f[members]
    for level in range(cube.level, system.k_max + 1):
        labels = system.labels_at(level)[members]
        ids, med = grouped_median(vals, mass, labels)
        dev = np.abs(vals - med[np.searchsorted(ids, labels)])
        ids, osc = grouped_omega(dev, mass, labels, lam)
        best = np.maximum(best, osc[np.searchsorted(ids, labels)])
    out[members] = best
    return out
