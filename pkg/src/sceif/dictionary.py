"""
Separable mixed dictionaries for block approximation.

A 1D dictionary is stored as an ``(n, m)`` array whose columns are unit-norm
atoms. The mixed dictionary concatenates, in this fixed order, a redundant
discrete cosine family, the Dirac basis and two cubic B-spline families of
supports 3 and 7. 2D atoms are outer products ``dx[:, lx] x dy[:, ly]`` and
are never materialised as a whole.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DictionaryError(ValueError):
    pass


def _normalize_columns(atoms):
    norms = np.linalg.norm(atoms, axis=0)
    return atoms / norms


def _check_length(n):
    if int(n) != n or n < 1:
        raise DictionaryError(f"invalid signal length {n!r}")
    return int(n)


def build_rdc(n, redundancy=2):
    """Redundant discrete cosine family with ``redundancy * n`` atoms."""
    n = _check_length(n)
    if redundancy < 1:
        raise DictionaryError(f"invalid redundancy {redundancy!r}")
    m = redundancy * n
    j = np.arange(1, n + 1)[:, None]
    i = np.arange(1, m + 1)[None, :]
    atoms = np.cos(np.pi * (2 * j - 1) * (i - 1) / (2 * m))
    return _normalize_columns(atoms)


def build_dirac(n):
    n = _check_length(n)
    return np.eye(n)


def cubic_bspline(x):
    """Centered cubic B-spline (order 4, unit knot spacing), support (-2, 2)."""
    ax = np.abs(np.asarray(x, dtype=float))
    out = np.zeros_like(ax)
    inner = ax < 1
    outer = (ax >= 1) & (ax < 2)
    out[inner] = 2.0 / 3.0 - ax[inner] ** 2 + ax[inner] ** 3 / 2.0
    out[outer] = (2.0 - ax[outer]) ** 3 / 6.0
    return out


_SUPPORT_DILATION = {3: 1, 7: 2}


def bspline_prototype(support):
    """Prototype taps of the discrete cubic B-spline with the given support.

    Support 3 samples the spline at the integer knots, support 7 samples the
    spline dilated by two, giving taps proportional to (1, 4, 1) and
    (1, 8, 23, 32, 23, 8, 1).
    """
    try:
        dilation = _SUPPORT_DILATION[support]
    except KeyError:
        raise DictionaryError(f"unsupported B-spline support {support!r}") from None
    half = support // 2
    return cubic_bspline(np.arange(-half, half + 1) / dilation)


def build_bspline(n, support):
    """One translated prototype per sample; border atoms truncated, renormalized."""
    n = _check_length(n)
    proto = bspline_prototype(support)
    half = support // 2
    atoms = np.zeros((n, n))
    for i in range(n):
        for t, v in enumerate(proto):
            j = i + t - half
            if 0 <= j < n:
                atoms[j, i] = v
    return _normalize_columns(atoms)


FAMILIES = ("rdc", "dirac", "spline3", "spline7")


@dataclass(frozen=True)
class Dictionary1D:
    atoms: np.ndarray
    sub_offsets: tuple = field(default=(0,))

    @property
    def n(self):
        return self.atoms.shape[0]

    @property
    def m(self):
        return self.atoms.shape[1]

    def family_of(self, index):
        """Family name of the atom at 1-based ``index``."""
        pos = int(np.searchsorted(self.sub_offsets, index - 1, side="right")) - 1
        return FAMILIES[pos]


def build_mixed(n):
    n = _check_length(n)
    if n < 7:
        raise DictionaryError(f"mixed dictionary needs n >= 7, got {n}")
    parts = [build_rdc(n, 2), build_dirac(n), build_bspline(n, 3), build_bspline(n, 7)]
    offsets = np.cumsum([0] + [p.shape[1] for p in parts[:-1]])
    atoms = np.hstack(parts)
    atoms.setflags(write=False)
    return Dictionary1D(atoms=atoms, sub_offsets=tuple(int(o) for o in offsets))


def flatten_index(lx, ly, m_y, m_x=None):
    """Map a 1-based atom pair to its 1-based flat label, row-major in ``lx``."""
    if ly < 1 or ly > m_y or lx < 1 or (m_x is not None and lx > m_x):
        raise DictionaryError(f"atom pair ({lx}, {ly}) out of range")
    return (lx - 1) * m_y + ly


def unflatten_index(label, m_y, m_x=None):
    if label < 1 or (m_x is not None and label > m_x * m_y):
        raise DictionaryError(f"flat label {label} out of range")
    q, r = divmod(label - 1, m_y)
    return q + 1, r + 1


def atom_2d(dx, dy, lx, ly):
    """2D atom for a 1-based index pair."""
    return np.outer(dx.atoms[:, lx - 1], dy.atoms[:, ly - 1])
