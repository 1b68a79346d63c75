"""Exact lattice distributions for walks with increments in {-1, 0, +1}.

The law of a controlled walk at a fixed time is a dense mass vector over a
contiguous window of integer sites, split by a one-bit history flag that
records whether the walk has visited site 0 so far. Policies that do not
care about history just see both rows evolved identically.

Two numeric backends share one code path: float64 arrays (default) and
object arrays of fractions.Fraction for an exact cross-check mode on short
horizons.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import AdmissibilityError, InvariantError, ParameterError

# flag row indices
NOT_HIT = 0
HIT_ZERO = 1

FLOAT = "float64"
RATIONAL = "rational"

# exact mode is a cross-check oracle; widths stay tiny
RATIONAL_MAX_STEPS = 64

_STEP_TOL = 1e-14
_TOTAL_TOL = 1e-12


def _zeros(shape, mode):
    if mode == RATIONAL:
        out = np.empty(shape, dtype=object)
        out[...] = Fraction(0)
        return out
    return np.zeros(shape, dtype=np.float64)


def _as_mode_value(value, mode):
    return Fraction(value) if mode == RATIONAL else float(value)


@dataclass(frozen=True)
class LatticeDistribution:
    """Law of the walk at one time, augmented with the visited-0 flag.

    mass has shape (2, width): row NOT_HIT holds probability that has never
    been at site 0, row HIT_ZERO the rest. Column j corresponds to site
    offset + j. Instances are treated as immutable.
    """

    time: int
    offset: int
    mass: np.ndarray
    mode: str = FLOAT

    def __post_init__(self):
        if self.mass.ndim != 2 or self.mass.shape[0] != 2:
            raise ParameterError("mass must be a (2, width) array")
        if self.mode not in (FLOAT, RATIONAL):
            raise ParameterError(f"unknown numeric mode {self.mode!r}")
        total = self.mass.sum()
        if self.mode == RATIONAL:
            if total != 1:
                raise InvariantError(f"total mass is {total}, expected exactly 1")
        elif abs(float(total) - 1.0) > _TOTAL_TOL:
            raise InvariantError(f"total mass {total!r} deviates from 1 beyond {_TOTAL_TOL}")
        if np.any(self.mass < 0):
            raise InvariantError("negative mass entry")

    @property
    def width(self) -> int:
        return self.mass.shape[1]

    @property
    def sites(self) -> np.ndarray:
        """All represented sites, leftmost first."""
        return np.arange(self.offset, self.offset + self.width)

    def site_mass(self) -> np.ndarray:
        """Per-site mass with the two flag rows combined."""
        return self.mass[0] + self.mass[1]

    def mass_at(self, x: int, flag: int | None = None):
        j = x - self.offset
        if j < 0 or j >= self.width:
            return _as_mode_value(0, self.mode)
        if flag is None:
            return self.mass[0, j] + self.mass[1, j]
        return self.mass[flag, j]

    def flag_totals(self):
        """(never-visited-0 mass, visited-0 mass)."""
        return self.mass[0].sum(), self.mass[1].sum()


@dataclass(frozen=True)
class ControlRow:
    """Control values for one step, aligned with a distribution window.

    u has shape (2, width): one value per (flag, site). Policies that ignore
    the flag emit two identical rows. Every value must lie in [0, q_cap].
    """

    time: int
    offset: int
    u: np.ndarray
    q_cap: float


def point_mass(x: int, flag: int | None = None, mode: str = FLOAT) -> LatticeDistribution:
    """Unit mass at site x, time 0.

    The default flag is HIT_ZERO when x == 0 (the walk starts on 0) and
    NOT_HIT otherwise.
    """
    if flag is None:
        flag = HIT_ZERO if x == 0 else NOT_HIT
    if flag == NOT_HIT and x == 0:
        raise ParameterError("mass at site 0 must carry the visited-0 flag")
    mass = _zeros((2, 1), mode)
    mass[flag, 0] = _as_mode_value(1, mode)
    return LatticeDistribution(time=0, offset=x, mass=mass, mode=mode)


def step_distribution(
    d: LatticeDistribution,
    row: ControlRow,
    frozen: np.ndarray | None = None,
) -> LatticeDistribution:
    """Advance the distribution one step under the given control row.

    Mass at site x with control u stays put with probability u and moves to
    each of x-1, x+1 with probability (1-u)/2. Any mass of the NOT_HIT row
    that lands on site 0 switches to the HIT_ZERO row.

    frozen, if given, is a boolean mask over the current window marking
    absorbing sites: their mass is carried through unchanged. This is the
    kernel variant used for first-passage quantities.
    """
    if row.time != d.time:
        raise ParameterError(f"control row is for time {row.time}, distribution at {d.time}")
    if row.offset != d.offset or row.u.shape != d.mass.shape:
        raise ParameterError("control row window does not match the distribution window")
    if np.any(row.u < 0) or np.any(row.u > row.q_cap):
        raise AdmissibilityError(f"control values escape [0, {row.q_cap}]")

    w = d.width
    mass = d.mass
    held = None
    if frozen is not None:
        frozen = np.asarray(frozen, dtype=bool)
        if frozen.shape != (w,):
            raise ParameterError("frozen mask must match the window width")
        idx = np.flatnonzero(frozen)
        moving = mass.copy()
        moving[:, idx] = 0
        held = _zeros((2, w), d.mode)
        held[:, idx] = mass[:, idx]
    else:
        moving = mass

    half_factor = (1 - row.u) * _as_mode_value(Fraction(1, 2), d.mode)
    half = moving * half_factor
    stay = moving * row.u

    new = _zeros((2, w + 2), d.mode)
    new[:, 0:w] = half            # arrivals one site to the left
    new[:, 2 : w + 2] += half     # arrivals one site to the right
    new[:, 1 : w + 1] += stay
    if held is not None:
        new[:, 1 : w + 1] += held

    z = -(d.offset - 1)  # column of site 0 in the widened window
    if 0 <= z < w + 2:
        new[HIT_ZERO, z] = new[HIT_ZERO, z] + new[NOT_HIT, z]
        new[NOT_HIT, z] = _as_mode_value(0, d.mode)

    before = mass.sum()
    after = new.sum()
    if d.mode == RATIONAL:
        if after != before:
            raise InvariantError("mass not conserved in exact mode")
    elif abs(float(after) - float(before)) > _STEP_TOL:
        raise InvariantError(f"mass drifted by {float(after) - float(before):.3e} in one step")

    return LatticeDistribution(time=d.time + 1, offset=d.offset - 1, mass=new, mode=d.mode)


def interval_mass(d: LatticeDistribution, a: int, b: int, flag: int | None = None):
    """Total mass on sites a..b inclusive (0 if the window is missed)."""
    lo = max(a, d.offset)
    hi = min(b, d.offset + d.width - 1)
    if lo > hi:
        return _as_mode_value(0, d.mode)
    sl = slice(lo - d.offset, hi - d.offset + 1)
    if flag is None:
        return d.mass[0, sl].sum() + d.mass[1, sl].sum()
    return d.mass[flag, sl].sum()


def reset_hit_flags(d: LatticeDistribution) -> LatticeDistribution:
    """Restart the visited-0 bookkeeping: only mass currently at site 0 is flagged.

    Used at schedule segment boundaries where a history-reading control
    measures hitting times from the segment start. Time is unchanged.
    """
    combined = d.site_mass()
    new = _zeros((2, d.width), d.mode)
    new[NOT_HIT] = combined
    z = -d.offset
    if 0 <= z < d.width:
        new[HIT_ZERO, z] = combined[z]
        new[NOT_HIT, z] = _as_mode_value(0, d.mode)
    return LatticeDistribution(time=d.time, offset=d.offset, mass=new, mode=d.mode)


def to_snapshot(d: LatticeDistribution, flag_split: bool = True) -> dict:
    """JSON-ready snapshot: {time, offset, mass, flag_split}."""

    def enc(row):
        if d.mode == RATIONAL:
            return [str(Fraction(v)) for v in row]
        return [float(v) for v in row]

    snap = {
        "time": d.time,
        "offset": d.offset,
        "mass": [enc(d.mass[0]), enc(d.mass[1])] if flag_split else enc(d.site_mass()),
        "flag_split": flag_split,
    }
    if d.mode == RATIONAL:
        snap["mode"] = RATIONAL
    return snap


def from_snapshot(snap: dict) -> LatticeDistribution:
    if not snap.get("flag_split", False):
        raise ParameterError("combined snapshots drop the history split; cannot reload")
    mode = snap.get("mode", FLOAT)
    rows = snap["mass"]
    width = len(rows[0])
    mass = _zeros((2, width), mode)
    for f in (NOT_HIT, HIT_ZERO):
        for j, v in enumerate(rows[f]):
            mass[f, j] = Fraction(v) if mode == RATIONAL else float(v)
    return LatticeDistribution(time=snap["time"], offset=snap["offset"], mass=mass, mode=mode)


# vocabulary alias: the flag-augmented distribution is the one we always carry
AugmentedDistribution = LatticeDistribution
