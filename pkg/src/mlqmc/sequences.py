"""Extensible rank-1 lattices and base-2 digital nets in radical-inverse order.

Points are produced as unsigned integers on a dyadic grid and only converted to
floats at the boundary. Lattice points live on the 2^-52 grid, digital-net
points on the 2^-t grid of their generator. Both shifts are stored the same way,
so ``x_i (-) x_0`` recovers the unshifted point exactly for either kind.
"""
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from ._backend import core

LATTICE_BITS = 52
_U1 = np.uint64(1)


class LdDataError(ValueError):
    """Raised for malformed generator files or requests beyond their size."""


def radical_inverse(i, bits=None):
    """Van der Corput radical inverse in base 2.

    With ``bits`` given, returns the integer ``v(i) * 2**bits`` (uint64) instead
    of a float; ``i`` must then be below ``2**bits``.
    """
    scalar = np.isscalar(i)
    idx = np.atleast_1d(np.asarray(i)).astype(np.int64)
    if np.any(idx < 0):
        raise ValueError("radical_inverse needs nonnegative indices")
    m = max(1, int(idx.max()).bit_length()) if idx.size else 1
    u = idx.astype(np.uint64)
    rev = np.zeros(idx.shape, dtype=np.uint64)
    for b in range(m):
        rev |= ((u >> np.uint64(b)) & _U1) << np.uint64(m - 1 - b)
    if bits is None:
        out = np.ldexp(rev.astype(np.float64), -m)
        return float(out[0]) if scalar else out
    if m > bits:
        raise ValueError(f"index needs {m} bits, only {bits} available")
    out = rev << np.uint64(bits - m)
    return out[0] if scalar else out


@dataclass(frozen=True)
class LatticeGen:
    """Generating vector of a rank-1 lattice."""

    g: np.ndarray
    m_max: int = LATTICE_BITS

    def __post_init__(self):
        g = np.ascontiguousarray(self.g, dtype=np.uint64).reshape(-1)
        if g.size == 0 or np.any(g < 1):
            raise ValueError("generating vector entries must be >= 1")
        g.flags.writeable = False
        object.__setattr__(self, "g", g)

    @property
    def d(self):
        return self.g.size

    @property
    def t(self):
        return LATTICE_BITS

    def head(self, d):
        if d > self.d:
            raise LdDataError(f"requested d={d} but the generator has {self.d} dimensions")
        return LatticeGen(self.g[:d], self.m_max)


@dataclass(frozen=True)
class DigitalNetGen:
    """Generating matrices of a base-2 digital net.

    ``columns[j, p]`` holds column p of the matrix for dimension j as a t-bit
    integer whose most significant bit is the first binary digit.
    """

    columns: np.ndarray
    t: int

    def __post_init__(self):
        c = np.ascontiguousarray(self.columns, dtype=np.uint64)
        if c.ndim != 2 or c.shape[1] < 1:
            raise ValueError("columns must have shape (d, p_max) with p_max >= 1")
        if not 1 <= self.t <= 64:
            raise ValueError("precision t must lie in [1, 64]")
        if self.t < 64 and np.any(c >> np.uint64(self.t)):
            raise ValueError("column integers must be below 2**t")
        c.flags.writeable = False
        object.__setattr__(self, "columns", c)

    @property
    def d(self):
        return self.columns.shape[0]

    @property
    def p_max(self):
        return self.columns.shape[1]

    @property
    def m_max(self):
        return self.p_max

    def head(self, d):
        if d > self.d:
            raise LdDataError(f"requested d={d} but the generator has {self.d} dimensions")
        return DigitalNetGen(self.columns[:d], self.t)


@dataclass(frozen=True)
class Shift:
    """Per-dimension shift held as integers on the 2^-t grid."""

    delta: np.ndarray
    t: int

    def __post_init__(self):
        dl = np.ascontiguousarray(self.delta, dtype=np.uint64).reshape(-1)
        if self.t < 64 and np.any(dl >> np.uint64(self.t)):
            raise ValueError("shift integers must be below 2**t")
        dl.flags.writeable = False
        object.__setattr__(self, "delta", dl)

    @property
    def d(self):
        return self.delta.size

    @property
    def values(self):
        """The shift as floats in [0, 1)."""
        return np.ldexp(self.delta.astype(np.float64), -self.t)

    @classmethod
    def zeros(cls, d, t):
        return cls(np.zeros(d, dtype=np.uint64), t)

    @classmethod
    def random(cls, d, t, rng):
        return cls(rng.integers(0, 2**t, size=d, dtype=np.uint64, endpoint=False)
                   if t < 64 else rng.integers(0, 2**64 - 1, size=d, dtype=np.uint64), t)

    @classmethod
    def from_floats(cls, delta, t):
        """Round a shift given in [0, 1) down to the 2^-t grid."""
        v = np.asarray(delta, dtype=np.float64).reshape(-1)
        if np.any((v < 0) | (v >= 1)):
            raise ValueError("shift entries must lie in [0, 1)")
        return cls(np.floor(np.ldexp(v, t)).astype(np.uint64), t)


def _check_shift(gen, shift):
    if shift is None:
        return Shift.zeros(gen.d, gen.t)
    if shift.d != gen.d:
        raise ValueError(f"shift has {shift.d} dimensions, generator has {gen.d}")
    if shift.t != gen.t:
        raise ValueError(f"shift precision {shift.t} does not match generator precision {gen.t}")
    return shift


def lattice_ints(gen, shift=None, i_start=0, i_end=1):
    """Lattice points scaled by 2^52 as uint64, rows ``i_start..i_end-1``."""
    shift = _check_shift(gen, shift)
    if not 0 <= i_start <= i_end:
        raise ValueError("need 0 <= i_start <= i_end")
    if i_end > 2 ** gen.m_max:
        raise ValueError(f"i_end={i_end} exceeds the 2^{gen.m_max} points of this generator")
    if i_end == i_start:
        return np.zeros((0, gen.d), dtype=np.uint64)
    v = radical_inverse(np.arange(i_start, i_end), bits=LATTICE_BITS)
    mask = np.uint64((1 << LATTICE_BITS) - 1)
    # uint64 products wrap mod 2^64, which 2^52 divides, so the mask gives mod 1
    z = (v[:, None] * gen.g[None, :]) & mask
    return (z + shift.delta[None, :]) & mask


def digital_net_ints(gen, shift=None, i_start=0, i_end=1):
    """Digital-net points scaled by 2^t as uint64, rows ``i_start..i_end-1``."""
    shift = _check_shift(gen, shift)
    if not 0 <= i_start <= i_end:
        raise ValueError("need 0 <= i_start <= i_end")
    if i_end > 2 ** gen.p_max:
        raise ValueError(f"i_end={i_end} exceeds the 2^{gen.p_max} points of this generator")
    z = core.digital_net_ints(gen.columns, np.uint64(i_start), np.uint64(i_end))
    if np.any(shift.delta):
        z ^= shift.delta[None, :]
    return z


def ints_to_floats(z, t):
    return np.ldexp(z.astype(np.float64), -t)


def lattice_points(gen, shift=None, i_start=0, i_end=1):
    """Shifted lattice points ``(v(i) g + delta) mod 1`` in radical-inverse order."""
    return ints_to_floats(lattice_ints(gen, shift, i_start, i_end), LATTICE_BITS)


def digital_net_points(gen, shift=None, i_start=0, i_end=1):
    """Digitally shifted net points in radical-inverse order."""
    return ints_to_floats(digital_net_ints(gen, shift, i_start, i_end), gen.t)


def points_ints(gen, shift=None, i_start=0, i_end=1):
    if isinstance(gen, LatticeGen):
        return lattice_ints(gen, shift, i_start, i_end)
    return digital_net_ints(gen, shift, i_start, i_end)


def points(gen, shift=None, i_start=0, i_end=1):
    return ints_to_floats(points_ints(gen, shift, i_start, i_end), gen.t)


def lms_matrices(d, t_in, t_out, rng):
    """Random lower-triangular unit-diagonal GF(2) matrices, one per dimension.

    Row k of dimension j is returned as a t_in-bit integer (most significant bit
    = input digit 0). Shape (d, t_out).
    """
    if t_out < t_in:
        raise ValueError("t_out must be at least t_in")
    rows = np.zeros((d, t_out), dtype=np.uint64)
    for k in range(t_out):
        nfree = min(k, t_in)
        if nfree:
            free = rng.integers(0, 2, size=(d, nfree), dtype=np.uint64)
            w = np.uint64(1) << np.arange(t_in - 1, t_in - 1 - nfree, -1, dtype=np.uint64)
            rows[:, k] = (free * w).sum(axis=1, dtype=np.uint64)
        if k < t_in:
            rows[:, k] |= _U1 << np.uint64(t_in - 1 - k)
    return rows


def apply_lms(gen, rows):
    """Left-multiply every generating matrix by the GF(2) matrices in ``rows``."""
    d, t_out = rows.shape
    if d != gen.d:
        raise ValueError("scramble matrices do not match the generator dimension")
    par = np.bitwise_count(rows[:, :, None] & gen.columns[:, None, :]) & 1
    w = _U1 << np.arange(t_out - 1, -1, -1, dtype=np.uint64)
    cols = (par.astype(np.uint64) * w[None, :, None]).sum(axis=1, dtype=np.uint64)
    return DigitalNetGen(cols, t_out)


def lms_scramble(gen, rng, t_out=LATTICE_BITS):
    """Linear matrix scramble with output precision ``t_out`` (default 52)."""
    return apply_lms(gen, lms_matrices(gen.d, gen.t, t_out, rng))


def _data_lines(text):
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            yield line


def parse_ld_data(path, d=None):
    """Read a lattice or digital-net generator file.

    Grammar (``#`` starts a comment, blank lines are ignored)::

        lattice <d> <m_max>          followed by d lines, one positive integer each
        net <d> <m_max> <t>          followed by d lines of m_max integers < 2^t

    ``d`` truncates to the leading dimensions and must not exceed the file's.
    """
    text = Path(path).read_text() if not hasattr(path, "read_text") else path.read_text()
    lines = list(_data_lines(text))
    if not lines:
        raise LdDataError(f"{path}: empty generator file")
    head = lines[0].split()
    try:
        if head[0] == "lattice" and len(head) == 3:
            dim, m_max = int(head[1]), int(head[2])
            body = lines[1:]
            if len(body) != dim:
                raise LdDataError(f"{path}: header promises {dim} entries, found {len(body)}")
            g = np.array([int(s) for s in body], dtype=np.uint64)
            gen = LatticeGen(g, m_max)
        elif head[0] == "net" and len(head) == 4:
            dim, m_max, t = int(head[1]), int(head[2]), int(head[3])
            body = lines[1:]
            if len(body) != dim:
                raise LdDataError(f"{path}: header promises {dim} rows, found {len(body)}")
            rows = [[int(s) for s in ln.split()] for ln in body]
            if any(len(r) != m_max for r in rows):
                raise LdDataError(f"{path}: every row must hold {m_max} column integers")
            gen = DigitalNetGen(np.array(rows, dtype=np.uint64), t)
        else:
            raise LdDataError(f"{path}: unrecognised header {lines[0]!r}")
    except (ValueError, OverflowError) as exc:
        if isinstance(exc, LdDataError):
            raise
        raise LdDataError(f"{path}: {exc}") from exc
    return gen if d is None else gen.head(d)


_DEFAULT_LATTICE = "lattice_kuo_1024.txt"
_DEFAULT_NET = "net_joe_kuo_1024.txt"
_cache = {}


def _embedded(name):
    if name not in _cache:
        _cache[name] = parse_ld_data(resources.files("mlqmc") / "data" / name)
    return _cache[name]


def default_lattice(d=None):
    gen = _embedded(_DEFAULT_LATTICE)
    return gen if d is None else gen.head(d)


def default_net(d=None):
    gen = _embedded(_DEFAULT_NET)
    return gen if d is None else gen.head(d)


def default_generator(kind, d=None):
    if kind == "lattice":
        return default_lattice(d)
    if kind == "net":
        return default_net(d)
    raise ValueError(f"unknown sequence kind {kind!r}")
