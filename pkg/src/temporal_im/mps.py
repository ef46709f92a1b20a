"""Matrix-product states and operators over the folded temporal chain.

Site tensors are (left bond, physical 4, right bond); boundary bonds have
extent 1.  Norms are tracked in log space (``norm_log``) instead of being
folded into the amplitudes, so the represented vector is

    exp(norm_log) * contraction(tensors).

That keeps long chains (T of a few hundred) inside double range and makes
the eigenvalue drift of the power iteration observable.
"""
from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field
from typing import BinaryIO, List, Optional, Union

import numpy as np

from .tensor import svd_truncate

_MPS_MAGIC = b"TIM1"
_MPS_VERSION = 1


@dataclass
class TemporalMps:
    tensors: List[np.ndarray]
    norm_log: float = 0.0
    canonical_center: Optional[int] = None

    @property
    def T(self) -> int:
        return len(self.tensors)

    def bond_dims(self) -> List[int]:
        """Interior bond extents, bonds 1..T-1."""
        return [t.shape[0] for t in self.tensors[1:]]

    def max_bond(self) -> int:
        dims = self.bond_dims()
        return max(dims) if dims else 1

    def copy(self) -> "TemporalMps":
        return TemporalMps([t.copy() for t in self.tensors], self.norm_log,
                           self.canonical_center)

    def dense(self) -> np.ndarray:
        """Full 4^T amplitude vector.  Small T only."""
        v = self.tensors[0]
        for t in self.tensors[1:]:
            v = np.tensordot(v, t, axes=(v.ndim - 1, 0))
        v = v.reshape(-1)
        return v * np.exp(self.norm_log)


@dataclass
class TemporalMpo:
    tensors: List[np.ndarray]  # (left bond, phys out 4, phys in 4, right bond)

    @property
    def T(self) -> int:
        return len(self.tensors)

    def dense(self) -> np.ndarray:
        """Full 4^T x 4^T matrix.  Small T only."""
        m = self.tensors[0]
        for t in self.tensors[1:]:
            # out axes first, in axes second, keep right bond last
            m = np.tensordot(m, t, axes=(m.ndim - 1, 0))
        # m has axes (1, o_0, i_0, o_1, i_1, ..., 1)
        m = m.reshape(m.shape[1:-1])
        T = len(self.tensors)
        perm = list(range(0, 2 * T, 2)) + list(range(1, 2 * T, 2))
        return m.transpose(perm).reshape(4 ** T, 4 ** T)


def product_mps(site_vectors: List[np.ndarray], norm_log: float = 0.0) -> TemporalMps:
    tensors = [np.asarray(v, dtype=complex).reshape(1, 4, 1) for v in site_vectors]
    return TemporalMps(tensors, norm_log=norm_log, canonical_center=None)


def mps_from_dense(v: np.ndarray, T: int, chi_max: int = 10 ** 9,
                   cutoff: float = 0.0) -> TemporalMps:
    """Exact (or truncated) MPS factorization of a dense 4^T vector."""
    v = np.asarray(v, dtype=complex)
    if v.size != 4 ** T:
        raise ValueError(f"vector of size {v.size} is not 4^{T}")
    tensors = []
    norm_log = 0.0
    rest = v.reshape(1, -1)
    for i in range(T - 1):
        chi_l = rest.shape[0]
        theta = rest.reshape(chi_l * 4, -1)
        u, s, vh, _ = svd_truncate(theta, chi_max, cutoff)
        tensors.append(u.reshape(chi_l, 4, -1))
        sn = float(np.linalg.norm(s))
        if sn > 0:
            norm_log += np.log(sn)
            s = s / sn
        rest = (s[:, None] * vh)
    tensors.append(rest.reshape(-1, 4, 1))
    return TemporalMps(tensors, norm_log=norm_log, canonical_center=T - 1)


def identity_mpo(T: int) -> TemporalMpo:
    eye = np.eye(4, dtype=complex).reshape(1, 4, 4, 1)
    return TemporalMpo([eye.copy() for _ in range(T)])


def canonicalize(psi: TemporalMps, center: int) -> TemporalMps:
    """Return a copy in mixed-canonical form about ``center``.

    Left of the center all tensors are left isometries, right of it right
    isometries; the center carries the state norm, which is factored out
    into norm_log so tensors stay O(1).
    """
    T = psi.T
    if not 0 <= center < T:
        raise ValueError(f"center {center} outside chain of length {T}")
    tensors = [t.copy() for t in psi.tensors]
    norm_log = psi.norm_log
    for i in range(center):
        chi_l, _, chi_r = tensors[i].shape
        q, r = np.linalg.qr(tensors[i].reshape(chi_l * 4, chi_r))
        tensors[i] = q.reshape(chi_l, 4, -1)
        tensors[i + 1] = np.tensordot(r, tensors[i + 1], axes=(1, 0))
    for i in range(T - 1, center, -1):
        chi_l, _, chi_r = tensors[i].shape
        q, r = np.linalg.qr(tensors[i].reshape(chi_l, 4 * chi_r).conj().T)
        tensors[i] = q.conj().T.reshape(-1, 4, chi_r)
        tensors[i - 1] = np.tensordot(tensors[i - 1], r.conj().T, axes=(2, 0))
    nrm = float(np.linalg.norm(tensors[center]))
    if nrm > 0.0:
        tensors[center] = tensors[center] / nrm
        norm_log += np.log(nrm)
    return TemporalMps(tensors, norm_log=norm_log, canonical_center=center)


def overlap(a: TemporalMps, b: TemporalMps) -> complex:
    """<a|b> with conjugation on ``a``, including both norm_log factors."""
    if a.T != b.T:
        raise ValueError(f"length mismatch: {a.T} vs {b.T}")
    env = np.ones((1, 1), dtype=complex)
    for ta, tb in zip(a.tensors, b.tensors):
        env = np.tensordot(env, tb, axes=(1, 0))          # (ca, p, cb')
        env = np.tensordot(ta.conj(), env, axes=([0, 1], [0, 1]))  # (ca', cb')
    return complex(env[0, 0]) * np.exp(a.norm_log + b.norm_log)


def mps_norm(psi: TemporalMps) -> float:
    return float(np.sqrt(abs(overlap(psi, psi))))


@dataclass
class BondSpectrum:
    bond: int
    schmidt_values: np.ndarray  # normalized, squares sum to 1
    entropy: float              # von Neumann, natural log

    @staticmethod
    def from_singular_values(bond: int, s: np.ndarray) -> "BondSpectrum":
        s = np.asarray(s, dtype=float)
        nrm = np.linalg.norm(s)
        lam = s / nrm if nrm > 0 else s
        w = lam ** 2
        w = w[w > 1e-300]
        ent = float(-np.sum(w * np.log(w)))
        return BondSpectrum(bond, lam, ent)


def bond_entropy(psi: TemporalMps, bond: int) -> BondSpectrum:
    """Schmidt spectrum across ``bond`` (cut between sites bond-1 and bond).

    Valid bonds are 1..T-1; the half cut is bond = T//2.  The state is
    normalized before the spectrum is taken.
    """
    T = psi.T
    if not 1 <= bond <= T - 1:
        raise ValueError(f"bond {bond} outside 1..{T - 1}")
    c = canonicalize(psi, bond)
    chi_l, _, chi_r = c.tensors[bond].shape
    s = np.linalg.svd(c.tensors[bond].reshape(chi_l, 4 * chi_r), compute_uv=False)
    return BondSpectrum.from_singular_values(bond, s)


def entropy_profile(psi: TemporalMps) -> List[float]:
    """Entropies at every interior bond, computed in one canonical sweep."""
    T = psi.T
    if T == 1:
        return []
    c = canonicalize(psi, 0)
    out = []
    tensors = c.tensors
    carry = tensors[0]
    for i in range(T - 1):
        chi_l, _, chi_r = carry.shape
        u, s, vh = np.linalg.svd(carry.reshape(chi_l * 4, chi_r), full_matrices=False)
        out.append(BondSpectrum.from_singular_values(i + 1, s).entropy)
        sn = np.linalg.norm(s)
        nxt = np.tensordot((s / sn)[:, None] * vh, tensors[i + 1], axes=(1, 0))
        carry = nxt
    return out


@dataclass
class ZipupResult:
    psi: TemporalMps
    discarded_weight: float  # summed relative dropped fraction over all SVD events


def _truncate_event(theta: np.ndarray, chi_max: int, cutoff: float):
    u, s, vh, w = svd_truncate(theta, chi_max, cutoff)
    total = float(np.sum(s ** 2)) + w
    frac = w / total if total > 0 else 0.0
    return u, s, vh, frac


def apply_mpo_zipup(op: TemporalMpo, psi: TemporalMps, chi_max: int,
                    cutoff: float = 0.0) -> ZipupResult:
    """Compressed application op|psi> by the zip-up method.

    Left-to-right sweep with truncation while the MPO is being absorbed
    (peak intermediate bond stays <= chi * mpo bond), then one right-to-left
    compression sweep.  Total discarded weight is the accumulated relative
    dropped fraction over all truncation events.
    """
    if op.T != psi.T:
        raise ValueError(f"length mismatch: mpo {op.T} vs mps {psi.T}")
    T = psi.T
    norm_log = psi.norm_log
    discarded = 0.0
    out: List[np.ndarray] = []
    # zipper carries (new bond, mpo bond, mps bond)
    zipper = np.ones((1, 1, 1), dtype=complex)
    for i in range(T):
        A = psi.tensors[i]
        W = op.tensors[i]
        tmp = np.tensordot(zipper, A, axes=(2, 0))       # (c, wl, pin, ar)
        theta = np.tensordot(tmp, W, axes=([1, 2], [0, 2]))  # (c, ar, pout, wr)
        theta = theta.transpose(0, 2, 3, 1)              # (c, pout, wr, ar)
        c, _, wr, ar = theta.shape
        if i == T - 1:
            out.append(theta.reshape(c, 4, wr * ar))
            break
        u, s, vh, frac = _truncate_event(theta.reshape(c * 4, wr * ar), chi_max, cutoff)
        discarded += frac
        out.append(u.reshape(c, 4, -1))
        sn = float(np.linalg.norm(s))
        if sn > 0:
            norm_log += np.log(sn)
            s = s / sn
        zipper = (s[:, None] * vh).reshape(-1, wr, ar)
    # right-to-left compression sweep
    for i in range(T - 1, 0, -1):
        chi_l, _, chi_r = out[i].shape
        u, s, vh, frac = _truncate_event(out[i].reshape(chi_l, 4 * chi_r), chi_max, cutoff)
        discarded += frac
        out[i] = vh.reshape(-1, 4, chi_r)
        sn = float(np.linalg.norm(s))
        if sn > 0:
            norm_log += np.log(sn)
            s = s / sn
        out[i - 1] = np.tensordot(out[i - 1], u * s[None, :], axes=(2, 0))
    return ZipupResult(TemporalMps(out, norm_log=norm_log, canonical_center=0),
                       discarded)


# ---------------------------------------------------------------------------
# binary serialization: magic, version, T, canonical_center (i32, -1 = none),
# norm_log (f64), shape table (3 x u32 per site), then complex128 LE data.

def save_mps(psi: TemporalMps, dest: Union[str, BinaryIO]) -> None:
    if isinstance(dest, str):
        with open(dest, "wb") as f:
            save_mps(psi, f)
        return
    f = dest
    f.write(_MPS_MAGIC)
    cc = -1 if psi.canonical_center is None else psi.canonical_center
    f.write(struct.pack("<IIi d", _MPS_VERSION, psi.T, cc, float(psi.norm_log)))
    for t in psi.tensors:
        f.write(struct.pack("<III", *t.shape))
    for t in psi.tensors:
        f.write(np.ascontiguousarray(t, dtype="<c16").tobytes())


def load_mps(src: Union[str, BinaryIO]) -> TemporalMps:
    if isinstance(src, str):
        with open(src, "rb") as f:
            return load_mps(f)
    f = src
    magic = f.read(4)
    if magic != _MPS_MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    ver, T, cc, norm_log = struct.unpack("<IIi d", f.read(struct.calcsize("<IIi d")))
    if ver != _MPS_VERSION:
        raise ValueError(f"unsupported version {ver}")
    shapes = [struct.unpack("<III", f.read(12)) for _ in range(T)]
    tensors = []
    for shp in shapes:
        n = shp[0] * shp[1] * shp[2]
        buf = f.read(16 * n)
        tensors.append(np.frombuffer(buf, dtype="<c16").reshape(shp).copy())
    return TemporalMps(tensors, norm_log=norm_log,
                       canonical_center=None if cc < 0 else cc)


def mps_to_bytes(psi: TemporalMps) -> bytes:
    buf = io.BytesIO()
    save_mps(psi, buf)
    return buf.getvalue()
