"""Self-consistent influence matrices over the time direction.

The IM of a semi-infinite homogeneous chain is the eigenvector (eigenvalue
1) of the dual transfer matrix that adds one more spin to the environment.
Because the circuit has a strict light cone, power iteration from any
product boundary state lands on that eigenvector after at most T
applications; no eigensolver is involved.

Conventions.  An IM is a vector over the folded z-trajectory of the site it
faces and includes the interaction phases on the bond linking that site to
the environment.  One slice therefore absorbs one environment spin together
with its subsystem-facing bond; an impurity bond scaling enters through
exactly one extra slice.  With a single diagonal layer per period the left
and right slices contain the same tensors, so ``side`` is bookkeeping.
"""
from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field, replace
from typing import BinaryIO, Dict, List, Optional, Tuple, Union

import numpy as np

from .models import Impurity, ModelSpec, floquet_kernel, folded_kick_links
from .mps import (TemporalMps, TemporalMpo, apply_mpo_zipup, canonicalize,
                  entropy_profile, load_mps, mps_norm, overlap, product_mps,
                  save_mps)
from .tensor import FOLDED_BWD, FOLDED_FWD, FOLDED_SIGMA, FOLDED_SIGMA_BAR

BOUNDARY_KINDS = ("open", "perfect_dephaser")

_CKPT_MAGIC = b"TIMC"
_CKPT_VERSION = 1

_TRACE_MASK = (FOLDED_FWD == FOLDED_BWD).astype(complex)  # [1,0,0,1]


class NumericalInstabilityError(RuntimeError):
    """Norm of the power iteration ran away after the light-cone horizon."""


def boundary_mps(kind: str, T: int) -> TemporalMps:
    """Product boundary state: all-ones, or the perfect dephaser delta."""
    if kind == "open":
        site = np.ones(4)
    elif kind == "perfect_dephaser":
        site = np.array([1.0, 0.0, 0.0, 1.0])
    else:
        raise ValueError(f"unknown boundary kind {kind!r}")
    return product_mps([site] * T)


def bond_phase_matrix(bond_coupling: float) -> np.ndarray:
    """P[x, y] = exp(-i Jb (sigma_x sigma_y - sigmabar_x sigmabar_y))."""
    return np.exp(-1j * bond_coupling
                  * (np.outer(FOLDED_SIGMA, FOLDED_SIGMA)
                     - np.outer(FOLDED_SIGMA_BAR, FOLDED_SIGMA_BAR)))


def build_transfer_slice(spec: ModelSpec, bond_coupling: Optional[float] = None,
                         side: str = "left") -> TemporalMpo:
    """One dual-transfer-matrix slice as an MPO of bond dimension 4.

    Maps an IM over the absorbed spin's trajectory y = (s, sbar) to an IM
    over the neighbouring trajectory x = (sigma, sigmabar).  The virtual
    bond carries the absorbed spin's folded index of the previous step, so
    the kick links K[s', s] conj(K)[sbar', sbar] sit on the bonds; the
    column chain starts with the (head-transformed) initial matrix and ends
    with the trace constraint.  Both sides use identical tensors here: a
    single diagonal layer per period makes the slice reflection symmetric.
    """
    if side not in ("left", "right"):
        raise ValueError(f"unknown side {side!r}")
    T = spec.T
    kern = floquet_kernel(spec)
    Jb = spec.J_eff if bond_coupling is None else bond_coupling
    P = bond_phase_matrix(Jb)
    v0 = kern.rho0_effective().reshape(4) * kern.field_phases
    link = folded_kick_links(kern.kick) * kern.field_phases[:, None]  # [y', y]
    if T == 1:
        W = (P * (v0 * _TRACE_MASK)[None, :])[None, :, :, None]
        return TemporalMpo([W.astype(complex)])
    rng4 = np.arange(4)
    head = np.zeros((1, 4, 4, 4), dtype=complex)
    head[0, :, rng4, rng4] = (P * v0[None, :]).T  # advanced indexing puts y first
    mid = np.zeros((4, 4, 4, 4), dtype=complex)
    for b in range(4):
        mid[b, :, rng4, rng4] = (P * link[None, :, b]).T
    tail = np.einsum("xy,yb->bxy", P * _TRACE_MASK[None, :], link)[..., None]
    tensors = [head] + [mid.copy() for _ in range(T - 2)] + [tail]
    return TemporalMpo(tensors)


# ------------------------------------------------------------- disorder slice

def _constraint_windows(T: int) -> List[np.ndarray]:
    """Reachable running charges at each virtual bond of the constraint MPO.

    The per-step increment sigma_x sigma_y - sigmabar_x sigmabar_y is in
    {-2, 0, +2} and the total must return to zero, so bond t holds the even
    values |B| <= 2 min(t, T-t).
    """
    out = []
    for t in range(T + 1):
        m = 2 * min(t, T - t)
        out.append(np.arange(-m, m + 1, 2))
    return out


def build_disorder_slice(spec: ModelSpec) -> "DisorderSliceMpo":
    """Exactly coupling-averaged slice, factored into two MPOs.

    Averaging the bond phases over J uniform on [0, 2pi) projects onto zero
    total charge sum_t (sigma_t s_t - sigmabar_t sbar_t).  The slice then
    splits into the J-independent column-weight chain (diagonal in the
    output trajectory) followed by the charge-constraint MPO, applied in
    that order.
    """
    if spec.disorder != "uniform_J_0_2pi":
        raise ValueError("spec has no uniform coupling disorder")
    T = spec.T
    kern = floquet_kernel(spec)
    v0 = kern.rho0_effective().reshape(4) * kern.field_phases
    link = folded_kick_links(kern.kick) * kern.field_phases[:, None]
    rng4 = np.arange(4)

    weight: List[np.ndarray] = []
    if T == 1:
        W = np.zeros((1, 4, 4, 1), dtype=complex)
        W[0, rng4, rng4, 0] = v0 * _TRACE_MASK
        weight.append(W)
    else:
        W = np.zeros((1, 4, 4, 4), dtype=complex)
        W[0, rng4, rng4, rng4] = v0
        weight.append(W)
        for t in range(1, T - 1):
            W = np.zeros((4, 4, 4, 4), dtype=complex)
            for b in range(4):
                W[b, rng4, rng4, rng4] = link[:, b]
            weight.append(W)
        W = np.zeros((4, 4, 4, 1), dtype=complex)
        for b in range(4):
            W[b, rng4, rng4, 0] = link[:, b] * _TRACE_MASK
        weight.append(W)

    inc = (np.outer(FOLDED_SIGMA, FOLDED_SIGMA)
           - np.outer(FOLDED_SIGMA_BAR, FOLDED_SIGMA_BAR)).astype(int)
    windows = _constraint_windows(T)
    constraint: List[np.ndarray] = []
    for t in range(T):
        wl, wr = windows[t], windows[t + 1]
        C = np.zeros((len(wl), 4, 4, len(wr)), dtype=complex)
        for i, b in enumerate(wl):
            target = b + inc  # (4, 4)
            for j, b2 in enumerate(wr):
                C[i, :, :, j] = (target == b2)
        constraint.append(C)
    return DisorderSliceMpo(TemporalMpo(weight), TemporalMpo(constraint))


@dataclass
class DisorderSliceMpo:
    """Coupling-averaged dual slice: weight chain then charge constraint."""
    weights: TemporalMpo
    constraint: TemporalMpo

    @property
    def T(self) -> int:
        return self.weights.T

    def max_constraint_bond(self) -> int:
        return max(t.shape[0] for t in self.constraint.tensors)

    def apply(self, psi: TemporalMps, chi_max: int,
              cutoff: float = 0.0) -> Tuple[TemporalMps, float]:
        r1 = apply_mpo_zipup(self.weights, psi, chi_max, cutoff)
        r2 = apply_mpo_zipup(self.constraint, r1.psi, chi_max, cutoff)
        return r2.psi, r1.discarded_weight + r2.discarded_weight

    def dense(self) -> np.ndarray:
        return self.constraint.dense() @ self.weights.dense()


# ------------------------------------------------------------------ the solve

@dataclass
class InfluenceMatrix:
    psi: TemporalMps
    spec: ModelSpec
    boundary: str
    chi_max: int
    cutoff: float
    iterations_applied: int
    converged: bool
    eigenvalue_drift: float          # |log| norm change of the last iteration
    side: str = "left"
    diagnostics: Dict[str, list] = field(default_factory=dict)

    @property
    def T(self) -> int:
        return self.psi.T

    def mirrored(self) -> "InfluenceMatrix":
        """The same IM relabelled as the other side of the subsystem."""
        other = "right" if self.side == "left" else "left"
        return replace(self, psi=self.psi.copy(), side=other)


def _log_norm(psi: TemporalMps) -> float:
    """log ||psi||, overflow-safe (canonical center carries the norm)."""
    return canonicalize(psi, 0).norm_log


def _overlap_deficit(a: TemporalMps, b: TemporalMps) -> float:
    """1 - |<a|b>| / (||a|| ||b||), independent of norm_log factors."""
    a0 = TemporalMps(a.tensors, 0.0, a.canonical_center)
    b0 = TemporalMps(b.tensors, 0.0, b.canonical_center)
    ov = abs(overlap(a0, b0))
    na, nb = mps_norm(a0), mps_norm(b0)
    if na == 0.0 or nb == 0.0:
        return 1.0
    return 1.0 - ov / (na * nb)


def _record_entropies(diag: Dict[str, list], psi: TemporalMps) -> None:
    prof = entropy_profile(psi) if psi.T > 1 else []
    diag["entropy_profile"].append(prof)
    diag["entropy_max"].append(max(prof) if prof else 0.0)
    half = prof[psi.T // 2 - 1] if len(prof) >= max(psi.T // 2, 1) and psi.T > 1 else 0.0
    diag["entropy_halfcut"].append(half)
    diag["max_bond"].append(psi.max_bond())


def _normalize_trace(im: InfluenceMatrix) -> None:
    """Rescale so the trivial-kernel contraction is exactly 1.

    The exact fixed point already satisfies this; finite chi drifts it.  The
    pre-rescale residual |c - 1| is kept as a diagnostic so the drift stays
    observable.
    """
    from .observables import temporal_contract

    kern = floquet_kernel(im.spec)
    c = temporal_contract(im, im, kern)
    if not np.isfinite(c) or abs(c) < 1e-12:
        raise NumericalInstabilityError(f"degenerate IM trace {c!r}")
    im.diagnostics.setdefault("trace_residual", []).append(abs(c - 1.0))
    im.psi.norm_log -= 0.5 * float(np.log(abs(c)))
    phase = c / abs(c)
    im.psi.tensors[0] = im.psi.tensors[0] * phase ** -0.5


def solve_im(spec: ModelSpec, boundary: str = "open", chi_max: int = 128,
             cutoff: float = 0.0, max_iters: Optional[int] = None,
             tol: float = 1e-10, preserve_weak_bonds: bool = False,
             drift_limit: float = 1.0, side: str = "left") -> InfluenceMatrix:
    """Power-iterate the dual slice from a product boundary to the IM.

    Per-iteration diagnostics (overlap deficit, norm drift, bond entropy
    profile with its max and half-cut values, max bond, discarded weight)
    are collected on the returned object.  The light cone guarantees
    convergence after at most T iterations; drift above ``drift_limit``
    past that horizon means truncation has destabilized the iteration and
    raises.  ``preserve_weak_bonds`` disables the relative cutoff so
    exactly chi_max values are kept per bond (small Schmidt values matter
    near the continuous-time limit).
    """
    T = spec.T
    if preserve_weak_bonds:
        cutoff = 0.0
    if max_iters is None:
        max_iters = T + 2
    if spec.disorder is None:
        op = build_transfer_slice(spec, side=side)

        def step(p):
            r = apply_mpo_zipup(op, p, chi_max, cutoff)
            return r.psi, r.discarded_weight
    else:
        dis = build_disorder_slice(spec)
        step = lambda p: dis.apply(p, chi_max, cutoff)

    psi = boundary_mps(boundary, T)
    diag: Dict[str, list] = {k: [] for k in
                             ("deficit", "drift", "entropy_profile", "entropy_max",
                              "entropy_halfcut", "max_bond", "discarded_weight")}
    prev_log = _log_norm(psi)
    drift = float("inf")
    converged = False
    iters = 0
    for it in range(1, max_iters + 1):
        new, dw = step(psi)
        log_norm = _log_norm(new)
        drift = abs(log_norm - prev_log)
        deficit = _overlap_deficit(new, psi)
        diag["deficit"].append(deficit)
        diag["drift"].append(drift)
        diag["discarded_weight"].append(dw)
        _record_entropies(diag, new)
        psi, prev_log, iters = new, log_norm, it
        if it >= T and drift > drift_limit:
            raise NumericalInstabilityError(
                f"norm drift {drift:.3g} at iteration {it} (limit {drift_limit})")
        if deficit < tol:
            converged = True
            break
    im = InfluenceMatrix(psi=psi, spec=spec, boundary=boundary, chi_max=chi_max,
                         cutoff=cutoff, iterations_applied=iters,
                         converged=converged, eigenvalue_drift=drift, side=side,
                         diagnostics=diag)
    _normalize_trace(im)
    return im


def impurity_im(spec: ModelSpec, base: InfluenceMatrix, chi_max: int,
                cutoff: float = 0.0) -> InfluenceMatrix:
    """IM seen by an impurity site: one extra slice with a scaled bond.

    The extra slice is homogeneous except for its subsystem-facing bond
    coupling beta * J_eff, so the result depends on beta only.  beta = 0
    decouples the environment (flat IM), beta = 1 reproduces the
    homogeneous IM at the exact fixed point.
    """
    if spec.impurity is None:
        raise ValueError("spec has no impurity")
    op = build_transfer_slice(spec, bond_coupling=spec.impurity.beta * spec.J_eff,
                              side=base.side)
    before = _log_norm(base.psi)
    r = apply_mpo_zipup(op, base.psi, chi_max, cutoff)
    diag: Dict[str, list] = {
        "impurity_drift": [abs(_log_norm(r.psi) - before)],
        "discarded_weight": [r.discarded_weight],
    }
    im = InfluenceMatrix(psi=r.psi, spec=spec, boundary=base.boundary,
                         chi_max=chi_max, cutoff=cutoff,
                         iterations_applied=base.iterations_applied + 1,
                         converged=base.converged,
                         eigenvalue_drift=base.eigenvalue_drift,
                         side=base.side, diagnostics=diag)
    _normalize_trace(im)
    return im


# ------------------------------------------------------------------ on disk

def _spec_header(spec: ModelSpec) -> dict:
    imp = None if spec.impurity is None else {"beta": spec.impurity.beta}
    return {"J": spec.J, "T": spec.T, "disorder": spec.disorder, "eps": spec.eps,
            "g": spec.g, "h": spec.h, "impurity": imp,
            "initial_state": spec.initial_state, "q": spec.q,
            "trotter_order": spec.trotter_order}


def _spec_from_header(d: dict) -> ModelSpec:
    imp = d.get("impurity")
    return ModelSpec(J=d["J"], g=d["g"], h=d["h"], T=d["T"], eps=d["eps"],
                     initial_state=d["initial_state"], disorder=d["disorder"],
                     trotter_order=d["trotter_order"],
                     impurity=None if imp is None else Impurity(beta=imp["beta"]))


def save_checkpoint(im: InfluenceMatrix, dest: Union[str, BinaryIO]) -> None:
    """Checkpoint an IM: JSON header + the MPS container.

    The header omits the impurity's alpha on purpose: the IM does not
    depend on it, and the checkpoint bytes must not either.
    """
    if isinstance(dest, str):
        with open(dest, "wb") as f:
            save_checkpoint(im, f)
        return
    header = {"boundary": im.boundary, "chi_max": im.chi_max,
              "converged": im.converged, "cutoff": im.cutoff,
              "eigenvalue_drift": im.eigenvalue_drift,
              "iterations": im.iterations_applied, "side": im.side,
              "spec": _spec_header(im.spec), "version": _CKPT_VERSION}
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    dest.write(_CKPT_MAGIC)
    dest.write(struct.pack("<I", len(blob)))
    dest.write(blob)
    save_mps(im.psi, dest)


def load_checkpoint(src: Union[str, BinaryIO]) -> InfluenceMatrix:
    if isinstance(src, str):
        with open(src, "rb") as f:
            return load_checkpoint(f)
    magic = src.read(4)
    if magic != _CKPT_MAGIC:
        raise ValueError(f"bad checkpoint magic {magic!r}")
    (n,) = struct.unpack("<I", src.read(4))
    header = json.loads(src.read(n).decode())
    if header["version"] != _CKPT_VERSION:
        raise ValueError(f"unsupported checkpoint version {header['version']}")
    psi = load_mps(src)
    return InfluenceMatrix(psi=psi, spec=_spec_from_header(header["spec"]),
                           boundary=header["boundary"], chi_max=header["chi_max"],
                           cutoff=header["cutoff"],
                           iterations_applied=header["iterations"],
                           converged=header["converged"],
                           eigenvalue_drift=header["eigenvalue_drift"],
                           side=header["side"])


def checkpoint_bytes(im: InfluenceMatrix) -> bytes:
    buf = io.BytesIO()
    save_checkpoint(im, buf)
    return buf.getvalue()
