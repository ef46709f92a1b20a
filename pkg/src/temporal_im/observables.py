"""Local observables from influence-matrix contractions.

The probed site's folded trajectory is summed against the two neighbouring
IMs and the site's own per-period factors.  Operator insertions are
specified by an InsertionPlan: time 0 acts right after the initial state,
time 0 < tau < T between periods (for the symmetric splitting: between the
two half kicks), time T right before the trace.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from .influence import InfluenceMatrix, impurity_im, solve_im
from .models import (ID2, PAULI, LocalKernel, ModelSpec, floquet_kernel,
                     initial_density, trotterize)
from .mps import TemporalMps
from .tensor import FOLDED_BWD, FOLDED_FWD

OpLike = Union[str, np.ndarray]


@dataclass(frozen=True)
class Insertion:
    time: int
    branch: str  # forward | backward | both
    op: OpLike


@dataclass
class InsertionPlan:
    """Operator insertions on the probed site, plus an optional override of
    its initial one-site state.  Multiple entries at the same (time, branch)
    compose in list order."""
    entries: List[Insertion] = field(default_factory=list)
    initial_state: Optional[OpLike] = None

    def validate(self, T: int) -> None:
        for e in self.entries:
            if not 0 <= e.time <= T:
                raise ValueError(f"insertion time {e.time} outside 0..{T}")
            if e.branch not in ("forward", "backward", "both"):
                raise ValueError(f"unknown branch {e.branch!r}")
            m = _op_matrix(e.op)
            nrm = np.linalg.norm(m, 2)
            if abs(nrm - 1.0) > 1e-8:
                raise ValueError(f"operator norm {nrm:.3g} is not 1")


def czz_plan(T: int) -> InsertionPlan:
    """sigma^z at time 0 and time T, forward branch: the autocorrelator."""
    return InsertionPlan([Insertion(0, "forward", "z"),
                          Insertion(T, "forward", "z")])


@dataclass
class ResultSeries:
    name: str
    abscissa: np.ndarray
    values: np.ndarray
    extras: Dict[str, object] = field(default_factory=dict)


def _op_matrix(op: OpLike) -> np.ndarray:
    if isinstance(op, str):
        if op not in PAULI:
            raise ValueError(f"unknown operator name {op!r}")
        return PAULI[op]
    m = np.asarray(op, dtype=complex)
    if m.shape != (2, 2):
        raise ValueError("operator must be 2x2")
    return m


def _resolve_initial(state: OpLike) -> np.ndarray:
    if isinstance(state, str):
        return initial_density(state)
    m = np.asarray(state, dtype=complex)
    if m.shape != (2, 2):
        raise ValueError("initial state must be a 2x2 density matrix")
    return m


def _insertion_superop(e: Insertion) -> np.ndarray:
    """Folded 4x4 action of one insertion on the site's (fwd, bwd) pair."""
    O = _op_matrix(e.op)
    if e.branch == "forward":
        return np.einsum("ac,bd->abcd", O, ID2).reshape(4, 4)
    if e.branch == "backward":
        return np.einsum("ac,bd->abcd", ID2, O.conj()).reshape(4, 4)
    return np.einsum("ac,bd->abcd", O, O.conj()).reshape(4, 4)


def _final_matrix(entries: Sequence[Insertion], T: int) -> np.ndarray:
    M = ID2.copy()
    for e in entries:
        if e.time != T:
            continue
        O = _op_matrix(e.op)
        if e.branch == "forward":
            M = M @ O
        elif e.branch == "backward":
            M = O.conj().T @ M
        else:
            M = O.conj().T @ M @ O
    return M


def kernel_factors(kern: LocalKernel, T: int, plan: Optional[InsertionPlan] = None):
    """Per-site folded factors of the probed spin.

    Returns (w0, dh, links, F): the dressed initial vector (initial state
    with time-0 insertions and the head transform), the per-step field
    phases, the T-1 step superoperators with any stroboscopic insertions
    folded in, and the final cap (tail-transformed readout matrix on folded
    indices, trace built in).
    """
    entries = [] if plan is None else list(plan.entries)
    rho = kern.rho0
    if plan is not None and plan.initial_state is not None:
        rho = _resolve_initial(plan.initial_state)
    for e in entries:
        if e.time == 0:
            O = _op_matrix(e.op)
            if e.branch == "forward":
                rho = O @ rho
            elif e.branch == "backward":
                rho = rho @ O.conj().T
            else:
                rho = O @ rho @ O.conj().T
    rho = kern.head @ rho @ kern.head.conj().T
    w0 = rho.reshape(4)
    dh = kern.field_phases
    S = kern.step_superop()
    Sh = kern.half_superop()
    links = []
    for t in range(1, T):
        sup = None
        for e in entries:
            if e.time != t:
                continue
            step = _insertion_superop(e)
            sup = step if sup is None else step @ sup
        if sup is None:
            links.append(S)
        elif kern.split:
            links.append(Sh @ sup @ Sh)
        else:
            links.append(sup @ S)
    A = kern.tail.conj().T @ _final_matrix(entries, T) @ kern.tail
    F = A[FOLDED_BWD, FOLDED_FWD]
    return w0, dh, links, F


def _psi_of(im) -> TemporalMps:
    return im.psi if hasattr(im, "psi") else im


def _env_step(E: np.ndarray, link: np.ndarray, dh: np.ndarray,
              AL: np.ndarray, AR: np.ndarray) -> np.ndarray:
    """Advance the (left bond, right bond, open folded index) environment.

    Batched matmuls over the folded index keep this on BLAS.
    """
    tmp = np.tensordot(E, link.T * dh[None, :], axes=(2, 0))     # (a, b, p)
    t2 = tmp.transpose(2, 1, 0) @ AL.transpose(1, 0, 2)          # (p, b, l)
    return (t2.transpose(0, 2, 1) @ AR.transpose(1, 0, 2)).transpose(1, 2, 0)


def _scaled(val: complex, log_scale: float) -> complex:
    if log_scale < 700.0:
        return val * math.exp(log_scale)
    mag = abs(val)
    if mag == 0.0:
        return 0.0 + 0.0j
    return val / mag * math.exp(math.log(mag) + log_scale)


def temporal_contract(im_left, im_right, kernel: LocalKernel,
                      plan: Optional[InsertionPlan] = None) -> complex:
    """Value of the folded network: IM_left x local kernel x IM_right.

    The contraction is bilinear in the two IMs (no conjugation; both
    branches of the fold are explicit in the amplitudes).  With an empty
    plan and a unit-trace initial state the result is 1 up to truncation.
    """
    psi_l, psi_r = _psi_of(im_left), _psi_of(im_right)
    if psi_l.T != psi_r.T:
        raise ValueError(f"IM length mismatch: {psi_l.T} vs {psi_r.T}")
    T = psi_l.T
    if plan is not None:
        plan.validate(T)
    w0, dh, links, F = kernel_factors(kernel, T, plan)
    AL0 = psi_l.tensors[0][0]  # (4, a)
    AR0 = psi_r.tensors[0][0]
    E = np.einsum("pa,pb,p->abp", AL0, AR0, w0 * dh)
    for t in range(1, T):
        E = _env_step(E, links[t - 1], dh, psi_l.tensors[t], psi_r.tensors[t])
    val = complex(np.dot(E[0, 0], F))
    return _scaled(val, psi_l.norm_log + psi_r.norm_log)


def _contract_scan(im_left, im_right, kernel: LocalKernel,
                   base_plan: Optional[InsertionPlan],
                   op: OpLike, branch: str = "forward") -> np.ndarray:
    """Values of one scanned insertion at every time k = 1..T.

    Contracting a converged IM with an insertion at k followed by nothing
    but the trace equals the fresh length-k result, so a single solve
    serves the whole series.  Left and right environments of the
    insertion-free network are built once; each k then costs one step.
    base_plan may only hold time-0 entries.
    """
    psi_l, psi_r = _psi_of(im_left), _psi_of(im_right)
    T = psi_l.T
    if base_plan is not None:
        base_plan.validate(T)
        if any(e.time != 0 for e in base_plan.entries):
            raise ValueError("scan base plan must only touch time 0")
    w0, dh, links, F0 = kernel_factors(kernel, T, base_plan)
    sup = _insertion_superop(Insertion(0, branch, op))
    S = kernel.step_superop()
    Sh = kernel.half_superop()
    link_ins = Sh @ sup @ Sh if kernel.split else sup @ S
    AL = psi_l.tensors
    AR = psi_r.tensors

    lefts = [np.einsum("pa,pb,p->abp", AL[0][0], AR[0][0], w0 * dh)]
    for t in range(1, T):
        lefts.append(_env_step(lefts[-1], links[t - 1], dh, AL[t], AR[t]))
    rights = [None] * (T + 1)
    rights[T] = F0.reshape(1, 1, 4)  # (a', b', p_{T-1}) with unit end bonds
    for t in range(T - 1, 0, -1):
        R = rights[t + 1]
        t1 = AL[t].transpose(1, 0, 2) @ R.transpose(2, 0, 1)   # (p, a, r)
        tmp = (t1 @ AR[t].transpose(1, 2, 0)).transpose(1, 2, 0)  # (a, b, p)
        rights[t] = np.tensordot(tmp, links[t - 1] * dh[:, None], axes=(2, 0))

    log_scale = psi_l.norm_log + psi_r.norm_log
    out = np.empty(T, dtype=complex)
    Mfin = kernel.tail.conj().T @ _op_matrix(op) @ kernel.tail
    F_ins = Mfin[FOLDED_BWD, FOLDED_FWD] if branch == "forward" else None
    for k in range(1, T):
        E = _env_step(lefts[k - 1], link_ins, dh, AL[k], AR[k])
        out[k - 1] = _scaled(complex(np.sum(E * rights[k + 1])), log_scale)
    if branch == "forward":
        out[T - 1] = _scaled(complex(np.dot(lefts[T - 1][0, 0], F_ins)), log_scale)
    else:
        end_plan = InsertionPlan(([] if base_plan is None else list(base_plan.entries))
                                 + [Insertion(T, branch, op)])
        out[T - 1] = temporal_contract(im_left, im_right, kernel, end_plan)
    return out


# ------------------------------------------------------------------- series

def _final_entropies(im: InfluenceMatrix):
    d = im.diagnostics
    if d.get("entropy_halfcut"):
        return d["entropy_halfcut"][-1], d["entropy_max"][-1]
    return 0.0, 0.0


def _series_extras(extras: Dict[str, list], im: InfluenceMatrix) -> None:
    half, smax = _final_entropies(im)
    extras["entropy_halfcut"].append(half)
    extras["entropy_max"].append(smax)
    extras["discarded_weight"].append(float(np.sum(im.diagnostics.get("discarded_weight", [0.0]))))
    extras["chi"].append(im.psi.max_bond())


def _blank_extras() -> Dict[str, list]:
    return {"entropy_halfcut": [], "entropy_max": [],
            "discarded_weight": [], "chi": []}


def _nan_row(extras: Dict[str, list]) -> None:
    for k in ("entropy_halfcut", "entropy_max", "discarded_weight"):
        extras[k].append(float("nan"))
    extras["chi"].append(0)


def _solve_pair(spec: ModelSpec, chi_max: int, cutoff: float, boundary: str,
                preserve_weak_bonds: bool, im_sink: Optional[list]):
    """Converged IM pair and contraction kernel for one parameter point."""
    im = solve_im(spec, boundary=boundary, chi_max=chi_max, cutoff=cutoff,
                  preserve_weak_bonds=preserve_weak_bonds)
    if im_sink is not None:
        im_sink.append(im)
    if spec.impurity is not None:
        imp = impurity_im(spec, im, chi_max, cutoff)
        if im_sink is not None:
            im_sink.append(imp)
        return imp, imp.mirrored(), floquet_kernel(spec, "impurity_site")
    return im, im.mirrored(), floquet_kernel(spec)


def autocorrelator_series(spec: ModelSpec, chi_max: int, cutoff: float = 0.0,
                          T_max: Optional[int] = None, *, boundary: str = "open",
                          preserve_weak_bonds: bool = False,
                          reuse_im: bool = False,
                          im_sink: Optional[list] = None) -> ResultSeries:
    """Infinite-temperature C_zz(T) for T = 0..T_max.

    By default every T gets freshly converged IMs.  With ``reuse_im`` one
    solve at T_max serves all earlier times through intermediate insertions;
    exact for converged IMs, cheaper by a factor of T_max.
    """
    if spec.initial_state != "infinite_temperature":
        raise ValueError("autocorrelator needs the infinite-temperature state")
    T_max = spec.T if T_max is None else T_max
    step = spec.eps if spec.eps > 0 else 1.0
    extras = _blank_extras()
    values = [complex(1.0)]
    _nan_row(extras)
    if reuse_im:
        sp = replace(spec, T=T_max)
        iml, imr, kern = _solve_pair(sp, chi_max, cutoff, boundary,
                                     preserve_weak_bonds, im_sink)
        base = InsertionPlan([Insertion(0, "forward", "z")])
        vals = _contract_scan(iml, imr, kern, base, "z")
        for k in range(1, T_max + 1):
            values.append(vals[k - 1])
            _series_extras(extras, iml)
    else:
        for k in range(1, T_max + 1):
            sp = replace(spec, T=k)
            iml, imr, kern = _solve_pair(sp, chi_max, cutoff, boundary,
                                         preserve_weak_bonds, im_sink)
            values.append(temporal_contract(iml, imr, kern, czz_plan(k)))
            _series_extras(extras, iml)
    return ResultSeries("autocorrelator",
                        np.arange(T_max + 1) * step,
                        np.asarray(values), extras)


def quench_magnetization_series(J: float, g: float, h: float, t_max: float,
                                eps: float, chi_max: int, cutoff: float = 0.0,
                                *, boundary: str = "open",
                                preserve_weak_bonds: bool = False,
                                reuse_im: bool = False,
                                im_sink: Optional[list] = None) -> ResultSeries:
    """<sigma^z_0(t)> after a quench from the fully z-polarized state."""
    spec = trotterize(J, g, h, t_max, eps, initial_state="z_polarized_up")
    T = spec.T
    extras = _blank_extras()
    values = [complex(1.0)]
    _nan_row(extras)
    if reuse_im:
        iml, imr, kern = _solve_pair(spec, chi_max, cutoff, boundary,
                                     preserve_weak_bonds, im_sink)
        vals = _contract_scan(iml, imr, kern, None, "z")
        for k in range(1, T + 1):
            values.append(vals[k - 1])
            _series_extras(extras, iml)
    else:
        for k in range(1, T + 1):
            sp = replace(spec, T=k)
            iml, imr, kern = _solve_pair(sp, chi_max, cutoff, boundary,
                                         preserve_weak_bonds, im_sink)
            plan = InsertionPlan([Insertion(k, "forward", "z")])
            values.append(temporal_contract(iml, imr, kern, plan))
            _series_extras(extras, iml)
    return ResultSeries("quench-magnetization",
                        np.arange(T + 1) * eps,
                        np.asarray(values), extras)


def entropy_series(specs: Sequence[ModelSpec], chi_list: Sequence[int],
                   cutoff: float = 0.0, *, boundary: str = "open",
                   preserve_weak_bonds: bool = False,
                   abscissa: Optional[Sequence[float]] = None,
                   im_sink: Optional[list] = None) -> ResultSeries:
    """Half-cut and max temporal entanglement of converged IMs.

    Each parameter point is solved at every chi in chi_list (ascending);
    the reported value comes from the largest chi, and the point counts as
    chi-converged when the two largest chis agree within 2%.
    """
    chis = sorted(chi_list)
    extras = _blank_extras()
    extras["chi_converged"] = []
    extras["by_chi"] = {c: [] for c in chis}
    values = []
    for spec in specs:
        per_chi = []
        last_im = None
        for c in chis:
            im = solve_im(spec, boundary=boundary, chi_max=c, cutoff=cutoff,
                          preserve_weak_bonds=preserve_weak_bonds)
            if im_sink is not None:
                im_sink.append(im)
            half, smax = _final_entropies(im)
            per_chi.append((half, smax))
            extras["by_chi"][c].append(half)
            last_im = im
        half, smax = per_chi[-1]
        if len(per_chi) >= 2:
            prev = per_chi[-2][0]
            denom = max(abs(half), 1e-30)
            extras["chi_converged"].append(abs(half - prev) / denom <= 0.02)
        else:
            extras["chi_converged"].append(True)
        values.append(complex(half))
        _series_extras(extras, last_im)
    xs = (np.asarray([s.eps if s.eps > 0 else s.T for s in specs], dtype=float)
          if abscissa is None else np.asarray(abscissa, dtype=float))
    return ResultSeries("temporal-entropy", xs, np.asarray(values), extras)
