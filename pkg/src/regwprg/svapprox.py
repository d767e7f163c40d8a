"""Singular-value approximation of doubly stochastic matrices.

``W~`` is an eps-SV approximation of ``W`` when for all ``x, y``::

    |x^T (W~ - W) y| <= eps * (D(W^T, x) + D(W, y)) / 2,   D(A, y) = |y|^2 - |Ay|^2.

With ``E = W~ - W``, ``A = I - W W^T`` and ``B = I - W^T W`` the least such
eps is ``|| A^{+1/2} E B^{+1/2} ||_2`` provided ``E`` kills ``ker B`` and
``ker A`` is orthogonal to the columns of ``E``; otherwise it is infinite.
Kernels are found in exact arithmetic, the rest in floating point.
"""

from dataclasses import dataclass, field
import math

import numpy as np
import scipy.linalg

from .approx import EpsSchedule, bs_intervals, level_matrix
from .ratlin import identity, is_doubly_stochastic, is_zero, null_space, to_float
from .robp import rw_matrix
from .weights import BaseCertificationError

__all__ = [
    "SvCertificate",
    "mixing_gap",
    "sv_error",
    "sv_norm_check",
    "check_sv_forms",
    "sv_main_harness",
]


def mixing_gap(a, y):
    """``D(a, y) = |y|^2 - |a y|^2``, exact."""
    if a.shape[1] != len(y):
        raise ValueError("dimension mismatch")
    ay = a @ y
    return y @ y - ay @ ay


@dataclass
class SvCertificate:
    target: np.ndarray = field(repr=False)
    candidate: np.ndarray = field(repr=False)
    eps_measured: float
    method: str
    kernel_ok: bool

    def to_dict(self, key=None, bound=None):
        out = {"key": key, "eps_measured": self.eps_measured, "bound": bound,
               "method": self.method, "kernel_ok": self.kernel_ok}
        out["pass"] = None if bound is None else bool(self.eps_measured <= bound)
        return out


def _complement_basis(kernel, w):
    """Orthonormal float basis of the orthogonal complement of an exact kernel basis."""
    if kernel.shape[1] == 0:
        return np.eye(w)
    return scipy.linalg.null_space(to_float(kernel).T)


def _inv_sqrt(sym):
    vals, vecs = np.linalg.eigh(sym)
    if vals[0] <= 0:
        raise np.linalg.LinAlgError("restricted gap matrix is not positive definite")
    return (vecs / np.sqrt(vals)) @ vecs.T


def _reduced_problem(w, w_tilde):
    if not is_doubly_stochastic(w):
        raise ValueError("target matrix is not doubly stochastic")
    if w_tilde.shape != w.shape:
        raise ValueError("shape mismatch")
    n = w.shape[0]
    e = w_tilde - w
    left = identity(n) - w @ w.T
    right = identity(n) - w.T @ w
    k_left, k_right = null_space(left), null_space(right)
    kernel_ok = is_zero(e @ k_right) and is_zero(k_left.T @ e)
    u_left = _complement_basis(k_left, n)
    u_right = _complement_basis(k_right, n)
    return e, left, right, u_left, u_right, kernel_ok


def sv_error(w, w_tilde, tol=1e-9, method="spectral_pinv"):
    """Smallest eps making ``w_tilde`` an eps-SV approximation of ``w``.

    ``method`` is ``"spectral_pinv"`` (largest singular value of the whitened
    error) or ``"psd_bisection"`` (bisection on positive definiteness of the
    2x2 block form, tested by Cholesky).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    e, left, right, u_left, u_right, kernel_ok = _reduced_problem(w, w_tilde)
    if not kernel_ok:
        return SvCertificate(w, w_tilde, math.inf, method, False)
    if u_left.shape[1] == 0 or u_right.shape[1] == 0:
        return SvCertificate(w, w_tilde, 0.0, method, True)
    ef = u_left.T @ to_float(e) @ u_right
    a_r = u_left.T @ to_float(left) @ u_left
    b_r = u_right.T @ to_float(right) @ u_right
    if method == "spectral_pinv":
        whitened = _inv_sqrt(a_r) @ ef @ _inv_sqrt(b_r)
        eps = float(np.linalg.norm(whitened, 2)) if whitened.size else 0.0
    elif method == "psd_bisection":
        eps = _bisect(a_r, b_r, ef, tol)
    else:
        raise ValueError(f"unknown method {method!r}")
    return SvCertificate(w, w_tilde, eps, method, True)


def _bisect(a_r, b_r, ef, tol):
    def feasible(eps):
        block = np.block([[eps / 2 * a_r, -ef / 2], [-ef.T / 2, eps / 2 * b_r]])
        try:
            np.linalg.cholesky(block)
        except np.linalg.LinAlgError:
            return False
        return True

    if not np.any(ef):
        return 0.0
    lo, hi = 0.0, 1.0
    while not feasible(hi):
        lo, hi = hi, hi * 2
        if hi > 1e12:
            raise np.linalg.LinAlgError("bisection failed to bracket")
    while hi - lo > tol * max(1.0, hi):
        mid = (lo + hi) / 2
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return hi


def sv_norm_check(w, w_tilde, delta, test_set, tol=1e-9):
    """Per test vector: ``|(W~ - W) y|_2 <= delta * sqrt(D(W, y)) + tol``."""
    cert = sv_error(w, w_tilde, tol)
    if cert.eps_measured > delta + tol:
        raise ValueError(f"candidate is only a {cert.eps_measured}-SV approximation, not {delta}")
    e = w_tilde - w
    out = []
    for y in test_set:
        lhs = float(np.linalg.norm(to_float(e @ y)))
        rhs = float(delta) * math.sqrt(max(float(mixing_gap(w, y)), 0.0))
        out.append({"lhs": lhs, "rhs": rhs, "pass": lhs <= rhs + tol})
    return out


def check_sv_forms(w, w_tilde, eps, samples=1000, seed=0, tol=1e-9):
    """Compare the arithmetic-mean and geometric-mean forms of the definition on random ``(x, y)``.

    Returns ``(all_ok, worst_ratio)``: both forms must hold at ``eps`` and the
    arithmetic form, after the optimal rescaling ``x -> c x, y -> y / c``, must
    equal the geometric form.
    """
    wf = to_float(w)
    ef = to_float(w_tilde - w)
    rng = np.random.default_rng(seed)
    ok = True
    worst = 0.0
    for _ in range(samples):
        x = rng.standard_normal(w.shape[0])
        y = rng.standard_normal(w.shape[0])
        lhs = abs(x @ ef @ y)
        dx = max(x @ x - np.sum((wf.T @ x) ** 2), 0.0)
        dy = max(y @ y - np.sum((wf @ y) ** 2), 0.0)
        am = eps * (dx + dy) / 2
        gm = eps * math.sqrt(dx * dy)
        ok &= lhs <= gm + tol and lhs <= am + tol and gm <= am + tol
        if dx > 0 and dy > 0:
            c = (dy / dx) ** 0.25
            am_scaled = eps * (c * c * dx + dy / (c * c)) / 2
            ok &= abs(am_scaled - gm) <= tol * max(1.0, gm)
            worst = max(worst, lhs / math.sqrt(dx * dy))
    return bool(ok), worst


def sv_main_harness(b, gamma, k_max, provider, tol=1e-9):
    """Measured SV error of every level-k matrix against ``C_t eps(k)``.

    Raises :class:`BaseCertificationError` if a level-0 matrix is not an
    ``eps(0)/3`` SV approximation.
    """
    schedule = EpsSchedule(gamma, b.n)
    base_bound = float(schedule.eps(0) / 3)
    for l, r in bs_intervals(b.n, min_len=2):
        cert = sv_error(rw_matrix(b, l, r), provider.base(l, r), tol)
        if cert.eps_measured > base_bound:
            raise BaseCertificationError(
                f"base ({l}, {r}) has SV error {cert.eps_measured} > {base_bound}")
    rows = []
    for l, r in bs_intervals(b.n):
        t = (r - l).bit_length() - 1
        for k in range(k_max + 1):
            cert = sv_error(rw_matrix(b, l, r), level_matrix(provider, l, r, k), tol)
            bound = float(schedule.growth(t) * schedule.eps(k))
            row = cert.to_dict(key=[l, r, k], bound=bound)
            row["t"] = t
            row["pass"] = cert.eps_measured <= bound + tol
            rows.append(row)
    return rows
