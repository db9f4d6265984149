"""Semi-explicit index-1 DAEs ``w' = f(t, w, z), 0 = g(t, w, z)``.

Covers consistent initialization, fixed-step RK4 integration of the reduced
dynamics (z solved by Newton at every stage), Jacobian evaluation and the
time derivatives of dg/dw and dg/dz along solutions.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import dsl
from .linalg import SingularMatrix, invert

log = logging.getLogger(__name__)

NEWTON_TOL = 1e-10
NEWTON_MAXITER = 50
FD_DELTA = 1e-5


class ConsistencyFailure(RuntimeError):
    pass


class NonFinite(FloatingPointError):
    pass


@dataclass
class JacobianBundle:
    fw: np.ndarray
    fz: np.ndarray
    gw: np.ndarray
    gz: np.ndarray
    gt: np.ndarray


@dataclass
class SecondPartials:
    """Second partials of g at a point; ``gww[i, j, k] = d2 g_i / dw_j dw_k``."""

    gwt: np.ndarray  # m x n
    gww: np.ndarray  # m x n x n
    gwz: np.ndarray  # m x n x m
    gzt: np.ndarray  # m x m
    gzz: np.ndarray  # m x m x m


@dataclass
class DaeSystem:
    n: int
    m: int
    f: Callable
    g: Callable
    jac: Optional[Callable] = None
    name: str = "dae"
    time_invariant: bool = False
    second_partials: Optional[Callable] = None

    def eval_f(self, t, w, z):
        return np.asarray(self.f(t, w, z), dtype=float).reshape(self.n)

    def eval_g(self, t, w, z):
        return np.asarray(self.g(t, w, z), dtype=float).reshape(self.m)

    @classmethod
    def from_model(cls, model: dsl.ModelFile, name=None):
        """Build a system from a parsed model file, Jacobians by dual numbers."""
        fexprs, gexprs = model.f, model.g
        n, m = model.n, model.m
        ti = all(dsl.Var("t") not in dsl.variables(e) for e in fexprs + gexprs)

        def f(t, w, z):
            return np.array([dsl.evaluate(e, t, w, z) for e in fexprs], dtype=float)

        def g(t, w, z):
            return np.array([dsl.evaluate(e, t, w, z) for e in gexprs], dtype=float)

        def jac(t, w, z):
            w = [float(x) for x in w]
            z = [float(x) for x in z]
            fw, fz = np.zeros((n, n)), np.zeros((n, m))
            gw, gz, gt = np.zeros((m, n)), np.zeros((m, m)), np.zeros(m)
            seeds = [("w", k) for k in range(1, n + 1)] + [("z", k) for k in range(1, m + 1)] + ["t"]
            for seed in seeds:
                for target, exprs in ((0, fexprs), (1, gexprs)):
                    for i, e in enumerate(exprs):
                        if seed != "t" and dsl.Var(*seed) not in dsl.variables(e):
                            continue
                        _, d = dsl.eval_dual(e, t, w, z, seed)
                        if seed == "t":
                            if target == 1:
                                gt[i] = d
                        elif seed[0] == "w":
                            (fw if target == 0 else gw)[i, seed[1] - 1] = d
                        else:
                            (fz if target == 0 else gz)[i, seed[1] - 1] = d
            return JacobianBundle(fw, fz, gw, gz, gt)

        return cls(n, m, f, g, jac, name or model.name, ti)


@dataclass
class Trajectory:
    t: np.ndarray  # (N,)
    w: np.ndarray  # (N, n)
    z: np.ndarray  # (N, m)
    wdot: np.ndarray  # (N, n)
    zdot: np.ndarray  # (N, m)
    step: float
    constraint_residual_max: float = 0.0
    status: str = "ok"  # 'ok' or 'nonfinite'
    message: str = ""

    @property
    def diverged(self):
        return self.status != "ok"

    @property
    def t0(self):
        return float(self.t[0])

    @property
    def t_end(self):
        return float(self.t[-1])

    def __len__(self):
        return len(self.t)

    def state_at(self, t):
        """(w, z) at time t by cubic Hermite interpolation between samples."""
        ts = self.t
        if t < ts[0] - 1e-12 or t > ts[-1] + 1e-12:
            raise ValueError(f"t={t} outside trajectory span [{ts[0]}, {ts[-1]}]")
        k = int(np.searchsorted(ts, t, side="right")) - 1
        k = min(max(k, 0), len(ts) - 2) if len(ts) > 1 else 0
        if len(ts) == 1:
            return self.w[0].copy(), self.z[0].copy()
        h = ts[k + 1] - ts[k]
        s = (t - ts[k]) / h
        if s == 0.0:
            return self.w[k].copy(), self.z[k].copy()
        h00 = (1 + 2 * s) * (1 - s) ** 2
        h10 = s * (1 - s) ** 2
        h01 = s * s * (3 - 2 * s)
        h11 = s * s * (s - 1)
        w = h00 * self.w[k] + h10 * h * self.wdot[k] + h01 * self.w[k + 1] + h11 * h * self.wdot[k + 1]
        z = h00 * self.z[k] + h10 * h * self.zdot[k] + h01 * self.z[k + 1] + h11 * h * self.zdot[k + 1]
        return w, z

    def to_csv(self, path_or_file):
        n, m = self.w.shape[1], self.z.shape[1]
        header = ["t"] + [f"w{i}" for i in range(1, n + 1)] + [f"z{j}" for j in range(1, m + 1)]
        rows = np.column_stack([self.t, self.w, self.z])
        write_csv(path_or_file, header, rows)


def write_csv(path_or_file, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format(float(x), ".17g") for x in row))
    text = "\n".join(lines) + "\n"
    if hasattr(path_or_file, "write"):
        path_or_file.write(text)
    else:
        with open(path_or_file, "w", encoding="utf-8") as fh:
            fh.write(text)


def _fd_jacobians(sys, t, w, z):
    w = np.asarray(w, dtype=float)
    z = np.asarray(z, dtype=float)
    n, m = sys.n, sys.m
    fw, fz = np.zeros((n, n)), np.zeros((n, m))
    gw, gz = np.zeros((m, n)), np.zeros((m, m))
    for j in range(n):
        h = 1e-6 * max(1.0, abs(w[j]))
        wp, wm = w.copy(), w.copy()
        wp[j] += h
        wm[j] -= h
        fw[:, j] = (sys.eval_f(t, wp, z) - sys.eval_f(t, wm, z)) / (2 * h)
        if m:
            gw[:, j] = (sys.eval_g(t, wp, z) - sys.eval_g(t, wm, z)) / (2 * h)
    for j in range(m):
        h = 1e-6 * max(1.0, abs(z[j]))
        zp, zm = z.copy(), z.copy()
        zp[j] += h
        zm[j] -= h
        fz[:, j] = (sys.eval_f(t, w, zp) - sys.eval_f(t, w, zm)) / (2 * h)
        gz[:, j] = (sys.eval_g(t, w, zp) - sys.eval_g(t, w, zm)) / (2 * h)
    h = 1e-6 * max(1.0, abs(t))
    gt = (sys.eval_g(t + h, w, z) - sys.eval_g(t - h, w, z)) / (2 * h) if m else np.zeros(0)
    return JacobianBundle(fw, fz, gw, gz, gt)


def evaluate_jacobians(sys, t, w, z, analytic=True):
    """First partials at (t, w, z): analytic if the system has them, else FD."""
    if analytic and sys.jac is not None:
        jb = sys.jac(t, np.asarray(w, dtype=float), np.asarray(z, dtype=float))
        return JacobianBundle(
            np.asarray(jb.fw, dtype=float).reshape(sys.n, sys.n),
            np.asarray(jb.fz, dtype=float).reshape(sys.n, sys.m),
            np.asarray(jb.gw, dtype=float).reshape(sys.m, sys.n),
            np.asarray(jb.gz, dtype=float).reshape(sys.m, sys.m),
            np.asarray(jb.gt, dtype=float).reshape(sys.m),
        )
    return _fd_jacobians(sys, t, w, z)


def _newton(sys, t, w, z, tol=NEWTON_TOL, maxiter=NEWTON_MAXITER):
    z = np.array(z, dtype=float)
    if sys.m == 0:
        return z
    res = sys.eval_g(t, w, z)
    for _ in range(maxiter):
        rnorm = float(np.abs(res).max())
        if not math.isfinite(rnorm):
            raise ConsistencyFailure(f"non-finite constraint residual at t={t}")
        jb = evaluate_jacobians(sys, t, w, z)
        dz = invert(jb.gz) @ res
        z = z - dz
        res = sys.eval_g(t, w, z)
        # keep going past tol until the update stalls; quadratic convergence
        # makes the extra iteration nearly free and removes solver noise
        if float(np.abs(res).max()) <= tol and float(np.abs(dz).max()) <= 1e-13 * (1.0 + float(np.abs(z).max())):
            return z
        if float(np.abs(res).max()) <= 1e-15 * (1.0 + float(np.abs(z).max())):
            return z
    if float(np.abs(res).max()) <= tol:
        return z
    raise ConsistencyFailure(
        f"Newton did not reach |g| <= {tol:g} at t={t} after {maxiter} iterations "
        f"(residual {float(np.abs(res).max()):.3g})")


def consistent_init(sys, t0, w0, z_guess=None):
    """Solve g(t0, w0, z0) = 0 for z0 by Newton from ``z_guess``."""
    if sys.m == 0:
        return np.zeros(0)
    z_guess = np.zeros(sys.m) if z_guess is None else np.asarray(z_guess, dtype=float).reshape(sys.m)
    return _newton(sys, t0, np.asarray(w0, dtype=float).reshape(sys.n), z_guess)


def _zdot(sys, t, w, z, wdot, jb=None):
    if sys.m == 0:
        return np.zeros(0)
    jb = jb or evaluate_jacobians(sys, t, w, z)
    return -invert(jb.gz) @ (jb.gt + jb.gw @ wdot)


def integrate(sys, t0, w0, z0, t_end, step=1e-3):
    """Classical RK4 on the reduced dynamics with per-stage Newton solves.

    Growth is not an error; if the state becomes non-finite the partial
    trajectory is returned with ``status='nonfinite'``.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    w = np.asarray(w0, dtype=float).reshape(sys.n).copy()
    z = np.asarray(z0, dtype=float).reshape(sys.m).copy()
    res0 = float(np.abs(sys.eval_g(t0, w, z)).max()) if sys.m else 0.0
    if res0 > 1e-8:
        raise ConsistencyFailure(f"initial point is not consistent (|g| = {res0:.3g})")
    nsteps = max(1, int(round((t_end - t0) / step)))
    h = (t_end - t0) / nsteps
    ts = t0 + h * np.arange(nsteps + 1)
    ws = np.empty((nsteps + 1, sys.n))
    zs = np.empty((nsteps + 1, sys.m))
    wd = np.empty((nsteps + 1, sys.n))
    zd = np.empty((nsteps + 1, sys.m))
    ws[0], zs[0] = w, z
    wd[0] = sys.eval_f(t0, w, z)
    zd[0] = _zdot(sys, t0, w, z, wd[0])
    resmax = res0
    status, message = "ok", ""
    last = 0
    for k in range(nsteps):
        t = ts[k]
        try:
            k1 = wd[k]
            z2 = _newton(sys, t + h / 2, w + h / 2 * k1, z + h / 2 * zd[k])
            k2 = sys.eval_f(t + h / 2, w + h / 2 * k1, z2)
            z3 = _newton(sys, t + h / 2, w + h / 2 * k2, z2)
            k3 = sys.eval_f(t + h / 2, w + h / 2 * k2, z3)
            z4 = _newton(sys, t + h, w + h * k3, z + h * zd[k])
            k4 = sys.eval_f(t + h, w + h * k3, z4)
            w_new = w + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            if not np.all(np.isfinite(w_new)):
                raise NonFinite(f"state became non-finite at t={ts[k + 1]}")
            z_new = _newton(sys, ts[k + 1], w_new, z4)
            if not np.all(np.isfinite(z_new)):
                raise NonFinite(f"algebraic variable became non-finite at t={ts[k + 1]}")
            wdot_new = sys.eval_f(ts[k + 1], w_new, z_new)
            zdot_new = _zdot(sys, ts[k + 1], w_new, z_new, wdot_new)
        except (NonFinite, OverflowError, dsl.EvalError) as exc:
            if isinstance(exc, dsl.EvalError) and exc.kind != "Overflow":
                raise
            status, message = "nonfinite", str(exc)
            break
        except ConsistencyFailure as exc:
            if not (np.all(np.isfinite(w)) and np.abs(w).max() < 1e150):
                status, message = "nonfinite", str(exc)
                break
            raise
        w, z = w_new, z_new
        ws[k + 1], zs[k + 1], wd[k + 1], zd[k + 1] = w, z, wdot_new, zdot_new
        if sys.m:
            resmax = max(resmax, float(np.abs(sys.eval_g(ts[k + 1], w, z)).max()))
        last = k + 1
    sl = slice(0, last + 1)
    if status != "ok":
        log.warning("integration of %s stopped early: %s", sys.name, message)
    return Trajectory(ts[sl].copy(), ws[sl].copy(), zs[sl].copy(), wd[sl].copy(), zd[sl].copy(),
                      h, resmax, status, message)


def simulate(sys, t0, w0, z_guess, t_end, step=1e-3):
    """consistent_init followed by integrate."""
    z0 = consistent_init(sys, t0, w0, z_guess)
    return integrate(sys, t0, w0, z0, t_end, step)


def tangent_state(sys, t, w, z):
    """(w', z') of the solution through a consistent point."""
    jb = evaluate_jacobians(sys, t, w, z)
    wdot = sys.eval_f(t, w, z)
    return wdot, _zdot(sys, t, w, z, wdot, jb)


def _jac_rates_tangent(sys, t, w, z, delta=FD_DELTA):
    wdot, zdot = tangent_state(sys, t, w, z)
    jp = evaluate_jacobians(sys, t + delta, w + delta * wdot, z + delta * zdot)
    jm = evaluate_jacobians(sys, t - delta, w - delta * wdot, z - delta * zdot)
    return (jp.gw - jm.gw) / (2 * delta), (jp.gz - jm.gz) / (2 * delta)


def gjac_time_derivatives(sys, traj, t, delta=FD_DELTA, method="fd"):
    """d/dt of dg/dw and dg/dz along the trajectory at time t.

    ``method='fd'`` central-differences the Jacobians at t +- delta using
    Hermite-interpolated trajectory states; within ``delta`` of either end it
    differences along the solution tangent instead. ``method='analytic'`` and
    ``'chain'`` need ``sys.second_partials``; see :func:`gjac_rates_analytic`.
    """
    if t < traj.t0 - 1e-12 or t > traj.t_end + 1e-12:
        raise ValueError(f"t={t} outside trajectory span [{traj.t0}, {traj.t_end}]")
    if sys.m == 0:
        return np.zeros((0, sys.n)), np.zeros((0, 0))
    if method in ("analytic", "chain"):
        w, z = traj.state_at(t)
        return gjac_rates_analytic(sys, t, w, z, formula="gt_minus" if method == "analytic" else "chain",
                                   check_against=traj)
    if t - delta >= traj.t0 and t + delta <= traj.t_end:
        wp, zp = traj.state_at(t + delta)
        wm, zm = traj.state_at(t - delta)
        jp = evaluate_jacobians(sys, t + delta, wp, zp)
        jm = evaluate_jacobians(sys, t - delta, wm, zm)
        return (jp.gw - jm.gw) / (2 * delta), (jp.gz - jm.gz) / (2 * delta)
    w, z = traj.state_at(t)
    return _jac_rates_tangent(sys, t, w, z, delta)


def gjac_rates_analytic(sys, t, w, z, formula="gt_minus", check_against=None):
    """Analytic d/dt(dg/dw), d/dt(dg/dz) from second partials of g.

    ``formula='gt_minus'`` uses a variant of d/dt(dg/dz) whose
    last term reads ``+ gzz [gz]^-1 (gt - gw f)``; ``'chain'`` uses the plain
    chain rule with ``z' = -[gz]^-1 (gt + gw f)``. When ``check_against`` (a
    trajectory) is given, any disagreement with the FD path above 1e-4 is
    logged.
    """
    if sys.second_partials is None:
        raise ValueError(f"system {sys.name!r} does not provide second partials")
    w = np.asarray(w, dtype=float)
    z = np.asarray(z, dtype=float)
    jb = evaluate_jacobians(sys, t, w, z)
    sp = sys.second_partials(t, w, z)
    fv = sys.eval_f(t, w, z)
    gzi = invert(jb.gz)
    v = gzi @ (jb.gt + jb.gw @ fv)
    dgw = sp.gwt + np.einsum("ijk,k->ij", sp.gww, fv) - np.einsum("ijk,k->ij", sp.gwz, v)
    # d2g/dz dw applied to f: [i, j] = sum_k d2 g_i / dz_j dw_k f_k
    gzw_f = np.einsum("ikj,k->ij", sp.gwz, fv)
    if formula == "gt_minus":
        dgz = sp.gzt + gzw_f + np.einsum("ijk,k->ij", sp.gzz, gzi @ (jb.gt - jb.gw @ fv))
    elif formula == "chain":
        dgz = sp.gzt + gzw_f - np.einsum("ijk,k->ij", sp.gzz, v)
    else:
        raise ValueError(f"unknown formula {formula!r}")
    if check_against is not None:
        fd_w, fd_z = gjac_time_derivatives(sys, check_against, t)
        gap = max(float(np.abs(dgw - fd_w).max(initial=0.0)), float(np.abs(dgz - fd_z).max(initial=0.0)))
        if gap > 1e-4:
            log.warning("analytic (%s) Jacobian rates differ from finite differences by %.3g "
                        "for %s at t=%g", formula, gap, sys.name, t)
    return dgw, dgz
