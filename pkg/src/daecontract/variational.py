"""Variational DAE, reduced system, auxiliary ODE and the generalized Jacobian.

Along a base solution (w(t), z(t)) the auxiliary ODE for a gain gamma >= 0 is

    xi'  = A xi + B nu
    nu'  = -F^-1 C xi - F^-1 D nu

with A = f_w, B = f_z, F = g_z, C = gamma g_w + d/dt(g_w) + g_w f_w and
D = gamma g_z + d/dt(g_z) + g_w f_z. Its solutions keep
q = g_w xi + g_z nu decaying like exp(-gamma (t - t0)); the q0 = 0 slice is
exactly the variational DAE.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .dae import FD_DELTA, evaluate_jacobians, gjac_time_derivatives, tangent_state, write_csv
from .linalg import NormKind, induced_norm, invert


@dataclass
class CoefficientBundle:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    F: np.ndarray
    gamma: float
    gw: np.ndarray
    t: float = 0.0

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.F.shape[0]


@dataclass(frozen=True)
class MetricTransform:
    """Coordinate change M(w, z, t) of the generalized Jacobian.

    ``kind`` is ``'identity'``, ``'expscale'`` (M = exp(-sigma t) I) or
    ``'user'`` with ``func(w, z, t) -> matrix``.
    """

    kind: str = "identity"
    sigma: float = 0.0
    func: Optional[Callable] = None
    label: str = ""

    @classmethod
    def identity(cls):
        return cls("identity")

    @classmethod
    def exp_scale(cls, sigma):
        return cls("expscale", float(sigma))

    @classmethod
    def user(cls, func, label="user"):
        return cls("user", 0.0, func, label)

    @classmethod
    def constant(cls, matrix, label=None):
        mat = np.array(matrix, dtype=float)
        if mat.ndim == 1:
            mat = np.diag(mat)
        return cls("user", 0.0, lambda w, z, t: mat, label or f"constant{mat.tolist()}")

    @classmethod
    def parse(cls, spec):
        """'identity', 'exp:<sigma>' or 'diag:<a>,<b>,...'."""
        if isinstance(spec, cls):
            return spec
        spec = str(spec).strip().lower()
        if spec in ("identity", "i", "id"):
            return cls.identity()
        if spec.startswith("exp:"):
            return cls.exp_scale(float(spec[4:]))
        if spec.startswith("diag:"):
            vals = [float(v) for v in spec[5:].split(",")]
            return cls.constant(np.diag(vals), f"diag({', '.join(format(v, 'g') for v in vals)})")
        raise ValueError(f"unknown metric {spec!r}; use identity, exp:<sigma> or diag:<a>,<b>,...")

    def describe(self):
        if self.kind == "identity":
            return "identity"
        if self.kind == "expscale":
            return f"exp(-{self.sigma:g} t) I"
        return self.label or "user matrix"

    def matrix(self, w, z, t, dim):
        if self.kind == "identity":
            return np.eye(dim)
        if self.kind == "expscale":
            return math.exp(-self.sigma * t) * np.eye(dim)
        mat = np.asarray(self.func(w, z, t), dtype=float)
        if mat.shape != (dim, dim):
            raise ValueError(f"metric returned shape {mat.shape}, expected {(dim, dim)}")
        return mat

    def condition_product(self, w, z, t, dim, p=NormKind.TWO):
        """||M|| ||M^-1|| at a point (exactly 1 for identity and expscale)."""
        if self.kind in ("identity", "expscale"):
            return 1.0
        mat = self.matrix(w, z, t, dim)
        return induced_norm(mat, p) * induced_norm(invert(mat), p)


@dataclass
class LinearPath:
    t: np.ndarray
    xi: np.ndarray  # (N, n)
    nu: np.ndarray  # (N, m)

    def stacked(self):
        return np.column_stack([self.xi, self.nu])

    def to_csv(self, path_or_file):
        n, m = self.xi.shape[1], self.nu.shape[1]
        header = ["t"] + [f"xi{i}" for i in range(1, n + 1)] + [f"nu{j}" for j in range(1, m + 1)]
        write_csv(path_or_file, header, np.column_stack([self.t, self.xi, self.nu]))


def coefficients_at(sys, t, w, z, gamma, rates):
    """Coefficient bundle at a point given (d/dt g_w, d/dt g_z)."""
    jb = evaluate_jacobians(sys, t, w, z)
    dgw, dgz = rates
    C = gamma * jb.gw + dgw + jb.gw @ jb.fw
    D = gamma * jb.gz + dgz + jb.gw @ jb.fz
    return CoefficientBundle(jb.fw, jb.fz, C, D, jb.gz, float(gamma), jb.gw, float(t))


def coefficient_matrices(sys, traj, t, gamma):
    w, z = traj.state_at(t)
    return coefficients_at(sys, t, w, z, gamma, gjac_time_derivatives(sys, traj, t))


def aux_matrix(bundle):
    n, m = bundle.n, bundle.m
    if m == 0:
        return bundle.A.copy()
    Fi = invert(bundle.F)
    top = np.hstack([bundle.A, bundle.B])
    bottom = np.hstack([-Fi @ bundle.C, -Fi @ bundle.D])
    return np.vstack([top, bottom]).reshape(n + m, n + m)


def reduced_jacobian(bundle):
    if bundle.m == 0:
        return bundle.A.copy()
    return bundle.A - bundle.B @ (invert(bundle.F) @ bundle.gw)


def metric_rate(sys, traj, t, metric, dim, delta=FD_DELTA):
    """(M, M' M^-1) at time t along the trajectory."""
    w, z = traj.state_at(t)
    mat = metric.matrix(w, z, t, dim)
    if metric.kind == "identity":
        return mat, np.zeros((dim, dim))
    if metric.kind == "expscale":
        return mat, -metric.sigma * np.eye(dim)
    if t - delta >= traj.t0 and t + delta <= traj.t_end:
        wp, zp = traj.state_at(t + delta)
        wm, zm = traj.state_at(t - delta)
    else:
        wdot, zdot = tangent_state(sys, t, w, z)
        wp, zp = w + delta * wdot, z + delta * zdot
        wm, zm = w - delta * wdot, z - delta * zdot
    mdot = (metric.matrix(wp, zp, t + delta, dim) - metric.matrix(wm, zm, t - delta, dim)) / (2 * delta)
    return mat, mdot @ invert(mat)


def transform(mat, mrate, G):
    """M' M^-1 + M G M^-1."""
    return mrate + mat @ G @ invert(mat)


def generalized_jacobian(sys, traj, t, gamma, metric=None):
    metric = metric or MetricTransform.identity()
    G = aux_matrix(coefficient_matrices(sys, traj, t, gamma))
    dim = G.shape[0]
    if metric.kind == "identity":
        return G
    mat, mrate = metric_rate(sys, traj, t, metric, dim)
    return transform(mat, mrate, G)


def q_value(bundle, xi, nu):
    """q = g_w xi + g_z nu."""
    return bundle.gw @ np.asarray(xi, dtype=float) + bundle.F @ np.asarray(nu, dtype=float)


def _linear_rk4(traj, matrix_at, x0):
    """RK4 for x' = M(t) x on the trajectory's time grid."""
    ts = traj.t
    xs = np.empty((len(ts), len(x0)))
    xs[0] = x0
    x = np.asarray(x0, dtype=float)
    M0 = matrix_at(ts[0]) if len(ts) > 1 else None
    for k in range(len(ts) - 1):
        t, h = ts[k], ts[k + 1] - ts[k]
        Mm = matrix_at(t + h / 2)
        M1 = matrix_at(ts[k + 1])
        k1 = M0 @ x
        k2 = Mm @ (x + h / 2 * k1)
        k3 = Mm @ (x + h / 2 * k2)
        k4 = M1 @ (x + h * k3)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        xs[k + 1] = x
        M0 = M1
    return xs


def integrate_variational(sys, traj, xi0, nu0=None):
    """Variational DAE along ``traj``: xi by RK4 on the reduced Jacobian, nu algebraic.

    The path always starts on the constraint, so ``nu0`` is ignored and
    replaced by -F^-1 g_w xi0.
    """
    n, m = sys.n, sys.m

    def red(t):
        w, z = traj.state_at(t)
        jb = evaluate_jacobians(sys, t, w, z)
        if m == 0:
            return jb.fw
        return jb.fw - jb.fz @ (invert(jb.gz) @ jb.gw)

    xi = _linear_rk4(traj, red, np.asarray(xi0, dtype=float).reshape(n))
    nu = np.zeros((len(traj.t), m))
    if m:
        for k, t in enumerate(traj.t):
            jb = evaluate_jacobians(sys, t, traj.w[k], traj.z[k])
            nu[k] = -invert(jb.gz) @ (jb.gw @ xi[k])
    return LinearPath(traj.t.copy(), xi, nu)


def integrate_aux(sys, traj, gamma, xi0, nu0):
    n, m = sys.n, sys.m
    x0 = np.concatenate([np.asarray(xi0, dtype=float).reshape(n), np.asarray(nu0, dtype=float).reshape(m)])
    xs = _linear_rk4(traj, lambda t: aux_matrix(coefficient_matrices(sys, traj, t, gamma)), x0)
    return LinearPath(traj.t.copy(), xs[:, :n], xs[:, n:])


def q_series(sys, traj, path):
    """q(t) at every sample of a linear path along ``traj``."""
    out = np.zeros((len(path.t), sys.m))
    for k, t in enumerate(path.t):
        jb = evaluate_jacobians(sys, t, traj.w[k], traj.z[k])
        out[k] = jb.gw @ path.xi[k] + jb.gz @ path.nu[k]
    return out
