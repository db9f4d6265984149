"""Numerical contraction certificates and supporting tools.

A certificate here is grid evidence: the matrix measure of the generalized
Jacobian is evaluated at every stored step of a finite set of simulated
trajectories (or on a regular grid over a box, for the reduced test of
time-invariant systems). It is not a proof over all solutions and all time.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import dae
from .dae import consistent_init, evaluate_jacobians, gjac_time_derivatives, integrate
from .linalg import NormKind, SingularMatrix, induced_norm, invert, matrix_measure, symmetric_eigen_max, vector_norm
from .variational import (
    LinearPath,
    MetricTransform,
    aux_matrix,
    coefficient_matrices,
    coefficients_at,
    metric_rate,
    transform,
)

GAMMA_LADDER = (0.0, 1.0, 2.0, 4.0, 8.0, 16.0)
DEFAULT_METRIC_CAP = 1e6
CERT_TOL = 1e-12

CAVEAT = ("grid evidence only: the matrix measure was sampled at the listed points "
          "of finitely many simulated solutions, not verified for all solutions and times")


@dataclass
class Certificate:
    system: str
    gamma: Optional[float]
    p: NormKind
    metric: str
    beta_min: float
    samples: np.ndarray  # rows (id, t, mu) or, for box certificates, (id, coords..., mu)
    mu_max: float
    metric_product_max: float
    certified: bool
    worst: tuple
    reason: str = ""
    kind: str = "trajectory"
    columns: tuple = ("trajectory_id", "t", "mu")
    notes: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def beta(self):
        return -self.mu_max

    @property
    def verdict(self):
        if self.certified:
            return f"Certified(beta={self.beta:.6g})"
        return f"NotCertified(worst={_fmt_point(self.worst)})"

    def report(self):
        lines = [
            f"system: {self.system}",
            f"test: {'generalized Jacobian along trajectories' if self.kind == 'trajectory' else 'reduced Jacobian on a box'}",
            f"gamma: {'n/a' if self.gamma is None else format(self.gamma, 'g')}",
            f"norm: mu_{self.p.value}",
            f"metric: {self.metric}",
            f"samples: {len(self.samples)}",
            f"mu_max: {self.mu_max:.12g}",
            f"beta: {self.beta:.12g}",
            f"beta_min: {self.beta_min:g}",
            f"metric_product_max: {self.metric_product_max:.6g}",
        ]
        for key, val in self.extra.items():
            lines.append(f"{key}: {val:.6g}" if isinstance(val, float) else f"{key}: {val}")
        lines.append(f"verdict: {self.verdict}")
        if self.reason:
            lines.append(f"reason: {self.reason}")
        for note in self.notes:
            lines.append(f"note: {note}")
        lines.append(f"caveat: {CAVEAT}")
        return "\n".join(lines) + "\n"

    def to_csv(self, path_or_file):
        dae.write_csv(path_or_file, list(self.columns), self.samples)


def _fmt_point(pt):
    if not pt:
        return "none"
    return "(" + ", ".join(format(float(v), ".6g") for v in pt) + ")"


def _pieces(sys, traj, k):
    t = float(traj.t[k])
    w, z = traj.w[k], traj.z[k]
    rates = gjac_time_derivatives(sys, traj, t)
    return t, w, z, rates


def _mu_along(sys, traj, gamma, p, metric, indices):
    out = []
    dim = sys.n + sys.m
    for k in indices:
        t, w, z, rates = _pieces(sys, traj, k)
        G = aux_matrix(coefficients_at(sys, t, w, z, gamma, rates))
        if metric.kind == "identity":
            J = G
            prod = 1.0
        else:
            mat, mrate = metric_rate(sys, traj, t, metric, dim)
            J = transform(mat, mrate, G)
            prod = metric.condition_product(w, z, t, dim, p)
        out.append((t, matrix_measure(J, p), prod))
    return out


def _chunks(n, parts):
    parts = max(1, min(parts, n))
    bounds = np.linspace(0, n, parts + 1).astype(int)
    return [range(bounds[i], bounds[i + 1]) for i in range(parts)]


def _default_threads(threads):
    return threads if threads else (os.cpu_count() or 1)


def certify_contraction(sys, initial_set, t_span, gamma=0.0, p=NormKind.ONE, metric=None, beta_min=0.5,
                        step=1e-3, metric_cap=DEFAULT_METRIC_CAP, threads=None):
    """Grid test of mu_p(J_M) <= -beta_min along simulated solutions.

    ``initial_set`` holds ``(w0, z_guess)`` pairs; z0 is made consistent
    first. With ``gamma=None`` the ladder 0, 1, 2, 4, 8, 16 is tried and the
    first certified gamma wins (otherwise the best one is reported).
    """
    p = NormKind.parse(p)
    metric = MetricTransform.parse(metric or "identity")
    if beta_min <= 0:
        raise ValueError("beta_min must be positive")
    initial_set = list(initial_set)
    if not initial_set:
        raise ValueError("initial set must not be empty")
    t0, t1 = t_span
    trajs = []
    for w0, z_guess in initial_set:
        try:
            z0 = consistent_init(sys, t0, w0, z_guess)
            traj = integrate(sys, t0, w0, z0, t1, step)
        except (SingularMatrix, dae.ConsistencyFailure) as exc:
            return _failed(sys, gamma, p, metric, beta_min, f"trajectory {len(trajs)}: {exc}")
        trajs.append(traj)
    ladder = GAMMA_LADDER if gamma is None else (float(gamma),)
    best = None
    tried = []
    for gam in ladder:
        cert = _certify_trajs(sys, trajs, gam, p, metric, beta_min, metric_cap, threads)
        tried.append(f"{gam:g}->{cert.mu_max:.4g}")
        if best is None or cert.mu_max < best.mu_max:
            best = cert
        if cert.certified:
            best = cert
            break
    if gamma is None:
        best.extra["gamma_ladder"] = ", ".join(tried)
    return best


def _failed(sys, gamma, p, metric, beta_min, reason):
    return Certificate(sys.name, gamma, p, metric.describe(), beta_min, np.zeros((0, 3)), math.inf,
                       math.nan, False, (), reason)


def _certify_trajs(sys, trajs, gamma, p, metric, beta_min, metric_cap, threads):
    nthreads = _default_threads(threads)
    rows = []
    prod_max = 0.0
    reason = ""
    for tid, traj in enumerate(trajs):
        chunks = _chunks(len(traj), nthreads)
        try:
            if nthreads > 1 and len(chunks) > 1:
                with ThreadPoolExecutor(max_workers=nthreads) as pool:
                    parts = list(pool.map(lambda idx: _mu_along(sys, traj, gamma, p, metric, idx), chunks))
            else:
                parts = [_mu_along(sys, traj, gamma, p, metric, c) for c in chunks]
        except SingularMatrix as exc:
            return _failed(sys, gamma, p, metric, beta_min, f"trajectory {tid}: singular matrix ({exc})")
        for part in parts:
            for t, mu, prod in part:
                rows.append((tid, t, mu))
                prod_max = max(prod_max, prod)
        if traj.diverged:
            reason = f"trajectory {tid} left the floating-point range: {traj.message}"
    samples = np.array(rows, dtype=float).reshape(-1, 3)
    k = int(np.argmax(samples[:, 2]))
    mu_max = float(samples[k, 2])
    certified = mu_max <= -beta_min + CERT_TOL and math.isfinite(prod_max) and prod_max <= metric_cap and not reason
    if not reason and mu_max > -beta_min + CERT_TOL:
        reason = f"mu_{p.value} reaches {mu_max:.6g} > -beta_min = {-beta_min:g}"
    elif not reason and not (prod_max <= metric_cap):
        reason = f"||M|| ||M^-1|| reaches {prod_max:.3g} above the cap {metric_cap:g}"
    cert = Certificate(sys.name, gamma, p, metric.describe(), beta_min, samples, mu_max, prod_max,
                       certified, tuple(samples[k]), reason)
    if metric.kind == "expscale" and metric.sigma > 0:
        span = max(tr.t_end - tr.t0 for tr in trajs)
        cert.notes.append(
            "||M(t)|| ||M(t)^-1|| = 1 pointwise, but ||M(t)^-1|| ||M(t0)|| grows like "
            f"exp({metric.sigma:g} (t - t0)) (= {math.exp(metric.sigma * span):.3g} at the end of the run); "
            "the decay guaranteed for the original coordinates is weaker than beta by up to sigma")
    return cert


def certify_box_reduced(sys, box, grid=101, p=NormKind.ONE, metric=None, beta_min=1.0,
                        coupling_cap=DEFAULT_METRIC_CAP, threads=None):
    """Reduced-Jacobian test for a time-invariant DAE on a box of (w, z).

    ``box`` lists one ``(lo, hi)`` interval per coordinate of (w, z); an
    interval with ``lo == hi`` pins that coordinate. Every other coordinate
    gets ``grid`` evenly spaced points.
    """
    if not sys.time_invariant:
        raise ValueError(f"system {sys.name!r} is not declared time-invariant")
    p = NormKind.parse(p)
    metric = MetricTransform.parse(metric or "identity")
    n, m = sys.n, sys.m
    box = [tuple(map(float, iv)) if np.ndim(iv) else (float(iv), float(iv)) for iv in box]
    if len(box) != n + m:
        raise ValueError(f"box needs {n + m} intervals, got {len(box)}")
    axes = [np.linspace(lo, hi, grid) if hi > lo else np.array([lo]) for lo, hi in box]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n + m)

    def evaluate(idx):
        out = []
        for i in idx:
            x = mesh[i]
            w, z = x[:n], x[n:]
            jb = evaluate_jacobians(sys, 0.0, w, z)
            coupling = invert(jb.gz) @ jb.gw if m else np.zeros((0, n))
            J = jb.fw - jb.fz @ coupling
            prod = 1.0
            if metric.kind == "expscale":
                J = J - metric.sigma * np.eye(n)
            elif metric.kind == "user":
                mat = metric.matrix(w, z, 0.0, n)
                wdot = sys.eval_f(0.0, w, z)
                zdot = -coupling @ wdot
                d = dae.FD_DELTA
                mdot = (metric.matrix(w + d * wdot, z + d * zdot, 0.0, n)
                        - metric.matrix(w - d * wdot, z - d * zdot, 0.0, n)) / (2 * d)
                J = transform(mat, mdot @ invert(mat), J)
                prod = metric.condition_product(w, z, 0.0, n, p)
            out.append((i, matrix_measure(J, p), induced_norm(coupling, p), prod))
        return out

    nthreads = _default_threads(threads)
    chunks = _chunks(len(mesh), nthreads)
    try:
        if nthreads > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(max_workers=nthreads) as pool:
                parts = list(pool.map(evaluate, chunks))
        else:
            parts = [evaluate(c) for c in chunks]
    except SingularMatrix as exc:
        return Certificate(sys.name, None, p, metric.describe(), beta_min, np.zeros((0, n + m + 2)), math.inf,
                           math.nan, False, (), f"singular dg/dz on the box ({exc})", kind="box")
    results = [r for part in parts for r in part]
    mus = np.array([r[1] for r in results])
    coupling_max = max(r[2] for r in results)
    prod_max = max(r[3] for r in results)
    samples = np.column_stack([np.arange(len(mesh)), mesh, mus])
    k = int(np.argmax(mus))
    mu_max = float(mus[k])
    bounded = math.isfinite(coupling_max) and coupling_max <= coupling_cap
    certified = mu_max <= -beta_min + CERT_TOL and bounded and prod_max <= DEFAULT_METRIC_CAP
    reason = ""
    if mu_max > -beta_min + CERT_TOL:
        reason = f"mu_{p.value} reaches {mu_max:.6g} > -beta_min = {-beta_min:g}"
    elif not bounded:
        reason = f"||[dg/dz]^-1 dg/dw|| reaches {coupling_max:.3g} above the cap {coupling_cap:g}"
    names = [f"w{i}" for i in range(1, n + 1)] + [f"z{j}" for j in range(1, m + 1)]
    cert = Certificate(sys.name, None, p, metric.describe(), beta_min, samples, mu_max, prod_max, certified,
                       tuple(samples[k, 1:]), reason, kind="box", columns=("point_id", *names, "mu"))
    cert.extra["coupling_norm_max"] = float(coupling_max)
    cert.extra["grid_points"] = len(mesh)
    return cert


def gamma_lower_bound(alpha_bar, l_f, l_g):
    """l + alpha_bar with l = max(l_g, l_g + l_f); choose gamma strictly above it."""
    if not alpha_bar > 0:
        raise ValueError("alpha_bar must be positive")
    return max(l_g, l_g + l_f) + alpha_bar


def transition_matrix(J, t0, t1, step=1e-3):
    """Phi(t1, t0) for x' = J(t) x by RK4 on all columns at once."""
    dim = np.atleast_2d(np.asarray(J(t0), dtype=float)).shape[0]
    X = np.eye(dim)
    if t1 == t0:
        return X
    nsteps = max(1, int(math.ceil(abs(t1 - t0) / step - 1e-9)))
    h = (t1 - t0) / nsteps
    Jm = lambda t: np.atleast_2d(np.asarray(J(t), dtype=float))  # noqa: E731
    for k in range(nsteps):
        t = t0 + k * h
        A0, Am, A1 = Jm(t), Jm(t + h / 2), Jm(t + h)
        k1 = A0 @ X
        k2 = Am @ (X + h / 2 * k1)
        k3 = Am @ (X + h / 2 * k2)
        k4 = A1 @ (X + h * k3)
        X = X + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return X


def coppel_envelope(J, p, x0, t_grid):
    """||x0||_p exp(int_{t0}^t mu_p(J(s)) ds) on ``t_grid`` (trapezoid rule)."""
    p = NormKind.parse(p)
    ts = np.asarray(t_grid, dtype=float)
    mus = np.array([matrix_measure(np.atleast_2d(J(t)), p) for t in ts])
    integral = np.concatenate([[0.0], np.cumsum(0.5 * (mus[1:] + mus[:-1]) * np.diff(ts))])
    return vector_norm(x0, p) * np.exp(integral)


def fd_variational_oracle(sys, t0, w0, xi0, delta=None, t_end=1.0, step=1e-3, z_guess=None):
    """Finite-difference quotient of two nearby solutions, (phi(w0 + delta xi0) - phi(w0)) / delta."""
    w0 = np.asarray(w0, dtype=float).reshape(sys.n)
    xi0 = np.asarray(xi0, dtype=float).reshape(sys.n)
    if delta is None:
        nrm = float(np.linalg.norm(w0))
        delta = 1e-6 * nrm if nrm > 0 else 1e-6
    z0 = consistent_init(sys, t0, w0, z_guess)
    base = integrate(sys, t0, w0, z0, t_end, step)
    wp = w0 + delta * xi0
    zp = consistent_init(sys, t0, wp, z0)
    pert = integrate(sys, t0, wp, zp, t_end, step)
    npts = min(len(base), len(pert))
    return LinearPath(base.t[:npts].copy(), (pert.w[:npts] - base.w[:npts]) / delta,
                      (pert.z[:npts] - base.z[:npts]) / delta)


def riccati_residual(G_path, P_path, Pdot_path, beta):
    """max over samples of lambda_max(G^T P + P G + P' + beta P).

    A value <= 0 means the differential Riccati inequality holds at every
    sample.
    """
    worst = -math.inf
    for G, P, Pd in zip(G_path, P_path, Pdot_path):
        G, P, Pd = (np.atleast_2d(np.asarray(x, dtype=float)) for x in (G, P, Pd))
        scale = max(1.0, float(np.abs(P).max()))
        if np.abs(P - P.T).max() > 1e-12 * scale:
            raise ValueError("P must be symmetric")
        R = G.T @ P + P @ G + Pd + beta * P
        worst = max(worst, symmetric_eigen_max(R))
    return worst


def riccati_residual_along(sys, traj, gamma, P, Pdot, beta, times=None):
    """Riccati residual with G the auxiliary matrix along ``traj``; P, Pdot are callables of t."""
    times = traj.t if times is None else times
    Gs = (aux_matrix(coefficient_matrices(sys, traj, t, gamma)) for t in times)
    return riccati_residual(Gs, (P(t) for t in times), (Pdot(t) for t in times), beta)


@dataclass
class DecayFit:
    c: float
    alpha: float
    residual: float


def fit_decay(t, r, discard=0.1):
    """Least-squares fit of log r = log c - alpha t, dropping the first ``discard`` fraction."""
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    if t.shape != r.shape or t.ndim != 1:
        raise ValueError("t and r must be 1-D arrays of equal length")
    if np.any(~(r > 0)):
        raise ValueError("decay fit needs strictly positive values")
    start = int(len(t) * discard)
    t, y = t[start:], np.log(r[start:])
    if len(t) < 2:
        raise ValueError("need at least two samples after discarding transients")
    A = np.column_stack([np.ones_like(t), -t])
    (logc, alpha), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.abs(A @ np.array([logc, alpha]) - y).max())
    return DecayFit(float(math.exp(logc)), float(alpha), resid)


def pairwise_distance(traj_a, traj_b, p=NormKind.TWO):
    """||(w_a, z_a) - (w_b, z_b)||_p at the common samples."""
    npts = min(len(traj_a), len(traj_b))
    diff = np.column_stack([traj_a.w[:npts] - traj_b.w[:npts], traj_a.z[:npts] - traj_b.z[:npts]])
    return traj_a.t[:npts].copy(), np.array([vector_norm(d, p) for d in diff])
