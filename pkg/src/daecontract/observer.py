"""Observers for time-varying ODEs, treated as DAEs.

A plant ``w' = k(t, w), z = h(t, w)`` with injection ``l(t, zhat, z)``
(``l(t, z, z) = 0``) gives the observer DAE

    what' = k(t, what) + l(t, zhat, z(t)),   0 = h(t, what) - zhat

for a given measured signal z(t).
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .dae import DaeSystem, JacobianBundle, Trajectory, simulate, write_csv
from .linalg import vector_norm


@dataclass
class PlantOde:
    n: int
    m: int
    k: Callable  # (t, w) -> R^n
    h: Callable  # (t, w) -> R^m
    k_jac: Optional[Callable] = None  # (t, w) -> n x n
    h_jac: Optional[Callable] = None  # (t, w) -> m x n
    h_t: Optional[Callable] = None  # (t, w) -> R^m
    name: str = "plant"

    def eval_k(self, t, w):
        return np.asarray(self.k(t, w), dtype=float).reshape(self.n)

    def eval_h(self, t, w):
        return np.asarray(self.h(t, w), dtype=float).reshape(self.m)

    def _k_jac(self, t, w):
        if self.k_jac is not None:
            return np.asarray(self.k_jac(t, w), dtype=float).reshape(self.n, self.n)
        return _fd_matrix(lambda x: self.eval_k(t, x), w, self.n)

    def _h_jac(self, t, w):
        if self.h_jac is not None:
            return np.asarray(self.h_jac(t, w), dtype=float).reshape(self.m, self.n)
        return _fd_matrix(lambda x: self.eval_h(t, x), w, self.m)

    def _h_t(self, t, w):
        if self.h_t is not None:
            return np.asarray(self.h_t(t, w), dtype=float).reshape(self.m)
        dt = 1e-6 * max(1.0, abs(t))
        return (self.eval_h(t + dt, w) - self.eval_h(t - dt, w)) / (2 * dt)

    def as_dae(self):
        """The plant with its output as algebraic variable: 0 = h(t, w) - z."""
        n, m = self.n, self.m

        def jac(t, w, z):
            return JacobianBundle(self._k_jac(t, w), np.zeros((n, m)), self._h_jac(t, w),
                                  -np.eye(m), self._h_t(t, w))

        return DaeSystem(n, m, lambda t, w, z: self.eval_k(t, w), lambda t, w, z: self.eval_h(t, w) - z,
                         jac, self.name)


def _fd_matrix(fun, x, rows):
    x = np.asarray(x, dtype=float)
    out = np.zeros((rows, len(x)))
    for j in range(len(x)):
        h = 1e-6 * max(1.0, abs(x[j]))
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        out[:, j] = (fun(xp) - fun(xm)) / (2 * h)
    return out


@dataclass
class Injection:
    l: Callable  # (t, zhat, z) -> R^n
    dl_dzhat: Callable  # (t, zhat, z) -> n x m
    label: str = "injection"


def luenberger_injection(kappa, label="luenberger"):
    """l(t, zhat, z) = kappa(t) (zhat - z); kappa is a callable or a constant matrix."""
    if callable(kappa):
        gain = lambda t: np.atleast_2d(np.asarray(kappa(t), dtype=float))  # noqa: E731
    else:
        const = np.atleast_2d(np.asarray(kappa, dtype=float))
        gain = lambda t: const  # noqa: E731
    return Injection(lambda t, zhat, z: gain(t) @ (np.asarray(zhat, dtype=float) - np.asarray(z, dtype=float)),
                     lambda t, zhat, z: gain(t), label)


def zero_injection(n, m):
    return luenberger_injection(np.zeros((n, m)), "zero")


@dataclass
class ObserverSpec:
    plant: PlantOde
    injection: Injection
    check_seed: int = 0

    def __post_init__(self):
        rng = np.random.default_rng(self.check_seed)
        for _ in range(8):
            t = float(rng.uniform(0, 10))
            z = rng.uniform(-5, 5, self.plant.m)
            val = np.asarray(self.injection.l(t, z, z), dtype=float)
            if val.shape != (self.plant.n,):
                raise ValueError(f"injection returns shape {val.shape}, expected ({self.plant.n},)")
            if np.abs(val).max(initial=0.0) > 1e-12:
                raise ValueError("injection must vanish when zhat == z")


def _measured_at(traj, t, reach=1e-3):
    """Output of ``traj`` at t; first-order extrapolation a hair past either end."""
    if t < traj.t0:
        if traj.t0 - t > reach:
            raise ValueError(f"t={t} outside measured span [{traj.t0}, {traj.t_end}]")
        return traj.z[0] + (t - traj.t0) * traj.zdot[0]
    if t > traj.t_end:
        if t - traj.t_end > reach:
            raise ValueError(f"t={t} outside measured span [{traj.t0}, {traj.t_end}]")
        return traj.z[-1] + (t - traj.t_end) * traj.zdot[-1]
    return traj.state_at(t)[1]


def build_observer_dae(spec, measured, name=None):
    """Observer DAE for a measured output given as a Trajectory or a callable t -> z."""
    plant, inj = spec.plant, spec.injection
    n, m = plant.n, plant.m
    if isinstance(measured, Trajectory):
        traj = measured
        if traj.z.shape[1] != m:
            raise ValueError(f"measured trajectory has {traj.z.shape[1]} outputs, plant has {m}")
        zfun = lambda t: _measured_at(traj, t)  # noqa: E731
    else:
        zfun = lambda t: np.asarray(measured(t), dtype=float).reshape(m)  # noqa: E731

    def f(t, w, zhat):
        return plant.eval_k(t, w) + np.asarray(inj.l(t, zhat, zfun(t)), dtype=float)

    def g(t, w, zhat):
        return plant.eval_h(t, w) - zhat

    def jac(t, w, zhat):
        return JacobianBundle(plant._k_jac(t, w), np.asarray(inj.dl_dzhat(t, zhat, zfun(t)), dtype=float),
                              plant._h_jac(t, w), -np.eye(m), plant._h_t(t, w))

    return DaeSystem(n, m, f, g, jac, name or f"observer({plant.name})")


@dataclass
class ObserverRun:
    plant: Trajectory
    observer: Trajectory
    t: np.ndarray
    err: np.ndarray  # (N, n)
    err_norm: np.ndarray  # (N,)

    def to_csv(self, path_or_file):
        n = self.err.shape[1]
        header = ["t", "err_norm"] + [f"e{i}" for i in range(1, n + 1)]
        write_csv(path_or_file, header, np.column_stack([self.t, self.err_norm, self.err]))


def simulate_observer(spec, w0, what0, t_end, step=1e-3, t0=0.0, p="2"):
    """Simulate the plant, then the observer driven by the plant's output."""
    plant = spec.plant
    w0 = np.asarray(w0, dtype=float)
    what0 = np.asarray(what0, dtype=float)
    plant_traj = simulate(plant.as_dae(), t0, w0, plant.eval_h(t0, w0), t_end, step)
    obs = build_observer_dae(spec, plant_traj)
    obs_traj = simulate(obs, t0, what0, plant.eval_h(t0, what0), plant_traj.t_end, step)
    npts = min(len(plant_traj), len(obs_traj))
    err = obs_traj.w[:npts] - plant_traj.w[:npts]
    norms = np.array([vector_norm(e, p) for e in err])
    return ObserverRun(plant_traj, obs_traj, plant_traj.t[:npts].copy(), err, norms)
