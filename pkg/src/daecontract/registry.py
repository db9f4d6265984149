"""Built-in example systems with hand-written Jacobians.

``exam1``
    w' = -w + exp(-3t) z, 0 = exp(3t) w + z. Reduced flow contracts, z does
    not; the standard negative example.
``exam3``
    w' = -2 exp(t) z, 0 = exp(-t) w - z. Contracting; shows the role of gamma.
``smex1``
    Nonlinear time-varying system with two states and one algebraic variable.
``smex2``
    Inverter-interfaced power source on an infinite bus, closed loop with
    u = k1 P + k2 Q. States (P, Q), algebraic (theta, V).
``oex1_observer``
    Luenberger observer for the unstable time-varying plant
    w' = A(t) w, z = w1.
"""

import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Optional

import numpy as np

from . import dsl
from .dae import DaeSystem, JacobianBundle, SecondPartials
from .linalg import NormKind
from .observer import ObserverSpec, PlantOde, build_observer_dae, luenberger_injection
from .variational import MetricTransform


@dataclass
class Preset:
    gamma: Optional[float]
    p: NormKind
    metric: MetricTransform
    beta_min: float
    t_end: float = 20.0
    step: float = 1e-3
    box: Optional[list] = None
    grid: int = 101
    method: str = "trajectory"  # or 'box'


@dataclass
class NamedExample:
    id: str
    system: object  # DaeSystem, or ObserverSpec for the observer example
    default_ics: list
    preset: Preset
    closed_form: Optional[Callable] = None
    model_file: str = ""
    description: str = ""
    params: dict = field(default_factory=dict)

    def model_text(self):
        return resources.files("daecontract").joinpath("models", self.model_file).read_text(encoding="utf-8")

    def dae(self, measured=None):
        """The DAE to simulate/certify (for the observer: driven by ``measured``)."""
        if isinstance(self.system, ObserverSpec):
            if measured is None:
                raise ValueError("the observer example needs a measured plant trajectory")
            return build_observer_dae(self.system, measured, name=self.id)
        return self.system


def _zero_partials(m, n):
    return dict(gwt=np.zeros((m, n)), gww=np.zeros((m, n, n)), gwz=np.zeros((m, n, m)),
                gzt=np.zeros((m, m)), gzz=np.zeros((m, m, m)))


def exam1_system():
    def f(t, w, z):
        return np.array([-w[0] + math.exp(-3 * t) * z[0]])

    def g(t, w, z):
        return np.array([math.exp(3 * t) * w[0] + z[0]])

    def jac(t, w, z):
        e3 = math.exp(3 * t)
        return JacobianBundle(np.array([[-1.0]]), np.array([[1.0 / e3]]), np.array([[e3]]),
                              np.array([[1.0]]), np.array([3 * e3 * w[0]]))

    def second(t, w, z):
        sp = _zero_partials(1, 1)
        sp["gwt"] = np.array([[3 * math.exp(3 * t)]])
        return SecondPartials(**sp)

    return DaeSystem(1, 1, f, g, jac, "exam1", False, second)


def exam1_closed_form(t, w0):
    w0 = float(np.asarray(w0).ravel()[0])
    return np.array([w0 * math.exp(-2 * t)]), np.array([-w0 * math.exp(t)])


def exam3_system():
    def f(t, w, z):
        return np.array([-2 * math.exp(t) * z[0]])

    def g(t, w, z):
        return np.array([math.exp(-t) * w[0] - z[0]])

    def jac(t, w, z):
        et = math.exp(t)
        return JacobianBundle(np.array([[0.0]]), np.array([[-2 * et]]), np.array([[1.0 / et]]),
                              np.array([[-1.0]]), np.array([-w[0] / et]))

    def second(t, w, z):
        sp = _zero_partials(1, 1)
        sp["gwt"] = np.array([[-math.exp(-t)]])
        return SecondPartials(**sp)

    return DaeSystem(1, 1, f, g, jac, "exam3", False, second)


def exam3_closed_form(t, w0):
    w0 = float(np.asarray(w0).ravel()[0])
    return np.array([w0 * math.exp(-2 * t)]), np.array([w0 * math.exp(-3 * t)])


def smex1_system():
    def f(t, w, z):
        s, c = math.sin(t), math.cos(t)
        return np.array([-4 * w[0] - 0.5 * math.cos(z[0]),
                         4 / (3 + s) * w[0] - (3 + c) / (3 + s) * w[1] - 4 / (3 + s)])

    def g(t, w, z):
        return np.array([4 * z[0] + 0.5 * math.sin(z[0]) + w[0] + (3 + math.sin(t)) * w[1]])

    def jac(t, w, z):
        s, c = math.sin(t), math.cos(t)
        return JacobianBundle(
            np.array([[-4.0, 0.0], [4 / (3 + s), -(3 + c) / (3 + s)]]),
            np.array([[0.5 * math.sin(z[0])], [0.0]]),
            np.array([[1.0, 3 + s]]),
            np.array([[4 + 0.5 * math.cos(z[0])]]),
            np.array([c * w[1]]),
        )

    def second(t, w, z):
        sp = _zero_partials(1, 2)
        sp["gwt"] = np.array([[0.0, math.cos(t)]])
        sp["gzz"] = np.array([[[-0.5 * math.sin(z[0])]]])
        return SecondPartials(**sp)

    return DaeSystem(2, 1, f, g, jac, "smex1", False, second)


SMEX2_DEFAULTS = dict(tau1=1 / 3, tau2=1 / 3, d1=1 / 3, d2=1 / 3, Pref=1.0, Qref=-1.0, thref=0.0, Vref=1.0,
                      G=1.0, B=1.0, k1=0.5, k2=0.5)


def smex2_system(**params):
    """Closed-loop inverter model; keyword overrides for any of SMEX2_DEFAULTS."""
    unknown = set(params) - set(SMEX2_DEFAULTS)
    if unknown:
        raise TypeError(f"unknown smex2 parameter(s): {', '.join(sorted(unknown))}")
    q = dict(SMEX2_DEFAULTS, **params)
    tau1, tau2, d1, d2 = q["tau1"], q["tau2"], q["d1"], q["d2"]
    Gc, Bc, k1, k2 = q["G"], q["B"], q["k1"], q["k2"]

    def f(t, w, z):
        P, Q = w
        th, V = z
        return np.array([(-P + q["Pref"] - d1 * (th - q["thref"])) / tau1,
                         (-Q + q["Qref"] - d2 * (V - q["Vref"])) / tau2 + k1 * P + k2 * Q])

    def g(t, w, z):
        P, Q = w
        th, V = z
        s, c = math.sin(th), math.cos(th)
        return np.array([P - Gc * V * c - Bc * V * s, Q - Gc * V * s + Bc * V * c])

    def jac(t, w, z):
        th, V = z
        s, c = math.sin(th), math.cos(th)
        return JacobianBundle(
            np.array([[-1 / tau1, 0.0], [k1, -1 / tau2 + k2]]),
            np.array([[-d1 / tau1, 0.0], [0.0, -d2 / tau2]]),
            np.eye(2),
            np.array([[Gc * V * s - Bc * V * c, -Gc * c - Bc * s],
                      [-Gc * V * c - Bc * V * s, -Gc * s + Bc * c]]),
            np.zeros(2),
        )

    return DaeSystem(2, 2, f, g, jac, "smex2", True)


def oex1_matrix(t):
    s, c = math.sin(t), math.cos(t)
    return np.array([[-1 + 1.5 * c * c, 1 - 1.5 * s * c], [-1 - 1.5 * s * c, -1 + 1.5 * s * s]])


def oex1_gains(t):
    s, c = math.sin(t), math.cos(t)
    return np.array([[-1.5 * c * c], [-1 + 1.5 * s * c]])


def oex1_plant():
    return PlantOde(2, 1, lambda t, w: oex1_matrix(t) @ np.asarray(w, dtype=float),
                    lambda t, w: np.array([w[0]]),
                    lambda t, w: oex1_matrix(t), lambda t, w: np.array([[1.0, 0.0]]),
                    lambda t, w: np.zeros(1), "oex1")


def oex1_plant_closed_form(t, w0):
    """Plant solution: a exp(t/2) (-cos t, sin t) + b exp(-t) (sin t, cos t)."""
    a, b = -float(w0[0]), float(w0[1])
    s, c = math.sin(t), math.cos(t)
    w = a * math.exp(0.5 * t) * np.array([-c, s]) + b * math.exp(-t) * np.array([s, c])
    return w, np.array([w[0]])


def oex1_observer_spec(gains=oex1_gains):
    return ObserverSpec(oex1_plant(), luenberger_injection(gains, "oex1 gains"))


def _build(id):
    if id == "exam1":
        return NamedExample("exam1", exam1_system(), [(np.array([1.0]), np.array([0.0]))],
                            Preset(0.0, NormKind.ONE, MetricTransform.identity(), 0.5, t_end=5.0),
                            exam1_closed_form, "exam1.dae", "reduced flow contracts, z = -w0 e^t does not")
    if id == "exam3":
        return NamedExample("exam3", exam3_system(), [(np.array([1.0]), np.array([0.0]))],
                            Preset(4.0, NormKind.ONE, MetricTransform.identity(), 0.5, t_end=5.0),
                            exam3_closed_form, "exam3.dae", "contracting; gamma = 1 misleads, gamma = 4 does not")
    if id == "smex1":
        return NamedExample("smex1", smex1_system(),
                            [(np.array([3.0, -3.0]), np.array([1.38])), (np.array([-3.0, 3.0]), np.array([-1.38]))],
                            Preset(0.9, NormKind.ONE, MetricTransform.identity(), 0.5, t_end=20.0),
                            None, "smex1.dae", "nonlinear time-varying DAE, mu_1 test with M = I")
    if id == "smex2":
        box = [(1.0, 1.0), (-1.0, -1.0), (-math.pi / 2, math.pi / 2), (0.95, 1.05)]
        return NamedExample("smex2", smex2_system(), [(np.array([0.5, 1.05]), np.array([1.9, 0.8]))],
                            Preset(None, NormKind.ONE, MetricTransform.identity(), 1.1, t_end=15.0, box=box,
                                   grid=101, method="box"),
                            None, "smex2.dae", "inverter on an infinite bus, reduced test on the voltage box",
                            dict(SMEX2_DEFAULTS))
    if id == "oex1_observer":
        return NamedExample("oex1_observer", oex1_observer_spec(),
                            [(np.array([2.0, -2.0]), np.array([-2.0, 2.0]))],
                            Preset(1.0, NormKind.TWO, MetricTransform.exp_scale(1.0), 0.5, t_end=20.0),
                            oex1_plant_closed_form, "oex1_plant.dae",
                            "Luenberger observer for an unstable time-varying plant "
                            "(ics are observer what0, plant w0)")
    raise KeyError(f"unknown example {id!r}; known: {', '.join(EXAMPLE_IDS)}")


EXAMPLE_IDS = ("exam1", "exam3", "smex1", "smex2", "oex1_observer")


def get_example(id):
    return _build(id)


def load_model(text, overrides=None, name="model"):
    """Parse model-file text into a DaeSystem."""
    return DaeSystem.from_model(dsl.parse_model(text, overrides, name))
