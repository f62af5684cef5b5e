"""Declarative run scenarios in TOML.

A scenario names an algorithm and lists its parameters in sections::

    [scenario]   algorithm, name
    [map]        y_star, theta_star, H_star, D
    [dither]     a, omega, ratios, use_map_delay
    [timing]     T_star | T, zeta0, xi0
    [initial]    theta_hat, z, Gamma, H_hat
    [baseline]   c, K, w_r
    [lemma1]     x0, v_breaks, v_values
    [integrator] step, horizon
    [output]     decimate, settling_tol, plot

Unknown sections or keys are rejected, as are keys the chosen algorithm does
not use.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import analysis as an
from . import estimators as es
from .dde import RfdeProblem, Trajectory
from .plant import QuadraticMapMulti, QuadraticMapScalar
from .signals import (DitherSpecMulti, DitherSpecScalar, FrequencyError, GainSchedule, delta_phase,
                      k2t_kernel, kt_kernel, lt_kernel)

ALGORITHMS = ("khv-scalar", "khv-multi", "baseline", "delay-free-alt", "lemma1-demo",
              "averaged-scalar", "averaged-multi", "averaged-alt")

# section -> key -> algorithms that accept it ("*" = all that use the section)
_ALL = "*"
SCHEMA = {
    "scenario": {"algorithm": _ALL, "name": _ALL},
    "map": {"y_star": _ALL, "theta_star": _ALL, "H_star": _ALL, "D": _ALL},
    "dither": {"a": _ALL, "omega": _ALL, "ratios": ("khv-multi",), "use_map_delay": ("delay-free-alt",)},
    "timing": {"T_star": _ALL, "T": _ALL, "zeta0": _ALL, "xi0": _ALL},
    "initial": {"theta_hat": _ALL, "z": _ALL, "Gamma": _ALL, "H_hat": _ALL},
    "baseline": {"c": _ALL, "K": _ALL, "w_r": _ALL},
    "lemma1": {"x0": _ALL, "v_breaks": _ALL, "v_values": _ALL},
    "integrator": {"step": _ALL, "horizon": _ALL},
    "output": {"decimate": _ALL, "settling_tol": _ALL, "plot": _ALL},
}

SECTIONS_BY_ALGORITHM = {
    "khv-scalar": {"scenario", "map", "dither", "timing", "initial", "integrator", "output"},
    "khv-multi": {"scenario", "map", "dither", "timing", "initial", "integrator", "output"},
    "baseline": {"scenario", "map", "dither", "baseline", "initial", "integrator", "output"},
    "delay-free-alt": {"scenario", "map", "dither", "timing", "initial", "integrator", "output"},
    "lemma1-demo": {"scenario", "timing", "lemma1", "integrator", "output"},
    "averaged-scalar": {"scenario", "map", "timing", "initial", "integrator", "output"},
    "averaged-multi": {"scenario", "map", "timing", "initial", "integrator", "output"},
    "averaged-alt": {"scenario", "map", "timing", "initial", "integrator", "output"},
}

REQUIRED = {
    "map": ("y_star", "theta_star", "H_star"),
    "dither": ("a", "omega"),
    "initial": ("theta_hat", "Gamma"),
    "baseline": ("c", "K", "w_r"),
    "lemma1": ("x0",),
    "integrator": ("step", "horizon"),
}


class ScenarioError(ValueError):
    """Invalid scenario; the message names the offending field."""


@dataclass
class Build:
    """Everything a runner needs for one scenario."""

    problem: RfdeProblem
    columns: list
    horizon: float
    step: float
    omega_max: float | None
    outputs: Callable[[Trajectory], dict]
    settling: Callable[[Trajectory], dict]
    predicted: dict = field(default_factory=dict)
    settling_tol: float = 0.1


def _num(cfg, path, key, default=None, required=False):
    sec = cfg.get(path, {})
    if key not in sec:
        if required:
            raise ScenarioError(f"{path}.{key}: missing")
        return default
    v = sec[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"{path}.{key}: expected a number, got {v!r}")
    if not math.isfinite(v):
        raise ScenarioError(f"{path}.{key}: must be finite")
    return float(v)


def _arr(cfg, path, key, shape=None, default=None, required=False):
    sec = cfg.get(path, {})
    if key not in sec:
        if required:
            raise ScenarioError(f"{path}.{key}: missing")
        return default
    try:
        a = np.asarray(sec[key], dtype=float)
    except (TypeError, ValueError):
        raise ScenarioError(f"{path}.{key}: expected numbers, got {sec[key]!r}") from None
    if shape is not None and a.shape != shape:
        raise ScenarioError(f"{path}.{key}: expected shape {shape}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ScenarioError(f"{path}.{key}: must be finite")
    return a


@dataclass
class Scenario:
    config: dict
    source: str = ""

    @classmethod
    def from_dict(cls, config: dict, source: str = "") -> "Scenario":
        scn = cls(copy.deepcopy(config), source)
        scn.validate()
        return scn

    @property
    def algorithm(self) -> str:
        return self.config["scenario"]["algorithm"]

    @property
    def name(self) -> str:
        return str(self.config["scenario"].get("name", self.algorithm))

    @property
    def digest(self) -> str:
        canon = json.dumps(self.config, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    def with_overrides(self, **sections) -> "Scenario":
        cfg = copy.deepcopy(self.config)
        for sec, vals in sections.items():
            cfg.setdefault(sec, {}).update(vals)
        return Scenario.from_dict(cfg, self.source)

    # -- validation ---------------------------------------------------------

    def validate(self) -> None:
        cfg = self.config
        if "scenario" not in cfg or "algorithm" not in cfg["scenario"]:
            raise ScenarioError("scenario.algorithm: missing")
        alg = cfg["scenario"]["algorithm"]
        if alg not in ALGORITHMS:
            raise ScenarioError(f"scenario.algorithm: unknown algorithm {alg!r} (choose from {', '.join(ALGORITHMS)})")
        allowed = SECTIONS_BY_ALGORITHM[alg]
        for sec, body in cfg.items():
            if sec not in SCHEMA:
                raise ScenarioError(f"{sec}: unknown section")
            if sec not in allowed:
                raise ScenarioError(f"{sec}: not used by algorithm {alg!r}")
            if not isinstance(body, dict):
                raise ScenarioError(f"{sec}: expected a table")
            for key in body:
                users = SCHEMA[sec].get(key)
                if users is None:
                    raise ScenarioError(f"{sec}.{key}: unknown key")
                if users != _ALL and alg not in users:
                    raise ScenarioError(f"{sec}.{key}: not used by algorithm {alg!r}")
        for sec, keys in REQUIRED.items():
            if sec in allowed:
                for key in keys:
                    if sec == "map" and alg.startswith("averaged") and key == "y_star":
                        continue
                    if key not in cfg.get(sec, {}):
                        raise ScenarioError(f"{sec}.{key}: missing")
        timing = cfg.get("timing", {})
        if "timing" in allowed:
            if ("T" in timing) == ("T_star" in timing):
                raise ScenarioError("timing: give exactly one of T and T_star")
        # building checks every value
        self.build()

    # -- pieces -------------------------------------------------------------

    def _schedule(self, D: float):
        cfg = self.config
        zeta0 = _arr(cfg, "timing", "zeta0", (2,), default=np.array([0.0, 1.0]))
        xi0 = _arr(cfg, "timing", "xi0", (2,), default=np.array([0.0, 1.0]))
        try:
            dz, dx = delta_phase(*zeta0), delta_phase(*xi0)
        except ValueError as e:
            raise ScenarioError(f"timing.zeta0/xi0: {e}") from None
        T = _num(cfg, "timing", "T")
        if T is not None:
            if not T > 0:
                raise ScenarioError("timing.T: must be positive")
            return GainSchedule(T, dz, dx), None
        T_star = _num(cfg, "timing", "T_star")
        try:
            tim = es.select_T(D, dz, dx, T_star)
        except ValueError as e:
            raise ScenarioError(f"timing.T_star: {e}") from None
        return tim.schedule, tim

    def _scalar_map(self):
        cfg = self.config
        H = _num(cfg, "map", "H_star", required=True)
        if H == 0:
            raise ScenarioError("map.H_star: must be nonzero")
        D = _num(cfg, "map", "D", default=0.0)
        if D < 0:
            raise ScenarioError("map.D: must be nonnegative")
        return QuadraticMapScalar(_num(cfg, "map", "y_star", default=0.0),
                                  _num(cfg, "map", "theta_star", required=True), H, D)

    def _multi_map(self):
        cfg = self.config
        th = _arr(cfg, "map", "theta_star", required=True).reshape(-1)
        H = _arr(cfg, "map", "H_star", (th.size, th.size), required=True)
        if _num(cfg, "map", "D", default=0.0) != 0:
            raise ScenarioError("map.D: the vector map is delay-free")
        try:
            return QuadraticMapMulti(_num(cfg, "map", "y_star", default=0.0), th, H)
        except ValueError as e:
            raise ScenarioError(f"map.H_star: {e}") from None

    def _integrator(self):
        step = _num(self.config, "integrator", "step", required=True)
        horizon = _num(self.config, "integrator", "horizon", required=True)
        if not step > 0:
            raise ScenarioError("integrator.step: must be positive")
        if not horizon > 0:
            raise ScenarioError("integrator.horizon: must be positive")
        return step, horizon

    def _tol(self, default):
        tol = _num(self.config, "output", "settling_tol", default=default)
        if not tol > 0:
            raise ScenarioError("output.settling_tol: must be positive")
        return tol

    # -- build --------------------------------------------------------------

    def build(self) -> Build:
        try:
            return getattr(self, "_build_" + self.algorithm.replace("-", "_"))()
        except ScenarioError:
            raise
        except FrequencyError as e:
            raise ScenarioError(f"dither.ratios: {e}") from None
        except ValueError as e:
            raise ScenarioError(str(e)) from None

    def _build_khv_scalar(self) -> Build:
        cfg = self.config
        plant = self._scalar_map()
        dither = DitherSpecScalar(_num(cfg, "dither", "a"), _num(cfg, "dither", "omega"), plant.D)
        sched, tim = self._schedule(plant.D)
        G0 = _num(cfg, "initial", "Gamma")
        if G0 == 0:
            raise ScenarioError("initial.Gamma: must be nonzero")
        init = es.KhvScalarState(_num(cfg, "initial", "theta_hat"), _num(cfg, "initial", "z", default=0.0),
                                 G0, _num(cfg, "initial", "H_hat"))
        step, horizon = self._integrator()
        tol = self._tol(0.1)

        def settling(traj):
            t, X = traj.solution()
            return {"theta": an.settling_time(t, np.abs(X[:, 0] - plant.theta_star), tol),
                    "Gamma": an.settling_time(t, np.abs(X[:, 2] - 1 / plant.H_star), tol)}

        return Build(es.khv_scalar_problem(plant, dither, sched, init), ["theta_hat", "z", "Gamma", "H_hat"],
                     horizon, step, dither.omega,
                     lambda traj: es.khv_scalar_outputs(traj, plant, dither, sched), settling,
                     _predicted(sched, tim), tol)

    def _build_khv_multi(self) -> Build:
        cfg = self.config
        plant = self._multi_map()
        n = plant.n
        a = _arr(cfg, "dither", "a", required=True).reshape(-1)
        if a.size == 1:
            a = np.repeat(a, n)
        ratios = cfg["dither"].get("ratios", [1] * n)
        if len(ratios) != n or len(a) != n:
            raise ScenarioError(f"dither: need {n} amplitudes and ratios")
        try:
            ratios = [r if isinstance(r, int) else str(r) for r in ratios]
            dither = DitherSpecMulti(tuple(a), _num(cfg, "dither", "omega"), tuple(ratios))
        except FrequencyError:
            raise
        except ValueError as e:
            raise ScenarioError(f"dither: {e}") from None
        sched, tim = self._schedule(0.0)
        init = self._multi_initial(n)
        step, horizon = self._integrator()
        tol = self._tol(0.15)
        lay = es.multi_layout(n)
        H_inv = np.linalg.inv(plant.H_star).ravel()

        def settling(traj):
            t, X = traj.solution()
            return {"theta": an.settling_time(t, np.linalg.norm(X[:, lay["theta_hat"]] - plant.theta_star, axis=1), tol),
                    "Gamma": an.settling_time(t, np.linalg.norm(X[:, lay["Gamma"]] - H_inv, axis=1), tol)}

        cols = ([f"theta_hat_{i + 1}" for i in range(n)] + [f"z_{i + 1}" for i in range(n)]
                + [f"Gamma_{i + 1}{j + 1}" for i in range(n) for j in range(n)]
                + [f"H_hat_{i + 1}{j + 1}" for i in range(n) for j in range(n)])
        return Build(es.khv_multi_problem(plant, dither, sched, init), cols, horizon, step,
                     float(dither.omegas.max()), lambda traj: es.khv_multi_outputs(traj, plant, dither, sched),
                     settling, _predicted(sched, tim), tol)

    def _multi_initial(self, n):
        cfg = self.config
        G = _arr(cfg, "initial", "Gamma", (n, n), required=True)
        if abs(np.linalg.det(G)) < 1e-14:
            raise ScenarioError("initial.Gamma: must be invertible")
        return es.KhvMultiState(_arr(cfg, "initial", "theta_hat", (n,), required=True),
                                _arr(cfg, "initial", "z", (n,), default=np.zeros(n)), G,
                                _arr(cfg, "initial", "H_hat", (n, n)))

    def _build_baseline(self) -> Build:
        cfg = self.config
        plant = self._scalar_map()
        dither = DitherSpecScalar(_num(cfg, "dither", "a"), _num(cfg, "dither", "omega"), plant.D)
        gains = es.BaselineGains(_num(cfg, "baseline", "c"), _num(cfg, "baseline", "K"), _num(cfg, "baseline", "w_r"))
        init = es.BaselineState(_num(cfg, "initial", "theta_hat"), _num(cfg, "initial", "z", default=0.0),
                                _num(cfg, "initial", "Gamma"))
        step, horizon = self._integrator()
        tol = self._tol(0.1)

        def settling(traj):
            t, X = traj.solution()
            return {"theta": an.settling_time(t, np.abs(X[:, 0] - plant.theta_star), tol)}

        return Build(es.baseline_problem(plant, dither, gains, init), ["theta_hat", "z", "Gamma"], horizon, step,
                     dither.omega, lambda traj: es.baseline_outputs(traj, plant, dither), settling, {}, tol)

    def _build_delay_free_alt(self) -> Build:
        cfg = self.config
        plant = self._scalar_map()
        use_map_delay = bool(cfg["dither"].get("use_map_delay", False))
        sched, tim = self._schedule(0.0)
        dither = DitherSpecScalar(_num(cfg, "dither", "a"), _num(cfg, "dither", "omega"), sched.T)
        init = es.AltState(_num(cfg, "initial", "theta_hat"), _num(cfg, "initial", "Gamma"),
                           _num(cfg, "initial", "H_hat"))
        step, horizon = self._integrator()
        tol = self._tol(0.1)

        def outputs(traj):
            t, _ = traj.solution()
            lag = int(round(sched.T / traj.step))
            th = traj.states[traj.n_history - lag: traj.states.shape[0] - lag, 0]
            return {"y": plant(th + dither.a * np.sin(dither.omega * t)),
                    "theta": traj.states[traj.n_history:, 0] + dither.a * np.sin(dither.omega * (t + sched.T)),
                    **_gains(sched, t)}

        def settling(traj):
            t, X = traj.solution()
            return {"theta": an.settling_time(t, np.abs(X[:, 0] - plant.theta_star), tol)}

        return Build(es.delay_free_alt_problem(plant, dither, sched, init, use_map_delay),
                     ["theta_hat", "Gamma", "H_hat"], horizon, step, dither.omega, outputs, settling,
                     {"t_theta": 10 * sched.T, "t_hessian": 8 * sched.T}, tol)

    def _build_lemma1_demo(self) -> Build:
        cfg = self.config
        sched, _ = self._schedule(0.0)
        x0 = _num(cfg, "lemma1", "x0")
        breaks = cfg["lemma1"].get("v_breaks", [0.0])
        values = cfg["lemma1"].get("v_values", [0.0])
        try:
            v = es.PiecewiseConstant(tuple(breaks), tuple(values))
        except (TypeError, ValueError) as e:
            raise ScenarioError(f"lemma1.v_breaks/v_values: {e}") from None
        step, horizon = self._integrator()
        tol = self._tol(1e-9)

        def outputs(traj):
            t, _ = traj.solution()
            lag = int(round(sched.T / traj.step))
            xl = traj.states[traj.n_history - lag: traj.states.shape[0] - lag, 0]
            KT = kt_kernel(t, sched.T, sched.delta_zeta)
            return {"u": -KT * xl, "v": v(t), "K_T": KT}

        def settling(traj):
            t, X = traj.solution()
            return {"x": an.settling_time(t, np.abs(X[:, 0]), tol)}

        nz = [b for b, val in zip(v.breaks, v.values) if val != 0]
        t_vanish = max((b2 for b1, b2 in zip(v.breaks, v.breaks[1:]) if b1 in nz), default=0.0)
        predicted = {}
        if v.values[-1] == 0:
            predicted["t_x"] = an.deadbeat_time(an.IssParams(sched.T, sched.delta_zeta), t_vanish)
        return Build(es.lemma1_problem(sched, x0, v), ["x"], horizon, step, None, outputs, settling, predicted, tol)

    def _build_averaged_scalar(self) -> Build:
        cfg = self.config
        plant = self._scalar_map()
        sched, tim = self._schedule(plant.D)
        G0 = _num(cfg, "initial", "Gamma")
        H0 = _num(cfg, "initial", "H_hat", default=1.0 / G0)
        init = an.AveragedScalarState.from_estimates(_num(cfg, "initial", "theta_hat"),
                                                     _num(cfg, "initial", "z", default=0.0), G0, H0,
                                                     plant.theta_star, plant.H_star)
        step, horizon = self._integrator()
        tol = self._tol(1e-6)

        def settling(traj):
            t, X = traj.solution()
            return {"theta_z": an.settling_time(t, np.hypot(X[:, 0], X[:, 1]), tol),
                    "H": an.settling_time(t, np.abs(X[:, 3]), tol)}

        def outputs(traj):
            t, X = traj.solution()
            return {"y": plant.y_star + 0.5 * plant.H_star * X[:, 0] ** 2, "theta": X[:, 0] + plant.theta_star,
                    **_gains(sched, t)}

        return Build(an.averaged_scalar_problem(plant.H_star, plant.D, sched, init),
                     ["theta_err", "z", "Gamma_err", "H_err"], horizon, step, None, outputs, settling,
                     _predicted(sched, tim), tol)

    def _build_averaged_multi(self) -> Build:
        plant = self._multi_map()
        n = plant.n
        sched, tim = self._schedule(0.0)
        init = self._multi_initial(n)
        x0 = an.averaged_multi_initial(init.theta_hat, init.z, init.Gamma, init.H_hat, plant.theta_star,
                                       plant.H_star)
        step, horizon = self._integrator()
        tol = self._tol(1e-6)
        lay = es.multi_layout(n)

        def settling(traj):
            t, X = traj.solution()
            return {"theta_z": an.settling_time(t, np.linalg.norm(X[:, :2 * n], axis=1), tol),
                    "H": an.settling_time(t, np.linalg.norm(X[:, lay["H_hat"]], axis=1), tol)}

        def outputs(traj):
            t, X = traj.solution()
            e = X[:, :n]
            out = {"y": plant.y_star + 0.5 * np.einsum("ki,ij,kj->k", e, plant.H_star, e)}
            for i in range(n):
                out[f"theta_{i + 1}"] = e[:, i] + plant.theta_star[i]
            return {**out, **_gains(sched, t)}

        cols = ([f"theta_err_{i + 1}" for i in range(n)] + [f"z_{i + 1}" for i in range(n)]
                + [f"Gamma_err_{i + 1}{j + 1}" for i in range(n) for j in range(n)]
                + [f"H_err_{i + 1}{j + 1}" for i in range(n) for j in range(n)])
        return Build(an.averaged_multi_problem(plant.H_star, sched, x0), cols, horizon, step, None, outputs,
                     settling, _predicted(sched, tim), tol)

    def _build_averaged_alt(self) -> Build:
        cfg = self.config
        plant = self._scalar_map()
        sched, _ = self._schedule(0.0)
        G0 = _num(cfg, "initial", "Gamma")
        H0 = _num(cfg, "initial", "H_hat", default=1.0 / G0)
        x0 = [_num(cfg, "initial", "theta_hat") - plant.theta_star, G0 - 1 / plant.H_star, H0 - plant.H_star]
        step, horizon = self._integrator()
        tol = self._tol(1e-6)

        def settling(traj):
            t, X = traj.solution()
            return {"theta": an.settling_time(t, np.abs(X[:, 0]), tol), "H": an.settling_time(t, np.abs(X[:, 2]), tol)}

        def outputs(traj):
            t, X = traj.solution()
            return {"theta": X[:, 0] + plant.theta_star, **_gains(sched, t)}

        return Build(an.averaged_alt_problem(plant.H_star, sched, x0), ["theta_err", "Gamma_err", "H_err"],
                     horizon, step, None, outputs, settling, {"t_theta": 10 * sched.T, "t_hessian": 8 * sched.T}, tol)


def _gains(sched, t):
    return {"K_T": kt_kernel(t, sched.T, sched.delta_zeta), "L_T": lt_kernel(t, sched.T, sched.delta_zeta),
            "K_2T": k2t_kernel(t, sched.T, sched.delta_xi)}


def _predicted(sched, tim) -> dict:
    if tim is None:
        tim = es.KhvTiming(sched.T, sched.delta_zeta, sched.delta_xi, float("nan"), 0.0,
                           es.timing._ceil_term(sched.delta_zeta, sched.delta_xi))
        st = es.settling_times(tim)
        return {"T": sched.T, "t_hessian": st.t_hessian, "tau1": st.tau1, "tau2": st.tau2}
    st = tim.settling
    return {"T": sched.T, "t_hessian": st.t_hessian, "t_theta": st.t_theta, "tau1": st.tau1, "tau2": st.tau2}


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioError(f"{path}: {e.strerror}") from None
    try:
        cfg = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ScenarioError(f"{path}: {e}") from None
    return Scenario.from_dict(cfg, str(path))
