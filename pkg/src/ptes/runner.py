"""Run scenarios, persist trajectories and summarize settling."""

from __future__ import annotations

import json
import math
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .analysis import classify_settling, closeness_metric
from .dde import StepError, Trajectory, integrate, suggest_step, validate_step
from .scenario import Scenario, ScenarioError

MAX_ROWS = 200_000


@dataclass
class RunRecord:
    name: str
    algorithm: str
    scenario_hash: str
    step: float
    horizon: float
    n_steps: int
    wall_time: float
    settling: dict
    predicted: dict
    metrics: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, default=_jsonable)


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    raise TypeError(f"cannot serialize {type(v)}")


def _atomic_write(path: Path, write) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            write(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_trajectory_csv(path, times, columns: dict, decimate: int = 1) -> None:
    """Comma-separated trajectory with a header row, ``%.17g`` values."""
    if decimate < 1:
        raise ValueError("decimation factor must be at least 1")
    names = list(columns)
    data = np.column_stack([times] + [np.asarray(columns[c]) for c in names])[::decimate]

    def write(fh):
        fh.write(",".join(["t"] + names) + "\n")
        np.savetxt(fh, data, fmt="%.17g", delimiter=",")

    _atomic_write(Path(path), write)


def read_trajectory_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {name: data[:, k] for k, name in enumerate(header)}


def default_decimation(n_rows: int) -> int:
    return max(1, math.ceil(n_rows / MAX_ROWS))


def simulate(scn: Scenario, step: float | None = None):
    """Integrate a scenario; returns ``(build, trajectory, wall_time)``."""
    build = scn.build()
    h = build.step if step is None else step
    try:
        validate_step(h, build.problem.delays, build.omega_max)
    except StepError as e:
        raise ScenarioError(f"integrator.step: {e}") from None
    t0 = time.perf_counter()
    traj = integrate(build.problem, build.horizon, h, build.omega_max)
    return build, traj, time.perf_counter() - t0


def state_columns(build, traj: Trajectory) -> dict:
    _, X = traj.solution()
    cols = {name: X[:, k] for k, name in enumerate(build.columns)}
    cols.update(build.outputs(traj))
    return cols


def run_scenario(scn: Scenario, out_dir=None, decimate: int | None = None, plot: bool | None = None) -> RunRecord:
    """Run one scenario; with ``out_dir`` write CSV, JSON record and figure."""
    build, traj, wall = simulate(scn)
    t, X = traj.solution()
    settling = build.settling(traj)
    metrics = {"final_state": {name: float(X[-1, k]) for k, name in enumerate(build.columns)}}
    if scn.algorithm == "averaged-scalar" and build.problem.params[1] == 0:
        # delay-free averaged runs: report where (theta~, z) settles relative to T
        metrics["corollary_flag"] = classify_settling(settling["theta_z"], build.predicted["T"])
    rec = RunRecord(scn.name, scn.algorithm, scn.digest, traj.step, traj.t_end, X.shape[0] - 1, wall,
                    settling, build.predicted, metrics)
    if out_dir is None:
        return rec
    out = Path(out_dir)
    cols = state_columns(build, traj)
    if decimate is None:
        decimate = int(scn.config.get("output", {}).get("decimate", 0)) or default_decimation(t.size)
    csv_path = out / f"{scn.name}.csv"
    write_trajectory_csv(csv_path, t, cols, decimate)
    rec.files["trajectory"] = str(csv_path)
    if plot is None:
        plot = bool(scn.config.get("output", {}).get("plot", True))
    if plot:
        from . import plotting
        png = out / f"{scn.name}.png"
        plotting.plot_run(t[::decimate], {k: np.asarray(v)[::decimate] for k, v in cols.items()}, png,
                          title=f"{scn.name} ({scn.algorithm})", marks=build.predicted)
        rec.files["figure"] = str(png)
    rec_path = out / f"{scn.name}.json"
    rec.files["record"] = str(rec_path)
    _atomic_write(rec_path, lambda fh: fh.write(rec.to_json() + "\n"))
    return rec


# -- omega sweep ---------------------------------------------------------------

@dataclass
class SweepPoint:
    omega: float
    step: float
    nu_theta: float
    nu_full: float
    wall_time: float


def _step_for(step: float, delays, omega: float) -> float:
    try:
        validate_step(step, delays, omega)
        return step
    except StepError:
        pass
    h = suggest_step(step, delays, omega)
    if h is None:
        raise ScenarioError("integrator.step: no step fits the delays")
    return h


def _averaged_companion(scn: Scenario) -> Scenario:
    cfg = {k: dict(v) for k, v in scn.config.items() if k in ("map", "timing", "initial", "integrator")}
    cfg["scenario"] = {"algorithm": "averaged-scalar", "name": scn.name + "-averaged"}
    return Scenario.from_dict(cfg, scn.source)


def sweep_point(scn: Scenario, omega: float) -> SweepPoint:
    """Closeness of the full run at ``omega`` to its averaged counterpart."""
    if scn.algorithm != "khv-scalar":
        raise ScenarioError("scenario.algorithm: sweeps need a khv-scalar scenario")
    full = scn.with_overrides(dither={"omega": float(omega)})
    delays = full.build().problem.delays
    h = _step_for(full.build().step, delays, omega)
    t0 = time.perf_counter()
    b, tf, _ = simulate(full, h)
    tfull, Xf = tf.solution()
    plant_H = b.problem.params[2]
    err = Xf - np.array([b.problem.params[1], 0.0, 1.0 / plant_H, plant_H])
    _, ta, _ = simulate(_averaged_companion(full), h)
    tav, Xa = ta.solution()
    horizon = min(tf.t_end, ta.t_end)
    nu_theta = closeness_metric(tfull, err, tav, Xa, horizon, columns=[0])
    nu_full = closeness_metric(tfull, err, tav, Xa, horizon)
    return SweepPoint(float(omega), h, nu_theta, nu_full, time.perf_counter() - t0)


def sweep(scn: Scenario, omegas, out_dir=None, jobs: int = 1) -> list:
    """Sweep the dither frequency; member runs are independent."""
    omegas = [float(w) for w in omegas]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            points = list(pool.map(sweep_point, [scn] * len(omegas), omegas))
    else:
        points = [sweep_point(scn, w) for w in omegas]
    if out_dir is not None:
        def write(fh):
            fh.write("omega,step,nu_theta,nu_full,wall_time\n")
            for p in points:
                fh.write(f"{p.omega:.17g},{p.step:.17g},{p.nu_theta:.17g},{p.nu_full:.17g},{p.wall_time:.6g}\n")
        _atomic_write(Path(out_dir) / f"{scn.name}-sweep.csv", write)
    return points
