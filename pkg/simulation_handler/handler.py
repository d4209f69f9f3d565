import asyncio
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from dotenv import load_dotenv
from pydantic import BaseModel
from tqdm import tqdm
from tqdm.asyncio import tqdm as tqdm_asyncio

from src.analysis import run_checks
from src.config import config_fingerprint, flatten_config, numeric_keys, parse_config
from src.errors import ConfigError, ConfigValidationError, InvariantCheckFailed, SimulationError
from src.initial_conditions import build_initial_state, grid_from_config
from src.model import State
from src.schema import InvariantReport, RunConfig
from src.timestepper import TIMESERIES_COLUMNS, SnapshotDiagnostics, Trajectory, integrate
from utils.file_utils import format_float, read_csv_columns, write_csv, write_jsonl_line

# Load environment variables from .env
load_dotenv()

SUMMARY_COLUMNS = ("value", "exit_code", "final_int_p", "final_z", "decay_rate",
                   "positivity", "n_bound", "z_inequality", "extinction_rate")


class RunOutcome(BaseModel):
    exit_code: int
    reports: List[InvariantReport] = []
    error: Optional[str] = None
    final_int_p: float = math.nan
    final_z: float = math.nan

    def flag(self, name: str) -> str:
        for report in self.reports:
            if report.name == name:
                return "PASS" if report.passed else "FAIL"
        return "NA"

    @property
    def decay_rate(self) -> float:
        for report in self.reports:
            if report.name == "EXTINCTION_RATE":
                return report.worst
        return math.nan


def snapshot_name(t: float) -> str:
    return f"snapshot_{t!r}.csv"


def write_trajectory(traj: Trajectory, out_dir: Path):
    write_csv(out_dir / "timeseries.csv", TIMESERIES_COLUMNS, [d.as_row() for d in traj.diagnostics])
    for state in traj.snapshots:
        write_csv(out_dir / snapshot_name(state.t), ("h", "n", "p"), zip(traj.grid.nodes, state.n, state.p))


def load_trajectory(config: RunConfig, out_dir: Path) -> Trajectory:
    """Rebuild a trajectory from timeseries.csv and the snapshot files of a run directory."""
    grid = grid_from_config(config)
    series = read_csv_columns(out_dir / "timeseries.csv")
    rows = {t: i for i, t in enumerate(series["t"])}

    files = []
    for path in out_dir.glob("snapshot_*.csv"):
        try:
            files.append((float(path.stem[len("snapshot_"):]), path))
        except ValueError:
            logging.warning(f"Skipping {path.name}: no time in the file name")
    traj = Trajectory(grid)
    for t, path in sorted(files):
        if t not in rows:
            logging.warning(f"Skipping {path.name}: no timeseries row for t={t}")
            continue
        columns = read_csv_columns(path)
        if columns["n"].size != grid.M:
            logging.warning(f"Skipping {path.name}: {columns['n'].size} nodes, expected {grid.M}")
            continue
        i = rows[t]
        diagnostics = SnapshotDiagnostics(**{name: float(series[name][i]) for name in TIMESERIES_COLUMNS})
        traj.append(State(columns["n"], columns["p"], diagnostics.z, t), diagnostics)
    if not len(traj):
        raise ConfigError(f"no stored trajectory found in {out_dir}")
    return traj


def write_report(reports: Sequence[InvariantReport], out_dir: Path):
    with open(out_dir / "report.txt", "w", encoding="utf-8") as f:
        for r in reports:
            time = format_float(r.time) if r.time is not None else "nan"
            f.write(f"{r.name} {'PASS' if r.passed else 'FAIL'} worst={format_float(r.worst)} t={time}\n")


def _run_flat(flat: Dict[str, str], output_dir: str, quiet: bool) -> RunOutcome:
    """Validate and run one sweep member. Top level so a process pool can pickle it."""
    try:
        config = parse_config("\n".join(f"{key} = {value}" for key, value in flat.items()))
    except ConfigError as e:
        logging.warning(f"Sweep member in {output_dir} rejected: {e}")
        return RunOutcome(exit_code=e.exit_code, error=str(e))
    return SimulationHandler(config, output_dir=output_dir, quiet=quiet).run()


class SimulationHandler:
    """
    Runs a configuration and writes its result files.
    Usage:
        handler = SimulationHandler(config, output_dir="output")
        handler.run()
        await handler.sweep("params.m_p", ["0.6", "0.8", "1.0"])
        handler.check()
    """
    def __init__(self,
                 config: RunConfig,
                 output_dir: Optional[str] = None,
                 quiet: bool = False,
                 max_workers: Optional[int] = None):
        self.config = config
        self.output_dir = Path(output_dir or config.output.dir)
        self.quiet = quiet
        self.max_workers = max_workers or int(os.getenv("NPZ_MAX_WORKERS", os.cpu_count() or 1))
        self.fingerprint = config_fingerprint(config)

    def _event(self, **record):
        write_jsonl_line(self.output_dir / "events.jsonl", {"run": self.fingerprint, **record})

    def _prepare_output(self):
        self.output_dir.mkdir(parents=True, exist_ok=True)
        for stale in list(self.output_dir.glob("snapshot_*.csv")) + [self.output_dir / "events.jsonl"]:
            stale.unlink(missing_ok=True)

    def _finish(self, traj: Trajectory) -> RunOutcome:
        cfg = self.config
        reports = run_checks(traj, cfg.params, cfg.model.response, cfg.solver.positivity_tol,
                             cfg.analysis.extinction_window_start)
        write_report(reports, self.output_dir)
        passed = all(r.passed for r in reports if r.enforced)
        if not passed:
            failed = ", ".join(r.name for r in reports if r.enforced and not r.passed)
            logging.warning(f"Run {self.fingerprint}: failed checks {failed}")
        final = traj.final
        return RunOutcome(exit_code=0 if passed else InvariantCheckFailed.exit_code, reports=list(reports),
                          final_int_p=traj.grid.integrate(final.p), final_z=final.z)

    def run(self) -> RunOutcome:
        """ Integrate the configuration and write timeseries, snapshots and report. """
        cfg = self.config
        self._prepare_output()
        logging.info(f"Run {self.fingerprint} -> {self.output_dir}")
        try:
            grid = grid_from_config(cfg)
            state0 = build_initial_state(cfg, grid)
            traj = integrate(state0, cfg.params, cfg.model.light, cfg.model.response, grid, cfg.solver,
                             progress=not self.quiet)
        except SimulationError as e:
            logging.error(f"Run {self.fingerprint} failed: {type(e).__name__}: {e}")
            self._event(event="error", type=type(e).__name__, message=str(e))
            if e.trajectory is not None and len(e.trajectory):
                write_trajectory(e.trajectory, self.output_dir)
            return RunOutcome(exit_code=e.exit_code, error=str(e))

        for event in traj.events:
            self._event(**event)
        write_trajectory(traj, self.output_dir)
        return self._finish(traj)

    def check(self) -> RunOutcome:
        """ Rerun the invariant checks on the trajectory stored in the output directory. """
        try:
            traj = load_trajectory(self.config, self.output_dir)
        except SimulationError as e:
            logging.error(f"Cannot rebuild stored trajectory: {e}")
            return RunOutcome(exit_code=e.exit_code, error=str(e))
        except (OSError, KeyError, ValueError) as e:
            logging.error(f"Cannot read stored trajectory in {self.output_dir}: {e}")
            return RunOutcome(exit_code=ConfigError.exit_code, error=str(e))
        return self._finish(traj)

    async def sweep(self, key: str, values: Sequence[str]) -> int:
        """ One run per value of a numeric key, then sweep_summary.csv in value order. """
        if key not in numeric_keys():
            raise ConfigValidationError(key, f"{key} is not a numeric key")
        for value in values:
            try:
                float(value)
            except ValueError:
                raise ConfigValidationError(key, f"sweep value {value!r} is not a number") from None

        self.output_dir.mkdir(parents=True, exist_ok=True)
        base = flatten_config(self.config)
        jobs = []
        for i, value in enumerate(values):
            flat = dict(base)
            flat[key] = value
            jobs.append((flat, str(self.output_dir / f"run_{i:03d}"), True))
        logging.info(f"Sweeping {key} over {list(values)} with up to {self.max_workers} workers")

        if self.max_workers <= 1:
            outcomes = [_run_flat(*job) for job in tqdm(jobs, desc="Sweep", unit="run", disable=self.quiet)]
        else:
            loop = asyncio.get_running_loop()
            with ProcessPoolExecutor(max_workers=min(self.max_workers, len(jobs))) as pool:
                tasks = [loop.run_in_executor(pool, _run_flat, *job) for job in jobs]
                outcomes = await tqdm_asyncio.gather(*tasks, desc="Sweep", unit="run", disable=self.quiet)

        rows = []
        for value, outcome in zip(values, outcomes):
            rows.append((value, outcome.exit_code, outcome.final_int_p, outcome.final_z, outcome.decay_rate,
                         outcome.flag("POSITIVITY"), outcome.flag("N_BOUND"), outcome.flag("Z_INEQUALITY"),
                         outcome.flag("EXTINCTION_RATE")))
        write_csv(self.output_dir / "sweep_summary.csv", SUMMARY_COLUMNS, rows)

        codes = [o.exit_code for o in outcomes]
        logging.info(f"Sweep finished: exit codes {codes}")
        return next((c for c in codes if c != 0), 0)
