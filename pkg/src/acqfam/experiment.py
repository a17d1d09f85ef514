"""Monte Carlo experiments: repeated runs, traces on disk and summaries.

Directory layout written by :func:`run_experiment`::

    OUT/
      experiment.json                   experiment settings, version, wall time
      summary.csv                       one row per (problem, acquisition)
      ranks.csv                         best acquisition per problem and statistic
      aggregate/<PROBLEM>__<ACQ>.csv    mean best-so-far plus one column per run
      runs/<PROBLEM>/<ACQ>/cell.json    acquisition parameters and budget
      runs/<PROBLEM>/<ACQ>/rep_0000.csv trace of one run (or rep_0000.failed)

Everything in ``summary.csv``, ``ranks.csv`` and ``aggregate/`` is recomputed
from the files under ``runs/`` alone.
"""

from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import asdict, dataclass, field
import hashlib
import json
import logging
import math
import os
from pathlib import Path
import time

import numpy as np

from . import __version__
from .acquisition import FamilyParams, preset_name
from .engine import OptimizerConfig, RunConfig, run_bo
from .testbed import get_problem

log = logging.getLogger(__name__)

STATISTICS = ("average_final", "sd_final", "best_final", "worst_final")
SUMMARY_HEADER = ("problem", "acquisition", "label", "repetitions", "failures") + STATISTICS


class TraceFormatError(ValueError):
    """A trace file on disk does not have the expected layout."""


def fmt(value):
    """Print a float with enough digits to read back the same double."""
    return f"{float(value):.17g}"


def family_label(params):
    """Conventional name of a family member, or ``"family"``."""
    u, v, w, beta = params.u, params.v, params.w, params.beta
    if u == 0 and (beta == 0 or v == 0):
        # a constant offset does not move the argmax
        return {0: "PI", 1: "EI", 2: "PEI"}.get(w, f"PEI(w={w})")
    if w == 1 and u == 0 and beta < 0:
        return "VEI" if v == 1 else f"VEI(v={v:g})"
    if w == 1 and u == 0 and beta > 0:
        return "UEI" if v == 0.5 else f"UEI(v={v:g})"
    if w == 1 and u > 0 and (beta == 0 or v == 0):
        return "SEI" if u == 0.5 else f"SEI(u={u:g})"
    return "family"


@dataclass(frozen=True)
class AcquisitionSpec:
    """One acquisition setting in an experiment.

    ``name`` identifies the setting (directory names, seeds); ``label`` is
    its conventional name.
    """

    name: str
    params: FamilyParams
    label: str

    @classmethod
    def parse(cls, text):
        params = FamilyParams.parse(text)
        if "," not in text:
            name = text.strip().upper()
            return cls(name, params, name)
        return cls(params.slug, params, preset_name(params) or family_label(params))

    @classmethod
    def from_params(cls, params):
        return cls(params.slug, params, family_label(params))


@dataclass(frozen=True)
class ExperimentSpec:
    problems: tuple
    acquisitions: tuple
    outdir: Path
    repetitions: int = 100
    n_init: int = 10
    n_sequential: int = 490
    base_seed: int = 0
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    fit_starts: int = 8
    refit_every: int = 1

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        probs = tuple(get_problem(p).name for p in self.problems)
        acqs = tuple(a if isinstance(a, AcquisitionSpec) else AcquisitionSpec.parse(a) for a in self.acquisitions)
        if not probs or not acqs:
            raise ValueError("need at least one problem and one acquisition")
        if len({a.name for a in acqs}) != len(acqs):
            raise ValueError("acquisition names must be unique")
        object.__setattr__(self, "problems", probs)
        object.__setattr__(self, "acquisitions", acqs)
        object.__setattr__(self, "outdir", Path(self.outdir))

    def to_dict(self):
        return {
            "problems": list(self.problems),
            "acquisitions": [
                {"name": a.name, "label": a.label, "params": asdict(a.params)} for a in self.acquisitions
            ],
            "repetitions": self.repetitions,
            "n_init": self.n_init,
            "n_sequential": self.n_sequential,
            "base_seed": self.base_seed,
            "optimizer": asdict(self.optimizer),
            "fit_starts": self.fit_starts,
            "refit_every": self.refit_every,
        }


@dataclass(frozen=True)
class SummaryRow:
    problem: str
    acquisition: str
    label: str
    repetitions: int
    failures: int
    average_final: float
    sd_final: float
    best_final: float
    worst_final: float


def run_seed(base_seed, problem, acquisition, repetition):
    """Deterministic 64-bit seed of one run of the grid."""
    text = f"{int(base_seed)}|{problem}|{acquisition}|{int(repetition)}"
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "little")


def cell_dir(outdir, problem, acquisition):
    return Path(outdir) / "runs" / problem / acquisition


def trace_path(outdir, problem, acquisition, repetition):
    return cell_dir(outdir, problem, acquisition) / f"rep_{repetition:04d}.csv"


def write_trace(path, trace):
    d = trace.inputs.shape[1]
    tmp = path.with_suffix(".tmp")
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter"] + [f"x{j + 1}" for j in range(d)] + ["y", "best"])
        for rec in trace.records:
            w.writerow([rec.iteration] + [fmt(v) for v in rec.x] + [fmt(rec.y), fmt(rec.best)])
    os.replace(tmp, path)


def read_trace(path):
    """Read a trace CSV; returns ``(inputs, outputs, best)`` arrays.

    Raises
    ------
    TraceFormatError
        With the file and line of the first problem found.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise TraceFormatError(f"{path}:1: empty trace file")
    header = rows[0]
    d = len(header) - 3
    expected = ["iter"] + [f"x{j + 1}" for j in range(d)] + ["y", "best"]
    if d < 1 or header != expected:
        raise TraceFormatError(f"{path}:1: bad header {header!r}")
    if len(rows) < 2:
        raise TraceFormatError(f"{path}:2: trace has no records")
    data = np.empty((len(rows) - 1, d + 2))
    running = math.inf
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != d + 3:
            raise TraceFormatError(f"{path}:{i}: expected {d + 3} fields, got {len(row)}")
        try:
            it = int(row[0])
            vals = [float(v) for v in row[1:]]
        except ValueError as err:
            raise TraceFormatError(f"{path}:{i}: {err}") from None
        if it != i - 1:
            raise TraceFormatError(f"{path}:{i}: iteration {it} out of sequence")
        if not all(math.isfinite(v) for v in vals):
            raise TraceFormatError(f"{path}:{i}: non-finite value")
        running = min(running, vals[d])
        if vals[d + 1] != running:
            raise TraceFormatError(f"{path}:{i}: best column is not the running minimum")
        data[i - 2] = vals
    return data[:, :d], data[:, d], data[:, d + 1]


def _execute(task):
    # runs in a worker process; returns (path, error message or None)
    path, config = task
    path = Path(path)
    failed = path.with_suffix(".failed")
    try:
        trace = run_bo(config)
    except Exception as err:  # recorded, the grid carries on
        if path.exists():
            path.unlink()
        failed.write_text(f"{type(err).__name__}: {err}\n")
        return str(path), str(err)
    write_trace(path, trace)
    if failed.exists():
        failed.unlink()
    return str(path), None


def _valid_trace(path):
    try:
        read_trace(path)
    except (OSError, TraceFormatError):
        return False
    return True


def run_experiment(spec, workers=1, resume=False):
    """Run every (problem, acquisition, repetition) of ``spec``.

    Runs are independent tasks; with ``workers > 1`` they execute in a
    process pool. Each writes its own trace file, and the summary is
    computed afterwards from the files on disk, so outputs do not depend on
    scheduling. With ``resume`` existing valid traces are kept.

    Returns
    -------
    list of SummaryRow
    """
    t0 = time.perf_counter()
    out = spec.outdir
    tasks = []
    for pname in spec.problems:
        problem = get_problem(pname)
        for acq in spec.acquisitions:
            cdir = cell_dir(out, pname, acq.name)
            cdir.mkdir(parents=True, exist_ok=True)
            if not resume:
                for stale in cdir.glob("rep_*"):
                    stale.unlink()
            cell = {
                "problem": pname,
                "acquisition": acq.name,
                "label": acq.label,
                "params": asdict(acq.params),
                "n_init": spec.n_init,
                "n_sequential": spec.n_sequential,
                "repetitions": spec.repetitions,
            }
            (cdir / "cell.json").write_text(json.dumps(cell, indent=2, sort_keys=True) + "\n")
            for rep in range(spec.repetitions):
                path = trace_path(out, pname, acq.name, rep)
                if resume and _valid_trace(path):
                    continue
                config = RunConfig(
                    problem=problem,
                    params=acq.params,
                    n_init=spec.n_init,
                    n_sequential=spec.n_sequential,
                    seed=run_seed(spec.base_seed, pname, acq.name, rep),
                    optimizer=spec.optimizer,
                    fit_starts=spec.fit_starts,
                    refit_every=spec.refit_every,
                )
                tasks.append((str(path), config))

    log.info("%d runs to execute", len(tasks))
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_execute, tasks))
    else:
        results = [_execute(t) for t in tasks]
    for path, err in results:
        if err is not None:
            log.warning("run %s failed: %s", path, err)

    rows = summarize(out)
    meta = {
        "software": "acqfam",
        "version": __version__,
        "spec": spec.to_dict(),
        "workers": workers,
        "resume": resume,
        "runs_executed": len(tasks),
        "runs_failed": sum(err is not None for _, err in results),
        "wall_time_seconds": time.perf_counter() - t0,
    }
    (out / "experiment.json").write_text(json.dumps(meta, indent=2) + "\n")
    return rows


def sweep_cells(group):
    """Parameter grid of one of the three family sweeps.

    1. ``u = beta = 0`` and ``w`` in 0..3.
    2. ``w = 1``, ``u = 0`` and ``(beta, v)`` in {-0.5, 0, 2} x {0, 0.5, 1}.
    3. ``w = 1``, ``beta = 2`` and ``(u, v)`` in {0, 0.5, 1} x {0, 0.5, 1}.
    """
    if group == 1:
        params = [FamilyParams(u=0, v=0, w=w, beta=0) for w in (0, 1, 2, 3)]
    elif group == 2:
        params = [FamilyParams(u=0, v=v, w=1, beta=b) for b in (-0.5, 0.0, 2.0) for v in (0.0, 0.5, 1.0)]
    elif group == 3:
        params = [FamilyParams(u=u, v=v, w=1, beta=2.0) for u in (0.0, 0.5, 1.0) for v in (0.0, 0.5, 1.0)]
    else:
        raise ValueError(f"sweep group must be 1, 2 or 3, got {group!r}")
    return [AcquisitionSpec.from_params(p) for p in params]


def sweep_family(group, problems, repetitions, n_init, n_sequential, seed, outdir, workers=1, resume=False, **kwargs):
    """Run one parameter sweep over ``problems``; see :func:`sweep_cells`."""
    spec = ExperimentSpec(
        problems=tuple(problems),
        acquisitions=tuple(sweep_cells(group)),
        outdir=outdir,
        repetitions=repetitions,
        n_init=n_init,
        n_sequential=n_sequential,
        base_seed=seed,
        **kwargs,
    )
    return run_experiment(spec, workers=workers, resume=resume)


def _stats(finals):
    finals = np.asarray(finals, dtype=float)
    if finals.size == 0:
        return (math.nan,) * 4
    sd = float(np.std(finals, ddof=1)) if finals.size > 1 else 0.0
    return float(np.mean(finals)), sd, float(finals.min()), float(finals.max())


def _write_csv(path, header, rows):
    tmp = path.with_suffix(".tmp")
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    os.replace(tmp, path)


def rank_report(rows):
    """Best acquisition(s) per problem for each statistic (lower is better)."""
    report = []
    for problem in dict.fromkeys(r.problem for r in rows):
        group = [r for r in rows if r.problem == problem and r.repetitions > 0]
        for stat in STATISTICS:
            if not group:
                continue
            best = min(getattr(r, stat) for r in group)
            winners = [r.acquisition for r in group if getattr(r, stat) == best]
            report.append((problem, stat, ";".join(winners), best))
    return report


def summarize(directory):
    """Recompute summary, aggregate traces and rank report from disk.

    Writes ``summary.csv``, ``ranks.csv`` and ``aggregate/*.csv`` under
    ``directory`` and returns the summary rows, ordered by problem and then
    acquisition name.
    """
    directory = Path(directory)
    runs = directory / "runs"
    if not runs.is_dir():
        raise FileNotFoundError(f"{runs} does not exist")
    agg_dir = directory / "aggregate"
    agg_dir.mkdir(exist_ok=True)

    rows = []
    for pdir in sorted(p for p in runs.iterdir() if p.is_dir()):
        for cdir in sorted(c for c in pdir.iterdir() if c.is_dir()):
            meta_path = cdir / "cell.json"
            label = json.loads(meta_path.read_text())["label"] if meta_path.exists() else cdir.name
            traces = sorted(cdir.glob("rep_*.csv"))
            failures = len(list(cdir.glob("rep_*.failed")))
            finals, bests, names = [], [], []
            for path in traces:
                _, y, best = read_trace(path)
                finals.append(best[-1])
                bests.append(best)
                names.append(path.stem)
            stats = _stats(finals)
            rows.append(SummaryRow(pdir.name, cdir.name, label, len(finals), failures, *stats))

            if bests:
                lengths = {len(b) for b in bests}
                if len(lengths) != 1:
                    raise TraceFormatError(f"{cdir}: traces have different lengths {sorted(lengths)}")
                mat = np.column_stack(bests)
                mean = mat.mean(axis=1)
                agg_rows = [
                    [i + 1, fmt(mean[i])] + [fmt(v) for v in mat[i]] for i in range(mat.shape[0])
                ]
                _write_csv(agg_dir / f"{pdir.name}__{cdir.name}.csv", ["iter", "mean_best"] + names, agg_rows)

    _write_csv(
        directory / "summary.csv",
        SUMMARY_HEADER,
        [
            [r.problem, r.acquisition, r.label, r.repetitions, r.failures] + [fmt(getattr(r, s)) for s in STATISTICS]
            for r in rows
        ],
    )
    _write_csv(
        directory / "ranks.csv",
        ("problem", "statistic", "best_acquisition", "value"),
        [[p, s, w, fmt(v)] for p, s, w, v in rank_report(rows)],
    )
    return rows


def read_summary(path):
    """Load ``summary.csv`` back into SummaryRow objects."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [
            SummaryRow(
                r["problem"], r["acquisition"], r["label"], int(r["repetitions"]), int(r["failures"]),
                *(float(r[s]) for s in STATISTICS),
            )
            for r in reader
        ]
