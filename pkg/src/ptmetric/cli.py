"""Command-line drivers: ``simulate``, ``split``, ``work``, ``dilate``, ``phase`` and ``batch``.

Each command reads a scenario file, writes ``results.json`` plus CSV time
series into the output directory and exits with

* 0 when every reported residual is within tolerance,
* 2 when a residual exceeds its tolerance (or a phase run is not cyclic),
* 3 for an invalid scenario,
* 4 for a numerical failure raised by the library.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import dilation, dynamics, measurement, metric, phase, thermo
from .errors import NotCyclic, PTMetricError
from .linalg import principal_sqrt
from .scenario import InvalidConfig, Scenario, dump_json, load_scenario, write_series_csv

log = logging.getLogger("ptmetric")

EXIT_OK = 0
EXIT_INVARIANT = 2
EXIT_CONFIG = 3
EXIT_NUMERICAL = 4

COMMANDS = ("simulate", "split", "work", "dilate", "phase")


class Report:
    """Accumulates results, residual checks and written files for one run."""

    def __init__(self, command: str, scenario: Scenario, out: Path):
        self.command = command
        self.scenario = scenario
        self.out = out
        self.results: dict = {}
        self.residuals: dict = {}
        self.files: list[str] = []

    def check(self, name: str, value: float, tol_key: str | None = None):
        tol = self.scenario.tolerances[tol_key or name]
        value = float(value)
        self.residuals[name] = {"value": value, "tol": tol, "ok": bool(np.isfinite(value) and value <= tol)}

    def series(self, filename: str, times, values, name: str):
        write_series_csv(self.out / filename, times, values, name)
        self.files.append(filename)

    @property
    def ok(self) -> bool:
        return all(r["ok"] for r in self.residuals.values())


def _metric(sc: Scenario) -> metric.MetricTrajectory:
    return metric.build_metric(sc.schedule, sc.eta0, sc.steps, error_tol=sc.tolerances["step_error"])


def _state(sc: Scenario, psi0) -> dynamics.Trajectory:
    return dynamics.propagate_state(sc.schedule, psi0, sc.steps, error_tol=sc.tolerances["step_error"])


def cmd_simulate(sc: Scenario, rep: Report):
    psi0 = sc.psi0()
    traj = _state(sc, psi0)
    m = _metric(sc)
    norms = np.einsum("ki,kij,kj->k", traj.values.conj(), m.W, traj.values).real
    drift = float(np.max(np.abs(norms - norms[0])) / norms[0])
    rep.check("conservation", drift)
    rep.check("step_error", max(traj.error_estimate, m.eta.error_estimate))
    rep.results.update(
        steps=sc.steps,
        psi_final=traj.final,
        W_final=m.W[-1],
        norm_initial=norms[0],
        periodicity_defect=metric.periodicity_defect(m),
    )
    rep.series("psi.csv", traj.times, traj.values, "psi")
    rep.series("W.csv", m.times, m.W, "W")


def cmd_split(sc: Scenario, rep: Report):
    m = _metric(sc)
    sp = metric.split_hamiltonian(sc.schedule, m)
    rH, rK = sp.hermiticity_residuals(scale="hamiltonian")
    rep.check("hermiticity_H", np.max(rH), "hermiticity")
    rep.check("hermiticity_K", np.max(rK), "hermiticity")
    rep.check("reconstruction", sp.reconstruction_error())
    rep.check("imag_energy", sp.max_imag_energy())
    classification = None
    if sc.schedule.time_independent:
        classification = metric.classify_phase(sc.schedule(0.0)).value
    spectra = sp.energy_spectra()
    rep.results.update(
        steps=sc.steps,
        classification=classification,
        H_initial=sp.H[0],
        K_initial=sp.K[0],
        H_final=sp.H[-1],
        K_final=sp.K[-1],
        max_norm_H=float(np.max(np.linalg.norm(sp.H, ord=2, axis=(1, 2)))),
        max_norm_K=float(np.max(np.linalg.norm(sp.K, ord=2, axis=(1, 2)))),
        energies_initial=spectra[0].real,
        energies_final=spectra[-1].real,
    )
    rep.series("H.csv", sp.times, sp.H, "H")
    rep.series("K.csv", sp.times, sp.K, "K")
    rep.series("W.csv", sp.times, sp.W, "W")
    rep.series("energies.csv", sp.times, spectra, "E")


def cmd_work(sc: Scenario, rep: Report):
    if sc.beta is None:
        raise InvalidConfig("the work command needs 'beta'")
    m = _metric(sc)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        record, setup = thermo.work_record(sc.schedule, m, sc.beta)
    je = thermo.jarzynski_check(record)
    cr = thermo.crooks_check(record)
    a4 = thermo.reversed_cyclic_trace(setup)
    rep.check("jarzynski", je.residual)
    rep.check("crooks", max(cr.max_residual, cr.distribution_residual))
    rep.check("cyclic_trace", np.max(np.abs(a4 - record.P_tr)))
    rep.results.update(
        steps=sc.steps,
        beta=sc.beta,
        degenerate=setup.degenerate,
        warnings=[str(w.message) for w in caught],
        levels_initial=record.levels0,
        levels_final=record.levels_tau,
        work=record.work,
        P_forward=record.P,
        P_reversed=record.P_tr,
        distribution_forward=thermo.work_distribution(record, "forward"),
        distribution_reversed=thermo.work_distribution(record, "reversed"),
        Z_initial=record.Z0,
        Z_final=record.Z_tau,
        delta_F=record.delta_F,
        jarzynski={"lhs": je.lhs, "rhs": je.rhs, "residual": je.residual},
        crooks={"max_residual": cr.max_residual, "distribution_residual": cr.distribution_residual,
                "skipped_pairs": cr.skipped},
    )
    n = sc.raw.get("samples")
    if n:
        w = thermo.sample_work(record, n, sc.raw.get("sample_seed", 0))
        rep.results["sampled"] = {"n": n, "mean_work": float(np.mean(w)),
                                  "jarzynski_estimate": float(np.mean(np.exp(-sc.beta * w)))}


def _ensemble(obs: measurement.Observable, beta: float | None):
    e = obs.eigenvalues
    if beta is None:
        p = np.full(len(e), 1.0 / len(e))
    else:
        p = np.exp(-beta * (e - e.min()))
        p /= p.sum()
    return [(pi, obs.vectors[:, i]) for i, pi in enumerate(p) if pi > 0]


def cmd_dilate(sc: Scenario, rep: Report):
    margin = float(sc.dilation["margin"])
    m = _metric(sc)
    if sc.dilation["rescale"]:
        m = metric.ensure_dilation_ready(m, margin)
    dil = dilation.build_dilation(m, sc.schedule, margin=margin)
    rep.check("dilation_orthonormality", dil.orthonormality_defect())
    rep.check("dilation_hermiticity", dil.hermiticity_defect())

    # Gibbs ensemble of H(0) carried along by U(t), measured in the eigenbasis of H(t)
    U = dynamics.evolution_operator(sc.schedule, sc.steps, full=True).values
    H0, _ = metric.split_at(sc.schedule(0.0), m.W[0])
    ens0 = _ensemble(measurement.observable_from_operator(H0, m.W[0]), sc.beta)
    worst = 0.0
    for k, t in enumerate(m.times):
        Hk, _ = metric.split_at(sc.schedule(t), m.W[k])
        obs = measurement.observable_from_operator(Hk, m.W[k])
        states = [(p, U[k] @ v) for p, v in ens0]
        direct = measurement.outcome_probabilities(obs, measurement.ensemble_density(states, m.W[k]))
        lifted = dilation.dilated_measurement(obs, dil.M[k], dilation.dilated_density(states, dil.M[k]))
        worst = max(worst, float(np.max(np.abs(direct - lifted))))
    rep.check("dilation_probability", worst)
    rep.check("schrodinger", dilation.schrodinger_consistency(sc.schedule, m, sc.psi0(), sc.steps))
    rep.results.update(
        steps=sc.steps,
        margin=margin,
        rescale=m.scale,
        min_eig_W=m.min_eigenvalue(),
        dilated_dim=dil.dim,
        max_norm_dilated_H=float(np.max(np.linalg.norm(dil.H, ord=2, axis=(1, 2)))),
        M_initial=principal_sqrt(m.W[0] - np.eye(sc.dim)),
    )
    rep.series("dilated_H.csv", dil.times, dil.H, "Ht")
    rep.series("M.csv", dil.times, dil.M, "M")


def cmd_phase(sc: Scenario, rep: Report):
    psi0 = sc.psi0()
    traj = _state(sc, psi0)
    m = _metric(sc)
    run = phase.detect_cyclic(traj, m, sc.tolerances["cyclic"])
    rep.results.update(
        steps=sc.steps,
        psi0=psi0,
        cyclic=run.is_cyclic,
        alpha=run.alpha,
        metric_defect=run.metric_defect,
        overlap_defect=run.overlap_defect,
    )
    run.require()
    sp = metric.split_hamiltonian(sc.schedule, m)
    beta = phase.dynamical_phase(run, sp)
    gamma = phase.geometric_phase(run)
    rep.check("decomposition", abs(phase.wrap_phase(run.alpha - beta - gamma)))
    rep.results.update(
        dynamical=beta,
        geometric=gamma,
        k_identity_residual=phase.k_identity_residual(run, sp),
    )


DRIVERS = {
    "simulate": cmd_simulate,
    "split": cmd_split,
    "work": cmd_work,
    "dilate": cmd_dilate,
    "phase": cmd_phase,
}


def _error(exc: Exception) -> dict:
    return {"type": type(exc).__name__, "message": str(exc)}


def run(command: str, config, out, steps=None, tolerances=None, seed=None) -> int:
    """Run one command and write its outputs; returns the exit code."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    doc = {"schema": 1, "command": command}
    try:
        sc = load_scenario(config, steps=steps, seed=seed, tolerances=tolerances)
    except InvalidConfig as exc:
        doc.update(status="invalid_config", exit_code=EXIT_CONFIG, error=_error(exc))
        dump_json(doc, out / "results.json")
        log.error("invalid config: %s", exc)
        return EXIT_CONFIG
    except (PTMetricError, np.linalg.LinAlgError) as exc:
        # e.g. a biorthonormal eta0 requested at an exceptional point
        doc.update(status="numerical_failure", exit_code=EXIT_NUMERICAL, error=_error(exc))
        dump_json(doc, out / "results.json")
        log.error("numerical failure while building the scenario: %s", exc)
        return EXIT_NUMERICAL

    rep = Report(command, sc, out)
    doc["scenario"] = sc.raw
    try:
        with np.errstate(over="raise", invalid="raise", divide="raise"):
            DRIVERS[command](sc, rep)
        code = EXIT_OK if rep.ok else EXIT_INVARIANT
        status = "ok" if rep.ok else "invariant_violation"
    except InvalidConfig as exc:
        code, status = EXIT_CONFIG, "invalid_config"
        doc["error"] = _error(exc)
    except NotCyclic as exc:
        code, status = EXIT_INVARIANT, "not_cyclic"
        doc["error"] = _error(exc)
    except (PTMetricError, np.linalg.LinAlgError, FloatingPointError) as exc:
        code, status = EXIT_NUMERICAL, "numerical_failure"
        doc["error"] = _error(exc)
        if type(exc).__name__ == "MetricBelowIdentity":
            doc["error"]["hint"] = "enable dilation.rescale or raise eta0 so that W >= I + margin"
    doc.update(status=status, exit_code=code, results=rep.results,
               residuals=rep.residuals, files=sorted(rep.files))
    dump_json(doc, out / "results.json")
    if code == EXIT_OK:
        log.info("%s %s: ok", command, sc.name)
    else:
        failed = [k for k, r in rep.residuals.items() if not r["ok"]]
        log.error("%s %s: %s %s", command, sc.name, status, doc.get("error", failed))
    return code


def _batch_job(args):
    return run(*args)


def run_batch(manifest, out, steps=None, tolerances=None, seed=None, workers: int | None = None) -> int:
    """Run independent ``{"command", "config"}`` jobs concurrently.

    Job ``i`` writes into ``out/NNN-<command>``; ``batch.json`` lists the exit
    codes and the batch exits with the largest one.
    """
    manifest = Path(manifest)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        data = json.loads(manifest.read_text())
        if data.get("schema") != 1 or not isinstance(data.get("jobs"), list):
            raise InvalidConfig("batch manifest needs \"schema\": 1 and a list of jobs")
        jobs = []
        for i, job in enumerate(data["jobs"]):
            if job.get("command") not in COMMANDS or not isinstance(job.get("config"), str):
                raise InvalidConfig(f"job {i}: needs a command from {COMMANDS} and a config path")
            jobs.append((job["command"], manifest.parent / job["config"],
                         out / f"{i:03d}-{job['command']}", steps, tolerances, seed))
    except (OSError, json.JSONDecodeError, AttributeError, InvalidConfig) as exc:
        dump_json({"schema": 1, "status": "invalid_config", "error": _error(exc)}, out / "batch.json")
        log.error("invalid batch manifest: %s", exc)
        return EXIT_CONFIG

    workers = workers or min(len(jobs), os.cpu_count() or 1) or 1
    if workers == 1:
        codes = [_batch_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            codes = list(pool.map(_batch_job, jobs))
    summary = [{"command": j[0], "config": str(data["jobs"][i]["config"]), "out": j[2].name, "exit_code": c}
               for i, (j, c) in enumerate(zip(jobs, codes))]
    dump_json({"schema": 1, "jobs": summary}, out / "batch.json")
    return max(codes, default=EXIT_OK)


def _tolerance_overrides(values: list[str]) -> dict:
    """``--tol 1e-7`` sets the integrator error tolerance, ``--tol key=value`` any other."""
    out = {}
    for item in values or []:
        key, sep, val = item.partition("=")
        if not sep:
            key, val = "step_error", item
        try:
            out[key.strip()] = float(val)
        except ValueError:
            raise InvalidConfig(f"bad --tol value {item!r}") from None
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ptmetric",
        description="Non-Hermitian dynamics with a time-dependent metric: experiments and checks.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "propagate the state and the metric, check conservation",
        "split": "split H(t) into energy observable and geometric part",
        "work": "two-point work statistics, Jarzynski and Crooks checks",
        "dilate": "Hermitian dilation on the doubled space and its equivalence checks",
        "phase": "total, dynamical and geometric phase of a cyclic run",
        "batch": "run a manifest of independent jobs concurrently",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True,
                       help="batch manifest" if name == "batch" else "scenario JSON file")
        p.add_argument("--out", default="results", help="output directory (default: ./results)")
        p.add_argument("--steps", type=int, help="override the number of RK4 steps")
        p.add_argument("--tol", action="append", metavar="[KEY=]VALUE",
                       help="override a tolerance; a bare value sets step_error (repeatable)")
        p.add_argument("--seed", type=int, help="override the seed of a random-family scenario")
        if name == "batch":
            p.add_argument("--workers", type=int, help="worker processes (default: one per job, up to the CPU count)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        tols = _tolerance_overrides(args.tol)
    except InvalidConfig as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    if args.command == "batch":
        return run_batch(args.config, args.out, args.steps, tols, args.seed, args.workers)
    return run(args.command, args.config, args.out, args.steps, tols, args.seed)


if __name__ == "__main__":
    sys.exit(main())
