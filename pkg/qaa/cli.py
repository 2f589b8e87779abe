"""
QAA Command Line
Thin click front end over the library. Results go to stdout, logs and errors to
stderr, data files plus one run manifest to the output directory.

Exit codes: 0 success, 2 usage / invalid argument, 3 numerical, 4 I/O. Every
failure prints one line `error class=<Name> message=<text>` on stderr.
"""
import glob
import os

import click
import numpy as np

from .config import VERSION, QaaConfig
from .errors import InvalidArgumentError, QaaError
from .evolution import IntegratorConfig, ObservationPlan, evolve, excited_state, initial_state
from .hamiltonian import Category, ScheduleSpec
from .helpers import child_seed, fmt
from .journal import (RunManifest, read_extra, read_instance, write_instance, write_table,
                      write_trajectory, write_spectrum)
from .log import get_logger, setup_logging
from .meanfield import meanfield_evolve
from .pipeline import FILTER_HEADER, FILTER_SUMMARY_HEADER, MiningConfig, filter_report, ledger_totals, mine
from .report import write_report
from .sat_problem import build_cost_vector, certify_optimum, generate_instance, require_optimum
from .spectrum import gap_scan
from .strategies import (DEFAULT_T_GRID, GapPolicy, Selector, excited_scan, gap_success_table,
                         path_change_campaign, sweep_total_time)

logger = get_logger(__name__)


class QaaGroup(click.Group):
    """Maps library and usage errors to the exit-code contract."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except QaaError as exc:
            _fail(type(exc).__name__, exc, exc.exit_code)
        except click.ClickException as exc:
            _fail(type(exc).__name__, exc.format_message(), exc.exit_code)
        except OSError as exc:
            _fail(type(exc).__name__, exc, 4)


def _fail(name, message, code):
    click.echo(f"error class={name} message={message}", err=True)
    raise click.exceptions.Exit(code)


# ==================== SHARED OPTIONS ====================

def _out_option(f):
    return click.option("--out", "out", type=click.Path(file_okay=False), default=None,
                        help="Output directory (default: $QAA_OUTPUT_DIR).")(f)


def _jobs_option(f):
    return click.option("--jobs", type=int, default=None, help="Parallel work-pool width.")(f)


def _integrator_options(f):
    f = click.option("--integrator", type=click.Choice(["magnus4", "rk4"]), default=None)(f)
    f = click.option("--base-step", type=float, default=None, help="Largest time step.")(f)
    f = click.option("--min-steps", type=int, default=None, help="Minimum steps per evolution.")(f)
    f = click.option("--verify/--no-verify", default=None,
                     help="Halve the step until P converges; at least triples the cost. "
                          "Mining re-checks hard verdicts this way regardless.")(f)
    return f


def _integrator(integrator, base_step, min_steps, verify):
    overrides = {"method": integrator, "base_step": base_step, "min_steps": min_steps,
                 "verify_convergence": verify}
    return IntegratorConfig(**{k: v for k, v in overrides.items() if v is not None})


def _out_dir(out):
    out = out or QaaConfig.OUTPUT_DIR
    os.makedirs(out, exist_ok=True)
    return out


def _load_instances(paths):
    files = []
    for path in paths:
        if os.path.isdir(path):
            files += [p for p in sorted(glob.glob(os.path.join(path, "*.json")))
                      if not p.endswith(".manifest.json")]
        else:
            files.append(path)
    if not files:
        raise InvalidArgumentError("no instance files given")
    return files, [read_instance(p) for p in files]


def _parse_grid(text):
    """'1:40' (integers), '0.5:20:0.5' (start:stop:step) or '10,100'."""
    try:
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            start, stop, step = parts if len(parts) == 3 else (parts[0], parts[1], 1.0)
            return [float(t) for t in np.arange(start, stop + step / 2, step)]
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as e:
        raise InvalidArgumentError(f"bad T grid {text!r}: {e}") from e


def _finish(manifest, out):
    path = manifest.save(out)
    logger.info(f"manifest written to {path}")


@click.group(cls=QaaGroup)
@click.version_option(VERSION, prog_name="qaa")
@click.option("--log-level", default=None, help="DEBUG, INFO, WARNING (default: $QAA_LOG_LEVEL).")
def cli(log_level):
    """Quantum adiabatic algorithm simulation: instances, evolution, strategies, mining."""
    setup_logging(log_level)


# ==================== INSTANCES ====================

@cli.command()
@click.option("--n", "n", type=int, required=True, help="Number of variables.")
@click.option("--m", "m", type=int, required=True, help="Number of distinct clauses.")
@click.option("--count", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True, help="Master seed.")
@_out_option
def generate(n, m, count, seed, out):
    """Generate and certify random MAX 2-SAT instances."""
    out = _out_dir(out)
    manifest = RunManifest(command="generate", seed=seed)
    unique = 0
    with manifest.stage("generate"):
        for i in range(count):
            instance = generate_instance(n, m, child_seed(seed, "instance", i))
            unique += certify_optimum(instance).multiplicity == 1
            manifest.add_output(write_instance(os.path.join(out, f"instance_{i:04d}.json"), instance,
                                               manifest.file_name))
    _finish(manifest, out)
    click.echo(f"generated {count} instances, unique-optimum fraction {unique / count if count else 0.0:.4f}")


@cli.command()
@click.argument("instance_path", type=click.Path(exists=True, dir_okay=False))
@_out_option
def certify(instance_path, out):
    """Brute-force the optimum of an instance file into a new file."""
    out = _out_dir(out)
    manifest = RunManifest(command="certify", inputs=[instance_path])
    instance = read_instance(instance_path)
    optimum = certify_optimum(instance)
    stem = os.path.splitext(os.path.basename(instance_path))[0]
    target = os.path.join(out, f"{stem}.certified.json")
    if os.path.abspath(target) == os.path.abspath(instance_path):
        raise InvalidArgumentError("refusing to overwrite the input instance file")
    write_instance(target, instance, manifest.file_name)
    manifest.add_output(target)
    _finish(manifest, out)
    click.echo(f"w={optimum.w_bits(instance.n)} cost_min={optimum.cost_min} multiplicity={optimum.multiplicity}")


# ==================== EVOLUTION ====================

@cli.command("evolve")
@click.option("--instance", "instance_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--T", "T", type=float, required=True, help="Total evolution time.")
@click.option("--init", "init", type=click.Choice(["ground", "excited"]), default="ground", show_default=True)
@click.option("--k", "k", type=int, default=0, help="Flipped qubit for --init excited.")
@click.option("--extra", "extra_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--trajectory/--no-trajectory", default=False, help="Write trajectory.csv.")
@click.option("--points", type=int, default=None, help="Trajectory samples.")
@_integrator_options
@_out_option
def evolve_cmd(instance_path, T, init, k, extra_path, trajectory, points, integrator, base_step, min_steps,
               verify, out):
    """Single Schroedinger evolution; prints P(T)."""
    out = _out_dir(out)
    manifest = RunManifest(command="evolve", inputs=[p for p in (instance_path, extra_path) if p])
    instance = read_instance(instance_path)
    require_optimum(instance)
    extra = read_extra(extra_path) if extra_path else None
    psi0 = initial_state(instance.n) if init == "ground" else excited_state(instance.n, k)
    plan = ObservationPlan(points=points or QaaConfig.TRAJECTORY_POINTS) if trajectory else None

    with manifest.stage("evolve"):
        result = evolve(ScheduleSpec(T=T, extra=extra), build_cost_vector(instance), psi0,
                        _integrator(integrator, base_step, min_steps, verify), observe=plan)
    if trajectory:
        manifest.add_output(write_trajectory(os.path.join(out, "trajectory.csv"), result.trajectory,
                                             manifest.file_name))
    _finish(manifest, out)
    click.echo(fmt(result.success_probability))


@cli.command()
@click.option("--instance", "instance_paths", multiple=True, required=True, type=click.Path(exists=True))
@click.option("--t-grid", default=None, help="Total times, e.g. '1:40' or '10,100' (default 1..40).")
@click.option("--t-ref", type=float, default=None, help="Reference time (default: QAA_T_REF).")
@click.option("--t-fixed", type=float, default=10.0, show_default=True, help="Fixed T for the P(T)/P(T_ref) ratio.")
@click.option("--refine/--no-refine", default=False, help="Three rounds of bisection around the argmax.")
@_integrator_options
@_jobs_option
@_out_option
def sweep(instance_paths, t_grid, t_ref, t_fixed, refine, integrator, base_step, min_steps, verify, jobs, out):
    """P(T) over a grid of total times."""
    out = _out_dir(out)
    files, instances = _load_instances(instance_paths)
    manifest = RunManifest(command="sweep", inputs=files)
    grid = _parse_grid(t_grid) if t_grid else list(DEFAULT_T_GRID)
    config = _integrator(integrator, base_step, min_steps, verify)

    curves, summary = [], []
    with manifest.stage("sweep"):
        for instance in instances:
            result = sweep_total_time(instance, grid, config, T_ref=t_ref, refine=refine, n_jobs=jobs)
            curves += [[instance.instance_id, p.T, p.success_probability] for p in result.grid]
            on_grid = any(p.T == t_fixed for p in result.grid)
            summary.append([instance.instance_id, result.T_max, result.P_at_Tmax, result.T_ref, result.P_ref,
                            result.improvement_vs_ref, t_fixed,
                            result.probability_at(t_fixed) if on_grid else None,
                            result.ratio_at(t_fixed) if on_grid else None])
            click.echo(f"{instance.instance_id} T_max={result.T_max:g} P={fmt(result.P_at_Tmax)} "
                       f"ratio={fmt(result.improvement_vs_ref)}")
    manifest.add_output(write_table(os.path.join(out, "sweep.csv"), ["instance_id", "T", "success_probability"],
                                    curves, manifest.file_name))
    manifest.add_output(write_table(
        os.path.join(out, "sweep_summary.csv"),
        ["instance_id", "T_max", "p_at_tmax", "T_ref", "p_ref", "improvement", "T_fixed", "p_fixed", "fixed_ratio"],
        summary, manifest.file_name))
    _finish(manifest, out)


@cli.command()
@click.option("--instance", "instance_paths", multiple=True, required=True, type=click.Path(exists=True))
@click.option("--T", "T", type=float, default=None, help="Total time (default: QAA_T_REF).")
@_integrator_options
@_jobs_option
@_out_option
def excited(instance_paths, T, integrator, base_step, min_steps, verify, jobs, out):
    """Evolve from each first excited state of H_B."""
    out = _out_dir(out)
    files, instances = _load_instances(instance_paths)
    manifest = RunManifest(command="excited", inputs=files)
    T = QaaConfig.T_REF if T is None else T
    config = _integrator(integrator, base_step, min_steps, verify)

    rows, summary = [], []
    with manifest.stage("excited"):
        for instance in instances:
            result = excited_scan(instance, T, config, n_jobs=jobs)
            rows.append([instance.instance_id, T, "ground", result.ground_probability])
            rows += [[instance.instance_id, T, k, p] for k, p in enumerate(result.per_qubit)]
            summary.append([instance.instance_id, T, result.ground_probability, result.average, result.maximum,
                            result.total_probability()])
            click.echo(f"{instance.instance_id} average={fmt(result.average)} maximum={fmt(result.maximum)}")
    manifest.add_output(write_table(os.path.join(out, "excited.csv"),
                                    ["instance_id", "T", "start", "success_probability"], rows, manifest.file_name))
    manifest.add_output(write_table(os.path.join(out, "excited_summary.csv"),
                                    ["instance_id", "T", "p_ground", "average", "maximum", "total"],
                                    summary, manifest.file_name))
    _finish(manifest, out)


@cli.command()
@click.option("--instance", "instance_paths", multiple=True, required=True, type=click.Path(exists=True))
@click.option("--category", "categories", multiple=True, type=click.Choice([c.value for c in Category]),
              help="Repeatable; default all three.")
@click.option("--trials", type=int, default=25, show_default=True)
@click.option("--T", "T", type=float, default=None, help="Total time (default: QAA_T_REF).")
@click.option("--seed", type=int, default=0, show_default=True, help="Master seed for the random terms.")
@click.option("--gaps", type=click.Choice([p.value for p in GapPolicy]), default="none", show_default=True,
              help="Which trials get a minimum-gap scan.")
@click.option("--per-clause/--per-edge", default=False, help="One random term per clause instead of per edge.")
@_integrator_options
@_jobs_option
@_out_option
def pathchange(instance_paths, categories, trials, T, seed, gaps, per_clause, integrator, base_step, min_steps,
               verify, jobs, out):
    """Randomized path-change campaigns and their chi statistic."""
    out = _out_dir(out)
    files, instances = _load_instances(instance_paths)
    manifest = RunManifest(command="pathchange", seed=seed, inputs=files)
    T = QaaConfig.T_REF if T is None else T
    config = _integrator(integrator, base_step, min_steps, verify)
    categories = categories or tuple(c.value for c in Category)

    campaigns = []
    with manifest.stage("pathchange"):
        for instance in instances:
            for category in categories:
                campaign = path_change_campaign(instance, category, trials=trials, T=T, seed=seed, gap_policy=gaps,
                                                config=config, per_clause=per_clause, n_jobs=jobs)
                campaigns.append(campaign)
                click.echo(f"{campaign.instance_id} {category} chi={fmt(campaign.chi)} "
                           f"effective_success={fmt(campaign.effective_success)}")

    trial_rows = [[c.instance_id, c.category.value, *t.row()] for c in campaigns for t in c.trials]
    manifest.add_output(write_table(
        os.path.join(out, "pathchange_trials.csv"),
        ["instance_id", "category", "trial", "seed", "success_probability", "g_min", "s_at_min"],
        trial_rows, manifest.file_name))
    manifest.add_output(write_table(
        os.path.join(out, "pathchange_summary.csv"),
        ["instance_id", "category", "trials", "chi", "effective_success", "max_success", "best_seed"],
        [c.summary_row() for c in campaigns], manifest.file_name))
    if gaps != GapPolicy.NONE.value:
        rows = gap_success_table(campaigns, Selector.BEST) + gap_success_table(campaigns, Selector.RANDOM)
        manifest.add_output(write_table(
            os.path.join(out, "gap_success.csv"), ["instance_id", "category", "selector", "trial", "success", "g_min"],
            [[r["instance_id"], r["category"], r["selector"], r["trial"], r["success"], r["g_min"]] for r in rows],
            manifest.file_name))
    _finish(manifest, out)


@cli.command()
@click.option("--instance", "instance_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--extra", "extra_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--points", type=int, default=None, help="Grid points in s (default: QAA_GRID_POINTS).")
@click.option("--k", "k", type=int, default=3, show_default=True, help="Eigenvalues per slice.")
@click.option("--refine-iters", type=int, default=None)
@_out_option
def spectrum(instance_path, extra_path, points, k, refine_iters, out):
    """Lowest levels of H(s) and the minimum gap."""
    out = _out_dir(out)
    manifest = RunManifest(command="spectrum", inputs=[p for p in (instance_path, extra_path) if p])
    instance = read_instance(instance_path)
    extra = read_extra(extra_path) if extra_path else None
    with manifest.stage("spectrum"):
        profile = gap_scan(ScheduleSpec(T=0.0, extra=extra), build_cost_vector(instance), grid_points=points,
                           refine_iters=refine_iters, k=k)
    manifest.add_output(write_spectrum(os.path.join(out, "spectrum.csv"), profile.slices, manifest.file_name))
    summary = profile.summary()
    manifest.add_output(write_table(os.path.join(out, "gap.csv"), ["instance_id", *summary],
                                    [[instance.instance_id, *summary.values()]], manifest.file_name))
    _finish(manifest, out)
    click.echo(f"g_min={fmt(profile.g_min)} s_at_min={fmt(profile.s_at_min)}")


@cli.command("meanfield")
@click.option("--instance", "instance_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--T", "T", type=float, default=None, help="Total time (default: QAA_T_REF).")
@click.option("--steps", type=int, default=None, help="Integration steps (default: QAA_MF_STEPS).")
@click.option("--threshold", type=float, default=None, help="Filter threshold (default: QAA_MF_THRESHOLD).")
def meanfield_cmd(instance_path, T, steps, threshold):
    """Mean-field run and filter verdict for one instance."""
    instance = read_instance(instance_path)
    result = meanfield_evolve(instance, QaaConfig.T_REF if T is None else T, steps=steps, threshold=threshold)
    click.echo(f"final_energy={fmt(result.final_energy)} excess={fmt(result.excess)} "
               f"passed_filter={int(result.passed_filter)}")


# ==================== MINING AND REPORTS ====================

@cli.command("mine")
@click.option("--n", "n", type=int, default=12, show_default=True)
@click.option("--m", "m", type=int, default=36, show_default=True)
@click.option("--target", "target_count", type=int, default=None, help="Stop after this many hard instances.")
@click.option("--max-instances", type=int, default=None, help="Stop after this many generated instances.")
@click.option("--seed", type=int, default=0, show_default=True, help="Master seed.")
@click.option("--t-ref", type=float, default=None)
@click.option("--cutoff", type=float, default=None, help="Hardness cutoff on P(T_ref).")
@click.option("--mf-threshold", type=float, default=None)
@click.option("--mode", type=click.Choice(["mine", "calibrate"]), default="mine", show_default=True)
@_integrator_options
@_jobs_option
@_out_option
def mine_cmd(n, m, target_count, max_instances, seed, t_ref, cutoff, mf_threshold, mode, integrator, base_step,
             min_steps, verify, jobs, out):
    """Mine hard instances into a resumable ledger."""
    out = _out_dir(out)
    settings = {"T_ref": t_ref, "hardness_cutoff": cutoff, "mf_threshold": mf_threshold}
    config = MiningConfig(n=n, m=m, target_count=target_count, max_instances=max_instances, master_seed=seed,
                          mode=mode, integrator=_integrator(integrator, base_step, min_steps, verify),
                          **{k: v for k, v in settings.items() if v is not None})
    manifest = RunManifest(command="mine", seed=seed)
    with manifest.stage("mine"):
        outcome = mine(config, out, n_jobs=jobs, manifest=manifest)
    rows, summary = filter_report(outcome.ledger)
    manifest.add_output(outcome.ledger_path)
    manifest.add_output(write_table(os.path.join(out, "filter_report.csv"), FILTER_HEADER, rows, manifest.file_name))
    manifest.add_output(write_table(os.path.join(out, "filter_summary.csv"), FILTER_SUMMARY_HEADER,
                                    [[summary[k] for k in FILTER_SUMMARY_HEADER]], manifest.file_name))
    _finish(manifest, out)
    totals = ledger_totals(outcome.ledger)
    click.echo(" ".join(f"{k}={v}" for k, v in totals.items()) +
               f" discard_fraction={summary['discard_fraction']:.4f}"
               f" false_discard_rate={summary['false_discard_rate']:.4f}")


@cli.command()
@click.option("--input", "input_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--plot-scripts/--no-plot-scripts", default=False, help="Also write a matplotlib script per table.")
@_out_option
def report(input_dir, plot_scripts, out):
    """
    Aggregate earlier runs under INPUT into per-figure tables.

    \b
    success_distribution.csv  instance_id,p_ref                      histogram of P(T_ref)
    sweep_curves.csv          instance_id,T,success_probability      P(T) curves
    tmax_values.csv           instance_id,T_max                      histogram of T_max
    tmax_vs_ref.csv           instance_id,p_ref,p_at_tmax            scatter P(T_max) vs P(T_ref)
    fixed_t_vs_ref.csv        instance_id,T_fixed,p_ref,p_fixed      scatter P(10) vs P(T_ref)
    excited_average.csv       instance_id,T,p_ground,average         excited-start average
    excited_maximum.csv       instance_id,T,p_ground,maximum         excited-start maximum
    pathchange_all.csv        instance_id,category,success_probability  every trial
    pathchange_max.csv        instance_id,category,max_success       best trial
    pathchange_effective.csv  instance_id,category,effective_success 1 - chi
    gap_vs_success.csv        instance_id,category,selector,success,g_min  gap scatter

    `qaa evolve --trajectory` writes trajectory.csv (t, s, energy_expectation,
    overlap_ground, overlap_first_excited, norm); `qaa spectrum` writes
    spectrum.csv (s, lambda_0 .. lambda_k-1) and gap.csv.
    """
    out = _out_dir(out)
    manifest = RunManifest(command="report", inputs=[input_dir])
    with manifest.stage("report"):
        write_report(input_dir, out, manifest, plot_scripts=plot_scripts)
    _finish(manifest, out)


def main():
    cli(prog_name="qaa")
