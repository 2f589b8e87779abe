"""
Report
Collects the CSV outputs of earlier runs (ledgers, sweeps, excited scans,
path-change campaigns) and writes one plot-ready table per result figure.
"""
import os
from collections import defaultdict

from .journal import read_table, write_table, write_text
from .log import get_logger

logger = get_logger(__name__)

# output name -> (header, plot kind, what it shows)
OUTPUTS = {
    "success_distribution.csv": (["instance_id", "p_ref"], "hist",
                                 "P(T_ref) of every fully simulated mined instance"),
    "sweep_curves.csv": (["instance_id", "T", "success_probability"], "lines",
                         "P(T) against total time, one curve per instance"),
    "tmax_values.csv": (["instance_id", "T_max"], "hist", "optimal total time per instance"),
    "tmax_vs_ref.csv": (["instance_id", "p_ref", "p_at_tmax"], "scatter", "P(T_max) against P(T_ref)"),
    "fixed_t_vs_ref.csv": (["instance_id", "T_fixed", "p_ref", "p_fixed"], "scatter",
                           "P(T_fixed) against P(T_ref)"),
    "excited_average.csv": (["instance_id", "T", "p_ground", "average"], "scatter",
                            "average excited-start success against ground-start success"),
    "excited_maximum.csv": (["instance_id", "T", "p_ground", "maximum"], "scatter",
                            "best excited-start success against ground-start success"),
    "pathchange_all.csv": (["instance_id", "category", "success_probability"], "hist",
                           "success of every path-change trial, per category"),
    "pathchange_max.csv": (["instance_id", "category", "max_success"], "hist",
                           "best trial per instance and category"),
    "pathchange_effective.csv": (["instance_id", "category", "effective_success"], "hist",
                                 "1 - chi per instance and category"),
    "gap_vs_success.csv": (["instance_id", "category", "selector", "success", "g_min"], "scatter",
                           "trial success against its minimum gap"),
}

# input file name -> key used below
INPUTS = {
    "ledger.csv": "ledger",
    "sweep.csv": "sweep",
    "sweep_summary.csv": "sweep_summary",
    "excited_summary.csv": "excited_summary",
    "pathchange_trials.csv": "trials",
    "pathchange_summary.csv": "campaigns",
    "gap_success.csv": "gaps",
}


def collect_inputs(input_dir):
    """Rows of every known input table under `input_dir`, grouped by kind."""
    found = defaultdict(list)
    for root, dirs, files in sorted(os.walk(input_dir)):
        dirs.sort()
        for name in sorted(files):
            if name not in INPUTS:
                continue
            path = os.path.join(root, name)
            _, _, rows = read_table(path)
            found[INPUTS[name]].extend(rows)
            logger.debug(f"read {len(rows)} rows from {path}")
    return found


def build_tables(found):
    tables = {name: [] for name in OUTPUTS}
    for row in found["ledger"]:
        if row["p_ref"] != "":
            tables["success_distribution.csv"].append([row["instance_id"], row["p_ref"]])
    for row in found["sweep"]:
        tables["sweep_curves.csv"].append([row["instance_id"], row["T"], row["success_probability"]])
    for row in found["sweep_summary"]:
        tables["tmax_values.csv"].append([row["instance_id"], row["T_max"]])
        if row["p_ref"] != "":
            tables["tmax_vs_ref.csv"].append([row["instance_id"], row["p_ref"], row["p_at_tmax"]])
        if row["p_fixed"] != "":
            tables["fixed_t_vs_ref.csv"].append([row["instance_id"], row["T_fixed"], row["p_ref"], row["p_fixed"]])
    for row in found["excited_summary"]:
        tables["excited_average.csv"].append([row["instance_id"], row["T"], row["p_ground"], row["average"]])
        tables["excited_maximum.csv"].append([row["instance_id"], row["T"], row["p_ground"], row["maximum"]])
    for row in found["trials"]:
        tables["pathchange_all.csv"].append([row["instance_id"], row["category"], row["success_probability"]])
    for row in found["campaigns"]:
        tables["pathchange_max.csv"].append([row["instance_id"], row["category"], row["max_success"]])
        tables["pathchange_effective.csv"].append([row["instance_id"], row["category"], row["effective_success"]])
    for row in found["gaps"]:
        tables["gap_vs_success.csv"].append([row["instance_id"], row["category"], row["selector"],
                                             row["success"], row["g_min"]])
    return tables


PLOT_TEMPLATE = '''import csv

import matplotlib.pyplot as plt

with open({csv_name!r}) as f:
    rows = list(csv.DictReader(line for line in f if not line.startswith("#")))

fig, ax = plt.subplots()
{body}
ax.set_title({title!r})
fig.savefig({png_name!r}, dpi=150)
'''

PLOT_BODIES = {
    "hist": "ax.hist([float(r[{y!r}]) for r in rows], bins=40)\nax.set_xlabel({y!r})",
    "scatter": ("ax.scatter([float(r[{x!r}]) for r in rows], [float(r[{y!r}]) for r in rows], s=8)\n"
                "ax.set_xscale('log')\nax.set_yscale('log')\nax.set_xlabel({x!r})\nax.set_ylabel({y!r})"),
    "lines": ("curves = {{}}\nfor r in rows:\n    curves.setdefault(r['instance_id'], []).append("
              "(float(r[{x!r}]), float(r[{y!r}])))\nfor points in curves.values():\n"
              "    ax.plot(*zip(*sorted(points)), lw=0.8)\nax.set_xlabel({x!r})\nax.set_ylabel({y!r})"),
}


def plot_script(name):
    header, kind, title = OUTPUTS[name]
    x, y = header[-2], header[-1]
    body = PLOT_BODIES[kind].format(x=x, y=y)
    return PLOT_TEMPLATE.format(csv_name=name, png_name=name.replace(".csv", ".png"), body=body, title=title)


def write_report(input_dir, out_dir, manifest, plot_scripts=False):
    """Writes every output (possibly header-only) and returns their paths."""
    found = collect_inputs(input_dir)
    if not found:
        logger.warning(f"no run outputs found under {input_dir}; writing empty tables")
    tables = build_tables(found)
    paths = []
    for name, (header, _, _) in OUTPUTS.items():
        path = write_table(os.path.join(out_dir, name), header, tables[name], manifest.file_name)
        paths.append(manifest.add_output(path))
        if plot_scripts:
            script = os.path.join(out_dir, "plot_" + name.replace(".csv", ".py"))
            paths.append(manifest.add_output(write_text(script, plot_script(name))))
    logger.info(f"report: {sum(len(rows) for rows in tables.values())} rows in {len(OUTPUTS)} tables")
    return paths
