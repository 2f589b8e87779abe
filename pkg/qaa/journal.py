"""
Journal - Persists instances, path-change terms, result tables, the mining ledger and run manifests.

Every tabular file is CSV whose first line names the manifest of the run that
wrote it. Files are written to a temporary sibling and renamed into place, so a
killed run never leaves a half-written output behind.
"""
import csv
import io
import json
import os
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone

import numpy as np

from .config import VERSION, QaaConfig
from .errors import InvalidArgumentError, PersistenceError
from .hamiltonian import BASIS, Category, ExtraHamiltonian, ExtraTerm
from .helpers import fmt
from .log import get_logger
from .sat_problem import Clause, CostKind, Instance, Optimum

logger = get_logger(__name__)

FORMAT_VERSION = 1
LEDGER_HEADER = ["index", "instance_id", "seed", "unique", "multiplicity", "mf_excess", "mf_passed",
                 "p_ref", "hard", "cost_min", "mf_energy"]
LEDGER_MANIFEST = "mine.manifest.json"


def _atomic_write(path, text):
    tmp = f"{path}.tmp"
    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(tmp, "w", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except OSError as e:
        raise PersistenceError(f"cannot write {path}: {e}") from e


def load_json(path):
    try:
        with open(path, "r") as f:
            return json.load(f)
    except (OSError, ValueError) as e:
        raise PersistenceError(f"cannot read {path}: {e}") from e


def write_text(path, text):
    _atomic_write(path, text)
    return path


def save_json(path, data):
    _atomic_write(path, json.dumps(data, indent=2) + "\n")
    return path


def _check_version(data, path):
    if not isinstance(data, dict):
        raise PersistenceError(f"{path}: expected a JSON object, got {type(data).__name__}")
    if data.get("format_version") != FORMAT_VERSION:
        raise PersistenceError(f"{path}: unsupported format_version {data.get('format_version')!r}")


# ==================== INSTANCES ====================

def instance_to_dict(instance):
    optimum = None
    if instance.optimum is not None:
        optimum = {"w": instance.optimum.w, "w_bits": instance.optimum.w_bits(instance.n),
                   "cost_min": instance.optimum.cost_min, "multiplicity": instance.optimum.multiplicity}
    return {
        "format_version": FORMAT_VERSION,
        "label": instance.label,
        "n": instance.n,
        "cost_kind": instance.cost_kind.value,
        "marked": instance.marked,
        "table": None if instance.table is None else [float(v) for v in instance.table],
        "clauses": [c.as_list() for c in instance.clauses],
        "optimum": optimum,
        "seed": instance.seed,
    }


def instance_from_dict(data, path="<instance>"):
    _check_version(data, path)
    try:
        optimum = data.get("optimum")
        return Instance(
            n=int(data["n"]),
            clauses=tuple(Clause(int(a), int(b), bool(na), bool(nb)) for a, b, na, nb in data.get("clauses", [])),
            cost_kind=CostKind(data.get("cost_kind", "max2sat")),
            marked=data.get("marked"),
            table=data.get("table"),
            optimum=None if optimum is None else Optimum(w=int(optimum["w"]), cost_min=optimum["cost_min"],
                                                         multiplicity=int(optimum["multiplicity"])),
            seed=data.get("seed"),
            label=data.get("label", ""),
        )
    except InvalidArgumentError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise PersistenceError(f"{path}: malformed instance file ({e})") from e


def write_instance(path, instance, manifest_name=None):
    data = instance_to_dict(instance)
    if manifest_name:
        data["manifest"] = manifest_name
    return save_json(path, data)


def read_instance(path):
    return instance_from_dict(load_json(path), path)


# ==================== PATH-CHANGE TERMS ====================

def write_extra(path, extra):
    save_json(path, {
        "format_version": FORMAT_VERSION,
        "category": Category(extra.category).value,
        "seed": extra.seed,
        "per_clause": extra.per_clause,
        "terms": [{"var_a": t.var_a, "var_b": t.var_b, "basis_labels": list(extra.basis_labels),
                   "coeffs": list(t.coeffs)} for t in extra.terms],
    })


def read_extra(path):
    data = load_json(path)
    _check_version(data, path)
    try:
        category = Category(data["category"])
        terms = []
        for term in data["terms"]:
            if tuple(term["basis_labels"]) != BASIS[category]:
                raise PersistenceError(
                    f"{path}: basis {term['basis_labels']} does not match category {category.value}")
            terms.append(ExtraTerm(int(term["var_a"]), int(term["var_b"]), tuple(float(c) for c in term["coeffs"])))
        return ExtraHamiltonian(category=category, terms=tuple(terms), seed=data.get("seed"),
                                per_clause=bool(data.get("per_clause", False)))
    except InvalidArgumentError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise PersistenceError(f"{path}: malformed extra file ({e})") from e


# ==================== TABLES ====================

def _cell(value):
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return fmt(value)
    return "" if value is None else value


def write_table(path, header, rows, manifest_name):
    buffer = io.StringIO()
    buffer.write(f"# manifest: {manifest_name}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    _atomic_write(path, buffer.getvalue())
    logger.debug(f"wrote {path}")
    return path


def read_table(path):
    """(manifest name, header, rows as dicts of strings)."""
    try:
        with open(path, "r", newline="") as f:
            lines = f.read().splitlines()
    except OSError as e:
        raise PersistenceError(f"cannot read {path}: {e}") from e
    manifest = ""
    if lines and lines[0].startswith("# manifest:"):
        manifest = lines[0].split(":", 1)[1].strip()
    body = [line for line in lines if not line.startswith("#")]
    if not body:
        return manifest, [], []
    reader = csv.reader(body)
    header = next(reader)
    return manifest, header, [dict(zip(header, row)) for row in reader]


def write_trajectory(path, trajectory, manifest_name):
    header = ["t", "s", "energy_expectation", "overlap_ground", "overlap_first_excited", "norm"]
    rows = [[p.t, p.s, p.energy_expectation, p.overlap_ground, p.overlap_first_excited, p.norm]
            for p in trajectory]
    return write_table(path, header, rows, manifest_name)


def write_spectrum(path, slices, manifest_name):
    k = len(slices[0].eigenvalues) if slices else 0
    header = ["s"] + [f"lambda_{i}" for i in range(k)]
    return write_table(path, header, [[sl.s, *map(float, sl.eigenvalues)] for sl in slices], manifest_name)


# ==================== MINING LEDGER ====================

def _repair_tail(path):
    # a row cut off by a kill has no trailing newline; drop it
    with open(path, "rb+") as f:
        data = f.read()
        if data and not data.endswith(b"\n"):
            f.truncate(data.rfind(b"\n") + 1)
            logger.warning(f"{path}: dropped an incomplete trailing ledger row")


def open_ledger(path, manifest_name=LEDGER_MANIFEST):
    """Create the ledger with its header, or validate and repair an existing one."""
    try:
        if not os.path.exists(path):
            os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
            with open(path, "w", newline="") as f:
                f.write(f"# manifest: {manifest_name}\n")
                f.write(f"# format_version={FORMAT_VERSION}\n")
                f.write(",".join(LEDGER_HEADER) + "\n")
            return path
        _repair_tail(path)
        with open(path, "r") as f:
            head = [f.readline().strip() for _ in range(3)]
    except OSError as e:
        raise PersistenceError(f"cannot open ledger {path}: {e}") from e
    if not head[0].startswith("# manifest:") or \
            head[1:] != [f"# format_version={FORMAT_VERSION}", ",".join(LEDGER_HEADER)]:
        raise PersistenceError(f"{path} is not a version {FORMAT_VERSION} mining ledger")
    return path


def read_ledger(path):
    if not os.path.exists(path):
        return []
    _, header, rows = read_table(path)
    if rows and header != LEDGER_HEADER:
        raise PersistenceError(f"{path}: unexpected ledger header {header}")
    return rows


def append_ledger_row(path, values):
    line = io.StringIO()
    csv.writer(line, lineterminator="\n").writerow([_cell(v) for v in values])
    try:
        with open(path, "a", newline="") as f:
            f.write(line.getvalue())
            f.flush()
            os.fsync(f.fileno())
    except OSError as e:
        raise PersistenceError(f"cannot append to ledger {path}: {e}") from e


# ==================== RUN MANIFEST ====================

@dataclass
class RunManifest:
    command: str
    seed: object = None
    config: dict = field(default_factory=QaaConfig.snapshot)
    version: str = VERSION
    inputs: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    started: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    wall_clock: float = 0.0
    stage_timings: dict = field(default_factory=dict)

    def __post_init__(self):
        self._t0 = time.perf_counter()

    @property
    def file_name(self):
        return f"{self.command}.manifest.json"

    @contextmanager
    def stage(self, name):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.stage_timings[name] = self.stage_timings.get(name, 0.0) + time.perf_counter() - t0

    def add_output(self, path):
        self.outputs.append(os.path.basename(path))
        return path

    def save(self, directory):
        self.wall_clock = time.perf_counter() - self._t0
        data = asdict(self)
        data["config"] = {k: v for k, v in data["config"].items() if isinstance(v, (str, int, float, bool))}
        path = os.path.join(directory, self.file_name)
        save_json(path, data)
        return path
