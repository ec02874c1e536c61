"""Config-driven batch experiments with deterministic, worker-count independent outputs.

Every task gets the seed mix(master_seed, task_index) and is a pure
function of (config, index, seed). Results are collected in task order and
written by the parent process only.
"""
from __future__ import annotations

import copy
import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from ._rng import mix_seed
from .coloring import empirical_frequency_table, exact_frequency_table, total_variation
from .empirical import Marginal, ProductReference, Sample, ks_statistic, orthant_discrepancy
from .ergodic import (EigenvalueCountingField, PotentialThresholdField, dirichlet_counting_function,
                      error_bound_amenable, error_bound_lmv)
from .errors import UsageError
from .groups import FolnerSpec, SiteSet, group_from_config
from .hamiltonian import ModelSpec
from .plotting import Series, emit_plot, series_from_csv
from .spectral import fmt17, sup_norm
from .tiling import (construct_quasi_tiling, coverage_densities, heisenberg_box_chain, select_shapes,
                     tiling_params, verify_quasi_tiling)

DEFAULT_SEED = 20240101
HASH_EXCLUDED = ("workers", "output")


class ConfigError(UsageError):
    """Invalid configuration; ``pointer`` is the JSON pointer of the offending value."""

    def __init__(self, pointer: str, message: str):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer or "/"
        self.detail = message


def load_schema(name: str) -> dict:
    return json.loads(resources.files("thermolim").joinpath("schemas", f"{name}.schema.json").read_text())


def _pointer(path) -> str:
    return "".join(f"/{p}" for p in path)


def validate_config(cfg: dict) -> dict:
    """Schema check plus the parameter constraints the schema cannot express."""
    validator = jsonschema.Draft202012Validator(load_schema("config"))
    errors = sorted(validator.iter_errors(cfg), key=lambda e: (len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        err = errors[0]
        raise ConfigError(_pointer(err.absolute_path), err.message)
    kind = cfg["experiment"]
    params = cfg.get("params", {})
    needs_model = kind in ("ids", "freq", "bounds", "report")
    if needs_model and "model" not in cfg:
        raise ConfigError("/model", f"experiment {kind!r} needs a model")
    if needs_model or kind == "tile":
        if "group" not in cfg:
            raise ConfigError("/group", f"experiment {kind!r} needs a group")
    if "group" in cfg and cfg["group"]["kind"] == "heisenberg" and "d" in cfg["group"]:
        raise ConfigError("/group/d", "the Heisenberg group takes no dimension")
    if "model" in cfg:
        try:
            model = ModelSpec.from_config(cfg["model"], group_from_config(cfg["group"]))
        except UsageError as exc:
            raise ConfigError("/model", str(exc)) from None
        if kind in ("bounds", "freq", "report") and model.kind != "visible-points" and not model.colors().is_finite:
            raise ConfigError("/model/potential", "pattern frequencies need a finite color set")
    if kind in ("bounds", "report"):
        sizes, windows = params.get("sizes", []), params.get("windows", [])
        if not sizes:
            raise ConfigError("/params/sizes", "required")
        if not windows:
            raise ConfigError("/params/windows", "required")
        for i, L in enumerate(windows):
            for k, j in enumerate(sizes):
                if not j > 2 * L:
                    raise ConfigError(f"/params/sizes/{k}", f"need j > 2L, got j={j}, L={L}")
    if kind in ("ids", "freq") and not params.get("sizes"):
        raise ConfigError("/params/sizes", "required")
    if kind == "freq" and not params.get("windows"):
        raise ConfigError("/params/windows", "required")
    if kind in ("ids", "report") and params.get("reference") == "dirichlet-1d":
        m = cfg["model"]
        pot = m.get("potential", {})
        zero = m.get("kind") == "anderson" and pot.get("kind") == "finite" and list(pot.get("values", [])) == [0]
        if not zero or cfg["group"] != {"kind": "zd", "d": 1}:
            raise ConfigError("/params/reference", "dirichlet-1d needs the free Laplacian on Z (potential {0}, d = 1)")
    if kind == "tile" and not params.get("eps"):
        raise ConfigError("/params/eps", "required")
    if kind == "tile" and "region" in params and len(params["region"]) != group_from_config(cfg["group"]).dim:
        raise ConfigError("/params/region", "region shape must have one side per coordinate")
    if kind == "gc" and not params.get("n"):
        raise ConfigError("/params/n", "required")
    return cfg


def config_hash(cfg: dict) -> str:
    core = {k: v for k, v in cfg.items() if k not in HASH_EXCLUDED}
    text = json.dumps(core, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


# task bodies; each returns a dict of named row lists and optional side files


def _model(cfg):
    return ModelSpec.from_config(cfg["model"], group_from_config(cfg["group"]))


def _field(cfg, model):
    if cfg.get("field", "eigenvalue-counting") == "potential-threshold":
        return PotentialThresholdField(model.group)
    return EigenvalueCountingField(model)


def _ids_task(cfg, index, seed):
    params = cfg.get("params", {})
    model = _model(cfg)
    fld = _field(cfg, model)
    coloring = model.coloring(seed)
    sizes = sorted(params["sizes"])
    values = {j: fld.normalized(SiteSet.cube(model.group, j), coloring) for j in sizes}
    if params.get("reference", "largest") == "dirichlet-1d":
        ref = dirichlet_counting_function(params.get("reference_size", 4096))
        ref_name = "dirichlet-1d"
    else:
        top = params.get("reference_size", max(sizes))
        ref = values[top] if top in values else fld.normalized(SiteSet.cube(model.group, top), coloring)
        ref_name = f"size-{top}"
    rows = [[index, seed, j, ref_name, fmt17(sup_norm(values[j], ref))] for j in sizes]
    files = {}
    if index == 0:
        files = {f"counting_size{j}.csv": values[j].to_csv() for j in sizes}
    return {"ids": rows}, files


def _freq_task(cfg, index, seed):
    params = cfg.get("params", {})
    model = _model(cfg)
    coloring = model.coloring(seed)
    colors = model.colors() if model.kind != "visible-points" else None
    rows, files = [], {}
    for j in sorted(params["sizes"]):
        region = SiteSet.cube(model.group, j)
        for L in sorted(params["windows"]):
            window = SiteSet.cube(model.group, L)
            table = empirical_frequency_table(coloring, region, window)
            l1 = tv = ""
            if colors is not None:
                gap = total_variation(table, exact_frequency_table(colors, window))
                l1, tv = fmt17(gap["l1"]), fmt17(gap["tv"])
            rows.append([index, seed, j, L, len(table), l1, tv])
            if index == 0:
                files[f"patterns_size{j}_window{L}.csv"] = table.to_csv()
    return {"freq": rows}, files


def _tile_shapes(cfg, eps):
    params = cfg.get("params", {})
    group = group_from_config(cfg["group"])
    rule = params.get("selection", "consecutive")
    n = tiling_params(eps).N
    if "folner" in cfg:
        spec = FolnerSpec(group, cfg["folner"]["family"], tuple(cfg["folner"]["indices"]),
                          cfg["folner"].get("nested", True))
        return select_shapes(spec, eps, rule)
    if group.kind == "heisenberg":
        if rule != "consecutive":
            raise UsageError("the default Heisenberg chain only supports consecutive selection")
        return heisenberg_box_chain(n)
    if rule == "invariance":
        return select_shapes(FolnerSpec(group, "cubes", (1,)), eps, rule)
    return [SiteSet.cube(group, s) for s in range(1, n + 1)]


def _tile_task(cfg, index, seed):
    params = cfg.get("params", {})
    eps = sorted(params["eps"])[index]
    group = group_from_config(cfg["group"])
    default = (24, 24, 576) if group.kind == "heisenberg" else (200,) * group.dim
    region = SiteSet.box(group, tuple(params.get("region", default)))
    shapes = _tile_shapes(cfg, eps)
    qt = construct_quasi_tiling(region, shapes, eps)
    cert = verify_quasi_tiling(qt, eps)
    dens = coverage_densities(qt)
    doc = qt.to_dict(cert)
    doc["densities"] = dens
    row = [fmt17(eps), len(shapes), len(region), fmt17(cert["uncovered_fraction"]), cert["condition_i"],
           cert["condition_ii"], cert["condition_iii"], cert["passed"], fmt17(max(dens["deviation"])),
           len(dens["flagged"])]
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return {"tile": [row]}, {f"tiling_eps{fmt17(eps)}.json": text + "\n"}


def _gc_reference(params):
    marg = Marginal.normal() if params.get("distribution", "uniform") == "normal" else Marginal.uniform()
    return ProductReference([marg] * params.get("dimension", 1))


def _gc_task(cfg, index, seed):
    params = cfg.get("params", {})
    ref = _gc_reference(params)
    stat = orthant_discrepancy if ref.k > 1 else (lambda s, r: ks_statistic(s, r.marginals[0]))
    reps = params.get("realizations", 1)
    n = sorted(params["n"])[index // reps]
    value = stat(Sample.draw(ref, n, seed), ref)
    return {"gc": [[index, seed, n, index % reps, fmt17(value)]]}, {}


def _bounds_task(cfg, index, seed):
    params = cfg.get("params", {})
    model = _model(cfg)
    fld = _field(cfg, model)
    coloring = model.coloring(seed)
    colors = model.colors()
    evaluate = error_bound_amenable if params.get("shell") == "window-diameter" else error_bound_lmv
    rows = []
    regions = {j: SiteSet.cube(model.group, j) for j in params["sizes"]}
    values = {j: fld.normalized(q, coloring) for j, q in regions.items()}
    for L in sorted(params["windows"]):
        window = SiteSet.cube(model.group, L)
        limit = exact_frequency_table(colors, window)
        for j in sorted(params["sizes"]):
            rep = evaluate(fld, coloring, regions[j], window, limit, L=L, j=j, value=values[j])
            rows.append([index, seed, j, L, rep.shell_radius, fmt17(rep.lhs)] + [fmt17(t) for t in rep.terms]
                        + [fmt17(rep.rhs), rep.passed])
    return {"bounds": rows}, {}


def _report_task(cfg, index, seed):
    tables, files = _ids_task(cfg, index, seed)
    more, _ = _bounds_task(cfg, index, seed)
    tables.update(more)
    return tables, files


TASKS = {"ids": _ids_task, "freq": _freq_task, "tile": _tile_task, "gc": _gc_task, "bounds": _bounds_task,
         "report": _report_task}

HEADERS = {
    "ids": ["realization", "seed", "size[sites per side]", "reference", "sup_error[states per site]"],
    "freq": ["realization", "seed", "size[sites per side]", "window[sites per side]", "patterns[count]",
             "l1_to_exact[probability]", "tv_to_exact[probability]"],
    "tile": ["eps", "shapes[count]", "region[sites]", "uncovered_fraction[fraction of region]", "condition_i",
             "condition_ii", "condition_iii", "passed", "max_density_deviation[fraction of region]",
             "flagged_shapes[count]"],
    "gc": ["task", "seed", "n[sample size]", "realization", "statistic[probability]"],
    "bounds": ["realization", "seed", "size[sites per side]", "window[sites per side]", "shell_radius[word length]",
               "lhs[states per site]", "term_window[states per site]", "term_shell[states per site]",
               "term_frequency[states per site]", "rhs[states per site]", "pass"],
}


def task_list(cfg: dict) -> list[tuple[int, str]]:
    kind = cfg["experiment"]
    params = cfg.get("params", {})
    if kind == "tile":
        return [(i, f"eps={fmt17(e)}") for i, e in enumerate(sorted(params["eps"]))]
    if kind == "gc":
        reps = params.get("realizations", 1)
        return [(i, f"n={n} realization={r}") for i, (n, r) in
                enumerate((n, r) for n in sorted(params["n"]) for r in range(reps))]
    return [(i, f"realization={i}") for i in range(params.get("realizations", 1))]


def _run_one(args):
    kind, cfg, index, seed = args
    start = time.perf_counter()
    try:
        tables, files = TASKS[kind](cfg, index, seed)
        return index, "ok", tables, files, "", time.perf_counter() - start
    except Exception as exc:  # recorded in the manifest, never fatal for the run
        return index, "failed", {}, {}, f"{type(exc).__name__}: {exc}", time.perf_counter() - start


def _csv_text(header, rows) -> str:
    def cell(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, float):
            return fmt17(v)
        return str(v)

    lines = [",".join(header)] + [",".join(cell(v) for v in r) for r in rows]
    return "\n".join(lines) + "\n"


@dataclass
class RunManifest:
    data: dict
    files: dict = field(default_factory=dict)

    @property
    def status(self) -> str:
        return self.data["status"]

    @property
    def exit_code(self) -> int:
        return 0 if self.status == "ok" else 3


def _concentration_rows(rows, kappa):
    by_n: dict[int, list[float]] = {}
    for r in rows:
        by_n.setdefault(r[2], []).append(float(r[4]))
    out = []
    for n, vals in sorted(by_n.items()):
        exceed = sum(v > kappa for v in vals)
        out.append([n, fmt17(kappa), exceed, len(vals), fmt17(exceed / len(vals))])
    return out


def _summaries(kind, tables) -> list[dict]:
    sections = []
    if "ids" in tables:
        rows = tables["ids"]
        errs: dict[int, list[float]] = {}
        for r in rows:
            errs.setdefault(r[2], []).append(float(r[4]))
        summary = {f"mean_error_size{j}": float(np.mean(v)) for j, v in sorted(errs.items())}
        sections.append({"name": "ids", "rows": len(rows), "summary": summary})
    if "bounds" in tables:
        rows = tables["bounds"]
        viol = sum(not r[-1] for r in rows)
        worst = max((float(r[5]) - float(r[9]) for r in rows), default=0.0)
        sections.append({"name": "bounds", "rows": len(rows),
                         "summary": {"violations": viol, "max_lhs_minus_rhs": worst}})
    return sections


def run_experiment(cfg: dict, workers: int | None = None, out: str | Path | None = None,
                   seed: int | None = None) -> RunManifest:
    """Validate, execute all tasks and write CSV/JSON/SVG outputs plus manifest.json."""
    cfg = copy.deepcopy(cfg)
    if seed is not None:
        cfg["seed"] = int(seed)
    cfg.setdefault("seed", DEFAULT_SEED)
    validate_config(cfg)
    workers = int(workers or cfg.get("workers", 1))
    out_dir = Path(out or cfg.get("output", "results"))
    out_dir.mkdir(parents=True, exist_ok=True)
    kind = cfg["experiment"]
    chash = config_hash(cfg)
    tasks = task_list(cfg)
    jobs = [(kind, cfg, i, mix_seed(cfg["seed"], i)) for i, _ in tasks]
    t0 = time.perf_counter()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    results.sort(key=lambda r: r[0])
    tables: dict[str, list] = {}
    side_files: dict[str, str] = {}
    task_records, failures = [], []
    for (index, status, tbl, files, error, secs), (_, label), job in zip(results, tasks, jobs):
        task_records.append({"index": index, "label": label, "seed": job[3], "status": status,
                             "seconds": round(secs, 6)})
        if status != "ok":
            failures.append({"index": index, "label": label, "error": error})
            continue
        for name, rows in tbl.items():
            tables.setdefault(name, []).extend(rows)
        side_files.update(files)
    written: dict[str, str] = {}
    for name, rows in tables.items():
        written[f"{name}.csv"] = _csv_text(HEADERS[name], rows)
    if kind == "gc" and tables.get("gc"):
        kappa = cfg.get("params", {}).get("kappa", 0.1)
        written["gc_concentration.csv"] = _csv_text(
            ["n[sample size]", "kappa[probability]", "exceedances[count]", "trials[count]", "frequency[fraction]"],
            _concentration_rows(tables["gc"], kappa))
    written.update(side_files)
    written.update(_plots(kind, tables, side_files))
    if kind == "report":
        report = {"experiment": kind, "config_hash": chash, "sections": _summaries(kind, tables)}
        jsonschema.validate(report, load_schema("report"))
        written["report.json"] = json.dumps(report, sort_keys=True, indent=2) + "\n"
    outputs = []
    for name in sorted(written):
        (out_dir / name).write_text(written[name])
        outputs.append({"path": name, "sha256": hashlib.sha256(written[name].encode()).hexdigest()})
    manifest = {
        "config_hash": chash,
        "tool_version": __version__,
        "experiment": kind,
        "master_seed": int(cfg["seed"]),
        "workers": workers,
        "tasks": task_records,
        "outputs": outputs,
        "failures": failures,
        "status": "ok" if not failures else "partial",
        "wall_seconds": round(time.perf_counter() - t0, 6),
    }
    jsonschema.validate(manifest, load_schema("manifest"))
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return RunManifest(manifest, written)


def _plots(kind, tables, side_files) -> dict[str, str]:
    plots = {}
    if "ids" in tables and tables["ids"]:
        errs: dict[int, list[float]] = {}
        for r in tables["ids"]:
            errs.setdefault(r[2], []).append(float(r[4]))
        xs = sorted(errs)
        ys = [float(np.mean(errs[j])) for j in xs]
        positive = all(y > 0 for y in ys)
        plots["ids_error.svg"] = emit_plot([Series(xs, ys, "mean sup error")], "line", log_x=positive, log_y=positive,
                                           x_label="size", y_label="sup error")
        steps = [s for name in sorted(side_files) if name.startswith("counting_size")
                 for s in series_from_csv(side_files[name], "step")]
        names = [n for n in sorted(side_files) if n.startswith("counting_size")]
        for s, name in zip(steps, names):
            s.label = name[len("counting_"):-len(".csv")]
        if steps:
            plots["counting.svg"] = emit_plot(steps, "step", x_label="energy", y_label="states per site")
    return plots


def load_config(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON: {exc}") from None
