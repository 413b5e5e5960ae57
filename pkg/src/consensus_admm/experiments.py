"""Seeded experiment campaigns emitting CSV artifacts.

A single JSON config object describes one experiment: the network family,
the objective conditioning, the penalty policy, and the seed list.  Runs
are fully deterministic per (config, seed): every row derives its random
streams from its own seed through fixed-purpose substreams, so re-running
a campaign reproduces its CSV output byte for byte.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import admm, dgd, objectives, rates, spectral, topology

EXPERIMENT_KINDS = (
    "linear_convergence",
    "c_sweep",
    "theta_sweep",
    "kappa_f_sweep",
    "topology_study",
    "bipartite_study",
    "dgd_compare",
)

# fixed substream purposes hanging off each row's master seed
_SUB_TOPOLOGY = 0
_SUB_OBJECTIVES = 1
_SUB_P_DRAW = 2

RESULT_COLUMNS = (
    "experiment",
    "seed",
    "L",
    "p",
    "kappa_G",
    "kappa_f",
    "c",
    "rho_bar",
    "rho_t",
    "iterations",
    "terminal_error",
    "D",
    "d_s",
    "L_d",
    "error",
)


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment campaign; mirrors the JSON config object."""

    kind: str
    L: int
    seeds: tuple[int, ...]
    N: int = 3
    topology_kind: str = "random"
    p: float | tuple[float, ...] | None = None
    dims: tuple[int, int, int] | None = None
    L_d: int | tuple[int, ...] | None = None
    kappa_f: float | tuple[float, ...] | None = None
    c: object = "c_t"
    theta: tuple[float, ...] = (0.25, 0.5, 0.75, 1.0)
    max_iter: int = 4000
    tol: float = 1e-15
    track_duals: bool = False
    check_contraction: bool = False
    objectives_csv: str | None = None
    name: str = ""

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if not self.seeds:
            raise ValueError("seed list must be non-empty")

    @property
    def experiment_id(self) -> str:
        return self.name or self.kind

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        topo = d.get("topology", {})
        p = topo.get("p")
        if isinstance(p, list):
            p = tuple(p)
        L_d = topo.get("L_d")
        if isinstance(L_d, list):
            L_d = tuple(L_d)
        kf = d.get("kappa_f")
        if isinstance(kf, list):
            kf = tuple(kf)
        dims = topo.get("dims")
        return cls(
            kind=d["experiment"],
            L=int(d["L"]),
            seeds=tuple(int(x) for x in d["seeds"]),
            N=int(d.get("N", 3)),
            topology_kind=topo.get("kind", "random"),
            p=p,
            dims=tuple(dims) if dims else None,
            L_d=L_d,
            kappa_f=kf,
            c=d.get("c", "c_t"),
            theta=tuple(d.get("theta", (0.25, 0.5, 0.75, 1.0))),
            max_iter=int(d.get("max_iter", 4000)),
            tol=float(d.get("tol", 1e-15)),
            track_duals=bool(d.get("track_duals", False)),
            check_contraction=bool(d.get("check_contraction", False)),
            objectives_csv=d.get("objectives_csv"),
            name=d.get("name", ""),
        )

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        topo: dict = {"kind": self.topology_kind}
        if self.p is not None:
            topo["p"] = list(self.p) if isinstance(self.p, tuple) else self.p
        if self.dims is not None:
            topo["dims"] = list(self.dims)
        if self.L_d is not None:
            topo["L_d"] = list(self.L_d) if isinstance(self.L_d, tuple) else self.L_d
        kf = self.kappa_f
        return {
            "experiment": self.kind,
            "L": self.L,
            "N": self.N,
            "topology": topo,
            "kappa_f": list(kf) if isinstance(kf, tuple) else kf,
            "c": self.c,
            "theta": list(self.theta),
            "seeds": list(self.seeds),
            "max_iter": self.max_iter,
            "tol": self.tol,
            "track_duals": self.track_duals,
            "check_contraction": self.check_contraction,
            "objectives_csv": self.objectives_csv,
            "name": self.name,
        }


def config_hash(config: ExperimentConfig) -> str:
    canon = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def topology_hash(t: topology.Topology) -> str:
    return hashlib.sha256(t.to_edgelist().encode()).hexdigest()[:12]


@dataclass(frozen=True)
class ResultRow:
    """One line of the results CSV."""

    experiment: str
    seed: int
    L: int
    p: float | None = None
    kappa_G: float | None = None
    kappa_f: float | None = None
    c: float | None = None
    rho_bar: float | None = None
    rho_t: float | None = None
    iterations: int | None = None
    terminal_error: float | None = None
    D: int | None = None
    d_s: float | None = None
    L_d: int | None = None
    error: str = ""


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "" if not np.isfinite(v) else repr(v)
    return str(v)


def results_to_csv(rows: list[ResultRow]) -> str:
    lines = [",".join(RESULT_COLUMNS)]
    for r in rows:
        lines.append(",".join(_fmt(getattr(r, col)) for col in RESULT_COLUMNS))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# instance construction


def _substream(seed: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=seed, spawn_key=(index,))


def _scalar(value, name):
    """Resolve a config axis to one value for single-run commands."""
    if isinstance(value, tuple):
        if len(value) == 1:
            return value[0]
        raise ValueError(
            f"config lists several {name} values {value}; this command runs a "
            f"single instance, pass a scalar {name} (or use `sweep`)"
        )
    return value


def build_topology(config: ExperimentConfig, seed: int, p=None, L_d=None):
    kind = config.topology_kind
    t_seed = _substream(seed, _SUB_TOPOLOGY)
    if kind == "random":
        if p is None:
            p = _scalar(config.p, "p")
        if p is None:
            rng = np.random.default_rng(_substream(seed, _SUB_P_DRAW))
            p = float(rng.uniform(2.0 / config.L, 1.0))
        return topology.random_connected(config.L, float(p), t_seed)
    if kind in topology.SPECIAL_KINDS:
        return topology.special(kind, config.L)
    if kind == "grid3d":
        if config.dims is None:
            raise ValueError("grid3d topology needs dims")
        return topology.grid3d(*config.dims)
    if kind == "bipartite":
        if L_d is None:
            L_d = _scalar(config.L_d, "L_d")
        if L_d is None:
            raise ValueError("bipartite topology needs L_d")
        if p is None:
            p = _scalar(config.p, "p")
        if p is None:
            nA = (config.L + int(L_d)) // 2
            p_max = (nA * (config.L - nA)) / (config.L * (config.L - 1) / 2)
            rng = np.random.default_rng(_substream(seed, _SUB_P_DRAW))
            p = float(rng.uniform(2.0 / config.L, p_max))
        return topology.bipartite(config.L, int(L_d), float(p), t_seed)
    raise ValueError(f"unknown topology kind {kind!r}")


def build_objectives(config: ExperimentConfig, seed: int, kappa_f=None):
    if config.objectives_csv is not None:
        s = objectives.from_csv(Path(config.objectives_csv).read_text())
        if s.L != config.L or s.N != config.N:
            raise ValueError(
                f"objectives CSV holds (L={s.L}, N={s.N}), config expects "
                f"(L={config.L}, N={config.N})"
            )
    else:
        s = objectives.generate(config.L, config.N, _substream(seed, _SUB_OBJECTIVES))
    if kappa_f is None:
        kappa_f = _scalar(config.kappa_f, "kappa_f")
    if kappa_f is not None:
        s = objectives.shape_condition(s, float(kappa_f))
    return s


@dataclass(frozen=True)
class Instance:
    """Fully built problem instance for one row."""

    t: topology.Topology
    s: objectives.ObjectiveSet
    inc: spectral.IncidenceSet
    sp: spectral.GraphSpectra
    pf: objectives.ObjectiveProfile
    bundle: rates.RateBundle
    met: topology.NetworkMetrics


def build_instance(config: ExperimentConfig, seed: int, p=None, L_d=None, kappa_f=None) -> Instance:
    t = build_topology(config, seed, p=p, L_d=L_d)
    s = build_objectives(config, seed, kappa_f=kappa_f)
    inc = spectral.build_incidence(t, config.N)
    sp = spectral.spectra(inc)
    pf = objectives.profile(s)
    return Instance(
        t=t, s=s, inc=inc, sp=sp, pf=pf,
        bundle=rates.rate_bundle(sp, pf),
        met=topology.metrics(t),
    )


def resolve_c(policy, bundle: rates.RateBundle) -> float:
    """Map a penalty policy ("c_t", {"theta": x}, {"value": v}) to a number."""
    if policy == "c_t":
        return bundle.c_t
    if isinstance(policy, dict):
        if "theta" in policy:
            return float(policy["theta"]) * bundle.c_t
        if "value" in policy:
            return float(policy["value"])
    raise ValueError(f"cannot resolve penalty policy {policy!r}")


def default_c_grid(c_t_value: float, points: int = 24) -> np.ndarray:
    return np.geomspace(c_t_value / 1e3, 10.0 * c_t_value, points)


def c_grid_from_policy(policy, bundle: rates.RateBundle) -> np.ndarray:
    if isinstance(policy, dict) and "grid" in policy:
        g = policy["grid"]
        lo = float(g.get("lo", 1e-3)) * bundle.c_t
        hi = float(g.get("hi", 10.0)) * bundle.c_t
        return np.geomspace(lo, hi, int(g.get("points", 24)))
    return default_c_grid(bundle.c_t)


# ---------------------------------------------------------------------------
# sweeps


def sweep_c(t, s, c_values, max_iter=1500, tol=1e-13, reference=None):
    """Terminal running-average rate for each penalty in c_values."""
    if reference is None:
        _, x_star = objectives.centralized_solve(s)
    else:
        x_star = reference.x_star
    out = []
    for c in c_values:
        cfg = admm.AdmmConfig(c=float(c), max_iter=max_iter, tol=tol)
        traj = admm.run(t, s, cfg)
        out.append((float(c), traj.rho_bar_terminal, traj.iterations, traj.err_x[-1]))
    return out


def best_practical_c(t, s, grid=None, max_iter=1500, tol=1e-13) -> float:
    """Grid argmin of the terminal rate; ties break toward the smaller c.

    The default grid is 24 log-spaced points on [c_t/1000, 10 c_t].
    """
    if grid is None:
        inc = spectral.build_incidence(t, s.N)
        bundle = rates.rate_bundle(spectral.spectra(inc), objectives.profile(s))
        grid = default_c_grid(bundle.c_t)
    table = sweep_c(t, s, np.sort(np.asarray(grid, dtype=float)), max_iter, tol)
    best_c, best_rho = table[0][0], table[0][1]
    for c, rho_bar, _, _ in table[1:]:
        if rho_bar < best_rho:
            best_c, best_rho = c, rho_bar
    return best_c


# ---------------------------------------------------------------------------
# campaign driver


def row_from_run(config, tag, seed, inst: Instance, c, traj) -> ResultRow:
    return ResultRow(
        experiment=tag,
        seed=seed,
        L=config.L,
        p=inst.met.p,
        kappa_G=inst.sp.kappa_G,
        kappa_f=inst.pf.kappa_f,
        c=c,
        rho_bar=traj.rho_bar_terminal,
        rho_t=inst.bundle.rho_t,
        iterations=traj.iterations,
        terminal_error=float(traj.err_x[-1]),
        D=inst.met.D,
        d_s=inst.met.d_s,
        L_d=inst.met.L_d,
    )


def _error_row(config, tag, seed, exc) -> ResultRow:
    return ResultRow(
        experiment=tag, seed=seed, L=config.L,
        error=f"{type(exc).__name__}: {exc}",
    )


def _points(config: ExperimentConfig):
    """(tag-suffix, overrides) pairs enumerating the campaign's axis."""
    kind = config.kind
    if kind == "linear_convergence":
        ps = config.p if isinstance(config.p, tuple) else (config.p,)
        return [(f"p{p}", {"p": p}) for p in ps]
    if kind == "kappa_f_sweep":
        kfs = config.kappa_f if isinstance(config.kappa_f, tuple) else (config.kappa_f,)
        return [(f"kf{kf}", {"kappa_f": kf}) for kf in kfs]
    if kind == "theta_sweep":
        return [(f"theta{th}", {"theta": th}) for th in config.theta]
    if kind == "bipartite_study":
        lds = config.L_d if isinstance(config.L_d, tuple) else (config.L_d,)
        return [(f"Ld{ld}", {"L_d": ld}) for ld in lds]
    return [("", {})]


def run_experiment(config: ExperimentConfig, out_dir: str | Path | None = None):
    """Execute a campaign; returns its rows and writes CSV artifacts.

    Rows appear in deterministic (config-point, seed) order.  A failing
    seed yields a row with the error column set instead of aborting the
    batch.
    """
    h = config_hash(config)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    rows: list[ResultRow] = []
    traj_files: list[tuple[str, admm.Trajectory]] = []

    def save_traj(tag_suffix, seed, traj, algo=""):
        parts = [p for p in (tag_suffix, algo) if p]
        stem = "_".join(["traj", h, *parts, f"s{seed}"])
        traj_files.append((stem, traj))

    for tag_suffix, over in _points(config):
        tag = config.experiment_id + (f":{tag_suffix}" if tag_suffix else "")
        for seed in config.seeds:
            try:
                rows.extend(
                    _run_point(config, tag, tag_suffix, seed, over, save_traj)
                )
            except Exception as exc:  # noqa: BLE001 - row-level error marker
                rows.append(_error_row(config, tag, seed, exc))

    if out is not None:
        (out / f"results_{h}.csv").write_text(results_to_csv(rows), newline="\n")
        for stem, traj in traj_files:
            (out / f"{stem}.csv").write_text(traj.to_csv_text(), newline="\n")
    return rows


def _run_point(config, tag, tag_suffix, seed, over, save_traj):
    kind = config.kind
    if kind == "c_sweep":
        inst = build_instance(config, seed)
        grid = c_grid_from_policy(config.c, inst.bundle)
        ref = admm.reference_solution(inst.s, inst.inc)
        out = []
        for idx, (c, rho_bar, iters, err) in enumerate(
            sweep_c(inst.t, inst.s, grid, config.max_iter, config.tol, reference=ref)
        ):
            out.append(ResultRow(
                experiment=f"{tag}:c{idx:02d}",
                seed=seed, L=config.L, p=inst.met.p,
                kappa_G=inst.sp.kappa_G, kappa_f=inst.pf.kappa_f,
                c=c, rho_bar=rho_bar, rho_t=inst.bundle.rho_t,
                iterations=iters, terminal_error=err,
                D=inst.met.D, d_s=inst.met.d_s, L_d=inst.met.L_d,
            ))
        return out

    if kind == "theta_sweep":
        inst = build_instance(config, seed)
        c = float(over["theta"]) * inst.bundle.c_t
    else:
        inst = build_instance(
            config, seed,
            p=over.get("p"), L_d=over.get("L_d"), kappa_f=over.get("kappa_f"),
        )
        c = resolve_c(config.c, inst.bundle)

    cfg = admm.AdmmConfig(
        c=c, max_iter=config.max_iter, tol=config.tol,
        track_duals=config.track_duals,
        check_contraction=config.check_contraction,
    )
    traj = admm.run(inst.t, inst.s, cfg, inc=inst.inc)
    save_traj(tag_suffix, seed, traj, algo="admm" if kind == "dgd_compare" else "")
    rows = [row_from_run(config, tag + (":admm" if kind == "dgd_compare" else ""),
                          seed, inst, c, traj)]
    if kind == "dgd_compare":
        dtraj = dgd.run_dgd(inst.t, inst.s, config.max_iter)
        save_traj(tag_suffix, seed, dtraj, algo="dgd")
        rows.append(row_from_run(config, tag + ":dgd", seed, inst, None, dtraj))
    return rows
