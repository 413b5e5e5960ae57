"""Command-line entry point.

Every subcommand reads the same JSON experiment config; --seed narrows the
run to a single seed.  Exit codes: 0 on success, 1 on usage errors, 2 when
a certified runtime invariant fails.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import admm, dgd, experiments, objectives, rates, spectral
from .admm import InvariantViolation


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="consensus-admm")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_ in (
        ("gen-graph", "generate a topology and write its edge list"),
        ("spectra", "print the Laplacian spectra row for a topology"),
        ("rates", "print the rate certificate row for an instance"),
        ("run-admm", "run the ADMM engine and write its trajectory"),
        ("run-dgd", "run the DGD baseline and write its trajectory"),
        ("sweep", "run a full experiment campaign"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="JSON experiment config file")
        p.add_argument("--out", default=None, help="output directory for CSV artifacts")
        p.add_argument("--seed", type=int, default=None, help="override the config seed list")
    return parser


def _load_config(args) -> experiments.ExperimentConfig:
    text = Path(args.config).read_text()
    cfg = experiments.ExperimentConfig.from_json(text)
    if args.seed is not None:
        cfg = experiments.ExperimentConfig.from_dict(
            {**cfg.to_dict(), "seeds": [args.seed]}
        )
    return cfg


def _out_dir(args) -> Path | None:
    if args.out is None:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_gen_graph(args) -> int:
    cfg = _load_config(args)
    t = experiments.build_topology(cfg, cfg.seeds[0])
    text = t.to_edgelist()
    name = f"graph_{experiments.topology_hash(t)}.txt"
    out = _out_dir(args)
    if out is not None:
        (out / name).write_text(text, newline="\n")
        print(out / name)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_spectra(args) -> int:
    cfg = _load_config(args)
    t = experiments.build_topology(cfg, cfg.seeds[0])
    sp = spectral.spectra(spectral.build_incidence(t, cfg.N))
    header = "topology_hash,lam_max_Lplus,lam_tmin_Lminus,kappa_G"
    row = ",".join(
        [experiments.topology_hash(t)]
        + [repr(v) for v in (sp.lam_max_Lplus, sp.lam_tmin_Lminus, sp.kappa_G)]
    )
    text = f"{header}\n{row}\n"
    sys.stdout.write(text)
    out = _out_dir(args)
    if out is not None:
        (out / f"spectra_{experiments.topology_hash(t)}.csv").write_text(
            text, newline="\n"
        )
    return 0


def _cmd_rates(args) -> int:
    cfg = _load_config(args)
    seed = cfg.seeds[0]
    inst = experiments.build_instance(cfg, seed)
    b = inst.bundle
    header = "kappa_G,kappa_f,c_t,mu_star,delta_t,rho_t"
    row = ",".join(
        repr(v)
        for v in (inst.sp.kappa_G, inst.pf.kappa_f, b.c_t, b.mu_star, b.delta_t, b.rho_t)
    )
    text = f"{header}\n{row}\n"
    sys.stdout.write(text)
    out = _out_dir(args)
    if out is not None:
        (out / f"rates_{experiments.config_hash(cfg)}_s{seed}.csv").write_text(
            text, newline="\n"
        )
    return 0


def _run_single(args, use_dgd: bool) -> int:
    cfg = _load_config(args)
    seed = cfg.seeds[0]
    inst = experiments.build_instance(cfg, seed)
    if use_dgd:
        traj = dgd.run_dgd(inst.t, inst.s, cfg.max_iter)
        c = None
    else:
        c = experiments.resolve_c(cfg.c, inst.bundle)
        run_cfg = admm.AdmmConfig(
            c=c, max_iter=cfg.max_iter, tol=cfg.tol,
            track_duals=cfg.track_duals,
            check_contraction=cfg.check_contraction,
        )
        traj = admm.run(inst.t, inst.s, run_cfg, inc=inst.inc)
    algo = "dgd" if use_dgd else "admm"
    out = _out_dir(args)
    if out is not None:
        h = experiments.config_hash(cfg)
        name = f"traj_{h}_{algo}_s{seed}.csv"
        (out / name).write_text(traj.to_csv_text(), newline="\n")
        # instance dump so the exact run can be replayed via objectives_csv
        (out / f"objectives_{h}_s{seed}.csv").write_text(
            objectives.to_csv(inst.s), newline="\n"
        )
        print(out / name)
    row = experiments.row_from_run(
        cfg, f"{cfg.experiment_id}:{algo}", seed, inst, c, traj
    )
    sys.stdout.write(experiments.results_to_csv([row]))
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args)
    rows = experiments.run_experiment(cfg, out_dir=out)
    if out is not None:
        print(out / f"results_{experiments.config_hash(cfg)}.csv")
    else:
        sys.stdout.write(experiments.results_to_csv(rows))
    return 0


_COMMANDS = {
    "gen-graph": _cmd_gen_graph,
    "spectra": _cmd_spectra,
    "rates": _cmd_rates,
    "run-admm": lambda a: _run_single(a, use_dgd=False),
    "run-dgd": lambda a: _run_single(a, use_dgd=True),
    "sweep": _cmd_sweep,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
