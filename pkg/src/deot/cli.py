"""Experiment driver: synthetic data, centralized/decentralized solves,
kernel sketching, error analysis, parameter sweeps, and domain adaptation.

Configs are flat JSON files; every emitted artifact is a function of
(config, seed).  Exit codes: 0 success, 1 validation error, 2 numerical
failure (a partial trace is still written when one exists).
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field, asdict
from pathlib import Path

import click
import numpy as np

from .adaptation import domain_adapt
from .analysis import (convergence_error_curve, decompose_errors,
                       default_gip_params, kernel_error_propagation,
                       original_optimum, protocol_mismatch_check)
from .dual import OverflowGuardError
from .measures import CostSpec, DiscreteMeasure, load_csv, save_csv
from .netsim import (AgentPartition, protocol_generator, protocol_mismatch,
                     storage_protocol)
from .sinkhorn import sinkhorn_oracle
from .sketch import draw_shared_randomness, run_sketch_exchange, sketch_error_bound
from .solver import SolverConfig, solve
from .synthetic import generate_synthetic, translated_blobs
from .analysis import kernel_gap_frobenius


class ConfigError(ValueError):
    """Raised with every validation failure collected at once."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid config:\n" + "\n".join(f"  - {p}" for p in self.problems))


@dataclass
class ExperimentConfig:
    """Flat experiment description, validated before any run starts."""

    dataset: dict = field(default_factory=lambda: {"kind": "gaussian", "mean": [0.0, 0.0], "cov": 0.01})
    dataset_target: dict | None = None
    n_source: int = 200
    n_target: int = 200
    n_source_agents: int = 5
    n_target_agents: int = 5
    protocol: str = "ideal"
    sparsity: float = 0.5
    protocol_seed: int = 0
    storage_mode: str = "iid"
    epsilon: float = 0.1
    eta0: float = 10.0
    T: int = 1000
    L: int = 1
    kernel: str = "exact"
    P: int = 1000
    cost: str = "squared_euclidean"
    record_every: int = 50
    seeds: list = field(default_factory=lambda: [0])
    out_dir: str = "out"

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        problems = [f"unknown key {k!r}" for k in raw if k not in known]
        cfg = cls(**{k: v for k, v in raw.items() if k in known})
        problems += cfg.validation_problems()
        if problems:
            raise ConfigError(problems)
        return cfg

    def validation_problems(self) -> list:
        problems = []
        if self.dataset.get("kind") not in ("gaussian", "gmm", "csv"):
            problems.append(f"dataset kind must be gaussian|gmm|csv, got {self.dataset.get('kind')!r}")
        for name, v in (("n_source", self.n_source), ("n_target", self.n_target),
                        ("n_source_agents", self.n_source_agents),
                        ("n_target_agents", self.n_target_agents),
                        ("T", self.T), ("L", self.L), ("P", self.P)):
            if not isinstance(v, int) or v < 1:
                problems.append(f"{name} must be a positive integer, got {v!r}")
        if self.protocol not in ("ideal", "sparse", "sparse_asymmetric"):
            problems.append(f"protocol must be ideal|sparse|sparse_asymmetric, got {self.protocol!r}")
        if not 0.0 <= self.sparsity < 1.0:
            problems.append(f"sparsity must be in [0, 1), got {self.sparsity!r}")
        if self.storage_mode not in ("iid", "non_iid"):
            problems.append(f"storage_mode must be iid|non_iid, got {self.storage_mode!r}")
        if not self.epsilon > 0:
            problems.append(f"epsilon must be positive, got {self.epsilon!r}")
        if not self.eta0 > 0:
            problems.append(f"eta0 must be positive, got {self.eta0!r}")
        if self.kernel not in ("exact", "approx"):
            problems.append(f"kernel must be exact|approx, got {self.kernel!r}")
        if self.cost not in ("squared_euclidean", "euclidean"):
            problems.append(f"cost must be squared_euclidean|euclidean, got {self.cost!r}")
        if isinstance(self.L, int) and isinstance(self.n_target_agents, int) \
                and self.L > max(self.n_source_agents, self.n_target_agents):
            problems.append(f"L={self.L} exceeds the number of agents")
        if not self.seeds:
            problems.append("seeds must be a non-empty list")
        return problems

    def solver_config(self, seed: int) -> SolverConfig:
        return SolverConfig(
            epsilon=self.epsilon, eta0=self.eta0, T=self.T, L=self.L,
            seed=seed,
            kernel_source="exact" if self.kernel == "exact" else "approximated",
            P=self.P, record_every=self.record_every, cost_kind=self.cost)

    def cost_spec(self) -> CostSpec:
        return CostSpec(self.cost, self.epsilon)


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        raw = json.load(fh)
    return ExperimentConfig.from_dict(raw)


def _measure(spec: dict, n: int, seed: int) -> DiscreteMeasure:
    if spec.get("kind") == "csv":
        return DiscreteMeasure(load_csv(spec["path"]))
    full = dict(spec, n=n)
    return generate_synthetic(full, seed=seed)


def load_pair(cfg: ExperimentConfig, seed: int):
    """Source and target measures for one seed; the target spec defaults to
    the source spec with an independent stream."""
    tgt_spec = cfg.dataset_target or cfg.dataset
    mu = _measure(cfg.dataset, cfg.n_source, seed)
    gamma = _measure(tgt_spec, cfg.n_target, seed + 10_000)
    return mu, gamma


def build_partition(cfg: ExperimentConfig, mu, gamma, seed: int) -> AgentPartition:
    return AgentPartition.create(mu, gamma, cfg.n_source_agents,
                                 cfg.n_target_agents, mode=cfg.storage_mode,
                                 seed=seed)


def build_protocol(cfg: ExperimentConfig, I: int, J: int):
    return protocol_generator(cfg.protocol, I, J, cfg.sparsity,
                              seed=cfg.protocol_seed)


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_rows(path: Path, rows, fmt: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        _write_json(path.with_suffix(".json"), rows)
        return
    if not rows:
        path.with_suffix(".csv").write_text("")
        return
    keys = list(rows[0])
    with open(path.with_suffix(".csv"), "w") as fh:
        fh.write(",".join(keys) + "\n")
        for row in rows:
            fh.write(",".join(repr(row[k]) if isinstance(row[k], float)
                              else str(row[k]) for k in keys) + "\n")


def summary_schema_ok(summary: dict) -> bool:
    """Every run summary carries the oracle value, one final distance per
    seed, and the ledger totals."""
    if not {"oracle_value", "per_seed", "ledger_totals"} <= set(summary):
        return False
    per_seed = summary["per_seed"]
    if not per_seed or not all("distance" in r and "seed" in r for r in per_seed):
        return False
    return {"scalars", "bits"} <= set(summary["ledger_totals"])


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> dict:
    """Solve per seed, write traces/ledgers, and return the summary dict."""
    out = Path(out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    per_seed = []
    total_scalars = total_bits = 0
    oracle_value = None
    for seed in cfg.seeds:
        mu, gamma = load_pair(cfg, seed)
        partition = build_partition(cfg, mu, gamma, seed)
        E = build_protocol(cfg, cfg.n_source_agents, cfg.n_target_agents)
        seed_oracle, _ = original_optimum(partition, cfg.cost_spec())
        if oracle_value is None:
            oracle_value = seed_oracle
        result = solve(partition, E, cfg.solver_config(seed),
                       oracle_value=seed_oracle)
        result.trace.to_csv(out / f"trace_seed{seed}.csv")
        result.ledger.to_json(out / f"ledger_seed{seed}.json")
        total_scalars += result.ledger.total_scalars()
        total_bits += result.ledger.total_bits()
        per_seed.append({"seed": seed, "distance": result.distance,
                         "oracle": seed_oracle,
                         "gap": abs(result.distance - seed_oracle)})
    summary = {
        "oracle_value": oracle_value,
        "per_seed": per_seed,
        "ledger_totals": {"scalars": total_scalars, "bits": total_bits},
        "config": asdict(cfg),
    }
    if not summary_schema_ok(summary):
        raise RuntimeError("summary failed its schema check")
    _write_json(out / "summary.json", summary)
    return summary


@click.group()
def main():
    """Decentralized entropic optimal transport experiment driver."""


def _cli_guard(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (ConfigError, ValueError) as err:
        click.echo(f"error: {err}", err=True)
        sys.exit(1)
    except (OverflowGuardError, FloatingPointError, RuntimeError) as err:
        click.echo(f"numerical failure: {err}", err=True)
        sys.exit(2)


config_opt = click.option("--config", "config_path", required=True,
                          type=click.Path(exists=True, dir_okay=False))
seed_opt = click.option("--seed", type=int, default=None,
                        help="override the config's seed list with one seed")
out_opt = click.option("--out", "out_dir", type=click.Path(file_okay=False),
                       default=None, help="output directory")
fmt_opt = click.option("--format", "fmt", type=click.Choice(["csv", "json"]),
                       default="csv")


def _apply_seed(cfg: ExperimentConfig, seed):
    if seed is not None:
        cfg.seeds = [seed]
    return cfg


@main.command("gen-data")
@config_opt
@seed_opt
@out_opt
@fmt_opt
def gen_data(config_path, seed, out_dir, fmt):
    """Sample the configured synthetic source/target pair to CSV."""
    def run():
        cfg = _apply_seed(load_config(config_path), seed)
        out = Path(out_dir or cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for s in cfg.seeds:
            mu, gamma = load_pair(cfg, s)
            save_csv(out / f"source_seed{s}.csv", mu.samples)
            save_csv(out / f"target_seed{s}.csv", gamma.samples)
        click.echo(f"wrote {2 * len(cfg.seeds)} files to {out}")
    _cli_guard(run)


@main.command("solve-centralized")
@config_opt
@seed_opt
@out_opt
@fmt_opt
def solve_centralized(config_path, seed, out_dir, fmt):
    """Log-domain Sinkhorn on the pooled data; prints the oracle value."""
    def run():
        cfg = _apply_seed(load_config(config_path), seed)
        rows = []
        for s in cfg.seeds:
            mu, gamma = load_pair(cfg, s)
            res = sinkhorn_oracle(mu, gamma, cfg.cost_spec())
            rows.append({"seed": s, "value": res.value,
                         "n_iter": res.n_iter, "converged": res.converged,
                         "marginal_violation": res.marginal_violation})
            click.echo(f"seed {s}: W_eps = {res.value:.10f} "
                       f"({res.n_iter} iterations)")
        if out_dir or cfg.out_dir:
            _write_rows(Path(out_dir or cfg.out_dir) / "centralized", rows, fmt)
    _cli_guard(run)


@main.command("solve-decentralized")
@config_opt
@seed_opt
@out_opt
@fmt_opt
def solve_decentralized(config_path, seed, out_dir, fmt):
    """Stochastic block-coordinate run per seed with traces and ledgers."""
    def run():
        cfg = _apply_seed(load_config(config_path), seed)
        summary = run_experiment(cfg, out_dir)
        click.echo(f"oracle {summary['oracle_value']:.8f}")
        for row in summary["per_seed"]:
            click.echo(f"seed {row['seed']}: W~ = {row['distance']:.8f} "
                       f"(gap {row['gap']:.3g})")
    _cli_guard(run)


@main.command("approx-kernel")
@config_opt
@seed_opt
@out_opt
@fmt_opt
def approx_kernel(config_path, seed, out_dir, fmt):
    """Sign-sketch kernel exchange; reports the Frobenius gap and bound."""
    def run():
        cfg = _apply_seed(load_config(config_path), seed)
        rows = []
        for s in cfg.seeds:
            mu, gamma = load_pair(cfg, s)
            partition = build_partition(cfg, mu, gamma, s)
            gap = kernel_gap_frobenius(partition, cfg.cost_spec(), cfg.P, s)
            params = default_gip_params(partition, cfg.cost_spec())
            bound = sketch_error_bound(partition.n_total, partition.m_total,
                                       cfg.P, params)
            rows.append({"seed": s, "P": cfg.P, "frobenius_gap": gap,
                         "pointwise_bound": bound})
            click.echo(f"seed {s}: ||K - K^||_F = {gap:.6f} "
                       f"(pointwise bound {bound:.6f})")
        if out_dir or cfg.out_dir:
            _write_rows(Path(out_dir or cfg.out_dir) / "kernel_gap", rows, fmt)
    _cli_guard(run)


@main.command("decompose-error")
@config_opt
@seed_opt
@out_opt
@fmt_opt
def decompose_error(config_path, seed, out_dir, fmt):
    """Model / kernel / algorithm error split for one run per seed."""
    def run():
        cfg = _apply_seed(load_config(config_path), seed)
        rows = []
        for s in cfg.seeds:
            mu, gamma = load_pair(cfg, s)
            partition = build_partition(cfg, mu, gamma, s)
            E = build_protocol(cfg, cfg.n_source_agents, cfg.n_target_agents)
            dec = decompose_errors(partition, E, cfg.solver_config(s))
            row = {"seed": s, **asdict(dec),
                   "triangle_holds": dec.triangle_holds()}
            rows.append(row)
            click.echo(f"seed {s}: e_model={dec.e_model:.6f} "
                       f"e_kernel={dec.e_kernel:.6f} "
                       f"e_algorithm={dec.e_algorithm:.6f} "
                       f"e_all={dec.e_all:.6f}")
        if out_dir or cfg.out_dir:
            _write_rows(Path(out_dir or cfg.out_dir) / "decomposition", rows, fmt)
    _cli_guard(run)


@main.command("check-bounds")
@config_opt
@seed_opt
@out_opt
@fmt_opt
def check_bounds(config_path, seed, out_dir, fmt):
    """Protocol-mismatch bound check at reference accuracy."""
    def run():
        cfg = _apply_seed(load_config(config_path), seed)
        rows = []
        for s in cfg.seeds:
            mu, gamma = load_pair(cfg, s)
            partition = build_partition(cfg, mu, gamma, s)
            E = build_protocol(cfg, cfg.n_source_agents, cfg.n_target_agents)
            chk = protocol_mismatch_check(partition, E, cfg.cost_spec())
            rows.append({"seed": s, "lhs": chk.lhs, "tau": chk.tau,
                         "sigma": chk.sigma, "holds": chk.holds})
            click.echo(f"seed {s}: |W~ - W| = {chk.lhs:.6f} <= "
                       f"tau*sigma = {chk.tau * chk.sigma:.6f}: {chk.holds}")
        if out_dir or cfg.out_dir:
            _write_rows(Path(out_dir or cfg.out_dir) / "bounds", rows, fmt)
        if not all(r["holds"] for r in rows):
            sys.exit(2)
    _cli_guard(run)


SWEEP_MODES = ("L", "P", "protocol", "storage", "agents")


@main.command("sweep")
@config_opt
@seed_opt
@out_opt
@fmt_opt
@click.option("--mode", type=click.Choice(SWEEP_MODES), required=True)
@click.option("--values", default=None,
              help="comma-separated sweep values (defaults per mode)")
def sweep(config_path, seed, out_dir, fmt, mode, values):
    """Run the experiment across one swept parameter."""
    def run():
        from dataclasses import replace

        cfg = _apply_seed(load_config(config_path), seed)
        out = Path(out_dir or cfg.out_dir)
        defaults = {
            "L": "1,2,5",
            "P": "100,1000,10000",
            "protocol": "ideal,sparse,sparse_asymmetric",
            "storage": "iid,non_iid",
            "agents": "2,5,10",
        }
        vals = (values or defaults[mode]).split(",")
        rows = []
        for raw in vals:
            raw = raw.strip()
            if mode == "L":
                sub = replace(cfg, L=int(raw))
            elif mode == "P":
                sub = replace(cfg, P=int(raw), kernel="approx")
            elif mode == "protocol":
                sub = replace(cfg, protocol=raw)
            elif mode == "storage":
                sub = replace(cfg, storage_mode=raw)
            else:
                sub = replace(cfg, n_source_agents=int(raw),
                              n_target_agents=int(raw))
            problems = sub.validation_problems()
            if problems:
                raise ConfigError(problems)
            summary = run_experiment(sub, out / f"{mode}_{raw}")
            gaps = [r["gap"] for r in summary["per_seed"]]
            rows.append({"mode": mode, "value": raw,
                         "oracle": summary["oracle_value"],
                         "median_gap": float(np.median(gaps))})
            click.echo(f"{mode}={raw}: median gap {rows[-1]['median_gap']:.6f}")
        _write_rows(out / f"sweep_{mode}", rows, fmt)
    _cli_guard(run)


@main.command("domain-adapt")
@config_opt
@seed_opt
@out_opt
@fmt_opt
def domain_adapt_cmd(config_path, seed, out_dir, fmt):
    """Transport-then-1NN label transfer versus the source-only baseline."""
    def run():
        cfg = _apply_seed(load_config(config_path), seed)
        rows = []
        for s in cfg.seeds:
            mu, gamma = load_pair(cfg, s)
            res = domain_adapt(mu, gamma, cfg.solver_config(s),
                               I=cfg.n_source_agents, J=cfg.n_target_agents,
                               storage_mode=cfg.storage_mode)
            rows.append({"seed": s, "accuracy": res.accuracy,
                         "baseline_accuracy": res.baseline_accuracy,
                         "config_hash": res.config_hash})
            click.echo(f"seed {s}: adapted {res.accuracy:.4f} vs "
                       f"source-only {res.baseline_accuracy:.4f}")
        if out_dir or cfg.out_dir:
            _write_rows(Path(out_dir or cfg.out_dir) / "adaptation", rows, fmt)
    _cli_guard(run)


if __name__ == "__main__":
    main()
