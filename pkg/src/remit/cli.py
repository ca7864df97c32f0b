"""Command-line harness for calibration, fitting, mitigation and the
desk-scale experiments.

Exit codes: 0 success, 2 configuration error (bad flags, files, schemas),
3 numeric or model error.  Seeds are always explicit: either a --seed flag
or a ``seed`` key in the config file.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import calibration as cal_mod
from . import experiments as exp_mod
from .core import BitString, ShotSet
from .errors import ConfigError, RemitError
from .mitigation import mitigate_ctmp, mitigate_exact, mitigate_raw, mitigate_tp
from .noise import CTMPModel, FullNoiseMatrix, TPNoise, build_full_matrix
from .serialize import (calibration_from_dict, calibration_to_dict,
                        circuit_from_dict, load_json, model_from_dict,
                        model_to_dict, observable_from_str, save_json,
                        shots_from_dict, shots_to_dict)
from .stabilizer import PauliOperator, graph_state_circuit, pauli_to_measurement, sample_ideal


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(2)
        except (RemitError, ValueError, np.linalg.LinAlgError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(3)
    return wrapper


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    if p.suffix == ".toml":
        try:
            import tomllib  # py >= 3.11
        except ModuleNotFoundError:
            import tomli as tomllib
        return tomllib.loads(p.read_text())
    return load_json(p)


def _merged(config: dict, **flags) -> dict:
    """Config-file values overridden by explicitly supplied flags."""
    out = dict(config)
    for key, value in flags.items():
        if value is not None:
            out[key] = value
    return out


def _require_seed(cfg: dict) -> int:
    if cfg.get("seed") is None:
        raise ConfigError("a seed is required (--seed flag or 'seed' config key); "
                          "seeds are never defaulted silently")
    return int(cfg["seed"])


@click.group()
def main():
    """Readout-error mitigation toolkit (simulation-backed)."""


# ---------------------------------------------------------------------------


@main.command()
@click.option("--model", "model_file", required=True, help="ground-truth noise model JSON")
@click.option("--kind", type=click.Choice(["weight1", "weight2", "hadamard", "custom"]),
              default="weight1", show_default=True)
@click.option("--inputs", "inputs_file", default=None,
              help="custom input set: one bit string per line")
@click.option("--n-cal", default=8192, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("-o", "--out", required=True)
@_handle_errors
def calibrate(model_file, kind, inputs_file, n_cal, seed, out):
    """Simulate calibration rounds against a ground-truth model."""
    model = model_from_dict(load_json(model_file))
    if kind == "custom":
        if inputs_file is None:
            raise ConfigError("--kind custom needs --inputs")
        lines = [ln.strip() for ln in Path(inputs_file).read_text().splitlines() if ln.strip()]
        cal_set = cal_mod.CalibrationSet(
            model.n, tuple(BitString.from_str(s) for s in lines), "custom")
    else:
        cal_set = cal_mod.make_calibration_set(kind, model.n)
    data = cal_mod.simulate_calibration(model, cal_set, n_cal, seed)
    save_json(out, calibration_to_dict(data))
    click.echo(f"wrote {out} ({len(cal_set.inputs)} inputs x {n_cal} rounds)")


@main.command()
@click.option("--cal", "cal_file", required=True, help="calibration counts JSON")
@click.option("--model-kind", type=click.Choice(["full", "tp", "ctmp"]), required=True)
@click.option("-o", "--out", required=True)
@_handle_errors
def fit(cal_file, model_kind, out):
    """Fit a noise model from calibration counts."""
    data = calibration_from_dict(load_json(cal_file))
    if model_kind == "full":
        model = cal_mod.fit_full(data)
    elif model_kind == "tp":
        model = cal_mod.fit_tp(data)
    else:
        model = cal_mod.fit_ctmp(data)
    save_json(out, model_to_dict(model))
    click.echo(f"wrote {out}")


@main.command()
@click.option("--shots", "shots_file", required=True, help="shots JSON")
@click.option("--model", "model_file", default=None, help="noise model JSON")
@click.option("--observable", required=True, help="signed Z-mask, e.g. -ZIZ")
@click.option("--method", type=click.Choice(["exact", "tp", "ctmp", "raw"]), required=True)
@click.option("--delta", default=0.05, show_default=True)
@click.option("--samples", "t_override", type=int, default=None,
              help="override the inner sample count T")
@click.option("--seed", type=int, required=True)
@click.option("--threads", default=1, show_default=True)
@click.option("-o", "--out", default=None, help="result JSON (default: stdout)")
@_handle_errors
def mitigate(shots_file, model_file, observable, method, delta, t_override, seed,
             threads, out):
    """Compute a mitigated (or raw) mean value from recorded shots."""
    shots = shots_from_dict(load_json(shots_file))
    obs = observable_from_str(observable)
    if method != "raw":
        if model_file is None:
            raise ConfigError(f"--method {method} needs --model")
        model = model_from_dict(load_json(model_file))
    if method == "raw":
        result = mitigate_raw(shots, obs)
    elif method == "exact":
        if isinstance(model, (TPNoise, CTMPModel)):
            model = build_full_matrix(model)
        result = mitigate_exact(shots, model, obs)
    elif method == "tp":
        if not isinstance(model, TPNoise):
            raise ConfigError("--method tp needs a tensor-product model")
        result = mitigate_tp(shots, model, obs, delta, rng=seed,
                             t_override=t_override, threads=threads)
    else:
        if not isinstance(model, CTMPModel):
            raise ConfigError("--method ctmp needs a ctmp model")
        result = mitigate_ctmp(shots, model, obs, delta, rng=seed,
                               t_override=t_override, threads=threads)
    payload = result.to_json_dict()
    if out:
        save_json(out, payload)
        click.echo(f"wrote {out}")
    else:
        click.echo(json.dumps(payload, indent=2))


@main.command("simulate-shots")
@click.option("--circuit", "circuit_file", default=None, help="circuit JSON")
@click.option("--graph-n", type=int, default=None, help="use the n-qubit path graph state")
@click.option("--pauli", default=None, help="rotate to measure this Pauli, e.g. -XZIIY")
@click.option("--noise", "noise_file", default=None, help="noise model JSON")
@click.option("--shots", "m", default=8192, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("-o", "--out", required=True)
@_handle_errors
def simulate_shots(circuit_file, graph_n, pauli, noise_file, m, seed, out):
    """Sample (optionally noisy) measurement outcomes of a stabilizer state."""
    from .noise import corrupt_shots
    from .rng import stream

    if (circuit_file is None) == (graph_n is None):
        raise ConfigError("give exactly one of --circuit or --graph-n")
    circuit = (circuit_from_dict(load_json(circuit_file)) if circuit_file
               else graph_state_circuit(graph_n))
    rotation = None
    if pauli:
        p = PauliOperator.from_str(pauli)
        if p.n != circuit.n:
            raise ConfigError(f"Pauli has {p.n} letters, circuit has n={circuit.n}")
        rotation, _ = pauli_to_measurement(p)
    shots = sample_ideal(circuit, rotation, m, stream(seed, 0))
    if noise_file:
        model = model_from_dict(load_json(noise_file))
        shots = corrupt_shots(model, shots, stream(seed, 1))
    save_json(out, shots_to_dict(shots))
    click.echo(f"wrote {out} ({m} shots)")


# ---------------------------------------------------------------------------
# experiments


@main.group()
def experiment():
    """Reproduce the desk-scale experiment pipelines (CSV + JSON output)."""


def _experiment_io(cfg: dict, out_dir: str | None) -> Path:
    out = Path(out_dir if out_dir is not None else cfg.get("out", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _common_options(fn):
    fn = click.option("--config", "config_file", default=None,
                      help="TOML or JSON config; flags win")(fn)
    fn = click.option("--seed", type=int, default=None)(fn)
    fn = click.option("--threads", type=int, default=None)(fn)
    fn = click.option("--out", "out_dir", default=None, help="output directory")(fn)
    return fn


@experiment.command("tvd")
@_common_options
@click.option("--repeats", type=int, default=None)
@click.option("--n-cal", type=int, default=None)
@_handle_errors
def experiment_tvd_cmd(config_file, seed, threads, out_dir, repeats, n_cal):
    """Model accuracy vs the fitted full matrix, in total variation distance."""
    cfg = _merged(_load_config(config_file), seed=seed, threads=threads,
                  repeats=repeats, n_cal=n_cal)
    seed = _require_seed(cfg)
    rows = exp_mod.experiment_tvd(
        n_values=tuple(cfg.get("n_values", (4, 5, 6))),
        repeats=int(cfg.get("repeats", 16)),
        n_cal=int(cfg.get("n_cal", 8192)),
        seed=seed,
        pair_rate=float(cfg.get("pair_rate", 0.03)),
        threads=int(cfg.get("threads", 1)))
    out = _experiment_io(cfg, out_dir)
    exp_mod.write_csv(out / "tvd.csv", "tvd", rows)
    save_json(out / "tvd.json", {"config": cfg, "rows": rows})
    click.echo(f"wrote {out / 'tvd.csv'}")


@experiment.command("graph")
@_common_options
@click.option("--n-cal", type=int, default=None)
@click.option("--shots", "m_shots", type=int, default=None)
@_handle_errors
def experiment_graph_cmd(config_file, seed, threads, out_dir, n_cal, m_shots):
    """Graph-state stabilizer fidelities per mitigation method."""
    cfg = _merged(_load_config(config_file), seed=seed, threads=threads,
                  n_cal=n_cal, m_shots=m_shots)
    seed = _require_seed(cfg)
    rows, bias = exp_mod.experiment_graph(
        n_values=tuple(cfg.get("n_values", (4, 6, 8))),
        methods=tuple(cfg.get("methods", ("raw", "tp", "ctmp", "exact"))),
        m_shots=int(cfg.get("m_shots", 8192)),
        n_cal=int(cfg.get("n_cal", 8192)),
        num_stabilizers=int(cfg.get("num_stabilizers", 64)),
        seed=seed,
        delta=float(cfg.get("delta", 0.05)),
        calibration_kind=cfg.get("calibration_kind", "weight1"),
        threads=int(cfg.get("threads", 1)))
    out = _experiment_io(cfg, out_dir)
    exp_mod.write_csv(out / "graph.csv", "graph", rows)
    exp_mod.write_csv(out / "graph_bias.csv", "graph_bias", bias)
    save_json(out / "graph.json", {"config": cfg, "rows": rows, "bias": bias})
    click.echo(f"wrote {out / 'graph.csv'}")


@experiment.command("gamma")
@_common_options
@click.option("--n-cal", type=int, default=None)
@_handle_errors
def experiment_gamma_cmd(config_file, seed, threads, out_dir, n_cal):
    """Fitted noise strength vs register size."""
    cfg = _merged(_load_config(config_file), seed=seed, threads=threads, n_cal=n_cal)
    seed = _require_seed(cfg)
    rows = exp_mod.experiment_gamma(
        n_values=tuple(cfg.get("n_values", tuple(range(4, 13)))),
        n_cal=int(cfg.get("n_cal", 8192)),
        seed=seed,
        single_rate=float(cfg.get("single_rate", 0.05)),
        pair_max=float(cfg.get("pair_max", 0.0)),
        threads=int(cfg.get("threads", 1)))
    out = _experiment_io(cfg, out_dir)
    exp_mod.write_csv(out / "gamma.csv", "gamma", rows)
    save_json(out / "gamma.json", {"config": cfg, "rows": rows})
    click.echo(f"wrote {out / 'gamma.csv'}")


@experiment.command("clifford20")
@_common_options
@click.option("--per-weight", type=int, default=None)
@click.option("--shots", "m_shots", type=int, default=None)
@_handle_errors
def experiment_clifford20_cmd(config_file, seed, threads, out_dir, per_weight, m_shots):
    """20-qubit random-Clifford stabilizer sweep with Hadamard calibration."""
    cfg = _merged(_load_config(config_file), seed=seed, threads=threads,
                  per_weight=per_weight, m_shots=m_shots)
    seed = _require_seed(cfg)
    rows, timings = exp_mod.experiment_clifford20(
        n=int(cfg.get("n", 20)),
        depth=int(cfg.get("depth", 4)),
        per_weight=int(cfg.get("per_weight", 5)),
        m_shots=int(cfg.get("m_shots", 8192)),
        n_cal=int(cfg.get("n_cal", 8192)),
        delta=float(cfg.get("delta", 0.05)),
        seed=seed,
        grid=tuple(cfg.get("grid", (4, 5))),
        t_override=cfg.get("t_override"),
        threads=int(cfg.get("threads", 1)))
    out = _experiment_io(cfg, out_dir)
    exp_mod.write_csv(out / "clifford20.csv", "clifford20", rows)
    save_json(out / "clifford20.json", {"config": cfg, "rows": rows, "timings": timings})
    click.echo(f"wrote {out / 'clifford20.csv'} "
               f"(fit {timings['fit_ctmp_seconds']:.2f}s, "
               f"mitigation {timings['mitigation_seconds']:.2f}s)")


if __name__ == "__main__":
    main()
