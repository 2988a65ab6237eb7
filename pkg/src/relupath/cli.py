"""Command-line entry points.

Exit codes: 0 success, 2 invalid arguments or input (the message names the
offending flag or field), 3 I/O failure. Single-value commands print one
JSON object on stdout; experiments write CSV.
"""

from __future__ import annotations

import json
import sys

import click

from . import complexity as cx
from . import entropy as en
from . import estimation as est
from .network import GeneralReLUNet, canonicalize
from .serialize import FormatError, dump_json, load_net, load_points, load_samples, net_to_json
from .variation import normalize, subnetwork_variations

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 2, 3


class InvalidInput(click.UsageError):
    exit_code = EXIT_INVALID


def _emit(obj, output=None):
    text = dump_json(obj) + "\n"
    if output:
        with open(output, "w") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


def _canonical(path):
    net = load_net(path)
    if isinstance(net, GeneralReLUNet):
        net = canonicalize(net)
    elif not hasattr(net, "weights"):
        raise InvalidInput("expected a general or canonical network, not a normalized one")
    return net


def _law(law, sigma):
    if law == "gaussian":
        return cx.PerturbationLaw.gaussian(sigma)
    if sigma != 1.0:
        raise InvalidInput("--sigma applies to the gaussian law only")
    return cx.PerturbationLaw.rademacher()


def _positive(name, value, allow_zero=False):
    if value < 0 or (value == 0 and not allow_zero):
        raise InvalidInput(f"{name} must be {'nonnegative' if allow_zero else 'positive'}")


threads_option = click.option(
    "--threads", type=click.IntRange(min=1), default=1, show_default=True,
    help="Worker threads; results do not depend on this value.",
)


@click.group()
def cli():
    """Path variation, complexity, entropy and risk tools for deep ReLU networks."""


@cli.command()
@click.argument("net", type=click.Path(dir_okay=False))
@click.option("--values-only", is_flag=True, help="Print only the total variation.")
def compute(net, values_only):
    """Print the total path variation V and the per-layer subnetwork variations."""
    sv = subnetwork_variations(_canonical(net))
    if values_only:
        _emit({"V": sv.total})
    else:
        _emit(sv.to_json())


@cli.command("normalize")
@click.argument("net", type=click.Path(dir_okay=False))
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False), help="Output JSON path.")
def normalize_cmd(net, output):
    """Write the probabilistic form (rows summing to 1, inputs scaled by V)."""
    _emit(net_to_json(normalize(_canonical(net))), output)


@cli.group("complexity")
def complexity_group():
    """Rademacher / Gaussian complexity estimates and bounds."""


@complexity_group.command("estimate")
@click.option("--set", "set_path", required=True, type=click.Path(dir_okay=False), help="Point-set JSON.")
@click.option("--law", type=click.Choice(["rademacher", "gaussian"]), default="rademacher", show_default=True)
@click.option("--sigma", type=float, default=1.0, show_default=True)
@click.option("--psi", type=click.Choice(["identity", "exp"]), default="identity", show_default=True)
@click.option("--lambda", "lam", type=float, default=None, help="Exponential psi parameter.")
@click.option("--method", type=click.Choice(["auto", "exact", "mc"]), default="auto", show_default=True)
@click.option("--replicates", type=int, default=10_000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@threads_option
def complexity_estimate(set_path, law, sigma, psi, lam, method, replicates, seed, threads):
    """Complexity of a finite point set, with the finite-class bound."""
    A = load_points(set_path)
    law_ = _law(law, sigma)
    bound = cx.massart_bound(A, law_)
    if psi == "exp":
        if lam is None:
            lam = bound.lambda_opt or 1.0
        _positive("--lambda", lam)
        psi_ = cx.PsiSpec.exponential(lam)
    else:
        if lam is not None:
            raise InvalidInput("--lambda applies to --psi exp only")
        psi_ = cx.PsiSpec.identity()
    exact = method == "exact" or (method == "auto" and law == "rademacher" and A.n <= cx.MAX_EXACT_N)
    if exact:
        est_ = cx.ComplexityEstimate(cx.mu_complexity_exact(A, law_, psi_), 0.0, True)
    else:
        if replicates < cx.MIN_REPLICATES:
            raise InvalidInput(f"--replicates must be at least {cx.MIN_REPLICATES}")
        est_ = cx.mu_complexity_mc(A, law_, psi_, replicates, seed, threads=threads)
    _emit({
        "estimate": est_.estimate,
        "std_error": est_.std_error,
        "bound": bound.bound,
        "lambda_opt": bound.lambda_opt,
        "exact": est_.exact,
        "jensen_biased": est_.jensen_biased,
    })


@complexity_group.command("bound")
@click.option("--V", "V", required=True, type=float)
@click.option("--L", "L", required=True, type=int)
@click.option("--d", "d", required=True, type=int)
@click.option("--n", "n", required=True, type=int)
@click.option("--law", type=click.Choice(["rademacher", "gaussian"]), default="rademacher", show_default=True)
@click.option("--sigma", type=float, default=1.0, show_default=True)
def complexity_bound(V, L, d, n, law, sigma):
    """Closed-form complexity bound for depth-L networks with variation V."""
    _positive("--V", V, allow_zero=True)
    for name, value in (("--L", L), ("--d", d), ("--n", n)):
        _positive(name, value)
    b = cx.relu_class_complexity_bound(V, L, d, n, _law(law, sigma))
    _emit({"bound": b.bound, "lambda_opt": b.lambda_opt})


@cli.group("entropy")
def entropy_group():
    """Metric entropy calculators and a greedy packing estimator."""


@entropy_group.command("bound")
@click.option("--V", "V", required=True, type=float)
@click.option("--L", "L", required=True, type=int)
@click.option("--d", "d", required=True, type=int)
@click.option("--eps", required=True, type=float)
def entropy_bound(V, L, d, eps):
    """Entropy bound for depth-L networks of variation V."""
    _positive("--V", V, allow_zero=True)
    for name, value in (("--L", L), ("--d", d), ("--eps", eps)):
        _positive(name, value)
    C_F = en.relu_risk_constant(V, L, d)
    _emit({
        "entropy_bound": en.relu_entropy_bound(V, L, d, eps),
        "C_F": C_F,
        "rate_form_entropy": en.corollary5_entropy(C_F, eps),
    })


@entropy_group.command("fano")
@click.option("--n", "n", required=True, type=int)
@click.option("--sigma", required=True, type=float)
@click.option("--rn", required=True, type=float, help="Batch risk bound.")
@click.option("--rnstar", required=True, type=float, help="Predictive risk bound.")
@click.option("--eps", required=True, type=float)
@click.option("--logN", "logN", type=float, default=None, help="Also report the risk lower bound.")
def entropy_fano(n, sigma, rn, rnstar, eps, logN):
    """Entropy upper bound (and optional risk lower bound) from risk bounds."""
    _positive("--eps", eps)
    try:
        profile = en.RiskProfile(n=n, sigma=sigma, r_n=rn, r_n_star=rnstar)
    except ValueError as exc:
        raise InvalidInput(str(exc)) from exc
    out = {}
    if eps ** 2 > 4 * rn:
        out["entropy_upper"] = en.fano_entropy_upper(profile, eps)
    else:
        out["entropy_upper"] = None
    if logN is not None:
        _positive("--logN", logN)
        out["risk_lower"] = en.fano_risk_lower(profile, eps, logN)
    _emit(out)


@entropy_group.command("pack")
@click.option("--samples", required=True, type=click.Path(dir_okay=False), help="Function-sample JSON.")
@click.option("--eps", required=True, type=float)
@click.option("--metric", type=click.Choice(["normalized", "euclidean"]), default="normalized", show_default=True)
@click.option("--seed", type=int, default=None, help="Shuffle the visiting order with this seed.")
def entropy_pack(samples, eps, metric, seed):
    """Greedy packing count of function samples."""
    _positive("--eps", eps)
    res = en.greedy_packing(load_samples(samples), eps, metric, shuffle_seed=seed)
    _emit({
        "epsilon": res.epsilon,
        "count": res.count,
        "log_count": res.log_count,
        "metric": res.metric,
        "centers": res.centers.tolist(),
        "order": "input" if seed is None else f"shuffled(seed={seed})",
    })


@cli.group("experiment")
def experiment_group():
    """Risk simulations for constrained and penalized least squares."""


@experiment_group.command("run")
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False))
@click.option("--out", "out", type=click.Path(dir_okay=False), default=None, help="CSV path (overrides config).")
@click.option("--seed", type=int, default=None, help="Override the master seed.")
@threads_option
def experiment_run(config_path, out, seed, threads):
    """Run a configured experiment and write one CSV row per sample size."""
    with open(config_path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidInput(f"config: invalid JSON ({exc})") from exc
    if seed is not None and isinstance(obj, dict):
        obj = dict(obj)
        obj["seeds"] = {"master": seed}
    cfg = est.ExperimentConfig.from_dict(obj)
    text = est.reports_to_csv(est.run_experiment(cfg, threads=threads))
    target = out or cfg.output
    if target:
        with open(target, "w") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


_SUBCOMMANDS = {
    "compute": ["compute"],
    "normalize": ["normalize"],
    "complexity-estimate": ["complexity", "estimate"],
    "complexity-bound": ["complexity", "bound"],
    "entropy-bound": ["entropy", "bound"],
    "entropy-fano": ["entropy", "fano"],
    "entropy-pack": ["entropy", "pack"],
    "experiment-run": ["experiment", "run"],
}
_POSITIONAL = {"compute": "net", "normalize": "net"}
_COMMAND_KEYS = {"subcommand", "params", "seed", "output", "threads"}
_SEEDED = {"complexity-estimate", "experiment-run"}
_THREADED = {"complexity-estimate", "experiment-run"}


def command_argv(config: dict) -> list:
    """Translate a command config object into an argument vector.

    Raises
    ------
    InvalidInput
        On unknown keys, naming the first offending field.
    """
    if not isinstance(config, dict):
        raise InvalidInput("command config must be a JSON object")
    for key in config:
        if key not in _COMMAND_KEYS:
            raise InvalidInput(f"unknown config key {key!r}")
    sub = config.get("subcommand")
    if sub not in _SUBCOMMANDS:
        raise InvalidInput(f"subcommand: must be one of {sorted(_SUBCOMMANDS)}")
    params = dict(config.get("params", {}))
    argv = list(_SUBCOMMANDS[sub])
    positional = _POSITIONAL.get(sub)
    if positional:
        if positional not in params:
            raise InvalidInput(f"params.{positional}: required key missing")
        argv.append(str(params.pop(positional)))
    for key, value in params.items():
        flag = "--" + key
        if isinstance(value, bool):
            if value:
                argv.append(flag)
        else:
            argv += [flag, str(value)]
    if config.get("seed") is not None:
        if sub not in _SEEDED:
            raise InvalidInput(f"seed: not used by {sub}")
        argv += ["--seed", str(config["seed"])]
    if config.get("threads") is not None:
        if sub not in _THREADED:
            raise InvalidInput(f"threads: not used by {sub}")
        argv += ["--threads", str(config["threads"])]
    if config.get("output") is not None:
        if sub == "normalize":
            argv += ["--output", str(config["output"])]
        elif sub == "experiment-run":
            argv += ["--out", str(config["output"])]
        else:
            raise InvalidInput(f"output: {sub} prints to stdout")
    return argv


@cli.command("dispatch")
@click.argument("config", type=click.Path(dir_okay=False))
@click.pass_context
def dispatch_cmd(ctx, config):
    """Run one command described by a JSON command config."""
    with open(config) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidInput(f"config: invalid JSON ({exc})") from exc
    ctx.exit(dispatch(obj))


def dispatch(config: dict) -> int:
    """Execute a command config and return its exit status."""
    try:
        argv = command_argv(config)
    except InvalidInput as exc:
        click.echo(f"Error: {exc.message}", err=True)
        return EXIT_INVALID
    return _run(cli, argv)


def _run(command, argv):
    try:
        rc = command.main(args=argv, prog_name="pathnorm", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.Abort:
        click.echo("Aborted!", err=True)
        return 1
    except (FormatError, est.ConfigError) as exc:
        click.echo(f"Error: {exc}", err=True)
        return EXIT_INVALID
    except OSError as exc:
        click.echo(f"Error: {exc}", err=True)
        return EXIT_IO
    except ValueError as exc:
        click.echo(f"Error: {exc}", err=True)
        return EXIT_INVALID
    # Without standalone mode click returns ctx.exit() codes instead of raising.
    return rc if isinstance(rc, int) else EXIT_OK


def main(argv=None):
    sys.exit(_run(cli, sys.argv[1:] if argv is None else argv))


def complexity_main(argv=None):
    sys.exit(_run(complexity_group, sys.argv[1:] if argv is None else argv))


def entropy_main(argv=None):
    sys.exit(_run(entropy_group, sys.argv[1:] if argv is None else argv))


def experiment_main(argv=None):
    sys.exit(_run(experiment_group, sys.argv[1:] if argv is None else argv))
