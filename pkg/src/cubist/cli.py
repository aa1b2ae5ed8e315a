"""Command-line surface: ancilla optimization, search maps, Wigner grids,
gate runs and validation suites, all emitting reproducible data files.

Every command writes a run manifest next to its primary output; flags
override a ``--config`` JSON file, which overrides defaults, and the fully
resolved configuration is echoed in the manifest.  Plotting is out of
process: commands emit grids and tables only (each demo script documents a
one-liner to render them).

Exit codes: 0 ok, 1 validation failure, 2 usage error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import __version__
from .ancilla import (
    AncillaOptimum,
    OptimizerConfig,
    optimize_ancilla,
    search_map,
)
from .errors import CubistError
from .fock import StateVector, fock_state, sample_homodyne_batch, vacuum
from .gate import AncillaSpec, GateConfig, run_gate_batch, verify_heisenberg_identity
from .phasespace import (
    DEFAULT_AXES,
    ProjectorParams,
    generalized_projector_wigner,
    ideal_cubic_wigner,
    projector_wigner,
    sign_changes_along_p,
    wigner_of_state,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3


def _default_workers() -> int:
    try:
        return max(1, int(os.environ.get("CUBIST_WORKERS", "1")))
    except ValueError:
        return 1


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int | None
    version: str
    outputs: list
    wall_time_s: float
    extra: dict

    def write(self, path: str) -> None:
        doc = {
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "version": self.version,
            "outputs": self.outputs,
            "wall_time_s": self.wall_time_s,
        }
        doc.update(self.extra)
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _manifest_path(out: str | None, command: str) -> str:
    if out:
        stem, _ = os.path.splitext(out)
        return stem + ".manifest.json"
    return f"cubist-{command.replace(' ', '-')}-manifest.json"


def _emit_manifest(command, config, seed, outputs, t0, out, extra=None):
    man = RunManifest(
        command=command,
        config=config,
        seed=seed,
        version=__version__,
        outputs=outputs,
        wall_time_s=time.monotonic() - t0,
        extra=extra or {},
    )
    path = _manifest_path(out, command)
    man.write(path)
    return path


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    with open(path) as fh:
        return json.load(fh)


def _parse_range(text: str) -> tuple[float, float]:
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("range must be LO,HI")
    return parts[0], parts[1]


def _parse_axes(text: str):
    p = text.split(",")
    if len(p) != 6:
        raise argparse.ArgumentTypeError("axes must be XMIN,XMAX,NX,PMIN,PMAX,NP")
    return (
        (float(p[0]), float(p[1]), int(p[2])),
        (float(p[3]), float(p[4]), int(p[5])),
    )


def _parse_resolution(text: str) -> tuple[int, int]:
    if "x" in text:
        a, b = text.split("x")
        return int(a), int(b)
    n = int(text)
    return n, n


# ---------------------------------------------------------------------------
# ancilla optimize / map


def _cmd_ancilla_optimize(args) -> int:
    t0 = time.monotonic()
    base = _load_config_file(args.config)
    lam_range = args.lambda_range or tuple(base.get("lambda_range", (0.3, 4.0)))
    d_range = args.d_range or tuple(base.get("d_range", (-12.0, 2.0)))
    if not 0 <= args.n <= 12:
        print("error: --n must lie in [0, 12]", file=sys.stderr)
        return EXIT_USAGE
    cfg = OptimizerConfig(
        lambda_range=lam_range, d_range=d_range, workers=args.workers
    )
    opt = optimize_ancilla(args.n, cfg)
    print(f"optimal ancilla, photon cutoff N = {opt.N}")
    print(f"  lambda'_opt = {opt.lambda_opt:.6f}")
    print(f"  d_opt       = {opt.d_opt:.6f}")
    print(f"  variance    = {opt.variance:.6f}")
    print(f"  ratio to Gaussian limit = {opt.ratio:.6f}")
    print("  n   |c_n|")
    for n, c in enumerate(opt.coefficients):
        print(f"  {n:2d}  {abs(c):.4f}")
    outputs = []
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(opt.to_json())
            fh.write("\n")
        outputs.append(args.out)
    _emit_manifest(
        "ancilla optimize",
        {"n": args.n, "lambda_range": list(lam_range), "d_range": list(d_range)},
        None,
        outputs,
        t0,
        args.out,
    )
    return EXIT_OK


def _cmd_ancilla_map(args) -> int:
    t0 = time.monotonic()
    base = _load_config_file(args.config)
    lam_range = args.lambda_range or tuple(base.get("lambda_range", (0.3, 4.0)))
    d_range = args.d_range or tuple(base.get("d_range", (-12.0, 2.0)))
    counts = args.resolution or (160, 160)
    if counts[0] * counts[1] > 2000 * 2000:
        print("error: resolution exceeds 2000^2 cells", file=sys.stderr)
        return EXIT_USAGE
    smap = search_map(args.n, lam_range, d_range, counts, workers=args.workers)
    smap.to_csv(args.out, unit=args.unit)
    lam_min, d_min = smap.argmin()
    _emit_manifest(
        "ancilla map",
        {
            "n": args.n,
            "lambda_range": list(lam_range),
            "d_range": list(d_range),
            "resolution": list(counts),
            "unit": args.unit,
        },
        None,
        [args.out],
        t0,
        args.out,
        extra={
            "map_minimum": float(np.min(smap.min_eigenvalues)),
            "map_argmin": [lam_min, d_min],
        },
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# wigner


def _state_from_spec(spec: str, gamma: float):
    if spec == "ideal-cubic":
        return None
    if spec.startswith("optimized-"):
        n = int(spec.split("-", 1)[1])
        return optimize_ancilla(n).state()
    with open(spec) as fh:
        return StateVector.from_json(fh.read())


def _cmd_wigner(args) -> int:
    t0 = time.monotonic()
    axes = args.axes or DEFAULT_AXES
    extra = {}
    if args.state == "ideal-cubic":
        grid = ideal_cubic_wigner(args.gamma, axes)
        config = {"state": args.state, "gamma": args.gamma, "axes": _axes_list(axes)}
    else:
        try:
            state = _state_from_spec(args.state, args.gamma)
        except OSError as exc:
            print(f"error: cannot read state file: {exc}", file=sys.stderr)
            return EXIT_USAGE
        from .fock import quadrature_ops

        dim = state.mode_dims[0]
        p_op = quadrature_ops(dim)[1]
        extra["state_p_offset"] = float(np.real(p_op.expectation(state)))
        grid = wigner_of_state(state, axes)
        config = {"state": args.state, "axes": _axes_list(axes)}
    grid.to_csv(args.out)
    extra["sign_changes_along_p_at_x0"] = sign_changes_along_p(grid)
    _emit_manifest("wigner", config, None, [args.out], t0, args.out, extra=extra)
    return EXIT_OK


def _axes_list(axes):
    return [list(axes[0]), list(axes[1])]


# ---------------------------------------------------------------------------
# gate run


def _ancilla_spec_from_flag(text: str) -> AncillaSpec:
    if text == "vacuum":
        return AncillaSpec(kind="vacuum")
    if text == "gaussian":
        return AncillaSpec(kind="gaussian")
    if text.startswith("optimized-"):
        return AncillaSpec.optimized(int(text.split("-", 1)[1]))
    with open(text) as fh:
        state = StateVector.from_json(fh.read())
    return AncillaSpec.explicit(tuple(state.amplitudes.ravel()))


def _cmd_gate_run(args) -> int:
    t0 = time.monotonic()
    base = _load_config_file(args.config)
    merged = dict(base)
    for key, val in (
        ("gamma", args.gamma),
        ("t1", args.t1),
        ("t2", args.t2),
        ("squeeze_db", args.squeeze_db),
        ("seed", args.seed),
        ("shots", args.shots),
    ):
        if val is not None:
            merged[key] = val
    if args.ancilla is not None:
        spec = _ancilla_spec_from_flag(args.ancilla)
        merged["ancilla"] = {
            "kind": spec.kind,
            "n": spec.n,
            "coefficients": None
            if spec.coefficients is None
            else [[z.real, z.imag] for z in spec.coefficients],
            "pre_squeeze": spec.pre_squeeze,
            "p0": spec.p0,
        }
    merged.setdefault("gamma", 0.1)
    merged["workers"] = args.workers
    config = GateConfig.from_json_dict(merged)
    summary = run_gate_batch(vacuum(8), config)
    if summary.n_failed > 0.01 * config.shots:
        print(
            f"error: {summary.n_failed}/{config.shots} shots failed (truncation)",
            file=sys.stderr,
        )
        return EXIT_NUMERICAL
    print(
        f"mean fidelity {summary.mean_fidelity:.6f} +/- {summary.std_error:.6f} "
        f"over {summary.n_shots - summary.n_failed} shots"
    )
    outputs = []
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(summary.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        outputs.append(args.out)
    if args.shot_log:
        with open(args.shot_log, "w") as fh:
            fh.write("q,theta,y,p_disp,fidelity\n")
            for r in summary.records:
                fh.write(
                    f"{r.q:.17g},{r.theta:.17g},{r.y:.17g},{r.p_disp:.17g},{r.fidelity:.17g}\n"
                )
        outputs.append(args.shot_log)
    _emit_manifest(
        "gate run", config.to_json_dict(), config.seed, outputs, t0, args.out
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# validate


def _chi_square_check(state, name, seed, n_samples=100_000, bins=61):
    from scipy import stats

    from .fock import default_grid_spec, homodyne_pdf

    rng = np.random.default_rng(seed)
    values = sample_homodyne_batch(state, 0, 0.0, rng, n_samples)
    spec = default_grid_spec(state, 0, 0.0)
    sigma = spec.hi / 8.0
    edges = np.linspace(-5.0 * sigma, 5.0 * sigma, bins)
    observed, _ = np.histogram(values, bins=edges)
    fine = np.linspace(edges[0], edges[-1], (bins - 1) * 40 + 1)
    dens = homodyne_pdf(state, 0, 0.0, fine)
    cdf = np.concatenate(([0.0], np.cumsum((dens[1:] + dens[:-1]) / 2 * np.diff(fine))))
    idx = np.searchsorted(fine, edges)
    bin_probs = np.diff(cdf[idx])
    inside = observed.sum()
    expected = bin_probs / bin_probs.sum() * inside
    keep = expected > 5
    stat, p = stats.chisquare(observed[keep], expected[keep] * observed[keep].sum() / expected[keep].sum())
    return {"name": f"sampler-chi2-{name}", "passed": bool(p > 0.001), "p_value": float(p)}


def _identity_checks(seed: int) -> list[dict]:
    checks = []
    balanced = GateConfig(gamma=0.17, seed=seed)
    res = verify_heisenberg_identity(balanced, trials=1000)
    checks.append(
        {"name": "heisenberg-balanced-vs-direct-and-eq22", "passed": bool(res < 1e-10), "max_residual": res}
    )
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(5):
        t1, t2 = rng.uniform(0.1, 0.9, 2)
        gamma = rng.uniform(-0.4, 0.4) or 0.1
        cfg = GateConfig(gamma=float(gamma), t1=float(t1), t2=float(t2), seed=seed)
        worst = max(worst, verify_heisenberg_identity(cfg, trials=1000, rng=rng))
    checks.append(
        {"name": "heisenberg-random-configs", "passed": bool(worst < 1e-10), "max_residual": worst}
    )

    # generalized projector reduces to the balanced one at T = 1/2, theta = 0
    from .phasespace import wigner_of_state as wig

    ancillas = {
        "vacuum": vacuum(8),
        "fock1": fock_state(1, 8),
        "optimized3": optimize_ancilla(3).state(),
    }
    worst_diff = 0.0
    for name, st in ancillas.items():
        wa = wig(st, ((-9.0, 9.0, 361), (-9.0, 9.0, 361)))
        target_axes = ((-5.0, 5.0, 201), (-5.0, 5.0, 201))
        q, y = 0.35, -0.2
        direct = projector_wigner(wa, q, y, axes=target_axes)
        general = generalized_projector_wigner(
            wa, ProjectorParams(q=q, y=y, T=0.5, theta=0.0), axes=target_axes
        )
        worst_diff = max(worst_diff, float(np.max(np.abs(direct.values - general.values))))
    checks.append(
        {"name": "projector-reduction-T0.5-theta0", "passed": bool(worst_diff < 1e-6), "max_abs_diff": worst_diff}
    )
    return checks


def _sampler_checks(seed: int) -> list[dict]:
    rng = np.random.default_rng(seed)
    amps = rng.normal(size=6) + 1j * rng.normal(size=6)
    random6 = StateVector((6,), amps / np.linalg.norm(amps))
    return [
        _chi_square_check(vacuum(6), "vacuum", seed),
        _chi_square_check(fock_state(1, 6), "fock1", seed + 1),
        _chi_square_check(random6, "random-dim6", seed + 2),
    ]


def _cmd_validate(args) -> int:
    t0 = time.monotonic()
    seed = 20260810
    checks = []
    if args.suite in ("identities", "all"):
        checks.extend(_identity_checks(seed))
    if args.suite in ("sampler", "all"):
        checks.extend(_sampler_checks(seed))
    passed = all(c["passed"] for c in checks)
    for c in checks:
        status = "PASS" if c["passed"] else "FAIL"
        detail = {k: v for k, v in c.items() if k not in ("name", "passed")}
        print(f"[{status}] {c['name']} {detail}")
    report = {"suite": args.suite, "passed": passed, "checks": checks}
    outputs = []
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
        outputs.append(args.out)
    _emit_manifest(
        "validate", {"suite": args.suite}, seed, outputs, t0, args.out,
        extra={"passed": passed},
    )
    return EXIT_OK if passed else EXIT_VALIDATION


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cubist",
        description="Measurement-induced cubic gate: simulation and ancilla optimization.",
    )
    parser.add_argument("--version", action="version", version=f"cubist {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    anc = sub.add_parser("ancilla", help="ancilla optimization and search maps")
    anc_sub = anc.add_subparsers(dest="subcommand", required=True)

    opt = anc_sub.add_parser("optimize", help="optimal ancilla for photon cutoff N")
    opt.add_argument("--n", type=int, required=True)
    opt.add_argument("--lambda-range", type=_parse_range, default=None)
    opt.add_argument("--d-range", type=_parse_range, default=None)
    opt.add_argument("--out", default=None)
    opt.add_argument("--config", default=None)
    opt.add_argument("--workers", type=int, default=_default_workers())
    opt.set_defaults(func=_cmd_ancilla_optimize)

    amap = anc_sub.add_parser("map", help="minimum-search map over (lambda', d)")
    amap.add_argument("--n", type=int, required=True)
    amap.add_argument("--lambda-range", type=_parse_range, default=None)
    amap.add_argument("--d-range", type=_parse_range, default=None)
    amap.add_argument("--resolution", type=_parse_resolution, default=None)
    amap.add_argument("--unit", choices=("raw", "dB"), default="raw")
    amap.add_argument("--out", required=True)
    amap.add_argument("--config", default=None)
    amap.add_argument("--workers", type=int, default=_default_workers())
    amap.set_defaults(func=_cmd_ancilla_map)

    wig = sub.add_parser("wigner", help="Wigner grid of a named or stored state")
    wig.add_argument("--state", required=True, help="ideal-cubic | optimized-N | state JSON file")
    wig.add_argument("--gamma", type=float, default=0.1)
    wig.add_argument("--axes", type=_parse_axes, default=None)
    wig.add_argument("--out", required=True)
    wig.set_defaults(func=_cmd_wigner)

    gate = sub.add_parser("gate", help="gate simulation")
    gate_sub = gate.add_subparsers(dest="subcommand", required=True)
    grun = gate_sub.add_parser("run", help="Monte-Carlo batch of gate shots")
    grun.add_argument("--gamma", type=float, default=None)
    grun.add_argument("--t1", type=float, default=None)
    grun.add_argument("--t2", type=float, default=None)
    grun.add_argument("--squeeze-db", type=float, default=None)
    grun.add_argument("--ancilla", default=None,
                      help="vacuum | gaussian | optimized-N | state JSON file")
    grun.add_argument("--shots", type=int, default=None)
    grun.add_argument("--seed", type=int, default=None)
    grun.add_argument("--out", default=None)
    grun.add_argument("--shot-log", default=None)
    grun.add_argument("--config", default=None)
    grun.add_argument("--workers", type=int, default=_default_workers())
    grun.set_defaults(func=_cmd_gate_run)

    val = sub.add_parser("validate", help="built-in validation suites")
    val.add_argument("--suite", choices=("identities", "sampler", "all"), default="all")
    val.add_argument("--out", default=None)
    val.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CubistError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
