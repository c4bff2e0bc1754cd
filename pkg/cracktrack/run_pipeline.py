"""The main logic of the library to run a cracktrack pipeline.

This module contains the stages of a run and is called from the `command_line_pipe` module,
which is really just a helper for the command line script `cracktrack`. Each subcommand is a
list of stages. A stage takes what it needs from a `PipelineContext`, which builds the crack,
the coefficient bundle, the meshes, the sphere spectrum and the solution lazily and at most
once. Stages write their artifacts into the staging directory and record named checks; the
`RunManifest` is written last.

Example:
    Given a valid configuration file, one can run a stage directly from Python with
    `run_stage(subcommand="frequency", config="configs/smoke.yaml")`.
"""

import logging
import os
from dataclasses import asdict, dataclass
from functools import cached_property

import numpy as np
import torch

from cracktrack import __version__
from cracktrack.crack_geometry import CrackSpec
from cracktrack.errors import DomainError, ResolutionError
from cracktrack.frequency_analysis import (
    HomogeneousExtension,
    asymptotic_profile_error,
    beta_spread,
    blowup_convergence,
    doubling_bounds,
    doubling_check,
    downstairs_convergence,
    emit_profile,
    fourier_coefficient,
    frequency_profile,
    height_limit,
    parseval_check,
    upsilon_beta,
    vanishing_order,
)
from cracktrack.inequality_audit import (
    boundary_identity_residual,
    default_coercivity_constant,
    export_reports,
    fit_coercivity_constant,
    format_table,
    gamma_term,
    hardy_residual,
    pohozaev_residual,
    probe_coercivity_radius,
    rellich_necas_sweep,
    star_shaped_report,
    xi_f,
)
from cracktrack.mesh_fem import (
    BoundaryData,
    assemble_solve,
    closed_form_field,
    cutoff_boundary_data,
    galerkin_residual,
    h1_distance,
    mesh_approx_domain,
    mesh_slit_ball,
)
from cracktrack.sphere_spectrum import (
    SlitSphereSpectrum,
    first_mode_closed_form,
    oracle_eigenvalue,
    oracle_multiplicity,
)
from cracktrack.straightening import PotentialSpec, build_bundle
from cracktrack.utils.config_utils import config_hash, handle_config_cases, load_config, parse_overrides
from cracktrack.utils.data_utils import autocast, file_checksum, staged_output, write_json, write_table
from cracktrack.utils.logging_utils import attach_file_handler, detach_file_handlers

ORACLE_FIELDS = (("crack_mode", 0.5), ("x3", 1.0), ("x1_crack_mode", 1.5))
SOLVER_RESIDUAL = 1e-6
HALF_INTEGER_WINDOW = 0.05
DOUBLING_FACTORS = (1.0, 1.5, 2.0)
FOURIER_EXACT = 1e-3
FOURIER_CROSS = 1e-6


class PipelineContext:
    """
    Shared, lazily built objects of one run.

    Attributes:
        config (RunConfig): The validated configuration
        workdir (str): Staging directory of the run
        checks (list): Recorded checks, dicts with at least `name` and `passed`
        files (list): Artifacts written, relative to `workdir`
        constants (dict): Fitted constants reported in the manifest
    """

    def __init__(self, config, workdir):
        self.config = config
        self.workdir = workdir
        self.checks = []
        self.files = []
        self.constants = {}

    def path(self, name):
        if name not in self.files:
            self.files.append(name)
        return os.path.join(self.workdir, name)

    def check(self, name, passed, **detail):
        passed = bool(passed)
        self.checks.append({"name": name, "passed": passed, **detail})
        level = logging.INFO if passed else logging.WARNING
        logging.log(level, f"Check {name}: {'pass' if passed else 'FAIL'} {detail}")
        return passed

    @cached_property
    def crack(self):
        return CrackSpec.from_dict(self.config.crack)

    @cached_property
    def bundle(self):
        return build_bundle(self.crack, seed=self.config.seed)

    @cached_property
    def flat_bundle(self):
        return build_bundle(CrackSpec("flat", dim_n=self.crack.dim_n), seed=self.config.seed)

    @cached_property
    def potential(self):
        return PotentialSpec.from_dict({"dim_n": self.crack.dim_n, **self.config.potential})

    @cached_property
    def zero_potential(self):
        return PotentialSpec.zero(self.crack.dim_n)

    @cached_property
    def mesh(self):
        mesh = self.config.mesh
        return mesh_slit_ball(mesh["r"], mesh["h"], mesh["grading"], mesh["levels"])

    @cached_property
    def spectrum(self):
        spectrum = self.config.spectrum
        return SlitSphereSpectrum.compute(
            spectrum["h_sphere"], int(spectrum["count"]), self.config.seed, self.crack.dim_n
        )

    @cached_property
    def boundary_data(self):
        return BoundaryData.from_dict(self.config.boundary_data, self.bundle)

    @cached_property
    def solution(self):
        return assemble_solve(self.mesh, self.bundle, self.potential, self.boundary_data, self.config.threads)

    @cached_property
    def profile(self):
        return frequency_profile(self.solution, self.bundle, self.potential, self.config.radii)

    def beyond_r0(self, radius, what):
        """Warn when `radius` exceeds the estimated coercivity radius r0; True if it does."""
        r0 = self.constants.get("r0")
        if r0 is None or radius <= r0:
            return False
        logging.warning(f"{what} {radius} exceeds the coercivity radius r0 = {r0}")
        return True

    def resolved(self, radii):
        """The radii the slit ball mesh resolves."""
        kept = []
        for r in radii:
            try:
                self.mesh.require_resolved(r)
                kept.append(r)
            except ResolutionError as e:
                logging.warning(f"Skipping radius {r}: {e}")
        return kept

    def manifest(self, subcommand, combination):
        files = {
            name: file_checksum(os.path.join(self.workdir, name))
            for name in sorted(self.files)
            if os.path.exists(os.path.join(self.workdir, name))
        }
        return RunManifest(
            config_hash=config_hash(self.config),
            version=__version__,
            subcommand=subcommand,
            sweep=combination,
            constants=self.constants,
            files=files,
            checks=self.checks,
            passed=all(check["passed"] for check in self.checks),
        )


@dataclass
class RunManifest:
    """Summary of a run; written last, so its presence marks a complete run."""

    config_hash: str
    version: str
    subcommand: str
    sweep: dict
    constants: dict
    files: dict
    checks: list
    passed: bool

    def write(self, path):
        return write_json(path, asdict(self))


# -- stages -------------------------------------------------------------------------


def spectrum_stage(ctx):
    spectrum = ctx.spectrum
    spectrum.export(ctx.path("spectrum.json"))
    spectrum.mesh.export(ctx.path("sphere_mesh.txt"))
    dim_n = ctx.crack.dim_n

    first = spectrum.pairs[0]
    expected = oracle_eigenvalue(1, dim_n)
    tolerance = spectrum.mesh.mesh_size * ctx.config.tolerance_scale
    error = abs(first.mu - expected) / expected
    ctx.check("first_eigenvalue", error <= tolerance, value=first.mu, expected=expected, error=error)

    counts = spectrum.multiplicities()
    complete = sorted(counts)[:-1]
    ctx.check(
        "multiplicities",
        all(counts[k] == oracle_multiplicity(k) for k in complete),
        found={str(k): counts[k] for k in counts},
    )

    vertices = spectrum.mesh.vertices
    closed = first_mode_closed_form(vertices)
    mass = spectrum.mass
    scale = (first.psi @ (mass @ closed)) / (closed @ (mass @ closed))
    difference = first.psi - scale * closed
    shape_error = float(np.sqrt(difference @ (mass @ difference)))
    ctx.check("first_mode_shape", shape_error <= 0.05 * ctx.config.tolerance_scale, error=shape_error)
    ctx.constants["first_eigenvalue"] = first.mu


def solve_stage(ctx):
    ctx.beyond_r0(ctx.mesh.radius, "Mesh radius")
    u = ctx.solution
    ctx.mesh.export(ctx.path("mesh.txt"))
    u.export(ctx.path("solution.txt"))
    residual = galerkin_residual(u, ctx.bundle, ctx.potential, ctx.config.threads)
    ctx.check("galerkin_residual", residual <= SOLVER_RESIDUAL, value=residual, **u.info)


def frequency_stage(ctx):
    config = ctx.config
    radii = np.asarray(ctx.resolved(config.radii))
    for name, expected in ORACLE_FIELDS:
        profile = frequency_profile(
            closed_form_field(name), ctx.flat_bundle, ctx.zero_potential, radii, mesh=ctx.mesh
        )
        emit_profile(profile, ctx.path(f"profile_{name}.csv"), ctx.path(f"profile_{name}.json"))
        error = float(np.max(np.abs(profile.N - expected)) / expected)
        ctx.check(f"frequency_{name}", error <= config.tolerance("frequency"), expected=expected, error=error)
        height = {"x3": 4.0 * np.pi / 3.0 * radii**2, "crack_mode": 0.5 * np.pi**2 * radii}.get(name)
        if height is not None:
            error = float(np.max(np.abs(profile.H / height - 1.0)))
            ctx.check(f"height_{name}", error <= config.tolerance("height"), error=error)

    profile = ctx.profile
    emit_profile(profile, ctx.path("profile_solution.csv"), ctx.path("profile_solution.json"))
    ctx.check("frequency_lower_bound", profile.lower_bound_holds, min_N=float(profile.N.min()))
    ell = profile.ell_estimate
    matched = ell is not None and profile.k0 is not None and abs(ell - 0.5 * profile.k0) <= HALF_INTEGER_WINDOW
    ctx.check("half_integer_limit", matched, ell=ell, k0=profile.k0)
    ctx.constants.update({"ell": ell, "k0": profile.k0, "eps_bar": profile.eps_bar})
    if ell is not None:
        limit = height_limit(profile)
        ctx.check(
            "height_limit",
            limit["positive"] and limit["stability"] <= config.tolerance("beta"),
            limit=limit["limit"],
            stability=limit["stability"],
        )


def _matched_cluster(ctx):
    k0 = ctx.profile.k0
    pairs = ctx.spectrum.pairs_for(k0) if k0 is not None else []
    if not ctx.check("k0_in_spectrum", bool(pairs), k0=k0):
        return None, []
    return k0, pairs


def blowup_stage(ctx):
    config = ctx.config
    k0, pairs = _matched_cluster(ctx)
    if not pairs:
        return
    for lam in config.lambdas:
        ctx.beyond_r0(lam, "Blow-up scale")

    rows = blowup_convergence(ctx.solution, ctx.bundle, config.lambdas, pairs, ctx.spectrum.mesh, k0)
    write_table(
        ctx.path("blowup.csv"),
        {
            "lambda": [row["lambda"] for row in rows],
            "l2": [row["l2"] for row in rows],
            "h1": [row["h1"] for row in rows],
        },
    )
    errors = [row["h1"] for row in rows]
    ctx.check("blowup_decreasing", all(b < a for a, b in zip(errors, errors[1:])), errors=errors)

    lam = min(config.lambdas)
    factors = [R for R in DOUBLING_FACTORS if R * lam <= config.mesh["r"]]
    ratios = doubling_check(ctx.solution, ctx.bundle, lam, factors)
    bounds = doubling_bounds(ctx.profile, factors)
    ctx.check(
        "doubling",
        all(low <= ratio <= high for ratio, (low, high) in zip(ratios, bounds)),
        ratios=ratios,
        bounds=bounds,
    )
    ctx.constants["vanishing_order"] = vanishing_order(ctx.solution, ctx.bundle, ctx.resolved(config.radii))


def fourier_stage(ctx):
    config = ctx.config
    spectrum = ctx.spectrum
    mesh = spectrum.mesh
    first = spectrum.pairs_for(1)
    if first:
        exact = HomogeneousExtension(mesh, first[:1], [1.0], 0.5)
        others = [pair for pair in spectrum.pairs if pair.k_index != 1]
        worst_exact, worst_cross = 0.0, 0.0
        for lam in config.lambdas:
            phi = fourier_coefficient(exact, first[0], mesh, lam)
            worst_exact = max(worst_exact, abs(phi / lam**0.5 - 1.0))
            for pair in others:
                worst_cross = max(worst_cross, abs(fourier_coefficient(exact, pair, mesh, lam)))
        ctx.check("fourier_exact", worst_exact <= FOURIER_EXACT, error=worst_exact)
        ctx.check("fourier_cross_cluster", worst_cross <= FOURIER_CROSS, value=worst_cross)

    k0, pairs = _matched_cluster(ctx)
    if not pairs:
        return
    for lam in config.lambdas:
        bessel = parseval_check(ctx.solution, spectrum.pairs, mesh, lam, ctx.bundle)
        ctx.check(
            f"parseval_{lam:g}",
            bessel["partial_sum"] <= (1.0 + config.tolerance("beta")) * bessel["norm_sq"],
            **bessel,
        )

    tables = []
    for R in sorted(handle_config_cases(config.fourier["R_values"])):
        lambdas = [lam for lam in config.lambdas if lam <= R] or [R]
        table = upsilon_beta(
            ctx.solution,
            ctx.bundle,
            ctx.potential,
            pairs,
            mesh,
            lambdas,
            R,
            grid_count=int(config.fourier["grid_count"]),
        )
        table.export(ctx.path(f"fourier_R{R:g}.csv"), ctx.path(f"fourier_R{R:g}.json"))
        tables.append(table)
    spread = beta_spread(tables)
    ctx.check("beta_stability", spread <= config.tolerance("beta"), spread=spread)
    ctx.constants["beta"] = tables[-1].beta.tolist()

    upstairs = asymptotic_profile_error(ctx.solution, tables[-1], pairs, mesh, config.lambdas)
    downstairs = downstairs_convergence(ctx.solution, ctx.bundle, tables[-1], pairs, mesh, config.lambdas)
    write_table(
        ctx.path("asymptotic_profile.csv"),
        {"lambda": sorted(config.lambdas, reverse=True), "upstairs": upstairs, "downstairs": downstairs},
    )


def _coercivity(ctx, fields, radii):
    f = ctx.potential
    constant = default_coercivity_constant(f, ctx.crack.dim_n)
    if constant is None:
        constant = fit_coercivity_constant(fields, ctx.bundle, f, radii[-2:], mesh=ctx.mesh)
    probe = probe_coercivity_radius(
        fields, ctx.bundle, f, radii, mesh=ctx.mesh, constant=constant, tolerance=ctx.config.tolerance("coercivity")
    )
    ctx.constants.update({"C": constant, "eps": f.epsilon(), "r0": probe["r0"]})
    ctx.check("coercivity_radius", probe["r0"] is not None, r0=probe["r0"])
    ctx.beyond_r0(ctx.mesh.radius, "Mesh radius of the solve")
    return probe["reports"]


def _xi_f(ctx):
    f = ctx.potential
    radii = (0.2, 0.1, 0.05)
    values = [xi_f(f, r) for r in radii]
    ctx.constants["xi_f"] = dict(zip(map(str, radii), values))
    monotone = all(a >= b for a, b in zip(values, values[1:]))
    if f.mode == "a1" and not f.is_zero:
        ratios = [value / r**f.delta for value, r in zip(values, radii)]
        ctx.check("xi_f_decay", monotone and max(ratios) <= (1.0 + 1e-9) * ratios[0], ratios=ratios)
    else:
        ctx.check("xi_f_monotone", monotone, values=values)


def audit_stage(ctx):
    config = ctx.config
    audits = set(config.audits)
    radii = ctx.resolved(config.probe_radii)
    one, x3 = closed_form_field("one"), closed_form_field("x3")
    fields = [one, x3, ctx.solution]
    zero = ctx.zero_potential
    reports = []

    if "hardy" in audits:
        for u in fields:
            for r in radii:
                reports.append(hardy_residual(u, r, ctx.mesh, ctx.crack.dim_n, config.tolerance("hardy")))
    if "coercivity" in audits:
        reports.extend(_coercivity(ctx, fields, radii))
    if "xi_f" in audits:
        _xi_f(ctx)
    if "rellich_necas" in audits:
        reports.extend(
            rellich_necas_sweep(
                [ctx.bundle, ctx.flat_bundle], seed=config.seed, tolerance=config.tolerance("rellich_necas")
            )
        )
    if "pohozaev" in audits:
        tolerance = config.tolerance("pohozaev")
        for name in ("crack_mode", "x3"):
            for r in radii:
                reports.append(
                    pohozaev_residual(
                        closed_form_field(name),
                        ctx.flat_bundle,
                        zero,
                        r,
                        mesh=ctx.mesh,
                        expect_equality=True,
                        tolerance=tolerance,
                    )
                )
        mode = "a2_inequality" if ctx.potential.mode == "a2" else "a1_inequality"
        for r in ctx.resolved(config.radii)[:5]:
            reports.append(pohozaev_residual(ctx.solution, ctx.bundle, ctx.potential, r, mode, tolerance=tolerance))
    if "boundary_identity" in audits:
        tolerance = config.tolerance("boundary_identity")
        for r in radii:
            reports.append(boundary_identity_residual(x3, ctx.flat_bundle, zero, r, ctx.mesh, tolerance))
            reports.append(boundary_identity_residual(ctx.solution, ctx.bundle, ctx.potential, r, tolerance=tolerance))
    if "star_shaped" in audits:
        r, alpha = config.mesh["r"], config.approx["alpha"]
        for n in handle_config_cases(config.approx["n_values"]):
            for bundle in (ctx.flat_bundle, ctx.bundle):
                try:
                    reports.append(star_shaped_report(bundle, r, int(n), alpha, tolerance=config.tolerance("star_shaped")))
                except DomainError as e:
                    logging.warning(f"Star-shapedness skipped for n={n}: {e}")

    export_reports(reports, ctx.path("audits.json"))
    with open(ctx.path("audits.txt"), "w") as f:
        f.write(format_table(reports) + "\n")
    for report in reports:
        ctx.check(f"audit_{report.name}", report.passed, radius=report.context.get("radius"), residual=report.residual)


def approx_stage(ctx):
    config = ctx.config
    mesh, approx = config.mesh, config.approx
    r, alpha = mesh["r"], float(approx["alpha"])
    n_values = sorted(int(n) for n in handle_config_cases(approx["n_values"]))
    rows = {"n": [], "l2": [], "h1": [], "unknowns": [], "gamma_term": []}
    last = None
    for n in n_values:
        domain = mesh_approx_domain(r, n, alpha, mesh["h"], mesh["grading"], mesh["levels"])
        data = cutoff_boundary_data(ctx.boundary_data, n, alpha)
        u_n = assemble_solve(domain, ctx.bundle, ctx.potential, data, config.threads)
        distance = h1_distance(u_n, ctx.solution, r)
        rows["n"].append(n)
        rows["l2"].append(distance["l2"])
        rows["h1"].append(distance["h1"])
        rows["unknowns"].append(u_n.info["unknowns"])
        rows["gamma_term"].append(gamma_term(u_n, ctx.bundle, 0.5 * r)[0])
        last = u_n
    write_table(ctx.path("approx.csv"), rows)
    errors = rows["h1"]
    ctx.check("approx_convergence", all(b < a for a, b in zip(errors, errors[1:])), errors=errors)

    if last is not None:
        report = pohozaev_residual(
            last, ctx.bundle, ctx.potential, 0.5 * r, "approx_identity", tolerance=config.tolerance("pohozaev")
        )
        export_reports([report], ctx.path("pohozaev_approx.json"))
        ctx.check("pohozaev_approx_identity", report.passed, gamma_term=report.context["gamma_term"])


SUBCOMMANDS = {
    "spectrum": (spectrum_stage,),
    "solve": (solve_stage,),
    "frequency": (frequency_stage,),
    "blowup": (frequency_stage, blowup_stage),
    "fourier": (spectrum_stage, fourier_stage),
    "audit": (audit_stage,),
    "approx": (approx_stage,),
    "verify": (
        spectrum_stage,
        solve_stage,
        frequency_stage,
        audit_stage,
        blowup_stage,
        fourier_stage,
        approx_stage,
    ),
}


def run_single(subcommand, config, output_dir, combination=None):
    """
    Run the stages of one subcommand for one configuration into `output_dir`.

    Returns:
        RunManifest: The manifest written last into the committed directory
    """
    torch.set_num_threads(config.threads)
    with staged_output(output_dir) as staging:
        attach_file_handler(os.path.join(staging, "run.log"))
        try:
            ctx = PipelineContext(config, staging)
            for stage in SUBCOMMANDS[subcommand]:
                logging.info(f"Running stage {stage.__name__}")
                stage(ctx)
            write_json(ctx.path("config.json"), config.to_dict())
            manifest = ctx.manifest(subcommand, combination or {})
            manifest.write(os.path.join(staging, "manifest.json"))
        finally:
            detach_file_handlers()
    failed = [check["name"] for check in manifest.checks if not check["passed"]]
    logging.info(f"Run {subcommand} finished in {output_dir}: {len(manifest.checks)} checks, {len(failed)} failed")
    for name in failed:
        logging.error(f"Failed check: {name}")
    return manifest


@autocast
def run_stage(subcommand="verify", config="configs/flagship.yaml", output=None, threads=None, seed=None, tolerance_scale=None, overrides=None):
    """
    Load the configuration (with its sweep) and run a subcommand for each combination.

    Command line flags override the matching configuration entries; `overrides` are
    "key.sub=value" strings.

    Returns:
        list: The manifests, one per sweep combination
    """
    settings = parse_overrides(handle_config_cases(overrides))
    for key, value in (("threads", threads), ("seed", seed), ("tolerance_scale", tolerance_scale)):
        if value is not None:
            settings[key] = value
    if output is not None:
        settings["output_dir"] = output
    configs = load_config(config, settings)

    manifests = []
    for index, (combination, run_config) in enumerate(configs):
        output_dir = run_config.output_dir
        if len(configs) > 1:
            output_dir = os.path.join(output_dir, f"sweep_{index:03d}")
        logging.info(f"Combination {index}: {combination}")
        manifests.append(run_single(subcommand, run_config, output_dir, combination))
    return manifests


def start(args):
    """Run from parsed command line arguments; True when every check passed."""
    manifests = run_stage(
        subcommand=args.subcommand,
        config=args.config,
        output=args.output,
        threads=args.threads,
        seed=args.seed,
        tolerance_scale=args.tolerance_scale,
        overrides=args.set,
    )
    return all(manifest.passed for manifest in manifests)
