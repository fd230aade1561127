import json
import logging
import sys
from argparse import ArgumentParser, Namespace
from pathlib import Path
from typing import Any

import numpy as np
from sqlalchemy.engine import Engine
from sqlmodel import Session

from bm.solver import BmConfig, bm_multistart
from core.config import GOLFING_C0, LOG_LEVEL, RANK_EPS, SOLVER_TOL_FEAS, UNIQUE_EPS, USE_RAY
from core.errors import (
    CertificateFailure,
    Infeasible,
    InvalidInput,
    NumericalBreakdown,
    ParseError,
    Unbounded,
)
from core.ledger_service import LedgerService
from core.rng import gaussian_symmetric, make_rng
from db.documents import (
    BmStartDoc,
    BmSummaryDoc,
    DemoDoc,
    Document,
    GolfingDoc,
    InstanceDoc,
    MatrixDoc,
    ProbeDoc,
    ResidualsDoc,
    SimplicityReport,
    SolutionDoc,
    dump_document,
    load_document,
    save_document,
    write_spectrum_csv,
)
from db.models import RunKind
from db.session import create_db_and_tables
from db.session import engine as default_engine
from execution.pool import run_trials
from instances.generators import (
    certificate_rate,
    maxcut,
    orthogonal_cut,
    product_sdp,
    q_for_signal,
    random_simple_instance,
    sbm,
    simple_from_psd,
    z2_sync,
)
from instances.graphs import parse_gset, random_graph
from instances.instance import Instance
from mc.duals import dual_multiplicity_demo, lifted_dual_from_Y
from mc.golfing import golfing_certificate, golfing_pass_rate
from mc.problem import default_probability, mc_generate, mc_lift
from sdp.certifier import certify, compare_to_reference, instance_hash, render_table
from sdp.model import SolveStatus, SolverSolution, StandardFormSDP
from sdp.probes import error_bound_probe, sensitivity_probe
from sdp.solver import SolverConfig, solve

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2
EXIT_UNBOUNDED = 3
EXIT_BREAKDOWN = 4
EXIT_USAGE = 5
EXIT_CERTIFICATE = 6

# first match wins
EXIT_CODES: list[tuple[type[Exception], int]] = [
    (Infeasible, EXIT_INFEASIBLE),
    (Unbounded, EXIT_UNBOUNDED),
    (NumericalBreakdown, EXIT_BREAKDOWN),
    (InvalidInput, EXIT_USAGE),
    (ParseError, EXIT_USAGE),
    (CertificateFailure, EXIT_CERTIFICATE),
]

FAMILIES = ["simple-from-psd", "maxcut", "ocut", "product", "z2sync", "sbm", "mc"]


def exit_code_for(error: Exception) -> int:
    for kind, code in EXIT_CODES:
        if isinstance(error, kind):
            return code
    return EXIT_ERROR


class UsageParser(ArgumentParser):
    """ArgumentParser that reports usage errors with the usage exit code."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


#
# Solution documents
#


def solution_to_document(sol: SolverSolution) -> SolutionDoc:
    res = sol.residuals
    return SolutionDoc(
        label=sol.sdp.label,
        n=sol.sdp.n,
        m=sol.sdp.m,
        X=MatrixDoc.of(sol.X),
        y=sol.y.tolist(),
        status=sol.status.value,
        converged=sol.converged,
        iterations=sol.iterations,
        primal_obj=res.primal_obj,
        dual_obj=res.dual_obj,
        residuals=ResidualsDoc(
            primal_infeas=res.primal_infeas,
            dual_infeas=res.dual_infeas,
            cone_infeas=res.cone_infeas,
            gap=res.gap,
        ),
        instance_hash=instance_hash(sol.sdp),
    )


def solution_from_document(doc: SolutionDoc, sdp: StandardFormSDP) -> SolverSolution:
    """Attach a stored solution to the instance it was computed for."""
    if doc.instance_hash != instance_hash(sdp):
        raise InvalidInput(f"solution {doc.label!r} was computed for a different instance")
    if (doc.n, doc.m) != (sdp.n, sdp.m):
        raise InvalidInput("solution dimensions do not match the instance")
    return SolverSolution(
        sdp, doc.X.to_array(), np.asarray(doc.y, dtype=np.float64), SolveStatus(doc.status), doc.iterations
    )


def load_instance(path: str | Path) -> Instance:
    return Instance.from_document(load_document(path, InstanceDoc))


def load_solution(path: str | Path, instance: Instance) -> SolverSolution:
    return solution_from_document(load_document(path, SolutionDoc), instance.sdp)


class SdpCLI:
    """
    Command-line interface for generating, solving and certifying SDPs.
    Every command reads and writes JSON documents; runs are recorded in the
    ledger unless --no-ledger is given.
    """

    def __init__(self, engine: Engine | None = None):
        self.engine = engine if engine is not None else default_engine

    def build_parser(self) -> UsageParser:
        parser = UsageParser(prog="sdp", description="Simple SDP toolkit")
        parser.add_argument("--no-ledger", action="store_true", help="Do not record runs")
        subparsers = parser.add_subparsers(dest="command", help="Command to execute")

        # Instance generation
        gen_parser = subparsers.add_parser("gen", help="Generate an instance")
        gen_parser.add_argument("family", choices=FAMILIES, help="Instance family")
        gen_parser.add_argument("--seed", type=int, default=0, help="Random seed")
        gen_parser.add_argument("--out", help="Output file (stdout when omitted)")
        gen_parser.add_argument("--n", type=int, default=20, help="Matrix order or vertex count")
        gen_parser.add_argument("--rank", type=int, default=2, help="Planted rank")
        gen_parser.add_argument("--matrix", help="Whitespace-separated PSD matrix (simple-from-psd)")
        gen_parser.add_argument("--gset", help="Gset graph file (maxcut)")
        gen_parser.add_argument(
            "--random", nargs=2, type=float, metavar=("N", "DENSITY"), help="Random graph (maxcut)"
        )
        gen_parser.add_argument("--signed", action="store_true", help="+-1 edge weights (maxcut)")
        gen_parser.add_argument("--S", type=int, default=10, help="Number of blocks (ocut)")
        gen_parser.add_argument("--d", type=int, default=2, help="Block size (ocut)")
        gen_parser.add_argument("--groups", type=int, default=4, help="Number of groups (product)")
        gen_parser.add_argument("--gamma", type=float, default=1.0, help="Noise level (z2sync)")
        gen_parser.add_argument("--p", type=float, help="Edge or observation probability")
        gen_parser.add_argument("--q", type=float, help="Inter-community probability (sbm)")
        gen_parser.add_argument("--signal", type=float, help="Signal strength fixing q (sbm)")
        gen_parser.add_argument("--original", action="store_true", help="Unscaled SBM cost")
        gen_parser.add_argument("--trials", type=int, help="Certificate validity rate over K seeds")
        gen_parser.add_argument("--ray", action="store_true", default=USE_RAY, help="Use Ray")

        # Solving and certification
        solve_parser = subparsers.add_parser("solve", help="Solve an instance")
        solve_parser.add_argument("instance", help="Instance JSON")
        solve_parser.add_argument("--tol", type=float, default=SOLVER_TOL_FEAS, help="Relative tolerance")
        solve_parser.add_argument("--max-iters", type=int, help="Iteration cap")
        solve_parser.add_argument("--no-polish", action="store_true", help="Skip polishing")
        solve_parser.add_argument("--out", help="Output file (stdout when omitted)")

        certify_parser = subparsers.add_parser("certify", help="Certify a solved instance")
        certify_parser.add_argument("instance", help="Instance JSON")
        certify_parser.add_argument("solution", help="Solution JSON")
        certify_parser.add_argument("--eps", type=float, default=RANK_EPS, help="Rank threshold")
        certify_parser.add_argument("--unique-eps", type=float, default=UNIQUE_EPS)
        certify_parser.add_argument("--out", help="Report file")

        probe_parser = subparsers.add_parser("probe", help="Sensitivity or error-bound probe")
        probe_parser.add_argument("instance", help="Instance JSON")
        probe_parser.add_argument("solution", help="Solution JSON")
        probe_parser.add_argument(
            "--kind", choices=["sensitivity", "error-bound"], default="sensitivity"
        )
        probe_parser.add_argument(
            "--magnitudes", nargs="+", type=float, default=[1e-4, 1e-3, 1e-2], help="Perturbation sizes"
        )
        probe_parser.add_argument("--seed", type=int, default=0, help="Random seed")
        probe_parser.add_argument("--repeats", type=int, default=5, help="Re-solves per size")
        probe_parser.add_argument("--direction", choices=["random", "face"], default="random")
        probe_parser.add_argument("--ray", action="store_true", default=USE_RAY, help="Use Ray")
        probe_parser.add_argument("--out", help="Output file (stdout when omitted)")

        # Factorized solver
        bm_parser = subparsers.add_parser("bm", help="Burer-Monteiro multi-start")
        bm_parser.add_argument("instance", help="Instance JSON")
        bm_parser.add_argument("--r", type=int, required=True, help="Factor rank")
        bm_parser.add_argument("--starts", type=int, default=10, help="Number of starts")
        bm_parser.add_argument("--seed", type=int, default=0, help="Random seed")
        bm_parser.add_argument("--max-iters", type=int, help="Iteration cap per start")
        bm_parser.add_argument("--ray", action="store_true", default=USE_RAY, help="Use Ray")
        bm_parser.add_argument("--out", help="Summary file")

        # Matrix completion
        demo_parser = subparsers.add_parser("mc-demo", help="Dual multiplicity experiment")
        demo_parser.add_argument("--n", type=int, default=50, help="n1 = n2")
        demo_parser.add_argument("--rank", type=int, default=2, help="Rank")
        demo_parser.add_argument("--p", type=float, help="Observation probability")
        demo_parser.add_argument("--seed", type=int, default=0, help="Random seed")
        demo_parser.add_argument("--out-dir", default=".", help="Directory for JSON and CSV output")

        cert_parser = subparsers.add_parser("mc-cert", help="Golfing-scheme certificate")
        cert_parser.add_argument("--n", type=int, default=60, help="n1 = n2")
        cert_parser.add_argument("--rank", type=int, default=2, help="Rank")
        cert_parser.add_argument("--p", type=float, help="Observation probability")
        cert_parser.add_argument("--c0", type=float, default=GOLFING_C0, help="Batch count constant")
        cert_parser.add_argument("--seed", type=int, default=0, help="Random seed")
        cert_parser.add_argument("--trials", type=int, default=1, help="Monte Carlo trials")
        cert_parser.add_argument("--ray", action="store_true", default=USE_RAY, help="Use Ray")
        cert_parser.add_argument("--out", help="Output file (stdout when omitted)")

        # Gset certification sweep
        table_parser = subparsers.add_parser("table1", help="Certify a set of MaxCut instances")
        table_parser.add_argument("--gset-dir", help="Directory with Gset files")
        table_parser.add_argument("--graphs", default="G1", help="Comma-separated graph names")
        table_parser.add_argument("--small", action="store_true", help="Random graphs instead")
        table_parser.add_argument("--count", type=int, default=3, help="Random graphs (small mode)")
        table_parser.add_argument("--n", type=int, default=60, help="Vertices (small mode)")
        table_parser.add_argument("--density", type=float, default=0.3, help="Edge probability")
        table_parser.add_argument("--signed", action="store_true", help="+-1 edge weights")
        table_parser.add_argument("--seed", type=int, default=0, help="Random seed")
        table_parser.add_argument("--tol", type=float, default=SOLVER_TOL_FEAS, help="Solver tolerance")
        table_parser.add_argument("--ray", action="store_true", default=USE_RAY, help="Use Ray")
        table_parser.add_argument("--out", help="Reports file")

        # Ledger
        history_parser = subparsers.add_parser("history", help="List recorded runs")
        history_parser.add_argument("--kind", choices=[k.value for k in RunKind])
        history_parser.add_argument("--limit", type=int, default=20, help="Limit results")
        return parser

    def run(self, argv: list[str] | None = None) -> int:
        """Parse arguments and execute the appropriate command."""
        logging.basicConfig(
            level=LOG_LEVEL,
            format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
            handlers=[logging.StreamHandler(sys.stderr)],
        )
        parser = self.build_parser()
        args = parser.parse_args(argv)
        if not args.command:
            parser.print_help()
            return EXIT_USAGE

        try:
            method = getattr(self, f"cmd_{args.command.replace('-', '_')}")
            method(args)
        except Exception as e:
            code = exit_code_for(e)
            logger.error(f"{type(e).__name__}: {e}")
            return code
        return EXIT_OK

    #
    # Commands
    #

    def cmd_gen(self, args: Namespace):
        """Generate an instance, or a certificate validity rate with --trials."""
        if args.trials:
            self._certificate_rate(args)
            return
        instance = self._generate(args)
        self._emit(instance.to_document(), args.out)

    def cmd_solve(self, args: Namespace):
        """Solve an instance file."""
        instance = load_instance(args.instance)
        options = {"max_iters": args.max_iters} if args.max_iters else {}
        cfg = SolverConfig(tol_feas=args.tol, tol_gap=args.tol, polish=not args.no_polish, **options)
        sol = solve(instance.sdp, cfg)
        doc = solution_to_document(sol)
        self._emit(doc, args.out)
        self._record(
            args,
            RunKind.SOLVE,
            instance.label,
            instance.seed,
            {"status": doc.status, "primal_obj": doc.primal_obj, "iterations": doc.iterations},
        )

    def cmd_certify(self, args: Namespace):
        """Certify a solved instance and print its table row."""
        instance = load_instance(args.instance)
        sol = load_solution(args.solution, instance)
        report = certify(instance.sdp, sol, args.eps, args.unique_eps)
        if args.out:
            save_document(report, args.out)
        print(render_table([report]))
        if not args.no_ledger:
            with self._session() as session:
                LedgerService(session).record_certification(report, seed=instance.seed)

    def cmd_probe(self, args: Namespace):
        """Run an empirical probe around a stored solution."""
        instance = load_instance(args.instance)
        sol = load_solution(args.solution, instance)
        if args.kind == "sensitivity":
            table = sensitivity_probe(
                instance.sdp, sol, args.magnitudes, args.seed, args.repeats, use_ray=args.ray
            ).to_dict()
        else:
            table = error_bound_probe(
                instance.sdp, sol, args.magnitudes, args.seed, args.direction
            ).to_dict()
        doc = ProbeDoc(label=instance.label, probe=args.kind, table=table)
        self._emit(doc, args.out)
        self._record(args, RunKind.PROBE, instance.label, args.seed, {"probe": args.kind})

    def cmd_bm(self, args: Namespace):
        """Factorized multi-start with failure-witness detection."""
        instance = load_instance(args.instance)
        cfg = BmConfig(max_iters=args.max_iters) if args.max_iters else BmConfig()
        multi = bm_multistart(instance, args.r, args.starts, args.seed, cfg, use_ray=args.ray)

        starts = [
            BmStartDoc(
                seed=res.seed,
                objective=res.objective,
                grad_norm=res.grad_norm,
                hess_min_eig=res.hess_min_eig,
                sosp=res.sosp,
                gap_to_dual=res.gap_to_dual,
                iterations=res.iterations,
                escapes=res.escapes,
                spurious=res.seed in multi.failure_witnesses,
            )
            for res in multi.results
        ]
        starts += [BmStartDoc(seed=seed, error=error) for seed, error in multi.errors.items()]
        starts.sort(key=lambda start: start.seed)
        doc = BmSummaryDoc(
            label=instance.label,
            manifold=multi.thresholds["kind"],
            r=args.r,
            starts=starts,
            thresholds=multi.thresholds,
            dual_bound=multi.dual_bound,
            failure_witnesses=multi.failure_witnesses,
        )
        if args.out:
            save_document(doc, args.out)

        print(f"thresholds: {json.dumps(multi.thresholds)}")
        for start in starts:
            if start.error:
                print(f"seed {start.seed}: failed ({start.error})")
            else:
                print(
                    f"seed {start.seed}: f={start.objective:.8g} |grad|={start.grad_norm:.2e} "
                    f"lambda_min(H)={start.hess_min_eig:.2e} sosp={start.sosp} gap={start.gap_to_dual}"
                )
        if multi.failure_witnesses:
            print(f"failure witnesses: {multi.failure_witnesses}")
        self._record(
            args,
            RunKind.BM,
            instance.label,
            args.seed,
            {"r": args.r, "dual_bound": multi.dual_bound, "failure_witnesses": multi.failure_witnesses},
        )

    def cmd_mc_demo(self, args: Namespace):
        """Exhibit two distinct dual solutions of a lifted completion problem."""
        p = args.p if args.p is not None else default_probability(args.n, args.rank)
        prob = mc_generate(args.n, args.n, args.rank, p, args.seed)
        report = dual_multiplicity_demo(prob, seed=args.seed)

        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        stem = f"mc-demo-n{args.n}-r{args.rank}-s{args.seed}"
        write_spectrum_csv(out_dir / f"{stem}-identity.csv", report.spectrum_identity)
        write_spectrum_csv(out_dir / f"{stem}-random.csv", report.spectrum_random)
        save_document(DemoDoc(label=report.label, report=report.to_dict()), out_dir / f"{stem}.json")

        print(
            f"{report.label}: rank_p={report.rank_p} distance={report.distance:.3e} "
            f"multiplicity={report.multiplicity} "
            f"dual_uniqueness_necessary={report.necessary_condition}"
        )
        self._record(
            args,
            RunKind.DEMO,
            report.label,
            args.seed,
            {"distance": report.distance, "multiplicity": report.multiplicity},
        )

    def cmd_mc_cert(self, args: Namespace):
        """Golfing certificate on one problem, or its pass rate over --trials problems."""
        p = args.p if args.p is not None else default_probability(args.n, args.rank)
        label = f"golfing-n{args.n}-r{args.rank}-s{args.seed}"
        if args.trials > 1:
            sweep = golfing_pass_rate(
                args.n, args.rank, p, args.trials, args.seed, args.c0, use_ray=args.ray
            )
            doc = GolfingDoc(label=label, trials=sweep["trials"], pass_rate=sweep["pass_rate"])
        else:
            result = golfing_certificate(mc_generate(args.n, args.n, args.rank, p, args.seed), args.c0, args.seed)
            trial: dict[str, Any] = {
                "seed": args.seed,
                **result.checks.to_dict(),
                "k0": result.state.k0,
                "contraction_fraction": result.state.contraction_fraction,
            }
            if result.checks.passed:
                lifted = lifted_dual_from_Y(result.problem, result.Y)
                trial["lambda_gap"] = lifted.report.lambda_gap
                trial["strict_gap_ok"] = lifted.report.strict_gap_ok
            doc = GolfingDoc(label=label, trials=[trial], pass_rate=float(result.checks.passed))
        self._emit(doc, args.out)
        self._record(args, RunKind.GOLFING, label, args.seed, {"pass_rate": doc.pass_rate})

    def cmd_table1(self, args: Namespace):
        """Solve and certify a set of MaxCut instances and print the summary table."""
        if args.small:
            names = [f"R{k + 1}" for k in range(args.count)]

            def build(index: int) -> Instance:
                graph = random_graph(args.n, args.density, args.seed + index, signed=args.signed)
                return maxcut(graph, label=f"R{index + 1}-n{args.n}")
        else:
            if not args.gset_dir:
                raise InvalidInput("table1 needs --gset-dir or --small")
            names = [name.strip() for name in args.graphs.split(",") if name.strip()]

            def build(index: int) -> Instance:
                path = Path(args.gset_dir) / names[index]
                return maxcut(parse_gset(path), label=path.stem)

        cfg = SolverConfig(tol_feas=args.tol, tol_gap=args.tol)

        def trial(index: int) -> SimplicityReport:
            instance = build(index)
            return certify(instance.sdp, solve(instance.sdp, cfg))

        outcomes = run_trials(trial, len(names), 0, use_ray=args.ray)
        reports = [o.result for o in outcomes if o.ok]
        for o in outcomes:
            if not o.ok:
                logger.warning(f"{names[o.index]} failed: {o.error}")
        print(render_table(reports))

        checks = []
        for report in reports:
            if args.small:
                checks.append(
                    {
                        "graph": report.label,
                        "strict_complementarity": report.flags.strict_complementarity,
                        "simple": report.flags.simple,
                    }
                )
            else:
                checks.append(compare_to_reference(report, report.label))
        print(json.dumps(checks, indent=2))

        if args.out:
            Path(args.out).write_text(
                json.dumps([json.loads(dump_document(r)) for r in reports], indent=2) + "\n"
            )
        if not args.no_ledger:
            with self._session() as session:
                ledger = LedgerService(session)
                for report in reports:
                    ledger.record_certification(report)
                label = "small" if args.small else args.graphs
                ledger.record_run(RunKind.TABLE1, label, args.seed, {"checks": checks})
        if len(reports) < len(names):
            raise NumericalBreakdown(f"{len(names) - len(reports)} of {len(names)} graphs failed")

    def cmd_history(self, args: Namespace):
        """List recorded runs."""
        with self._session() as session:
            kind = RunKind(args.kind) if args.kind else None
            for run in LedgerService(session).list_runs(kind, limit=args.limit):
                print(
                    f"{run.id:>5}  {run.created_at:%Y-%m-%d %H:%M:%S}  {run.kind.value:<8} "
                    f"{run.label:<28} seed={run.seed}  {json.dumps(run.summary)}"
                )

    #
    # Helpers
    #

    def _generate(self, args: Namespace) -> Instance:
        family = args.family
        if family == "simple-from-psd":
            if args.matrix:
                return simple_from_psd(np.loadtxt(args.matrix, ndmin=2))
            return random_simple_instance(args.n, args.rank, args.seed)
        if family == "maxcut":
            if args.gset:
                return maxcut(parse_gset(args.gset), label=Path(args.gset).stem)
            if args.random:
                n, density = int(args.random[0]), args.random[1]
                return maxcut(random_graph(n, density, args.seed, args.signed))
            raise InvalidInput("maxcut needs --gset PATH or --random N DENSITY")
        if family == "ocut":
            C = gaussian_symmetric(make_rng(args.seed), args.S * args.d)
            return orthogonal_cut(args.S, args.d, C)
        if family == "product":
            if not 1 <= args.groups <= args.n:
                raise InvalidInput(f"groups must lie in 1..{args.n}, got {args.groups}")
            partition = [part.tolist() for part in np.array_split(np.arange(args.n), args.groups)]
            return product_sdp(partition, gaussian_symmetric(make_rng(args.seed), args.n))
        if family == "z2sync":
            return z2_sync(args.n, args.gamma, args.seed)
        if family == "sbm":
            p, q = self._sbm_probabilities(args)
            pair = sbm(args.n, p, q, args.seed)
            return pair.original if args.original else pair.rescaled
        p = args.p if args.p is not None else 1.0
        return mc_lift(mc_generate(args.n, args.n, args.rank, p, args.seed))

    def _sbm_probabilities(self, args: Namespace) -> tuple[float, float]:
        p = args.p if args.p is not None else 0.5
        if args.signal is not None:
            return p, q_for_signal(args.n, p, args.signal)
        if args.q is None:
            raise InvalidInput("sbm needs --q or --signal")
        return p, args.q

    def _certificate_rate(self, args: Namespace):
        if args.family == "z2sync":
            rate = certificate_rate("z2sync", args.n, args.trials, args.seed, args.ray, gamma=args.gamma)
        elif args.family == "sbm":
            p, q = self._sbm_probabilities(args)
            rate = certificate_rate("sbm", args.n, args.trials, args.seed, args.ray, p=p, q=q)
        else:
            raise InvalidInput(f"--trials applies to z2sync and sbm, not {args.family}")
        summary = rate.summary()
        text = json.dumps(summary, indent=2)
        if args.out:
            Path(args.out).write_text(text + "\n")
        print(text)

    def _emit(self, doc: Document, out: str | None):
        """Write a document to a file, or to stdout."""
        if out:
            save_document(doc, out)
        else:
            print(dump_document(doc))

    def _record(
        self, args: Namespace, kind: RunKind, label: str, seed: int | None, summary: dict[str, Any] | None
    ):
        if args.no_ledger:
            return
        with self._session() as session:
            LedgerService(session).record_run(kind, label, seed, summary)

    def _session(self) -> Session:
        create_db_and_tables(self.engine)
        return Session(self.engine)


def main() -> int:
    return SdpCLI().run()


if __name__ == "__main__":
    sys.exit(main())
