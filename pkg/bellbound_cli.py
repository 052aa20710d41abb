#!/usr/bin/env python3
"""
Bellbound CLI - Command-line interface for distances, Bell values and entanglement bounds
"""

import argparse
import json
import logging
import sys
from typing import Dict, Optional, Tuple

from bounds import BoundInputError, chsh_refined_bounds, theorem1_bounds, theorem2_bounds
from divergence import DivergenceInputError, DivergenceKind, distance_to_local, distance_to_region
from inequality import (
    BellFunctional,
    FunctionalFormatError,
    NormalizationUndefinedError,
    alpha_normalizer,
    builtin_functional,
    classical_bound,
    evaluate,
    load_functional,
    normalized_violation,
)
from linear_program import SolverError
from quantum import (
    QuantumInputError,
    behavior_from_quantum,
    bell_state_phi_plus,
    chsh_optimal_assemblage,
    ghz_graph_state,
    ghz_mabk_assemblage,
    load_quantum_setup,
    random_density_matrix,
    random_projective_assemblage,
)
from recipe_registry import RecipeRegistry, SolverSettings, load_solver_settings
from recipe_runner import EXAMPLES, RecipeRunner, build_example
from scenario import (
    Behavior,
    BehaviorStructureError,
    BehaviorValidationError,
    Scenario,
    ScenarioMismatchError,
    VertexCapacityError,
    behavior_to_dict,
    enumerate_vertices,
    is_no_signaling,
    load_behavior,
)


EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_INVALID = 2
EXIT_NORMALIZATION = 3
EXIT_CAPACITY = 4

INVALID_INPUT = (
    BehaviorStructureError,
    BehaviorValidationError,
    DivergenceInputError,
    FunctionalFormatError,
    QuantumInputError,
    ScenarioMismatchError,
    BoundInputError,
    ValueError,
    OSError,
)

logger = logging.getLogger('bellbound.cli')


class StderrHandler(logging.StreamHandler):
    """Stream handler bound to whatever sys.stderr is when a record is emitted."""

    @property
    def stream(self):
        return sys.stderr

    @stream.setter
    def stream(self, value):
        pass


def setup_logging(verbose: bool = False, log_file: Optional[str] = None):
    """Setup logging"""
    handlers = [StderrHandler()]
    if log_file:
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True,
    )


def emit(data: Dict, text: str, as_json: bool):
    if as_json:
        print(json.dumps(data, indent=2, sort_keys=True))
    else:
        print(text)


def resolve_inputs(args) -> Tuple[Optional[Behavior], Optional[BellFunctional]]:
    """Behavior and functional from --example, --behavior and --functional"""
    behavior, functional = None, None
    if args.example:
        behavior, functional = build_example(args.example, args.n)
    if getattr(args, 'behavior', None):
        behavior = load_behavior(args.behavior)
    if getattr(args, 'functional', None):
        if args.functional.endswith('.json'):
            functional = load_functional(args.functional)
        else:
            functional = builtin_functional(args.functional, args.n)
    return behavior, functional


def require(value, what: str):
    if value is None:
        raise ValueError(f"no {what} given; use --example or --{what}")
    return value


def compute_distances(behavior: Behavior, functional: Optional[BellFunctional], settings: SolverSettings,
                      kinds, region: Optional[float]):
    """TV and KL first so the infidelity search can reuse them"""
    results = {}
    order = (DivergenceKind.TV, DivergenceKind.KL_BITS, DivergenceKind.INFIDELITY)
    for kind in sorted(kinds, key=order.index):
        options = dict(tol=settings.tolerance, max_iter=settings.max_iter, lp_tol=settings.lp_tolerance,
                       refactor_every=settings.lp_refactor_every)
        if kind is DivergenceKind.INFIDELITY:
            options.update(tv_floor=results.get(DivergenceKind.TV), warm_start=results.get(DivergenceKind.KL_BITS))
        if region is None:
            results[kind] = distance_to_local(behavior, kind, cap=settings.vertex_cap, **options)
        else:
            results[kind] = distance_to_region(behavior, require(functional, 'functional'), region, kind,
                                               **options)
    return results


def cmd_distance(args, settings: SolverSettings) -> int:
    behavior, functional = resolve_inputs(args)
    behavior = require(behavior, 'behavior')
    kind = DivergenceKind.from_label(args.kind)
    region = args.c_override if args.region else None
    kinds = {kind, DivergenceKind.TV} if kind is DivergenceKind.INFIDELITY else {kind}
    result = compute_distances(behavior, functional, settings, kinds, region)[kind]
    text = '\n'.join([
        f"{kind.name} distance to {result.region}",
        f"  primal          {result.primal:.9f}",
        f"  certified_lower {result.certified_lower:.9f}",
        f"  gap             {result.gap:.3g}",
        f"  iterations      {result.iterations}",
        f"  converged       {result.converged}",
    ])
    emit(result.to_dict(), text, args.json)
    return EXIT_OK


def cmd_bound(args, settings: SolverSettings) -> int:
    behavior, functional = resolve_inputs(args)
    behavior = require(behavior, 'behavior')
    if args.method == 'theorem2':
        report = theorem2_bounds(normalized_violation(require(functional, 'functional'), behavior,
                                                      args.c_override, cap=settings.vertex_cap))
        emit(report.to_dict(), report.render(), args.json)
        return EXIT_OK
    if args.method == 'theorem1':
        region = args.c_override if args.region else None
        results = compute_distances(behavior, functional, settings, set(DivergenceKind), region)
        report = theorem1_bounds(results[DivergenceKind.TV], results[DivergenceKind.KL_BITS],
                                 results[DivergenceKind.INFIDELITY])
        emit(report.to_dict(), report.render(), args.json)
        return EXIT_OK
    if behavior.scenario != Scenario.uniform(2, 2, 2):
        raise ValueError("chsh-refined needs the two-party, two-setting, two-outcome scenario")
    beta = evaluate(require(functional, 'functional'), behavior)
    refined = chsh_refined_bounds(beta)
    data = {'method': 'chsh_refined', 'beta': beta, 'bounds': {m.value: v for m, v in refined.items()}}
    text = '\n'.join([f"beta = {beta:.9f}"] + [f"{m.value:<6} {v:.6f}" for m, v in refined.items()])
    emit(data, text, args.json)
    return EXIT_OK


def cmd_bell_value(args, settings: SolverSettings) -> int:
    behavior, functional = resolve_inputs(args)
    report = normalized_violation(require(functional, 'functional'), require(behavior, 'behavior'),
                                  args.c_override, cap=settings.vertex_cap)
    text = '\n'.join(f"{key:<11} {value}" for key, value in report.to_dict().items())
    emit(report.to_dict(), text, args.json)
    return EXIT_OK


def cmd_classical_bound(args, settings: SolverSettings) -> int:
    _, functional = resolve_inputs(args)
    functional = require(functional, 'functional')
    data = {
        'functional': functional.name,
        'classical_bound': classical_bound(functional, settings.vertex_cap),
        'declared': functional.classical_bound,
        'alpha': alpha_normalizer(functional),
    }
    text = '\n'.join(f"{key:<16} {value}" for key, value in data.items())
    emit(data, text, args.json)
    return EXIT_OK


def cmd_vertices(args, settings: SolverSettings) -> int:
    if args.example or args.functional:
        _, functional = resolve_inputs(args)
        scenario = require(functional, 'functional').scenario
    else:
        scenario = Scenario.uniform(args.parties, args.settings, args.outcomes)
    vertices = enumerate_vertices(scenario, settings.vertex_cap)
    data = {'scenario': scenario.to_dict(), 'count': len(vertices)}
    lines = [f"{len(vertices)} deterministic vertices for {scenario.outcomes}"]
    if args.list:
        data['vertices'] = [[list(party) for party in v.outputs] for v in vertices]
        lines.extend(f"  {k}: {v.outputs}" for k, v in enumerate(vertices))
    emit(data, '\n'.join(lines), args.json)
    return EXIT_OK


def cmd_behavior_from_quantum(args, settings: SolverSettings) -> int:
    if args.setup:
        rho, assemblage = load_quantum_setup(args.setup)
    elif args.random:
        rho = random_density_matrix((2, 2), args.seed)
        assemblage = random_projective_assemblage((2, 2), 2, args.seed + 1)
    elif args.example == 'yu-oh':
        raise ValueError("no quantum realization is built in for the Yu-Oh example; use --setup")
    elif args.example == 'mabk':
        n = args.n or 3
        rho, assemblage = ghz_graph_state(n), ghz_mabk_assemblage(n)
    else:
        rho, assemblage = bell_state_phi_plus(), chsh_optimal_assemblage()
    behavior = behavior_from_quantum(rho, assemblage)
    no_signaling, residual = is_no_signaling(behavior, 1e-8)
    if not no_signaling:
        logger.warning(f"Generated behavior signals (residual {residual:.3g})")
    text = json.dumps(behavior_to_dict(behavior), indent=2, sort_keys=True)
    if args.output:
        with open(args.output, 'w') as f:
            f.write(text + '\n')
        print(f"✓ Behavior written to {args.output}")
    else:
        print(text)
    return EXIT_OK


def cmd_reproduce(args, settings: SolverSettings) -> int:
    registry = RecipeRegistry(args.recipes) if args.recipes else RecipeRegistry()
    report = RecipeRunner(registry, settings).run_all(strict=args.strict, names=args.recipe or None)
    emit(report.to_dict(), report.render(), args.json)
    return EXIT_OK if report.success else EXIT_MISMATCH


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('-v', '--verbose', action='store_true', help='debug logging')
    common.add_argument('--log-file', help='also write logs to this file')
    common.add_argument('--json', action='store_true', help='machine-readable output')
    common.add_argument('--tol', type=float, help='divergence tolerance (default from config)')
    common.add_argument('--seed', type=int, default=0)
    common.add_argument('--config', help='solver defaults JSON')

    inputs = argparse.ArgumentParser(add_help=False)
    inputs.add_argument('--example', choices=EXAMPLES, help='built-in behavior and functional')
    inputs.add_argument('--n', type=int, help='MABK party count or Yu-Oh d')
    inputs.add_argument('--behavior', help='behavior JSON file')
    inputs.add_argument('--functional', help="functional JSON file or one of chsh, mabk, yu-oh")
    inputs.add_argument('--c-override', type=float, help='replace the classical bound c')
    inputs.add_argument('--region', action='store_true',
                        help='measure distances to {beta <= c_override} instead of the local set')

    parser = argparse.ArgumentParser(prog='bellbound_cli.py',
                                     description='Device-independent entanglement bounds from Bell correlations')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('distance', parents=[common, inputs], help='distance to the local polytope')
    p.add_argument('--kind', default='tv', help='tv, kl or if')
    p.set_defaults(handler=cmd_distance)

    p = sub.add_parser('bound', parents=[common, inputs], help='entanglement lower bounds')
    p.add_argument('--method', choices=('theorem1', 'theorem2', 'chsh-refined'), default='theorem2')
    p.set_defaults(handler=cmd_bound)

    p = sub.add_parser('bell-value', parents=[common, inputs], help='Bell value and normalized violation')
    p.set_defaults(handler=cmd_bell_value)

    p = sub.add_parser('classical-bound', parents=[common, inputs], help='classical bound and alpha of a functional')
    p.set_defaults(handler=cmd_classical_bound)

    p = sub.add_parser('vertices', parents=[common, inputs], help='count or list deterministic vertices')
    p.add_argument('--parties', type=int, default=2)
    p.add_argument('--settings', type=int, default=2)
    p.add_argument('--outcomes', type=int, default=2)
    p.add_argument('--list', action='store_true')
    p.set_defaults(handler=cmd_vertices)

    p = sub.add_parser('behavior-from-quantum', parents=[common, inputs], help='behavior of a state and measurements')
    p.add_argument('--setup', help='state and measurement JSON file')
    p.add_argument('--random', action='store_true', help='random two-qubit state and measurements from --seed')
    p.add_argument('--output', help='write the behavior here instead of stdout')
    p.set_defaults(handler=cmd_behavior_from_quantum)

    p = sub.add_parser('reproduce', parents=[common], help='run the golden reproduction recipes')
    p.add_argument('--strict', action='store_true', help='fail on known discrepancies too')
    p.add_argument('--recipes', help='recipes YAML file')
    p.add_argument('--recipe', action='append', help='run only this recipe (repeatable)')
    p.set_defaults(handler=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    """Main CLI entry point"""
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose, args.log_file)
    settings = load_solver_settings(args.config)
    if args.tol is not None:
        if args.tol <= 0:
            print("✗ Error: --tol must be positive", file=sys.stderr)
            return EXIT_INVALID
        settings.tolerance = args.tol
    if getattr(args, 'region', False) and getattr(args, 'c_override', None) is None:
        print("✗ Error: --region needs --c-override", file=sys.stderr)
        return EXIT_INVALID
    if (args.command == 'bound' and args.method == 'theorem1' and args.c_override is not None
            and not args.region):
        print("✗ Error: theorem1 applies --c-override only to region distances; add --region", file=sys.stderr)
        return EXIT_INVALID

    try:
        return args.handler(args, settings)
    except NormalizationUndefinedError as e:
        print(f"✗ Error: {e}", file=sys.stderr)
        return EXIT_NORMALIZATION
    except VertexCapacityError as e:
        print(f"✗ Error: {e}", file=sys.stderr)
        return EXIT_CAPACITY
    except BehaviorValidationError as e:
        print("✗ Error: invalid behavior", file=sys.stderr)
        for violation in e.violations:
            print(f"  {violation}", file=sys.stderr)
        return EXIT_INVALID
    except INVALID_INPUT as e:
        print(f"✗ Error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except SolverError as e:
        print(f"✗ Error: solver failed: {e}", file=sys.stderr)
        return EXIT_MISMATCH


if __name__ == '__main__':
    sys.exit(main())
