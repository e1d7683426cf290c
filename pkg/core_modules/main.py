# main.py
# Command-line entry point for the conditional Galton-Watson heavy-path laboratory

import argparse
import json
import logging
import sys

import pandas as pd

import heavy_decomp
import limits
import mc_harness
from apollonian import edges_to_csv, heavy_simple_path, sample_uniform, verify_simple_path
from errors import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, ConfigurationError, GWLabError, exit_code_for
from exact_oracle import exact_statistic_distribution, verify_identities
from offspring import (WALK_GUARD, expected_zk, from_weights, make_named, parse_weights,
                       walk_pmf, walk_to_csv)
from sampler import ALGORITHM_ID, make_rng, sample_conditional
from tree_core import contour_process, format_gwtree, fringe_counts, height, read_gwtree, write_gwtree

logger = logging.getLogger(__name__)

VERSION = mc_harness.__version__

EPILOGS = {
    'sample': "Exercises: exact conditioning on |T| = n via the cycle lemma (Lukasiewicz path constraint).",
    'heavy': "Exercises: the heavy path, the k-heavy trees and maximal distances to them (rank decomposition of siblings).",
    'fringe': "Exercises: the fringe counts Z_k and their exact means E[Z_k] (Janson's formula).",
    'apollonian': "Exercises: the linear lower bound on the longest simple path of a random Apollonian network.",
    'oracle': "Exercises: the Dwass identity P(|T| = n) = P(S_n = -1)/n and exact laws of tree statistics.",
    'limits': "Exercises: moments of the heavy-path limit k!/(Phi(1/2)...Phi(k/2)), the theta law of the height "
              "and the heavy fragmentation of an excursion.",
    'experiment': "Exercises: the scaling theorems for heavy paths, k-heavy trees, fringe counts and local limits.\n"
                  "Experiments: " + ', '.join(mc_harness.catalog()),
    'walk': "Exercises: the exact law of the left-continuous walk S_m behind the Dwass identity.",
}


def _emit(payload):
    print(json.dumps(mc_harness.to_jsonable(payload), sort_keys=True, indent=2))


def _dist_from_args(args):
    if getattr(args, 'weights', None):
        return from_weights(parse_weights(args.weights))
    return make_named(args.dist)


def _add_dist(parser, default='catalan'):
    group = parser.add_mutually_exclusive_group()
    group.add_argument('--dist', default=default, help="named law: catalan, full_binary, poisson1, apollonian_ternary")
    group.add_argument('--weights', help="comma-separated offspring weights p0,p1,...")


def cmd_sample(args):
    dist = _dist_from_args(args)
    tree = sample_conditional(dist, args.n, make_rng(args.seed), method=args.method)
    if args.out:
        write_gwtree(args.out, tree, dist.name, args.seed, algorithm_id=ALGORITHM_ID)
        _emit({'n': tree.n, 'dist': dist.name, 'height': height(tree), 'out': args.out,
               'master_seed': args.seed, 'algorithm_id': ALGORITHM_ID, 'version': VERSION})
    else:
        sys.stdout.write(format_gwtree(tree, dist.name, args.seed, ALGORITHM_ID))
    return EXIT_OK


def cmd_heavy(args):
    tree, header = read_gwtree(args.input)
    if args.k < 1:
        raise ConfigurationError(f"--k must be at least 1, got {args.k}")
    dec = heavy_decomp.compute(tree)
    report = heavy_decomp.summarize(tree, kmax=args.kmax, patterns=args.pattern, decomposition=dec)
    size, _ = heavy_decomp.k_heavy_size(tree, args.k, dec)
    report.update({'k': args.k, 'k_heavy_size': size, 'source': header, 'version': VERSION})

    if args.contour_out:
        pd.DataFrame({'D': contour_process(tree)}).to_csv(args.contour_out, index=False)
        logger.info("✅ contour written to %s", args.contour_out)
    _emit(report)
    return EXIT_OK


def cmd_fringe(args):
    tree, header = read_gwtree(args.input)
    kmax = min(args.kmax, tree.n)
    z = fringe_counts(tree)
    rows = {str(k): {'Z': int(z[k - 1])} for k in range(1, kmax + 1)}
    try:
        dist = make_named(header['dist'])
    except ConfigurationError:
        dist = None
        logger.warning("⚠️ %s is not a named law; exact E[Z_k] skipped", header['dist'])
    if dist is not None and tree.n <= WALK_GUARD:
        for k in range(1, kmax + 1):
            moments = expected_zk(dist, tree.n, k)
            rows[str(k)].update({'mean': moments.mean, 'second_factorial_moment': moments.second_factorial_moment})
    _emit({'n': tree.n, 'source': header, 'fringe': rows, 'version': VERSION})
    return EXIT_OK


def cmd_apollonian(args):
    net = sample_uniform(args.m, make_rng(args.seed))
    path = heavy_simple_path(net)
    verified = verify_simple_path(net, path)

    if args.emit_edges:
        text = edges_to_csv(net, None if args.emit_edges == '-' else args.emit_edges)
        if args.emit_edges == '-':
            sys.stdout.write(text)
    if args.emit_path:
        line = ' '.join(map(str, path.vertices)) + "\n"
        if args.emit_path == '-':
            sys.stdout.write(line)
        else:
            with open(args.emit_path, 'w') as f:
                f.write(line)
    if '-' not in (args.emit_edges, args.emit_path):
        _emit({'m': net.m, 'vertices': net.num_vertices, 'edges': int(net.edges.shape[0]),
               'path_vertices': len(path.vertices), 'selected_internal': path.selected_internal,
               'verified': verified, 'master_seed': args.seed, 'algorithm_id': ALGORITHM_ID,
               'version': VERSION})
    return EXIT_OK


def cmd_oracle(args):
    dist = _dist_from_args(args)
    if args.verify is not None:
        report = verify_identities(dist, args.verify)
        payload = report.as_dict()
        payload['version'] = VERSION
        _emit(payload)
        return EXIT_OK if report.passed else EXIT_FAILURE
    if args.n is None or args.stat is None:
        raise ConfigurationError("oracle needs --n and --stat (or --verify NMAX)")
    law = exact_statistic_distribution(dist, args.n, args.stat)
    if args.out:
        law.to_csv(args.out)
    else:
        sys.stdout.write(law.to_csv())
    return EXIT_OK


def cmd_limits(args):
    if args.what == 'phi':
        _emit({'q': args.q, 'phi': limits.phi(args.q), 'phi_closed_form': limits.phi_hypergeometric(args.q),
               'version': VERSION})
    elif args.what == 'moment':
        print(f"{limits.t_infinity_moment(args.k):.10g}")
    elif args.what == 'theta':
        print(f"{limits.theta_cdf(args.x):.10g}")
    else:
        frame = pd.read_csv(args.input)
        values = frame['D'] if 'D' in frame else frame.iloc[:, 0]
        trace = limits.heavy_fragmentation(values.to_numpy(dtype=float), args.step)
        _emit({'levels': trace.levels, 'measures': trace.measures, 't_infinity': trace.t_infinity,
               'version': VERSION})
    return EXIT_OK


def cmd_experiment(args):
    overrides = mc_harness.load_config(args.config) if args.config else {}
    flags = {
        'dist': parse_weights(args.weights) if args.weights else args.dist,
        'sizes': args.sizes,
        'replications': args.reps,
        'workers': args.workers,
    }
    if args.k is not None:
        flags['params'] = {'k': args.k}
    for key, value in flags.items():
        if value is None:
            continue
        if key == 'params':
            overrides.setdefault('params', {}).update(value)
        else:
            overrides[key] = value

    config = mc_harness.make_config(args.name, args.seed, overrides)
    summary = mc_harness.run(config)
    text = summary.to_json()
    if args.out:
        with open(args.out, 'w') as f:
            f.write(text + "\n")
        logger.info("✅ summary written to %s", args.out)
    else:
        print(text)
    if args.raw:
        summary.write_raw(args.raw)
    return EXIT_OK


def cmd_walk(args):
    dist = _dist_from_args(args)
    walk = walk_pmf(dist, args.m)
    if args.out:
        walk_to_csv(walk, args.out)
    else:
        sys.stdout.write(walk_to_csv(walk))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog='gwheavy',
        description="Conditional Galton-Watson trees: samplers, heavy paths, Apollonian paths and limit laws")
    parser.add_argument('--verbose', action='store_true', help="debug logging on stderr")
    parser.add_argument('--version', action='version', version=f"gwheavy {VERSION}")
    sub = parser.add_subparsers(dest='command', required=True)

    def add(name, help_text):
        return sub.add_parser(name, help=help_text, description=help_text, epilog=EPILOGS[name],
                              formatter_class=argparse.RawDescriptionHelpFormatter)

    p = add('sample', "sample a conditional GW tree of size n")
    _add_dist(p)
    p.add_argument('--n', type=int, required=True)
    p.add_argument('--seed', type=int, required=True)
    p.add_argument('--method', choices=['auto', 'rejection', 'multiset'], default='auto')
    p.add_argument('--out', help="write a gwtree v1 file instead of printing it")
    p.set_defaults(handler=cmd_sample)

    p = add('heavy', "heavy-path statistics of a stored tree")
    p.add_argument('--in', dest='input', required=True)
    p.add_argument('--k', type=int, default=2)
    p.add_argument('--kmax', type=int, default=4)
    p.add_argument('--pattern', action='append', help="heavy_path, binary_blocks:K, blocks_then_big:K:J, all_ge2")
    p.add_argument('--report', choices=['json'], default='json')
    p.add_argument('--contour-out', help="also write the contour process as CSV (column D)")
    p.set_defaults(handler=cmd_heavy)

    p = add('fringe', "fringe counts Z_k of a stored tree")
    p.add_argument('--in', dest='input', required=True)
    p.add_argument('--kmax', type=int, default=10)
    p.set_defaults(handler=cmd_fringe)

    p = add('apollonian', "random Apollonian network and a long simple path")
    p.add_argument('--m', type=int, required=True)
    p.add_argument('--seed', type=int, required=True)
    p.add_argument('--emit-path', nargs='?', const='-', help="write the path (default: stdout)")
    p.add_argument('--emit-edges', nargs='?', const='-', help="write the edge CSV (default: stdout)")
    p.set_defaults(handler=cmd_apollonian)

    p = add('oracle', "exact laws by enumeration (n <= 16)")
    _add_dist(p)
    p.add_argument('--n', type=int)
    p.add_argument('--stat', help="heavy_path_length, two_heavy_size, height, z_k:K, max_distance_k:K, "
                                  "n_k_root:K, pattern:P")
    p.add_argument('--out', help="CSV file (default: stdout)")
    p.add_argument('--verify', type=int, metavar='NMAX', help="check the exact identities up to NMAX")
    p.set_defaults(handler=cmd_oracle)

    p = add('limits', "limit-law numerics")
    what = p.add_subparsers(dest='what', required=True)
    q = what.add_parser('phi', epilog=EPILOGS['limits'])
    q.add_argument('--q', type=float, required=True)
    q = what.add_parser('moment', epilog=EPILOGS['limits'])
    q.add_argument('--k', type=int, required=True)
    q = what.add_parser('theta', epilog=EPILOGS['limits'])
    q.add_argument('--x', type=float, required=True)
    q = what.add_parser('frag', epilog=EPILOGS['limits'])
    q.add_argument('--in', dest='input', required=True, help="CSV with a column D")
    q.add_argument('--step', type=float, default=1.0)
    p.set_defaults(handler=cmd_limits)

    p = add('experiment', "run a named Monte Carlo experiment")
    p.add_argument('name', choices=mc_harness.catalog())
    p.add_argument('--seed', type=int, required=True)
    p.add_argument('--config', help="JSON overrides")
    p.add_argument('--dist')
    p.add_argument('--weights')
    p.add_argument('--sizes', type=int, nargs='+')
    p.add_argument('--reps', type=int)
    p.add_argument('--k', type=int)
    p.add_argument('--workers', type=int)
    p.add_argument('--out', help="JSON file (default: stdout)")
    p.add_argument('--raw', help="CSV of per-replication values")
    p.set_defaults(handler=cmd_experiment)

    p = add('walk', "exact law of S_m as CSV")
    _add_dist(p)
    p.add_argument('--m', type=int, required=True)
    p.add_argument('--out')
    p.set_defaults(handler=cmd_walk)
    return parser


def dispatch(args):
    """Run a parsed invocation and map failures to exit codes"""
    try:
        return args.handler(args)
    except GWLabError as exc:
        logger.error("❌ %s", exc)
        return exit_code_for(exc)
    except OSError as exc:
        logger.error("❌ %s", exc)
        return EXIT_USAGE
    except Exception as exc:
        logger.exception("❌ unexpected failure: %s", exc)
        return exit_code_for(exc)


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else (logging.INFO if args.command == 'experiment' else logging.WARNING)
    logging.basicConfig(level=level, format='%(message)s', stream=sys.stderr, force=True)
    return dispatch(args)


if __name__ == "__main__":
    sys.exit(main())
