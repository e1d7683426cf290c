# mc_harness.py
# Seeded, parallel Monte Carlo engine and the catalog of named experiments

import copy
import json
import logging
import math
import os
from collections import namedtuple
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
import psutil
from scipy import stats

import heavy_decomp
from apollonian import heavy_simple_path, sample_uniform, verify_simple_path
from errors import ConfigurationError, DomainError, invariant
from limits import (fit_power_law, heavy_path_moment_limit, root_order_statistic_limit,
                    theta_cdf)
from offspring import (WALK_GUARD, expected_zk, from_weights, gw_total_size_pmf, make_named,
                       require_size, size_biased, size_tail, size_tail_asymptotic)
from sampler import ALGORITHM_ID, make_rng, sample_conditional, substream_seed, unconditional_size, Overflow
from tree_core import fringe_counts, height, subtree_order_stats

logger = logging.getLogger(__name__)

__version__ = '0.3.0'

THREADS_ENV = 'GWHEAVY_THREADS'
SEED_RULE = 'substream_seed(substream_seed(master_seed, n), replication)'

DEFAULT_RUN_CONFIG = {
    'workers': None,
    'chunk_size': None,
    'sanity_checks': True,
    'quantiles': [0.05, 0.25, 0.5, 0.75, 0.95],
}

# Every verdict tolerance is a pilot-calibrated value and lives here.
EXPERIMENT_DEFAULTS = {
    'heavy_path_moments': {
        'dist': 'full_binary',
        'sizes': [1001, 10001, 100001, 1000001],
        'replications': [10000, 10000, 2000, 400],
        'params': {'moments': 3},
        'tolerances': {'first_moment_abs': 0.15, 'second_moment_rel': 0.15, 'monotone_se': 2.0},
    },
    'two_heavy_fraction': {
        'dist': 'apollonian_ternary',
        'sizes': [300001],
        'replications': 200,
        'params': {},
        'tolerances': {'floor': 0.10, 'ceiling': 0.67, 'max_sd': 0.02},
    },
    # needs degrees above k: with max degree <= k every node is k-heavy
    'distance_scaling': {
        'dist': 'apollonian_ternary',
        'sizes': [1000, 10000, 100000, 1000000],
        'replications': 500,
        'params': {'k': 2},
        'tolerances': {'slope_band': {'1': [0.44, 0.56], '2': [0.28, 0.39], '3': [0.19, 0.31]}},
    },
    'nk_max_scaling': {
        'dist': 'apollonian_ternary',
        'sizes': [1000, 10000, 100000, 1000000],
        'replications': 500,
        'params': {'k': 3},
        'tolerances': {'slope_band': {'3': [0.58, 0.76]}},
    },
    'nk_root_tail': {
        'dist': 'catalan',
        'sizes': [100000],
        'replications': 100000,
        'params': {'k': 2, 'thresholds': [100, 178, 316, 562, 1000, 1778, 3162, 5623, 10000]},
        'tolerances': {'slope_band': {'2': [-0.65, -0.35]}},
    },
    'zk_concentration': {
        'dist': 'catalan',
        'sizes': [1000, 10000, 100000],
        'replications': 200,
        'params': {'ks': [1, 2, 3, 4, 5]},
        'tolerances': {'max_deviation': 0.05, 'max_sd': 0.05},
    },
    'pattern_growth': {
        'dist': 'catalan',
        'sizes': [1000, 10000, 100000, 1000000],
        'replications': 200,
        # binary_blocks:k grows like sqrt(n) log^k n; its fit divides the log factor out
        'params': {'patterns': ['heavy_path', 'binary_blocks:1'], 'log_powers': {'binary_blocks:1': 1}},
        'tolerances': {'slope_band': {'heavy_path': [0.44, 0.56], 'binary_blocks:1': [0.48, 0.64]}},
    },
    'height_theta': {
        'dist': 'full_binary',
        'sizes': [100001],
        'replications': 10000,
        'params': {'tail_points': [0.5, 1.0, 2.0, 3.0, 4.0]},
        'tolerances': {'ks_max': 0.05},
    },
    'apollonian_path': {
        'dist': 'apollonian_ternary',
        'sizes': [100, 1000, 10000, 100000],
        'replications': 50,
        'params': {},
        'tolerances': {'min_ratio': 0.05},
    },
    'local_limit': {
        'dist': 'catalan',
        'sizes': [10000],
        'replications': 10000,
        'params': {'smax': 200},
        'tolerances': {'root_degree_tv': 0.05, 'mean_abs': 0.05, 'order_stat_tv': 0.05},
    },
    'size_tail': {
        'dist': 'catalan',
        'sizes': [1000000],
        'replications': 100000,
        'params': {'thresholds': [1000, 3162, 10000, 31623, 100000], 'exact_max': 10000},
        'tolerances': {'ratio_abs': 0.15},
    },
}


@dataclass
class ExperimentConfig:
    experiment: str
    dist: object
    sizes: list
    replications: object
    master_seed: int
    params: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    workers: int = None

    def replications_for(self):
        reps = self.replications
        if isinstance(reps, (list, tuple)):
            if len(reps) != len(self.sizes):
                raise ConfigurationError(f"{len(reps)} replication counts for {len(self.sizes)} sizes")
            return [int(r) for r in reps]
        return [int(reps)] * len(self.sizes)


@dataclass
class McSummary:
    experiment: str
    dist: dict
    params: dict
    master_seed: int
    per_n: list
    fits: dict
    verdicts: dict
    tolerances: dict
    raw: pd.DataFrame = field(repr=False, default=None)

    @property
    def status(self):
        """'fail' if any verdict failed, 'inconclusive' if any could not be decided, else 'pass'"""
        outcomes = [v.get('pass') for v in self.verdicts.values()]
        if any(o is False for o in outcomes):
            return 'fail'
        if not outcomes or any(o is not True for o in outcomes):
            return 'inconclusive'
        return 'pass'

    @property
    def passed(self):
        return self.status == 'pass'

    def as_dict(self):
        return {
            'experiment': self.experiment,
            'version': __version__,
            'algorithm_id': ALGORITHM_ID,
            'master_seed': self.master_seed,
            'seed': self.master_seed,
            'seed_rule': SEED_RULE,
            'dist': self.dist,
            'params': self.params,
            'per_n': self.per_n,
            'fits': self.fits,
            'verdicts': self.verdicts,
            'status': self.status,
            'tolerances': self.tolerances,
            'calibration': 'tolerances are pilot-calibrated; convergence rates are not known',
        }

    def to_json(self):
        return json.dumps(to_jsonable(self.as_dict()), sort_keys=True, indent=2)

    def write_raw(self, path):
        self.raw.to_csv(path, index=False)
        logger.info("✅ %d raw replications written to %s", len(self.raw), path)
        return path


Experiment = namedtuple('Experiment', ['measure', 'primary', 'finalize', 'prepare', 'validate'])


def to_jsonable(value):
    """Recursively convert numpy scalars/arrays to JSON-friendly values"""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return None if math.isnan(value) or math.isinf(value) else value
    return value


def _band(value, low, high):
    return {'value': value, 'band': [low, high], 'pass': bool(low <= value <= high)}


def resolve_dist(spec):
    """A distribution name or a list of weights"""
    if isinstance(spec, str):
        return make_named(spec)
    if isinstance(spec, (list, tuple)):
        return from_weights(spec)
    raise ConfigurationError(f"dist must be a name or a list of weights, got {spec!r}")


def resolve_workers(requested=None):
    """GWHEAVY_THREADS, then the requested count, then physical cores"""
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            workers = int(env)
        except ValueError:
            raise ConfigurationError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    elif requested:
        workers = int(requested)
    else:
        workers = psutil.cpu_count(logical=False) or 1
    if workers < 1:
        raise ConfigurationError(f"worker count must be at least 1, got {workers}")
    return workers


def load_config(path):
    """JSON overrides for one experiment"""
    try:
        with open(path) as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigurationError(f"config {path} must hold a JSON object")
    return data


def make_config(name, master_seed, overrides=None):
    """EXPERIMENT_DEFAULTS[name] updated with overrides (file values, then flags)"""
    if name not in EXPERIMENT_DEFAULTS:
        raise ConfigurationError(f"unknown experiment {name!r}; choose one of {', '.join(sorted(EXPERIMENT_DEFAULTS))}")
    merged = copy.deepcopy(EXPERIMENT_DEFAULTS[name])
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key in ('params', 'tolerances'):
            merged[key].update(value)
        elif key in ('dist', 'sizes', 'replications', 'workers'):
            merged[key] = value
        else:
            raise ConfigurationError(f"unknown config key {key!r}")
    return ExperimentConfig(
        experiment=name,
        dist=merged['dist'],
        sizes=[int(n) for n in merged['sizes']],
        replications=merged['replications'],
        master_seed=int(master_seed),
        params=merged['params'],
        tolerances=merged['tolerances'],
        workers=merged.get('workers'),
    )


def _check_sanity(values, n):
    """Cheap per-replication bug traps"""
    if 'L' in values and 'H' in values:
        invariant(values['L'] <= values['H'], f"L={values['L']} exceeds H={values['H']} (n={n})")
    if 'B' in values:
        invariant(values['B'] <= n, f"B={values['B']} exceeds n={n}")
    if 'maxdist' in values and 'H' in values:
        invariant(values['maxdist'] <= values['H'], f"maxdist={values['maxdist']} exceeds H={values['H']}")


def _replicate(task):
    name, dist, n, seed, params, sanity = task
    values = CATALOG[name].measure(dist, n, make_rng(seed), params)
    if sanity:
        _check_sanity(values, n)
    return values


# --- measures: one replication each ---

def _measure_heavy_path(dist, n, rng, params):
    tree = sample_conditional(dist, n, rng)
    length = heavy_decomp.heavy_path(tree).length
    scaled = length / math.sqrt(n)
    values = {'L': length, 'H': height(tree), 'L_scaled': scaled}
    for j in range(2, int(params.get('moments', 3)) + 1):
        values[f'L_scaled_pow{j}'] = scaled ** j
    return values


def _measure_two_heavy(dist, n, rng, params):
    tree = sample_conditional(dist, n, rng)
    dec = heavy_decomp.compute(tree)
    b, _ = heavy_decomp.k_heavy_size(tree, 2, dec)
    return {'B': b, 'B_fraction': b / n, 'L': heavy_decomp.heavy_path(tree, dec).length, 'H': height(tree)}


def _measure_distance(dist, n, rng, params):
    tree = sample_conditional(dist, n, rng)
    dec = heavy_decomp.compute(tree)
    return {
        'maxdist': heavy_decomp.max_distance_to_k_heavy(tree, int(params['k']), dec),
        'B': heavy_decomp.k_heavy_size(tree, 2, dec)[0],
        'H': height(tree),
    }


def _measure_nk_max(dist, n, rng, params):
    tree = sample_conditional(dist, n, rng)
    max_nk, max_nk_plus = heavy_decomp.max_kth_subtree(tree, int(params['k']))
    return {'max_nk': max_nk, 'max_nk_plus': max_nk_plus}


def _root_stat(tree, k):
    sizes = subtree_order_stats(tree, 0)
    return sizes[k - 1] if len(sizes) >= k else 0


def _measure_nk_root(dist, n, rng, params):
    tree = sample_conditional(dist, n, rng)
    return {'N_k_root': _root_stat(tree, int(params['k']))}


def _measure_zk(dist, n, rng, params):
    tree = sample_conditional(dist, n, rng)
    z = fringe_counts(tree)
    return {f'Z_{k}_ratio': float(z[k - 1]) / params['expected'][str(k)] for k in params['ks_valid']}


def _measure_patterns(dist, n, rng, params):
    tree = sample_conditional(dist, n, rng)
    dec = heavy_decomp.compute(tree)
    values = {p: heavy_decomp.pattern_count(tree, dec, p) for p in params['patterns']}
    values['H'] = height(tree)
    if 'heavy_path' in values:
        values['L'] = values['heavy_path'] - 1
    return values


def _measure_height(dist, n, rng, params):
    tree = sample_conditional(dist, n, rng)
    h = height(tree)
    return {'H': h, 'H_scaled': dist.sigma * h / math.sqrt(2.0 * n), 'H_over_sqrt_n': h / math.sqrt(n)}


def _measure_apollonian(dist, m, rng, params):
    net = sample_uniform(m, rng)
    path = heavy_simple_path(net)
    return {
        'vertices': len(path.vertices),
        'selected_internal': path.selected_internal,
        'ratio': len(path.vertices) / m,
        'verified': float(verify_simple_path(net, path)),
    }


def _measure_local(dist, n, rng, params):
    tree = sample_conditional(dist, n, rng)
    sizes = subtree_order_stats(tree, 0)
    return {
        'root_degree': int(tree.degrees[0]),
        'N2_root': sizes[1] if len(sizes) > 1 else 0,
        'N3_root': sizes[2] if len(sizes) > 2 else 0,
    }


def _measure_size(dist, cap, rng, params):
    size = unconditional_size(dist, rng, cap)
    overflow = isinstance(size, Overflow)
    return {'size': cap if overflow else size, 'overflow': float(overflow)}


# --- per-size preparation and validation ---

def _no_prepare(dist, n, params):
    return params


def _prepare_zk(dist, n, params):
    prepared = dict(params)
    valid = [k for k in params['ks'] if k <= n and gw_total_size_pmf(dist, k) > 0]
    expected = {}
    for k in valid:
        if n <= WALK_GUARD:
            expected[str(k)] = expected_zk(dist, n, k).mean
        else:
            # fringe limit n P(|T| = k)
            expected[str(k)] = n * gw_total_size_pmf(dist, k)
    prepared['ks_valid'] = valid
    prepared['expected'] = expected
    return prepared


def _prepare_patterns(dist, n, params):
    for p in params['patterns']:
        heavy_decomp.parse_pattern(p)
    return params


def _validate_tree_size(dist, n, params):
    require_size(dist, n)


def _validate_distance(dist, n, params):
    require_size(dist, n)
    k = int(params['k'])
    if k < 1:
        raise ConfigurationError(f"distance_scaling needs k >= 1, got {k}")
    # ranks never exceed the largest degree, so the k-heavy tree would be the whole tree
    largest = int(dist.support[-1])
    if largest <= k:
        raise ConfigurationError(
            f"distance_scaling with k={k} needs offspring degrees above {k}; {dist.name} stops at {largest} "
            f"and maxdist would be identically 0")


def _validate_subdivisions(dist, m, params):
    if m < 1:
        raise DomainError(f"apollonian_path needs m >= 1 subdivisions, got {m}")


def _validate_cap(dist, cap, params):
    if cap < max(params['thresholds']):
        raise DomainError(f"cap {cap} is below the largest threshold {max(params['thresholds'])}")


# --- finalisers: fits and verdicts from the aggregated replications ---

def _column_means(frame, column):
    return frame.groupby('n', sort=False)[column].mean()


def _slope_fit(sizes, means):
    points = [(n, y) for n, y in zip(sizes, means) if y > 0]
    if len(points) < 3:
        return None
    return fit_power_law(points)


def _slope_verdict(fit, bands, key):
    if fit is None:
        return {'pass': None, 'reason': 'fewer than 3 positive points'}
    band = bands.get(str(key))
    if band is None:
        return {'value': fit.slope, 'pass': None, 'reason': f'no band configured for {key}'}
    return _band(fit.slope, *band)


def _finalize_heavy_path(frame, per_n, dist, params, tol):
    moments = int(params.get('moments', 3))
    columns = ['L_scaled'] + [f'L_scaled_pow{j}' for j in range(2, moments + 1)]
    targets = {str(j): heavy_path_moment_limit(dist, j) for j in range(1, moments + 1)}
    for entry in per_n:
        group = frame[frame['n'] == entry['n']]
        entry['extras']['moments'] = {str(j): float(group[c].mean()) for j, c in enumerate(columns, start=1)}

    last = per_n[-1]['extras']['moments']
    first_gap = abs(last['1'] - targets['1'])
    verdicts = {
        'first_moment': {'value': last['1'], 'target': targets['1'],
                         'tolerance': tol['first_moment_abs'], 'pass': bool(first_gap <= tol['first_moment_abs'])},
    }
    if moments >= 2:
        rel = abs(last['2'] / targets['2'] - 1.0)
        verdicts['second_moment'] = {'value': last['2'], 'target': targets['2'],
                                     'tolerance': tol['second_moment_rel'], 'pass': bool(rel <= tol['second_moment_rel'])}

    monotone = True
    for before, after in zip(per_n, per_n[1:]):
        slack = tol['monotone_se'] * math.hypot(before['stderr'], after['stderr'])
        monotone &= after['mean'] >= before['mean'] - slack
    verdicts['monotone_in_n'] = {'pass': bool(monotone)}
    return {'targets': targets}, verdicts


def _finalize_two_heavy(frame, per_n, dist, params, tol):
    # nodes of rank >= 3 are at least sum_{i >= 3} (i - 2) p_i n in expectation
    bound = 1.0 - sum((i - 2) * p for i, p in enumerate(dist.probs) if i >= 3)
    last = per_n[-1]
    sd = float(frame[frame['n'] == last['n']]['B_fraction'].std(ddof=1)) if last['count'] > 1 else 0.0
    verdicts = {
        'floor': {'value': last['mean'], 'floor': tol['floor'], 'pass': bool(last['mean'] >= tol['floor'])},
        'ceiling': {'value': last['mean'], 'ceiling': tol['ceiling'], 'analytic_bound': bound,
                    'pass': bool(last['mean'] <= tol['ceiling'])},
        'spread': {'value': sd, 'max_sd': tol['max_sd'], 'pass': bool(sd <= tol['max_sd'])},
    }
    return {'upper_bound': bound}, verdicts


def _finalize_distance(frame, per_n, dist, params, tol):
    k = int(params['k'])
    fit = _slope_fit([e['n'] for e in per_n], [e['mean'] for e in per_n])
    fits = {'maxdist': fit.as_dict() if fit else None, 'target_slope': 1.0 / (k + 1)}
    return fits, {'slope': _slope_verdict(fit, tol['slope_band'], k)}


def _finalize_nk_max(frame, per_n, dist, params, tol):
    k = int(params['k'])
    sizes = [e['n'] for e in per_n]
    fit = _slope_fit(sizes, [e['mean'] for e in per_n])
    plus = _slope_fit(sizes, list(_column_means(frame, 'max_nk_plus')))
    fits = {'max_nk': fit.as_dict() if fit else None,
            'max_nk_plus': plus.as_dict() if plus else None,
            'target_slope': 2.0 / k}
    return fits, {'slope': _slope_verdict(fit, tol['slope_band'], k)}


def _finalize_nk_root(frame, per_n, dist, params, tol):
    k = int(params['k'])
    thresholds = sorted(int(t) for t in params['thresholds'])
    last = frame[frame['n'] == per_n[-1]['n']]['N_k_root'].to_numpy()
    tail = {str(t): float(np.mean(last >= t)) for t in thresholds}
    per_n[-1]['extras']['tail'] = tail
    points = [(t, tail[str(t)]) for t in thresholds if tail[str(t)] > 0]
    fit = fit_power_law(points) if len(points) >= 3 else None
    fits = {'tail': fit.as_dict() if fit else None, 'target_slope': (1.0 - k) / 2.0}
    return fits, {'slope': _slope_verdict(fit, tol['slope_band'], k)}


def _finalize_zk(frame, per_n, dist, params, tol):
    deviation, spreads = 0.0, []
    for entry in per_n:
        group = frame[frame['n'] == entry['n']]
        columns = [c for c in group.columns if c.endswith('_ratio')]
        ratios = {c.split('_')[1]: float(group[c].mean()) for c in columns}
        sds = {c.split('_')[1]: float(group[c].std(ddof=1)) if len(group) > 1 else 0.0 for c in columns}
        entry['extras']['ratio_means'] = ratios
        entry['extras']['ratio_sd'] = sds
        spreads.append(sds)
        if entry is per_n[-1] and ratios:
            deviation = max(abs(r - 1.0) for r in ratios.values())

    # Z_k / E[Z_k] -> 1 in probability: the spread must shrink with n and end small
    last_sd = max(spreads[-1].values(), default=0.0)
    shrinking = all(after[k] <= before[k]
                    for before, after in zip(spreads, spreads[1:]) for k in after if k in before)
    verdicts = {
        'mean': {'value': deviation, 'max_deviation': tol['max_deviation'],
                 'pass': bool(deviation <= tol['max_deviation'])},
        'spread': {'value': last_sd, 'max_sd': tol['max_sd'], 'pass': bool(last_sd <= tol['max_sd'])},
        'spread_shrinks': {'pass': bool(shrinking)},
    }
    return {}, verdicts


def _finalize_patterns(frame, per_n, dist, params, tol):
    sizes = [e['n'] for e in per_n]
    log_powers = params.get('log_powers') or {}
    fits, verdicts = {}, {}
    for p in params['patterns']:
        label = heavy_decomp.parse_pattern(p).label
        means = list(_column_means(frame, p))
        power = float(log_powers.get(label, 0))
        corrected = [m / math.log(n) ** power for n, m in zip(sizes, means)]
        fit = _slope_fit(sizes, corrected)
        raw = _slope_fit(sizes, means) if power else fit
        fits[label] = {
            'fit': fit.as_dict() if fit else None,
            'log_power': power,
            'raw_slope': raw.slope if raw else None,
        }
        verdicts[label] = _slope_verdict(fit, tol['slope_band'], label)
    return fits, verdicts


def _finalize_height(frame, per_n, dist, params, tol):
    verdicts = {}
    for entry in per_n:
        group = frame[frame['n'] == entry['n']]
        scaled = group['H_scaled'].to_numpy()
        ks = stats.kstest(scaled[scaled > 0], theta_cdf)
        entry['extras']['ks'] = float(ks.statistic)
        tail = group['H_over_sqrt_n'].to_numpy()
        entry['extras']['height_tail'] = {str(x): float(np.mean(tail >= x)) for x in params['tail_points']}
    last = per_n[-1]['extras']['ks']
    verdicts['ks'] = {'value': last, 'max': tol['ks_max'], 'pass': bool(last <= tol['ks_max'])}
    return {}, verdicts


def _finalize_apollonian(frame, per_n, dist, params, tol):
    sizes = [e['n'] for e in per_n]
    fit = _slope_fit(sizes, list(_column_means(frame, 'vertices')))
    last = frame[frame['n'] == sizes[-1]]
    min_ratio = float(last['ratio'].min())
    identity = bool((frame['vertices'] == frame['selected_internal'] + 2).all())
    verdicts = {
        'all_verified': {'pass': bool((frame['verified'] == 1.0).all())},
        'vertex_identity': {'pass': identity},
        'min_ratio': {'value': min_ratio, 'floor': tol['min_ratio'], 'pass': bool(min_ratio >= tol['min_ratio'])},
    }
    return {'vertices': fit.as_dict() if fit else None}, verdicts


def _tv_with_tail(values, pmf, tail):
    """Total variation on 0..len(pmf)-1 plus one bucket for larger values"""
    counts = np.bincount(np.minimum(values, pmf.size), minlength=pmf.size + 1) / values.size
    return 0.5 * (np.abs(counts[:-1] - pmf).sum() + abs(counts[-1] - tail))


def _finalize_local(frame, per_n, dist, params, tol):
    biased = size_biased(dist)
    last = frame[frame['n'] == per_n[-1]['n']]
    degrees = last['root_degree'].to_numpy()
    degree_tv = _tv_with_tail(degrees, biased, 0.0)
    mean_gap = abs(float(degrees.mean()) - (1.0 + dist.sigma2))

    smax = int(params['smax'])
    order_tv = {}
    for i, column in ((2, 'N2_root'), (3, 'N3_root')):
        limit = root_order_statistic_limit(dist, i, smax)
        order_tv[str(i)] = float(_tv_with_tail(last[column].to_numpy().astype(np.int64), limit.pmf, limit.tail))

    verdicts = {
        'root_degree_tv': {'value': float(degree_tv), 'max': tol['root_degree_tv'],
                           'pass': bool(degree_tv <= tol['root_degree_tv'])},
        'root_degree_mean': {'value': float(degrees.mean()), 'target': 1.0 + dist.sigma2,
                             'pass': bool(mean_gap <= tol['mean_abs'])},
        'order_stat_tv': {'value': order_tv, 'max': tol['order_stat_tv'],
                          'pass': bool(max(order_tv.values()) <= tol['order_stat_tv'])},
    }
    return {}, verdicts


def _finalize_size_tail(frame, per_n, dist, params, tol):
    sizes = frame['size'].to_numpy()
    level = 2.0 * dist.alpha / dist.span
    rows = {}
    worst = 0.0
    for t in sorted(int(t) for t in params['thresholds']):
        freq = float(np.mean(sizes >= t))
        scaled = freq * math.sqrt(t)
        row = {'frequency': freq, 'scaled': scaled, 'asymptotic': size_tail_asymptotic(dist, t)}
        if t <= int(params.get('exact_max', 0)):
            row['exact'] = size_tail(dist, t)
        rows[str(t)] = row
        worst = max(worst, abs(scaled / level - 1.0))
    per_n[-1]['extras']['tail'] = rows

    points = [(int(t), r['frequency']) for t, r in rows.items() if r['frequency'] > 0]
    fit = fit_power_law(points) if len(points) >= 3 else None
    verdicts = {'tail_level': {'value': worst, 'max': tol['ratio_abs'], 'target': level,
                               'pass': bool(worst <= tol['ratio_abs'])}}
    return {'tail': fit.as_dict() if fit else None, 'target_slope': -0.5}, verdicts


CATALOG = {
    'heavy_path_moments': Experiment(_measure_heavy_path, 'L_scaled', _finalize_heavy_path, _no_prepare, _validate_tree_size),
    'two_heavy_fraction': Experiment(_measure_two_heavy, 'B_fraction', _finalize_two_heavy, _no_prepare, _validate_tree_size),
    'distance_scaling': Experiment(_measure_distance, 'maxdist', _finalize_distance, _no_prepare, _validate_distance),
    'nk_max_scaling': Experiment(_measure_nk_max, 'max_nk', _finalize_nk_max, _no_prepare, _validate_tree_size),
    'nk_root_tail': Experiment(_measure_nk_root, 'N_k_root', _finalize_nk_root, _no_prepare, _validate_tree_size),
    'zk_concentration': Experiment(_measure_zk, None, _finalize_zk, _prepare_zk, _validate_tree_size),
    'pattern_growth': Experiment(_measure_patterns, 'heavy_path', _finalize_patterns, _prepare_patterns, _validate_tree_size),
    'height_theta': Experiment(_measure_height, 'H_scaled', _finalize_height, _no_prepare, _validate_tree_size),
    'apollonian_path': Experiment(_measure_apollonian, 'ratio', _finalize_apollonian, _no_prepare, _validate_subdivisions),
    'local_limit': Experiment(_measure_local, 'root_degree', _finalize_local, _no_prepare, _validate_tree_size),
    'size_tail': Experiment(_measure_size, 'size', _finalize_size_tail, _no_prepare, _validate_cap),
}


def catalog():
    """Names of the available experiments"""
    return sorted(CATALOG)


def _summarize_sizes(frame, primary, quantiles):
    per_n = []
    for n, group in frame.groupby('n', sort=False):
        column = primary if primary is not None else next(c for c in group.columns if c.endswith('_ratio'))
        x = group[column].astype(float)
        count = int(x.size)
        stderr = float(x.std(ddof=1) / math.sqrt(count)) if count > 1 else 0.0
        others = [c for c in group.columns if c not in ('n', 'replication', 'seed', column)]
        per_n.append({
            'n': int(n),
            'count': count,
            'statistic': column,
            'mean': float(x.mean()),
            'stderr': stderr,
            'quantiles': {f"{q:g}": float(v) for q, v in zip(quantiles, x.quantile(quantiles).tolist())},
            'extras': {'means': {c: float(group[c].mean()) for c in others}},
        })
    return per_n


def run(config, run_config=None):
    """Run every replication of one experiment and aggregate it deterministically"""
    options = dict(DEFAULT_RUN_CONFIG)
    options.update(run_config or {})
    if config.experiment not in CATALOG:
        raise ConfigurationError(f"unknown experiment {config.experiment!r}; choose one of {', '.join(catalog())}")
    spec = CATALOG[config.experiment]
    dist = resolve_dist(config.dist)
    replications = config.replications_for()
    if not config.sizes:
        raise ConfigurationError("at least one size is required")
    if min(replications) < 1:
        raise ConfigurationError(f"replications must be >= 1, got {min(replications)}")

    # every size is validated before any sampling starts
    for n in config.sizes:
        spec.validate(dist, n, config.params)
    prepared = {n: spec.prepare(dist, n, config.params) for n in config.sizes}

    tasks, slots = [], []
    for n, reps in zip(config.sizes, replications):
        base = substream_seed(config.master_seed, n)
        for rep in range(reps):
            seed = substream_seed(base, rep)
            tasks.append((config.experiment, dist, n, seed, prepared[n], options['sanity_checks']))
            slots.append((n, rep, seed))

    workers = resolve_workers(options['workers'] or config.workers)
    logger.info("🚀 %s on %s: sizes=%s, %d replications, %d workers",
                config.experiment, dist.name, config.sizes, len(tasks), workers)

    if workers == 1:
        results = [_replicate(task) for task in tasks]
    else:
        chunk = options['chunk_size'] or max(1, len(tasks) // (workers * 8))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replicate, tasks, chunksize=chunk))

    frame = pd.DataFrame(results)
    frame.insert(0, 'n', [s[0] for s in slots])
    frame.insert(1, 'replication', [s[1] for s in slots])
    frame.insert(2, 'seed', pd.array([s[2] for s in slots], dtype='UInt64'))

    per_n = _summarize_sizes(frame, spec.primary, options['quantiles'])
    fits, verdicts = spec.finalize(frame, per_n, dist, config.params, config.tolerances)

    summary = McSummary(
        experiment=config.experiment,
        dist=dist.describe(),
        params=config.params,
        master_seed=config.master_seed,
        per_n=per_n,
        fits=fits,
        verdicts=verdicts,
        tolerances=config.tolerances,
        raw=frame,
    )
    glyph = {'pass': "✅", 'inconclusive': "⚠️", 'fail': "❌"}[summary.status]
    logger.info("%s %s finished (%s): %s", glyph, config.experiment, summary.status,
                ', '.join(f"{k}={'pass' if v.get('pass') else v.get('pass')}" for k, v in verdicts.items()))
    return summary
