"""
Experiment execution.

`run_experiment` dispatches a validated ExperimentConfig to the module that
owns its kind, collects long-format ResultRows and kind-specific tables,
and writes them into the output directory. Replicas run on the worker pool
with streams derived from (seed, experiment id, replica), so results do not
depend on the number of workers.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from ..coarse_grain import (
    CoarseContext,
    Status,
    chain_hit_frequency,
    hit_chain_samples,
    largest_cluster_spans,
    omega_site_frequency,
    open_probability,
    replay_record,
    run_algorithm,
    sample_omega_q,
    simulate_branching,
    typical_start,
    verify_replay,
)
from ..coarse_grain.algorithm import RoundRecord, failure_frequency
from ..config import get_output_dir
from ..errors import ConfigValidationError, FrilabError, InvariantViolation
from ..exploration.layers import explore_coupled, explore_layers, layer_kappas, track_recursion
from ..fri.sampler import sample_window
from ..lattice.codec import encode_trajectory
from ..lattice.points import Box, origin
from ..lattice.rng import RngStream
from ..laws.length_law import EPSILON_4
from ..models.experiment import ExperimentConfig
from ..percolation.threshold import asymptotic_ratio, crossing_curve, estimate_threshold
from ..potential.estimators import (
    Estimate,
    capacity,
    estimate_epsilon,
    green,
    hitting_probability,
    kappa_rho,
    phi_rho,
    rho_capacity,
    rho_capacity_upper_bound,
    truncated_capacity,
)
from ..workers import WorkerPool, get_worker_pool
from .results import (
    ERROR_FILE,
    RESULTS_FILE,
    ResultRow,
    RunLog,
    read_csv,
    read_json,
    read_ndjson,
    write_csv,
    write_error,
    write_json,
    write_ndjson,
    write_results,
)

logger = logging.getLogger(__name__)

CONFIG_FILE = "config.json"

Item = Tuple[int, RngStream]


@dataclass
class ExperimentOutput:
    """Everything an experiment produced, keyed by the file it goes to."""
    config: ExperimentConfig
    rows: List[ResultRow] = field(default_factory=list)
    tables: Dict[str, List[Dict[str, Any]]] = field(default_factory=dict)
    records: Dict[str, List[Any]] = field(default_factory=dict)
    documents: Dict[str, Any] = field(default_factory=dict)
    out_dir: Optional[Path] = None

    def row(self, quantity: str, estimate: Union[Estimate, float], replica: Optional[int] = None,
            **extra: Any) -> ResultRow:
        """Append a result row; `extra` is merged into the parameter echo."""
        if not isinstance(estimate, Estimate):
            estimate = Estimate(float(estimate))
        params = {**self.config.echo(), **extra}
        row = ResultRow.from_estimate(self.config.id, quantity, estimate, self.config.seed, replica, params)
        self.rows.append(row)
        return row

    def write(self, out_dir: Path) -> List[Path]:
        """Write every file atomically; returns the paths written."""
        written = [out_dir / RESULTS_FILE]
        write_results(written[0], self.rows)
        for name, rows in sorted(self.tables.items()):
            write_csv(out_dir / name, rows)
            written.append(out_dir / name)
        for name, records in sorted(self.records.items()):
            write_ndjson(out_dir / name, records)
            written.append(out_dir / name)
        for name, document in sorted(self.documents.items()):
            write_json(out_dir / name, document)
            written.append(out_dir / name)
        write_json(out_dir / CONFIG_FILE, self.config.model_dump(mode='json'))
        written.append(out_dir / CONFIG_FILE)
        return written


def replica_items(config: ExperimentConfig) -> List[Item]:
    stream = config.stream()
    return [(i, stream.child('replica', i)) for i in range(config.replicas)]


def _map_replicas(fn: Callable[[ExperimentConfig, Item], Any], config: ExperimentConfig,
                  pool: WorkerPool) -> List[Any]:
    return pool.map(partial(fn, config), replica_items(config))


def mean_estimate(values: List[float], bias_bound: float = 0.0) -> Estimate:
    """Sample mean across replicas with its standard error."""
    arr = np.asarray(values, dtype=float)
    n = len(arr)
    stderr = float(arr.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return Estimate(float(arr.mean()) if n else math.nan, stderr, bias_bound, n)


def _explicit(config: ExperimentConfig, section: str):
    """A section of the config when given explicitly, else None so the callee keeps its own default."""
    return getattr(config, section) if section in config.model_fields_set else None


def _coarse_context(config: ExperimentConfig, stream: RngStream, epsilon_d: Optional[float]) -> CoarseContext:
    return CoarseContext(config.law(), config.d, config.typicality, stream, _explicit(config, 'potential'),
                         config.algorithm, epsilon_d)


def _capacity_replica(config: ExperimentConfig, item: Item) -> Estimate:
    _, stream = item
    p = config.kind_params()
    d, cfg = config.d, config.potential
    A = p.set.build(d)
    q = p.quantity
    if q == 'capacity':
        return capacity(A, cfg, stream)
    if q == 'truncated_capacity':
        return truncated_capacity(A, p.cutoff_steps, cfg, stream)
    if q == 'hitting_probability':
        return hitting_probability(tuple(p.x), A, cfg, stream, p.decomposed)
    if q == 'green':
        return green(tuple(p.x), tuple(p.y), cfg, stream)
    rho = config.law()
    if q == 'rho_capacity':
        return rho_capacity(A, rho, cfg, stream)
    if q == 'rho_capacity_upper_bound':
        return rho_capacity_upper_bound(A, rho, p.cutoff_steps, cfg, stream)
    if q == 'kappa':
        return kappa_rho(A, rho, cfg, stream, p.kappa_method)
    return phi_rho(A, p.other.build(d), rho, cfg, stream)


def _run_capacity(config: ExperimentConfig, pool: WorkerPool) -> ExperimentOutput:
    out = ExperimentOutput(config)
    quantity = config.kind_params().quantity
    estimates = _map_replicas(_capacity_replica, config, pool)
    for i, est in enumerate(estimates):
        out.row(quantity, est, i)
    if len(estimates) > 1:
        bias = max(e.bias_bound for e in estimates)
        out.row(f"{quantity}_mean", mean_estimate([e.value for e in estimates], bias))
    return out


def _fri_replica(config: ExperimentConfig, item: Item) -> Dict[str, Any]:
    index, stream = item
    p = config.kind_params()
    d = config.d
    window = Box.centered(origin(d), p.window)
    cloud = sample_window(p.u, config.law(), window, stream.child('cloud'), p.margin)
    interior_radius = p.window // 2 if p.interior is None else min(p.interior, p.window)
    times = cloud.local_times(Box.centered(origin(d), interior_radius).points())
    result = {
        'replica': index,
        'local_time': mean_estimate(times.tolist()),
        'trajectories': len(cloud),
        'flagged': cloud.flagged,
        'dump': None,
    }
    if p.dump:
        result['dump'] = [encode_trajectory(e.trajectory, e.provenance) for e in cloud.canonical().entries]
    return result


def _run_fri_sample(config: ExperimentConfig, pool: WorkerPool) -> ExperimentOutput:
    out = ExperimentOutput(config)
    for result in _map_replicas(_fri_replica, config, pool):
        i = result['replica']
        out.row('local_time_mean', result['local_time'], i)
        out.row('trajectories', result['trajectories'], i)
        if result['flagged']:
            logger.warning(f"Experiment {config.id} replica {i}: cloud carries sampler diagnostics")
        if result['dump'] is not None:
            out.records[f"cloud_{i}.ndjson"] = result['dump']
    return out


def _run_threshold(config: ExperimentConfig, pool: WorkerPool) -> ExperimentOutput:
    out = ExperimentOutput(config)
    p = config.kind_params()
    rho, d = config.law(), config.d
    stream = config.stream()
    n = config.replicas
    if p.us is not None:
        curve = crossing_curve(p.us, rho, d, p.L, n, stream, p.margin, pool)
        for u, value in zip(p.us, curve.tolist()):
            out.row('crossing_proxy', Estimate(value, math.sqrt(value * (1 - value) / n), 0.0, n), u=u)
        return out

    estimate = estimate_threshold(rho, d, p.L, n, p.target, stream, p.epsilon_d, p.margin, pool)
    table = []
    for step in estimate.history:
        se = math.sqrt(step.proxy * (1 - step.proxy) / n)
        out.row('crossing_proxy', Estimate(step.proxy, se, 0.0, n), iteration=step.iteration, phase=step.phase,
                u=step.u)
        table.append({'iteration': step.iteration, 'phase': step.phase, 'u': step.u, 'proxy': step.proxy,
                      'u_lo': step.u_lo, 'u_hi': step.u_hi})
    out.row('u_hat', Estimate(estimate.u_hat, estimate.stderr, (estimate.u_hi - estimate.u_lo) / 2, n),
            u_lo=estimate.u_lo, u_hi=estimate.u_hi)
    epsilon_d = p.epsilon_d if p.epsilon_d is not None else (EPSILON_4 if d == 4 else None)
    if epsilon_d is not None and estimate.u_hat > 0:
        out.row('asymptotic_ratio', asymptotic_ratio(estimate.u_hat, rho, d, epsilon_d))
    out.tables['bisection.csv'] = table
    return out


def _explore_replica(config: ExperimentConfig, item: Item) -> List[Dict[str, Any]]:
    index, stream = item
    p = config.kind_params()
    rho, d = config.law(), config.d
    if p.mode == 'coupled':
        plain, primed = explore_coupled(p.u, rho, d, stream.child('explore'), p.max_layers)
        rows = []
        for k in range(max(plain.n_layers, primed.n_layers)):
            rows.append({
                'replica': index, 'k': k,
                'trajectories': len(plain.layers[k]) if k < plain.n_layers else 0,
                'vertices': len(plain.vertex_layers[k]) if k < plain.n_layers else 0,
                'dominating_trajectories': len(primed.layers[k]) if k < primed.n_layers else 0,
                'dominating_vertices': len(primed.vertex_layers[k]) if k < primed.n_layers else 0,
            })
        return rows
    record = explore_layers(p.u, rho, d, stream.child('explore'), p.max_layers)
    kappas = layer_kappas(record, rho, stream.child('kappa'), _explicit(config, 'potential')) if p.kappa else []
    rows = []
    for k, (n_traj, n_vert) in enumerate(record.sizes()):
        row = {'replica': index, 'k': k, 'trajectories': n_traj, 'vertices': n_vert, 'truncated': record.truncated}
        if kappas:
            row['kappa'] = kappas[k].value
            row['kappa_stderr'] = kappas[k].stderr
        rows.append(row)
    return rows


def _run_explore(config: ExperimentConfig, pool: WorkerPool) -> ExperimentOutput:
    out = ExperimentOutput(config)
    p = config.kind_params()
    if p.mode == 'recursion':
        if config.replicas < 2:
            raise ValueError("recursion tracking needs at least 2 replicas")
        trace = track_recursion(p.u, config.law(), config.d, config.replicas, config.stream(), p.max_layers,
                                _explicit(config, 'potential'), pool)
        rows = trace.rows()
        for row in rows:
            out.row('W', Estimate(row['W'], row['W_stderr'], 0.0, trace.replicas), k=row['k'])
            out.row('V', Estimate(row['V'], row['V_stderr'], 0.0, trace.replicas), k=row['k'])
        out.tables['recursion.csv'] = rows
        return out

    layers = [row for rows in _map_replicas(_explore_replica, config, pool) for row in rows]
    depth = max(row['k'] for row in layers) + 1
    for k in range(depth):
        at_k = [row for row in layers if row['k'] == k]
        # replicas that died out before layer k count as empty layers
        missing = config.replicas - len(at_k)
        out.row('trajectories', mean_estimate([r['trajectories'] for r in at_k] + [0] * missing), k=k)
        out.row('vertices', mean_estimate([r['vertices'] for r in at_k] + [0] * missing), k=k)
        if 'kappa' in at_k[0]:
            out.row('kappa', mean_estimate([r['kappa'] for r in at_k] + [0.0] * missing), k=k)
    out.tables['layers.csv'] = layers
    return out


def _algorithm_replica(config: ExperimentConfig, item: Item) -> Dict[str, Any]:
    index, stream = item
    p = config.kind_params()
    state = run_algorithm(config.algorithm.u, config.law(), config.d, p.window_radius, stream, config.algorithm,
                          config.typicality, _explicit(config, 'potential'), p.epsilon_d)
    if not verify_replay(state):
        raise InvariantViolation(f"replica {index}: replaying the round record does not reproduce the status map")
    return {
        'replica': index,
        'status': state.status_rows(),
        'record': [r.to_dict() for r in state.record],
        'meta': {'d': state.d, 'window_radius': state.window_radius, 'ruin_radius': state.ruin_radius,
                 'summary': state.summary()},
    }


def _run_algorithm(config: ExperimentConfig, pool: WorkerPool) -> ExperimentOutput:
    out = ExperimentOutput(config)
    results = _map_replicas(_algorithm_replica, config, pool)
    for result in results:
        i = result['replica']
        summary = result['meta']['summary']
        for quantity in ('rounds', 'failures', 'surviving', 'ruined', 'explored_trajectories'):
            out.row(quantity, summary[quantity], i, outcome=summary['outcome'])
        out.tables[f"status_{i}.csv"] = result['status']
        out.records[f"record_{i}.ndjson"] = result['record']
        out.documents[f"algorithm_{i}.json"] = result['meta']
    records = [[RoundRecord.from_dict(r) for r in result['record']] for result in results]
    rounds = sum(1 for record in records for r in record if not r.terminal)
    freq = failure_frequency(records)
    out.row('failure_frequency', Estimate(freq, math.sqrt(freq * (1 - freq) / rounds) if rounds else 0.0, 0.0, rounds))
    return out


def verify_algorithm_run(run_dir: Union[str, Path], replica: int = 0) -> Tuple[bool, List[Dict[str, Any]]]:
    """
    Replay a stored round record and compare it with the stored status map.

    Returns:
        (match, mismatching vertices with stored and replayed status)
    """
    run_dir = Path(run_dir)
    meta = read_json(run_dir / f"algorithm_{replica}.json")
    record = read_ndjson(run_dir / f"record_{replica}.ndjson")
    replayed = replay_record(record, meta['d'], meta['window_radius'], meta['ruin_radius'])
    stored = {}
    for row in read_csv(run_dir / f"status_{replica}.csv"):
        x = tuple(int(row[f"x{j + 1}"]) for j in range(meta['d']))
        stored[x] = Status(row['status'])
    mismatches = []
    for x in sorted(set(stored) | set(replayed)):
        if stored.get(x) != replayed.get(x):
            mismatches.append({'x': list(x), 'stored': getattr(stored.get(x), 'value', None),
                               'replayed': getattr(replayed.get(x), 'value', None)})
    logger.info(f"Replay of {run_dir} replica {replica}: {len(mismatches)} mismatches")
    return not mismatches, mismatches


def _chain_replica(config: ExperimentConfig, item: Item) -> Dict[str, Any]:
    index, stream = item
    p = config.kind_params()
    if p.axis >= config.d:
        raise ValueError(f"axis {p.axis} is out of range for d={config.d}")
    ctx = _coarse_context(config, stream.child('potential'), p.epsilon_d)
    start = typical_start(origin(config.d), ctx, stream.child('start'), 1, p.start_budget).trajectories[0]
    chains = hit_chain_samples(start, p.alpha, p.variant, p.n, ctx, stream.child('chains'))
    displacement = np.abs(chains[:, -1, :]).max(axis=1) / ctx.scales.R
    return {
        'replica': index,
        'hit_frequency': chain_hit_frequency(chains, ctx, p.axis),
        'displacement': displacement.tolist(),
        'chains': [{'chain': k, 'points': chains[k].tolist()} for k in range(len(chains))],
    }


def _run_chain(config: ExperimentConfig, pool: WorkerPool) -> ExperimentOutput:
    out = ExperimentOutput(config)
    n = config.kind_params().n
    freqs = []
    for result in _map_replicas(_chain_replica, config, pool):
        i = result['replica']
        f = result['hit_frequency']
        freqs.append(f)
        out.row('hit_frequency', Estimate(f, math.sqrt(f * (1 - f) / n), 0.0, n), i)
        out.row('final_displacement', mean_estimate(result['displacement']), i)
        out.records[f"chains_{i}.ndjson"] = result['chains']
    if len(freqs) > 1:
        out.row('hit_frequency_mean', mean_estimate(freqs))
    return out


def _run_epsilon(config: ExperimentConfig, pool: WorkerPool) -> ExperimentOutput:
    out = ExperimentOutput(config)
    p = config.kind_params()
    est = estimate_epsilon(config.d, p.T, config.replicas, _explicit(config, 'potential'), config.stream(), pool)
    for i, value in enumerate(est.values):
        out.row('normalized_capacity', value, i)
    out.row('epsilon', Estimate(est.mean, est.stderr, 0.0, len(est.values)))
    out.row('variance', est.variance)
    for name, value in sorted(est.concentration.items()):
        out.row(name, value)
    return out


def _omega_replica(config: ExperimentConfig, item: Item) -> Dict[str, Any]:
    index, stream = item
    p = config.kind_params()
    sample = sample_omega_q(p.q, p.gamma, config.d, p.radius, stream.child('window'))
    return {'replica': index, 'density': sample.density, 'origin_cluster': len(sample.origin_cluster),
            'spans': largest_cluster_spans(sample)}


def _run_omega(config: ExperimentConfig, pool: WorkerPool) -> ExperimentOutput:
    out = ExperimentOutput(config)
    p = config.kind_params()
    freq, se = omega_site_frequency(p.q, p.gamma, config.d, p.n_sites, config.stream().child('sites'))
    out.row('open_frequency', Estimate(freq, se, 0.0, p.n_sites))
    out.row('open_probability', open_probability(p.q, p.gamma, config.d))
    for result in _map_replicas(_omega_replica, config, pool):
        i = result['replica']
        out.row('density', result['density'], i)
        out.row('origin_cluster_size', result['origin_cluster'], i)
        out.row('largest_cluster_spans', float(result['spans']), i)
    return out


def _branching_replica(config: ExperimentConfig, item: Item) -> Dict[str, Any]:
    index, stream = item
    p = config.kind_params()
    ctx = _coarse_context(config, stream.child('potential'), p.epsilon_d)
    seed = typical_start(origin(config.d), ctx, stream.child('seed'), p.seed_size, p.start_budget)
    result = simulate_branching(seed, p.u, p.generations, ctx, stream.child('branching'), p.epsilon,
                                config.algorithm.population_cap)
    return {'replica': index, 'sizes': result.sizes(), 'diagnostics': [d.to_dict() for d in result.diagnostics]}


def _run_branching(config: ExperimentConfig, pool: WorkerPool) -> ExperimentOutput:
    out = ExperimentOutput(config)
    generations = config.kind_params().generations
    per_generation: Dict[int, Dict[str, List[int]]] = {g: {'Y': [], 'Ybar': []} for g in range(generations + 1)}
    diagnostics = []
    for result in _map_replicas(_branching_replica, config, pool):
        i = result['replica']
        for g in range(generations + 1):
            size = result['sizes'][g] if g < len(result['sizes']) else {'Y': 0, 'Ybar': 0}
            for name in ('Y', 'Ybar'):
                per_generation[g][name].append(size[name])
                out.row(f"{name}_size", size[name], i, generation=g)
        diagnostics += [{'replica': i, **d} for d in result['diagnostics']]
    for g, sizes in per_generation.items():
        for name, values in sizes.items():
            out.row(f"{name}_mean", mean_estimate(values), generation=g)
    out.records['branching_diagnostics.ndjson'] = diagnostics
    return out


RUNNERS: Dict[str, Callable[[ExperimentConfig, WorkerPool], ExperimentOutput]] = {
    'capacity': _run_capacity,
    'fri-sample': _run_fri_sample,
    'threshold': _run_threshold,
    'explore': _run_explore,
    'algorithm': _run_algorithm,
    'chain': _run_chain,
    'epsilon': _run_epsilon,
    'omega': _run_omega,
    'branching': _run_branching,
}


def output_dir_for(config: ExperimentConfig, out_dir: Optional[Union[str, Path]] = None) -> Path:
    """Explicit directory, then the config's `output`, then FRILAB_OUTPUT_DIR/<id>."""
    if out_dir is not None:
        return Path(out_dir)
    if config.output:
        return Path(config.output)
    return get_output_dir() / config.id


def run_experiment(config: ExperimentConfig, out_dir: Optional[Union[str, Path]] = None,
                   pool: Optional[WorkerPool] = None, write: bool = True) -> ExperimentOutput:
    """
    Run one experiment and write its result files.

    Args:
        config: Validated experiment configuration
        out_dir: Output directory (see `output_dir_for`)
        pool: Worker pool for replicas (default sized from FRILAB_THREADS)
        write: Write files; False only collects the output

    Returns:
        ExperimentOutput with rows, tables and the output directory

    Raises:
        FrilabError: validation, budget, memory-cap or invariant failures;
            an error.json record is written first
    """
    pool = pool or get_worker_pool()
    target = output_dir_for(config, out_dir)
    logger.info(f"Running {config.kind} experiment {config.id} "
                f"(d={config.d}, replicas={config.replicas}, seed={config.seed}, workers={pool.threads})")
    started = time.perf_counter()
    try:
        try:
            output = RUNNERS[config.kind](config, pool)
        except FrilabError:
            raise
        except ValueError as e:
            raise ConfigValidationError(f"experiment {config.id}: {e}", [str(e)]) from e
    except FrilabError as e:
        logger.error(f"Experiment {config.id} failed ({e.kind}): {e.message}")
        if write:
            write_error(target, e)
            RunLog(target).append(config.id, config.kind, e.kind, time.perf_counter() - started)
        raise

    output.out_dir = target
    if write:
        output.write(target)
        stale = target / ERROR_FILE
        if stale.exists():
            stale.unlink()
        RunLog(target).append(config.id, config.kind, 'ok', time.perf_counter() - started, rows=len(output.rows))
    logger.info(f"Experiment {config.id} finished: {len(output.rows)} rows in {time.perf_counter() - started:.2f}s")
    return output
