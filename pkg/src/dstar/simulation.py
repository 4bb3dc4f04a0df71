"""Logical-clock training loop for a parameter server with Byzantine workers.

Time is simulated: each worker's response delay is an exponential draw with
that worker's mean `delay_scale`, and the server's wait per iteration is
either the arrival of the k-th accepted gradient (filtered rule) or the last
arrival (warm-up and all synchronous baselines). Nothing here touches wall
clocks, so runs are bit-reproducible from the config seed.

Stream layout: fixed-purpose streams get small ids, per-worker streams are
offset blocks, so adding workers never perturbs unrelated draws.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from statistics import median

import numpy as np

from .aggregation import (
    FilterThresholds,
    aggregate_aksel,
    aggregate_average,
    aggregate_cge,
    aggregate_krum,
    aggregate_median,
    aggregate_trmean,
    compute_thresholds,
    dstar_aggregate,
    filter_gradient,
)
from .attacks import attack_empire, attack_little, honest_stats
from .config import ExperimentConfig, validate_config
from .data import Dataset, Shard, generate_blobs, load_idx
from .models import (
    ModelState,
    OptimizerState,
    gradient,
    init_model,
    loss_and_accuracy,
    make_optimizer,
    optimizer_step,
    with_theta,
)
from .numerics import GradVector, RngStream, coordinate_median, sample_exponential

STREAM_DATASET = 0
STREAM_PARTITION = 1
STREAM_INIT = 2
STREAM_VALIDATION = 3
STREAM_WORKER_BATCH = 1000
STREAM_WORKER_DELAY = 2000


@dataclass(frozen=True)
class WorkerSpec:
    id: int
    honest: bool
    delay_scale: float
    shard: Shard

    def __post_init__(self):
        if self.delay_scale <= 0:
            raise ValueError("WorkerSpec: delay_scale must be positive")


@dataclass(frozen=True)
class Arrival:
    worker_id: int
    gradient: GradVector | None
    arrival_time: float


@dataclass(frozen=True)
class IterationRecord:
    t: int
    wait_time: float
    cumulative_time: float
    loss: float
    accuracy: float | None
    n_received: int
    n_accepted: int
    accepted_ids: tuple[int, ...]
    rejected_ids: tuple[int, ...]
    updated: bool


@dataclass
class SimulationState:
    """Everything run_iteration needs besides theta and the thresholds."""

    dataset: Dataset
    model: ModelState
    opt: OptimizerState
    workers: list[WorkerSpec]
    val_shard: Shard
    test_shard: Shard
    train_rows: np.ndarray
    batch_streams: dict[int, RngStream]
    delay_streams: dict[int, RngStream]
    val_stream: RngStream
    cumulative_time: float = 0.0
    warmup_S: list[float] = field(default_factory=list)
    warmup_D: list[float] = field(default_factory=list)


def partition_data(dataset: Dataset, N: int, val_frac: float, test_frac: float,
                   rng: RngStream) -> tuple[list[Shard], Shard, Shard]:
    """Class-stratified split into N worker shards plus validation and test sets.

    Rows are shuffled within each class and the classes interleaved by
    fractional position, so every contiguous slice of the resulting order is
    class-mixed; the slices are then dealt out as validation, test, and N
    near-equal worker shards. All pieces are pairwise disjoint.
    """
    if not (0 <= val_frac and 0 <= test_frac and val_frac + test_frac < 1):
        raise ValueError("partition_data: invalid validation/test fractions")
    m = dataset.n_rows
    labels = dataset.labels

    rows_parts, frac_parts, class_parts, within_parts = [], [], [], []
    for c in range(dataset.num_classes):
        idx_c = np.flatnonzero(labels == c)
        if idx_c.size == 0:
            continue
        idx_c = idx_c[rng.permutation(idx_c.size)]
        rows_parts.append(idx_c)
        frac_parts.append((np.arange(idx_c.size) + 0.5) / idx_c.size)
        class_parts.append(np.full(idx_c.size, c))
        within_parts.append(np.arange(idx_c.size))
    rows = np.concatenate(rows_parts)
    fracs = np.concatenate(frac_parts)
    classes = np.concatenate(class_parts)
    within = np.concatenate(within_parts)
    # order by interleave position; ties resolved by class then slot
    order = rows[np.lexsort((within, classes, fracs))]

    n_val = int(round(m * val_frac))
    n_test = int(round(m * test_frac))
    n_train = m - n_val - n_test
    if n_val < 1:
        raise ValueError("partition_data: validation subset would be empty")
    if n_test < 1:
        raise ValueError("partition_data: test subset would be empty")
    if n_train < N:
        raise ValueError(
            f"partition_data: {n_train} training rows cannot fill {N} nonempty shards"
        )

    val_shard = Shard(owner=-1, row_indices=np.sort(order[:n_val]))
    test_shard = Shard(owner=-2, row_indices=np.sort(order[n_val:n_val + n_test]))
    train_order = order[n_val + n_test:]

    base, extra = divmod(n_train, N)
    shards, start = [], 0
    for i in range(N):
        size = base + (1 if i < extra else 0)
        chunk = train_order[start:start + size]
        start += size
        shards.append(Shard(owner=i, row_indices=np.sort(chunk)))
    return shards, val_shard, test_shard


def sample_arrivals(workers, delay_streams) -> list[Arrival]:
    """One exponential response delay per worker, sorted by (time, id).

    Gradients are attached later; each worker consumes exactly one uniform
    from its own delay stream per iteration, so two runs with the same seed
    see identical arrival draws regardless of what the server does with them.
    """
    arrivals = []
    for w in sorted(workers, key=lambda w: w.id):
        u = float(delay_streams[w.id].uniform())
        arrivals.append(Arrival(w.id, None, sample_exponential(w.delay_scale, u)))
    arrivals.sort(key=lambda a: (a.arrival_time, a.worker_id))
    return arrivals


def _sample_batch(shard: Shard, stream: RngStream, n_b: int) -> np.ndarray:
    # with replacement, so n_b may exceed the shard size
    pick = stream.integers(0, len(shard), size=n_b)
    return shard.row_indices[np.asarray(pick)]


def _worker_gradients(theta: GradVector, config: ExperimentConfig,
                      state: SimulationState) -> dict[int, GradVector]:
    """All N gradients at theta: honest from shard batches, Byzantine fabricated."""
    model = with_theta(state.model, theta)
    attack_active = config.attack.kind != "none" and config.f > 0
    grads: dict[int, GradVector] = {}
    for w in state.workers:
        if attack_active and not w.honest:
            continue
        x, y = state.dataset.rows(_sample_batch(w.shard, state.batch_streams[w.id], config.n_b))
        grads[w.id] = gradient(model, x, y)
    if attack_active:
        stats = honest_stats([grads[w.id] for w in state.workers if w.honest])
        if config.attack.kind == "little":
            g_mal = attack_little(stats, config.N, config.f)
        else:
            g_mal = attack_empire(stats, config.attack.scale)
        for w in state.workers:
            if not w.honest:
                grads[w.id] = g_mal
    return grads


def _validation_batch(theta: GradVector, config: ExperimentConfig,
                      state: SimulationState, t: int,
                      need_gradient: bool) -> tuple[np.ndarray, GradVector | None]:
    """Fresh validation rows, plus the validation gradient when asked.

    A zero validation gradient cannot anchor the filter, so it is retried
    with a fresh batch up to 3 times before aborting.
    """
    model = with_theta(state.model, theta)
    rows = _sample_batch(state.val_shard, state.val_stream, config.n_b)
    if not need_gradient:
        return rows, None
    for _ in range(3):
        g_v = gradient(model, *state.dataset.rows(rows))
        if float(np.dot(g_v, g_v)) > 0.0:
            return rows, g_v
        rows = _sample_batch(state.val_shard, state.val_stream, config.n_b)
    raise RuntimeError(
        f"iteration {t}: validation gradient stayed zero after 3 fresh batches"
    )


def run_iteration(t: int, theta: GradVector, thresholds: FilterThresholds | None,
                  config: ExperimentConfig, state: SimulationState,
                  ) -> tuple[GradVector, FilterThresholds | None, IterationRecord]:
    if t < 1:
        raise ValueError("run_iteration: t starts at 1")
    N = config.N
    all_ids = tuple(w.id for w in state.workers)
    grads = _worker_gradients(theta, config, state)
    is_dstar = config.gar == "dstar"
    val_rows, g_v = _validation_batch(theta, config, state, t, need_gradient=is_dstar)

    arrivals = sample_arrivals(state.workers, state.delay_streams)
    arrivals = [replace(a, gradient=grads[a.worker_id]) for a in arrivals]

    agg: GradVector | None
    if is_dstar and t <= config.warmup_rounds:
        # warm-up: synchronous median round that fixes the filter thresholds
        wait = arrivals[-1].arrival_time
        g_m = coordinate_median([a.gradient for a in arrivals])
        th_t = compute_thresholds(g_m, g_v)
        state.warmup_S.append(th_t.S)
        state.warmup_D.append(th_t.D)
        if t == config.warmup_rounds:
            thresholds = FilterThresholds(S=median(state.warmup_S),
                                          D=median(state.warmup_D),
                                          g_m=g_m, g_v1=g_v)
        agg = g_m
        n_received, n_accepted = N, N
        accepted_ids, rejected_ids = all_ids, ()
        updated = True
    elif is_dstar:
        if thresholds is None:
            raise ValueError("run_iteration: filter phase reached without warm-up thresholds")
        accepted_ids_l: list[int] = []
        rejected_ids_l: list[int] = []
        accepted_grads: list[GradVector] = []
        wait = arrivals[-1].arrival_time
        processed = 0
        for a in arrivals:
            processed += 1
            verdict = filter_gradient(a.gradient, g_v, thresholds)
            if verdict.accepted:
                accepted_ids_l.append(a.worker_id)
                accepted_grads.append(a.gradient)
                if len(accepted_grads) == config.k:
                    wait = a.arrival_time
                    break
            else:
                rejected_ids_l.append(a.worker_id)
        n_received = processed
        n_accepted = len(accepted_grads)
        accepted_ids = tuple(accepted_ids_l)
        rejected_ids = tuple(rejected_ids_l)
        if accepted_grads:
            agg = dstar_aggregate(accepted_grads)
            updated = True
        else:
            agg = None
            updated = False
    else:
        # synchronous baselines wait for everyone; inputs in worker-id order
        # so index tie-breaks do not depend on delays
        wait = arrivals[-1].arrival_time
        glist = [grads[i] for i in sorted(grads)]
        if config.gar == "average":
            agg = aggregate_average(glist)
        elif config.gar == "median":
            agg = aggregate_median(glist)
        elif config.gar == "krum":
            agg = aggregate_krum(glist, config.gar_params.f)
        elif config.gar == "cge":
            agg = aggregate_cge(glist, config.gar_params.f)
        elif config.gar == "trmean":
            agg = aggregate_trmean(glist, config.gar_params.b)
        elif config.gar == "aksel":
            agg = aggregate_aksel(glist)
        else:
            raise ValueError(f"run_iteration: unknown gar {config.gar!r}")
        n_received, n_accepted = N, N
        accepted_ids, rejected_ids = all_ids, ()
        updated = True

    if updated:
        theta, state.opt = optimizer_step(state.opt, theta, agg)

    model_now = with_theta(state.model, theta)
    accuracy: float | None = None
    if t % config.eval_every == 0:
        loss, _ = loss_and_accuracy(model_now, *state.dataset.rows(state.train_rows))
        _, accuracy = loss_and_accuracy(model_now, *state.dataset.rows(state.test_shard.row_indices))
    else:
        loss, _ = loss_and_accuracy(model_now, *state.dataset.rows(val_rows))

    state.cumulative_time += wait
    record = IterationRecord(
        t=t, wait_time=wait, cumulative_time=state.cumulative_time,
        loss=loss, accuracy=accuracy,
        n_received=n_received, n_accepted=n_accepted,
        accepted_ids=accepted_ids, rejected_ids=rejected_ids,
        updated=updated,
    )
    return theta, thresholds, record


def build_dataset(config: ExperimentConfig) -> Dataset:
    ds = config.dataset
    if ds.kind == "blobs":
        rng = RngStream(config.seed, STREAM_DATASET)
        return generate_blobs(ds.n, ds.p, ds.classes, ds.separation, rng)
    return load_idx(ds.images, ds.labels)


def build_experiment(config: ExperimentConfig) -> tuple[GradVector, SimulationState]:
    """Construct dataset, shards, workers, model and streams for a run."""
    validate_config(config)
    dataset = build_dataset(config)
    shards, val_shard, test_shard = partition_data(
        dataset, config.N, config.val_frac, config.test_frac,
        RngStream(config.seed, STREAM_PARTITION),
    )
    # the f Byzantine workers are the last ids, fixed for the whole run
    workers = [
        WorkerSpec(
            id=i,
            honest=i < config.N - config.f,
            delay_scale=(config.delay_scale_honest if i < config.N - config.f
                         else config.delay_scale_byz),
            shard=shards[i],
        )
        for i in range(config.N)
    ]
    model = init_model(config.model, dataset.n_features, dataset.num_classes,
                       config.hidden_dim, RngStream(config.seed, STREAM_INIT))
    opt = make_optimizer(config.optimizer, config.eta, model.theta.size)
    state = SimulationState(
        dataset=dataset,
        model=model,
        opt=opt,
        workers=workers,
        val_shard=val_shard,
        test_shard=test_shard,
        train_rows=np.sort(np.concatenate([s.row_indices for s in shards])),
        batch_streams={i: RngStream(config.seed, STREAM_WORKER_BATCH + i)
                       for i in range(config.N)},
        delay_streams={i: RngStream(config.seed, STREAM_WORKER_DELAY + i)
                       for i in range(config.N)},
        val_stream=RngStream(config.seed, STREAM_VALIDATION),
    )
    return model.theta, state


def run_experiment(config: ExperimentConfig) -> list[IterationRecord]:
    """Run T iterations and return their records; deterministic given config.seed."""
    theta, state = build_experiment(config)
    thresholds: FilterThresholds | None = None
    records: list[IterationRecord] = []
    for t in range(1, config.T + 1):
        try:
            theta, thresholds, record = run_iteration(t, theta, thresholds, config, state)
        except Exception as exc:
            raise RuntimeError(f"iteration {t} failed: {exc}") from exc
        records.append(record)
    return records
