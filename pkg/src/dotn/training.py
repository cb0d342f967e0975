"""Alternating training loop for transport-aligned adaptation.

Each iteration works on one batch of m source pairs and m target inputs:

  1. solve the transport plan gamma on the joint cost with f fixed
  2. Adam step on f against the transported cost L2 (gamma fixed)
  3. every n_s iterations, Adam step on f against the source loss L1
  4. every n_f iterations, Adam step on f against the generator loss L_f
  5. every n_h iterations, Adam ASCENT step on the critic objective L_h,
     then clip the critic parameters into [-c, c]

All four loss values are computed and logged every iteration regardless of
which parameter updates fire; the schedule gates updates only. Batches are
drawn from seeded per-epoch shuffles, so a fixed seed reproduces the whole
trajectory bit for bit.
"""

import json
import os
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from .adaptation import BatchPair, JointCostParams, joint_cost, loss_l1, loss_l2, \
    loss_critic, loss_generator
from .errors import ConfigError, DataError, ShapeError, StateError
from .nets import AdamState, Layer, Network, clip_parameters
from .ot import Coupling, Histogram, solve_ot_exact, solve_sinkhorn

__all__ = [
    "TrainSchedule",
    "TrainRecord",
    "TrainLog",
    "train_step",
    "train",
    "train_source_only",
    "save_checkpoint",
    "load_checkpoint",
]


def _check_period(name, value):
    if value is None:
        return None
    if not (isinstance(value, (int, np.integer)) and value >= 1):
        raise ConfigError(f"{name}: period must be an integer >= 1 or None (never)")
    return int(value)


@dataclass
class TrainSchedule:
    """Hyperparameters of the alternating loop.

    Periods ``n_s``, ``n_f``, ``n_h`` may be None, meaning that update never
    fires. ``sinkhorn_epsilon`` is relative: the absolute regularizer passed
    to the solver is ``sinkhorn_epsilon * max(C)`` for the current batch cost
    C, keeping the blur proportional to the cost scale as f evolves.
    """

    batch_size: int = 32
    clip: float = 0.01
    n_s: int | None = 1
    n_f: int | None = 5
    n_h: int | None = 1
    total_iterations: int = 10000
    f_learning_rate: float = 1e-4
    f_beta1: float = 0.9
    f_beta2: float = 0.999
    h_learning_rate: float = 1e-4
    h_beta1: float = 0.5
    h_beta2: float = 0.9
    ot_solver: str = "exact"
    sinkhorn_epsilon: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if not (isinstance(self.batch_size, (int, np.integer)) and self.batch_size >= 1):
            raise ConfigError("batch_size: must be an integer >= 1")
        if not self.clip > 0:
            raise ConfigError("clip: must be > 0")
        self.n_s = _check_period("n_s", self.n_s)
        self.n_f = _check_period("n_f", self.n_f)
        self.n_h = _check_period("n_h", self.n_h)
        if not (isinstance(self.total_iterations, (int, np.integer)) and self.total_iterations >= 1):
            raise ConfigError("total_iterations: must be an integer >= 1")
        if self.ot_solver not in ("exact", "sinkhorn"):
            raise ConfigError(f"ot_solver: unknown solver {self.ot_solver!r}")
        if self.ot_solver == "sinkhorn" and not self.sinkhorn_epsilon > 0:
            raise ConfigError("sinkhorn_epsilon: must be > 0")


@dataclass
class TrainRecord:
    iteration: int
    l1: float | None = None
    l2: float | None = None
    lh: float | None = None
    lf: float | None = None
    gamma_violation: float | None = None
    wall_ms: float = 0.0

    def to_json(self) -> str:
        d = {k: v for k, v in asdict(self).items() if v is not None}
        return json.dumps(d)


@dataclass
class TrainLog:
    """Per-iteration records plus periodic held-out evaluation snapshots."""

    records: list = field(default_factory=list)
    evals: list = field(default_factory=list)

    def append(self, record: TrainRecord):
        if self.records and record.iteration <= self.records[-1].iteration:
            raise StateError("iteration indices must increase")
        self.records.append(record)

    def write_jsonl(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for r in self.records:
                fh.write(r.to_json() + "\n")
            for e in self.evals:
                fh.write(json.dumps({"eval": e}) + "\n")

    @classmethod
    def read_jsonl(cls, path) -> "TrainLog":
        log = cls()
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                d = json.loads(line)
                if "eval" in d:
                    log.evals.append(d["eval"])
                else:
                    log.records.append(TrainRecord(**d))
        return log


def _solve_plan(cost, sched: TrainSchedule) -> Coupling:
    m, k = cost.shape
    mu = Histogram.uniform(m)
    nu = Histogram.uniform(k)
    if sched.ot_solver == "sinkhorn":
        cmax = float(cost.values.max())
        if cmax <= 0.0:
            # zero cost: every feasible plan is optimal
            return Coupling.independent(mu, nu)
        return solve_sinkhorn(cost, mu, nu, epsilon=sched.sinkhorn_epsilon * cmax)
    return solve_ot_exact(cost, mu, nu)


def train_step(f: Network, h: Network, bp: BatchPair, sched: TrainSchedule,
               iteration: int, f_opt: AdamState, h_opt: AdamState,
               cost_params: JointCostParams) -> TrainRecord:
    """Run one full iteration (updates in the fixed order above) in place.

    ``iteration`` is 1-based; a period p fires when iteration % p == 0.
    """
    if iteration < 1:
        raise ValueError("iteration must be >= 1")
    t0 = time.perf_counter()

    # (1) transport plan with f fixed
    f_xt = f.forward(bp.target_inputs, cache=True)
    cost = joint_cost(bp, f_xt, cost_params)
    gamma = _solve_plan(cost, sched)

    # (2) transported-cost step on f (gamma fixed)
    l2_value, l2_grad = loss_l2(gamma, bp, f_xt, cost_params)
    f.backward(l2_grad)
    f_opt.step(f)

    # (3) source regression step on f
    fires_s = sched.n_s is not None and iteration % sched.n_s == 0
    f_xs = f.forward(bp.source_inputs, cache=fires_s)
    l1_value, l1_grad = loss_l1(f_xs, bp.source_labels)
    if fires_s:
        f.backward(l1_grad)
        f_opt.step(f)

    # (4) adversarial step on f through the frozen critic
    fires_f = sched.n_f is not None and iteration % sched.n_f == 0
    f_xt = f.forward(bp.target_inputs, cache=fires_f)
    fake_scores = h.forward(f_xt, cache=fires_f)
    lf_value, lf_grad = loss_generator(fake_scores)
    if fires_f:
        grad_into_f = h.backward(lf_grad[:, None])
        h.zero_grads()  # h is a frozen measurement here, only f moves
        f.backward(grad_into_f)
        f_opt.step(f)

    # (5) critic ascent and clip
    fires_h = sched.n_h is not None and iteration % sched.n_h == 0
    if fires_f:
        f_xt = f.forward(bp.target_inputs)
        fake_scores = h.forward(f_xt, cache=False)
    if fires_h:
        m = bp.size
        stacked = np.vstack([bp.source_labels, f_xt])
        scores = h.forward(stacked, cache=True)
        lh_value, grad_real, grad_fake = loss_critic(scores[:m], scores[m:])
        # ascend L_h: descend its negation
        upstream = -np.concatenate([grad_real, grad_fake])[:, None]
        h.backward(upstream)
        h_opt.step(h)
        clip_parameters(h, sched.clip)
    else:
        real_scores = h.forward(bp.source_labels)
        lh_value, _, _ = loss_critic(real_scores, fake_scores)

    wall_ms = (time.perf_counter() - t0) * 1000.0
    return TrainRecord(
        iteration=iteration,
        l1=l1_value,
        l2=l2_value,
        lh=lh_value,
        lf=lf_value,
        gamma_violation=gamma.violation(),
        wall_ms=wall_ms,
    )


class _BatchStream:
    """Seeded epoch shuffler yielding index blocks of a fixed size."""

    def __init__(self, n: int, batch: int, rng):
        if n < batch:
            raise DataError(f"dataset of {n} rows cannot fill a batch of {batch}")
        self.n = n
        self.batch = batch
        self.rng = rng
        self.order = rng.permutation(n)
        self.pos = 0

    def next_block(self) -> np.ndarray:
        if self.pos + self.batch > self.n:
            self.order = self.rng.permutation(self.n)
            self.pos = 0
        block = self.order[self.pos:self.pos + self.batch]
        self.pos += self.batch
        return block


def _validate_source(source):
    xs, ys = source
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.ndim != 2 or ys.ndim != 2 or xs.shape[0] != ys.shape[0]:
        raise ShapeError("source dataset must be (inputs, labels) with equal row counts")
    if xs.shape[0] == 0:
        raise DataError("source dataset is empty")
    return xs, ys


def train(f: Network, h: Network, source, target, sched: TrainSchedule,
          cost_params: JointCostParams | None = None, eval_fn=None,
          eval_every: int = 500, checkpoint_path=None, checkpoint_every: int = 1000,
          resume: bool = False):
    """Adapt f on (source pairs, target inputs); returns (f, TrainLog).

    ``source`` is an (inputs, labels) pair, ``target`` an input matrix.
    ``eval_fn(f, iteration) -> dict`` is called every ``eval_every``
    iterations and its result stored on the log. With ``checkpoint_path``
    set, full state (both networks, both optimizers, generator state, log)
    is written every ``checkpoint_every`` iterations; ``resume=True`` picks
    up from such a file and yields the same final state as an uninterrupted
    run.
    """
    xs, ys = _validate_source(source)
    xt = np.asarray(target, dtype=np.float64)
    if xt.ndim != 2 or xt.shape[0] == 0:
        raise DataError("target dataset must be a nonempty matrix")
    if xt.shape[1] != xs.shape[1]:
        raise ShapeError("source and target feature dims differ")
    if f.input_dim != xs.shape[1] or f.output_dim != ys.shape[1]:
        raise ShapeError("network f does not match dataset dims")
    if h.input_dim != f.output_dim or h.output_dim != 1:
        raise ShapeError("critic h must map f's output dim to a scalar")
    if cost_params is None:
        cost_params = JointCostParams(alpha=1.0 / xs.shape[1], beta=1.0 / ys.shape[1])

    f_opt = AdamState(f, sched.f_learning_rate, sched.f_beta1, sched.f_beta2)
    h_opt = AdamState(h, sched.h_learning_rate, sched.h_beta1, sched.h_beta2)
    rng = np.random.default_rng(sched.seed)
    log = TrainLog()
    start = 0

    src_stream = _BatchStream(xs.shape[0], sched.batch_size, rng)
    tgt_stream = _BatchStream(xt.shape[0], sched.batch_size, rng)

    if resume and checkpoint_path is not None:
        loaded = load_checkpoint(checkpoint_path, f, h, f_opt, h_opt, sched)
        if loaded is not None:
            start, rng_state, stream_state, log = loaded
            rng.bit_generator.state = rng_state
            src_stream.order, src_stream.pos, tgt_stream.order, tgt_stream.pos = stream_state

    for iteration in range(start + 1, sched.total_iterations + 1):
        si = src_stream.next_block()
        ti = tgt_stream.next_block()
        bp = BatchPair(xs[si], ys[si], xt[ti])
        record = train_step(f, h, bp, sched, iteration, f_opt, h_opt, cost_params)
        log.append(record)
        if eval_fn is not None and iteration % eval_every == 0:
            snap = dict(eval_fn(f, iteration))
            snap["iteration"] = iteration
            log.evals.append(snap)
        if checkpoint_path is not None and (
            iteration % checkpoint_every == 0 or iteration == sched.total_iterations
        ):
            save_checkpoint(checkpoint_path, f, h, f_opt, h_opt, sched, iteration,
                            rng, (src_stream, tgt_stream), log)
    return f, log


def train_source_only(f: Network, source, sched: TrainSchedule):
    """Supervised regression baseline: Adam on the source loss only.

    Returns (f, TrainLog); records carry just iteration, l1, wall_ms.
    """
    xs, ys = _validate_source(source)
    if f.input_dim != xs.shape[1] or f.output_dim != ys.shape[1]:
        raise ShapeError("network f does not match dataset dims")
    f_opt = AdamState(f, sched.f_learning_rate, sched.f_beta1, sched.f_beta2)
    rng = np.random.default_rng(sched.seed)
    stream = _BatchStream(xs.shape[0], sched.batch_size, rng)
    log = TrainLog()
    for iteration in range(1, sched.total_iterations + 1):
        t0 = time.perf_counter()
        idx = stream.next_block()
        out = f.forward(xs[idx], cache=True)
        value, grad = loss_l1(out, ys[idx])
        f.backward(grad)
        f_opt.step(f)
        wall_ms = (time.perf_counter() - t0) * 1000.0
        log.append(TrainRecord(iteration=iteration, l1=value, wall_ms=wall_ms))
    return f, log


# Full-state checkpoints, format "dotn-train-v1": one .npz holding both
# networks (prefixed f_/h_), both Adam states, the batch generator state,
# the epoch-shuffle positions, and a schedule fingerprint that resume
# validates against. The running log rides along as JSON.
def _net_arrays(prefix, net):
    out = {f"{prefix}activations": np.asarray([l.activation for l in net.layers])}
    for i, l in enumerate(net.layers):
        out[f"{prefix}w{i}"] = l.weight
        out[f"{prefix}b{i}"] = l.bias
    return out


def _load_net_arrays(prefix, data, net):
    acts = [str(a) for a in data[f"{prefix}activations"]]
    if acts != [l.activation for l in net.layers]:
        raise StateError("checkpoint network architecture does not match")
    for i, l in enumerate(net.layers):
        w, b = data[f"{prefix}w{i}"], data[f"{prefix}b{i}"]
        if w.shape != l.weight.shape or b.shape != l.bias.shape:
            raise StateError("checkpoint layer shapes do not match")
        l.weight[:] = w
        l.bias[:] = b


def _opt_arrays(prefix, opt):
    out = {f"{prefix}step": np.asarray(opt.step_count)}
    for i, (m, v) in enumerate(zip(opt.first_moment, opt.second_moment)):
        out[f"{prefix}m{i}"] = m
        out[f"{prefix}v{i}"] = v
    return out


def _load_opt_arrays(prefix, data, opt):
    opt.step_count = int(data[f"{prefix}step"])
    for i in range(len(opt.first_moment)):
        opt.first_moment[i][:] = data[f"{prefix}m{i}"]
        opt.second_moment[i][:] = data[f"{prefix}v{i}"]


def _sched_fingerprint(sched: TrainSchedule) -> str:
    return json.dumps(asdict(sched), sort_keys=True)


def save_checkpoint(path, f, h, f_opt, h_opt, sched, iteration, rng, streams, log):
    src_stream, tgt_stream = streams
    arrays = {
        "format": np.asarray("dotn-train-v1"),
        "iteration": np.asarray(iteration),
        "schedule": np.asarray(_sched_fingerprint(sched)),
        "rng_state": np.asarray(json.dumps(rng.bit_generator.state)),
        "src_order": src_stream.order,
        "src_pos": np.asarray(src_stream.pos),
        "tgt_order": tgt_stream.order,
        "tgt_pos": np.asarray(tgt_stream.pos),
        "log": np.asarray(json.dumps({
            "records": [asdict(r) for r in log.records],
            "evals": log.evals,
        })),
    }
    arrays.update(_net_arrays("f_", f))
    arrays.update(_net_arrays("h_", h))
    arrays.update(_opt_arrays("fopt_", f_opt))
    arrays.update(_opt_arrays("hopt_", h_opt))
    tmp = str(path) + ".tmp.npz"
    np.savez(tmp, **arrays)
    os.replace(tmp, path)


def load_checkpoint(path, f, h, f_opt, h_opt, sched):
    """Restore state in place; returns (iteration, rng_state, stream_state,
    log) or None when no checkpoint file exists yet."""
    if not os.path.exists(path):
        return None
    with np.load(path, allow_pickle=False) as data:
        if str(data["format"]) != "dotn-train-v1":
            raise StateError("unsupported checkpoint format")
        if str(data["schedule"]) != _sched_fingerprint(sched):
            raise StateError("checkpoint was written under a different schedule")
        _load_net_arrays("f_", data, f)
        _load_net_arrays("h_", data, h)
        _load_opt_arrays("fopt_", data, f_opt)
        _load_opt_arrays("hopt_", data, h_opt)
        iteration = int(data["iteration"])
        rng_state = json.loads(str(data["rng_state"]))
        stream_state = (
            data["src_order"].copy(), int(data["src_pos"]),
            data["tgt_order"].copy(), int(data["tgt_pos"]),
        )
        raw = json.loads(str(data["log"]))
    log = TrainLog(records=[TrainRecord(**r) for r in raw["records"]], evals=raw["evals"])
    return iteration, rng_state, stream_state, log
