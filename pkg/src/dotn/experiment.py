"""Config-driven experiment pipeline.

One declarative YAML file describes corpus, model, and both training
schedules; the pipeline generates (or reuses) the corpus cache, trains the
source-only baseline, adapts it with the transport-aligned loop, evaluates
noisy/baseline/adapted systems on the held-out target split, and writes
comparison tables plus plot-ready columnar data. Every stage is
deterministic in the experiment seed, so reruns reproduce artifacts byte
for byte and interrupted runs can resume from checkpoints.
"""

import dataclasses
import json
import os
from dataclasses import dataclass, field, asdict

import numpy as np
import yaml

from .adaptation import JointCostParams
from .datagen import Corpus, CorpusConfig, build_corpus, load_corpus, save_corpus
from .errors import ConfigError, DataError, StateError
from .metrics import EvalReport, evaluate, METRIC_KEYS
from .nets import ACTIVATIONS, Network
from .training import TrainLog, TrainSchedule, train, train_source_only

__all__ = [
    "ModelConfig",
    "ExperimentConfig",
    "load_config",
    "run_experiment",
    "write_comparison_tables",
    "emit_plot_data",
]


@dataclass
class ModelConfig:
    hidden: tuple = (128, 128)
    activation: str = "relu"
    critic_hidden: tuple = (64,)
    critic_activation: str = "tanh"

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        self.critic_hidden = tuple(int(h) for h in self.critic_hidden)
        if any(h < 1 for h in self.hidden + self.critic_hidden):
            raise ConfigError("model.hidden: layer widths must be >= 1")
        for key, act in (("activation", self.activation),
                         ("critic_activation", self.critic_activation)):
            if act not in ACTIVATIONS:
                raise ConfigError(f"model.{key}: unknown activation {act!r}")


@dataclass
class ExperimentConfig:
    seed: int = 0
    out_dir: str = "runs/experiment"
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    pretrain: TrainSchedule = field(default_factory=TrainSchedule)
    adapt: TrainSchedule = field(default_factory=TrainSchedule)
    alpha: float | None = None
    beta: float | None = None
    eval_every: int = 500

    def cost_params(self) -> JointCostParams:
        d_in = self.corpus.input_dim
        d_out = self.corpus.n_bins
        alpha = self.alpha if self.alpha is not None else 1.0 / d_in
        beta = self.beta if self.beta is not None else 1.0 / d_out
        return JointCostParams(alpha=alpha, beta=beta)

    def resolved(self) -> dict:
        d = asdict(self)
        # normalize through JSON so tuples/lists compare equal on reload
        return json.loads(json.dumps(d))


def _build_section(cls, raw, path):
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a mapping")
    allowed = {f.name for f in dataclasses.fields(cls)}
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"{path}.{sorted(unknown)[0]}: unknown key")
    try:
        return cls(**raw)
    except ConfigError as e:
        raise ConfigError(f"{path}.{e}") from e
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{path}: {e}") from e


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Validate a parsed config mapping; error messages carry the dotted
    path of the offending field. The experiment seed drives every stage;
    sub-section seeds may be given explicitly but default to derivations
    of it."""
    if not isinstance(raw, dict):
        raise ConfigError("config: expected a top-level mapping")
    allowed = {"seed", "out_dir", "corpus", "model", "pretrain", "adapt",
               "alpha", "beta", "eval_every"}
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"{sorted(unknown)[0]}: unknown key")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError("seed: must be an integer")
    corpus_raw = dict(raw.get("corpus") or {})
    corpus_raw.setdefault("seed", seed)
    pretrain_raw = dict(raw.get("pretrain") or {})
    pretrain_raw.setdefault("seed", 1000 * seed + 1)
    adapt_raw = dict(raw.get("adapt") or {})
    adapt_raw.setdefault("seed", 1000 * seed + 2)
    for key in ("alpha", "beta"):
        v = raw.get(key)
        if v is not None and not (isinstance(v, (int, float)) and v > 0):
            raise ConfigError(f"{key}: must be a positive number")
    eval_every = raw.get("eval_every", 500)
    if not (isinstance(eval_every, int) and eval_every >= 1):
        raise ConfigError("eval_every: must be an integer >= 1")
    return ExperimentConfig(
        seed=seed,
        out_dir=str(raw.get("out_dir", "runs/experiment")),
        corpus=_build_section(CorpusConfig, corpus_raw, "corpus"),
        model=_build_section(ModelConfig, raw.get("model"), "model"),
        pretrain=_build_section(TrainSchedule, pretrain_raw, "pretrain"),
        adapt=_build_section(TrainSchedule, adapt_raw, "adapt"),
        alpha=raw.get("alpha"),
        beta=raw.get("beta"),
        eval_every=eval_every,
    )


def load_config(path, seed_override=None, out_override=None) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except yaml.YAMLError as e:
        raise ConfigError(f"config: not parseable YAML ({e})") from e
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be a mapping")
    if seed_override is not None:
        # derived sub-seeds follow the override; seeds pinned inside a
        # section of the file stay as written
        raw = dict(raw)
        raw["seed"] = int(seed_override)
    cfg = config_from_dict(raw)
    if out_override is not None:
        cfg.out_dir = str(out_override)
    return cfg


# ---------------------------------------------------------------------------
# artifact layout

class Paths:
    def __init__(self, out_dir):
        self.out_dir = out_dir
        self.resolved = os.path.join(out_dir, "config_resolved.json")
        self.corpus_dir = os.path.join(out_dir, "corpus")
        self.manifest = os.path.join(self.corpus_dir, "manifest.json")
        self.source_net = os.path.join(out_dir, "source_only.npz")
        self.source_log = os.path.join(out_dir, "source_only.log.jsonl")
        self.adapt_ckpt = os.path.join(out_dir, "dotn.ckpt.npz")
        self.adapt_f = os.path.join(out_dir, "dotn_f.npz")
        self.adapt_h = os.path.join(out_dir, "dotn_h.npz")
        self.adapt_log = os.path.join(out_dir, "dotn.log.jsonl")
        self.tables_dir = os.path.join(out_dir, "tables")
        self.plots_dir = os.path.join(out_dir, "plots")

    def eval_json(self, system):
        return os.path.join(self.out_dir, f"eval_{system}.json")

    def eval_csv(self, system):
        return os.path.join(self.out_dir, f"eval_{system}.csv")


SYSTEMS = ("noisy", "source_only", "dotn")


def make_networks(cfg: ExperimentConfig):
    """Seeded f (regressor) and h (critic) matching the corpus dims."""
    d_in = cfg.corpus.input_dim
    d_out = cfg.corpus.n_bins
    m = cfg.model
    f = Network.create(
        [d_in, *m.hidden, d_out],
        [m.activation] * len(m.hidden) + ["linear"],
        np.random.default_rng([cfg.seed, 10]),
    )
    h = Network.create(
        [d_out, *m.critic_hidden, 1],
        [m.critic_activation] * len(m.critic_hidden) + ["linear"],
        np.random.default_rng([cfg.seed, 11]),
    )
    return f, h


def stage_gen(cfg: ExperimentConfig, paths: Paths) -> Corpus:
    """Build the corpus or reload the byte-identical cache."""
    if os.path.exists(paths.manifest):
        corpus = load_corpus(paths.corpus_dir)
        if asdict(corpus.config) != asdict(cfg.corpus):
            raise ConfigError(
                "corpus: cached corpus was generated from a different config; "
                "remove the corpus directory or change out_dir"
            )
        return corpus
    corpus = build_corpus(cfg.corpus)
    save_corpus(corpus, paths.corpus_dir)
    return corpus


def stage_pretrain(cfg: ExperimentConfig, paths: Paths, corpus: Corpus,
                   resume: bool) -> Network:
    if resume and os.path.exists(paths.source_net):
        return Network.load(paths.source_net)
    f, _ = make_networks(cfg)
    f, log = train_source_only(f, (corpus.source_inputs, corpus.source_labels),
                               cfg.pretrain)
    f.save(paths.source_net)
    log.write_jsonl(paths.source_log)
    return f


def stage_adapt(cfg: ExperimentConfig, paths: Paths, corpus: Corpus,
                baseline: Network, resume: bool) -> Network:
    if resume and os.path.exists(paths.adapt_f):
        return Network.load(paths.adapt_f)
    f = baseline.copy()  # adaptation starts from the source-trained model
    _, h = make_networks(cfg)

    def eval_fn(net, iteration):
        return evaluate(net, corpus).overall()

    f, log = train(
        f, h, (corpus.source_inputs, corpus.source_labels), corpus.target_inputs,
        cfg.adapt, cost_params=cfg.cost_params(), eval_fn=eval_fn,
        eval_every=cfg.eval_every, checkpoint_path=paths.adapt_ckpt,
        resume=resume,
    )
    f.save(paths.adapt_f)
    h.save(paths.adapt_h)
    log.write_jsonl(paths.adapt_log)
    return f


def stage_eval(cfg: ExperimentConfig, paths: Paths, corpus: Corpus,
               baseline: Network, adapted: Network) -> dict:
    reports = {}
    for system, net in (("noisy", None), ("source_only", baseline), ("dotn", adapted)):
        report = evaluate(net, corpus)
        report.to_csv(paths.eval_csv(system))
        report.to_json(paths.eval_json(system))
        reports[system] = report
    return reports


def write_comparison_tables(reports: dict, directory):
    """One CSV per noise family: rows are SNRs plus Avg, columns are
    system x metric, every value copied verbatim from the reports."""
    os.makedirs(directory, exist_ok=True)
    systems = [s for s in SYSTEMS if s in reports]
    if not systems:
        raise DataError("no reports to tabulate")
    first = reports[systems[0]]
    written = []
    for fam in first.families:
        path = os.path.join(directory, f"table_{fam}.csv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            header = ["snr_db"] + [f"{s}_{k}" for s in systems for k in METRIC_KEYS]
            fh.write(",".join(header) + "\n")
            for snr in first.snr_grid_db:
                row = [repr(snr)]
                for s in systems:
                    cell = reports[s].cell(fam, snr)
                    row += [repr(cell[k]) for k in METRIC_KEYS]
                fh.write(",".join(row) + "\n")
            row = ["Avg"]
            for s in systems:
                avg = reports[s].family_average(fam)
                row += [repr(avg[k]) for k in METRIC_KEYS]
            fh.write(",".join(row) + "\n")
        written.append(path)
    return written


def emit_plot_data(reports, directory, labels=None):
    """Columnar plot files from one or more reports.

    Per metric: a metric-vs-SNR table with one column per (label, family),
    and a complexity series with one row per report (its target-family
    count against its all-cell mean). Values are verbatim report numbers.
    """
    reports = list(reports)
    if not reports:
        raise DataError("emit_plot_data needs at least one report")
    if labels is None:
        labels = [f"report{i}" for i in range(len(reports))]
    if len(labels) != len(reports):
        raise DataError("labels and reports must align")
    grid = reports[0].snr_grid_db
    for r in reports[1:]:
        if r.snr_grid_db != grid:
            raise ConfigError("plot: reports use different SNR grids")
    os.makedirs(directory, exist_ok=True)
    written = []
    for key in METRIC_KEYS:
        path = os.path.join(directory, f"plot_{key}_vs_snr.tsv")
        cols = [(lab, fam, rep) for lab, rep in zip(labels, reports)
                for fam in rep.families]
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\t".join(["snr_db"] + [f"{lab}:{fam}" for lab, fam, _ in cols]) + "\n")
            for snr in grid:
                vals = [repr(rep.cells[(fam, snr)][key]) for _, fam, rep in cols]
                fh.write("\t".join([repr(snr)] + vals) + "\n")
        written.append(path)

        cpath = os.path.join(directory, f"plot_{key}_complexity.tsv")
        with open(cpath, "w", encoding="utf-8") as fh:
            fh.write("label\tn_families\t" + key + "\n")
            for lab, rep in zip(labels, reports):
                fh.write(f"{lab}\t{len(rep.families)}\t{repr(rep.overall()[key])}\n")
        written.append(cpath)
    return written


def _check_resolved(cfg: ExperimentConfig, paths: Paths, resume: bool):
    wanted = cfg.resolved()
    if os.path.exists(paths.resolved):
        with open(paths.resolved, "r", encoding="utf-8") as fh:
            existing = json.load(fh)
        if existing != wanted:
            if resume:
                raise StateError(
                    "out_dir holds artifacts from a different configuration; "
                    "refusing to resume"
                )
            # fresh run over stale artifacts: corpus cache is config-checked
            # in stage_gen, everything else is regenerated
    with open(paths.resolved, "w", encoding="utf-8") as fh:
        json.dump(wanted, fh, indent=2)
        fh.write("\n")


def run_experiment(cfg: ExperimentConfig, resume: bool = False) -> dict:
    """Run gen -> pretrain -> adapt -> eval -> report; returns the reports
    plus artifact paths."""
    paths = Paths(cfg.out_dir)
    os.makedirs(cfg.out_dir, exist_ok=True)
    _check_resolved(cfg, paths, resume)
    corpus = stage_gen(cfg, paths)
    baseline = stage_pretrain(cfg, paths, corpus, resume)
    adapted = stage_adapt(cfg, paths, corpus, baseline, resume)
    reports = stage_eval(cfg, paths, corpus, baseline, adapted)
    tables = write_comparison_tables(reports, paths.tables_dir)
    plots = emit_plot_data(
        [reports[s] for s in SYSTEMS], paths.plots_dir, labels=list(SYSTEMS)
    )
    return {
        "paths": paths,
        "reports": reports,
        "tables": tables,
        "plots": plots,
    }
