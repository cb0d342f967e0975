"""Synthetic spectral-enhancement corpus.

Clean signals are structured waveforms (harmonic voicing with formant-like
envelopes, chirps, filtered pulse trains) mixed with noise at prescribed
SNRs. Source and target splits use disjoint noise families: stationary
families for the labeled source domain, nonstationary families for the
unlabeled target domain, so adaptation faces a real distribution shift.

Features are log-magnitude short-time spectra (hann window, half-overlap)
with a few frames of temporal context stacked around each center frame;
labels are the clean center frames. Target clean material exists only in
the evaluation split. All generation is substream-seeded per utterance, so
corpora are bit-reproducible and cache round-trips are exact (waveforms are
quantized to 32-bit floats at build time, matching the on-disk format).
"""

import json
import os
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import ConfigError, DataError, ShapeError

__all__ = [
    "STATIONARY_FAMILIES",
    "NONSTATIONARY_FAMILIES",
    "CLEAN_GENERATORS",
    "CleanSignal",
    "NoiseSpec",
    "MixedUtterance",
    "CorpusConfig",
    "Corpus",
    "EvalUtterance",
    "make_clean",
    "make_noise",
    "mix_at_snr",
    "spectral_frames",
    "inverse_spectral_frames",
    "stack_context",
    "build_corpus",
    "save_corpus",
    "load_corpus",
]

STATIONARY_FAMILIES = ("pink", "band-limited-white", "tonal-hum")
NONSTATIONARY_FAMILIES = ("amplitude-modulated-burst", "swept-tone", "babble-proxy")
CLEAN_GENERATORS = ("harmonic-voice-like", "chirp", "filtered-pulse-train")

_SNR_TOL_DB = 0.01


@dataclass
class CleanSignal:
    samples: np.ndarray
    sample_rate: int
    tag: str

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ShapeError("clean signal must be 1-d")
        if np.max(np.abs(self.samples)) > 1.0 + 1e-12:
            raise ValueError("clean signal peak exceeds unit amplitude")
        if self.tag not in CLEAN_GENERATORS:
            raise ValueError(f"unknown clean generator tag {self.tag!r}")


@dataclass(frozen=True)
class NoiseSpec:
    family: str
    seed_key: tuple
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in STATIONARY_FAMILIES + NONSTATIONARY_FAMILIES:
            raise ConfigError(f"noise.family: unknown family {self.family!r}")


@dataclass
class MixedUtterance:
    noisy: np.ndarray
    clean: np.ndarray
    snr_db: float
    noise: NoiseSpec

    def __post_init__(self):
        p_clean = float(np.mean(self.clean**2))
        p_noise = float(np.mean((self.noisy - self.clean) ** 2))
        if p_clean <= 0 or p_noise <= 0:
            raise DataError("mixture has zero clean or noise power")
        achieved = 10.0 * np.log10(p_clean / p_noise)
        if abs(achieved - self.snr_db) > _SNR_TOL_DB:
            raise DataError(
                f"achieved SNR {achieved:.4f} dB misses target {self.snr_db} dB"
            )


# ---------------------------------------------------------------------------
# waveform generators (each consumes draws from the rng it is handed)

def _interp_envelope(n, knots, rng, lo, hi):
    # piecewise-linear random envelope in [lo, hi]
    vals = rng.uniform(lo, hi, size=max(int(knots), 2))
    return np.interp(np.arange(n), np.linspace(0, n - 1, vals.size), vals)


def _harmonic_voice(n, sr, rng):
    t = np.arange(n) / sr
    f0 = rng.uniform(110.0, 220.0)
    vib_rate = rng.uniform(4.0, 7.0)
    vib_phase = rng.uniform(0, 2 * np.pi)
    inst_f0 = f0 * (1.0 + 0.03 * np.sin(2 * np.pi * vib_rate * t + vib_phase))
    phase = 2 * np.pi * np.cumsum(inst_f0) / sr
    n_harm = max(3, int((sr / 3.0) / (f0 * 1.05)))
    x = np.zeros(n)
    for k in range(1, n_harm + 1):
        x += (1.0 / k) * np.sin(k * phase + rng.uniform(0, 2 * np.pi))
    # formant-like spectral envelope: three gaussian resonances
    spec = np.fft.rfft(x)
    freqs = np.fft.rfftfreq(n, 1.0 / sr)
    env = np.full(freqs.shape, 0.05)
    for lo_f, hi_f in ((300, 800), (1000, 2000), (2200, 3200)):
        fc = rng.uniform(lo_f, hi_f)
        bw = rng.uniform(150.0, 300.0)
        env += np.exp(-((freqs - fc) ** 2) / (2 * bw * bw))
    x = np.fft.irfft(spec * env, n)
    # slow syllable-like amplitude modulation
    x *= _interp_envelope(n, knots=n / sr * 4 + 2, rng=rng, lo=0.3, hi=1.0)
    return x


def _chirp(n, sr, rng):
    t = np.arange(n) / sr
    f_a = rng.uniform(200.0, 800.0)
    f_b = rng.uniform(1500.0, 4000.0)
    if rng.random() < 0.5:
        f_a, f_b = f_b, f_a
    dur = n / sr
    phase = 2 * np.pi * (f_a * t + (f_b - f_a) / (2 * dur) * t * t)
    x = np.sin(phase + rng.uniform(0, 2 * np.pi))
    ramp = max(8, int(0.02 * n))
    fade = 0.5 - 0.5 * np.cos(np.pi * np.arange(ramp) / ramp)
    x[:ramp] *= fade
    x[-ramp:] *= fade[::-1]
    return x


def _pulse_train(n, sr, rng):
    f0 = rng.uniform(80.0, 160.0)
    period = sr / f0
    x = np.zeros(n)
    pos = rng.uniform(0, period)
    while pos < n:
        x[int(pos)] = 1.0
        pos += period
    # resonant decay kernel
    klen = int(0.010 * sr)
    kt = np.arange(klen) / sr
    tau = rng.uniform(0.002, 0.005)
    fc = rng.uniform(400.0, 1200.0)
    kernel = np.exp(-kt / tau) * np.cos(2 * np.pi * fc * kt)
    return np.convolve(x, kernel)[:n]


def _normalize_peak(x, peak=0.9):
    m = np.max(np.abs(x))
    if m <= 0:
        raise DataError("generated signal is silent")
    return x * (peak / m)


def _unit_rms(x):
    r = np.sqrt(np.mean(x * x))
    if r <= 0:
        raise DataError("generated noise is silent")
    return x / r


def make_clean(tag: str, n: int, sample_rate: int, rng) -> CleanSignal:
    if tag == "harmonic-voice-like":
        x = _harmonic_voice(n, sample_rate, rng)
    elif tag == "chirp":
        x = _chirp(n, sample_rate, rng)
    elif tag == "filtered-pulse-train":
        x = _pulse_train(n, sample_rate, rng)
    else:
        raise ConfigError(f"clean_generators: unknown tag {tag!r}")
    return CleanSignal(_normalize_peak(x), sample_rate, tag)


def _pink_noise(n, sr, rng):
    spec = np.fft.rfft(rng.standard_normal(n))
    freqs = np.fft.rfftfreq(n, 1.0 / sr)
    scale = np.zeros_like(freqs)
    scale[1:] = 1.0 / np.sqrt(freqs[1:])
    return np.fft.irfft(spec * scale, n)


def _band_white(n, sr, rng):
    lo = rng.uniform(500.0, 2000.0)
    hi = min(lo * rng.uniform(1.5, 3.0), 0.45 * sr)
    taper = 100.0
    freqs = np.fft.rfftfreq(n, 1.0 / sr)
    mask = np.clip((freqs - (lo - taper)) / taper, 0, 1) * np.clip(
        ((hi + taper) - freqs) / taper, 0, 1
    )
    spec = np.fft.rfft(rng.standard_normal(n))
    return np.fft.irfft(spec * mask, n)


def _tonal_hum(n, sr, rng):
    t = np.arange(n) / sr
    f0 = rng.uniform(50.0, 120.0)
    x = np.zeros(n)
    for k in range(1, 7):
        x += (1.0 / k) * np.sin(2 * np.pi * k * f0 * t + rng.uniform(0, 2 * np.pi))
    x += 0.05 * rng.standard_normal(n)
    return x


def _am_burst(n, sr, rng):
    carrier = _pink_noise(n, sr, rng)
    rate = rng.uniform(2.0, 8.0)
    n_gates = max(2, int(n / sr * rate))
    gates = (rng.random(n_gates) < 0.45).astype(np.float64)
    env = np.interp(np.arange(n), np.linspace(0, n - 1, n_gates), gates)
    width = max(3, int(0.02 * sr))
    smooth = np.hanning(width)
    env = np.convolve(env, smooth / smooth.sum(), mode="same") + 0.05
    return carrier * env


def _swept_tone(n, sr, rng):
    t = np.arange(n) / sr
    period = rng.uniform(0.25, 1.0)
    f_lo = rng.uniform(300.0, 800.0)
    f_hi = rng.uniform(1500.0, 3500.0)
    tri = 2.0 * np.abs((t / period + rng.uniform(0, 1)) % 1.0 - 0.5)
    inst = f_lo + (f_hi - f_lo) * tri
    phase = 2 * np.pi * np.cumsum(inst) / sr
    return np.sin(phase) + 0.02 * rng.standard_normal(n)


def _babble(n, sr, rng):
    x = np.zeros(n)
    for _ in range(5):
        x += _harmonic_voice(n, sr, rng)
    return x


def make_noise(spec: NoiseSpec, n: int, sample_rate: int) -> np.ndarray:
    """Generate ``n`` samples of unit-RMS noise keyed by ``spec.seed_key``."""
    rng = np.random.default_rng(list(spec.seed_key))
    fam = spec.family
    if fam == "pink":
        x = _pink_noise(n, sample_rate, rng)
    elif fam == "band-limited-white":
        x = _band_white(n, sample_rate, rng)
    elif fam == "tonal-hum":
        x = _tonal_hum(n, sample_rate, rng)
    elif fam == "amplitude-modulated-burst":
        x = _am_burst(n, sample_rate, rng)
    elif fam == "swept-tone":
        x = _swept_tone(n, sample_rate, rng)
    elif fam == "babble-proxy":
        x = _babble(n, sample_rate, rng)
    else:
        raise ConfigError(f"noise.family: unknown family {fam!r}")
    return _unit_rms(x)


def mix_at_snr(clean: CleanSignal, noise: np.ndarray, snr_db: float,
               spec: NoiseSpec) -> MixedUtterance:
    """Additively mix noise into the clean signal at the requested SNR.

    The gain solves 10*log10(P_clean / P_scaled_noise) = snr_db. Waveforms
    are quantized to 32-bit floats (the cache format) so in-memory and
    cache-loaded corpora agree bit for bit.
    """
    x = clean.samples
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != x.shape:
        raise ShapeError("clean and noise lengths differ")
    p_clean = float(np.mean(x * x))
    p_noise = float(np.mean(noise * noise))
    if p_clean <= 0 or p_noise <= 0:
        raise DataError("zero-power clean or noise signal")
    g = np.sqrt(p_clean / (p_noise * 10.0 ** (snr_db / 10.0)))
    clean_q = x.astype(np.float32).astype(np.float64)
    noisy_q = (x + g * noise).astype(np.float32).astype(np.float64)
    return MixedUtterance(noisy=noisy_q, clean=clean_q, snr_db=float(snr_db), noise=spec)


# ---------------------------------------------------------------------------
# short-time spectral analysis / synthesis

def _hann_periodic(window: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(window) / window)


def spectral_frames(signal, window: int = 512, hop: int = 256, log_floor: float = 1e-8):
    """Log-magnitude frames plus phase of a hann-windowed short-time DFT.

    The signal is zero-padded by one full window on each side so that every
    original sample gets complete overlap coverage; the returned arrays are
    (n_frames, window//2 + 1). ``inverse_spectral_frames`` undoes this.
    """
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError("signal must be 1-d")
    if window & (window - 1) or window <= 0:
        raise ValueError("window must be a power of two")
    if not (0 < hop <= window):
        raise ValueError("hop must be in (0, window]")
    if x.size < window:
        raise DataError(f"signal of {x.size} samples is shorter than one window")
    pad_tail = (-(x.size)) % hop
    padded = np.concatenate([np.zeros(window), x, np.zeros(pad_tail + window)])
    n_frames = (padded.size - window) // hop + 1
    w = _hann_periodic(window)
    idx = np.arange(window)[None, :] + hop * np.arange(n_frames)[:, None]
    spec = np.fft.rfft(padded[idx] * w, axis=1)
    log_mag = np.log(np.abs(spec) + log_floor)
    phase = np.angle(spec)
    return log_mag, phase


def inverse_spectral_frames(log_mag, phase, length: int, window: int = 512,
                            hop: int = 256, log_floor: float = 1e-8) -> np.ndarray:
    """Overlap-add reconstruction; exact inverse of spectral_frames for
    unmodified frames (the half-overlap hann partition sums to one)."""
    log_mag = np.asarray(log_mag, dtype=np.float64)
    phase = np.asarray(phase, dtype=np.float64)
    if log_mag.shape != phase.shape or log_mag.ndim != 2:
        raise ShapeError("log_mag and phase must be matching 2-d arrays")
    mag = np.maximum(np.exp(log_mag) - log_floor, 0.0)
    frames = np.fft.irfft(mag * np.exp(1j * phase), window, axis=1)
    n_frames = frames.shape[0]
    total = window + (n_frames - 1) * hop
    out = np.zeros(total)
    cover = np.zeros(total)
    w = _hann_periodic(window)
    for t in range(n_frames):
        out[t * hop:t * hop + window] += frames[t]
        cover[t * hop:t * hop + window] += w
    good = cover > 1e-8
    out[good] /= cover[good]
    return out[window:window + length]


def stack_context(frames: np.ndarray, radius: int = 2) -> np.ndarray:
    """Concatenate 2*radius+1 neighboring frames per row, clamping at edges."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2:
        raise ShapeError("frames must be 2-d")
    n = frames.shape[0]
    cols = []
    for off in range(-radius, radius + 1):
        idx = np.clip(np.arange(n) + off, 0, n - 1)
        cols.append(frames[idx])
    return np.concatenate(cols, axis=1)


# ---------------------------------------------------------------------------
# corpus assembly

@dataclass
class CorpusConfig:
    sample_rate: int = 16000
    window: int = 512
    hop: int = 256
    log_floor: float = 1e-8
    context_radius: int = 2
    utterance_seconds: float = 1.0
    source_families: tuple = STATIONARY_FAMILIES
    target_families: tuple = (NONSTATIONARY_FAMILIES[0],)
    snr_grid_db: tuple = (-9.0, -6.0, -3.0, 0.0, 3.0, 6.0, 9.0)
    clean_generators: tuple = CLEAN_GENERATORS
    source_utterances: int = 24
    source_eval_utterances: int = 6
    target_train_utterances: int = 24
    eval_utterances_per_cell: int = 2
    seed: int = 0

    def __post_init__(self):
        self.source_families = tuple(self.source_families)
        self.target_families = tuple(self.target_families)
        self.snr_grid_db = tuple(float(s) for s in self.snr_grid_db)
        self.clean_generators = tuple(self.clean_generators)
        if not self.source_families or not self.target_families:
            raise ConfigError("corpus.families: need at least one family per domain")
        overlap = set(self.source_families) & set(self.target_families)
        if overlap:
            raise ConfigError(
                f"corpus.target_families: families {sorted(overlap)} also appear "
                "in source_families; domains must use disjoint noise"
            )
        known = set(STATIONARY_FAMILIES + NONSTATIONARY_FAMILIES)
        unknown = (set(self.source_families) | set(self.target_families)) - known
        if unknown:
            raise ConfigError(f"corpus.families: unknown families {sorted(unknown)}")
        for tag in self.clean_generators:
            if tag not in CLEAN_GENERATORS:
                raise ConfigError(f"corpus.clean_generators: unknown tag {tag!r}")
        if not self.snr_grid_db:
            raise ConfigError("corpus.snr_grid_db: must be nonempty")
        if min(self.source_utterances, self.target_train_utterances,
               self.eval_utterances_per_cell, self.source_eval_utterances) < 1:
            raise ConfigError("corpus counts must all be >= 1")

    @property
    def n_samples(self) -> int:
        return int(round(self.utterance_seconds * self.sample_rate))

    @property
    def n_bins(self) -> int:
        return self.window // 2 + 1

    @property
    def input_dim(self) -> int:
        return (2 * self.context_radius + 1) * self.n_bins


@dataclass
class EvalUtterance:
    family: str
    snr_db: float
    clean_wave: np.ndarray
    noisy_wave: np.ndarray
    noisy_log: np.ndarray
    noisy_phase: np.ndarray
    clean_log: np.ndarray
    clean_tag: str = ""


@dataclass
class Corpus:
    config: CorpusConfig
    source_inputs: np.ndarray
    source_labels: np.ndarray
    source_eval_inputs: np.ndarray
    source_eval_labels: np.ndarray
    target_inputs: np.ndarray
    eval_utterances: list
    source_records: list = field(default_factory=list)
    target_records: list = field(default_factory=list)


_SPLIT_CODES = {"source": 0, "source_eval": 1, "target": 2, "eval": 3}


def _make_mix(cfg: CorpusConfig, split: str, index: int, family: str,
              snr_db: float, tag: str):
    code = _SPLIT_CODES[split]
    clean_rng = np.random.default_rng([cfg.seed, code, index, 0])
    clean = make_clean(tag, cfg.n_samples, cfg.sample_rate, clean_rng)
    spec = NoiseSpec(family=family, seed_key=(cfg.seed, code, index, 1))
    noise = make_noise(spec, cfg.n_samples, cfg.sample_rate)
    return clean, mix_at_snr(clean, noise, snr_db, spec)


def _features(cfg: CorpusConfig, wave):
    log_mag, phase = spectral_frames(wave, cfg.window, cfg.hop, cfg.log_floor)
    return log_mag, phase


def _labeled_frames(cfg: CorpusConfig, mix: MixedUtterance):
    noisy_log, _ = _features(cfg, mix.noisy)
    clean_log, _ = _features(cfg, mix.clean)
    return stack_context(noisy_log, cfg.context_radius), clean_log


def _round_robin(cfg: CorpusConfig, families, count):
    # deterministic coverage of (family, snr, clean-tag) combinations
    out = []
    for i in range(count):
        fam = families[i % len(families)]
        snr = cfg.snr_grid_db[(i // len(families)) % len(cfg.snr_grid_db)]
        tag = cfg.clean_generators[i % len(cfg.clean_generators)]
        out.append((fam, snr, tag))
    return out


def build_corpus(cfg: CorpusConfig) -> Corpus:
    """Generate all splits. Everything derives from (seed, split, index)
    substreams, so equal configs give bit-identical corpora."""
    src_in, src_lab, src_rec = [], [], []
    for i, (fam, snr, tag) in enumerate(_round_robin(cfg, cfg.source_families,
                                                     cfg.source_utterances)):
        _, mix = _make_mix(cfg, "source", i, fam, snr, tag)
        xi, yi = _labeled_frames(cfg, mix)
        src_in.append(xi)
        src_lab.append(yi)
        src_rec.append({"family": fam, "snr_db": snr, "tag": tag})

    sev_in, sev_lab = [], []
    for i, (fam, snr, tag) in enumerate(_round_robin(cfg, cfg.source_families,
                                                     cfg.source_eval_utterances)):
        _, mix = _make_mix(cfg, "source_eval", i, fam, snr, tag)
        xi, yi = _labeled_frames(cfg, mix)
        sev_in.append(xi)
        sev_lab.append(yi)

    tgt_in, tgt_rec = [], []
    for i, (fam, snr, tag) in enumerate(_round_robin(cfg, cfg.target_families,
                                                     cfg.target_train_utterances)):
        _, mix = _make_mix(cfg, "target", i, fam, snr, tag)
        noisy_log, _ = _features(cfg, mix.noisy)
        tgt_in.append(stack_context(noisy_log, cfg.context_radius))
        tgt_rec.append({"family": fam, "snr_db": snr, "tag": tag})

    evals = []
    i = 0
    for fam in cfg.target_families:
        for snr in cfg.snr_grid_db:
            for _ in range(cfg.eval_utterances_per_cell):
                tag = cfg.clean_generators[i % len(cfg.clean_generators)]
                _, mix = _make_mix(cfg, "eval", i, fam, snr, tag)
                noisy_log, noisy_phase = _features(cfg, mix.noisy)
                clean_log, _ = _features(cfg, mix.clean)
                evals.append(EvalUtterance(
                    family=fam, snr_db=snr, clean_wave=mix.clean,
                    noisy_wave=mix.noisy, noisy_log=noisy_log,
                    noisy_phase=noisy_phase, clean_log=clean_log, clean_tag=tag,
                ))
                i += 1

    return Corpus(
        config=cfg,
        source_inputs=np.vstack(src_in),
        source_labels=np.vstack(src_lab),
        source_eval_inputs=np.vstack(sev_in),
        source_eval_labels=np.vstack(sev_lab),
        target_inputs=np.vstack(tgt_in),
        eval_utterances=evals,
        source_records=src_rec,
        target_records=tgt_rec,
    )


# ---------------------------------------------------------------------------
# disk cache: raw little-endian float32 waveforms plus a JSON manifest

def _write_wave(path, wave):
    np.asarray(wave, dtype="<f4").tofile(path)


def _read_wave(path, n):
    wave = np.fromfile(path, dtype="<f4")
    if wave.size != n:
        raise DataError(f"cached waveform {path} has {wave.size} samples, expected {n}")
    return wave.astype(np.float64)


def save_corpus(corpus: Corpus, directory):
    """Cache the corpus as float32 waveforms plus manifest.json. Only splits
    that legitimately own clean material store it; the target training split
    is cached noisy-only."""
    os.makedirs(directory, exist_ok=True)
    cfg = corpus.config
    entries = []

    def emit(split, index, fam, snr, tag):
        clean, mix = _make_mix(cfg, split, index, fam, snr, tag)
        stem = f"{split}_{index:04d}"
        noisy_file = stem + "_noisy.f32"
        _write_wave(os.path.join(directory, noisy_file), mix.noisy)
        entry = {"split": split, "index": index, "family": fam, "snr_db": snr,
                 "tag": tag, "noisy": noisy_file}
        if split != "target":
            clean_file = stem + "_clean.f32"
            _write_wave(os.path.join(directory, clean_file), mix.clean)
            entry["clean"] = clean_file
        entries.append(entry)

    for i, (fam, snr, tag) in enumerate(_round_robin(cfg, cfg.source_families,
                                                     cfg.source_utterances)):
        emit("source", i, fam, snr, tag)
    for i, (fam, snr, tag) in enumerate(_round_robin(cfg, cfg.source_families,
                                                     cfg.source_eval_utterances)):
        emit("source_eval", i, fam, snr, tag)
    for i, (fam, snr, tag) in enumerate(_round_robin(cfg, cfg.target_families,
                                                     cfg.target_train_utterances)):
        emit("target", i, fam, snr, tag)
    i = 0
    for fam in cfg.target_families:
        for snr in cfg.snr_grid_db:
            for _ in range(cfg.eval_utterances_per_cell):
                tag = cfg.clean_generators[i % len(cfg.clean_generators)]
                emit("eval", i, fam, snr, tag)
                i += 1

    manifest = {
        "format": "dotn-corpus-v1",
        "config": asdict(cfg),
        "utterances": entries,
    }
    with open(os.path.join(directory, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)


def load_corpus(directory) -> Corpus:
    """Rebuild a corpus from its cache; features are recomputed from the
    stored waveforms and match a fresh build bit for bit."""
    with open(os.path.join(directory, "manifest.json"), "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("format") != "dotn-corpus-v1":
        raise DataError("unrecognized corpus manifest format")
    raw_cfg = dict(manifest["config"])
    cfg = CorpusConfig(**raw_cfg)
    n = cfg.n_samples

    src_in, src_lab = [], []
    sev_in, sev_lab = [], []
    tgt_in = []
    evals = []
    src_rec, tgt_rec = [], []
    for e in manifest["utterances"]:
        noisy = _read_wave(os.path.join(directory, e["noisy"]), n)
        split = e["split"]
        if split == "target":
            noisy_log, _ = _features(cfg, noisy)
            tgt_in.append(stack_context(noisy_log, cfg.context_radius))
            tgt_rec.append({"family": e["family"], "snr_db": e["snr_db"],
                            "tag": e["tag"]})
            continue
        clean = _read_wave(os.path.join(directory, e["clean"]), n)
        noisy_log, noisy_phase = _features(cfg, noisy)
        clean_log, _ = _features(cfg, clean)
        if split == "source":
            src_in.append(stack_context(noisy_log, cfg.context_radius))
            src_lab.append(clean_log)
            src_rec.append({"family": e["family"], "snr_db": e["snr_db"],
                            "tag": e["tag"]})
        elif split == "source_eval":
            sev_in.append(stack_context(noisy_log, cfg.context_radius))
            sev_lab.append(clean_log)
        elif split == "eval":
            evals.append(EvalUtterance(
                family=e["family"], snr_db=e["snr_db"], clean_wave=clean,
                noisy_wave=noisy, noisy_log=noisy_log, noisy_phase=noisy_phase,
                clean_log=clean_log, clean_tag=e["tag"],
            ))
        else:
            raise DataError(f"manifest lists unknown split {split!r}")

    return Corpus(
        config=cfg,
        source_inputs=np.vstack(src_in),
        source_labels=np.vstack(src_lab),
        source_eval_inputs=np.vstack(sev_in),
        source_eval_labels=np.vstack(sev_lab),
        target_inputs=np.vstack(tgt_in),
        eval_utterances=evals,
        source_records=src_rec,
        target_records=tgt_rec,
    )
