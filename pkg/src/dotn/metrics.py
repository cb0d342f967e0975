"""Evaluation metrics and per-cell reports for the enhancement task.

Three fully specified proxies stand in for perceptual scores: frame-level
MSE on log-magnitude spectra, scale-invariant SDR on reconstructed
waveforms, and log-spectral distance. Reports hold one cell per
(noise family, SNR) plus per-family averages.
"""

import csv
import json
from dataclasses import dataclass

import numpy as np

from .datagen import Corpus, inverse_spectral_frames, stack_context
from .errors import ConfigError, DataError, ShapeError

__all__ = ["si_sdr", "log_spectral_distance", "EvalReport", "evaluate", "METRIC_KEYS"]

SI_SDR_CAP_DB = 60.0
_LOG_TO_DB = 20.0 / np.log(10.0)


def si_sdr(reference, estimate) -> float:
    """Scale-invariant signal-to-distortion ratio in dB.

    The estimate is projected onto the reference; the ratio of projected
    power to residual power is reported, clamped to +/-60 dB so silent or
    perfectly clean residuals stay finite.
    """
    ref = np.asarray(reference, dtype=np.float64).reshape(-1)
    est = np.asarray(estimate, dtype=np.float64).reshape(-1)
    if ref.shape != est.shape:
        raise ShapeError("reference and estimate lengths differ")
    ref_energy = float(ref @ ref)
    if ref_energy <= 0:
        raise DataError("reference signal has zero power")
    s_target = (float(est @ ref) / ref_energy) * ref
    e_noise = est - s_target
    p_target = float(s_target @ s_target)
    p_noise = float(e_noise @ e_noise)
    if p_noise <= 0:
        return SI_SDR_CAP_DB
    if p_target <= 0:
        return -SI_SDR_CAP_DB
    value = 10.0 * np.log10(p_target / p_noise)
    return float(np.clip(value, -SI_SDR_CAP_DB, SI_SDR_CAP_DB))


def log_spectral_distance(ref_frames, est_frames) -> float:
    """Mean over frames of the RMS log-magnitude difference, in dB.

    Inputs are natural-log magnitude frames; the dB scaling is 20/ln(10).
    """
    ref = np.asarray(ref_frames, dtype=np.float64)
    est = np.asarray(est_frames, dtype=np.float64)
    if ref.shape != est.shape or ref.ndim != 2:
        raise ShapeError("frame matrices must share a 2-d shape")
    per_frame = np.sqrt(np.mean((ref - est) ** 2, axis=1))
    return float(per_frame.mean() * _LOG_TO_DB)


METRIC_KEYS = ("mse", "si_sdr_db", "lsd_db")


@dataclass
class EvalReport:
    """Metric cells keyed by (family, snr_db), with per-family averages.

    Construction checks that every (family, snr) combination is present and
    that stored averages are the arithmetic means of their cells.
    """

    families: tuple
    snr_grid_db: tuple
    cells: dict
    averages: dict

    def __post_init__(self):
        self.families = tuple(self.families)
        self.snr_grid_db = tuple(float(s) for s in self.snr_grid_db)
        for fam in self.families:
            for snr in self.snr_grid_db:
                if (fam, snr) not in self.cells:
                    raise ConfigError(f"report.cells: missing cell ({fam!r}, {snr})")
            avg = self.averages.get(fam)
            if avg is None:
                raise ConfigError(f"report.averages: missing family {fam!r}")
            for key in METRIC_KEYS:
                want = float(np.mean([self.cells[(fam, s)][key] for s in self.snr_grid_db]))
                if abs(avg[key] - want) > 1e-9:
                    raise ConfigError(
                        f"report.averages: {fam!r}.{key} is not the mean of its cells"
                    )

    @classmethod
    def from_cells(cls, families, snr_grid_db, cells) -> "EvalReport":
        families = tuple(families)
        snr_grid_db = tuple(float(s) for s in snr_grid_db)
        averages = {}
        for fam in families:
            averages[fam] = {
                key: float(np.mean([cells[(fam, s)][key] for s in snr_grid_db]))
                for key in METRIC_KEYS
            }
        return cls(families, snr_grid_db, cells, averages)

    def cell(self, family, snr_db) -> dict:
        return self.cells[(family, float(snr_db))]

    def family_average(self, family) -> dict:
        return self.averages[family]

    def overall(self) -> dict:
        """Mean of every cell across all families (complexity summaries)."""
        return {
            key: float(np.mean([self.cells[(f, s)][key]
                                for f in self.families for s in self.snr_grid_db]))
            for key in METRIC_KEYS
        }

    # CSV layout: one row per family x SNR plus one "Avg" row per family.
    # Floats are written with repr so parsing a file recovers cells exactly.
    def to_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["family", "snr_db"] + list(METRIC_KEYS))
            for fam in self.families:
                for snr in self.snr_grid_db:
                    c = self.cells[(fam, snr)]
                    writer.writerow([fam, repr(snr)] + [repr(c[k]) for k in METRIC_KEYS])
                a = self.averages[fam]
                writer.writerow([fam, "Avg"] + [repr(a[k]) for k in METRIC_KEYS])

    def to_json(self, path=None):
        payload = {
            "families": list(self.families),
            "snr_grid_db": list(self.snr_grid_db),
            "cells": [
                {"family": fam, "snr_db": snr, **self.cells[(fam, snr)]}
                for fam in self.families for snr in self.snr_grid_db
            ],
            "averages": [
                {"family": fam, **self.averages[fam]} for fam in self.families
            ],
        }
        text = json.dumps(payload, indent=2)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        return text

    @classmethod
    def from_json(cls, path) -> "EvalReport":
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        cells = {
            (c["family"], float(c["snr_db"])): {k: c[k] for k in METRIC_KEYS}
            for c in payload["cells"]
        }
        averages = {
            a["family"]: {k: a[k] for k in METRIC_KEYS} for a in payload["averages"]
        }
        return cls(tuple(payload["families"]), tuple(payload["snr_grid_db"]),
                   cells, averages)


def _predict(f, utt, cfg):
    if f is None:
        # pass-through: the noisy center frame is the estimate
        return utt.noisy_log
    if f == "oracle":
        return utt.clean_log
    inputs = stack_context(utt.noisy_log, cfg.context_radius)
    return f.forward(inputs)


def evaluate(f, corpus: Corpus) -> EvalReport:
    """Score an estimator on the held-out target split.

    ``f`` is a network mapping stacked noisy context frames to clean center
    frames; None scores the unprocessed noisy input, and "oracle" scores
    the stored clean frames (a diagnostic upper bound). Waveform metrics
    reconstruct with the noisy phase.
    """
    cfg = corpus.config
    if not corpus.eval_utterances:
        raise DataError("corpus has no evaluation utterances")
    bucket = {}
    for utt in corpus.eval_utterances:
        est_log = _predict(f, utt, cfg)
        if est_log.shape != utt.clean_log.shape:
            raise ShapeError("estimator output does not match frame shape")
        mse = float(np.mean((est_log - utt.clean_log) ** 2))
        lsd = log_spectral_distance(utt.clean_log, est_log)
        est_wave = inverse_spectral_frames(
            est_log, utt.noisy_phase, len(utt.clean_wave),
            cfg.window, cfg.hop, cfg.log_floor,
        )
        si = si_sdr(utt.clean_wave, est_wave)
        bucket.setdefault((utt.family, float(utt.snr_db)), []).append(
            {"mse": mse, "si_sdr_db": si, "lsd_db": lsd}
        )
    cells = {}
    for key, rows in bucket.items():
        cells[key] = {k: float(np.mean([r[k] for r in rows])) for k in METRIC_KEYS}
    return EvalReport.from_cells(cfg.target_families, cfg.snr_grid_db, cells)
