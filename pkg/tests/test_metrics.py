"""Metrics: SI-SDR properties, LSD scalar-loop oracle, report invariants."""

import numpy as np
import pytest

from dotn import (
    ConfigError,
    CorpusConfig,
    DataError,
    EvalReport,
    Network,
    ShapeError,
    build_corpus,
    evaluate,
    log_spectral_distance,
    si_sdr,
)
from dotn.metrics import METRIC_KEYS, SI_SDR_CAP_DB


def lsd_scalar_loop(ref, est):
    """Independent scalar-loop oracle for the log-spectral distance."""
    total = 0.0
    n_frames, n_bins = ref.shape
    for t in range(n_frames):
        acc = 0.0
        for k in range(n_bins):
            d = ref[t, k] - est[t, k]
            acc += d * d
        total += (acc / n_bins) ** 0.5
    return (total / n_frames) * (20.0 / np.log(10.0))


class TestSiSdr:
    def test_scale_invariance(self):
        rng = np.random.default_rng(0)
        worst = 0.0
        for _ in range(100):
            ref = rng.standard_normal(500)
            est = ref + 0.1 * rng.standard_normal(500)
            scale = float(np.exp(rng.uniform(-3, 3)))
            worst = max(worst, abs(si_sdr(ref, est) - si_sdr(ref, scale * est)))
        assert worst <= 1e-9

    def test_perfect_estimate_hits_positive_cap(self):
        ref = np.sin(np.linspace(0, 10, 400))
        assert si_sdr(ref, ref) == SI_SDR_CAP_DB
        assert si_sdr(ref, 3.7 * ref) == SI_SDR_CAP_DB

    def test_orthogonal_estimate_hits_negative_cap(self):
        # estimate orthogonal to the reference: zero projection
        ref = np.array([1.0, 0.0, 1.0, 0.0])
        est = np.array([0.0, 1.0, 0.0, 1.0])
        assert si_sdr(ref, est) == -SI_SDR_CAP_DB

    def test_constructed_zero_db_pair(self):
        # residual power equals projected power -> exactly 0 dB
        rng = np.random.default_rng(1)
        ref = rng.standard_normal(600)
        noise = rng.standard_normal(600)
        noise -= (noise @ ref) / (ref @ ref) * ref  # orthogonalize
        noise *= np.linalg.norm(ref) / np.linalg.norm(noise)
        assert abs(si_sdr(ref, ref + noise)) <= 1e-9

    def test_known_ten_db_value(self):
        rng = np.random.default_rng(2)
        ref = rng.standard_normal(600)
        noise = rng.standard_normal(600)
        noise -= (noise @ ref) / (ref @ ref) * ref
        noise *= np.linalg.norm(ref) / np.linalg.norm(noise) / np.sqrt(10.0)
        assert abs(si_sdr(ref, ref + noise) - 10.0) <= 1e-9

    def test_zero_reference_rejected(self):
        with pytest.raises(DataError):
            si_sdr(np.zeros(10), np.ones(10))

    def test_length_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            si_sdr(np.ones(5), np.ones(6))


class TestLsd:
    def test_matches_scalar_loop_oracle(self):
        rng = np.random.default_rng(3)
        for shape in ((3, 4), (10, 7), (1, 257)):
            ref = rng.standard_normal(shape)
            est = rng.standard_normal(shape)
            assert abs(log_spectral_distance(ref, est) - lsd_scalar_loop(ref, est)) <= 1e-12

    def test_zero_for_identical_frames(self):
        x = np.random.default_rng(4).standard_normal((5, 6))
        assert log_spectral_distance(x, x) == 0.0

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            log_spectral_distance(np.zeros((2, 3)), np.zeros((3, 2)))


def toy_report(families=("a", "b"), grid=(0.0, 3.0), base=1.0):
    cells = {}
    for i, fam in enumerate(families):
        for j, snr in enumerate(grid):
            v = base + i + 0.25 * j
            cells[(fam, snr)] = {"mse": v, "si_sdr_db": -v, "lsd_db": 2 * v}
    return EvalReport.from_cells(families, grid, cells)


class TestEvalReport:
    def test_averages_are_cell_means(self):
        rep = toy_report()
        avg = rep.family_average("a")
        want = np.mean([rep.cell("a", 0.0)["mse"], rep.cell("a", 3.0)["mse"]])
        assert abs(avg["mse"] - want) <= 1e-12

    def test_missing_cell_rejected(self):
        rep = toy_report()
        cells = dict(rep.cells)
        del cells[("b", 3.0)]
        with pytest.raises(ConfigError):
            EvalReport(rep.families, rep.snr_grid_db, cells, rep.averages)

    def test_tampered_average_rejected(self):
        rep = toy_report()
        bad = {f: dict(a) for f, a in rep.averages.items()}
        bad["a"]["mse"] += 1e-6
        with pytest.raises(ConfigError):
            EvalReport(rep.families, rep.snr_grid_db, rep.cells, bad)

    def test_overall_mean(self):
        rep = toy_report()
        vals = [rep.cell(f, s)["lsd_db"] for f in rep.families for s in rep.snr_grid_db]
        assert abs(rep.overall()["lsd_db"] - np.mean(vals)) <= 1e-12

    def test_csv_has_avg_rows_and_exact_floats(self, tmp_path):
        rep = toy_report(base=1 / 3)
        path = tmp_path / "report.csv"
        rep.to_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "family,snr_db," + ",".join(METRIC_KEYS)
        avg_lines = [l for l in lines if ",Avg," in l]
        assert len(avg_lines) == len(rep.families)
        # repr round-trip: parse a data row back to the exact float
        first = lines[1].split(",")
        assert float(first[2]) == rep.cell("a", 0.0)["mse"]

    def test_json_round_trip(self, tmp_path):
        rep = toy_report(base=np.pi)
        path = tmp_path / "report.json"
        rep.to_json(path)
        back = EvalReport.from_json(path)
        assert back.families == rep.families
        assert back.snr_grid_db == rep.snr_grid_db
        for key, cell in rep.cells.items():
            assert back.cells[key] == cell


@pytest.fixture(scope="module")
def corpus():
    cfg = CorpusConfig(
        utterance_seconds=0.3,
        source_utterances=2,
        source_eval_utterances=1,
        target_train_utterances=2,
        eval_utterances_per_cell=1,
        snr_grid_db=(-3.0, 3.0),
        clean_generators=("harmonic-voice-like",),  # comparable cells
        seed=5,
    )
    return build_corpus(cfg)


class TestEvaluate:
    def test_noisy_passthrough_orders_by_snr(self, corpus):
        rep = evaluate(None, corpus)
        fam = corpus.config.target_families[0]
        # more noise, worse fit to the clean frames
        assert rep.cell(fam, -3.0)["mse"] > rep.cell(fam, 3.0)["mse"]
        assert rep.cell(fam, -3.0)["lsd_db"] > rep.cell(fam, 3.0)["lsd_db"]

    def test_noisy_passthrough_si_sdr_tracks_mixing_snr(self, corpus):
        # the unprocessed mixture's SI-SDR sits close to the mixing SNR
        rep = evaluate(None, corpus)
        fam = corpus.config.target_families[0]
        for snr in corpus.config.snr_grid_db:
            assert abs(rep.cell(fam, snr)["si_sdr_db"] - snr) < 1.0

    def test_oracle_scores_saturate(self, corpus):
        rep = evaluate("oracle", corpus)
        for snr in corpus.config.snr_grid_db:
            cell = rep.cell(corpus.config.target_families[0], snr)
            assert cell["mse"] == 0.0
            assert cell["lsd_db"] == 0.0
            # clean frames + noisy phase still reconstruct most of the wave
            assert cell["si_sdr_db"] > 0.0

    def test_network_estimator_produces_full_report(self, corpus):
        cfg = corpus.config
        net = Network.create([cfg.input_dim, 8, cfg.n_bins], ["relu", "linear"],
                             np.random.default_rng(0))
        rep = evaluate(net, corpus)
        assert set(rep.cells) == {
            (f, s) for f in cfg.target_families for s in cfg.snr_grid_db
        }
        for cell in rep.cells.values():
            for key in METRIC_KEYS:
                assert np.isfinite(cell[key])
