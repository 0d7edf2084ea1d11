"""Benchmark harness: IDX ingestion, grid costs, baseline, runner, CLI."""

import json
import struct

import numpy as np
import pytest

from eurot.bench.cli import main as cli_main
from eurot.bench.data import (
    IdxFormatError,
    grid_cost,
    load_idx,
    synthetic_digit_pair,
    write_idx3,
)
from eurot.bench.entropy import EntropyNumericalError, entropy_sinkhorn
from eurot.bench.experiment import (
    CSV_COLUMNS,
    ExperimentConfig,
    parse_selector,
    run_experiment,
)
from eurot.core import CostMatrix, Measure

from conftest import random_problem, random_simplex


@pytest.fixture
def digit_file(tmp_path):
    path = tmp_path / "digits.idx3"
    write_idx3(path, synthetic_digit_pair())
    return path


@pytest.fixture
def tiny_file(tmp_path):
    """Two 3x3 images with distinct masses, small enough for fast sweeps."""
    imgs = np.array(
        [
            [[255, 0, 0], [0, 128, 0], [0, 0, 64]],
            [[0, 32, 0], [64, 0, 32], [0, 255, 0]],
        ],
        dtype=np.uint8,
    )
    path = tmp_path / "tiny.idx3"
    write_idx3(path, imgs)
    return path


class TestLoadIdx:
    def test_roundtrip_matches_byte_reader(self, digit_file):
        im = load_idx(digit_file, 1)
        raw = digit_file.read_bytes()
        magic, count, h, w = struct.unpack(">IIII", raw[:16])
        assert (magic, count, h, w) == (0x803, 2, 28, 28)
        start = 16 + 1 * h * w
        pixels = np.frombuffer(raw[start : start + h * w], dtype=np.uint8).astype(float)
        np.testing.assert_allclose(im.measure.weights, pixels / pixels.sum(), atol=1e-15)
        assert abs(im.measure.weights.sum() - 1.0) < 1e-12

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.idx3"
        path.write_bytes(struct.pack(">IIII", 0x801, 1, 2, 2) + b"\x01" * 4)
        with pytest.raises(IdxFormatError, match="bad magic 0x00000801"):
            load_idx(path, 0)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "short.idx3"
        path.write_bytes(b"\x00\x00\x08")
        with pytest.raises(IdxFormatError, match="truncated header"):
            load_idx(path, 0)

    def test_truncated_payload_reports_offsets(self, tmp_path):
        path = tmp_path / "cut.idx3"
        path.write_bytes(struct.pack(">IIII", 0x803, 2, 2, 2) + b"\x01" * 5)
        with pytest.raises(IdxFormatError, match="offset 21"):
            load_idx(path, 0)

    def test_index_out_of_range(self, digit_file):
        with pytest.raises(IdxFormatError, match="out of range"):
            load_idx(digit_file, 2)

    def test_zero_image_rejected(self, tmp_path):
        imgs = np.zeros((1, 2, 2), dtype=np.uint8)
        path = tmp_path / "zero.idx3"
        write_idx3(path, imgs)
        with pytest.raises(IdxFormatError, match="zero total mass"):
            load_idx(path, 0)

    def test_single_lit_pixel_is_dirac(self, tmp_path):
        imgs = np.zeros((1, 3, 3), dtype=np.uint8)
        imgs[0, 1, 2] = 255
        path = tmp_path / "dirac.idx3"
        write_idx3(path, imgs)
        im = load_idx(path, 0)
        expected = np.zeros(9)
        expected[1 * 3 + 2] = 1.0
        np.testing.assert_array_equal(im.measure.weights, expected)


class TestGridCost:
    def test_two_pixel_line(self):
        c = grid_cost(1, 2, normalise=False)
        np.testing.assert_allclose(c.entries, [[0.0, 1.0], [1.0, 0.0]], atol=1e-15)

    def test_two_by_two_normalisation(self):
        raw = grid_cost(2, 2, normalise=False)
        assert raw.max_abs == pytest.approx(np.sqrt(2.0), abs=1e-15)
        normed = grid_cost(2, 2, normalise=True)
        assert normed.max_abs == pytest.approx(1.0, abs=1e-15)

    def test_matches_direct_recomputation(self):
        h, w = 3, 4
        c = grid_cost(h, w, normalise=False).entries
        for p in range(h * w):
            for q in range(h * w):
                r1, c1 = divmod(p, w)
                r2, c2 = divmod(q, w)
                assert c[p, q] == pytest.approx(
                    np.hypot(r1 - r2, c1 - c2), abs=1e-12
                )

    def test_mnist_grid_properties(self):
        c = grid_cost(28, 28, normalise=False)
        e = c.entries
        assert e.shape == (784, 784)
        assert np.array_equal(e, e.T)
        assert np.all(np.diag(e) == 0.0)
        assert c.max_abs == pytest.approx(27 * np.sqrt(2.0), abs=1e-12)


class TestEntropySinkhorn:
    def test_zero_cost_gives_independent_coupling(self, rng):
        a = Measure(random_simplex(rng, 3))
        b = Measure(random_simplex(rng, 4))
        res = entropy_sinkhorn(a, b, CostMatrix(np.zeros((3, 4))), 0.5, 1e-10, trace=False)
        assert res.converged
        assert res.iterations <= 2
        np.testing.assert_allclose(
            res.plan.entries, np.outer(a.weights, b.weights), atol=1e-10
        )

    def test_random_instance_reaches_marginal_tolerance(self):
        p = random_problem(21, n=5, m=5)
        res = entropy_sinkhorn(p.a, p.b, p.cost, 0.1, 1e-8, trace=True)
        assert res.converged
        last = res.trace[-1].residuals
        assert last.row_l1 + last.col_l1 <= 1e-8
        # the scaled plan minimises the Lagrangian, so the primal-dual gap is
        # exactly the multiplier-weighted residual and vanishes at feasibility
        scale = max(np.abs(res.dual.lam).max(), np.abs(res.dual.mu).max())
        assert abs(res.trace[-1].gap) <= scale * (last.row_l1 + last.col_l1) + 1e-12

    def test_plain_kernel_overflows_at_tiny_gamma(self):
        p = random_problem(22, n=4, m=4)
        with pytest.raises(EntropyNumericalError, match="non-finite"):
            entropy_sinkhorn(p.a, p.b, p.cost, 1e-6, 1e-6, log_domain=False)

    def test_log_domain_survives_tiny_gamma(self):
        p = random_problem(22, n=4, m=4)
        res = entropy_sinkhorn(p.a, p.b, p.cost, 1e-6, 1e-6, max_iter=2000, trace=False)
        assert np.isfinite(res.plan.entries).all()

    def test_zero_marginals_give_zero_rows(self):
        p = random_problem(23, n=5, m=5, zeros=(1, 1))
        res = entropy_sinkhorn(p.a, p.b, p.cost, 0.2, 1e-9, trace=False)
        assert res.converged
        zero_rows = p.a.weights == 0
        np.testing.assert_allclose(res.plan.entries[zero_rows], 0.0, atol=1e-15)
        assert np.isfinite(res.dual.lam).all()


class TestExperiment:
    def test_selector_parsing(self):
        assert parse_selector("data/train.idx3:17") == ("data/train.idx3", 17)
        with pytest.raises(ValueError, match="path:index"):
            parse_selector("no-colon")
        with pytest.raises(ValueError, match="non-integer"):
            parse_selector("file:abc")

    def test_config_validation(self, tiny_file, tmp_path):
        base = dict(
            source=f"{tiny_file}:0", target=f"{tiny_file}:1",
            epsilons=[0.1], methods=["aam"], seeds=[0], out=str(tmp_path / "o"),
        )
        ExperimentConfig.from_dict(base)
        with pytest.raises(ValueError, match="missing config keys"):
            ExperimentConfig.from_dict({k: v for k, v in base.items() if k != "out"})
        with pytest.raises(ValueError, match="unknown config keys"):
            ExperimentConfig.from_dict(dict(base, extra=1))
        with pytest.raises(ValueError, match="unknown methods"):
            ExperimentConfig.from_dict(dict(base, methods=["bfgs"]))
        with pytest.raises(ValueError, match="epsilon"):
            ExperimentConfig.from_dict(dict(base, epsilons=[]))

    def test_csv_and_summary_contract(self, tiny_file, tmp_path):
        out = tmp_path / "runs"
        cfg = ExperimentConfig(
            source=f"{tiny_file}:0", target=f"{tiny_file}:1",
            epsilons=[0.1], methods=["apdagd"], seeds=[0], out=str(out),
        )
        summaries = run_experiment(cfg)
        assert len(summaries) == 1
        csv_path = out / "apdagd_eps0.1_seed0.csv"
        lines = csv_path.read_text().splitlines()
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert len(lines) == 1 + summaries[0]["iterations"]
        first = lines[1].split(",")
        assert len(first) == len(CSV_COLUMNS)
        assert first[0] == "0"
        with open(out / "apdagd_eps0.1_seed0.json") as fh:
            summary = json.load(fh)
        assert summary["converged"] is True
        assert 0.0 <= summary["sparsity"] <= 1.0
        assert summary["error"] is None
        assert (out / "index.json").exists()

    def test_reproducible_mode_is_byte_identical(self, tiny_file, tmp_path):
        outs = []
        for run in ("first", "second"):
            out = tmp_path / run
            cfg = ExperimentConfig(
                source=f"{tiny_file}:0", target=f"{tiny_file}:1",
                epsilons=[0.2], methods=["euclid-sinkhorn", "apdagd", "aam", "clvr",
                                          "entropy-sinkhorn"],
                seeds=[5], out=str(out),
            )
            run_experiment(cfg)
            outs.append(out)
        for csv in sorted(outs[0].glob("*.csv")):
            twin = outs[1] / csv.name
            assert csv.read_bytes() == twin.read_bytes(), csv.name

    def test_failures_do_not_abort_siblings(self, tiny_file, tmp_path):
        out = tmp_path / "mixed"
        # printed-step apdagd stalls with a line-search error; aam still runs
        cfg = ExperimentConfig(
            source=f"{tiny_file}:0", target=f"{tiny_file}:1",
            epsilons=[1e-4], methods=["apdagd", "aam"], seeds=[0], out=str(out),
            fidelity="printed", max_iter=20_000,
        )
        summaries = run_experiment(cfg)
        by_method = {s["method"]: s for s in summaries}
        assert by_method["apdagd"]["error"] is not None
        assert by_method["aam"]["error"] is None

    def test_mismatched_grids_rejected(self, tiny_file, digit_file, tmp_path):
        cfg = ExperimentConfig(
            source=f"{tiny_file}:0", target=f"{digit_file}:0",
            epsilons=[0.1], methods=["aam"], seeds=[0], out=str(tmp_path / "x"),
        )
        with pytest.raises(ValueError, match="grids differ"):
            run_experiment(cfg)


class TestCli:
    def test_solve_converges_exit_zero(self, tiny_file, tmp_path, capsys):
        rc = cli_main([
            "solve", "--method", "aam", "--epsilon", "0.1",
            "--source-idx", f"{tiny_file}:0", "--target-idx", f"{tiny_file}:1",
            "--out", str(tmp_path / "solve_out"),
        ])
        assert rc == 0
        assert "converged" in capsys.readouterr().out

    def test_solve_budget_exhaustion_exit_two(self, tiny_file, tmp_path):
        rc = cli_main([
            "solve", "--method", "clvr", "--epsilon", "0.0001",
            "--source-idx", f"{tiny_file}:0", "--target-idx", f"{tiny_file}:1",
            "--max-iters", "5", "--out", str(tmp_path / "slow_out"),
        ])
        assert rc == 2

    def test_usage_error_exit_one(self, capsys):
        rc = cli_main(["solve", "--method", "nope", "--epsilon", "0.1",
                       "--source-idx", "a:0", "--target-idx", "b:0", "--out", "o"])
        assert rc == 1
        assert "error" in capsys.readouterr().err

    def test_missing_file_exit_one(self, tmp_path, capsys):
        rc = cli_main([
            "solve", "--method", "aam", "--epsilon", "0.1",
            "--source-idx", f"{tmp_path}/absent.idx3:0",
            "--target-idx", f"{tmp_path}/absent.idx3:1",
            "--out", str(tmp_path / "o"),
        ])
        assert rc == 1

    def test_oracle_lp(self, tmp_path, capsys):
        inst = tmp_path / "inst.json"
        inst.write_text(json.dumps({
            "a": [0.5, 0.5], "b": [0.5, 0.5],
            "C": [[0.0, 1.0], [1.0, 0.0]],
        }))
        rc = cli_main(["oracle", "--lp", "--instance", str(inst)])
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["value"] == pytest.approx(0.0, abs=1e-12)

    def test_oracle_dual_writes_file(self, tmp_path):
        inst = tmp_path / "inst.json"
        inst.write_text(json.dumps({
            "a": [0.5, 0.5], "b": [0.5, 0.5],
            "C": [[0.0, 1.0], [1.0, 0.0]], "gamma": 0.5,
        }))
        out = tmp_path / "dual.json"
        rc = cli_main(["oracle", "--dual", "--instance", str(inst),
                       "--tol", "1e-8", "--out", str(out)])
        assert rc == 0
        payload = json.loads(out.read_text())
        assert len(payload["lam"]) == 2
        assert np.isfinite(payload["phi"])

    def test_experiment_subcommand(self, tiny_file, tmp_path, capsys):
        cfg = {
            "source": f"{tiny_file}:0", "target": f"{tiny_file}:1",
            "epsilons": [0.2], "methods": ["euclid-sinkhorn"], "seeds": [0],
            "out": str(tmp_path / "exp_out"),
        }
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        rc = cli_main(["experiment", "--config", str(cfg_path)])
        assert rc == 0
        assert "1 runs" in capsys.readouterr().out
