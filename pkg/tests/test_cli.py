import pytest

from dualign.cli import main
from dualign.config import parse_config_file, resolve, to_text
from dualign.errors import ConfigError


GEN_FLAGS = ["--pairs", "64", "--latent-dim", "8", "--feature-dim", "16",
             "--image-dim", "12", "--text-teacher-dim", "20", "--seed", "9"]
TRAIN_FLAGS = ["--steps", "6", "--eval-every", "3", "--batch-size", "16",
               "--holdout", "16", "--hidden-dim", "32", "--text-dim", "24",
               "--shared-dim", "12"]


@pytest.fixture
def workdir(tmp_path):
    data = tmp_path / "data"
    out = tmp_path / "out"
    rc = main(["gen-synth", *GEN_FLAGS, "--data-dir", str(data)])
    assert rc == 0
    return {"data": data, "out": out, "tmp": tmp_path}


class TestConfig:
    def test_defaults_file_flags_precedence(self, tmp_path):
        cfg_file = tmp_path / "run.cfg"
        cfg_file.write_text("tau = 0.2  # comment\nsteps = 7\n")
        values = parse_config_file(cfg_file)
        cfg = resolve(values, {"steps": 9})
        assert cfg["tau"] == 0.2
        assert cfg["steps"] == 9
        assert cfg["mu"] == 0.2  # default untouched

    def test_unknown_key_is_hard_error(self, tmp_path):
        cfg_file = tmp_path / "run.cfg"
        cfg_file.write_text("taus = 0.2\n")
        with pytest.raises(ConfigError):
            parse_config_file(cfg_file)

    def test_resolved_text_round_trips(self, tmp_path):
        cfg = resolve({}, {"tau": 0.07, "reshuffle_per_epoch": True})
        cfg_file = tmp_path / "echo.cfg"
        cfg_file.write_text(to_text(cfg))
        assert resolve(parse_config_file(cfg_file), {}) == cfg


class TestGenSynth:
    def test_writes_files_and_manifest(self, workdir):
        files = sorted(p.name for p in workdir["data"].glob("*.emb"))
        assert len(files) == 5
        assert (workdir["data"] / "manifest.txt").exists()

    def test_deterministic_bytes(self, tmp_path):
        d1, d2 = tmp_path / "a", tmp_path / "b"
        for d in (d1, d2):
            assert main(["gen-synth", *GEN_FLAGS, "--data-dir", str(d)]) == 0
        for p1 in sorted(d1.glob("*.emb")):
            p2 = d2 / p1.name
            assert p1.read_bytes() == p2.read_bytes()

    def test_pairs_one_usage_error(self, tmp_path):
        rc = main(["gen-synth", "--pairs", "1", "--data-dir", str(tmp_path / "d")])
        assert rc == 1


class TestTrainCmd:
    def test_train_writes_outputs(self, workdir):
        rc = main(["train", *GEN_FLAGS, *TRAIN_FLAGS,
                   "--data-dir", str(workdir["data"]),
                   "--out-dir", str(workdir["out"])])
        assert rc == 0
        assert (workdir["out"] / "checkpoint.dalc").exists()
        assert (workdir["out"] / "history.tsv").exists()
        assert (workdir["out"] / "resolved.cfg").exists()

    def test_resolved_config_reproduces_run(self, workdir):
        out1 = workdir["tmp"] / "o1"
        out2 = workdir["tmp"] / "o2"
        rc = main(["train", *GEN_FLAGS, *TRAIN_FLAGS,
                   "--data-dir", str(workdir["data"]), "--out-dir", str(out1)])
        assert rc == 0
        # feed the echoed config back with no flags (except out dir)
        rc = main(["train", "--config", str(out1 / "resolved.cfg"),
                   "--out-dir", str(out2)])
        assert rc == 0
        h1 = (out1 / "history.tsv").read_bytes()
        h2 = (out2 / "history.tsv").read_bytes()
        assert h1 == h2

    def test_lambda_mu_zero_total_equals_info(self, workdir):
        out = workdir["tmp"] / "abl"
        rc = main(["train", *GEN_FLAGS, *TRAIN_FLAGS, "--lambda", "0", "--mu", "0",
                   "--data-dir", str(workdir["data"]), "--out-dir", str(out)])
        assert rc == 0
        header, *rows = (out / "history.tsv").read_text().strip().splitlines()
        cols = header.lstrip("#").split("\t")
        for row in rows:
            cells = dict(zip(cols, row.split("\t")))
            if cells["kind"] == "mm":
                assert abs(float(cells["l_total"]) - float(cells["l_info"])) <= 1e-12

    def test_steps_zero_boundary(self, workdir):
        out = workdir["tmp"] / "zero"
        rc = main(["train", *GEN_FLAGS, *TRAIN_FLAGS, "--steps", "0",
                   "--data-dir", str(workdir["data"]), "--out-dir", str(out)])
        assert rc == 0
        assert (out / "checkpoint.dalc").exists()


class TestEvalCmd:
    def test_eval_after_train(self, workdir):
        out = workdir["out"]
        assert main(["train", *GEN_FLAGS, *TRAIN_FLAGS,
                     "--data-dir", str(workdir["data"]), "--out-dir", str(out)]) == 0
        rc = main(["eval", *GEN_FLAGS, "--holdout", "16",
                   "--data-dir", str(workdir["data"]), "--out-dir", str(out)])
        assert rc == 0
        report = (out / "report.tsv").read_text()
        assert "spearman_x100" in report
        assert (out / "scatter.tsv").exists()

    def test_ground_truth_self_consistency(self, workdir):
        out = workdir["tmp"] / "gt"
        rc = main(["eval", *GEN_FLAGS, "--holdout", "16", "--use-ground-truth",
                   "--data-dir", str(workdir["data"]), "--out-dir", str(out)])
        assert rc == 0
        for line in (out / "report.tsv").read_text().splitlines():
            if line.startswith("spearman_x100"):
                assert float(line.split("\t")[1]) == pytest.approx(100.0, abs=1e-6)

    def test_untrained_checkpoint_low_spearman(self, workdir):
        # seed-42-style baseline: an untrained model must carry almost no signal
        out = workdir["tmp"] / "rand"
        assert main(["train", *GEN_FLAGS, *TRAIN_FLAGS, "--steps", "0",
                     "--data-dir", str(workdir["data"]), "--out-dir", str(out)]) == 0
        assert main(["eval", *GEN_FLAGS, "--holdout", "16",
                     "--data-dir", str(workdir["data"]), "--out-dir", str(out)]) == 0
        for line in (out / "report.tsv").read_text().splitlines():
            if line.startswith("spearman_x100"):
                assert abs(float(line.split("\t")[1])) < 40  # small dev set, loose

    def test_report_matches_printed(self, workdir, capsys):
        out = workdir["tmp"] / "rt"
        assert main(["train", *GEN_FLAGS, *TRAIN_FLAGS,
                     "--data-dir", str(workdir["data"]), "--out-dir", str(out)]) == 0
        assert main(["eval", *GEN_FLAGS, "--holdout", "16",
                     "--data-dir", str(workdir["data"]), "--out-dir", str(out)]) == 0
        printed = capsys.readouterr().out
        file_lines = (out / "report.tsv").read_text().strip().splitlines()[1:]
        for line in file_lines:
            assert line in printed

    def test_direct_embedding_mode(self, workdir):
        out = workdir["tmp"] / "direct"
        pred = workdir["data"] / "text_teacher_0.emb"
        pos = workdir["data"] / "text_teacher_1.emb"
        rc = main(["eval", "--pred", str(pred), "--pos", str(pos),
                   "--out-dir", str(out)])
        assert rc == 0
        assert (out / "report.tsv").exists()


class TestGradcheckCmd:
    def test_default_run_passes(self, capsys):
        assert main(["gradcheck"]) == 0
        out = capsys.readouterr().out
        assert out.count(" ok") == 7

    def test_loss_filter(self, capsys):
        assert main(["gradcheck", "--loss", "listmle"]) == 0
        out = capsys.readouterr().out
        assert "listmle" in out and "text_infonce" not in out

    def test_unknown_loss_exit_code(self):
        assert main(["gradcheck", "--loss", "bogus"]) == 1


class TestExitCodes:
    def test_missing_manifest_io_error(self, tmp_path):
        rc = main(["train", "--data-dir", str(tmp_path / "nope")])
        assert rc == 3

    def test_bad_config_value(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("steps = banana\n")
        rc = main(["train", "--config", str(cfg)])
        assert rc == 1
