import json
import subprocess
import sys

import numpy as np
import pytest

from dncshap.cli import main as _main
from dncshap.formats import read_matrix_csv, write_matrix_csv, write_ppm, write_wav
from dncshap.fusion import load_model


def main(args):
    return _main([str(a) for a in args])


@pytest.fixture(scope="session")
def trained(tmp_path_factory):
    out = tmp_path_factory.mktemp("train")
    assert main(["train", "--seed", "7", "--epochs", "2", "--input-size", "16", "--samples", "32",
                 "--batch-size", "8", "--lr", "1e-3", "--out", str(out)]) == 0
    return out


@pytest.fixture(scope="session")
def media(tmp_path_factory):
    d = tmp_path_factory.mktemp("media")
    rng = np.random.default_rng(0)
    write_ppm(d / "face.ppm", rng.integers(0, 256, (16, 16, 3)))
    t = np.arange(16000) / 16000
    write_wav(d / "clip.wav", 0.3 * np.sin(2 * np.pi * 440 * t) * (t > 0.5), 16000)
    (d / "align.json").write_text(json.dumps([
        {"word": "quiet", "start": 0.05, "end": 0.45}, {"word": "loud", "start": 0.55, "end": 0.95},
    ]))
    return d


def test_train_outputs(trained):
    lines = (trained / "model.history.csv").read_text().splitlines()
    assert lines[0] == "epoch,train_loss,train_acc,val_loss,val_acc,lr" and len(lines) == 3
    assert load_model(trained / "model.ckpt").config.seed == 7


def test_train_five_epochs_and_topologies(tmp_path):
    common = ["--seed", "7", "--input-size", "8", "--samples", "16", "--batch-size", "8"]
    assert main(["train", *common, "--epochs", "5", "--out", str(tmp_path / "a")]) == 0
    assert len((tmp_path / "a" / "model.history.csv").read_text().splitlines()) == 6
    assert main(["train", *common, "--epochs", "1", "--topology", "baseline3", "--out", str(tmp_path / "b")]) == 0
    assert main(["train", *common, "--epochs", "1", "--topology", "proposed", "--out", str(tmp_path / "c")]) == 0
    b, c = (tmp_path / "b" / "model.ckpt").read_bytes(), (tmp_path / "c" / "model.ckpt").read_bytes()
    assert b != c
    assert load_model(tmp_path / "b" / "model.ckpt").config.topology == "baseline3_crisscross_after"
    assert load_model(tmp_path / "c" / "model.ckpt").config.topology == "proposed"


def test_train_same_seed_identical_history(tmp_path):
    common = ["train", "--seed", "3", "--input-size", "8", "--samples", "16", "--batch-size", "8", "--epochs", "2"]
    main([*common, "--out", str(tmp_path / "x")])
    main([*common, "--out", str(tmp_path / "y")])
    assert (tmp_path / "x" / "model.history.csv").read_bytes() == (tmp_path / "y" / "model.history.csv").read_bytes()
    assert (tmp_path / "x" / "model.ckpt").read_bytes() == (tmp_path / "y" / "model.ckpt").read_bytes()


def test_train_with_config_and_npz(tmp_path):
    (tmp_path / "m.cfg").write_text("topology = image_only\nheight = 8\nwidth = 8\nplain_filters = 2,2,2\n"
                                    "backbone_filters = 2,2,2\nembed_width = 4\nhead_width = 4\nn_classes = 2\n")
    rng = np.random.default_rng(0)
    np.savez(tmp_path / "d.npz", images=rng.uniform(size=(10, 8, 8, 3)), speech=rng.uniform(size=(10, 8, 8, 1)),
             labels=rng.integers(0, 2, 10))
    assert main(["train", "--seed", "1", "--epochs", "1", "--config", str(tmp_path / "m.cfg"),
                 "--data", str(tmp_path / "d.npz"), "--out", str(tmp_path / "o"), "--name", "ab"]) == 0
    assert load_model(tmp_path / "o" / "ab.ckpt").config.topology == "image_only"
    np.savez(tmp_path / "bad.npz", images=np.zeros((2, 8, 8, 3)))
    assert main(["train", "--seed", "1", "--data", str(tmp_path / "bad.npz"), "--out", str(tmp_path / "o")]) == 1


def test_attribute_full(trained, media, tmp_path):
    out = tmp_path / "att"
    code = main(["attribute", "--checkpoint", trained / "model.ckpt", "--image", media / "face.ppm",
                 "--wav", media / "clip.wav", "--alignment", media / "align.json", "--gt", "happy",
                 "--seed", "1", "--times", "6", "--out", out])
    assert code == 0
    summary = json.loads((out / "face.json").read_text())
    assert summary["GT"] == "happy" and summary["P"] in ("anger", "happy", "hate", "sad")
    assert summary["Score"] == summary["pred_f"] == max(summary["probs"])
    assert summary["effective_depth"] == 6 and summary["eval_count"] <= 256
    img = read_matrix_csv(out / "face.img.csv")
    spc = read_matrix_csv(out / "face.spc.csv")
    assert img.sum() == pytest.approx(summary["score_1"], abs=1e-9)
    assert spc.sum() == pytest.approx(summary["score_2"], abs=1e-9)
    assert summary["score_1"] + summary["score_2"] == pytest.approx(summary["pred_f"] - summary["pred_b"], abs=1e-9)
    assert (out / "face.words.txt").read_text().splitlines() == summary["words"]
    for suffix in ("img.pgm", "spc.pgm"):
        assert (out / f"face.{suffix}").read_bytes().startswith(b"P5\n16 16\n255\n")


def test_attribute_times_zero_without_alignment(trained, media, tmp_path):
    out = tmp_path / "z"
    assert main(["attribute", "--checkpoint", trained / "model.ckpt", "--image", media / "face.ppm",
                 "--wav", media / "clip.wav", "--seed", "1", "--times", "0", "--out", out, "--stem", "s"]) == 0
    summary = json.loads((out / "s.json").read_text())
    assert "words" not in summary and not (out / "s.words.txt").exists()
    np.testing.assert_allclose(read_matrix_csv(out / "s.img.csv"), summary["score_1"] / 256, atol=1e-15)


def test_attribute_from_spectrogram_csv(trained, media, tmp_path):
    write_matrix_csv(tmp_path / "spec.csv", np.random.default_rng(2).uniform(size=(16, 16)))
    args = ["attribute", "--checkpoint", trained / "model.ckpt", "--image", media / "face.ppm",
            "--spectrogram", tmp_path / "spec.csv", "--seed", "1", "--times", "2", "--out", tmp_path / "o"]
    assert main(args) == 0
    assert main([*args, "--alignment", media / "align.json"]) == 1  # no frame duration
    assert main([*args, "--alignment", media / "align.json", "--frame-duration", "0.0625"]) == 0


def test_attribute_user_errors(trained, media, tmp_path, capsys):
    base = ["attribute", "--checkpoint", trained / "model.ckpt", "--seed", "1", "--out", tmp_path]
    write_ppm(tmp_path / "big.ppm", np.zeros((20, 20, 3)))
    assert main([*base, "--image", tmp_path / "big.ppm", "--wav", media / "clip.wav"]) == 1
    assert "model expects" in capsys.readouterr().err
    assert main([*base, "--image", media / "face.ppm"]) == 1
    assert main([*base, "--image", tmp_path / "missing.ppm", "--wav", media / "clip.wav"]) == 1
    (tmp_path / "bad.ckpt").write_bytes(b"garbage")
    assert main(["attribute", "--checkpoint", tmp_path / "bad.ckpt", "--image", media / "face.ppm",
                 "--wav", media / "clip.wav", "--seed", "1", "--out", tmp_path]) == 1
    assert main(["attribute", "--checkpoint", trained / "model.ckpt", "--image", media / "face.ppm"]) == 1


def test_label_command(tmp_path, capsys):
    rows = ["sample_id,s0,s1,s2,s3,i0,i1,i2,i3", "ex,0.1,0.1,0.7,0.1,0.1,0.8,0.05,0.05"]
    rows += [f"u{i},0.25,0.25,0.25,0.25,0.25,0.25,0.25,0.25" for i in range(4)]
    rows += [f"s{i},0.9,0.05,0.05,0,0.25,0.25,0.25,0.25" for i in range(5)]
    (tmp_path / "p.csv").write_text("\n".join(rows) + "\n")
    assert main(["label", "--input", tmp_path / "p.csv", "--out", tmp_path / "o"]) == 0
    stats = json.loads((tmp_path / "o" / "stats.json").read_text())
    assert stats["total"] == 10 and stats["discarded"] == 4
    assert stats["counts"] == {"anger": 5, "happy": 1, "hate": 0, "sad": 0}
    (tmp_path / "bad.csv").write_text(rows[0] + "\nx,1,2\n" + rows[1] + "\n")
    assert main(["label", "--input", tmp_path / "bad.csv", "--out", tmp_path / "b"]) == 1
    assert "bad.csv:2" in capsys.readouterr().err
    assert json.loads((tmp_path / "b" / "stats.json").read_text())["total"] == 1


def test_eval_command(tmp_path):
    (tmp_path / "t.csv").write_text("sample_id,label\n" + "".join(f"s{i},{c}\n" for i, c in enumerate("aaaabbbb")))
    (tmp_path / "p.csv").write_text("sample_id,label\n" + "".join(f"s{i},{c}\n" for i, c in enumerate("aaabbbba")))
    (tmp_path / "q.csv").write_text("".join(f"{c}\n" for c in "bbbbaaaa"))
    assert main(["eval", "--predictions", tmp_path / "p.csv", "--labels", tmp_path / "t.csv",
                 "--out", tmp_path / "m.json"]) == 0
    rep = json.loads((tmp_path / "m.json").read_text())
    assert rep["confusion"] == [[3, 1], [1, 3]] and rep["cohen_kappa"] == pytest.approx(0.5)
    assert main(["eval", "--predictions", tmp_path / "t.csv", "--labels", tmp_path / "t.csv",
                 "--out", tmp_path / "same.json"]) == 0
    assert json.loads((tmp_path / "same.json").read_text())["accuracy"] == 1.0
    assert main(["eval", "--predictions", tmp_path / "q.csv", "--labels", tmp_path / "t.csv",
                 "--out", tmp_path / "dis.json"]) == 0
    assert json.loads((tmp_path / "dis.json").read_text())["accuracy"] == 0.0
    (tmp_path / "short.csv").write_text("a\nb\n")
    assert main(["eval", "--predictions", tmp_path / "short.csv", "--labels", tmp_path / "t.csv"]) == 1


def test_spectrogram_command(media, tmp_path):
    assert main(["spectrogram", "--wav", media / "clip.wav", "--out", tmp_path / "s.csv", "--pgm", tmp_path / "s.pgm",
                 "--n-mels", "32", "--n-frames", "20", "--fft-size", "512"]) == 0
    spec = read_matrix_csv(tmp_path / "s.csv")
    assert spec.shape == (32, 20) and spec.min() == 0.0 and spec.max() == 1.0
    assert not spec[:, :8].any() or spec[:, :8].max() < spec[:, 12:].max()


def test_usage_error_exit_code():
    assert subprocess.run([sys.executable, "-m", "dncshap", "train"], capture_output=True).returncode == 1
    assert subprocess.run([sys.executable, "-m", "dncshap", "--help"], capture_output=True).returncode == 0


def test_internal_error_exit_code(monkeypatch, media, trained, tmp_path):
    import dncshap.cli as cli

    def boom(*a, **k):
        raise RuntimeError("kaboom")

    monkeypatch.setattr(cli, "dnc_shap", boom)
    assert main(["attribute", "--checkpoint", str(trained / "model.ckpt"), "--image", str(media / "face.ppm"),
                 "--wav", str(media / "clip.wav"), "--seed", "1", "--out", str(tmp_path)]) == 2
