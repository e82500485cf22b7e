import numpy as np
import pytest

from dncshap.formats import (
    FormatError, format_matrix_csv, read_image, read_matrix_csv, read_pnm, read_wav, write_json, write_matrix_csv,
    write_pgm, write_ppm, write_wav,
)


def test_wav_roundtrip(tmp_path):
    x = np.sin(np.linspace(0, 20, 1000)) * 0.8
    write_wav(tmp_path / "a.wav", x, 8000)
    y, sr = read_wav(tmp_path / "a.wav")
    assert sr == 8000 and np.max(np.abs(x - y)) < 1e-4


def test_wav_stereo_downmix_and_bad_width(tmp_path):
    import wave

    with wave.open(str(tmp_path / "s.wav"), "wb") as wf:
        wf.setnchannels(2)
        wf.setsampwidth(2)
        wf.setframerate(16000)
        wf.writeframes(np.array([16384, 0, -16384, 16384], "<i2").tobytes())
    y, _ = read_wav(tmp_path / "s.wav")
    np.testing.assert_allclose(y, [0.25, 0.0])
    with wave.open(str(tmp_path / "b.wav"), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(1)
        wf.setframerate(16000)
        wf.writeframes(b"\x80\x80")
    with pytest.raises(FormatError):
        read_wav(tmp_path / "b.wav")
    (tmp_path / "junk.wav").write_bytes(b"nope")
    with pytest.raises(FormatError):
        read_wav(tmp_path / "junk.wav")


def test_pnm_roundtrip(tmp_path):
    rgb = np.arange(24, dtype=np.uint8).reshape(2, 4, 3)
    write_ppm(tmp_path / "a.ppm", rgb)
    img, maxval = read_pnm(tmp_path / "a.ppm")
    assert maxval == 255
    np.testing.assert_array_equal(img, rgb)
    write_pgm(tmp_path / "g.pgm", [[0, 255], [51, 102]])
    g = read_image(tmp_path / "g.pgm")
    assert g.shape == (2, 2, 3)
    np.testing.assert_allclose(g[..., 1], [[0, 1], [0.2, 0.4]])


def test_pnm_header_comments_and_errors(tmp_path):
    (tmp_path / "c.pgm").write_bytes(b"P5\n# hi\n2 1\n# x\n255\n\x01\x02")
    assert read_pnm(tmp_path / "c.pgm")[0].ravel().tolist() == [1, 2]
    (tmp_path / "t.pgm").write_bytes(b"P5\n2 2\n255\n\x01")
    with pytest.raises(FormatError):
        read_pnm(tmp_path / "t.pgm")
    (tmp_path / "p.ppm").write_bytes(b"P3\n1 1\n255\n1 2 3\n")
    with pytest.raises(FormatError):
        read_pnm(tmp_path / "p.ppm")
    (tmp_path / "d.pgm").write_bytes(b"P5\n1 1\n65535\n\x00\x00")
    with pytest.raises(FormatError):
        read_pnm(tmp_path / "d.pgm")


def test_matrix_csv(tmp_path):
    m = np.array([[0.1, -2.0], [1e-300, 3.0]])
    assert format_matrix_csv(m) == "0.1,-2.0\n1e-300,3.0\n"
    write_matrix_csv(tmp_path / "m.csv", m)
    np.testing.assert_array_equal(read_matrix_csv(tmp_path / "m.csv"), m)
    (tmp_path / "r.csv").write_text("1,2\n3\n")
    with pytest.raises(FormatError):
        read_matrix_csv(tmp_path / "r.csv")


def test_json_is_stable(tmp_path):
    write_json(tmp_path / "a.json", {"b": 1, "a": [1, 2]})
    assert (tmp_path / "a.json").read_text() == '{\n  "a": [\n    1,\n    2\n  ],\n  "b": 1\n}\n'
