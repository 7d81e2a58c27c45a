import numpy as np
import pytest

import sparq


def test_quantize_round_trip():
    assert sparq.quantize(1.5) == 384
    assert sparq.quantize(200.0) == 32767
    assert sparq.dequantize(384) == 1.5
    assert sparq.quantize(0.5, "Q2.14") == 8192


def test_codec_round_trip_and_sparsity():
    rng = np.random.default_rng(0)
    x = rng.integers(-300, 300, size=(3, 9, 7), dtype=np.int16)
    x[rng.random(x.shape) < 0.8] = 0
    blob = sparq.encode(x)
    assert blob[:4] == b"SMFM"
    back, fmt = sparq.decode(blob)
    assert fmt == "Q8.8"
    np.testing.assert_array_equal(back, x)
    s = sparq.sparsity(x)
    assert s["zero_pixels"] == int((x == 0).sum())
    assert len(s["per_channel_sparsity"]) == 3


def test_truncated_stream_raises():
    blob = sparq.encode(np.ones((1, 4, 4), dtype=np.int16))
    with pytest.raises(sparq.Error, match="offset"):
        sparq.decode(blob[:-1])


def test_qt_files(tmp_path):
    x = np.arange(12, dtype=np.int16).reshape(3, 4)
    sparq.write_qt(tmp_path / "x.qt", x, "Q4.12")
    back, fmt = sparq.read_qt(tmp_path / "x.qt")
    assert fmt == "Q4.12"
    np.testing.assert_array_equal(back, x)
    with pytest.raises(sparq.MissingArtifactError):
        sparq.read_qt(tmp_path / "absent.qt")


def test_cost_model():
    assert sparq.cost_trace("dram,0,read,weights,64\n")["cycles"] == 114
    assert sparq.random_vs_burst_ratio(1) == 1.0
    assert sparq.random_vs_burst_ratio(1 << 20, row_change_factor=1) == pytest.approx(2.0, rel=2e-3)
    with pytest.raises(sparq.Error):
        sparq.random_vs_burst_ratio(10, bogus=1)


def test_brain_budget():
    out = sparq.brain_budget(fanout=1e4, neurons=1e10, energy_per_syn_j=100e-15, power_w=10)
    assert out["rate_hz"] == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(sparq.Error):
        sparq.brain_budget(rate_hz=1.0)


def test_run_conv_dense_equals_sparse(tmp_path):
    net = tmp_path / "net.yaml"
    net.write_text(
        "name: py\ninput_shape: [2, 10, 10]\nlayers:\n"
        "  - {type: conv, in_c: 2, out_c: 4, k: 3, pad: 1, pool: max2x2, init: random}\n"
    )
    rng = np.random.default_rng(1)
    x = rng.integers(0, 512, size=(2, 10, 10), dtype=np.int16)
    x[rng.random(x.shape) < 0.7] = 0
    rs, ys = sparq.run(net, x, mode="sparse", seed=3)
    rd, yd = sparq.run(net, x, mode="dense", seed=3)
    np.testing.assert_array_equal(ys, yd)
    assert ys.shape == (4, 5, 5)
    assert rs["output_hash"] == rd["output_hash"]
    assert rs["ops"]["macs_executed"] < rd["ops"]["macs_executed"]
    with pytest.raises(sparq.ShapeError):
        sparq.run(net, np.zeros((3, 10, 10), dtype=np.int16))


def test_run_gru(tmp_path):
    net = tmp_path / "rnn.yaml"
    net.write_text("layers:\n  - {type: gru, input: 4, hidden: 6, init: random}\n")
    seq = np.repeat(np.arange(4, dtype=np.int16)[None, :] * 64, 12, axis=0)
    report, h = sparq.run(net, seq, theta=0.05)
    assert h.shape == (12, 6)
    assert report["recurrent"]["steps"] == 12
    assert report["recurrent"]["weight_bytes_fetched"] < report["recurrent"]["weight_bytes_dense"]
