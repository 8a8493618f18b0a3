import numpy as np
import pytest

from exprgan import dataio, objectives as obj
from exprgan.dataio import ValidationError


@pytest.fixture(scope="module")
def spec():
    return dataio.make_domain_spec(0)


def test_generation_is_byte_identical(tmp_path, spec):
    a = dataio.generate_dataset(tmp_path / "a", spec, clips_per_domain=2, length=30, seed=4)
    dataio.generate_dataset(tmp_path / "b", spec, clips_per_domain=2, length=30, seed=4)
    for name in ["manifest.json"] + [c.path for c in a.clips]:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_identity_domain_reproduces_content(spec):
    ident = dataio.DomainSpec(np.stack([np.eye(51)] * 2), np.zeros((2, 51)), spec.freqs, 0.0)
    ident.validate()
    content = dataio.content_signal(ident, 40, np.random.default_rng(1))
    clip = dataio.render_clip(ident, content, 1, np.random.default_rng(2))
    np.testing.assert_array_equal(clip, content)


def test_oracle_classifies_fresh_clips(spec):
    tracks, labels = dataio.synthesize_clips(spec, 3, 100, seed=11)
    assert [dataio.oracle_classify(t, spec) for t in tracks] == labels


def test_oracle_tie_goes_to_lowest_label(spec):
    twin = dataio.DomainSpec(np.stack([spec.maps[2]] * 3), np.stack([spec.offsets[2]] * 3),
                             spec.freqs, spec.noise)
    track = dataio.render_clip(twin, dataio.content_signal(twin, 60, np.random.default_rng(3)), 2,
                               np.random.default_rng(4))
    assert dataio.oracle_classify(track, twin) == 0


def test_jaw_channel_correlates_across_domains(spec):
    content = dataio.content_signal(spec, 100, np.random.default_rng(5))
    rng = np.random.default_rng(6)
    jaws = [dataio.render_clip(spec, content, y, rng)[:, 0] for y in range(7)]
    for i in range(7):
        for j in range(i + 1, 7):
            assert float(obj.pcc(jaws[i], jaws[j]).data[0, 0]) > 0.9


def test_spec_validation(spec):
    bad = dataio.DomainSpec(spec.maps.copy(), spec.offsets, spec.freqs)
    bad.maps[3, 0, 0] = -0.5
    with pytest.raises(ValidationError, match="jaw gain"):
        bad.validate()
    with pytest.raises(ValidationError):
        dataio.DomainSpec(spec.maps[:1], spec.offsets[:1], spec.freqs).validate()


def test_generate_rejects_short_clips(tmp_path, spec):
    with pytest.raises(ValidationError):
        dataio.generate_dataset(tmp_path, spec, clips_per_domain=1, length=5, n_window=10)


def test_track_round_trip(tmp_path):
    t = np.random.default_rng(7).normal(size=(12, 51)) * 10
    dataio.write_track(tmp_path / "t.csv", t)
    back = dataio.read_track(tmp_path / "t.csv")
    np.testing.assert_allclose(back, t, rtol=1e-8, atol=1e-7)


def test_read_track_without_header(tmp_path):
    (tmp_path / "t.csv").write_text("\n".join([",".join(["0.5"] * 51)] * 3) + "\n")
    assert dataio.read_track(tmp_path / "t.csv").shape == (3, 51)


def test_read_track_errors(tmp_path):
    (tmp_path / "empty.csv").write_text("")
    with pytest.raises(ValidationError, match="no frames"):
        dataio.read_track(tmp_path / "empty.csv")
    rows = [",".join(["1"] * 51), ",".join(["1"] * 50)]
    (tmp_path / "short.csv").write_text("\n".join(rows) + "\n")
    with pytest.raises(ValidationError, match="row 2 has 50 columns"):
        dataio.read_track(tmp_path / "short.csv")
    rows = [",".join(["1"] * 51), ",".join(["x"] + ["1"] * 50)]
    (tmp_path / "nan.csv").write_text("\n".join(rows) + "\n")
    with pytest.raises(ValidationError, match="row 2"):
        dataio.read_track(tmp_path / "nan.csv")


def test_write_track_rejects_wrong_width(tmp_path):
    with pytest.raises(ValidationError):
        dataio.write_track(tmp_path / "t.csv", np.zeros((3, 50)))


def test_sliding_windows():
    t = np.arange(12 * 51, dtype=float).reshape(12, 51)
    w = dataio.sliding_windows(t, 10)
    assert w.shape == (3, 10, 51)
    np.testing.assert_array_equal(w[2], t[2:12])


def test_manifest_round_trip(tmp_path, spec):
    m = dataio.generate_dataset(tmp_path, spec, clips_per_domain=1, length=20, seed=2)
    back = dataio.read_manifest(tmp_path / "manifest.json")
    assert back.to_json() == m.to_json()
    assert back.labels().tolist() == list(range(7))
    assert back.load_tracks()[0].shape == (20, 51)


def test_manifest_errors(tmp_path, spec):
    m = dataio.generate_dataset(tmp_path, spec, clips_per_domain=1, length=20, seed=2)
    doc = m.to_json()
    (tmp_path / m.clips[0].path).unlink()
    with pytest.raises(ValidationError, match="not found"):
        dataio.read_manifest(tmp_path / "manifest.json")
    (tmp_path / "bad.json").write_text('{"clips": []}')
    with pytest.raises(ValidationError, match="malformed"):
        dataio.read_manifest(tmp_path / "bad.json")
    assert doc["version"] == 1
