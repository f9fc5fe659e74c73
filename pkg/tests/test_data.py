"""Tests for WAV parsing, the directory loader, synthetic data and the hash split."""

import struct

import numpy as np
import pytest

from vickd.data import (
    V12_CLASSES,
    V12_COMMANDS,
    Dataset,
    assign,
    encode_wav,
    load_dataset,
    load_wav_dir,
    parse_wav,
    save_dataset,
    split,
    split_key,
    synth_dataset,
    write_wav,
)
from vickd.errors import ConfigError, DataError, FormatError
from vickd.types import LabelScheme, SplitSpec


class TestWav:
    def test_round_trip_within_quantization(self, rng):
        x = rng.uniform(-0.9, 0.9, size=500).astype(np.float32)
        samples, rate = parse_wav(encode_wav(x, 4000))
        assert rate == 4000
        assert np.abs(samples - x).max() <= 1.0 / 32768

    def test_full_scale_is_clipped(self):
        samples, _ = parse_wav(encode_wav(np.array([1.0, -1.0]), 8000))
        assert samples.tolist() == [32767 / 32768, -1.0]

    def test_skips_unknown_chunks(self):
        buf = encode_wav(np.zeros(4), 16000)
        extra = b"LIST" + struct.pack("<I", 3) + b"abc\0"
        body = buf[12:]
        patched = b"RIFF" + struct.pack("<I", 4 + len(extra) + len(body)) + b"WAVE" + extra + body
        samples, rate = parse_wav(patched)
        assert rate == 16000 and samples.shape == (4,)

    def test_not_riff(self):
        with pytest.raises(FormatError, match="RIFF"):
            parse_wav(b"OggS" + b"\0" * 40)

    def test_truncated_data(self):
        with pytest.raises(FormatError, match="truncated"):
            parse_wav(encode_wav(np.zeros(100), 16000)[:-10])

    def test_stereo_rejected(self):
        buf = bytearray(encode_wav(np.zeros(4), 16000))
        struct.pack_into("<H", buf, 22, 2)
        with pytest.raises(FormatError, match="mono"):
            parse_wav(bytes(buf))

    def test_non_pcm_rejected(self):
        buf = bytearray(encode_wav(np.zeros(4), 16000))
        struct.pack_into("<H", buf, 20, 3)
        with pytest.raises(FormatError, match="PCM"):
            parse_wav(bytes(buf))


@pytest.fixture
def speech_dir(tmp_path, rng):
    """A miniature speech-commands tree at 8 kHz."""
    root = tmp_path / "speech"
    for cmd in V12_COMMANDS:
        for i in range(2):
            write_wav(root / cmd / f"spk{i}_nohash_0.wav", rng.uniform(-0.5, 0.5, size=700), 8000)
    for i in range(3):
        write_wav(root / "bed" / f"spk{i}_nohash_0.wav", rng.uniform(-0.5, 0.5, size=900), 8000)
    write_wav(root / "_background_noise_" / "white.wav", rng.uniform(-0.1, 0.1, size=4000), 8000)
    return root


class TestWavDir:
    def test_v12_layout(self, speech_dir):
        ds = load_wav_dir(speech_dir, LabelScheme.v12, sample_rate=4000, length=400)
        assert ds.class_names == V12_CLASSES
        assert ds.x.shape == (24, 400)
        hist = ds.histogram()
        assert hist["yes"] == 2
        assert hist["unknown"] == 2
        assert hist["silence"] == 2

    def test_resample_and_pad(self, speech_dir):
        ds = load_wav_dir(speech_dir, sample_rate=4000, length=400)
        first = ds.x[0]
        # 700 samples at 8 kHz become 350 at 4 kHz, zero-padded to 400
        assert not first[350:].any()
        assert first[:350].any()

    def test_same_seed_same_unknown_pick(self, speech_dir):
        a = load_wav_dir(speech_dir, sample_rate=4000, length=400, seed=3)
        b = load_wav_dir(speech_dir, sample_rate=4000, length=400, seed=3)
        assert a.ids == b.ids

    def test_missing_command(self, speech_dir):
        for f in (speech_dir / "go").iterdir():
            f.unlink()
        with pytest.raises(DataError, match="'go'"):
            load_wav_dir(speech_dir, sample_rate=4000, length=400)

    def test_v35_needs_every_command(self, speech_dir):
        with pytest.raises(DataError, match="empty"):
            load_wav_dir(speech_dir, LabelScheme.v35, sample_rate=4000, length=400)

    def test_not_a_directory(self, tmp_path):
        with pytest.raises(DataError):
            load_wav_dir(tmp_path / "nope")


class TestSynth:
    def test_shape_and_labels(self, tiny_dataset):
        assert tiny_dataset.x.shape == (80, 400)
        assert tiny_dataset.class_names == ("kw00", "kw01", "kw02", "kw03")
        assert set(tiny_dataset.histogram().values()) == {20}
        assert np.abs(tiny_dataset.x).max() <= 1.0

    def test_deterministic(self):
        a = synth_dataset(3, 4, seed=5, sample_rate=2000, length=200)
        b = synth_dataset(3, 4, seed=5, sample_rate=2000, length=200)
        np.testing.assert_array_equal(a.x, b.x)
        assert a.ids == b.ids

    def test_seed_changes_audio(self):
        a = synth_dataset(3, 4, seed=5, sample_rate=2000, length=200)
        b = synth_dataset(3, 4, seed=6, sample_rate=2000, length=200)
        assert not np.array_equal(a.x, b.x)

    def test_twelve_classes_use_v12_names(self):
        ds = synth_dataset(12, 2, sample_rate=2000, length=200)
        assert ds.class_names == V12_CLASSES

    def test_profile_defaults(self):
        ds = synth_dataset(2, 1)
        assert ds.sample_rate == 4000 and ds.length == 2000

    def test_scheme_class_mismatch(self):
        with pytest.raises(ConfigError, match="v12"):
            synth_dataset(10, 2, scheme=LabelScheme.v12)

    def test_needs_two_classes(self):
        with pytest.raises(ConfigError):
            synth_dataset(1, 2)

    def test_ids_unique(self, tiny_dataset):
        assert len(set(tiny_dataset.ids)) == len(tiny_dataset)


class TestDataset:
    def test_read_only(self, tiny_dataset):
        with pytest.raises(ValueError):
            tiny_dataset.x[0, 0] = 1.0

    def test_mismatched_arrays(self):
        with pytest.raises(DataError):
            Dataset(x=np.zeros((2, 3)), y=np.zeros(3), ids=("a", "b"), class_names=("c",), sample_rate=1)

    def test_label_outside_classes(self):
        with pytest.raises(DataError):
            Dataset(x=np.zeros((1, 3)), y=np.array([2]), ids=("a",), class_names=("c", "d"), sample_rate=1)

    def test_head_and_subset(self, tiny_dataset):
        assert len(tiny_dataset.head(5)) == 5
        assert tiny_dataset.head(None) is tiny_dataset
        sub = tiny_dataset.subset([3, 1])
        assert sub.ids == (tiny_dataset.ids[3], tiny_dataset.ids[1])

    def test_cache_round_trip(self, tiny_dataset, tmp_path):
        path = save_dataset(tiny_dataset, tmp_path / "data.bin")
        loaded = load_dataset(path)
        np.testing.assert_array_equal(loaded.x, tiny_dataset.x)
        np.testing.assert_array_equal(loaded.y, tiny_dataset.y)
        assert loaded.ids == tiny_dataset.ids
        assert loaded.class_names == tiny_dataset.class_names
        assert loaded.meta == tiny_dataset.meta

    def test_cache_missing_sidecar(self, tiny_dataset, tmp_path):
        path = save_dataset(tiny_dataset, tmp_path / "data.bin")
        (tmp_path / "data.bin.json").unlink()
        with pytest.raises(FormatError, match="sidecar"):
            load_dataset(path)


class TestSplit:
    def test_speaker_key(self):
        assert split_key("yes/0a7c2a8d_nohash_1.wav") == "0a7c2a8d"
        assert split_key("kw01/synth0_00003") == "kw01/synth0_00003"

    def test_same_speaker_same_part(self):
        spec = SplitSpec()
        for speaker in ("aa11", "bb22", "cc33", "dd44"):
            parts = {assign(f"{cmd}/{speaker}_nohash_{i}.wav", spec) for cmd in ("yes", "no") for i in range(3)}
            assert len(parts) == 1

    def test_partition_is_disjoint_and_complete(self, tiny_dataset):
        train, valid, test = split(tiny_dataset)
        ids = [*train.ids, *valid.ids, *test.ids]
        assert sorted(ids) == sorted(tiny_dataset.ids)
        assert len(set(ids)) == len(ids)

    def test_stable_when_dataset_grows(self):
        small = synth_dataset(3, 10, sample_rate=2000, length=100)
        large = synth_dataset(3, 30, sample_rate=2000, length=100)
        small_test = set(split(small)[2].ids)
        assert small_test <= set(split(large)[2].ids)

    def test_proportions(self):
        spec = SplitSpec()
        parts = [assign(f"x/{i}", spec) for i in range(5000)]
        assert parts.count("train") / 5000 == pytest.approx(0.8, abs=0.03)

    def test_spec_must_sum_to_one(self):
        with pytest.raises(ValueError):
            SplitSpec(train=0.5, valid=0.1, test=0.1)
