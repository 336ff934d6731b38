import json

import numpy as np
import pytest

from tvfx.corpus import (
    CorpusError,
    generate_corpus,
    load_corpus,
    note_pitches,
    save_corpus,
    split_sizes,
)


@pytest.mark.parametrize("count, sizes", [(20, (18, 1, 1)), (16, (14, 1, 1)), (3, (1, 1, 1)), (624, (562, 31, 31))])
def test_split_sizes(count, sizes):
    assert split_sizes(count) == sizes


def test_split_needs_three_notes():
    with pytest.raises(ValueError):
        split_sizes(2)


def test_pitches_span_range():
    p = note_pitches(16)
    assert p[0] == 28 and p[-1] == 67 and p == sorted(p)


@pytest.fixture(scope="module")
def small():
    return generate_corpus("tremolo", 6, seed=3, duration=0.5)


def test_generation_assigns_every_split(small):
    assert small.split_counts() == {"train": 4, "validation": 1, "test": 1}
    ids = [it.note_id for it in small.items]
    assert len(set(ids)) == len(ids)
    for it in small.items:
        assert it.dry.num_frames == it.wet.num_frames == 8000
        # stored values are exactly representable in float32
        np.testing.assert_array_equal(it.dry.samples, it.dry.samples.astype(np.float32))


def test_same_seed_same_corpus_and_other_seed_differs(small):
    again = generate_corpus("tremolo", 6, seed=3, duration=0.5)
    for a, b in zip(small.items, again.items):
        np.testing.assert_array_equal(a.wet.samples, b.wet.samples)
        assert a.split == b.split
    other = generate_corpus("tremolo", 6, seed=4, duration=0.5)
    assert not np.array_equal(small.items[0].dry.samples, other.items[0].dry.samples)


def test_unknown_split_name(small):
    with pytest.raises(ValueError):
        small.split("dev")


def test_save_load_round_trip(small, tmp_path):
    manifest = save_corpus(small, tmp_path / "c")
    loaded = load_corpus(tmp_path / "c")
    assert manifest["splits"] == loaded.split_counts()
    assert loaded.preset == small.preset
    for a, b in zip(small.items, loaded.items):
        assert (a.note_id, a.midi, a.split) == (b.note_id, b.midi, b.split)
        np.testing.assert_array_equal(a.dry.samples, b.dry.samples)
        np.testing.assert_array_equal(a.wet.samples, b.wet.samples)


def test_saved_corpora_are_byte_identical(small, tmp_path):
    save_corpus(small, tmp_path / "a")
    save_corpus(generate_corpus("tremolo", 6, seed=3, duration=0.5), tmp_path / "b")
    files_a = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(tmp_path / "b") for p in (tmp_path / "b").rglob("*") if p.is_file())
    assert files_a == files_b
    for rel in files_a:
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()


def test_tampered_file_is_refused(small, tmp_path):
    save_corpus(small, tmp_path / "c")
    target = tmp_path / "c" / "wet" / f"{small.items[0].note_id}.wav"
    blob = bytearray(target.read_bytes())
    blob[-1] ^= 0x01
    target.write_bytes(bytes(blob))
    with pytest.raises(CorpusError, match="hash"):
        load_corpus(tmp_path / "c")
    # verification can be skipped explicitly
    assert len(load_corpus(tmp_path / "c", verify=False).items) == 6


def test_missing_file_and_manifest(small, tmp_path):
    save_corpus(small, tmp_path / "c")
    (tmp_path / "c" / "dry" / f"{small.items[1].note_id}.wav").unlink()
    with pytest.raises(CorpusError, match="missing"):
        load_corpus(tmp_path / "c")
    with pytest.raises(CorpusError, match="manifest"):
        load_corpus(tmp_path / "nothing")


def test_manifest_version_checked(small, tmp_path):
    save_corpus(small, tmp_path / "c")
    path = tmp_path / "c" / "manifest.json"
    m = json.loads(path.read_text())
    m["version"] = 99
    path.write_text(json.dumps(m))
    with pytest.raises(CorpusError, match="version"):
        load_corpus(tmp_path / "c")


def test_refuses_non_empty_directory(small, tmp_path):
    (tmp_path / "c").mkdir()
    (tmp_path / "c" / "junk").write_text("x")
    with pytest.raises(CorpusError, match="force"):
        save_corpus(small, tmp_path / "c")
    save_corpus(small, tmp_path / "c", force=True)
