import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sebbkit.io import (AnnotationSet, ClipEntry, CorpusManifest, EventBox, ParseError, ScoreMatrix,
                        ValidationError, load_annotations, load_manifest, load_score_matrix, read_events,
                        write_annotations, write_events, write_manifest, write_score_matrix)


def test_two_frame_matrix(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("frame,Dog\n0,0.0\n1,1.0\n")
    m = load_score_matrix(p, 0.064)
    assert m.n_frames == 2 and m.n_classes == 1
    np.testing.assert_array_equal(m.scores, [[0.0], [1.0]])
    assert m.clip_id == "a"


def test_out_of_range_value_rejected(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("frame,Dog\n0,0.0\n1,1.5\n")
    with pytest.raises(ValidationError):
        load_score_matrix(p)


def test_empty_file_rejected(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("")
    with pytest.raises(ValidationError):
        load_score_matrix(p)


def test_malformed_row_reports_line(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("frame,Dog\n0,0.1\n1,abc\n")
    with pytest.raises(ParseError, match=r"a.csv:3"):
        load_score_matrix(p)


def test_non_contiguous_frames(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("frame,Dog\n0,0.1\n2,0.2\n")
    with pytest.raises((ParseError, ValidationError)):
        load_score_matrix(p)


def test_matrix_invariants():
    with pytest.raises(ValidationError):
        ScoreMatrix("c", np.zeros((3, 2)), ["a", "a"], 0.064)
    with pytest.raises(ValidationError):
        ScoreMatrix("c", np.zeros((3, 1)), ["a"], 0.0)
    with pytest.raises(ValidationError):
        ScoreMatrix("c", np.zeros((0, 1)), ["a"], 0.064)


def test_synth_sized_matrix_roundtrip(tmp_path):
    from sebbkit.synth import SynthSpec, generate_clip, clip_rng
    spec = SynthSpec(clips=1, classes=10, seed=3)
    m, _ = generate_clip(spec, clip_rng(spec, 0), "x")
    p = tmp_path / "x.csv"
    write_score_matrix(m, p)
    back = load_score_matrix(p, spec.hop_seconds)
    assert (back.n_frames, back.n_classes) == (156, 10)
    assert back.class_names == m.class_names
    np.testing.assert_allclose(back.scores, m.scores, atol=1e-6)


def test_annotations(tmp_path):
    p = tmp_path / "r.tsv"
    p.write_text("filename\tonset\toffset\tevent_label\na.wav\t1.0\t2.0\tDog\n"
                 "a.wav\t3.0\t4.0\tCat\nb.wav\t0.5\t1.0\tDog\n")
    ann = load_annotations(p)
    assert len(ann.entries) == 3
    groups = ann.by_clip()
    assert sorted(groups) == ["a.wav", "b.wav"]
    assert len(groups["a.wav"]) == 2


def test_degenerate_annotation_named(tmp_path):
    p = tmp_path / "r.tsv"
    p.write_text("filename\tonset\toffset\tevent_label\na.wav\t2.0\t2.0\tDog\n")
    with pytest.raises(ValidationError, match=r"r.tsv:2"):
        load_annotations(p)


def test_unknown_annotation_column(tmp_path):
    p = tmp_path / "r.tsv"
    p.write_text("filename\tonset\toffset\tevent_label\textra\na.wav\t1\t2\tDog\tx\n")
    with pytest.raises(ParseError):
        load_annotations(p)


def test_annotation_beyond_duration():
    with pytest.raises(ValidationError):
        AnnotationSet([("a", "Dog", 1.0, 11.0)], {"a": 10.0})


def test_annotations_roundtrip(tmp_path):
    ann = AnnotationSet([("a", "Dog", 0.128, 1.5), ("b", "Cat", 2.0, 3.25)], {"a": 10.0, "b": 10.0})
    write_annotations(ann, tmp_path / "r.tsv")
    back = load_annotations(tmp_path / "r.tsv", ann.clip_durations)
    assert back.entries == ann.entries


def test_events_empty_roundtrip(tmp_path):
    write_events([], tmp_path / "e.tsv")
    assert (tmp_path / "e.tsv").read_text().strip() == "filename\tonset\toffset\tevent_label\tconfidence"
    assert read_events(tmp_path / "e.tsv") == []


def test_single_event_roundtrip(tmp_path):
    ev = EventBox("a.wav", "Dog", 0.5, 1.25, 0.83)
    write_events([ev], tmp_path / "e.tsv")
    assert read_events(tmp_path / "e.tsv") == [ev]


def test_eventbox_invariants():
    with pytest.raises(ValidationError):
        EventBox("a", "Dog", 1.0, 1.0)
    with pytest.raises(ValidationError):
        EventBox("a", "Dog", -0.1, 1.0)
    with pytest.raises(ValidationError):
        EventBox("a", "Dog", 0.0, 1.0, 1.2)


events_strategy = st.lists(
    st.tuples(st.sampled_from(["a.wav", "b.wav", "c"]), st.sampled_from(["Dog", "Cat", "Alarm_bell"]),
              st.floats(0, 100, allow_nan=False), st.floats(1e-3, 10, allow_nan=False),
              st.floats(0, 1, allow_nan=False)),
    max_size=100)


@given(events_strategy)
def test_events_roundtrip_property(tmp_path_factory, rows):
    evs = [EventBox(c, l, on, on + d, conf) for c, l, on, d, conf in rows]
    p = tmp_path_factory.mktemp("ev") / "e.tsv"
    write_events(evs, p)
    back = read_events(p)
    assert len(back) == len(evs)
    for a, b in zip(evs, back):
        assert (a.clip_id, a.class_label) == (b.clip_id, b.class_label)
        assert abs(a.onset_s - b.onset_s) <= 1e-6
        assert abs(a.offset_s - b.offset_s) <= 1e-6
        assert abs(a.confidence - b.confidence) <= 1e-6


def test_manifest_roundtrip_and_missing_file(tmp_path):
    m = ScoreMatrix("x", np.full((10, 1), 0.5), ["Dog"], 0.064)
    write_score_matrix(m, tmp_path / "x.csv")
    man = CorpusManifest([ClipEntry("x", tmp_path / "x.csv", 0.64)], 0.064, ["Dog"])
    write_manifest(man, tmp_path / "m.json")
    back = load_manifest(tmp_path / "m.json")
    assert back.clip_durations == {"x": 0.64}
    assert back.hop_seconds == 0.064
    doc = json.loads((tmp_path / "m.json").read_text())
    doc["clips"].append({"clip_id": "y", "scores": "nope.csv", "duration_s": 1.0})
    (tmp_path / "m.json").write_text(json.dumps(doc))
    with pytest.raises((ValidationError, FileNotFoundError)):
        load_manifest(tmp_path / "m.json")


def test_manifest_duplicate_ids(tmp_path):
    with pytest.raises(ValidationError):
        CorpusManifest([ClipEntry("x", tmp_path / "a", 1.0), ClipEntry("x", tmp_path / "b", 1.0)])
