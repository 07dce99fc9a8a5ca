import json
from collections import Counter

import pytest

from cigmatch.cig import build_pair_cig, extract_keywords
from cigmatch.data import (
    DATA_DIR_ENV,
    DatasetFormatError,
    LabeledPair,
    gen_synthetic,
    import_table,
    load_jsonl,
    save_jsonl,
    split,
)
from cigmatch.textprep import make_document


def write_lines(path, *lines):
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return path


def test_load_jsonl(tmp_path):
    path = write_lines(tmp_path / "d.jsonl", '{"label":1,"doc_a":"x","doc_b":"y"}', "", '{"label":0,"doc_a":"p","doc_b":"q"}')
    assert load_jsonl(path) == [LabeledPair(1, "x", "y"), LabeledPair(0, "p", "q")]
    assert load_jsonl(write_lines(tmp_path / "e.jsonl")) == []


@pytest.mark.parametrize(
    "line, message",
    [
        ('{"label":1,"doc_a":"x"}', "line 2: missing field"),
        ("{oops", "line 2: invalid JSON"),
        ('{"label":3,"doc_a":"x","doc_b":"y"}', "line 2"),
        ('{"label":1,"doc_a":"  ","doc_b":"y"}', "line 2"),
        ("[1, 2]", "line 2: expected a JSON object"),
    ],
)
def test_load_jsonl_errors(tmp_path, line, message):
    path = write_lines(tmp_path / "d.jsonl", '{"label":1,"doc_a":"x","doc_b":"y"}', line)
    with pytest.raises(DatasetFormatError, match=message):
        load_jsonl(path)


def test_data_dir_env(tmp_path, monkeypatch):
    write_lines(tmp_path / "here.jsonl", '{"label":0,"doc_a":"a","doc_b":"b"}')
    monkeypatch.setenv(DATA_DIR_ENV, str(tmp_path))
    monkeypatch.chdir(tmp_path.parent)
    assert len(load_jsonl("here.jsonl")) == 1


def test_save_round_trip(tmp_path):
    pairs = [LabeledPair(1, "Ünïcode 中文.", "b"), LabeledPair(0, "c", "d")]
    path = tmp_path / "out.jsonl"
    assert save_jsonl(pairs, path) == 2
    assert load_jsonl(path) == pairs
    assert json.loads(path.read_text(encoding="utf-8").splitlines()[0])["doc_a"] == "Ünïcode 中文."


@pytest.mark.parametrize("suffix, sep", [(".csv", ","), (".tsv", "\t")])
def test_import_table(tmp_path, suffix, sep):
    path = tmp_path / f"t{suffix}"
    path.write_text(sep.join(["label", "doc_a", "doc_b"]) + "\n" + sep.join(["1", "A b.", "C d."]) + "\n", encoding="utf-8")
    assert import_table(path) == [LabeledPair(1, "A b.", "C d.")]


def test_import_table_missing_column(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("y,doc_a,doc_b\n1,a,b\n", encoding="utf-8")
    with pytest.raises(DatasetFormatError, match="'label'"):
        import_table(path)
    assert import_table(path, label_col="y") == [LabeledPair(1, "a", "b")]


def test_split_counts_and_determinism():
    pairs = list(range(10))
    s = split(pairs, seed=3)
    assert s.sizes() == (6, 2, 2)
    assert sorted(s.train + s.dev + s.test) == pairs
    assert split(pairs, seed=3) == s
    assert split(pairs, seed=4) != s


def test_split_matches_the_news_corpus_sizes():
    assert split(range(29063), seed=0).sizes() == (17438, 5813, 5812)


def test_split_needs_five_pairs():
    with pytest.raises(ValueError):
        split([1, 2, 3, 4])


def test_split_names():
    s = split(list(range(5)))
    assert s["dev"] is s.dev
    with pytest.raises(KeyError):
        s["val"]


def test_synthetic_balance_and_determinism():
    pairs = gen_synthetic(4, n_topics=2, vocab_size=300, seed=1)
    assert Counter(p.label for p in pairs) == {1: 2, 0: 2}
    assert gen_synthetic(4, n_topics=2, vocab_size=300, seed=1) == pairs
    assert abs(sum(p.label for p in gen_synthetic(31, seed=2)) - 15.5) <= 1


def test_synthetic_documents_have_eight_to_fifteen_sentences():
    for p in gen_synthetic(20, seed=5):
        for text in (p.doc_a, p.doc_b):
            assert 8 <= make_document(text).n_sentences <= 15


def test_positive_pairs_share_a_concept_vertex():
    for p in gen_synthetic(30, seed=6):
        if not p.label:
            continue
        a = extract_keywords(make_document(p.doc_a, "a"))
        b = extract_keywords(make_document(p.doc_b, "b"))
        assert {k for k, _ in a.keywords} & {k for k, _ in b.keywords}
        cig = build_pair_cig(a, b)
        assert any(v.sentences_a and v.sentences_b and not v.is_dummy for v in cig.vertices)


def test_negative_pairs_share_background_words():
    shared = [
        len(set(make_document(p.doc_a).tokens()) & set(make_document(p.doc_b).tokens()))
        for p in gen_synthetic(30, seed=8)
        if not p.label
    ]
    assert min(shared) > 0


@pytest.mark.parametrize("kwargs", [dict(n_topics=1), dict(vocab_size=100), dict(background_overlap=1.5)])
def test_synthetic_rejects_bad_arguments(kwargs):
    with pytest.raises(ValueError):
        gen_synthetic(4, **kwargs)
