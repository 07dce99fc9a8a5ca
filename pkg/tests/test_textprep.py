import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cigmatch.textprep import (
    EmbeddingFormatError,
    EmbeddingTable,
    Vocabulary,
    load_embeddings,
    make_document,
    random_embeddings,
    split_sentences,
    tokenize,
    write_embeddings,
)


@pytest.mark.parametrize(
    "text, expected",
    [("A. B!", ["A.", "B!"]), ("", []), ("x y z", ["x y z"]), ("Hi?!  Yes.", ["Hi?!", "Yes."])],
)
def test_split_sentences(text, expected):
    assert split_sentences(text) == expected


def test_split_sentences_chinese_punctuation():
    assert split_sentences("第一句。第二句！") == ["第一句。", "第二句！"]


@pytest.mark.parametrize(
    "sentence, expected",
    [
        ("Rick and Morty.", ["rick", "and", "morty"]),
        ("A,B", ["a", "b"]),
        ("中文分词", ["中", "文", "分", "词"]),
        ("snake_case words", ["snake", "case", "words"]),
    ],
)
def test_tokenize(sentence, expected):
    assert tokenize(sentence) == expected


def test_spaced_cjk_is_not_split_into_characters():
    assert tokenize("中文 分词") == ["中文", "分词"]


@given(st.text(max_size=80))
def test_split_sentences_never_loses_word_characters(text):
    joined = "".join(split_sentences(text))
    assert sorted(ch for ch in joined if ch.isalnum()) == sorted(ch for ch in text if ch.isalnum())


def test_make_document_drops_punctuation_only_sentences():
    doc = make_document("One two. ... Three.", "d")
    assert doc.sentences == [["one", "two"], ["three"]]
    assert doc.tokens() == ["one", "two", "three"]


def test_vocabulary_reserves_index_zero():
    vocab = Vocabulary.from_documents([make_document("b a. a c.")])
    assert vocab.itos == ["<oov>", "a", "b", "c"]
    assert vocab.encode(["c", "zzz"]) == [3, 0]
    assert "a" in vocab and "zzz" not in vocab


def test_load_embeddings_reads_rows_and_zero_fills(tmp_path):
    path = tmp_path / "vec.txt"
    path.write_text("2 3\na 1 0 0\nb 0 1 0\n", encoding="ascii")
    vocab = Vocabulary(["a", "b", "zzz"])
    table = load_embeddings(path, vocab)
    np.testing.assert_array_equal(table.lookup([vocab.index("a")]), [[1.0, 0.0, 0.0]])
    np.testing.assert_array_equal(table.lookup([vocab.index("zzz")]), [[0.0, 0.0, 0.0]])
    np.testing.assert_array_equal(table.lookup([0]), [[0.0, 0.0, 0.0]])


@pytest.mark.parametrize(
    "content, where",
    [("2 3\na 1 0\nb 0 1 0\n", "line 2"), ("x y\n", "line 1"), ("3 3\na 1 0 0\n", "line 1"), ("1 2\na 1 q\n", "line 2")],
)
def test_load_embeddings_format_errors_name_the_line(tmp_path, content, where):
    path = tmp_path / "bad.txt"
    path.write_text(content, encoding="ascii")
    with pytest.raises(EmbeddingFormatError, match=where):
        load_embeddings(path, Vocabulary(["a", "b"]))


def test_embedding_round_trip(tmp_path):
    vocab = Vocabulary(["x", "y"])
    table = random_embeddings(vocab, dim=5, seed=2)
    path = tmp_path / "e.txt"
    write_embeddings(path, vocab.itos[1:], table.matrix[1:])
    again = load_embeddings(path, vocab)
    np.testing.assert_array_equal(again.matrix, table.matrix)


def test_embedding_table_is_frozen():
    table = EmbeddingTable(2, np.ones((3, 2)))
    assert not table.matrix[0].any()
    with pytest.raises(ValueError):
        table.matrix[1, 0] = 5.0


def test_random_embeddings_are_seeded():
    vocab = Vocabulary(["p", "q"])
    np.testing.assert_array_equal(random_embeddings(vocab, 4, 9).matrix, random_embeddings(vocab, 4, 9).matrix)
