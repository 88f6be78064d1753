import pytest

from gcnlstm.vocab import RESERVED, Vocabulary, build_vocab, tokenize


def test_min_count_two():
    v = build_vocab(["a b", "a c"], min_count=2)
    assert v.words == list(RESERVED) + ["a"]


def test_min_count_one_keeps_everything_frequency_first():
    v = build_vocab(["b a c", "c b", "c"], min_count=1)
    assert v.words[3:] == ["c", "b", "a"]


def test_empty_after_filter():
    with pytest.raises(ValueError, match="at least 3"):
        build_vocab(["a b"], min_count=3)
    with pytest.raises(ValueError, match="empty"):
        build_vocab([], min_count=1)


def test_tokenize_lowercases_and_strips_punctuation():
    assert tokenize("A Dog, left-of the CAT!") == ["a", "dog", "leftof", "the", "cat"]


def test_encode_decode(tmp_path):
    v = build_vocab([["a", "dog"]])
    ids = v.encode(["a", "zebra", "dog"])
    assert ids == [v.bos, v.index["a"], v.unk, v.index["dog"], v.eos]
    assert v.decode(ids) == ["a", "dog"]
    v.save(tmp_path / "v.json")
    assert Vocabulary.load(tmp_path / "v.json") == v


def test_reserved_prefix_required():
    with pytest.raises(ValueError):
        Vocabulary(["a", "<bos>", "<eos>", "<unk>"])
