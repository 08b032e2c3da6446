import json
import shutil
from concurrent.futures import ThreadPoolExecutor

import pytest

from codecorpus.bpe import END_OF_TEXT, VocabularyError, load_vocabulary
from corpusgen import make_corpus

# Computed once with this vocabulary and frozen as regression anchors; the
# live reference-implementation comparison below is the real oracle.
SPOT_CHECKS = {
    "def f(x):\n    return x\n": [310, 281, 8, 88, 294, 199, 259, 391, 221, 88, 199],
    "hello world": [275, 76, 308, 299, 271, 76, 68],
    "count += 1": [453, 383, 289],
    "": [],
}

LITERAL_STRINGS = [
    "",
    " ",
    "\n",
    "a",
    "hello world",
    "Hello, World!",
    "def f(x):\n    return x\n",
    "for i in range(10):\n    total += i\n",
    "class Foo(Bar):\n    pass\n",
    "x = {'key': 'value', 'n': 42}\n",
    "import numpy as np\n",
    "   leading and trailing   ",
    "\t\ttabs\tand\nnewlines\r\n",
    "don't can't we've I'll it's I'd I'm they're",
    "MixedCASE text 123abc 42 3.14",
    "punctuation!? (parens) [brackets] {braces}; colon: comma,",
    "underscores_and_CAPS_99",
    "naïve café résumé",
    "日本語のテキスト",
    "emoji 🎉🚀 test",
    "¬E ⇒ ({EI} & {C})",
    "x==1 and y!=2 or z<=3",
    "a+b-c*d/e//f%g**h",
    "'single' \"double\" '''triple'''",
    "line1\nline2\n\nline4",
    "0 1 22 333 4444 55555",
    "  indented\n    more indented\n",
    "f'{value!r:>10}'",
    "lambda x: x + 1",
    "@decorator\nasync def go(): ...",
    "PROVED DISPROVED UNKNOWN",
    "$hypothesis$ = it rains ; $proof$ =",
    "\x00\x01\x02 control bytes",
    "ÿþý high latin",
    "semi;colons;everywhere;",
    "věc žluťoučký kůň",
]


def oracle_strings() -> list[str]:
    """100-string fixture set: literals plus synthetic documents."""
    docs = [d.text for d in make_corpus(64, seed=404)]
    return (LITERAL_STRINGS + docs)[:100]


@pytest.fixture(scope="module")
def reference_tokenizer(vocab_paths):
    # Loaded without registering special tokens, so the end-of-text literal
    # is treated as plain text, matching the encoder contract.
    tokenizers = pytest.importorskip("tokenizers")
    return tokenizers.ByteLevelBPETokenizer(*vocab_paths)


class TestLoadVocabulary:
    def test_loads_full_table(self, vocab, vocab_paths):
        table = json.loads(open(vocab_paths[0], encoding="utf-8").read())
        assert len(vocab) == len(table)

    def test_end_of_text_resolved_from_table(self, vocab, vocab_paths):
        table = json.loads(open(vocab_paths[0], encoding="utf-8").read())
        assert vocab.end_of_text_id == table[END_OF_TEXT]

    def test_missing_files(self, tmp_path, vocab_paths):
        with pytest.raises(VocabularyError, match="not found"):
            load_vocabulary(tmp_path / "nope.json", vocab_paths[1])
        with pytest.raises(VocabularyError, match="not found"):
            load_vocabulary(vocab_paths[0], tmp_path / "nope.txt")

    def test_malformed_table(self, tmp_path, vocab_paths):
        bad = tmp_path / "vocab.json"
        bad.write_text("not json at all {")
        with pytest.raises(VocabularyError, match="malformed"):
            load_vocabulary(bad, vocab_paths[1])

    def test_missing_end_of_text(self, tmp_path, vocab_paths):
        table = json.loads(open(vocab_paths[0], encoding="utf-8").read())
        eot_id = table.pop(END_OF_TEXT)
        table["<|other|>"] = eot_id  # keep ids dense
        bad = tmp_path / "vocab.json"
        bad.write_text(json.dumps(table), encoding="utf-8")
        with pytest.raises(VocabularyError, match="endoftext"):
            load_vocabulary(bad, vocab_paths[1])

    def test_non_dense_ids(self, tmp_path, vocab_paths):
        bad = tmp_path / "vocab.json"
        bad.write_text(json.dumps({END_OF_TEXT: 0, "a": 5}), encoding="utf-8")
        with pytest.raises(VocabularyError, match="dense"):
            load_vocabulary(bad, vocab_paths[1])

    def test_malformed_merges(self, tmp_path, vocab_paths):
        shutil.copy(vocab_paths[0], tmp_path / "vocab.json")
        bad = tmp_path / "merges.txt"
        bad.write_text("#version: 0.2\na b c\n", encoding="utf-8")
        with pytest.raises(VocabularyError, match="merges"):
            load_vocabulary(tmp_path / "vocab.json", bad)


class TestEncode:
    def test_empty_string(self, vocab):
        assert vocab.encode("") == []

    def test_spot_checks(self, vocab):
        for text, ids in SPOT_CHECKS.items():
            assert vocab.encode(text) == ids

    def test_matches_reference_implementation(self, vocab, reference_tokenizer):
        strings = oracle_strings()
        assert len(strings) == 100
        for text in strings:
            assert vocab.encode(text) == reference_tokenizer.encode(text).ids, repr(text)

    def test_literal_end_of_text_is_not_special(self, vocab, reference_tokenizer):
        ids = vocab.encode(END_OF_TEXT)
        assert ids != [vocab.end_of_text_id]
        assert ids == reference_tokenizer.encode(END_OF_TEXT).ids

    def test_deterministic_and_thread_safe(self, vocab):
        texts = oracle_strings()[:30]
        expected = [vocab.encode(t) for t in texts]
        with ThreadPoolExecutor(max_workers=8) as pool:
            for _ in range(4):
                assert list(pool.map(vocab.encode, texts)) == expected


class TestDecode:
    def test_roundtrip_byte_identity(self, vocab):
        for text in oracle_strings():
            assert vocab.decode(vocab.encode(text)) == text

    def test_end_of_text_id_decodes_to_literal(self, vocab):
        assert vocab.decode([vocab.end_of_text_id]) == END_OF_TEXT

    def test_unknown_id_raises(self, vocab):
        with pytest.raises(VocabularyError, match="unknown token id"):
            vocab.decode([10 ** 9])
