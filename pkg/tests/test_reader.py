from __future__ import annotations

import random

import pytest

from duallens.reader import CleanDoc, InvalidChunkParams, chunk_spans, chunk_text, parse_html
from helpers import RESIDUAL_TAG, oracle_chunk_spans, random_html_doc

SAMPLE = """<!DOCTYPE html>
<html><head><title>Soup &amp; Cans</title>
<style>p { color: red }</style>
<script>if (1 < 2) { alert("hi"); }</script>
</head>
<body>
<nav><a href="/">home</a></nav>
<header>site chrome</header>
<h1>Heading One</h1>
<p>First   paragraph
spans lines.</p>
<div>Second <b>bold</b> paragraph.</div>
<ul><li>item one</li><li>item two</li></ul>
<form><input name="q"></form>
<p>Entities: &lt;tag&gt; &amp; &#65;.</p>
<footer>fine print</footer>
</body></html>"""


def test_parse_html_extracts_clean_paragraphs():
    doc = parse_html(SAMPLE, url="https://example.org/a")
    assert doc.url == "https://example.org/a"
    assert doc.title == "Soup & Cans"
    assert doc.paragraphs == (
        "Heading One",
        "First paragraph spans lines.",
        "Second bold paragraph.",
        "item one",
        "item two",
        "Entities: < tag> & A.",
    )
    assert "alert" not in doc.text
    assert "home" not in doc.text
    assert "fine print" not in doc.text


def test_title_falls_back_to_first_heading():
    doc = parse_html("<html><body><h1>Only Heading</h1><p>Body.</p></body></html>")
    assert doc.title == "Only Heading"
    assert parse_html("<p>no title at all</p>").title == ""


def test_plain_text_input_passes_through():
    raw = "Paragraph one.\n\nParagraph two has 1 < 2 in it.\n\nThree."
    doc = parse_html(raw)
    assert doc.text == raw
    assert doc.title == ""


def test_bytes_input_is_decoded():
    doc = parse_html("<p>café</p>".encode("utf-8"))
    assert doc.text == "café"


def test_parse_is_idempotent_on_own_output():
    doc = parse_html(SAMPLE)
    again = parse_html(doc.text)
    assert again.text == doc.text
    assert not RESIDUAL_TAG.search(doc.text)


def test_residual_open_brackets_are_escaped():
    # Decoded entities can reintroduce tag-like text; a space breaks the pattern.
    doc = parse_html("<p>use &lt;em&gt; tags</p>")
    assert doc.text == "use < em> tags"
    assert parse_html(doc.text).text == doc.text


@pytest.mark.parametrize("seed", range(12))
def test_random_documents_parse_cleanly(seed):
    rng = random.Random(seed)
    doc = parse_html(random_html_doc(rng))
    assert not RESIDUAL_TAG.search(doc.text)
    assert parse_html(doc.text).text == doc.text
    assert "skip me" not in doc.text
    assert "color: red" not in doc.text


def test_clean_doc_round_trip():
    doc = CleanDoc(url="https://e", title="T", text="a\n\nb")
    assert CleanDoc.from_dict(doc.to_dict()) == doc
    assert doc.paragraphs == ("a", "b")
    assert CleanDoc(url="", title="", text="").paragraphs == ()


# --- Chunking -------------------------------------------------------------------

def test_chunk_params_are_validated():
    with pytest.raises(InvalidChunkParams):
        chunk_spans("abc", 0, 0)
    with pytest.raises(InvalidChunkParams):
        chunk_spans("abc", 10, 10)
    with pytest.raises(InvalidChunkParams):
        chunk_spans("abc", 10, -1)


def test_unbreakable_text_uses_fixed_stride():
    text = "x" * 2500
    assert chunk_spans(text, 1000, 200) == [(0, 1000), (800, 1800), (1600, 2500)]
    assert chunk_spans("", 1000, 200) == []
    assert chunk_spans("short", 1000, 200) == [(0, 5)]


def test_paragraph_break_wins_over_sentence_break():
    # Window [80, 100] holds a sentence end at 82 and a paragraph break at 85;
    # the paragraph break must win even though both are acceptable cuts.
    text = "a" * 81 + ". xx" + "\n\n" + "b" * 200
    assert text.find("\n\n") == 85
    spans = chunk_spans(text, 100, 20)
    assert spans[0] == (0, 85)
    assert spans == oracle_chunk_spans(text, 100, 20)


def test_sentence_break_is_used_when_no_paragraph():
    text = ("one sentence here. " * 10).strip()  # length 188, breaks at '.'
    spans = chunk_spans(text, 100, 20)
    assert spans == oracle_chunk_spans(text, 100, 20)
    first = text[spans[0][0]:spans[0][1]]
    assert first.endswith(".")


def test_spans_reconstruct_original_text():
    rng = random.Random(42)
    for _ in range(20):
        doc = parse_html(random_html_doc(rng))
        text = doc.text
        size = rng.randint(60, 240)
        overlap = rng.randint(0, size // 2)
        spans = chunk_spans(text, size, overlap)
        assert spans == oracle_chunk_spans(text, size, overlap)
        if not text:
            assert spans == []
            continue
        assert spans[0][0] == 0
        assert spans[-1][1] == len(text)
        rebuilt = text[spans[0][0]:spans[0][1]]
        for (ps, pe), (s, e) in zip(spans, spans[1:]):
            assert s <= pe, "spans must not leave gaps"
            assert s > ps, "start must strictly advance"
            rebuilt += text[pe:e] if pe >= s else text[s:e]
        assert rebuilt == text
        assert all(e - s <= size for s, e in spans)


def test_chunk_text_matches_spans():
    text = "First sentence. Second sentence. Third sentence goes on."
    spans = chunk_spans(text, 30, 10)
    assert chunk_text(text, 30, 10) == [text[s:e] for s, e in spans]
