#!/usr/bin/env python3
"""Freeze reference GPT-2 token ids for a corpus of strings.

Uses transformers' slow GPT2Tokenizer over the bundled vocab.json/merges.txt.
Output: crates/core/tests/fixtures/tokenizer_cases.json
"""
import json
from pathlib import Path

from transformers import GPT2Tokenizer

ROOT = Path(__file__).resolve().parent.parent
ASSETS = ROOT / "crates/core/assets/gpt2"

CORPUS = [
    "",
    " walks",
    " walk",
    " walked",
    "Alice",
    "Alice and Bob",
    "Alice does not",
    "Yesterday, Alice did not",
    "Surprisingly, she",
    "They do not",
    "Hello world",
    "I'm here, you're there, we've been, they'll go, he'd say, it's ok",
    "I'M SHOUTING'S",
    "numbers 12345 and 3.14159 and 1,000,000",
    "   leading spaces",
    "trailing spaces   ",
    "tabs\tand\nnewlines\n\n  indented",
    "multiple     interior     spaces",
    "unicode: café naïve résumé Zürich",
    "emoji 🙂🚀 and CJK 漢字かな",
    "punctuation!!! ??? ... ;;; --- ((()))",
    "<|endoftext|>",
    "mixed123abc 456def",
    "a non-breaking space",
    "Ωμέγα Привет мир",
    "x" * 40,
    "supercalifragilisticexpialidocious antidisestablishmentarianism",
    "The quick brown fox jumps over the lazy dog.",
    "\r\n windows line endings\r\n",
    "'s 't 're 've 'm 'll 'd",
]


def main():
    tok = GPT2Tokenizer(str(ASSETS / "vocab.json"), str(ASSETS / "merges.txt"))
    cases = []
    for text in CORPUS:
        # The slow tokenizer treats <|endoftext|> as special; encode it as plain text
        # the way byte-level BPE without special-token handling does.
        ids = tok.encode(text, add_special_tokens=False, split_special_tokens=True)
        cases.append({"text": text, "ids": ids})
    out = ROOT / "crates/core/tests/fixtures/tokenizer_cases.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(cases, ensure_ascii=False, indent=1))
    print("wrote", out, len(cases))


if __name__ == "__main__":
    main()
