#!/usr/bin/env python3
"""Rebuild GPT-2 `vocab.json` / `merges.txt` from an `r50k_base.tiktoken` rank file.

The r50k ranking is the GPT-2 byte-level BPE table: token id == merge rank,
ids 0..255 are single bytes. Each multi-byte token's merge pair is recovered
by running rank-restricted BPE on its bytes, which must terminate in exactly
two parts.

usage: make_gpt2_tokenizer_assets.py <r50k_base.tiktoken> <out_dir>
"""
import base64
import json
import sys
from pathlib import Path


def bytes_to_unicode():
    bs = (
        list(range(ord("!"), ord("~") + 1))
        + list(range(ord("¡"), ord("¬") + 1))
        + list(range(ord("®"), ord("ÿ") + 1))
    )
    cs = bs[:]
    n = 0
    for b in range(256):
        if b not in bs:
            bs.append(b)
            cs.append(256 + n)
            n += 1
    return dict(zip(bs, map(chr, cs)))


def split_pair(token, ranks, max_rank):
    parts = [bytes([b]) for b in token]
    while True:
        best = None
        for i in range(len(parts) - 1):
            r = ranks.get(parts[i] + parts[i + 1])
            if r is not None and r < max_rank and (best is None or r < best[0]):
                best = (r, i)
        if best is None:
            break
        i = best[1]
        parts = parts[:i] + [parts[i] + parts[i + 1]] + parts[i + 2 :]
    return parts


def main():
    src, out = Path(sys.argv[1]), Path(sys.argv[2])
    ranks = {}
    for line in src.read_text().splitlines():
        if not line:
            continue
        tok, rank = line.split()
        ranks[base64.b64decode(tok)] = int(rank)

    b2u = bytes_to_unicode()
    to_str = lambda bs: "".join(b2u[b] for b in bs)

    vocab = {to_str(tok): rank for tok, rank in ranks.items()}
    vocab["<|endoftext|>"] = len(ranks)

    merges = []
    for tok, rank in sorted(ranks.items(), key=lambda kv: kv[1]):
        if len(tok) == 1:
            continue
        parts = split_pair(tok, ranks, rank)
        assert len(parts) == 2, (tok, parts)
        merges.append(f"{to_str(parts[0])} {to_str(parts[1])}")

    out.mkdir(parents=True, exist_ok=True)
    (out / "vocab.json").write_text(json.dumps(vocab, ensure_ascii=False))
    (out / "merges.txt").write_text("#version: 0.2\n" + "\n".join(merges) + "\n")
    print(f"{len(vocab)} vocab entries, {len(merges)} merges -> {out}")


if __name__ == "__main__":
    main()
