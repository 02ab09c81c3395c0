#!/usr/bin/env python3
"""Writes tests/data/mock_embeddings.json: hash-projection vectors of fixed texts.

Independent re-implementation of the mock embedder: every lowercase ASCII
alphanumeric word seeds splitmix64 with its FNV-1a 64 hash; each dimension adds
2u - 1 with u the top 53 bits of the next draw scaled to [0, 1); the sum is
L2-normalized.
"""
import json
import math
import re
import sys
from pathlib import Path

MASK = (1 << 64) - 1


def fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & MASK
    return h


def splitmix64(state: int):
    state = (state + 0x9E3779B97F4A7C15) & MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return state, z ^ (z >> 31)


def projection(text: str, dim: int):
    v = [0.0] * dim
    for word in re.findall(r"[A-Za-z0-9]+", text):
        state = fnv1a64(word.lower().encode("ascii"))
        for i in range(dim):
            state, x = splitmix64(state)
            u = (x >> 11) * 2.0**-53
            v[i] += 2.0 * u - 1.0
    sq = 0.0
    for x in v:
        sq += x * x
    norm = math.sqrt(sq)
    if norm > 0.0:
        v = [x / norm for x in v]
    return v


TEXTS = [
    "",
    "kinase",
    "ATP binding",
    "Reaction=a very-long-chain 2,3-saturated fatty acyl-CoA + NADP(+) = a very-long-chain (2E)-enoyl-CoA + NADPH + H(+);",
    "Endoplasmic reticulum membrane; Multi-pass membrane protein.",
    "Glutamine synthetase that catalyzes the ATP-dependent conversion of glutamate and ammonia to glutamine.",
    "repeat repeat repeat",
    "MiXeD CaSe 123 tokens",
]


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "tests/data/mock_embeddings.json"
    cases = []
    for dim in (8, 64):
        for t in TEXTS:
            cases.append({"text": t, "dim": dim, "vector": projection(t, dim)})
    out.write_text(json.dumps({"cases": cases}, indent=1) + "\n")


if __name__ == "__main__":
    main()
