"""Shared helpers for the oracle scripts: file access and the generator."""

import json
import os

HERE = os.path.dirname(os.path.abspath(__file__))
DATA = os.path.join(HERE, "..", "data")
GOLDEN = os.path.join(HERE, "..", "golden", "oracle")

MASK = (1 << 64) - 1


def data_path(*parts):
    return os.path.join(DATA, *parts)


def read_json(*parts):
    with open(data_path(*parts), encoding="utf-8") as f:
        return json.load(f)


def read_jsonl(*parts):
    with open(data_path(*parts), encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def write_golden(name, value):
    os.makedirs(GOLDEN, exist_ok=True)
    path = os.path.join(GOLDEN, name)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(value, f, indent=2, ensure_ascii=False)
        f.write("\n")
    print("wrote", os.path.relpath(path))


class SplitMix64:
    def __init__(self, seed):
        self.state = seed & MASK

    def next_u64(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        return z ^ (z >> 31)

    def below(self, n):
        return (self.next_u64() * n) >> 64

    def next_f64(self):
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def sample_indices(self, n, k):
        k = min(k, n)
        idx = list(range(n))
        for i in range(k):
            j = i + self.below(n - i)
            idx[i], idx[j] = idx[j], idx[i]
        return idx[:k]


def fnv1a64(data):
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & MASK
    return h
