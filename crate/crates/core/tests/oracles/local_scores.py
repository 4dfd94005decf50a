"""Average negative log-likelihood of template bodies under the byte-bigram
model with add-one smoothing, for 50 (query, template) pairs of the
benchmark fixture.

Context is the query text followed by a blank line; the first template byte
is conditioned on the last context byte."""

import math

from common import read_json, read_jsonl, write_golden


class Bigram:
    def __init__(self, corpus):
        data = corpus.encode("utf-8")
        self.pairs = {}
        self.rows = [0] * 256
        for a, b in zip(data, data[1:]):
            self.pairs[(a, b)] = self.pairs.get((a, b), 0) + 1
            self.rows[a] += 1

    def logprob(self, a, b):
        return math.log((self.pairs.get((a, b), 0) + 1) / (self.rows[a] + 256))

    def mean_nll(self, context, continuation):
        ctx = context.encode("utf-8")
        prev = ctx[-1] if ctx else 0
        total = 0.0
        n = 0
        for b in continuation.encode("utf-8"):
            total += self.logprob(prev, b)
            prev = b
            n += 1
        return -total / n


def main():
    script = read_json("benchmark", "script.json")
    model = Bigram(script["bigram_corpus"])
    queries = read_jsonl("benchmark", "queries.jsonl")
    templates = read_json("benchmark", "library.json")["templates"]
    out = []
    for qi, q in enumerate(queries):
        for ti, t in enumerate(templates):
            if (qi * len(templates) + ti) % 12 >= 5:
                continue
            out.append({
                "query_id": q["id"],
                "template_id": t["id"],
                "nll": model.mean_nll(q["content"] + "\n\n", t["body"]),
                "nll_raw_context": model.mean_nll(q["content"], t["body"]),
            })
    assert len(out) == 50, len(out)
    write_golden("local_scores.json", out)


if __name__ == "__main__":
    main()
