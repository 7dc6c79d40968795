"""
Timing incremental updates against full recomputation
=====================================================

A Zipfian synthetic repository with 1% of its files churning per step.
Both paths must produce the same ranking; only the time differs.
"""

import statistics

from incbl import evalbench
from incbl.evalbench import SyntheticSpec

spec = SyntheticSpec(n_docs=1000, vocab_size=12000, transitions=3)
corpus = evalbench.generate_corpus(spec)
reports = evalbench.bench_compare(corpus.states, corpus.queries, corpus.history, repeats=2)
print(evalbench.format_bench(reports))
print("median t_inc / t_full:", round(statistics.median(r.ratio for r in reports), 3))
