"""
Measuring retrieval quality
===========================

Average precision, MAP and Top-N over reports whose fixed files are known.
"""

from incbl import evalbench
from incbl.evalbench import SyntheticSpec

print("AP, relevant at rank 1:", evalbench.average_precision(["a", "b", "c"], {"a"}))
print("AP, relevant at ranks 1 and 3:", evalbench.average_precision(["a", "b", "c"], {"a", "c"}))

spec = SyntheticSpec(n_docs=300, vocab_size=3000, mean_length=80, transitions=4, n_history=20, seed=11)
corpus = evalbench.generate_corpus(spec)
loc = evalbench.build_initial(corpus.states[-1], corpus.history)
summary = evalbench.evaluate(evalbench.judge(loc, corpus.queries, "synthetic"))
print(summary.to_table())
