"""
Incremental updates versus a full rebuild
=========================================

Apply a change set to a live model and confirm it lands on the same
document frequencies and idf values that rebuilding from scratch produces.
"""

import numpy as np

from incbl import ChangeSet, TermDocIndex
from incbl.preprocess import TermCounts

docs = {
    "a.c": TermCounts({"parser": 2, "token": 1}),
    "b.c": TermCounts({"stream": 2, "buffer": 1, "token": 1}),
    "c.c": TermCounts({"render": 1}),
}
index = TermDocIndex.rebuild(docs)
print("idf before:", index.idf_by_term())

# one deletion, one edit, one new file: M stays at 3
changes = ChangeSet(
    added=[("d.c", TermCounts({"socket": 1, "token": 3}))],
    deleted=["c.c"],
    modified=[("a.c", TermCounts({"parser": 1, "layout": 2}))],
)
report = index.apply(changes)
print("delta_M:", report.delta_M, "touched terms:", report.touched_terms)
print("tombstoned ids:", report.removed_terms, "new ids:", report.new_terms)

docs = {"a.c": changes.modified[0][1], "b.c": docs["b.c"], "d.c": changes.added[0][1]}
fresh = TermDocIndex.rebuild(docs)
assert index.df_by_term() == fresh.df_by_term()
inc, ref = index.idf_by_term(), fresh.idf_by_term()
print("max idf difference:", max(abs(inc[t] - ref[t]) for t in ref))

# growing the corpus shifts every untouched idf by the same amount
before = index.idf_by_term()["stream"]
index.apply(ChangeSet(added=[("e.c", TermCounts({"widget": 1})), ("f.c", TermCounts({"widget": 1}))]))
after = index.idf_by_term()["stream"]
print("stream idf shift:", after - before, "expected:", np.log(5 / 3))
