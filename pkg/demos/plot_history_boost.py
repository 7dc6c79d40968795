"""
How fix history moves a file up the ranking
===========================================

Sweep the text weight ``alpha`` and watch a file with no textual match but
a similar past fix overtake the text matches.
"""

import numpy as np

from incbl import BugReport, Localizer, RankParams
from incbl.preprocess import TermCounts

docs = {
    "A.java": TermCounts({"parser": 2, "token": 1}),
    "B.java": TermCounts({"stream": 2, "buffer": 1, "token": 1}),
    "C.java": TermCounts({"render": 1}),
}
history = [BugReport("R1", "stream buffer overflow", fixed_files=("C.java",))]
loc = Localizer.from_documents(docs, history)
query = BugReport("Q", "parser stream token")

for alpha in np.linspace(0.0, 1.0, 6):
    ranked = loc.localize(query, RankParams(alpha=float(alpha)))
    row = "  ".join(f"{e.path}={e.relevance:.4f}" for e in ranked)
    print(f"alpha={alpha:.1f}  {row}")
