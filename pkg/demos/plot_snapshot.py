"""
Saving and restoring a model
============================

Persist a model, reload it, and keep updating it incrementally. The loaded
model scores exactly like the one that was never written to disk.
"""

import tempfile
from pathlib import Path

from incbl import BugReport, ChangeSet, Localizer
from incbl.ingest import load_snapshot, save_snapshot
from incbl.preprocess import TermCounts

loc = Localizer.from_documents(
    {"a.c": TermCounts({"parser": 2}), "b.c": TermCounts({"stream": 1, "token": 2})},
    [BugReport("R1", "parser crash", fixed_files=("a.c",))],
)

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "model.snap"
    save_snapshot(loc, path)
    print("snapshot size:", path.stat().st_size, "bytes")
    restored = load_snapshot(path)

change = ChangeSet(added=[("c.c", TermCounts({"token": 1, "render": 1}))])
loc.apply(change)
restored.apply(change)

query = BugReport("Q", "token parser")
print(list(loc.localize(query)) == list(restored.localize(query)))
