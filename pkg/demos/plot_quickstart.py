"""
Ranking source files for a bug report
=====================================

Index a tiny code base, store one past fix, and rank files for a new report.
"""

from incbl import BugReport, Localizer, RankParams
from incbl.preprocess import build_code_document

# preprocess raw source into term counts
sources = {
    "Parser.java": "class Parser { Token nextToken() { return lexer.read(); } }",
    "StreamBuffer.java": "class StreamBuffer { void flushStream() { buffer.clear(); } }",
    "render.py": "def render_frame(canvas):\n    canvas.draw()\n",
}
docs = {path: build_code_document(path, text) for path, text in sources.items()}
print(docs["Parser.java"])

# a past report whose fix touched render.py
history = [BugReport("R1", "frame render flicker", fixed_files=("render.py",))]

loc = Localizer.from_documents(docs, history, RankParams(alpha=0.25, top_k=3))

report = BugReport("NEW-1", title="Crash in parser on empty token", description="nextToken throws")
for rec in loc.localize(report).records():
    print(rec)
