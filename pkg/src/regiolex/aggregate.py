"""Aggregate per-instance explanations into per-class ranked lexicons.

Words selected as explanations for more than one class are discarded
(class-exclusivity), words selected in fewer than min_support instances are
discarded, and the survivors are ranked per class by their average impact
score, keeping the top top_k.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from pathlib import Path

from .errors import ValidationError
from .explain import InstanceExplanation

logger = logging.getLogger(__name__)

DEFAULT_TOP_K = 100
DEFAULT_MIN_SUPPORT = 2

_IMPACT_FMT = "{:.6f}"


@dataclass
class SelectionRecord:
    word: str
    class_index: int
    impact: float
    instance_id: str


@dataclass
class LexiconEntry:
    word: str
    avg_impact: float
    support: int


@dataclass
class ClassLexicon:
    class_index: int
    label: str
    entries: list[LexiconEntry]


def aggregate(
    explanations: list[InstanceExplanation],
    manifest: list[str],
    top_k: int = DEFAULT_TOP_K,
    min_support: int = DEFAULT_MIN_SUPPORT,
) -> list[ClassLexicon]:
    """Build one lexicon per manifest class. An empty explanation list yields
    empty lexicons."""
    if top_k <= 0:
        raise ValidationError("top_k must be > 0")
    if min_support < 1:
        raise ValidationError("min_support must be >= 1")
    selections: dict[str, dict[int, list[float]]] = {}
    for e in explanations:
        for word, impact in e.top_words:
            selections.setdefault(word, {}).setdefault(e.predicted, []).append(impact)
    per_class: dict[int, list[LexiconEntry]] = {c: [] for c in range(len(manifest))}
    for word, by_class in selections.items():
        if len(by_class) != 1:
            continue  # selected for more than one class
        (cls, impacts), = by_class.items()
        support = len(impacts)
        if support < min_support:
            continue
        per_class[cls].append(
            LexiconEntry(word=word, avg_impact=sum(impacts) / support, support=support)
        )
    lexicons = []
    for c, label in enumerate(manifest):
        entries = sorted(per_class[c], key=lambda en: (-en.avg_impact, en.word))[:top_k]
        lexicons.append(ClassLexicon(class_index=c, label=label, entries=entries))
    return lexicons


def _safe_name(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9_-]", "_", label)


def lexicon_file_name(label: str) -> str:
    return f"lexicon_{_safe_name(label)}.tsv"


SUMMARY_FILE_NAME = "lexicons_summary.tsv"


def lexicon_report(lexicons: list[ClassLexicon], out_dir: str | Path) -> list[Path]:
    """Write one ranked TSV per class (rank, word, avg_impact, support) plus a
    combined summary TSV. Reruns on identical input are byte-identical."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for lex in lexicons:
        path = out_dir / lexicon_file_name(lex.label)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("rank\tword\tavg_impact\tsupport\n")
            for rank, en in enumerate(lex.entries, start=1):
                fh.write(f"{rank}\t{en.word}\t{_IMPACT_FMT.format(en.avg_impact)}\t{en.support}\n")
        written.append(path)
    summary = out_dir / SUMMARY_FILE_NAME
    with open(summary, "w", encoding="utf-8") as fh:
        fh.write("class\trank\tword\tavg_impact\tsupport\n")
        for lex in lexicons:
            for rank, en in enumerate(lex.entries, start=1):
                fh.write(f"{lex.label}\t{rank}\t{en.word}\t"
                         f"{_IMPACT_FMT.format(en.avg_impact)}\t{en.support}\n")
    written.append(summary)
    return written


def read_lexicons(summary_path: str | Path, manifest: list[str]) -> list[ClassLexicon]:
    """Read lexicons back from the combined summary TSV, aligned with the
    manifest (classes with no surviving words come back empty)."""
    by_label: dict[str, list[LexiconEntry]] = {name: [] for name in manifest}
    with open(summary_path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != "class\trank\tword\tavg_impact\tsupport":
            raise ValidationError(f"{summary_path}: unexpected summary header {header!r}")
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 5:
                raise ValidationError(f"{summary_path}: malformed row at line {lineno}")
            label, _rank, word, avg, support = parts
            if label not in by_label:
                raise ValidationError(
                    f"{summary_path}: class {label!r} at line {lineno} not in manifest"
                )
            by_label[label].append(
                LexiconEntry(word=word, avg_impact=float(avg), support=int(support))
            )
    return [
        ClassLexicon(class_index=c, label=name, entries=by_label[name])
        for c, name in enumerate(manifest)
    ]
