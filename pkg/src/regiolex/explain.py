"""Per-instance leave-one-word-out explanations.

For each correctly classified instance, every unique word is removed in turn
(all of its occurrences at once), the text is rescored, and the word's impact
is the drop in the probability of the originally predicted class:
impact = base_score - ablated_score. The top five words per instance by
impact are kept. Misclassified instances are skipped and counted.
"""

from __future__ import annotations

import functools
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .classifier import Scorer, score_batch
from .corpus import Dataset, LabeledInstance
from .errors import ToolkitError, ValidationError
from .features import remove_word, tokenize

logger = logging.getLogger(__name__)

DEFAULT_TOP_WORDS = 5


@dataclass
class AblationRecord:
    word: str
    ablated_text: str
    score: float  # probability of the originally predicted class on the ablated text
    impact: float  # base_score - score


@dataclass
class InstanceExplanation:
    instance_id: str
    true_label: int
    predicted: int
    base_score: float
    top_words: list[tuple[str, float]]


@dataclass
class SkipStats:
    per_class: dict[str, int]
    explained: int
    skipped: int


def ablate_instance(
    scorer: Scorer, text: str, target_class: int, base_score: float
) -> list[AblationRecord]:
    """One ablation record per unique word of the text, in first-occurrence
    order. Ablation removes all occurrences from the full text; any length
    truncation happens inside the scorer on rescoring."""
    seen: dict[str, int] = {}
    for pos, tok in enumerate(tokenize(text)):
        if tok not in seen:
            seen[tok] = pos
    words = list(seen)
    if not words:
        return []
    ablated = [remove_word(text, w) for w in words]
    results = score_batch(scorer, ablated)
    records = []
    for word, abl_text, probs in zip(words, ablated, results):
        score = probs[target_class]
        records.append(
            AblationRecord(word=word, ablated_text=abl_text, score=score,
                           impact=base_score - score)
        )
    return records


def rank_words(records: list[AblationRecord], text: str, top_words: int) -> list[tuple[str, float]]:
    """Top words by impact, descending. Ties break by earlier first occurrence
    in the text, then lexicographically, so output is deterministic."""
    first_pos: dict[str, int] = {}
    for pos, tok in enumerate(tokenize(text)):
        if tok not in first_pos:
            first_pos[tok] = pos
    ranked = sorted(records, key=lambda r: (-r.impact, first_pos[r.word], r.word))
    return [(r.word, r.impact) for r in ranked[:top_words]]


def explain_instance(
    scorer: Scorer, inst: LabeledInstance, top_words: int = DEFAULT_TOP_WORDS
) -> InstanceExplanation | None:
    """Explain one instance, or return None if it is misclassified."""
    base_probs = score_batch(scorer, [inst.text])[0]
    predicted = int(np.argmax(base_probs))
    if predicted != inst.label:
        return None
    base_score = base_probs[predicted]
    records = ablate_instance(scorer, inst.text, predicted, base_score)
    return InstanceExplanation(
        instance_id=inst.id,
        true_label=inst.label,
        predicted=predicted,
        base_score=base_score,
        top_words=rank_words(records, inst.text, top_words),
    )


def _explain_one(scorer: Scorer, top_words: int, inst: LabeledInstance):
    return explain_instance(scorer, inst, top_words)


def explain_corpus(
    scorer: Scorer,
    data: Dataset,
    top_words: int = DEFAULT_TOP_WORDS,
    workers: int = 1,
) -> tuple[list[InstanceExplanation], SkipStats]:
    """Explain every instance of the dataset. Output is sorted by instance id
    and is independent of the worker count. Misclassified instances are
    skipped and tallied per true class."""
    if list(scorer.labels) != list(data.manifest):
        raise ValidationError(
            f"scorer manifest {list(scorer.labels)!r} does not match "
            f"dataset manifest {list(data.manifest)!r}"
        )
    instances = data.instances
    if workers > 1 and not scorer.parallel_safe:
        logger.info("scorer does not support parallel workers; running sequentially")
        workers = 1
    if workers > 1:
        fn = functools.partial(_explain_one, scorer, top_words)
        chunksize = max(1, len(instances) // (workers * 8))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(fn, instances, chunksize=chunksize))
    else:
        results = []
        for done, inst in enumerate(instances):
            try:
                results.append(explain_instance(scorer, inst, top_words))
            except ToolkitError:
                logger.error(
                    "scorer failed on instance %s (%d/%d explained before failure)",
                    inst.id, done, len(instances),
                )
                raise
    explanations = [r for r in results if r is not None]
    explanations.sort(key=lambda e: e.instance_id)
    per_class = {name: 0 for name in data.manifest}
    for inst, result in zip(instances, results):
        if result is None:
            per_class[data.manifest[inst.label]] += 1
    stats = SkipStats(
        per_class=per_class,
        explained=len(explanations),
        skipped=len(instances) - len(explanations),
    )
    return explanations, stats


def write_explanations(
    path: str | Path,
    explanations: list[InstanceExplanation],
    stats: SkipStats,
    manifest: list[str],
) -> None:
    """Line-delimited JSON sorted by instance id, with the skip statistics
    (and the label manifest, so the file is self-contained) as a trailer."""
    ordered = sorted(explanations, key=lambda e: e.instance_id)
    with open(path, "w", encoding="utf-8") as fh:
        for e in ordered:
            rec = {
                "instance_id": e.instance_id,
                "label": manifest[e.predicted],
                "base_score": e.base_score,
                "top": [[w, imp] for w, imp in e.top_words],
            }
            fh.write(json.dumps(rec, ensure_ascii=False, separators=(",", ":")) + "\n")
        trailer = {
            "manifest": manifest,
            "explained": stats.explained,
            "skipped": stats.skipped,
            "skip_stats": {name: stats.per_class.get(name, 0) for name in manifest},
        }
        fh.write(json.dumps(trailer, ensure_ascii=False, separators=(",", ":")) + "\n")


def read_explanations(path: str | Path) -> tuple[list[InstanceExplanation], SkipStats, list[str]]:
    explanations: list[InstanceExplanation] = []
    trailer = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                raise ValidationError(f"{path}: corrupt explanations line {lineno}")
            if "skip_stats" in obj:
                trailer = obj
            else:
                explanations.append((obj, lineno))
    if trailer is None:
        raise ValidationError(f"{path}: missing skip-stats trailer record")
    manifest = trailer["manifest"]
    index = {name: i for i, name in enumerate(manifest)}
    out = []
    for obj, lineno in explanations:
        try:
            label = index[obj["label"]]
            out.append(InstanceExplanation(
                instance_id=obj["instance_id"],
                true_label=label,
                predicted=label,
                base_score=float(obj["base_score"]),
                top_words=[(w, float(imp)) for w, imp in obj["top"]],
            ))
        except (KeyError, TypeError, ValueError):
            raise ValidationError(f"{path}: corrupt explanation record at line {lineno}")
    stats = SkipStats(
        per_class=dict(trailer["skip_stats"]),
        explained=int(trailer["explained"]),
        skipped=int(trailer["skipped"]),
    )
    return out, stats, manifest
