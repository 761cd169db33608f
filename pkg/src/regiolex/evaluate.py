"""Classifier quality metrics, place-name share measurement, and report
rendering.

evaluate() fills a confusion matrix and per-class precision/recall/F1 for any
scorer satisfying the scoring contract. place_name_share() measures how many
lexicon words match a gazetteer. run_report() renders one plain-text report,
a JSON sidecar mirroring every number in it, and PNG figures.
"""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .aggregate import ClassLexicon
from .classifier import Scorer, score_batch
from .corpus import Dataset
from .errors import ValidationError

logger = logging.getLogger(__name__)

EVAL_BATCH_SIZE = 256

# Derivational suffix allowance for gazetteer prefix matches ("Österreich" ->
# "Österreicher"): the remainder after the matched prefix must be this short.
PREFIX_MAX_EXTRA = 4

HEAD_WORDS = 10  # lexicon entries shown per class in reports
FIGURE_DPI = 150


@dataclass
class ClassScores:
    label: str
    precision: float
    recall: float
    f1: float
    # 0/0 cases are reported as 0.0 with the matching flag set.
    precision_undefined: bool = False
    recall_undefined: bool = False

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "precision_undefined": self.precision_undefined,
            "recall_undefined": self.recall_undefined,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClassScores":
        return cls(
            label=d["label"],
            precision=d["precision"],
            recall=d["recall"],
            f1=d["f1"],
            precision_undefined=d["precision_undefined"],
            recall_undefined=d["recall_undefined"],
        )


@dataclass
class Metrics:
    n: int
    accuracy: float
    labels: list[str]
    confusion: list[list[int]]  # rows = true class, cols = predicted class
    per_class: list[ClassScores]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "accuracy": self.accuracy,
            "labels": list(self.labels),
            "confusion": [list(row) for row in self.confusion],
            "per_class": [cs.to_dict() for cs in self.per_class],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Metrics":
        return cls(
            n=d["n"],
            accuracy=d["accuracy"],
            labels=list(d["labels"]),
            confusion=[list(row) for row in d["confusion"]],
            per_class=[ClassScores.from_dict(c) for c in d["per_class"]],
        )


def _argmax(vec: list[float]) -> int:
    best = 0
    for j in range(1, len(vec)):
        if vec[j] > vec[best]:
            best = j
    return best


def _per_class_scores(labels: list[str], confusion: list[list[int]]) -> list[ClassScores]:
    k = len(labels)
    out = []
    for c in range(k):
        tp = confusion[c][c]
        true_total = sum(confusion[c])
        pred_total = sum(confusion[r][c] for r in range(k))
        precision_undefined = pred_total == 0
        recall_undefined = true_total == 0
        precision = 0.0 if precision_undefined else tp / pred_total
        recall = 0.0 if recall_undefined else tp / true_total
        f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
        out.append(
            ClassScores(
                label=labels[c],
                precision=precision,
                recall=recall,
                f1=f1,
                precision_undefined=precision_undefined,
                recall_undefined=recall_undefined,
            )
        )
    return out


def evaluate(scorer: Scorer, data: Dataset, batch_size: int = EVAL_BATCH_SIZE) -> Metrics:
    """Score every instance and tally the confusion matrix. The scorer's label
    manifest must match the dataset's."""
    if list(scorer.labels) != list(data.manifest):
        raise ValidationError(
            f"scorer manifest {list(scorer.labels)!r} does not match "
            f"dataset manifest {list(data.manifest)!r}"
        )
    if not data.instances:
        raise ValidationError("cannot evaluate on an empty dataset")
    if batch_size <= 0:
        raise ValidationError("batch_size must be > 0")
    k = len(data.manifest)
    confusion = [[0] * k for _ in range(k)]
    instances = data.instances
    for start in range(0, len(instances), batch_size):
        chunk = instances[start : start + batch_size]
        probs = score_batch(scorer, [inst.text for inst in chunk])
        for inst, vec in zip(chunk, probs):
            confusion[inst.label][_argmax(vec)] += 1
    n = len(instances)
    correct = sum(confusion[c][c] for c in range(k))
    return Metrics(
        n=n,
        accuracy=correct / n,
        labels=list(data.manifest),
        confusion=confusion,
        per_class=_per_class_scores(list(data.manifest), confusion),
    )


def random_baseline(k: int) -> float:
    """Expected accuracy of uniform random guessing over k balanced classes."""
    if k < 2:
        raise ValidationError(f"class count must be >= 2, got {k}")
    return 1.0 / k


class MatchPolicy(enum.Enum):
    EXACT = "exact"
    EXACT_OR_PREFIX_DERIVATION = "exact_or_prefix_derivation"


@dataclass(frozen=True)
class Gazetteer:
    names: frozenset[str]
    match_policy: MatchPolicy = MatchPolicy.EXACT

    def __post_init__(self) -> None:
        if not self.names:
            raise ValidationError("gazetteer must contain at least one name")

    def matches(self, word: str) -> bool:
        if word in self.names:
            return True
        if self.match_policy is MatchPolicy.EXACT_OR_PREFIX_DERIVATION:
            for name in self.names:
                extra = len(word) - len(name)
                if 1 <= extra <= PREFIX_MAX_EXTRA and word.startswith(name):
                    return True
        return False


def load_gazetteer(path: str | Path, match_policy: MatchPolicy = MatchPolicy.EXACT) -> Gazetteer:
    """Read one place name per line; blank lines and `#` comments are ignored,
    surrounding whitespace is stripped, duplicates collapse."""
    names = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            entry = line.strip()
            if not entry or entry.startswith("#"):
                continue
            names.add(entry)
    if not names:
        raise ValidationError(f"gazetteer {path} contains no names")
    return Gazetteer(names=frozenset(names), match_policy=match_policy)


@dataclass
class PlaceNameReport:
    labels: list[str]
    per_class_share: list[float]
    mean_share: float
    matched_words: list[list[str]]
    empty_classes: list[str]  # classes whose lexicon had no entries (share 0)
    policy: MatchPolicy

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "per_class_share": list(self.per_class_share),
            "mean_share": self.mean_share,
            "matched_words": [list(ws) for ws in self.matched_words],
            "empty_classes": list(self.empty_classes),
            "policy": self.policy.value,
        }


def place_name_share(lexicons: list[ClassLexicon], gaz: Gazetteer) -> PlaceNameReport:
    """Per class, the fraction of lexicon words matching the gazetteer, plus
    the unweighted mean across classes and the matched words for audit."""
    if not lexicons:
        raise ValidationError("place_name_share requires at least one lexicon")
    labels = []
    shares = []
    matched_all = []
    empty = []
    for lex in lexicons:
        labels.append(lex.label)
        if not lex.entries:
            logger.warning("lexicon for class %s is empty; share reported as 0", lex.label)
            empty.append(lex.label)
            shares.append(0.0)
            matched_all.append([])
            continue
        matched = sorted(en.word for en in lex.entries if gaz.matches(en.word))
        shares.append(len(matched) / len(lex.entries))
        matched_all.append(matched)
    return PlaceNameReport(
        labels=labels,
        per_class_share=shares,
        mean_share=sum(shares) / len(shares),
        matched_words=matched_all,
        empty_classes=empty,
        policy=gaz.match_policy,
    )


def _render_confusion_text(labels: list[str], confusion: list[list[int]]) -> list[str]:
    width = max(
        [len("true\\pred")]
        + [len(name) for name in labels]
        + [len(str(v)) for row in confusion for v in row]
    )
    lines = ["  ".join(["true\\pred".rjust(width)] + [name.rjust(width) for name in labels])]
    for name, row in zip(labels, confusion):
        lines.append("  ".join([name.rjust(width)] + [str(v).rjust(width) for v in row]))
    return lines


def _render_text(
    metrics: Metrics,
    lexicons: list[ClassLexicon],
    place_report: PlaceNameReport | None,
    figures: list[str],
) -> str:
    lines = []
    lines.append("Region classification report")
    lines.append("============================")
    lines.append("")
    lines.append(f"Instances scored: {metrics.n}")
    lines.append(
        f"Accuracy: {metrics.accuracy:.6f}"
        f"  (random baseline over {len(metrics.labels)} classes:"
        f" {random_baseline(len(metrics.labels)):.6f})"
    )
    lines.append("")
    lines.append("Confusion matrix (rows = true, cols = predicted)")
    lines.extend(_render_confusion_text(metrics.labels, metrics.confusion))
    lines.append("")
    lines.append("Per-class scores")
    for cs in metrics.per_class:
        flags = []
        if cs.precision_undefined:
            flags.append("precision 0/0")
        if cs.recall_undefined:
            flags.append("recall 0/0")
        note = f"  [{', '.join(flags)}]" if flags else ""
        lines.append(
            f"  {cs.label}: precision {cs.precision:.6f}"
            f"  recall {cs.recall:.6f}  f1 {cs.f1:.6f}{note}"
        )
    lines.append("")
    lines.append(f"Lexicon heads (top {HEAD_WORDS} by average impact)")
    for lex in lexicons:
        lines.append(f"  {lex.label} ({len(lex.entries)} words)")
        if not lex.entries:
            lines.append("    (no entries)")
        for rank, en in enumerate(lex.entries[:HEAD_WORDS], start=1):
            lines.append(
                f"    {rank:2d}. {en.word}  avg_impact {en.avg_impact:.6f}"
                f"  support {en.support}"
            )
    if place_report is not None:
        lines.append("")
        lines.append(f"Place-name share (policy: {place_report.policy.value})")
        for label, share, matched in zip(
            place_report.labels, place_report.per_class_share, place_report.matched_words
        ):
            note = "  [empty lexicon]" if label in place_report.empty_classes else ""
            lines.append(f"  {label}: {share:.6f}  ({len(matched)} matched){note}")
        lines.append(f"  mean share: {place_report.mean_share:.6f}")
    lines.append("")
    lines.append("Figures: " + ", ".join(figures))
    lines.append("")
    return "\n".join(lines)


def _fig_confusion(metrics: Metrics, path: Path) -> None:
    k = len(metrics.labels)
    fig, ax = plt.subplots(figsize=(1.2 * k + 2.4, 1.2 * k + 1.6))
    im = ax.imshow(metrics.confusion, cmap="Blues")
    ax.set_xticks(range(k), labels=metrics.labels, rotation=45, ha="right")
    ax.set_yticks(range(k), labels=metrics.labels)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    peak = max(max(row) for row in metrics.confusion)
    for r in range(k):
        for c in range(k):
            v = metrics.confusion[r][c]
            color = "white" if peak and v > peak / 2 else "black"
            ax.text(c, r, str(v), ha="center", va="center", color=color)
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=FIGURE_DPI, metadata={"Software": None})
    plt.close(fig)


def _fig_lexicons(lexicons: list[ClassLexicon], path: Path) -> None:
    k = len(lexicons)
    fig, axes = plt.subplots(1, k, figsize=(3.2 * k, 4.0), squeeze=False)
    for ax, lex in zip(axes[0], lexicons):
        head = lex.entries[:HEAD_WORDS]
        ax.set_title(lex.label)
        if head:
            words = [en.word for en in head]
            impacts = [en.avg_impact for en in head]
            ax.barh(range(len(head)), impacts, color="tab:blue")
            ax.set_yticks(range(len(head)), labels=words)
            ax.invert_yaxis()  # rank 1 on top
            ax.set_xlabel("avg impact")
        else:
            ax.text(0.5, 0.5, "no entries", ha="center", va="center")
            ax.set_xticks([])
            ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(path, dpi=FIGURE_DPI, metadata={"Software": None})
    plt.close(fig)


def _fig_place_share(place_report: PlaceNameReport, path: Path) -> None:
    k = len(place_report.labels)
    fig, ax = plt.subplots(figsize=(1.0 * k + 2.8, 3.6))
    ax.bar(range(k), place_report.per_class_share, color="tab:green")
    ax.axhline(place_report.mean_share, color="black", linestyle="--", linewidth=1,
               label=f"mean {place_report.mean_share:.3f}")
    ax.set_xticks(range(k), labels=place_report.labels, rotation=45, ha="right")
    ax.set_ylabel("share of lexicon in gazetteer")
    ax.set_ylim(0, 1)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=FIGURE_DPI, metadata={"Software": None})
    plt.close(fig)


def run_report(
    metrics: Metrics,
    lexicons: list[ClassLexicon],
    place_report: PlaceNameReport | None,
    out_dir: str | Path,
) -> list[Path]:
    """Write report.txt, report.json mirroring every number in the text, and
    PNG figures. Reruns on identical input are byte-identical."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    figures = ["fig_confusion.png", "fig_lexicons.png"]
    if place_report is not None:
        figures.append("fig_place_share.png")

    text = _render_text(metrics, lexicons, place_report, figures)
    text_path = out_dir / "report.txt"
    text_path.write_text(text, encoding="utf-8")

    sidecar = {
        "metrics": metrics.to_dict(),
        "random_baseline": random_baseline(len(metrics.labels)),
        "lexicon_heads": {
            lex.label: [[en.word, en.avg_impact, en.support] for en in lex.entries[:HEAD_WORDS]]
            for lex in lexicons
        },
        "lexicon_sizes": {lex.label: len(lex.entries) for lex in lexicons},
        "place_names": place_report.to_dict() if place_report is not None else None,
        "figures": figures,
    }
    json_path = out_dir / "report.json"
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")

    _fig_confusion(metrics, out_dir / "fig_confusion.png")
    _fig_lexicons(lexicons, out_dir / "fig_lexicons.png")
    if place_report is not None:
        _fig_place_share(place_report, out_dir / "fig_place_share.png")
    written = [text_path, json_path] + [out_dir / name for name in figures]
    return written
