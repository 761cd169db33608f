"""Corpus handling: ingestion of geolocated posts, region labeling, splits,
and a synthetic-corpus generator with planted class markers.

Region schemes operationalize the German-speaking area as 3, 4 or 5 classes:
country borders (AT/DE/CH), with Germany optionally split at latitude
50.33° N into north/south, and the south further split at longitude 9.97° E
into west/east.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import ValidationError

logger = logging.getLogger(__name__)

LAT_SPLIT = 50.33
LON_SPLIT = 9.97

COUNTRIES = ("AT", "DE", "CH")


class SchemeKind(Enum):
    COUNTRIES3 = "countries3"
    SPLIT4 = "split4"
    SPLIT5 = "split5"


SCHEME_NAMES = tuple(kind.value for kind in SchemeKind)


@dataclass(frozen=True)
class RegionScheme:
    """One of the 3/4/5-class region operationalizations."""

    kind: SchemeKind
    lat_split: float = LAT_SPLIT
    lon_split: float = LON_SPLIT

    @property
    def labels(self) -> list[str]:
        if self.kind is SchemeKind.COUNTRIES3:
            return ["AT", "CH", "DE"]
        if self.kind is SchemeKind.SPLIT4:
            return ["AT", "CH", "DE-north", "DE-south"]
        return ["AT", "CH", "DE-north", "DE-south-west", "DE-south-east"]

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "lat_split": self.lat_split, "lon_split": self.lon_split}

    @staticmethod
    def from_dict(d: dict) -> "RegionScheme":
        return RegionScheme(SchemeKind(d["kind"]), float(d["lat_split"]), float(d["lon_split"]))


def scheme_from_name(name: str) -> RegionScheme:
    try:
        return RegionScheme(SchemeKind(name.lower()))
    except ValueError:
        valid = ", ".join(k.value for k in SchemeKind)
        raise ValidationError(f"unknown region scheme {name!r} (expected one of: {valid})")


@dataclass(frozen=True)
class RawPost:
    text: str
    country: str
    lat: float
    lon: float
    id: str | None = None


@dataclass(frozen=True)
class LabeledInstance:
    id: str
    text: str
    label: int


@dataclass
class Dataset:
    instances: list[LabeledInstance]
    manifest: list[str]

    def __len__(self) -> int:
        return len(self.instances)

    def validate(self) -> None:
        if len(set(self.manifest)) != len(self.manifest):
            raise ValidationError("dataset manifest contains duplicate label names")
        k = len(self.manifest)
        for inst in self.instances:
            if not 0 <= inst.label < k:
                raise ValidationError(
                    f"instance {inst.id!r} has label index {inst.label} outside manifest of size {k}"
                )

    def by_class(self) -> dict[int, list[LabeledInstance]]:
        groups: dict[int, list[LabeledInstance]] = {c: [] for c in range(len(self.manifest))}
        for inst in self.instances:
            groups[inst.label].append(inst)
        return groups


def normalize_text(raw: str) -> str:
    """Collapse whitespace runs (line breaks, tabs, repeated spaces) to single
    spaces and trim the ends. Case, punctuation and diacritics are untouched.

    Returns the empty string for whitespace-only input; the caller decides
    whether to drop the record.
    """
    return " ".join(raw.split())


def map_region(country: str, lat: float, lon: float, scheme: RegionScheme) -> str:
    """Map a geolocated post onto a region label name under the given scheme.

    AT and CH always map to their country label. DE is subdivided by the
    scheme: latitude >= 50.33 goes north; below that, longitude >= 9.97 goes
    east (half-open cells, deterministic on the boundary).
    """
    if country not in COUNTRIES:
        raise ValidationError(
            f"unknown country code {country!r} (expected one of: {', '.join(COUNTRIES)})"
        )
    if country != "DE":
        return country
    if scheme.kind is SchemeKind.COUNTRIES3:
        return "DE"
    if lat >= scheme.lat_split:
        return "DE-north"
    if scheme.kind is SchemeKind.SPLIT4:
        return "DE-south"
    return "DE-south-east" if lon >= scheme.lon_split else "DE-south-west"


@dataclass
class IngestStats:
    read: int = 0
    kept: int = 0
    malformed: int = 0
    dropped_empty: int = 0


def _parse_record(obj: dict, scheme: RegionScheme, labels: list[str], lineno: int):
    """Return (text, label_index) for one parsed JSON record, or None if the
    record is malformed. A pre-labeled record whose label is not in the scheme
    is a hard error."""
    text = obj.get("text")
    if not isinstance(text, str):
        return None
    if "label" in obj:
        label = obj["label"]
        if label not in labels:
            raise ValidationError(
                f"line {lineno}: pre-labeled record has label {label!r} "
                f"not in scheme labels {labels}"
            )
        return text, labels.index(label)
    country = obj.get("country")
    lat = obj.get("lat")
    lon = obj.get("lon")
    if not isinstance(country, str) or country not in COUNTRIES:
        return None
    if not isinstance(lat, (int, float)) or not isinstance(lon, (int, float)):
        return None
    if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
        return None
    return text, labels.index(map_region(country, float(lat), float(lon), scheme))


def ingest_with_stats(path: str | Path, scheme: RegionScheme) -> tuple[Dataset, IngestStats]:
    """Ingest a line-delimited JSON file of raw posts.

    Each line is either {text, country, lat, lon} or pre-labeled {text, label};
    unknown fields are ignored. Malformed lines are skipped and counted; records
    whose text normalizes to the empty string are dropped and counted. Output
    order equals input order.
    """
    labels = scheme.labels
    stats = IngestStats()
    instances: list[LabeledInstance] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            stats.read += 1
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                obj = None
            parsed = _parse_record(obj, scheme, labels, lineno) if isinstance(obj, dict) else None
            if parsed is None:
                stats.malformed += 1
                logger.warning("skipping malformed line %d (malformed so far: %d)",
                               lineno, stats.malformed)
                continue
            text, label = parsed
            text = normalize_text(text)
            if not text:
                stats.dropped_empty += 1
                continue
            rid = obj.get("id")
            if not isinstance(rid, str) or not rid:
                rid = f"{lineno:08d}"
            instances.append(LabeledInstance(id=rid, text=text, label=label))
            stats.kept += 1
    logger.info("ingested %d records: kept %d, malformed %d, empty %d",
                stats.read, stats.kept, stats.malformed, stats.dropped_empty)
    return Dataset(instances=instances, manifest=labels), stats


def ingest(path: str | Path, scheme: RegionScheme) -> Dataset:
    dataset, _ = ingest_with_stats(path, scheme)
    return dataset


def sample_splits(
    data: Dataset, per_class: dict[str, int], seed: int
) -> dict[str, Dataset]:
    """Draw disjoint per-class train/dev/test splits.

    Within each class, instances are pre-sorted by id and shuffled with a
    seeded Fisher-Yates shuffle, so splits are reproducible across platforms
    and input orderings. The first train/dev/test instances are assigned in
    that order.
    """
    for key in ("train", "dev", "test"):
        if key not in per_class:
            raise ValidationError(f"per_class is missing the {key!r} count")
        if per_class[key] < 0:
            raise ValidationError(f"per_class[{key!r}] must be >= 0")
    need = per_class["train"] + per_class["dev"] + per_class["test"]
    groups = data.by_class()
    for c, label in enumerate(data.manifest):
        if len(groups[c]) < need:
            raise ValidationError(
                f"class {label!r} has {len(groups[c])} instances, "
                f"need {need} (short by {need - len(groups[c])})"
            )
    out: dict[str, list[LabeledInstance]] = {"train": [], "dev": [], "test": []}
    for c, label in enumerate(data.manifest):
        pool = sorted(groups[c], key=lambda inst: inst.id)
        random.Random(f"{seed}|{label}").shuffle(pool)
        a = per_class["train"]
        b = a + per_class["dev"]
        out["train"].extend(pool[:a])
        out["dev"].extend(pool[a:b])
        out["test"].extend(pool[b:need])
    return {key: Dataset(instances=insts, manifest=list(data.manifest))
            for key, insts in out.items()}


@dataclass
class SyntheticSpec:
    """Parameters for the planted-marker synthetic corpus.

    Each post of class c draws tokens from a shared vocabulary; every token
    position is independently replaced by a uniformly chosen class-c marker
    with probability marker_injection_prob. The first place_names_per_class
    markers of each class are designated place names and emitted as a
    gazetteer sidecar.
    """

    n_classes: int = 3
    shared_vocab_size: int = 200
    markers_per_class: int = 20
    marker_injection_prob: float = 0.3
    place_names_per_class: int = 3
    posts_per_class: int = 3000
    mean_post_length: float = 12.0
    seed: int = 7

    def validate(self) -> None:
        for name in ("n_classes", "shared_vocab_size", "markers_per_class",
                     "place_names_per_class", "posts_per_class"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"SyntheticSpec.{name} must be > 0")
        if not 0.0 < self.marker_injection_prob <= 1.0:
            raise ValidationError("marker_injection_prob must be in (0, 1]")
        if self.mean_post_length <= 0:
            raise ValidationError("mean_post_length must be > 0")
        if self.place_names_per_class > self.markers_per_class:
            raise ValidationError("place_names_per_class cannot exceed markers_per_class")


def class_markers(spec: SyntheticSpec, c: int) -> list[str]:
    """Marker inventory of class c. The first place_names_per_class entries
    are the class's designated place names. Inventories are disjoint across
    classes and from the shared vocabulary by construction (loc/m/w prefixes).
    """
    names = [f"loc{c}_{j:03d}" for j in range(spec.place_names_per_class)]
    names += [f"m{c}_{j:03d}" for j in range(spec.markers_per_class - spec.place_names_per_class)]
    return names


def place_names(spec: SyntheticSpec) -> list[str]:
    out = []
    for c in range(spec.n_classes):
        out.extend(class_markers(spec, c)[: spec.place_names_per_class])
    return sorted(out)


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """Generate a planted-marker corpus, deterministic given spec.seed."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    shared = [f"w{i:04d}" for i in range(spec.shared_vocab_size)]
    manifest = [f"class{c}" for c in range(spec.n_classes)]
    instances: list[LabeledInstance] = []
    for c in range(spec.n_classes):
        markers = class_markers(spec, c)
        for i in range(spec.posts_per_class):
            length = max(1, int(rng.poisson(spec.mean_post_length)))
            tokens = [shared[j] for j in rng.integers(0, spec.shared_vocab_size, size=length)]
            inject = rng.random(length) < spec.marker_injection_prob
            picks = rng.integers(0, spec.markers_per_class, size=int(inject.sum()))
            k = 0
            for pos in range(length):
                if inject[pos]:
                    tokens[pos] = markers[picks[k]]
                    k += 1
            instances.append(
                LabeledInstance(id=f"c{c}-{i:06d}", text=" ".join(tokens), label=c)
            )
    return Dataset(instances=instances, manifest=manifest)


def write_gazetteer(names: list[str], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for name in names:
            fh.write(name + "\n")


def write_dataset(data: Dataset, path: str | Path) -> None:
    """Write a dataset file: a manifest header line followed by one
    {id, text, label} record per line (label as name)."""
    data.validate()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"manifest": data.manifest}, ensure_ascii=False,
                            separators=(",", ":")) + "\n")
        for inst in data.instances:
            fh.write(json.dumps(
                {"id": inst.id, "text": inst.text, "label": data.manifest[inst.label]},
                ensure_ascii=False, separators=(",", ":")) + "\n")


def read_dataset(path: str | Path) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        try:
            head = json.loads(header)
            manifest = head["manifest"]
        except (json.JSONDecodeError, KeyError, TypeError):
            raise ValidationError(f"{path}: missing or corrupt dataset manifest header")
        if not isinstance(manifest, list) or not all(isinstance(x, str) for x in manifest):
            raise ValidationError(f"{path}: dataset manifest must be a list of label names")
        index = {name: i for i, name in enumerate(manifest)}
        instances = []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                instances.append(LabeledInstance(
                    id=obj["id"], text=obj["text"], label=index[obj["label"]]))
            except (json.JSONDecodeError, KeyError, TypeError):
                raise ValidationError(f"{path}: corrupt dataset record at line {lineno}")
    ds = Dataset(instances=instances, manifest=manifest)
    ds.validate()
    return ds
