"""Relation files, label sets, embedding files and the synthetic corpus."""

from __future__ import annotations

import json
import logging
import os
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from sgcn.encoder import EmbeddingTable
from sgcn.errors import ConfigError, DataError
from sgcn.rng import SplitMix64

logger = logging.getLogger(__name__)

PathLike = Union[str, os.PathLike]

PDTB_TOP4 = ("Comparison", "Contingency", "Expansion", "Temporal")
# CoNLL-2016 Chinese senses with EntRel kept as an implicit relation.
CDTB_9 = (
    "Causation",
    "Conditional",
    "Conjunction",
    "Contrast",
    "EntRel",
    "Expansion",
    "Progression",
    "Purpose",
    "Temporal",
)


@dataclass(frozen=True)
class LabelSet:
    name: str
    labels: Tuple[str, ...]

    def __post_init__(self):
        if len(set(self.labels)) != len(self.labels):
            raise ConfigError(f"label set {self.name!r} has duplicate labels")
        if len(self.labels) < 2:
            raise ConfigError(f"label set {self.name!r} needs at least two labels")

    def resolve(self, sense: str) -> Optional[str]:
        """Canonical label for ``sense`` or None if outside the set.

        For pdtb_top4 a dotted PDTB sense such as ``Comparison.Contrast``
        resolves to its top-level class.
        """
        if sense in self.labels:
            return sense
        if self.name == "pdtb_top4" and "." in sense:
            top = sense.split(".", 1)[0]
            if top in self.labels:
                return top
        return None

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def to_dict(self) -> dict:
        return {"name": self.name, "labels": list(self.labels)}

    @classmethod
    def from_dict(cls, d: dict) -> "LabelSet":
        return cls(d["name"], tuple(d["labels"]))


def foreign_senses(senses: Iterable[str], labels: LabelSet) -> List[str]:
    """Senses that only make sense under a different built-in label set.

    Used to tell a label-set mismatch from ordinary exclusions (ALTLEX,
    EntRel in PDTB data and so on).
    """
    own = set(labels.labels)
    exclusive = (set(PDTB_TOP4) | set(CDTB_9)) - own - {"EntRel"}
    return sorted({s for s in senses if s in exclusive or s.split(".", 1)[0] in exclusive})


def label_set(spec: str) -> LabelSet:
    """``pdtb_top4``, ``cdtb_9`` or ``custom:<file with one label per line>``."""
    if spec == "pdtb_top4":
        return LabelSet("pdtb_top4", PDTB_TOP4)
    if spec == "cdtb_9":
        return LabelSet("cdtb_9", CDTB_9)
    if spec.startswith("custom:"):
        path = spec[len("custom:"):]
        try:
            with open(path) as fh:
                labels = tuple(ln.strip() for ln in fh if ln.strip())
        except OSError as exc:
            raise ConfigError(f"cannot read label file {path}: {exc}") from exc
        return LabelSet("custom", labels)
    raise ConfigError(f"unknown label set {spec!r}; use pdtb_top4, cdtb_9 or custom:<file>")


@dataclass
class RelationRecord:
    id: str
    arg1_tokens: List[str]
    arg2_tokens: List[str]
    sense: str

    def to_json(self) -> str:
        return json.dumps(
            {"id": self.id, "arg1_tokens": self.arg1_tokens, "arg2_tokens": self.arg2_tokens, "sense": self.sense}
        )


class RecordList(list):
    """A list of records that remembers which senses were skipped."""

    def __init__(self, *args):
        super().__init__(*args)
        self.skipped_senses: Counter = Counter()

    @property
    def skipped(self) -> int:
        return sum(self.skipped_senses.values())


def load_relations(path: PathLike, labels: LabelSet) -> RecordList:
    """Read a JSON-lines relation file, keeping records whose sense is in ``labels``."""
    out = RecordList()
    try:
        fh = open(path)
    except OSError as exc:
        raise DataError(f"cannot read relation file {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                rec = RelationRecord(
                    str(obj["id"]),
                    [str(t) for t in obj["arg1_tokens"]],
                    [str(t) for t in obj["arg2_tokens"]],
                    str(obj["sense"]),
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DataError(f"{path}:{lineno}: malformed relation record ({exc})") from exc
            if not rec.arg1_tokens or not rec.arg2_tokens:
                raise DataError(f"{path}:{lineno}: record {rec.id!r} has an empty argument")
            canonical = labels.resolve(rec.sense)
            if canonical is None:
                out.skipped_senses[rec.sense] += 1
                continue
            rec.sense = canonical
            out.append(rec)
    if out.skipped:
        logger.warning("%s: skipped %d record(s) with senses outside %s", path, out.skipped, labels.name)
    if not out:
        raise DataError(f"{path}: no records with a sense in label set {labels.name}")
    return out


def write_relations(records: Iterable[RelationRecord], path: PathLike) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")


@dataclass
class EmbeddingStats:
    loaded: int = 0
    malformed: int = 0
    duplicates: int = 0


def load_embeddings(
    path: PathLike,
    d_e: int,
    seed: int = 0,
    lowercase: bool = True,
    stats: Optional[EmbeddingStats] = None,
) -> EmbeddingTable:
    """Load a word-vector text file (token followed by ``d_e`` floats per line).

    Lines of the wrong arity or with unparsable numbers are skipped, as are
    repeated tokens (first occurrence wins); both are counted in ``stats``.
    """
    if d_e <= 0:
        raise ConfigError("embedding width must be positive")
    stats = stats if stats is not None else EmbeddingStats()
    tokens: List[str] = []
    rows: List[List[float]] = []
    seen = set()
    try:
        fh = open(path, encoding="utf-8", errors="replace")
    except OSError as exc:
        raise ConfigError(f"cannot read embedding file {path}: {exc}") from exc
    with fh:
        for line in fh:
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            if len(parts) != d_e + 1:
                stats.malformed += 1
                continue
            try:
                vec = [float(v) for v in parts[1:]]
            except ValueError:
                stats.malformed += 1
                continue
            if not all(np.isfinite(vec)):
                stats.malformed += 1
                continue
            tok = parts[0].lower() if lowercase else parts[0]
            if tok in seen:
                stats.duplicates += 1
                continue
            seen.add(tok)
            tokens.append(tok)
            rows.append(vec)
    if stats.malformed or stats.duplicates:
        logger.warning("%s: skipped %d malformed and %d duplicate line(s)", path, stats.malformed, stats.duplicates)
    if not tokens:
        raise DataError(f"{path}: no valid {d_e}-dimensional vectors")
    stats.loaded = len(tokens)
    return EmbeddingTable.from_vectors(tokens, np.array(rows), SplitMix64(seed), lowercase)


def write_embeddings(tokens: Sequence[str], vectors: np.ndarray, path: PathLike) -> None:
    with open(path, "w") as fh:
        for tok, vec in zip(tokens, vectors):
            fh.write(tok + " " + " ".join(format(v, ".17g") for v in vec) + "\n")


@dataclass
class SyntheticCorpus:
    records: List[RelationRecord]
    labels: LabelSet
    tokens: List[str]
    vectors: np.ndarray
    triggers: Dict[str, Tuple[str, str]] = field(default_factory=dict)

    def trigger_positions(self, rec: RelationRecord) -> Tuple[int, int]:
        """Positions of the planted (arg1, arg2) trigger tokens in ``rec``."""
        t1, t2 = self.triggers[rec.sense]
        return rec.arg1_tokens.index(t1), rec.arg2_tokens.index(t2)


def synthetic_labels(classes: int) -> LabelSet:
    if classes == 4:
        return LabelSet("pdtb_top4", PDTB_TOP4)
    return LabelSet("custom", tuple(f"rel{k}" for k in range(classes)))


def gen_synthetic(
    pairs: int,
    vocab: int,
    classes: int,
    seed: int,
    d_e: int = 32,
    min_len: int = 3,
    max_len: int = 8,
    decoys: int = 1,
) -> SyntheticCorpus:
    """Argument pairs whose label is set by a planted cross-argument word pair.

    Class ``k`` owns two trigger tokens; one goes somewhere in arg1, the other
    somewhere in arg2, and the remaining positions are shared distractors.
    Each argument also receives ``decoys`` trigger tokens of other classes,
    chosen so that no second complete pair appears; the label is therefore
    only recoverable from the co-occurring pair, not from either side alone.
    ``decoys`` is reduced when too few classes exist (two classes give none).
    Labels are assigned round-robin (balanced) and the order is shuffled.
    """
    if classes < 2:
        raise ConfigError("synthetic corpus needs at least 2 classes")
    if vocab < 10 * classes:
        raise ConfigError(f"vocab {vocab} too small for {classes} classes (need >= {10 * classes})")
    if pairs < 1 or d_e < 1 or not 1 <= min_len <= max_len:
        raise ConfigError("synthetic corpus needs pairs >= 1, d_e >= 1 and 1 <= min_len <= max_len")
    if decoys < 0:
        raise ConfigError("decoys must be >= 0")
    fit = min(decoys, (classes - 1) // 2, min_len - 1)
    if fit < decoys:
        logger.info("using %d decoy(s) per argument; %d classes and min_len %d leave no room for %d", fit, classes, min_len, decoys)
        decoys = fit
    rng = SplitMix64(seed)
    labels = synthetic_labels(classes)
    tokens = [f"tok{k:04d}" for k in range(vocab)]
    trigger_ids = list(range(vocab))
    rng.shuffle(trigger_ids)
    triggers = {
        label: (tokens[trigger_ids[2 * k]], tokens[trigger_ids[2 * k + 1]]) for k, label in enumerate(labels.labels)
    }
    used = set(trigger_ids[: 2 * classes])
    distractors = [t for k, t in enumerate(tokens) if k not in used]
    vectors = rng.uniform(-0.5, 0.5, (vocab, d_e))

    def argument(planted: List[str]) -> List[str]:
        length = min_len + rng.below(max_len - min_len + 1)
        words = [rng.choice(distractors) for _ in range(length)]
        slots = rng.permutation(length)
        for slot, tok in zip(slots, planted):
            words[slot] = tok
        return words

    sense_of = [labels.labels[k % classes] for k in range(pairs)]
    rng.shuffle(sense_of)
    records = []
    for k, sense in enumerate(sense_of):
        others = [lab for lab in labels.labels if lab != sense]
        rng.shuffle(others)
        # disjoint decoy classes for the two sides, so no extra pair completes
        left = [triggers[lab][0] for lab in others[:decoys]]
        right = [triggers[lab][1] for lab in others[decoys:2 * decoys]]
        t1, t2 = triggers[sense]
        records.append(RelationRecord(f"syn{seed}-{k}", argument([t1] + left), argument([t2] + right), sense))
    return SyntheticCorpus(records, labels, tokens, vectors, triggers)
