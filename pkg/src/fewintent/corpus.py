"""Intent dataset ingestion: label normalization, few-shot sampling, dev splits,
and out-of-domain pooling.

File formats: CSV with a ``text,category`` header, or JSONL records carrying
``text``, ``label`` and an optional ``domain``. An optional label-inventory
sidecar (one raw label per line) pins the label order; otherwise labels are
enumerated in first-appearance order.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError

_CAMEL_BOUNDARY = re.compile(r"(?<=[a-z0-9])(?=[A-Z])")
_MULTISPACE = re.compile(r"\s+")


def normalize_label(raw: str) -> str:
    """Turn a raw label name into the word sequence fed to the model.

    Camel-case boundaries are split, underscores and hyphens become single
    spaces, the result is lowercased and space-collapsed.
    """
    if not raw or not raw.strip():
        raise DataError("label name is empty")
    text = _CAMEL_BOUNDARY.sub(" ", raw)
    text = text.replace("_", " ").replace("-", " ")
    text = _MULTISPACE.sub(" ", text).strip().lower()
    if not text:
        raise DataError(f"label {raw!r} is empty after normalization")
    return text


@dataclass(frozen=True)
class IntentLabel:
    """One intent: a contiguous integer id plus its raw and normalized names."""

    id: int
    raw_name: str
    surface: str


@dataclass(frozen=True)
class LabeledUtterance:
    text: str
    intent_id: int
    domain: str | None = None


@dataclass(frozen=True)
class Dataset:
    """An immutable labeled corpus with a fixed intent inventory."""

    labels: tuple[IntentLabel, ...]
    examples: tuple[LabeledUtterance, ...]
    name: str = ""

    def __post_init__(self):
        if len(self.labels) < 1:
            raise DataError(f"dataset {self.name!r} has no intents")
        for i, lab in enumerate(self.labels):
            if lab.id != i:
                raise DataError(f"label ids must be contiguous from 0, got {lab.id} at {i}")
            if not lab.surface or "_" in lab.surface or lab.surface != lab.surface.lower():
                raise DataError(f"bad label surface {lab.surface!r}")
        n = len(self.labels)
        for ex in self.examples:
            if not ex.text.strip():
                raise DataError("utterance text is empty")
            if not 0 <= ex.intent_id < n:
                raise DataError(f"intent id {ex.intent_id} outside [0, {n})")

    @property
    def n_intents(self) -> int:
        return len(self.labels)

    def examples_by_intent(self) -> dict[int, list[int]]:
        """Example indices grouped by intent id."""
        by_intent: dict[int, list[int]] = {lab.id: [] for lab in self.labels}
        for idx, ex in enumerate(self.examples):
            by_intent[ex.intent_id].append(idx)
        return by_intent


def _read_inventory(path: Path) -> list[str]:
    names = [line.strip() for line in path.read_text(encoding="utf-8").splitlines()]
    names = [n for n in names if n]
    if not names:
        raise DataError(f"label inventory {path} is empty")
    return names


def _rows_from_csv(path: Path) -> Iterable[tuple[int, str, str, str | None]]:
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if len(header) < 2 or header[0].strip() != "text" or header[1].strip() != "category":
            raise DataError(f"{path}: expected header 'text,category', got {','.join(header)!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < 2:
                raise DataError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            yield lineno, row[0], row[1], None


def _rows_from_jsonl(path: Path) -> Iterable[tuple[int, str, str, str | None]]:
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(rec, dict) or "text" not in rec or "label" not in rec:
                raise DataError(f"{path}:{lineno}: record needs 'text' and 'label' fields")
            yield lineno, str(rec["text"]), str(rec["label"]), rec.get("domain")


def load_dataset(
    path: str | Path,
    format: str = "csv",
    inventory: str | Path | None = None,
    name: str | None = None,
) -> Dataset:
    """Load a labeled intent dataset from disk.

    Labels are keyed on their normalized surface; two raw names normalizing to
    the same surface map to the same intent.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"dataset file not found: {path}")
    if format == "csv":
        rows = _rows_from_csv(path)
    elif format == "jsonl":
        rows = _rows_from_jsonl(path)
    else:
        raise DataError(f"unknown dataset format {format!r} (expected csv or jsonl)")

    surface_to_id: dict[str, int] = {}
    labels: list[IntentLabel] = []
    fixed_inventory = inventory is not None
    if fixed_inventory:
        for raw in _read_inventory(Path(inventory)):
            surface = normalize_label(raw)
            if surface not in surface_to_id:
                surface_to_id[surface] = len(labels)
                labels.append(IntentLabel(len(labels), raw, surface))

    examples: list[LabeledUtterance] = []
    for lineno, text, raw_label, domain in rows:
        if not text.strip():
            raise DataError(f"{path}:{lineno}: empty utterance text")
        if not raw_label.strip():
            raise DataError(f"{path}:{lineno}: empty label")
        surface = normalize_label(raw_label)
        if surface not in surface_to_id:
            if fixed_inventory:
                raise DataError(f"{path}:{lineno}: label {raw_label!r} not in inventory")
            surface_to_id[surface] = len(labels)
            labels.append(IntentLabel(len(labels), raw_label, surface))
        domain_tag = str(domain) if domain is not None else None
        examples.append(LabeledUtterance(text.strip(), surface_to_id[surface], domain_tag))

    if not examples:
        raise DataError(f"{path}: no examples")
    return Dataset(tuple(labels), tuple(examples), name=name or path.stem)


def sample_few_shot(data: Dataset, shots: int, seed: int) -> Dataset:
    """Sample exactly `shots` examples per intent, uniformly without replacement."""
    if shots < 1:
        raise DataError(f"shots must be >= 1, got {shots}")
    rng = np.random.default_rng(seed)
    picked: list[LabeledUtterance] = []
    for lab in data.labels:
        pool = [idx for idx, ex in enumerate(data.examples) if ex.intent_id == lab.id]
        if len(pool) < shots:
            raise DataError(
                f"intent {lab.raw_name!r} has {len(pool)} examples, needs {shots}"
            )
        chosen = rng.choice(len(pool), size=shots, replace=False)
        picked.extend(data.examples[pool[i]] for i in chosen)
    return Dataset(data.labels, tuple(picked), name=f"{data.name}:{shots}shot")


def split_dev(data: Dataset, fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Global random split into (train, dev); dev gets floor(fraction * size)."""
    if not 0.0 < fraction < 1.0:
        raise DataError(f"dev fraction must be in (0, 1), got {fraction}")
    total = len(data.examples)
    if total == 0:
        raise DataError("cannot split an empty dataset")
    # Tiny epsilon so e.g. 0.29 * 100 floors to the intended 29.
    n_dev = int(fraction * total + 1e-9)
    perm = np.random.default_rng(seed).permutation(total)
    dev_idx = set(int(i) for i in perm[:n_dev])
    train_ex = tuple(ex for i, ex in enumerate(data.examples) if i not in dev_idx)
    dev_ex = tuple(ex for i, ex in enumerate(data.examples) if i in dev_idx)
    if not train_ex:
        raise DataError(f"fraction {fraction} leaves no training examples")
    train = Dataset(data.labels, train_ex, name=f"{data.name}:train")
    dev = Dataset(data.labels, dev_ex, name=f"{data.name}:dev")
    return train, dev


def build_ood(
    target: Dataset,
    others: Sequence[Dataset],
    excluded_domains: Iterable[str] = (),
) -> Dataset:
    """Pool `others` into one out-of-domain corpus for `target`.

    Examples whose domain tag matches an excluded domain (case-insensitive)
    are dropped; the surviving label inventories are merged on normalized
    surface and re-enumerated in first-appearance order.
    """
    if not others:
        raise DataError("build_ood needs at least one source dataset")
    excluded = {d.strip().lower() for d in excluded_domains if d.strip()}
    surface_to_id: dict[str, int] = {}
    labels: list[IntentLabel] = []
    examples: list[LabeledUtterance] = []
    for source in others:
        for ex in source.examples:
            if ex.domain is not None and ex.domain.strip().lower() in excluded:
                continue
            lab = source.labels[ex.intent_id]
            if lab.surface not in surface_to_id:
                surface_to_id[lab.surface] = len(labels)
                labels.append(IntentLabel(len(labels), lab.raw_name, lab.surface))
            examples.append(LabeledUtterance(ex.text, surface_to_id[lab.surface], ex.domain))
    if not examples:
        raise DataError("no out-of-domain examples survive the domain filter")
    return Dataset(tuple(labels), tuple(examples), name=f"ood-for-{target.name}")
