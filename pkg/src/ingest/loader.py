from __future__ import annotations

import logging
import os
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from src.errors import InvalidWeightsError, ManifestError
from src.identify.gallery import Gallery, Template
from src.ingest.atomic import write_text_atomic
from src.ingest.sigfile import read_signature
from src.schemas.signature import Signature
from src.weighting.weights import AttributeAccuracyTable

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ManifestEntry:
    subject_id: str
    template_id: str
    path: Path
    cell_label: Optional[str] = None


def _data_lines(path: Path) -> List[Tuple[int, str]]:
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    return [(i, ln.strip()) for i, ln in enumerate(lines, start=1) if ln.strip() and not ln.lstrip().startswith("#")]


def load_manifest(path: str | os.PathLike) -> List[ManifestEntry]:
    """Lines ``subject_id,template_id,path[,cell_label]``; paths relative to the manifest."""
    mpath = Path(path)
    base = mpath.absolute().parent
    entries: List[ManifestEntry] = []
    for line_no, line in _data_lines(mpath):
        fields = [x.strip() for x in line.split(",")]
        if len(fields) not in (3, 4):
            raise ManifestError(f"{mpath}:{line_no}: expected 3 or 4 comma-separated fields, got {len(fields)}")
        subject_id, template_id, rel = fields[:3]
        if not subject_id or not template_id or not rel:
            raise ManifestError(f"{mpath}:{line_no}: empty subject_id, template_id or path")
        sig_path = Path(rel) if Path(rel).is_absolute() else base / rel
        if not sig_path.is_file():
            raise ManifestError(f"{mpath}:{line_no}: signature file not found: {sig_path}")
        cell = fields[3] if len(fields) == 4 and fields[3] else None
        entries.append(ManifestEntry(subject_id, template_id, sig_path, cell))
    if not entries:
        raise ManifestError(f"{mpath}: manifest has no entries")
    logger.debug("loaded %d manifest entries from %s", len(entries), mpath)
    return entries


def write_manifest(path: str | os.PathLike, entries: Sequence[ManifestEntry]) -> None:
    """Write entries with paths relative to the manifest's directory when possible."""
    mpath = Path(path)
    base = mpath.resolve().parent
    lines = []
    for e in entries:
        try:
            rel = Path(e.path).resolve().relative_to(base).as_posix()
        except ValueError:
            rel = str(e.path)
        fields = [e.subject_id, e.template_id, rel] + ([e.cell_label] if e.cell_label else [])
        lines.append(",".join(fields))
    write_text_atomic(mpath, "\n".join(lines) + "\n")


def _load_checked(entry: ManifestEntry) -> Signature:
    sig = read_signature(entry.path)
    if sig.subject_id != entry.subject_id:
        raise ManifestError(
            f"{entry.path}: signature subject {sig.subject_id!r} != manifest subject {entry.subject_id!r}"
        )
    return sig


def load_gallery(path: str | os.PathLike) -> Gallery:
    """All lines of a subject form that subject's gallery template."""
    return Gallery.from_signatures(_load_checked(e) for e in load_manifest(path))


@dataclass(frozen=True)
class ProbeSet:
    templates: List[Template]
    truth: Dict[str, str]  # probe template_id -> subject_id
    cells: Dict[str, str]  # probe template_id -> cell label (labelled probes only)


def load_probes(path: str | os.PathLike) -> ProbeSet:
    """Lines sharing a template_id form one probe template."""
    grouped: "OrderedDict[str, List[Tuple[ManifestEntry, Signature]]]" = OrderedDict()
    for e in load_manifest(path):
        grouped.setdefault(e.template_id, []).append((e, _load_checked(e)))

    templates: List[Template] = []
    truth: Dict[str, str] = {}
    cells: Dict[str, str] = {}
    for template_id, rows in grouped.items():
        subjects = {e.subject_id for e, _ in rows}
        if len(subjects) != 1:
            raise ManifestError(f"{path}: probe template {template_id!r} mixes subjects {sorted(subjects)}")
        labels = {e.cell_label for e, _ in rows if e.cell_label}
        if len(labels) > 1:
            raise ManifestError(f"{path}: probe template {template_id!r} has several cell labels {sorted(labels)}")
        subject_id = rows[0][0].subject_id
        templates.append(
            Template(subject_id=subject_id, members=tuple(s for _, s in rows), template_id=template_id)
        )
        truth[template_id] = subject_id
        if labels:
            cells[template_id] = labels.pop()
    return ProbeSet(templates=templates, truth=truth, cells=cells)


def load_accuracy_table(path: str | os.PathLike) -> AttributeAccuracyTable:
    """Rows ``attribute_name,accuracy``; names may contain spaces and apostrophes."""
    apath = Path(path)
    mapping: Dict[str, float] = {}
    for line_no, line in _data_lines(apath):
        name, sep, value = line.rpartition(",")
        name = name.strip()
        if not sep or not name:
            raise ManifestError(f"{apath}:{line_no}: expected 'attribute_name,accuracy'")
        if name in mapping:
            raise ManifestError(f"{apath}:{line_no}: attribute {name!r} listed twice")
        try:
            mapping[name] = float(value)
        except ValueError as err:
            raise ManifestError(f"{apath}:{line_no}: accuracy {value.strip()!r} is not a number") from err
    try:
        return AttributeAccuracyTable.from_mapping(mapping)
    except InvalidWeightsError as err:
        raise ManifestError(f"{apath}: {err}") from err


def write_accuracy_table(path: str | os.PathLike, table: AttributeAccuracyTable) -> None:
    rows = [f"{n},{a!r}" for n, a in zip(table.names, table.accuracies)]
    write_text_atomic(path, "\n".join(rows) + "\n")


def load_signatures_from_dir(sig_dir: str | os.PathLike) -> List[Path]:
    """Every ``.sig`` file under ``sig_dir``, sorted."""
    found: List[Path] = []
    for root, _, files in os.walk(sig_dir):
        for fn in files:
            if fn.lower().endswith(".sig"):
                found.append(Path(root) / fn)
    if not found:
        raise FileNotFoundError(f"No .sig files found under: {sig_dir}")
    return sorted(found)
