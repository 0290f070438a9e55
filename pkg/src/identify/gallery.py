from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Tuple

from src.errors import IdentificationError
from src.matching.batch import GalleryScorer
from src.schemas.matching import AttributeSource
from src.schemas.signature import PatchLayout, Signature

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Template:
    """One or more signatures of a single subject matched as one unit."""

    subject_id: str
    members: Tuple[Signature, ...]
    template_id: str = ""

    def __post_init__(self) -> None:
        if not self.members:
            raise IdentificationError(f"template for {self.subject_id!r} has no members")
        if not self.template_id:
            object.__setattr__(self, "template_id", self.subject_id)
        first = self.members[0]
        for s in self.members:
            if s.subject_id != self.subject_id:
                raise IdentificationError(
                    f"template {self.template_id!r}: member {s.image_id!r} belongs to "
                    f"{s.subject_id!r}, not {self.subject_id!r}"
                )
            if not s.comparable_with(first):
                raise IdentificationError(
                    f"template {self.template_id!r}: member {s.image_id!r} is not comparable "
                    f"with {first.image_id!r}"
                )

    @classmethod
    def single(cls, signature: Signature, template_id: str = "") -> "Template":
        return cls(
            subject_id=signature.subject_id,
            members=(signature,),
            template_id=template_id or signature.image_id,
        )

    @property
    def layout(self) -> PatchLayout:
        return self.members[0].layout

    @property
    def attribute_dim(self) -> int:
        return self.members[0].attributes.dim


@dataclass(frozen=True)
class Gallery:
    """Enrolled templates, one per subject. Immutable once built."""

    templates: Tuple[Template, ...]
    _scorers: Dict[AttributeSource, GalleryScorer] = field(
        default_factory=dict, init=False, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        if not self.templates:
            raise IdentificationError("gallery is empty")
        seen = set()
        first = self.templates[0]
        for t in self.templates:
            if t.subject_id in seen:
                raise IdentificationError(f"gallery has two templates for subject {t.subject_id!r}")
            seen.add(t.subject_id)
            if t.layout != first.layout or t.attribute_dim != first.attribute_dim:
                raise IdentificationError(
                    f"gallery template {t.subject_id!r} does not match layout {first.layout} "
                    f"d={first.attribute_dim}"
                )

    @classmethod
    def from_signatures(cls, signatures: Iterable[Signature]) -> "Gallery":
        """Group signatures by subject, keeping first-seen order."""
        grouped: Dict[str, List[Signature]] = {}
        for s in signatures:
            grouped.setdefault(s.subject_id, []).append(s)
        templates = tuple(Template(subject_id=sid, members=tuple(m)) for sid, m in grouped.items())
        logger.info("enrolled %d subjects (%d signatures)", len(templates), sum(len(t.members) for t in templates))
        return cls(templates=templates)

    @property
    def layout(self) -> PatchLayout:
        return self.templates[0].layout

    @property
    def attribute_dim(self) -> int:
        return self.templates[0].attribute_dim

    @property
    def subject_ids(self) -> List[str]:
        return [t.subject_id for t in self.templates]

    def signatures(self) -> List[Signature]:
        return [s for t in self.templates for s in t.members]

    def member_owner(self) -> List[int]:
        """Template index of every row returned by ``signatures()``."""
        return [ti for ti, t in enumerate(self.templates) for _ in t.members]

    def with_template(self, template: Template) -> "Gallery":
        return Gallery(templates=self.templates + (template,))

    def scorer(self, source: AttributeSource) -> GalleryScorer:
        # lazily built; concurrent builds produce identical scorers
        key = AttributeSource(source)
        if key not in self._scorers:
            self._scorers[key] = GalleryScorer(self.signatures(), key)
        return self._scorers[key]


