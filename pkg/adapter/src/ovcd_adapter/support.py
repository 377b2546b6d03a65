"""Support-set generation: descriptions -> images -> exported features + masks.

Output is a manifest the primary package's prototype builder consumes
directly (`ovcd build-prototypes --manifest <out>/support_manifest.json`).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

from ovcd import (
    DatasetManifest,
    FeatureMap,
    InstanceMask,
    MaskSet,
    SupportEntry,
    write_feature_map,
    write_manifest,
    write_mask_set,
)

from .errors import AdapterError
from .interfaces import FeatureExtractor, ImageSynthesizer, MaskGenerator

logger = logging.getLogger(__name__)

BACKGROUND_CLASS = "background"


@dataclass
class PromptTemplate:
    """Description template for one category."""

    category: str
    location: str = "a remote sensing scene"
    n_descriptions: int = 20
    images_per_description: int = 5

    def __post_init__(self):
        if not self.category:
            raise AdapterError("category must be non-empty")
        if self.n_descriptions < 1 or self.images_per_description < 1:
            raise AdapterError(
                "n_descriptions and images_per_description must be >= 1"
            )

    def descriptions(self) -> list[str]:
        """Deterministic phrasing variants for this category."""
        styles = (
            "an aerial photo of {c} in {l}",
            "a satellite view of {c} surrounded by {l}",
            "a top-down image of {c}, {l} nearby",
            "a high-resolution capture of {c} within {l}",
            "an overhead scene showing {c} across {l}",
        )
        return [
            styles[i % len(styles)].format(c=self.category, l=self.location)
            + f" (variant {i // len(styles) + 1})"
            for i in range(self.n_descriptions)
        ]


def generate_support_set(
    templates: list[PromptTemplate],
    synthesizer: ImageSynthesizer,
    extractor: FeatureExtractor,
    mask_generator: MaskGenerator,
    out_dir,
) -> Path:
    """Export one feature/mask file pair per usable support image.

    Samples whose localization masks are all empty are excluded with a
    warning.  Returns the path of the written support manifest; the
    category index in it is 1-based (0 is background).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    support: list[SupportEntry] = []
    dims: set[tuple[int, int]] = set()
    for c, template in enumerate(templates, start=1):
        exported = 0
        for d, description in enumerate(template.descriptions()):
            images = synthesizer.synthesize(
                description, template.images_per_description
            )
            for m, image in enumerate(images):
                masks = [mk for mk in mask_generator.generate(image) if mk.any()]
                if not masks:
                    logger.warning(
                        "excluding sample %s/%d/%d: no non-empty localization masks",
                        template.category,
                        d,
                        m,
                    )
                    continue
                features = extractor.extract(image)
                dims.add((image.shape[0], image.shape[1]))
                stem = f"{template.category}_{d:03d}_{m:02d}"
                feature_path = out_dir / f"{stem}.ovft"
                mask_path = out_dir / f"{stem}_masks.json"
                write_feature_map(FeatureMap(data=features), feature_path)
                write_mask_set(
                    MaskSet(masks=[InstanceMask.from_dense(mk) for mk in masks]),
                    mask_path,
                )
                support.append(
                    SupportEntry(
                        category=c, feature_path=feature_path, mask_path=mask_path
                    )
                )
                exported += 1
        if exported == 0:
            raise AdapterError(
                f"category '{template.category}' produced no usable samples"
            )
    if len(dims) != 1:
        raise AdapterError(f"support images have mixed dimensions: {sorted(dims)}")
    (height, width) = dims.pop()
    manifest = DatasetManifest(
        pairs=[],
        image_height=height,
        image_width=width,
        classes=[BACKGROUND_CLASS] + [t.category for t in templates],
        support=support,
    )
    manifest_path = out_dir / "support_manifest.json"
    write_manifest(manifest, manifest_path)
    return manifest_path
