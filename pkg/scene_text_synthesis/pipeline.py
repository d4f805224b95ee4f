import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from PIL import ImageDraw, ImageFont
from sklearn.utils.parallel import Parallel, delayed
from tqdm import tqdm

from scene_text_synthesis.appearance import (
    AppearanceDatabase,
    FontList,
    background_descriptor,
    default_font_dir,
    pick_font,
    query_nearest,
    random_text_color,
    sample_text_color,
)
from scene_text_synthesis.config import AttributeDict, Config
from scene_text_synthesis.containers import (
    MANIFEST_NAME,
    RunManifest,
    SynthesizedSample,
    TextInstance,
    crop_entry_words,
    write_sample,
)
from scene_text_synthesis.corpus import (
    CorpusMixture,
    Granularity,
    load_corpus,
    load_transcripts,
)
from scene_text_synthesis.exceptions import (
    ConfigError,
    EmptySample,
    EmptyText,
    MissingGlyph,
    ShortRun,
)
from scene_text_synthesis.placement import (
    PlacementCandidate,
    TextShape,
    carve,
    combine_masks,
    find_placements,
    rotated_coverage,
    select_placements,
)
from scene_text_synthesis.raster import RasterImage, sobel_gradients
from scene_text_synthesis.rendering import composite, rasterize_text
from scene_text_synthesis.saliency import (
    HistogramContrastSaliency,
    SaliencyBackend,
    SaliencyMask,
    low_saliency_mask,
)
from scene_text_synthesis.semantics import (
    SemanticMap,
    SemanticPolicy,
    load_palette,
    load_semantic_map,
    semantic_mask,
)
from scene_text_synthesis.utils import (
    derive_sample_seed,
    engine_version,
    list_images,
    sample_rng,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Background:
    """A background image and the label map paired with it."""

    image_path: Path
    label_path: Optional[Path] = None

    @property
    def background_id(self) -> str:
        return self.image_path.stem


@dataclass
class SynthesisResources:
    """Read-only inputs shared by every sample of a run."""

    texts: CorpusMixture
    fonts: FontList
    policy: SemanticPolicy = field(default_factory=SemanticPolicy.default_policy)
    palette: Optional[Dict[int, str]] = None
    database: Optional[AppearanceDatabase] = None
    saliency_backend: SaliencyBackend = field(default_factory=HistogramContrastSaliency)

    @classmethod
    def from_config(cls, config: Config = Config()) -> "SynthesisResources":
        paths, s = config.paths, config.synthesis
        granularity = Granularity(s.granularity)

        external = (
            load_corpus(paths.corpus_paths, granularity, paths.corpus_languages)
            if paths.corpus_paths
            else None
        )
        transcripts = (
            load_transcripts(
                paths.transcripts_dataset, paths.transcripts_format, granularity
            )
            if paths.transcripts_dataset
            else None
        )
        texts = CorpusMixture(transcripts, external, ratio=s.corpus_mix_ratio)

        database = None
        if s.adaptive_appearance:
            database = AppearanceDatabase.from_h5(str(paths.appearance_db))
            logger.info(f"{len(database)} appearance records loaded.")

        return cls(
            texts=texts,
            fonts=FontList.from_config_path(paths.font_dir),
            policy=SemanticPolicy.from_config_path(paths.policy_path),
            palette=load_palette(paths.palette_path) if paths.palette_path else None,
            database=database,
            saliency_backend=HistogramContrastSaliency.from_config(config),
        )


def list_backgrounds(config: Config = Config()) -> List[Background]:
    """Backgrounds sorted by name, each paired with <stem>.png in the label dir.

    Raises:
        ConfigError: If a background has no label map while semantics are on.
    """
    images = list_images(config.paths.backgrounds_dir)
    if not config.synthesis.use_semantics:
        return [Background(p) for p in images]
    label_dir = Path(config.paths.semantic_maps_dir)
    backgrounds = []
    for p in images:
        label_path = label_dir / f"{p.stem}.png"
        if not label_path.exists():
            raise ConfigError(f"No semantic map for background {p.name}.")
        backgrounds.append(Background(p, label_path))
    return backgrounds


def text_shape(config: Config = Config()) -> TextShape:
    p = config.placement
    aspect = (
        p.word_aspect_ratio
        if Granularity(config.synthesis.granularity) == Granularity.WORD
        else p.line_aspect_ratio
    )
    return TextShape(
        aspect_ratio=float(aspect),
        min_height=int(p.min_height),
        max_height=int(p.max_height) if p.max_height else None,
    )


def _render_instance(
    image: RasterImage,
    background: RasterImage,
    placement: PlacementCandidate,
    resources: SynthesisResources,
    config: Config,
    rng: np.random.Generator,
) -> Optional[Tuple[RasterImage, TextInstance]]:
    r = config.rendering
    px_height = max(int(r.min_px_height), int(round(placement.height)))
    layout = None
    for _ in range(int(r.max_text_attempts)):
        text = resources.texts.sample(rng)
        font = pick_font(resources.fonts, rng)
        try:
            layout = rasterize_text(text, font, px_height)
            break
        except (MissingGlyph, EmptyText) as e:
            logger.debug(f"Text {text!r} not renderable in {font.style}: {e}")
    if layout is None:
        return None

    if config.synthesis.adaptive_appearance and resources.database is not None:
        h_s = background_descriptor(background, placement.bounds(), config.appearance)
        neighbors = query_nearest(resources.database, h_s, config.appearance.k_nearest)
        record, _ = neighbors[int(rng.integers(len(neighbors)))]
        color = sample_text_color(record, rng)
        source_id = record.source_id
    else:
        color = random_text_color(rng)
        source_id = ""

    image, quad = composite(
        image, layout, color, placement, config.rendering.padding_fraction
    )
    return image, TextInstance(
        layout=layout,
        color=color,
        placement=placement,
        quad=quad,
        record_source_id=source_id,
    )


def synthesize_one(
    background: RasterImage,
    semantic_map: Optional[SemanticMap],
    resources: SynthesisResources,
    config: Config = Config(),
    rng: Optional[np.random.Generator] = None,
    background_id: str = "",
    seed: int = 0,
) -> SynthesizedSample:
    """Embed text into one background.

    The semantic allow-mask and the low-saliency mask are combined into the
    eligibility mask, placements are searched on it and up to
    max_instances_per_image are drawn. Each placement gets a text, a font and a
    color retrieved by background similarity, is composited and then carved out
    of the eligibility mask; placements that lost coverage to an earlier carve
    are dropped. Saliency is computed once on the original background.

    Args:
        background (RasterImage): sRGB8 background.
        semantic_map (Optional[SemanticMap]): Label map of the background; may be
            None when semantics are switched off.
        resources (SynthesisResources): Shared inputs.
        config (Config): Configuration.
        rng (Optional[np.random.Generator]): Sample generator, sample_rng(seed) if None.
        background_id (str): Provenance of the background.
        seed (int): Sample seed recorded with the result.

    Raises:
        EmptySample: If no instance could be placed.
    """
    if rng is None:
        rng = sample_rng(seed)
    s, p = config.synthesis, config.placement

    if s.use_semantics:
        if semantic_map is None:
            raise ConfigError("Semantic map required while use_semantics is on.")
        semantic_map.check_pairing(background)
        sem = semantic_mask(semantic_map, resources.policy)
    else:
        sem = np.ones(background.shape, dtype=bool)

    saliency = resources.saliency_backend.compute(background)
    if s.use_saliency:
        sal = low_saliency_mask(saliency)
    else:
        sal = SaliencyMask(mask=np.ones(background.shape, dtype=bool), threshold=1.0)
    elig = combine_masks(sem, sal)
    grad = sobel_gradients(background.to_gray())

    params = p
    if not s.adaptive_appearance:
        # Horizontal text with jitter only.
        params = AttributeDict(**p)
        params.coherence_gate = math.inf

    candidates = find_placements(elig, grad, saliency, text_shape(config), rng, params)
    if not candidates:
        raise EmptySample(f"No placement found on {background_id or 'background'}.")
    chosen = select_placements(candidates, s.max_instances_per_image, rng, p.select_tau)

    image = background
    mask = elig.mask.copy()
    instances: List[TextInstance] = []
    for placement in chosen:
        step = max(1.0, placement.height * float(p.sample_step_fraction))
        if rotated_coverage(mask, placement, step) < p.coverage_min:
            logger.debug(f"Placement at {placement.center} lost coverage, dropped.")
            continue
        rendered = _render_instance(image, background, placement, resources, config, rng)
        if rendered is None:
            logger.debug(f"No renderable text for placement at {placement.center}.")
            continue
        image, instance = rendered
        instances.append(instance)
        mask = carve(mask, placement, pad=float(config.rendering.carve_dilation))

    if not instances:
        raise EmptySample(f"No instance rendered on {background_id or 'background'}.")

    return SynthesizedSample(
        image=image,
        instances=instances,
        seed=int(seed),
        background_id=background_id,
        semantic_mask=sem,
        eligibility_mask=elig.mask,
        saliency=saliency,
        candidates=candidates,
    )


def _load_background(
    background: Background, resources: SynthesisResources, config: Config
) -> Tuple[RasterImage, Optional[SemanticMap]]:
    image = RasterImage.from_file(background.image_path)
    semantic_map = None
    if config.synthesis.use_semantics and background.label_path is not None:
        semantic_map = load_semantic_map(
            background.label_path, config.paths.palette_path, palette=resources.palette
        )
    return image, semantic_map


def synthesize_attempt(
    attempt_index: int,
    background: Background,
    resources: SynthesisResources,
    config: Config = Config(),
) -> Optional[SynthesizedSample]:
    """One attempt of a run; None when the background yields no sample."""
    seed = derive_sample_seed(config.general.random_seed, attempt_index)
    image, semantic_map = _load_background(background, resources, config)
    try:
        return synthesize_one(
            image,
            semantic_map,
            resources,
            config,
            rng=sample_rng(seed),
            background_id=background.background_id,
            seed=seed,
        )
    except EmptySample as e:
        logger.info(f"Attempt {attempt_index} skipped: {e}")
        return None


def run_synth(
    config: Config = Config(),
    resources: Optional[SynthesisResources] = None,
) -> RunManifest:
    """Synthesize config.synthesis.count non-empty samples.

    Backgrounds are cycled in name order; attempt i uses background i mod n and
    a seed derived from (random_seed, i), so results do not depend on the
    number of workers. At most n * retry_budget attempts are made.

    Raises:
        ShortRun: If fewer samples than requested could be produced; the run's
            files and manifest are written regardless.
    """
    config.validate()
    s, g = config.synthesis, config.general
    count = int(s.count)
    out_dir = Path(config.paths.output_dir)

    manifest = RunManifest(
        engine_version=engine_version(),
        config_hash=config.hash(),
        seed=int(g.random_seed),
        requested=count,
        config=config.to_dict(),
        root=out_dir,
    )
    if count == 0:
        logger.info("Nothing requested, no files written.")
        return manifest

    backgrounds = list_backgrounds(config)
    if not backgrounds:
        raise ConfigError(f"No background image in {config.paths.backgrounds_dir}.")
    if resources is None:
        resources = SynthesisResources.from_config(config)
    out_dir.mkdir(parents=True, exist_ok=True)

    max_attempts = len(backgrounds) * int(s.retry_budget)
    batch_size = max(1, int(g.n_jobs)) * 4
    attempt = 0
    logger.info(
        f"Synthesizing {count} samples from {len(backgrounds)} backgrounds "
        f"(at most {max_attempts} attempts)."
    )
    with tqdm(total=count, disable=(not g.tqdm_enabled)) as pbar:
        while len(manifest) < count and attempt < max_attempts:
            indices = list(range(attempt, min(attempt + batch_size, max_attempts)))
            results = Parallel(n_jobs=g.n_jobs)(
                delayed(synthesize_attempt)(
                    i, backgrounds[i % len(backgrounds)], resources, config
                )
                for i in indices
            )
            for i, sample in zip(indices, results):
                attempt = i + 1
                if sample is None:
                    continue
                entry = write_sample(
                    sample,
                    out_dir,
                    sample_id=len(manifest),
                    attempt_index=i,
                    debug_masks=bool(s.debug_masks),
                    background=RasterImage.from_file(
                        backgrounds[i % len(backgrounds)].image_path
                    )
                    if s.debug_masks
                    else None,
                )
                manifest.entries.append(entry)
                pbar.update(1)
                if len(manifest) >= count:
                    break

    manifest.attempts = attempt
    manifest.to_json(out_dir / MANIFEST_NAME)
    logger.info(f"{len(manifest)} samples written to {out_dir} in {attempt} attempts.")
    if len(manifest) < count:
        raise ShortRun(len(manifest), count, manifest)
    return manifest


def replay_sample(
    manifest: RunManifest,
    sample_id: int,
    config: Optional[Config] = None,
    resources: Optional[SynthesisResources] = None,
) -> SynthesizedSample:
    """Regenerate one sample of a run from its manifest entry."""
    config = config if config is not None else manifest.to_config()
    entry = manifest.entry(sample_id)
    if derive_sample_seed(manifest.seed, entry.attempt_index) != entry.seed:
        logger.warning(f"Sample {sample_id} seed does not match its attempt index.")

    matches = [
        b for b in list_backgrounds(config) if b.background_id == entry.background_id
    ]
    if not matches:
        raise ConfigError(f"Background {entry.background_id} not found.")
    if resources is None:
        resources = SynthesisResources.from_config(config)

    image, semantic_map = _load_background(matches[0], resources, config)
    return synthesize_one(
        image,
        semantic_map,
        resources,
        config,
        rng=sample_rng(entry.seed),
        background_id=entry.background_id,
        seed=entry.seed,
    )


def draw_annotations(
    image: RasterImage,
    quads: Sequence[np.ndarray],
    transcripts: Sequence[str],
    color: Tuple[int, int, int] = (255, 0, 0),
) -> RasterImage:
    """Image with every quad outlined and its transcript written above it."""
    im = image.to_pil().convert("RGB")
    draw = ImageDraw.Draw(im)
    font = ImageFont.truetype(str(default_font_dir() / "DejaVuSans.ttf"), size=12)
    for quad, text in zip(quads, transcripts):
        pts = [tuple(p) for p in np.asarray(quad, dtype=np.float64).tolist()]
        draw.line(pts + [pts[0]], fill=color, width=1)
        x, y = pts[0]
        draw.text((x, y - 2), text, fill=color, font=font, anchor="ld")
    return RasterImage.from_pil(im)


def preview(
    sample: SynthesizedSample, out_path: Optional[Union[str, Path]] = None
) -> RasterImage:
    """Composited image with instance quads and transcripts drawn over it."""
    overlay = draw_annotations(sample.image, sample.quads, sample.transcripts)
    if out_path is not None:
        overlay.to_file(out_path)
    return overlay


def preview_entry(
    manifest: RunManifest,
    sample_id: int,
    out_path: Optional[Union[str, Path]] = None,
) -> RasterImage:
    """Preview of a written sample, read back from the run directory."""
    entry = manifest.entry(sample_id)
    image = RasterImage.from_file(manifest.root / entry.image)
    overlay = draw_annotations(
        image,
        [np.asarray(i["quad"]) for i in entry.instances],
        [i["text"] for i in entry.instances],
    )
    if out_path is not None:
        overlay.to_file(out_path)
    return overlay


def crop_words(
    manifest: RunManifest, out_dir: Optional[Union[str, Path]] = None
) -> Path:
    """Upright word images of every instance of a run plus labels.txt.

    Returns:
        Path: The labels file, one "file<TAB>transcript" line per crop.
    """
    out_dir = Path(out_dir) if out_dir else manifest.root / "words"
    out_dir.mkdir(parents=True, exist_ok=True)
    labels = []
    for entry in manifest.entries:
        labels.extend(crop_entry_words(entry, manifest.root, out_dir))
    labels_path = out_dir / "labels.txt"
    with open(labels_path, "w", encoding="utf-8", newline="\n") as f:
        for name, text in labels:
            f.write(f"{name}\t{text}\n")
    logger.info(f"{len(labels)} word images written to {out_dir}.")
    return labels_path
