"""Face recognition by coupled-approximation error.

A query image Y is factorized jointly with every gallery image (CMF mode) or
with every person's stack of gallery images (CMTF modes). The gallery entry
whose coupled approximation has the smallest err_X + err_Y names the person.
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from .cmf import cmf, relative_errors
from .cmtf import cmtf_cp_als, cmtf_cp_als_randomized, cmtf_errors, cmtf_tucker
from .config import settings
from .errors import (
    CollapsedBasisError,
    DegenerateIterateError,
    FormatError,
    ParameterError,
    ShapeError,
)
from .models import Mode, RecognitionReport, RecognitionRow, SketchPlan
from .sketching import make_rng
from .tensor_core import as_matrix

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
CmtfFormat = Literal["tucker", "cp_als"]

MANIFEST_NAME = "manifest.json"


def load_pgm(path: PathLike) -> np.ndarray:
    """Read a binary (P5) grayscale PGM with maxval <= 255 as a float matrix."""
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(2)
    if magic != b"P5":
        raise FormatError(f"{path.name}: only binary grayscale PGM (P5) is supported, got {magic!r}")
    try:
        with Image.open(path) as img:
            if img.mode != "L":
                raise FormatError(f"{path.name}: unsupported maxval (image mode {img.mode})")
            img.load()
            pixels = np.asarray(img, dtype=np.float64)
    except (UnidentifiedImageError, SyntaxError, ValueError) as e:
        raise FormatError(f"{path.name}: malformed PGM header ({e})") from e
    except OSError as e:
        raise FormatError(f"{path.name}: truncated PGM payload ({e})") from e
    return as_matrix(pixels, path.name)


def write_pgm(path: PathLike, image: np.ndarray) -> Path:
    """Write a matrix of intensities in [0, 255] as a binary PGM (values rounded)."""
    path = Path(path)
    pixels = np.clip(np.rint(as_matrix(image)), 0, 255).astype(np.uint8)
    Image.fromarray(pixels).save(path, format="PPM")
    return path


@dataclass(frozen=True)
class Gallery:
    """Training images grouped by person, all of one size."""
    persons: List[str]
    images_per_person: int
    image_dims: Tuple[int, int]
    matrices: List[np.ndarray] = field(repr=False)
    names: List[str] = field(default_factory=list, repr=False)

    @classmethod
    def from_images(cls, images: Dict[str, Sequence[np.ndarray]],
                    names: Optional[Dict[str, Sequence[str]]] = None) -> "Gallery":
        """Build a gallery from {person: [image, ...]} in insertion order."""
        if not images:
            raise ParameterError("gallery needs at least one person")
        counts = {len(v) for v in images.values()}
        if len(counts) != 1 or 0 in counts:
            raise ShapeError(f"every person needs the same positive image count, got {sorted(counts)}")
        persons = list(images)
        matrices = [as_matrix(img, f"{p} image") for p in persons for img in images[p]]
        dims = {m.shape for m in matrices}
        if len(dims) != 1:
            raise ShapeError(f"gallery images differ in size: {sorted(dims)}")
        flat_names = []
        for p in persons:
            own = list(names[p]) if names and p in names else [str(i) for i in range(len(images[p]))]
            flat_names.extend(f"{p}/{n}" for n in own)
        return cls(persons=persons, images_per_person=counts.pop(), image_dims=dims.pop(),
                   matrices=matrices, names=flat_names)

    def person_of(self, index: int) -> str:
        """Person owning flattened image `index`."""
        return self.persons[index // self.images_per_person]

    def person_images(self, person_index: int) -> List[np.ndarray]:
        start = person_index * self.images_per_person
        return self.matrices[start:start + self.images_per_person]

    @property
    def tensors(self) -> List[np.ndarray]:
        """Per-person rows x cols x images_per_person stacks."""
        return [np.stack(self.person_images(i), axis=2) for i in range(len(self.persons))]

    def scaled(self, factor: float) -> "Gallery":
        return Gallery(persons=self.persons, images_per_person=self.images_per_person,
                       image_dims=self.image_dims,
                       matrices=[factor * m for m in self.matrices], names=self.names)


@dataclass(frozen=True)
class Prediction:
    """Predicted person plus the full candidate error vector."""
    person: str
    best_index: int
    errors: List[float]


def _argmin(errors: Sequence[float]) -> int:
    """Index of the smallest error; ties go to the lowest index."""
    return int(np.argmin(np.asarray(errors, dtype=np.float64)))


def _map(func: Callable, items: Sequence) -> List:
    if settings.threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=settings.threads) as pool:
        return list(pool.map(func, items))


def _check_query(gallery: Gallery, Y: np.ndarray) -> np.ndarray:
    Y = as_matrix(Y, "query")
    if Y.shape != tuple(gallery.image_dims):
        raise ShapeError(f"query is {Y.shape}, gallery images are {gallery.image_dims}")
    return Y


def classify_cmf(gallery: Gallery, Y: np.ndarray, k: int,
                 plan: Optional[SketchPlan] = None) -> Prediction:
    """CMF of (X^(i), Y) for every gallery image; the smallest err_X + err_Y wins."""
    Y = _check_query(gallery, Y)

    def score(X: np.ndarray) -> float:
        return float(sum(relative_errors(X, Y, cmf(X, Y, k, plan))))

    errors = _map(score, gallery.matrices)
    best = _argmin(errors)
    return Prediction(person=gallery.person_of(best), best_index=best, errors=errors)


def classify_cmtf(
    gallery: Gallery,
    Y: np.ndarray,
    k: int,
    plan: Optional[SketchPlan] = None,
    fmt: CmtfFormat = "tucker",
    init_seed: int = 0,
    max_iters: Optional[int] = None,
    rel_tol: Optional[float] = None
) -> Prediction:
    """CMTF of (person tensor, Y) for every person; the smallest err_X + err_Y wins.

    In cp_als format a degenerate ALS iterate, or a joint basis narrower than
    k, scores the candidate +inf.
    """
    Y = _check_query(gallery, Y)

    def score(indexed: Tuple[int, np.ndarray]) -> float:
        index, T = indexed
        if fmt == "tucker":
            result = cmtf_tucker(T, Y, k, plan)
        else:
            try:
                if plan is None or not plan.is_randomized:
                    result = cmtf_cp_als(T, Y, k, init_seed=init_seed,
                                         max_iters=max_iters, rel_tol=rel_tol)
                else:
                    result = cmtf_cp_als_randomized(T, Y, k, plan, init_seed=init_seed,
                                                    max_iters=max_iters, rel_tol=rel_tol)
            except (DegenerateIterateError, CollapsedBasisError) as e:
                logger.warning(f"Candidate {index} ({gallery.persons[index]}) scored +inf: {e}")
                return float("inf")
        return float(sum(cmtf_errors(T, Y, result)))

    errors = _map(score, list(enumerate(gallery.tensors)))
    best = _argmin(errors)
    return Prediction(person=gallery.persons[best], best_index=best, errors=errors)


def evaluate(
    gallery: Gallery,
    queries: Sequence[Tuple[str, str, np.ndarray]],
    k: int,
    plan: Optional[SketchPlan] = None,
    mode: Mode = "cmf",
    init_seed: int = 0,
    max_iters: Optional[int] = None,
    rel_tol: Optional[float] = None
) -> RecognitionReport:
    """Classify labeled queries and aggregate success rates.

    Args:
        gallery: training images
        queries: (name, true person, image) triples
        k: approximation rank
        plan: sketch plan (basic when None)
        mode: "cmf", "cmtf-tucker" or "cmtf-cp"

    Returns:
        RecognitionReport with per-query rows and per-person/total rates
    """
    if not queries:
        raise ParameterError("evaluation needs at least one query")
    unknown = {truth for _, truth, _ in queries} - set(gallery.persons)
    if unknown:
        raise ParameterError(f"query labels not in gallery: {sorted(unknown)}")

    plan = plan or SketchPlan()
    rows = []
    for name, truth, image in queries:
        if mode == "cmf":
            prediction = classify_cmf(gallery, image, k, plan)
        elif mode == "cmtf-tucker":
            prediction = classify_cmtf(gallery, image, k, plan, fmt="tucker")
        elif mode == "cmtf-cp":
            prediction = classify_cmtf(gallery, image, k, plan, fmt="cp_als", init_seed=init_seed,
                                       max_iters=max_iters, rel_tol=rel_tol)
        else:
            raise ParameterError(f"unknown recognition mode {mode!r}")
        rows.append(RecognitionRow(
            query=name, truth=truth, predicted=prediction.person,
            errs=[e if np.isfinite(e) else None for e in prediction.errors],
        ))
        logger.debug(f"{name}: truth={truth} predicted={prediction.person}")

    params = {
        "k": k,
        "mode": mode,
        "plan": plan.model_dump(),
        "init_seed": init_seed,
        "max_iters": settings.als_max_iters if max_iters is None else max_iters,
        "rel_tol": settings.als_rel_tol if rel_tol is None else rel_tol,
    }
    report = RecognitionReport.from_rows(rows, gallery.persons, params)
    logger.info(f"{mode} / {plan.label()}: total success rate {report.total_rate:.2%}")
    return report


def _person_dirs(root: Path) -> List[Path]:
    return sorted(p for p in root.iterdir() if p.is_dir())


def load_gallery(root: PathLike) -> Gallery:
    """Load `root/<person>/<img>.pgm`; manifest.json, when present, fixes the order."""
    root = Path(root)
    manifest_path = root / MANIFEST_NAME
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        layout = {person: manifest["images"][person] for person in manifest["persons"]}
    else:
        layout = {d.name: sorted(f.name for f in d.glob("*.pgm")) for d in _person_dirs(root)}

    images = {person: [load_pgm(root / person / f) for f in files] for person, files in layout.items()}
    logger.info(f"Loaded gallery of {len(images)} persons from {root}")
    return Gallery.from_images(images, names=layout)


def write_gallery(gallery: Gallery, root: PathLike) -> Path:
    """Persist a gallery as PGM files plus manifest.json."""
    root = Path(root)
    layout: Dict[str, List[str]] = {}
    for index, image in enumerate(gallery.matrices):
        person = gallery.person_of(index)
        folder = root / person
        folder.mkdir(parents=True, exist_ok=True)
        filename = f"{index % gallery.images_per_person:03d}.pgm"
        write_pgm(folder / filename, image)
        layout.setdefault(person, []).append(filename)
    manifest = {"persons": gallery.persons, "images_per_person": gallery.images_per_person,
                "image_dims": list(gallery.image_dims), "images": layout}
    (root / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    return root


def load_queries(root: PathLike) -> List[Tuple[str, str, np.ndarray]]:
    """Load labeled queries from `root/<person>/<img>.pgm`."""
    root = Path(root)
    queries = []
    for folder in _person_dirs(root):
        for f in sorted(folder.glob("*.pgm")):
            queries.append((f"{folder.name}/{f.name}", folder.name, load_pgm(f)))
    return queries


def synthetic_gallery(
    persons: int = 5,
    images_per_person: int = 10,
    queries_per_person: int = 5,
    rows: int = 40,
    cols: int = 30,
    rank: int = 8,
    noise: float = 0.1,
    seed: int = 0
) -> Tuple[Gallery, List[Tuple[str, str, np.ndarray]]]:
    """Gallery and queries built from per-person rank-`rank` bases.

    Each image is its person's base plus Gaussian noise scaled to `noise`
    relative Frobenius norm.
    """
    rng = make_rng(seed)
    images: Dict[str, List[np.ndarray]] = {}
    queries = []
    for p in range(persons):
        label = f"person{p + 1}"
        base = rng.standard_normal((rows, rank)) @ rng.standard_normal((rank, cols))
        scale = noise * np.linalg.norm(base)

        def sample() -> np.ndarray:
            perturbation = rng.standard_normal((rows, cols))
            return base + scale * perturbation / np.linalg.norm(perturbation)

        images[label] = [sample() for _ in range(images_per_person)]
        queries.extend((f"{label}/q{i}", label, sample()) for i in range(queries_per_person))
    return Gallery.from_images(images), queries
