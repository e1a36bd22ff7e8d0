from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union
import json
import logging
import math

import numpy as np

from greening_forge.BaselineRestore import histogram_match_region
from greening_forge.DefectSynth import DefectSynthesizer, derive_image_seed
from greening_forge.Errors import DomainError, ForgeError, FormatError, UsageError
from greening_forge.LossKernel import DEFAULT_THRESHOLD, LossReport, combined_loss, defect_mask
from greening_forge.QualityMetrics import evaluate_pair, outside_change_fraction
from greening_forge.Raster import (
    GrayField,
    load_image,
    load_mask,
    require_same_shape,
    save_image,
    save_mask,
)
from greening_forge.SynthConfig import SynthConfig
from greening_forge.Visualization import render_preview

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

MANIFEST_VERSION = "1.0"
MANIFEST_NAME = "manifest.json"
SUBDIRS = ("clean", "defected", "masks")
EVAL_LOSS_WEIGHT = 0.1


@dataclass(frozen=True)
class ManifestEntry:
    """One generated triple; paths are relative to the dataset root."""

    name: str
    clean_path: str
    defected_path: str
    mask_path: str
    image_seed: int
    mix_class: str
    defect_count: int
    split: Optional[str] = None


@dataclass
class DatasetManifest:
    """
    Index of a generated dataset.

    Attributes:
        dataset_seed (int): Seed every per-image seed is derived from.
        config_digest (str): SHA-256 of the synthesis config.
        config (Dict[str, Any]): Full synthesis config.
        entries (List[ManifestEntry]): One entry per written triple, sorted by name;
            paths are relative to the dataset directory.
        version (str): Manifest format version.
    """

    dataset_seed: int
    config_digest: str
    config: Dict[str, Any]
    entries: List[ManifestEntry] = field(default_factory=list)
    version: str = MANIFEST_VERSION

    def to_dict(self) -> Dict[str, Any]:
        """Return the manifest as plain JSON-ready data."""
        return asdict(self)

    def write(self, path: PathLike) -> None:
        """Write the manifest as sorted, indented JSON."""
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n")

    @classmethod
    def load(cls, path: PathLike) -> "DatasetManifest":
        """Read a manifest written by `write`."""
        data = json.loads(Path(path).read_text())
        try:
            entries = [ManifestEntry(**e) for e in data.pop("entries")]
            return cls(entries=entries, **data)
        except (KeyError, TypeError) as exc:
            raise FormatError(f"malformed manifest {path}: {exc}") from exc


@dataclass(frozen=True)
class EvalRow:
    """Scores of one restored/ground-truth pair; optional columns are None when not requested."""

    pair_id: str
    psnr_db: float
    ms_ssim: float
    ssim: float
    cropout_ssim: Optional[float] = None
    loss: Optional[LossReport] = None
    outside_change: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        """Return the row with infinite PSNR spelled as "inf"."""
        return {
            "pair_id": self.pair_id,
            "psnr_db": _json_float(self.psnr_db),
            "ms_ssim": self.ms_ssim,
            "ssim": self.ssim,
            "cropout_ssim": self.cropout_ssim,
            "loss": self.loss.to_dict() if self.loss is not None else None,
            "outside_change": self.outside_change,
        }


@dataclass
class EvalReport:
    """Scored rows plus the (pair_id, reason) of every pair that was skipped."""

    rows: List[EvalRow] = field(default_factory=list)
    skipped: List[Tuple[str, str]] = field(default_factory=list)

    def aggregate(self) -> Dict[str, Any]:
        """Arithmetic mean of every column over the rows that carry it."""
        columns: Dict[str, Callable[[EvalRow], Optional[float]]] = {
            "psnr_db": lambda r: r.psnr_db,
            "ms_ssim": lambda r: r.ms_ssim,
            "ssim": lambda r: r.ssim,
            "cropout_ssim": lambda r: r.cropout_ssim,
            "loss": lambda r: r.loss.combined if r.loss is not None else None,
            "outside_change": lambda r: r.outside_change,
        }
        out: Dict[str, Any] = {"count": len(self.rows), "skipped": len(self.skipped)}
        for name, getter in columns.items():
            values = [v for v in (getter(r) for r in self.rows) if v is not None]
            out[name] = _json_float(math.fsum(values) / len(values)) if values else None
        return out


def _json_float(value: float) -> Union[float, str]:
    return "inf" if math.isinf(value) else value


def _run_tasks(fn: Callable, tasks: Sequence, jobs: int) -> Iterable:
    """Map `fn` over `tasks` in order, on a pool of `jobs` worker processes when jobs > 1."""
    if jobs < 1:
        raise UsageError(f"jobs must be >= 1, got {jobs}")
    if jobs == 1 or len(tasks) <= 1:
        return [fn(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


def _list_files(directory: Path) -> List[Path]:
    if not directory.is_dir():
        raise FileNotFoundError(f"directory not found: {directory}")
    return sorted((p for p in directory.iterdir() if p.is_file()), key=lambda p: p.name)


########## Generation ##########

@dataclass(frozen=True)
class _GenerateTask:
    source: Path
    index: int
    image_seed: int
    out_dir: Path
    config: SynthConfig


def _generate_entry(task: _GenerateTask) -> Optional[ManifestEntry]:
    """Synthesize and write one triple; None when the source cannot be decoded."""
    try:
        clean = load_image(task.source)
    except FileNotFoundError:
        raise
    except (FormatError, OSError) as exc:
        logger.warning("skipping %s: %s", task.source.name, exc)
        return None

    pair = DefectSynthesizer(task.config).synthesize(clean, task.image_seed)
    name = task.source.stem
    rel = {sub: f"{sub}/{name}.png" for sub in SUBDIRS}
    depth = task.config.output_depth
    save_image(clean, task.out_dir / rel["clean"], depth)
    save_image(pair.defected, task.out_dir / rel["defected"], depth)
    save_mask(pair.mask, task.out_dir / rel["masks"])
    return ManifestEntry(
        name=name,
        clean_path=rel["clean"],
        defected_path=rel["defected"],
        mask_path=rel["masks"],
        image_seed=task.image_seed,
        mix_class=pair.layout.mix_class.value,
        defect_count=len(pair.layout),
    )


def _assign_split(entries: List[ManifestEntry], fraction: float, seed: int) -> List[ManifestEntry]:
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(entries))
    train = set(order[:round(fraction * len(entries))].tolist())
    return [
        ManifestEntry(**{**asdict(e), "split": "train" if i in train else "test"})
        for i, e in enumerate(entries)
    ]


def _remove_outputs(out_dir: Path, tasks: Sequence[_GenerateTask],
                    created: Sequence[Path]) -> None:
    written = [out_dir / sub / f"{task.source.stem}.png" for task in tasks for sub in SUBDIRS]
    for path in written + [out_dir / MANIFEST_NAME]:
        if path.is_file():
            path.unlink()
    for directory in reversed(created):
        if directory.is_dir() and not any(directory.iterdir()):
            directory.rmdir()


def generate_dataset(
    clean_dir: PathLike,
    out_dir: PathLike,
    config: Optional[SynthConfig] = None,
    seed: int = 0,
    jobs: int = 1,
    split: Optional[float] = None,
) -> DatasetManifest:
    """

    Build a paired greening dataset from a directory of clean images.

    Args:
        clean_dir: Directory of clean PNG/JPEG images, processed in name order.
        out_dir: Output directory; receives clean/, defected/, masks/ and manifest.json.
        config: Synthesis parameters, defaults when omitted.
        seed: Dataset seed. Image i (by sorted position) uses derive_image_seed(seed, i).
        jobs: Worker processes.
        split: Optional train fraction in [0, 1] for a seeded train/test split.

    Returns:
        DatasetManifest: The manifest that was written.
    """
    config = config or SynthConfig()
    clean_dir, out_dir = Path(clean_dir), Path(out_dir)
    if split is not None and not 0.0 <= split <= 1.0:
        raise UsageError(f"split must be in [0, 1], got {split}")

    sources = _list_files(clean_dir)
    if not sources:
        raise UsageError(f"no input images in {clean_dir}")
    stems = [p.stem for p in sources]
    duplicates = sorted({s for s in stems if stems.count(s) > 1})
    if duplicates:
        raise UsageError(f"input names collide after extension removal: {', '.join(duplicates)}")

    created = [d for d in [out_dir] + [out_dir / sub for sub in SUBDIRS] if not d.exists()]
    for directory in created:
        directory.mkdir(parents=True)

    tasks = [
        _GenerateTask(path, i, derive_image_seed(seed, i), out_dir, config)
        for i, path in enumerate(sources)
    ]
    logger.info("Generating %d pairs from %s with %d job(s)", len(tasks), clean_dir, jobs)
    try:
        entries = [e for e in _run_tasks(_generate_entry, tasks, jobs) if e is not None]
        if not entries:
            raise UsageError(f"no decodable images in {clean_dir}")
        if split is not None:
            entries = _assign_split(entries, split, seed)
        manifest = DatasetManifest(
            dataset_seed=seed,
            config_digest=config.digest(),
            config=config.to_dict(),
            entries=entries,
        )
        manifest.write(out_dir / MANIFEST_NAME)
    except (OSError, ForgeError):
        _remove_outputs(out_dir, tasks, created)
        raise

    logger.info("Wrote %d pairs to %s", len(entries), out_dir)
    return manifest


########## Evaluation ##########

@dataclass(frozen=True)
class _EvalTask:
    pair_id: str
    restored: Path
    gt: Path
    mask: Optional[Path]
    input: Optional[Path]
    scales: int


def _evaluate_entry(task: _EvalTask) -> Union[EvalRow, Tuple[str, str]]:
    """Score one pair; data and I/O failures come back as a (pair_id, reason) tuple."""
    try:
        restored = load_image(task.restored)
        gt = load_image(task.gt)
        mask = load_mask(task.mask) if task.mask is not None else None
        metrics = evaluate_pair(restored, gt, mask, task.scales)

        loss, outside = None, None
        if task.input is not None:
            source = load_image(task.input)
            require_same_shape(restored, source)
            loss = combined_loss(restored, gt, source, w=EVAL_LOSS_WEIGHT)
            region = mask if mask is not None else defect_mask(source, gt, DEFAULT_THRESHOLD)
            outside = outside_change_fraction(restored, source, region)
    except (ForgeError, OSError) as exc:
        return task.pair_id, str(exc)

    return EvalRow(
        pair_id=task.pair_id,
        psnr_db=metrics.psnr_db,
        ms_ssim=metrics.ms_ssim,
        ssim=metrics.ssim,
        cropout_ssim=metrics.cropout_ssim,
        loss=loss,
        outside_change=outside,
    )


def _by_stem(directory: Optional[PathLike]) -> Optional[Dict[str, Path]]:
    if directory is None:
        return None
    return {p.stem: p for p in _list_files(Path(directory))}


def evaluate_dirs(
    restored_dir: PathLike,
    gt_dir: PathLike,
    mask_dir: Optional[PathLike] = None,
    input_dir: Optional[PathLike] = None,
    scales: int = 5,
    jobs: int = 1,
) -> EvalReport:
    """
    Score every restored image against its ground truth, pairing files by stem.

    Restored images without a ground truth (or without a mask or input when
    those directories are given) and pairs that fail to score are listed in
    `skipped` instead of aborting the run.
    """
    restored, gts = _by_stem(restored_dir), _by_stem(gt_dir)
    masks, inputs = _by_stem(mask_dir), _by_stem(input_dir)

    report = EvalReport()
    tasks = []
    for stem, path in sorted(restored.items()):
        missing = [
            kind for kind, lookup in (("ground truth", gts), ("mask", masks), ("input", inputs))
            if lookup is not None and stem not in lookup
        ]
        if missing:
            report.skipped.append((stem, f"no {', '.join(missing)}"))
            continue
        tasks.append(_EvalTask(
            pair_id=stem,
            restored=path,
            gt=gts[stem],
            mask=masks[stem] if masks is not None else None,
            input=inputs[stem] if inputs is not None else None,
            scales=scales,
        ))
    for stem in sorted(set(gts) - set(restored)):
        report.skipped.append((stem, "no restored image"))

    for result in _run_tasks(_evaluate_entry, tasks, jobs):
        if isinstance(result, EvalRow):
            report.rows.append(result)
        else:
            report.skipped.append(result)
    for pair_id, reason in report.skipped:
        logger.warning("skipped %s: %s", pair_id, reason)
    logger.info("Evaluated %d pairs, skipped %d", len(report.rows), len(report.skipped))
    return report


def aggregate_path(out_path: PathLike) -> Path:
    """Return the path of the aggregate JSON that accompanies `out_path`."""
    out_path = Path(out_path)
    return out_path.with_name(f"{out_path.stem}.aggregate.json")


def write_report(report: EvalReport, out_path: PathLike) -> Path:
    """Write one JSON line per row to `out_path` and the aggregate next to it."""
    out_path = Path(out_path)
    if not out_path.parent.is_dir():
        raise FileNotFoundError(f"output directory does not exist: {out_path.parent}")
    with out_path.open("w") as f:
        for row in report.rows:
            f.write(json.dumps(row.to_dict(), sort_keys=True) + "\n")
    summary = {
        "aggregate": report.aggregate(),
        "skipped": [{"pair_id": p, "reason": r} for p, r in report.skipped],
    }
    target = aggregate_path(out_path)
    target.write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    return target


########## Single-image operations ##########

def derive_mask(input_path: PathLike, gt_path: PathLike, out_path: PathLike,
                t: float = DEFAULT_THRESHOLD) -> GrayField:
    """Recover a defect mask from a before/after pair and write it as a mask PNG."""
    mask = defect_mask(load_image(input_path), load_image(gt_path), t)
    save_mask(mask, out_path)
    logger.info("derived mask %s covers %d px", out_path, mask.nonzero_count())
    return mask


def compute_loss(pred_path: PathLike, gt_path: PathLike, input_path: PathLike,
                 w: float = EVAL_LOSS_WEIGHT, t: float = DEFAULT_THRESHOLD,
                 freq_weight: float = 0.1) -> LossReport:
    """Score one prediction with the combined loss, reading all three images from disk."""
    pred, gt, source = load_image(pred_path), load_image(gt_path), load_image(input_path)
    return combined_loss(pred, gt, source, w, t, freq_weight)


def run_baseline(defected_path: PathLike, mask_path: PathLike, out_path: PathLike,
                 annulus_width: int = 16, reference_mask_path: Optional[PathLike] = None) -> None:
    """Restore one image with histogram matching and write it as an 8-bit PNG."""
    img = load_image(defected_path)
    mask = load_mask(mask_path)
    reference = load_mask(reference_mask_path) if reference_mask_path is not None else None
    restored = histogram_match_region(img, mask, annulus_width, reference)
    save_image(restored, out_path)
    logger.info("wrote restored image %s", out_path)


def run_preview(clean_path: PathLike, out_path: PathLike, seed: int = 0,
                config: Optional[SynthConfig] = None) -> None:
    """Synthesize one pair from `clean_path` and save its contact sheet to `out_path`."""
    clean = load_image(clean_path)
    if seed < 0:
        raise DomainError(f"seed must be non-negative, got {seed}")
    pair = DefectSynthesizer(config).synthesize(clean, seed)
    render_preview(clean, pair, out_path)
