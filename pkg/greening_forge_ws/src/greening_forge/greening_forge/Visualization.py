from pathlib import Path
from typing import Union
import logging

import numpy as np
from matplotlib.colors import ListedColormap
from matplotlib.figure import Figure

from greening_forge.Corruption import RING_LABELS, RING_NAMES
from greening_forge.DefectSynth import SyntheticPair
from greening_forge.QualityMetrics import channel_composition
from greening_forge.Raster import CHANNEL_NAMES, RasterImage, require_same_shape

logger = logging.getLogger(__name__)

# Background first, then rings from the surface tint to the dark core
RING_COLORS = [
    "#ffffff", "#c8e6a0", "#f0a040", "#a0d070", "#70a850", "#70a850", "#306020", "#102810",
]


def _ring_index(labels: np.ndarray) -> np.ndarray:
    index = np.zeros(labels.shape, dtype=np.int16)
    for i, label in enumerate(RING_LABELS, start=1):
        index[labels == label] = i
    return index


def render_preview(clean: RasterImage, pair: SyntheticPair, out_path: Union[str, Path]) -> None:
    """
    Save a contact sheet of one synthetic pair.

    Four image panels (clean, defected, ring labels, mask) and a bar chart of
    the channel means inside the mask before and after corruption.
    """
    require_same_shape(clean, pair.defected)
    out_path = Path(out_path)
    if not out_path.parent.is_dir():
        raise FileNotFoundError(f"output directory does not exist: {out_path.parent}")

    fig = Figure(figsize=(15, 3.6))
    axes = fig.subplots(1, 5)

    axes[0].imshow(clean.to_hwc())
    axes[0].set_title("Clean")
    axes[1].imshow(pair.defected.to_hwc())
    axes[1].set_title(f"Defected ({pair.layout.mix_class.value}, {len(pair.layout)} defects)")
    axes[2].imshow(_ring_index(pair.rings.labels), cmap=ListedColormap(RING_COLORS),
                   vmin=0, vmax=len(RING_LABELS), interpolation="nearest")
    axes[2].set_title("Rings")
    axes[3].imshow(pair.mask.values, cmap="gray", vmin=0.0, vmax=1.0)
    axes[3].set_title("Mask")
    for ax in axes[:4]:
        ax.set_axis_off()

    x = np.arange(len(CHANNEL_NAMES))
    if pair.mask.nonzero_count():
        before = channel_composition(clean, pair.mask)["inside"]
        after = channel_composition(pair.defected, pair.mask)["inside"]
        axes[4].bar(x - 0.2, [before[n] for n in CHANNEL_NAMES], width=0.4, label="clean")
        axes[4].bar(x + 0.2, [after[n] for n in CHANNEL_NAMES], width=0.4, label="defected")
        axes[4].legend()
    axes[4].set_xticks(x)
    axes[4].set_xticklabels(CHANNEL_NAMES)
    axes[4].set_ylim(0.0, 1.0)
    axes[4].set_title("Mean inside mask")

    present = sorted(set(np.unique(pair.rings.labels).tolist()) - {0})
    fig.suptitle(", ".join(f"{label}: {RING_NAMES[label]}" for label in present), fontsize=8)
    fig.tight_layout()
    try:
        fig.savefig(out_path, dpi=100)
    except (OSError, ValueError) as exc:
        raise OSError(f"cannot write preview {out_path}: {exc}") from exc
    logger.info("wrote preview %s", out_path)
