from .loader import ChipSet, epoch_permutation, iterate_batches, load_chipset
from .projection import fit_canvas, project_to_canonical, resize_bicubic, scale_factor
from .records import ChipRecord, read_manifest, read_png, write_dataset, write_manifest, write_png
from .split import DatasetSplit, split_dataset
from .synthetic import SyntheticSpec, load_spec, make_synthetic_domains, render_chip

__all__ = [
    "ChipRecord",
    "ChipSet",
    "DatasetSplit",
    "SyntheticSpec",
    "epoch_permutation",
    "fit_canvas",
    "iterate_batches",
    "load_chipset",
    "load_spec",
    "make_synthetic_domains",
    "project_to_canonical",
    "read_manifest",
    "read_png",
    "render_chip",
    "resize_bicubic",
    "scale_factor",
    "split_dataset",
    "write_dataset",
    "write_manifest",
    "write_png",
]
