from .bundle import NETWORK_NAMES, ModelBundle, build_classifier, init_parameters, init_target_from_source
from .classifier import ResNet18
from .discriminator import PatchDiscriminator, receptive_field, score_map_side
from .generator import Generator
from .summary import architecture_table, bundle_summary

__all__ = [
    "NETWORK_NAMES",
    "Generator",
    "ModelBundle",
    "PatchDiscriminator",
    "ResNet18",
    "architecture_table",
    "build_classifier",
    "bundle_summary",
    "init_parameters",
    "init_target_from_source",
    "receptive_field",
    "score_map_side",
]
