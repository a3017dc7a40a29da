"""Integrated fleet assignment and crew planning over a yearly horizon."""

from .instance import Instance, generate_synthetic, load_instance, save_instance
from .timespace import build_network, build_networks
from .models import build_bim_legbased, build_fam, build_monolithic_bmp, build_tfacpp_pairing
from .benders import benders_loop
from .colgen import mip_finish, run_colgen

__all__ = [
    "Instance",
    "generate_synthetic",
    "load_instance",
    "save_instance",
    "build_network",
    "build_networks",
    "build_fam",
    "build_bim_legbased",
    "build_monolithic_bmp",
    "build_tfacpp_pairing",
    "benders_loop",
    "run_colgen",
    "mip_finish",
]
