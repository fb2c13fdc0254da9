"""Protograph LDPC code design and simulation for binary-input ISI channels."""
from .channel import DICODE, EPR4, MEMORYLESS, ChannelPoly, NoiseModel, bcjr_detect, ebno_limit, parse_channel
from .codec import DecodeConfig, LdpcCode, bp_decode, build_encoder, encode, turbo_equalize
from .lifting import QcCode, girth_of, lift, restrict, to_parity_matrix
from .pexit import ExitSurface, measure_detector_exit, pexit_converges, standard_surface, threshold_search
from .protograph import Protomatrix, builtin, builtin_names, load_code, rate_of
from .search import SearchSpec, search_base_rate_half, search_nested_step, search_rc_step
from .simulator import SimPlan, run_point, run_sweep

__version__ = "0.1.0"
