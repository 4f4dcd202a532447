# Utils Package
from utils.bits import encode_hex, decode_hex, xor, inner_product, pad_right
from utils.rng import DeterministicRNG
from utils.stats import Estimate, chernoff_confidence
from utils.cache import HandleRegistry
from utils.file_utils import canonical_json, write_json_lines, read_json_lines, write_atomic
