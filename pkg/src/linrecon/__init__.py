"""Linear reconstruction attacks on noisy statistical releases."""

from .attack import (AttackReport, Mechanism, build_boolean_system,
                     build_linreg_system, build_logreg_system, build_mest_system,
                     build_pm_boolean_system, derive_seed, hamming_fraction,
                     run_attack, run_trial)
from .boolfunc import (BooleanFunction, MultilinearPoly, SignedFunction,
                       decompose_last_variable, decompose_pm,
                       is_nondegenerate_by_degree, is_nondegenerate_by_sign_sum,
                       to_multilinear, to_pm_function)
from .decode import (DecodeResult, LinearSystem, l1_decode, least_squares_decode,
                     round_to_bits)
from .release import Database, NoiseSpec, ReleaseBundle, get_loss, sigma_f

__version__ = "0.1.0"
