"""Higher-order scrambled digital nets built by digit interlacing."""

from __future__ import annotations

from .badic import DigitPoint, digit_add, digit_sub, from_digits, to_digits, walsh, walsh_multi
from .estimator import builtin_integrand, convergence_experiment, estimate, run_replications
from .interlace import InterlaceSpec, deinterlace_point, interlace_index, interlace_point
from .netgen import DigitalNet, GeneratorMatrixSet, NetSpec, builtin_matrices, generate_net, t_value, verify_net
from .scramble import PermutationSource, ScrambleKey, linear_scramble, order_d_scramble, owen_scramble

__version__ = "0.1.0"
