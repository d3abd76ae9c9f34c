"""Space-time block codes with reduced sphere-decoding complexity for the two-user MIMO MAC."""

from macstbc.design_algebra import (
    ComplexLinearDesign,
    build_design,
    build_square_cod,
    evaluate,
    make_alamouti_block,
    named_design,
    rate,
)
from macstbc.lattice import (
    ChannelRealization,
    build_lattice_generator,
    check_rc_monomial,
    extract_coefficient_matrices,
)
from macstbc.qr_structure import (
    StructureClass,
    classify_design,
    extract_blocks,
    qr_decompose,
    verify_proposition1,
    verify_theorem2,
)
from macstbc.simulation import SimConfig, run_sweep, run_trial
from macstbc.sphere_decoder import (
    JointMLDecoder,
    PamConstellation,
    decode_conditional,
    ml_bruteforce,
    sphere_decode_generic,
)

__version__ = "0.1.0"
