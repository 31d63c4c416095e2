"""Super-resolution of block-averaged images.

Reconstructs plausible detail from pixelated (block-averaged) images by
conditional interpolation between neighboring blocks, followed by motion-blur
deconvolution at a well-chosen angle. Ships the codec for the compact
block-average container, the restoration pipeline, a regularized parameter
search, wavelet baselines, a CLI, and an HTTP tuning service.
"""

__version__ = "0.1.0"

from .codec import BlockAverageImage, compress, expand, load_lab, save_lab
from .deconv import DeconvSettings, MotionKernel, deconvolve, motion_psf, sweep
from .image import (
    RasterImage,
    l2_distance,
    load_png,
    reconstruction_residual,
    save_png,
)
from .interp import ThresholdTriple, decision_masks, level1_pass, level2_pass
from .pipeline import (
    PipelineSpec,
    import_parameter_matrix,
    load_preset,
    parse,
    preset_names,
    run,
    serialize,
)
from .search import SearchConfig, SearchState, optimize, trace_csv
from .sparsity import (
    SparseProblem,
    coherence,
    decay_curve,
    estimate_rip_delta,
    ista_inpaint,
    topk_approx,
)
from .wavelets import WaveletFilterPair, basis_names, dwt2, idwt2, load_basis
