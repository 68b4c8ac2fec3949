"""MUSIC-type localization of small 2D scatterers in random clutter.

Subpackages cover the full experiment pipeline: scene construction
(:mod:`music2d.scene`), direction sets and Bessel sums
(:mod:`music2d.numerics`), far-field data models
(:mod:`music2d.forward`), SVD and subspace selection
(:mod:`music2d.spectral`), imaging maps and closed-form predictions
(:mod:`music2d.imaging`), peak scoring (:mod:`music2d.analysis`) and a
reproducible experiment runner (:mod:`music2d.cli`).
"""

__version__ = "0.1.0"

from .scene import (  # noqa: F401
    DEFAULT_SEED,
    Medium,
    PlacementError,
    Rect,
    Scatterer,
    Scene,
    UNIT_SQUARE,
    VACUUM,
    generate_randoms,
    load_scene,
    reference_scene,
    save_scene,
    validate_separation,
)
from .numerics import (  # noqa: F401
    DirectionSet,
    bessel_j0,
    bessel_j1,
    bessel_y0,
    bessel_sum_residuals,
    dipole_quadrature,
    directions,
)
from .forward import (  # noqa: F401
    ForwardModelError,
    MsrMatrix,
    asymptotic_far_field,
    asymptotic_msr,
    equispaced_wavelengths,
    foldy_lax_far_field,
    incident_field,
)
from .spectral import (  # noqa: F401
    FirstK,
    SignalSubspace,
    Threshold,
    add_noise,
    decompose,
    residual_norm,
    select,
)
from .imaging import (  # noqa: F401
    GridSpec,
    ImageGrid,
    compare_maps,
    multifreq_map,
    music_map,
    test_vector,
    theoretical_map,
)
from .analysis import Peak, PeakReport, find_peaks, match_peaks  # noqa: F401
