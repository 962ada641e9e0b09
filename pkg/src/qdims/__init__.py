"""Generalized q-dimensions on level-varying iterated function systems.

The package splits into:

- ``codespace``: words, cylinder masses, cut sets over the address tree
- ``systems``: similarity/affine systems, translation schemes, sampling,
  separation certificates
- ``singular``: singular values of matrix products, the singular value
  function, envelope bounds
- ``theory``: critical exponents of moment sums (closed form, product,
  cut-set, and affine level-sum solvers)
- ``empirical``: mesh-cube moment sums and log-log dimension fits
- ``harness``/``cli``: experiment configs, comparison reports, subcommands
"""

from .codespace import (
    BernoulliMeasure,
    BranchingProfile,
    CutSet,
    LevelSchedule,
    Word,
    common_prefix,
    cylinder_mass,
    scale_cut_set,
)
from .empirical import (
    MeshAccumulator,
    SpectrumEstimate,
    ball_moment_integral,
    entropy_sum,
    estimate_dimension,
    fit_dimension,
    moment_sum,
)
from .harness import (
    ComparisonReport,
    ExperimentConfig,
    ReportRow,
    emit_report,
    run_experiment,
)
from .singular import (
    SingularSpectrum,
    singular_value_envelope,
    singular_value_function,
    singular_values,
    word_product,
    word_spectrum,
)
from .systems import (
    AffineSystem,
    AttractorSample,
    ExplicitTranslations,
    FiniteTranslationSet,
    RandomBoxTranslations,
    SimilarSystem,
    check_separation,
    project_word,
    sample_measure,
)
from .theory import (
    CriticalExponents,
    affine_series_dimension,
    clamp_dimension,
    cutset_dimension,
    lq_spectrum,
    product_dimension,
    stationary_affine_dimension,
    stationary_dimension,
)

__version__ = "0.1.0"
