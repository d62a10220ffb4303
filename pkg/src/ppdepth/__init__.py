"""Dirichlet depths for temporal point processes."""
from .analysis import (
    LikelihoodClassifier,
    MaxDepthClassifier,
    RankReport,
    classify,
    contour_grid,
    ks_uniformity,
    likelihood_classify,
    rank,
    train_classifier,
)
from .cardinality import (
    CardinalityModel,
    PoissonMixture,
    fit_empirical,
    fit_poisson_mixture_em,
    fit_poisson_mle,
    weight,
)
from .core import (
    Dataset,
    IetVector,
    Realization,
    TimeDomain,
    from_iet,
    parse_dataset,
    read_dataset,
    render_dataset,
    to_iet,
    write_dataset,
)
from .depth import (
    ConditionalMeanTable,
    DepthModel,
    PointProcessDepth,
    bootstrap_conditional_means,
    combined_depth,
    dirichlet_conditional_depth,
    hpp_conditional_depth,
    mahalanobis_conditional_depth,
    trimmed_region_member,
)
from .rescale import IntensityModel, estimate_intensity, rescale, ts_conditional_depth
from .simulate import WarpFunction, apply_warp, sample_hpp, sample_ipp, simulate_hpp, simulate_ipp

__version__ = "0.1.0"
