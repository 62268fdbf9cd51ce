from .copula import CorrelationError, correlation_factor, sample_original
from .kmeans import ClusterAssignment, kmeans, within_sse
from .pearson import MarginalModel, MomentRegionError, empirical_marginal, fit_pearson

__all__ = ["CorrelationError", "correlation_factor", "sample_original", "ClusterAssignment", "kmeans",
           "within_sse", "MarginalModel", "MomentRegionError", "empirical_marginal", "fit_pearson"]
