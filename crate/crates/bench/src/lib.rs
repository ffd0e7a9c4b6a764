//! Benchmark fixtures.

use hawkeslab::{ExcitationMode, Kernel, MarkDistribution, NetworkModel, ServiceDistribution};

/// lambda0 = 1, h(t) = e^{-2t}, unit marks, Exp(1) services.
pub fn markovian_reference(mode: ExcitationMode) -> NetworkModel {
    NetworkModel::markovian(1.0, 2.0, MarkDistribution::Deterministic { value: 1.0 }, 1.0, mode)
}

/// A power-law kernel with lognormal services, exercising the general paths.
pub fn heavy_kernel(mode: ExcitationMode) -> NetworkModel {
    NetworkModel::univariate(
        1.0,
        Kernel::PowerLaw {
            exponent: 2.5,
            scale: 0.6,
            cutoff: 1.0,
        },
        MarkDistribution::Exponential { rate: 1.0 },
        ServiceDistribution::LogNormal { mu: 0.0, sigma: 0.5 },
        mode,
    )
}
