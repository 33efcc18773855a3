//! Gaussian-kernel densities over distinct-parent neighbors.
//!
//! The density of a window is the kernel sum over its distinct neighbors.
//! The succeed density reuses the same neighbors but scores each one by the
//! larger of its own distance and the distance between the two succeeding
//! windows, so neighbors that stop following the window are penalized.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::{CorpusIndex, Neighbor, Probe};
use crate::model::WindowId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationMode {
    /// Plain kernel sum, bounded by k.
    #[default]
    #[value(name = "kernel_sum")]
    KernelSum,
    /// Kernel sum divided by the corpus trajectory count.
    #[value(name = "paper_literal")]
    PaperLiteral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityParams {
    /// Bandwidth in normalized-DTW units.
    pub sigma: f64,
    pub mode: NormalizationMode,
}

impl Default for DensityParams {
    fn default() -> Self {
        DensityParams {
            sigma: 1.0,
            mode: NormalizationMode::KernelSum,
        }
    }
}

impl DensityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        Ok(())
    }

    fn scale(&self, trajectory_count: usize) -> f64 {
        match self.mode {
            NormalizationMode::KernelSum => 1.0,
            NormalizationMode::PaperLiteral => 1.0 / trajectory_count.max(1) as f64,
        }
    }
}

#[inline]
pub fn kernel(distance: f64, sigma: f64) -> f64 {
    (-(distance * distance) / (2.0 * sigma * sigma)).exp()
}

/// Density of a window from its distinct neighbors.
pub fn density(neighbors: &[Neighbor], params: &DensityParams, trajectory_count: usize) -> f64 {
    let sum: f64 = neighbors.iter().map(|n| kernel(n.distance, params.sigma)).sum();
    sum * params.scale(trajectory_count)
}

/// Succeed density of a window whose succeed is `succ`, over the window's
/// own neighbors in `corpus`. Neighbors without a succeed contribute nothing.
pub fn succ_density(
    succ: Probe<'_>,
    neighbors: &[Neighbor],
    corpus: &CorpusIndex,
    params: &DensityParams,
    trajectory_count: usize,
) -> f64 {
    let store = corpus.store();
    let sum: f64 = neighbors
        .iter()
        .map(|n| match store.succ(n.window) {
            Some(ns) => {
                let delta = n.distance.max(corpus.distance_to(succ, ns));
                kernel(delta, params.sigma)
            }
            None => 0.0,
        })
        .sum();
    sum * params.scale(trajectory_count)
}

/// The four densities of one reference window.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct DensityProfile {
    pub f_ref: f64,
    pub f_ref_succ: f64,
    pub f_qry: f64,
    pub f_qry_succ: f64,
}

impl DensityProfile {
    /// Both densities positive, so the ratios are defined.
    pub fn is_supported(&self) -> bool {
        self.f_ref > 0.0 && self.f_qry > 0.0
    }

    pub fn p1(&self) -> Option<f64> {
        (self.f_ref > 0.0).then(|| self.f_ref_succ / self.f_ref)
    }

    pub fn p2(&self) -> Option<f64> {
        (self.f_qry > 0.0).then(|| self.f_qry_succ / self.f_qry)
    }

    /// Density-weighted mean of `p1` and `p2`.
    pub fn pooled(&self) -> Option<f64> {
        let (p1, p2) = (self.p1()?, self.p2()?);
        Some((self.f_ref * p1 + self.f_qry * p2) / (self.f_ref + self.f_qry))
    }
}

/// Neighbor search settings used while profiling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileSettings {
    pub k: usize,
    pub density: DensityParams,
    /// Linear scans instead of graph searches.
    pub exact: bool,
    /// Read reference neighbors from the index table when it matches `exact`.
    pub use_precomputed: bool,
}

/// Whether a reference window can be profiled at all: it is indexed and has
/// an indexed succeed.
pub fn is_profilable(reference: &CorpusIndex, t: WindowId) -> bool {
    reference.is_indexed(t) && reference.store().succ(t).is_some_and(|s| reference.is_indexed(s))
}

/// Profile reference window `t` against both corpora. `None` if `t` is not
/// profilable (see [`is_profilable`]).
pub fn density_profile(
    t: WindowId,
    reference: &CorpusIndex,
    query: &CorpusIndex,
    settings: &ProfileSettings,
) -> Option<DensityProfile> {
    if !is_profilable(reference, t) {
        return None;
    }
    let store = reference.store();
    let probe = Probe::from_store(store, t);
    let succ = Probe::from_store(store, store.succ(t)?);
    let own = Some(store.parent(t));

    let table = reference.precomputed_distinct(t).filter(|_| {
        settings.use_precomputed
            && reference.precomputed_is_exact() == Some(settings.exact)
            && settings.k <= reference.params().k
    });
    let ref_neighbors: Vec<Neighbor> = match table {
        Some(list) => list[..list.len().min(settings.k)].to_vec(),
        None if settings.exact => reference.exact_distinct_knn(probe, settings.k, own),
        None => reference.distinct_knn(probe, settings.k, own),
    };
    let qry_neighbors = if settings.exact {
        query.exact_distinct_knn(probe, settings.k, None)
    } else {
        query.distinct_knn(probe, settings.k, None)
    };

    let (n_ref, n_qry) = (reference.trajectory_count(), query.trajectory_count());
    let d = &settings.density;
    let profile = DensityProfile {
        f_ref: density(&ref_neighbors, d, n_ref),
        f_ref_succ: succ_density(succ, &ref_neighbors, reference, d, n_ref),
        f_qry: density(&qry_neighbors, d, n_qry),
        f_qry_succ: succ_density(succ, &qry_neighbors, query, d, n_qry),
    };
    debug_assert!(profile.f_ref_succ <= profile.f_ref && profile.f_qry_succ <= profile.f_qry);
    Some(profile)
}
