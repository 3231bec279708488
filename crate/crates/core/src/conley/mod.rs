//! Combinatorial Conley-index verification on cubical grids.
//!
//! The time-τ map of the semiflow is replaced by a sampled multivalued map
//! on cubes. Homology of the resulting index pair stands in for the
//! cohomological index; only ranks are consumed by the periodic-orbit test.

pub mod grid;
pub mod homology;
pub mod outer;

use serde::Serialize;
use thiserror::Error;

pub use grid::{CubicalGrid, CubicalSet};
pub use homology::{relative_homology, HomologyResult};
pub use outer::{
    build_outer_map, check_isolating, forward_closure, index_pair, invariant_part,
    verify_index_pair, OuterMap,
};

use crate::poincare::SectionReport;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConleyError {
    #[error("grid error: {0}")]
    Grid(String),
    #[error("engine failure: {0}")]
    Engine(String),
    #[error("index pair construction failed: {0}")]
    PairConstructionFailed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    PeriodicOrbitCertified,
    Inconclusive,
    NotIsolating,
}

/// Rank pairing `b_{2k} = b_{2k+1}` for all `k ≥ 0`.
pub fn pairing_even_odd(betti: &[usize]) -> bool {
    let b = |k: usize| betti.get(k).copied().unwrap_or(0);
    (0..=betti.len() / 2).all(|k| b(2 * k) == b(2 * k + 1))
}

/// Rank pairing `b_{2k} = b_{2k-1}` for all `k ≥ 0`, with `b_{-1} = 0`.
pub fn pairing_shifted(betti: &[usize]) -> bool {
    let b = |k: usize| betti.get(k).copied().unwrap_or(0);
    b(0) == 0 && (1..=betti.len() / 2 + 1).all(|k| b(2 * k) == b(2 * k - 1))
}

pub fn periodic_verdict(isolating: bool, betti: &[usize], section: Option<&SectionReport>) -> Verdict {
    if !isolating {
        return Verdict::NotIsolating;
    }
    let section_ok = section.is_some_and(|s| s.passed);
    let nonzero = betti.iter().any(|&b| b > 0);
    if section_ok && nonzero && (pairing_even_odd(betti) || pairing_shifted(betti)) {
        Verdict::PeriodicOrbitCertified
    } else {
        Verdict::Inconclusive
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ConleyReport {
    pub isolating: bool,
    pub invariant_cubes: CubicalSet,
    pub n: CubicalSet,
    pub l: CubicalSet,
    #[serde(rename = "bettiPerDegree")]
    pub betti: Vec<usize>,
    pub torsion: Vec<Vec<u64>>,
    pub cell_counts: Vec<usize>,
    pub euler_consistent: bool,
    pub pair_verified: bool,
    pub verdict: Verdict,
    pub grid: CubicalGrid,
    pub tau: f64,
    pub bloat: usize,
    pub samples_per_axis: usize,
    pub section: Option<SectionReport>,
}

impl ConleyReport {
    /// Compact JSON summary (cube sets reduced to their sizes).
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "isolating": self.isolating,
            "bettiPerDegree": self.betti,
            "torsion": self.torsion,
            "verdict": self.verdict,
            "grid": self.grid,
            "tau": self.tau,
            "bloat": self.bloat,
            "samplesPerAxis": self.samples_per_axis,
            "cellCounts": self.cell_counts,
            "eulerConsistent": self.euler_consistent,
            "pairVerified": self.pair_verified,
            "nCubes": self.n.len(),
            "lCubes": self.l.len(),
            "invariantCubes": self.invariant_cubes.len(),
            "section": self.section,
        })
    }
}

/// Candidate isolating neighbourhood of a closed orbit. A tube of radius
/// `tube` cubes around `trace` is closed forward under the outer map, its
/// invariant part is thickened by `2 * bloat` cubes and closed forward
/// again. `N` is the domain of the returned map.
pub fn orbit_neighbourhood(
    flow: &dyn crate::semiflow::Flow,
    grid: &CubicalGrid,
    trace: &[Vec<f64>],
    tau: f64,
    samples_per_axis: usize,
    bloat: usize,
    tube: usize,
    max_cubes: usize,
) -> Result<OuterMap, ConleyError> {
    let seed = CubicalSet::tube(grid, trace.iter().map(|p| p.as_slice()), tube);
    if seed.is_empty() {
        return Err(ConleyError::Grid("orbit trace misses the grid".into()));
    }
    let f0 = forward_closure(flow, &seed, tau, samples_per_axis, bloat, max_cubes)?;
    let core = invariant_part(&f0, &f0.domain);
    let thick = if core.is_empty() { seed } else { core.dilate(2 * bloat) };
    forward_closure(flow, &thick, tau, samples_per_axis, bloat, max_cubes)
}

/// Isolation test, index pair, homology and verdict for a computed map.
pub fn analyze(
    f: &OuterMap,
    n: &CubicalSet,
    section: Option<SectionReport>,
) -> Result<ConleyReport, ConleyError> {
    let inv = invariant_part(f, n);
    let collar = n.boundary_collar();
    let isolating = inv.iter().all(|i| !collar.contains(i));
    let base = |l: CubicalSet, h: Option<HomologyResult>, verified: bool, verdict| ConleyReport {
        isolating,
        invariant_cubes: inv.clone(),
        n: n.clone(),
        l,
        betti: h.as_ref().map(|h| h.betti.clone()).unwrap_or_default(),
        torsion: h.as_ref().map(|h| h.torsion.clone()).unwrap_or_default(),
        cell_counts: h.as_ref().map(|h| h.cell_counts.clone()).unwrap_or_default(),
        euler_consistent: h
            .as_ref()
            .is_some_and(|h| h.euler_from_betti() == h.euler_from_cells()),
        pair_verified: verified,
        verdict,
        grid: n.grid.clone(),
        tau: f.tau,
        bloat: f.bloat,
        samples_per_axis: f.samples_per_axis,
        section: section.clone(),
    };
    if !isolating {
        return Ok(base(CubicalSet::empty(&n.grid), None, false, Verdict::NotIsolating));
    }
    let (n2, l) = index_pair(f, n)?;
    let verified = verify_index_pair(f, &n2, &l).is_ok();
    let h = relative_homology(&n2, &l);
    let verdict = if verified {
        periodic_verdict(isolating, &h.betti, section.as_ref())
    } else {
        Verdict::Inconclusive
    };
    Ok(base(l, Some(h), verified, verdict))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pass() -> SectionReport {
        SectionReport {
            passed: true,
            ..Default::default()
        }
    }

    #[test]
    fn verdict_table() {
        let s = pass();
        assert_eq!(periodic_verdict(true, &[1, 1, 0], Some(&s)), Verdict::PeriodicOrbitCertified);
        assert_eq!(periodic_verdict(true, &[1, 0, 0], Some(&s)), Verdict::Inconclusive);
        assert_eq!(periodic_verdict(true, &[0, 1, 1, 0], Some(&s)), Verdict::PeriodicOrbitCertified);
        assert_eq!(periodic_verdict(true, &[0, 0, 0], Some(&s)), Verdict::Inconclusive);
        assert_eq!(periodic_verdict(true, &[1, 1, 0], None), Verdict::Inconclusive);
        assert_eq!(periodic_verdict(false, &[1, 1, 0], Some(&s)), Verdict::NotIsolating);
    }
}
