//! Smooth regularization `Z_ε` of a piecewise system and orbit continuation.

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::Serialize;

use crate::integrate::{IntegrateError, VectorField};
use crate::poincare::{find_periodic, PeriodicOrbit, SectionSpec};
use crate::semiflow::{SmoothFlow, Trajectory};
use crate::system::{DomainBox, PiecewiseSystem};

const NODES: usize = 64;

/// Gauss–Legendre nodes and weights on [-1, 1].
fn gauss_legendre() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = NODES;
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, z);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
                let dz = p1 / dp;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            x[i] = -z;
            x[n - 1 - i] = z;
            w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
            w[n - 1 - i] = w[i];
        }
        (x, w)
    })
}

fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

fn bump_integral(a: f64, b: f64) -> f64 {
    let (x, w) = gauss_legendre();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    x.iter()
        .zip(w)
        .map(|(xi, wi)| wi * bump(mid + half * xi))
        .sum::<f64>()
        * half
}

fn bump_total() -> f64 {
    static TOTAL: OnceLock<f64> = OnceLock::new();
    *TOTAL.get_or_init(|| bump_integral(-1.0, 1.0))
}

/// C^∞ transition: 0 for `t ≤ -1`, 1 for `t ≥ 1`, increasing in between,
/// with `φ(-t) = 1 - φ(t)`.
pub fn transition(t: f64) -> f64 {
    if t <= -1.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else if t == 0.0 {
        0.5
    } else if t > 0.0 {
        1.0 - transition(-t)
    } else {
        (bump_integral(-1.0, t) / bump_total()).clamp(0.0, 0.5)
    }
}

/// `Z_ε(p) = (1 - φ(h/ε)) Y(p) + φ(h/ε) X(p)`.
#[derive(Debug, Clone)]
pub struct RegularizedField {
    pub system: PiecewiseSystem,
    pub eps: f64,
}

pub fn regularize(system: &PiecewiseSystem, eps: f64) -> RegularizedField {
    assert!(eps > 0.0, "regularization requires eps > 0");
    RegularizedField {
        system: system.clone(),
        eps,
    }
}

impl RegularizedField {
    pub fn eval_vec(&self, p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.system.dim()];
        self.eval_into(p, &mut out);
        out
    }

    fn eval_into(&self, p: &[f64], out: &mut [f64]) {
        let s = transition(self.system.eval_h(p) / self.eps);
        if s == 1.0 {
            self.system.x.eval(p, out);
        } else if s == 0.0 {
            self.system.y.eval(p, out);
        } else {
            let mut xv = [0.0; 3];
            let n = out.len();
            self.system.x.eval(p, &mut xv[..n]);
            self.system.y.eval(p, out);
            for (o, x) in out.iter_mut().zip(&xv[..n]) {
                *o = (1.0 - s) * *o + s * x;
            }
        }
    }
}

impl VectorField for RegularizedField {
    fn dim(&self) -> usize {
        self.system.dim()
    }
    fn eval(&self, p: &[f64], out: &mut [f64]) -> Result<(), IntegrateError> {
        self.eval_into(p, out);
        Ok(())
    }
}

pub fn regularized_flow(system: &PiecewiseSystem, eps: f64) -> SmoothFlow<RegularizedField> {
    let mut flow = SmoothFlow::new(regularize(system, eps), system.domain.clone());
    flow.options.h_max = 0.05;
    flow
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ContinuationEntry {
    pub eps: f64,
    pub success: bool,
    pub period: Option<f64>,
    pub drift: Option<f64>,
    pub stayed_in_n: bool,
    pub closure_error: Option<f64>,
    pub base_point: Option<Vec<f64>>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ContinuationReport {
    pub filippov_period: f64,
    pub entries: Vec<ContinuationEntry>,
    /// Largest `ε` of the longest all-success prefix of the list.
    pub empirical_eps0: Option<f64>,
    pub drift_monotone: bool,
}

fn trajectory_inside(traj: &Trajectory, inside: &(dyn Fn(&[f64]) -> bool + Sync)) -> bool {
    let t_end = traj.end_time();
    let samples = 2000;
    (0..=samples).all(|k| {
        traj.at(t_end * k as f64 / samples as f64)
            .is_some_and(|p| inside(&p))
    })
}

/// Runs `find_periodic` on `Z_ε` for each `ε`, seeded at the Filippov
/// orbit's base point.
pub fn continuation_experiment(
    system: &PiecewiseSystem,
    inside_n: &(dyn Fn(&[f64]) -> bool + Sync),
    spec: &SectionSpec,
    orbit: &PeriodicOrbit,
    eps_list: &[f64],
    t_cap: f64,
) -> ContinuationReport {
    let entries: Vec<ContinuationEntry> = eps_list
        .par_iter()
        .map(|&eps| {
            let flow = regularized_flow(system, eps);
            match find_periodic(&flow, spec, &orbit.base_point, 60, t_cap) {
                Ok(o) => {
                    let stayed = trajectory_inside(&o.trajectory, inside_n);
                    ContinuationEntry {
                        eps,
                        success: stayed,
                        period: Some(o.period),
                        drift: Some(o.period - orbit.period),
                        stayed_in_n: stayed,
                        closure_error: Some(o.closure_error),
                        base_point: Some(o.base_point),
                        error: None,
                    }
                }
                Err(e) => ContinuationEntry {
                    eps,
                    success: false,
                    period: None,
                    drift: None,
                    stayed_in_n: false,
                    closure_error: None,
                    base_point: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let empirical_eps0 = if entries.first().is_some_and(|e| e.success) {
        Some(entries[0].eps)
    } else {
        None
    };
    let drifts: Vec<f64> = entries
        .iter()
        .take_while(|e| e.success)
        .filter_map(|e| e.drift.map(f64::abs))
        .collect();
    let drift_monotone = drifts.len() == entries.len() && drifts.windows(2).all(|w| w[1] <= w[0]);
    ContinuationReport {
        filippov_period: orbit.period,
        entries,
        empirical_eps0,
        drift_monotone,
    }
}

/// Bounding-box membership, for callers without a cubical `N`.
pub fn box_region(b: DomainBox) -> impl Fn(&[f64]) -> bool + Sync {
    move |p: &[f64]| b.contains(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Polynomial;
    use crate::system::SmoothField;

    #[test]
    fn quadrature_integrates_polynomials() {
        let (x, w) = gauss_legendre();
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let m: f64 = x.iter().zip(w).map(|(x, w)| w * x.powi(10)).sum();
        assert!((m - 2.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn transition_shape() {
        assert_eq!(transition(-2.0), 0.0);
        assert_eq!(transition(2.0), 1.0);
        assert_eq!(transition(0.0), 0.5);
        let mut prev = 0.0;
        for k in 1..1000 {
            let t = -1.0 + 2.0 * k as f64 / 1000.0;
            let v = transition(t);
            assert!(v > prev || (v == prev && (v == 1.0 || v == 0.0)), "not increasing at {t}");
            prev = v;
        }
        assert!((transition(0.3) + transition(-0.3) - 1.0).abs() < 1e-15);
        for t in [-1.0 + 1e-3, 1.0 - 1e-3] {
            let d = (transition(t + 1e-6) - transition(t - 1e-6)) / 2e-6;
            assert!(d.abs() < 1e-6, "{d}");
        }
    }

    #[test]
    fn blend_matches_fields() {
        let z = PiecewiseSystem::new(
            SmoothField::parse("0, 0, -1", 3).unwrap(),
            SmoothField::parse("0, 0, 1", 3).unwrap(),
            Polynomial::parse("x3", 3).unwrap(),
            DomainBox::new(vec![-1.0; 3], vec![1.0; 3]),
        )
        .unwrap();
        let r = regularize(&z, 0.1);
        assert_eq!(r.eval_vec(&[0.0; 3]), vec![0.0; 3]);
        assert_eq!(r.eval_vec(&[0.3, 0.1, 0.2]), vec![0.0, 0.0, -1.0]);
        assert_eq!(r.eval_vec(&[0.3, 0.1, -0.1]), vec![0.0, 0.0, 1.0]);
        let v = r.eval_vec(&[0.0, 0.0, 0.05])[2];
        assert!(v < 0.0 && v > -1.0);
    }
}
