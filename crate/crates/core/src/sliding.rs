//! The Filippov sliding field, its boundary extension and pseudo-equilibria.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::poly::{Interval, Polynomial};
use crate::system::{PiecewiseSystem, RegionLabel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SlidingError {
    #[error("sliding denominator Yh - Xh = {value:e} vanishes at {point:?}")]
    DenominatorVanishes { point: Vec<f64>, value: f64 },
}

/// `numerators(p) / denominator(p)`, with exact polynomial parts.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalField {
    pub numerators: Vec<Polynomial>,
    pub denominator: Polynomial,
}

impl RationalField {
    pub fn dim(&self) -> usize {
        self.numerators.len()
    }

    pub fn eval(&self, p: &[f64]) -> Option<Vec<f64>> {
        let d = self.denominator.eval(p);
        if d == 0.0 {
            return None;
        }
        Some(self.numerators.iter().map(|q| q.eval(p) / d).collect())
    }

    /// Numerator of the Lie derivative of `g` along this field; the
    /// derivative itself is this polynomial divided by the denominator.
    pub fn lie_numerator(&self, g: &Polynomial) -> Polynomial {
        let mut acc = Polynomial::zero(g.dim());
        for (i, n) in self.numerators.iter().enumerate() {
            let d = g.derivative(i);
            if !d.is_zero() && !n.is_zero() {
                acc = &acc + &(n * &d);
            }
        }
        acc
    }

    /// Value of the Lie derivative of `g` at `p`.
    pub fn lie_eval(&self, g: &Polynomial, p: &[f64]) -> f64 {
        self.lie_numerator(g).eval(p) / self.denominator.eval(p)
    }

    /// Value of the second Lie derivative of `g` at `p`:
    /// with `P = ⟨N, ∇g⟩`, it equals `(⟨N, ∇P⟩ D − P ⟨N, ∇D⟩) / D³`.
    pub fn lie2_eval(&self, g: &Polynomial, p: &[f64]) -> f64 {
        let pn = self.lie_numerator(g);
        let d = self.denominator.eval(p);
        let a = self.lie_numerator(&pn).eval(p);
        let b = self.lie_numerator(&self.denominator).eval(p);
        (a * d - pn.eval(p) * b) / (d * d * d)
    }
}

/// Exact construction of `Z^s` with numerators `Yh·X_i − Xh·Y_i` and
/// denominator `Yh − Xh`.
pub fn sliding_field(z: &PiecewiseSystem) -> RationalField {
    let xh = z.xh(1);
    let yh = z.yh(1);
    let numerators = z
        .x
        .components()
        .iter()
        .zip(z.y.components())
        .map(|(xi, yi)| &(yh * xi) - &(xh * yi))
        .collect();
    RationalField {
        numerators,
        denominator: yh - xh,
    }
}

fn eval_signed(
    z: &PiecewiseSystem,
    p: &[f64],
    sign: f64,
    out: &mut [f64],
) -> Result<(), SlidingError> {
    let n = z.dim();
    let mut xv = [0.0; 3];
    let mut yv = [0.0; 3];
    z.x.eval(p, &mut xv[..n]);
    z.y.eval(p, &mut yv[..n]);
    let mut xh = z.eval_xh(p);
    let mut yh = z.eval_yh(p);
    if sign < 0.0 {
        for i in 0..n {
            xv[i] = -xv[i];
            yv[i] = -yv[i];
        }
        xh = -xh;
        yh = -yh;
    }
    let et = z.tol.eps_tan;
    let (tx, ty) = (xh.abs() <= et, yh.abs() <= et);
    if tx && ty {
        out[..n].iter_mut().for_each(|v| *v = 0.0);
        return Ok(());
    }
    if tx {
        out[..n].copy_from_slice(&xv[..n]);
        return Ok(());
    }
    if ty {
        out[..n].copy_from_slice(&yv[..n]);
        return Ok(());
    }
    let d = yh - xh;
    if d.abs() < z.tol.eps_denominator {
        return Err(SlidingError::DenominatorVanishes {
            point: p.to_vec(),
            value: d,
        });
    }
    for i in 0..n {
        out[i] = (yh * xv[i] - xh * yv[i]) / d;
    }
    Ok(())
}

/// Sliding field on `Σ^S`, extended to `∂Σ^s`: `X(p)` where `Xh = 0`,
/// `Y(p)` where `Yh = 0`, and zero where both vanish.
pub fn eval_sliding_into(
    z: &PiecewiseSystem,
    p: &[f64],
    out: &mut [f64],
) -> Result<(), SlidingError> {
    eval_signed(z, p, 1.0, out)
}

pub fn eval_sliding(z: &PiecewiseSystem, p: &[f64]) -> Result<Vec<f64>, SlidingError> {
    let mut out = vec![0.0; z.dim()];
    eval_sliding_into(z, p, &mut out)?;
    Ok(out)
}

/// `Z^e(p) = −(−Z)^s(p)`. Evaluation only; never integrated.
pub fn eval_escaping(z: &PiecewiseSystem, p: &[f64]) -> Result<Vec<f64>, SlidingError> {
    let mut out = vec![0.0; z.dim()];
    eval_signed(z, p, -1.0, &mut out)?;
    Ok(out.into_iter().map(|v| -v).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum PseudoEquilibriumKind {
    InteriorOfSigmaS,
    BoundaryDoubleTangency,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PseudoEquilibrium {
    pub location: Vec<f64>,
    pub residual: f64,
    pub kind: PseudoEquilibriumKind,
}

const SUBDIVISION_DEPTH: usize = 12;
const LIVE_BOX_CAP: usize = 4096;

/// Zeros of `Z^s` on the sliding stratum inside `search`, by interval
/// exclusion over a subdivision followed by Gauss–Newton polishing. Not
/// guaranteed to be complete.
pub fn pseudo_equilibria(
    z: &PiecewiseSystem,
    search: &crate::system::DomainBox,
) -> Vec<PseudoEquilibrium> {
    let zs = sliding_field(z);
    let n = z.dim();
    if zs.numerators.iter().all(Polynomial::is_zero) {
        // Z^s vanishes identically: any sliding point is a representative.
        let mut reps = Vec::new();
        for p in sigma_seeds(z, search) {
            if let RegionLabel::Sliding = z.classify_point(&p) {
                reps.push(PseudoEquilibrium {
                    residual: 0.0,
                    location: p,
                    kind: PseudoEquilibriumKind::InteriorOfSigmaS,
                });
                break;
            }
        }
        return reps;
    }

    let excluded = |bx: &[Interval]| -> bool {
        if !z.h.eval_interval(bx).contains_zero() {
            return true;
        }
        if zs.numerators.iter().any(|q| !q.eval_interval(bx).contains_zero()) {
            return true;
        }
        let xh = z.xh(1).eval_interval(bx);
        let yh = z.yh(1).eval_interval(bx);
        xh.lo > z.tol.eps_tan || yh.hi < -z.tol.eps_tan
    };

    let root: Vec<Interval> = (0..n)
        .map(|i| Interval::new(search.lo[i], search.hi[i]))
        .collect();
    let mut live = vec![root];
    for _ in 0..SUBDIVISION_DEPTH * n {
        let mut next = Vec::with_capacity(live.len() * 2);
        for bx in &live {
            if excluded(bx) {
                continue;
            }
            let (k, _) = bx
                .iter()
                .enumerate()
                .map(|(i, iv)| (i, iv.hi - iv.lo))
                .fold((0, f64::MIN), |a, b| if b.1 > a.1 { b } else { a });
            let mid = 0.5 * (bx[k].lo + bx[k].hi);
            let mut left = bx.clone();
            left[k].hi = mid;
            let mut right = bx.clone();
            right[k].lo = mid;
            next.push(left);
            next.push(right);
        }
        if next.len() > LIVE_BOX_CAP {
            live.retain(|bx| !excluded(bx));
            break;
        }
        live = next;
    }
    live.retain(|bx| !excluded(bx));

    let mut found: Vec<PseudoEquilibrium> = Vec::new();
    for bx in live {
        let center: Vec<f64> = bx.iter().map(|iv| 0.5 * (iv.lo + iv.hi)).collect();
        let Some(q) = gauss_newton(z, &zs, &center) else {
            continue;
        };
        if !search.contains(&q) || z.eval_h(&q).abs() >= z.tol.eps_sigma {
            continue;
        }
        let kind = match z.classify_point(&q) {
            RegionLabel::Sliding => PseudoEquilibriumKind::InteriorOfSigmaS,
            RegionLabel::Tangent(info) if info.tangent_x && info.tangent_y => {
                PseudoEquilibriumKind::BoundaryDoubleTangency
            }
            _ => continue,
        };
        let residual = match eval_sliding(z, &q) {
            Ok(v) => v.iter().map(|c| c * c).sum::<f64>().sqrt(),
            Err(_) => continue,
        };
        if residual >= z.tol.eps_pe {
            continue;
        }
        let dup = found.iter().any(|e| {
            e.location
                .iter()
                .zip(&q)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
                < 1e-6
        });
        if !dup {
            found.push(PseudoEquilibrium {
                location: q,
                residual,
                kind,
            });
        }
    }
    found
}

fn sigma_seeds(z: &PiecewiseSystem, search: &crate::system::DomainBox) -> Vec<Vec<f64>> {
    let mut local = z.clone();
    local.domain = search.clone();
    local.sample_sigma(if z.dim() == 2 { 17 } else { 7 })
}

/// Least-squares Newton on `(h, N_1, ..., N_n) = 0`.
fn gauss_newton(z: &PiecewiseSystem, zs: &RationalField, start: &[f64]) -> Option<Vec<f64>> {
    let n = z.dim();
    let eqs: Vec<&Polynomial> = std::iter::once(&z.h).chain(zs.numerators.iter()).collect();
    let grads: Vec<Vec<Polynomial>> = eqs.iter().map(|q| q.gradient()).collect();
    let mut x = start.to_vec();
    for _ in 0..60 {
        let f = DVector::from_iterator(eqs.len(), eqs.iter().map(|q| q.eval(&x)));
        if f.norm() < 1e-15 {
            break;
        }
        let mut j = DMatrix::<f64>::zeros(eqs.len(), n);
        for (r, g) in grads.iter().enumerate() {
            for (c, gc) in g.iter().enumerate() {
                j[(r, c)] = gc.eval(&x);
            }
        }
        let step = j.svd(true, true).solve(&f, 1e-14).ok()?;
        let norm = step.norm();
        for i in 0..n {
            x[i] -= step[i];
        }
        if !x.iter().all(|v| v.is_finite()) {
            return None;
        }
        if norm < 1e-15 {
            break;
        }
    }
    Some(x)
}

/// Convenience accessor used by diagnostics: the Lie derivative of `Xh`
/// along `Z^s` and its second iterate at `p`.
pub fn sliding_fold_signs(z: &PiecewiseSystem, p: &[f64]) -> (f64, f64) {
    let zs = sliding_field(z);
    (zs.lie_eval(z.xh(1), p), zs.lie2_eval(z.xh(1), p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{DomainBox, SmoothField};

    fn sys(n: usize, x: &str, y: &str, h: &str, half: f64) -> PiecewiseSystem {
        PiecewiseSystem::new(
            SmoothField::parse(x, n).unwrap(),
            SmoothField::parse(y, n).unwrap(),
            Polynomial::parse(h, n).unwrap(),
            DomainBox::new(vec![-half; n], vec![half; n]),
        )
        .unwrap()
    }

    #[test]
    fn constant_sliding_field_is_zero() {
        let z = sys(3, "0, 0, -1", "0, 0, 1", "x3", 1.0);
        let zs = sliding_field(&z);
        assert!(zs.numerators.iter().all(Polynomial::is_zero));
        assert_eq!(zs.denominator, Polynomial::constant(3, 2.0));
        assert_eq!(eval_sliding(&z, &[0.2, 0.3, 0.0]).unwrap(), vec![0.0; 3]);
        assert!(zs.lie_numerator(&z.h).is_zero());
    }

    #[test]
    fn relay_sliding_moves_toward_fold() {
        let z = sys(2, "0.2*x1 - x2 + 1, x1 + 0.2*x2 - 0.2", "0, 1", "x2", 4.0);
        let v = eval_sliding(&z, &[0.0, 0.0]).unwrap();
        // (0.2*0 + 1) / (1 - (0 - 0.2)) = 1 / 1.2
        assert!((v[0] - 1.0 / 1.2).abs() < 1e-15);
        assert_eq!(v[1], 0.0);
        let pe = pseudo_equilibria(&z, &z.domain);
        assert!(pe.is_empty());
    }

    #[test]
    fn boundary_extension() {
        let a1 = sys(3, "1, 0, x1", "0, 0, 1", "x3", 1.0);
        assert_eq!(eval_sliding(&a1, &[0.0; 3]).unwrap(), vec![1.0, 0.0, 0.0]);
        let b2 = sys(3, "1, 0, x2 - x1^2", "0, 1, x2", "x3", 1.0);
        assert_eq!(eval_sliding(&b2, &[0.0; 3]).unwrap(), vec![0.0; 3]);
        let flat = sys(3, "0, 0, -1", "0, 0, -1 + 1e-13", "x3", 1.0);
        assert!(matches!(
            eval_sliding(&flat, &[0.0; 3]),
            Err(SlidingError::DenominatorVanishes { .. })
        ));
    }

    #[test]
    fn escaping_field() {
        let z = sys(3, "0, 0, 1", "0, 0, -1", "x3", 1.0);
        assert_eq!(eval_escaping(&z, &[0.0; 3]).unwrap(), vec![0.0; 3]);
        // Xh = 1 + x1, Yh = -1; at (1, 0): (Yh X - Xh Y)/(Yh - Xh) = (1/3, 0).
        let e = sys(2, "1, 1 + x1", "0, -1", "x2", 2.0);
        let v = eval_escaping(&e, &[1.0, 0.0]).unwrap();
        assert!((v[0] - 1.0 / 3.0).abs() < 1e-15 && v[1].abs() < 1e-15);
    }

    #[test]
    fn escaping_reversal_is_bitwise() {
        let z = sys(2, "1 + x2^2, 1 + x1", "0.3*x1, -1 - x1^2", "x2 - 0.1*x1^2", 2.0);
        let r = z.reversed();
        for k in 0..50 {
            let x1 = -1.0 + 0.04 * k as f64;
            let p = [x1, 0.1 * x1 * x1];
            let a = eval_escaping(&z, &p).unwrap();
            let b: Vec<f64> = eval_sliding(&r, &p).unwrap().into_iter().map(|v| -v).collect();
            assert_eq!(
                a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
        }
    }

    #[test]
    fn sliding_signs_at_folds_and_cusps() {
        let vis = sys(3, "1, 0, x1", "0, 0, 1", "x3", 1.0);
        assert!(sliding_fold_signs(&vis, &[0.0; 3]).0 > 0.0);
        let inv = sys(3, "1, 0, -x1", "0, 0, 1", "x3", 1.0);
        assert!(sliding_fold_signs(&inv, &[0.0; 3]).0 < 0.0);
        // Cusps: first derivative vanishes, the second decides.
        let (d1, d2) = sliding_fold_signs(&sys(3, "1, 0, x2 - x1^2", "0, 0, 1", "x3", 1.0), &[0.0; 3]);
        assert_eq!(d1, 0.0);
        assert_eq!(d2, -2.0);
        let (d1, d2) = sliding_fold_signs(&sys(3, "1, 0, x2 + x1^2", "0, 0, 1", "x3", 1.0), &[0.0; 3]);
        assert_eq!(d1, 0.0);
        assert_eq!(d2, 2.0);
    }

    #[test]
    fn continuity_across_sliding_boundary() {
        let z = sys(3, "1, 0, x1", "0, 0, 1", "x3", 1.0);
        let target = z.x.eval_vec(&[0.0; 3]);
        for k in 1..=8 {
            let p = [-(10f64.powi(-k)), 0.0, 0.0];
            assert!(matches!(z.classify_point(&p), RegionLabel::Sliding));
            let v = eval_sliding(&z, &p).unwrap();
            let err = v.iter().zip(&target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if k >= 6 {
                assert!(err < 1e-6, "k={k} err={err}");
            }
        }
    }

    #[test]
    fn isolated_pseudo_equilibrium() {
        // Z^s = (x1 - 0.3, 0)/2 on x2 = 0 with Xh = -1, Yh = 1.
        let z = sys(2, "x1 - 0.3, -1", "x1 - 0.3, 1", "x2", 1.0);
        let pe = pseudo_equilibria(&z, &z.domain);
        assert_eq!(pe.len(), 1);
        assert!((pe[0].location[0] - 0.3).abs() < 1e-10);
        assert!(pe[0].residual < 1e-8);
        assert_eq!(pe[0].kind, PseudoEquilibriumKind::InteriorOfSigmaS);
    }

    #[test]
    fn constant_sliding_has_representative() {
        let z = sys(3, "0, 0, -1", "0, 0, 1", "x3", 1.0);
        let pe = pseudo_equilibria(&z, &z.domain);
        assert!(!pe.is_empty());
        assert_eq!(pe[0].residual, 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_poly(n: usize) -> impl Strategy<Value = Polynomial> {
            proptest::collection::vec((-5i32..=5, 0u16..=2, 0u16..=2, 0u16..=1), 1..5).prop_map(
                move |ts| {
                    let terms: Vec<(f64, Vec<u16>)> = ts
                        .into_iter()
                        .map(|(c, a, b, d)| (c as f64, vec![a, b, if n == 3 { d } else { 0 }][..n].to_vec()))
                        .collect();
                    let refs: Vec<(f64, &[u16])> = terms.iter().map(|(c, e)| (*c, e.as_slice())).collect();
                    Polynomial::from_terms(n, &refs)
                },
            )
        }

        fn arb_system() -> impl Strategy<Value = PiecewiseSystem> {
            (2usize..=3).prop_flat_map(|n| {
                (
                    proptest::collection::vec(arb_poly(n), n),
                    proptest::collection::vec(arb_poly(n), n),
                    arb_poly(n),
                )
                    .prop_map(move |(x, y, h)| {
                        PiecewiseSystem::new(
                            SmoothField::new(x).unwrap(),
                            SmoothField::new(y).unwrap(),
                            h,
                            DomainBox::new(vec![-1.0; n], vec![1.0; n]),
                        )
                        .unwrap()
                    })
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(100))]
            #[test]
            fn sliding_field_is_tangent_to_sigma(z in arb_system()) {
                let zs = sliding_field(&z);
                prop_assert!(zs.lie_numerator(&z.h).is_zero());
            }
        }
    }
}
