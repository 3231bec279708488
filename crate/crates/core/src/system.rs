//! Piecewise-smooth systems `Z = (X, Y, h)`, Lie derivatives and the
//! pointwise classification of the switching manifold.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::{PolyError, Polynomial};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SystemError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unsupported dimension {0}; only n = 2 and n = 3 are handled")]
    BadDimension(usize),
    #[error("Lie derivative order {0} out of range 1..=4")]
    OrderOutOfRange(usize),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// Numerical thresholds shared by every stage of the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Tolerances {
    pub eps_sigma: f64,
    pub eps_tan: f64,
    pub eps_reg: f64,
    pub rank_floor: f64,
    pub eps_denominator: f64,
    pub eps_pe: f64,
    pub eps_glue: f64,
    pub equilibrium: f64,
    pub rtol: f64,
    pub atol: f64,
    pub max_switches: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            eps_sigma: 1e-9,
            eps_tan: 1e-9,
            eps_reg: 1e-6,
            rank_floor: 1e-8,
            eps_denominator: 1e-12,
            eps_pe: 1e-8,
            eps_glue: 1e-7,
            equilibrium: 1e-10,
            rtol: 1e-9,
            atol: 1e-12,
            max_switches: 10_000,
        }
    }
}

/// Axis-aligned box `[lo_i, hi_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl DomainBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        DomainBox { lo, hi }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(a, b)| !(a < b))
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(x, (a, b))| *x >= *a && *x <= *b)
    }

    pub fn extent(&self, i: usize) -> f64 {
        self.hi[i] - self.lo[i]
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }
}

/// Which smooth regime drives an arc.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FieldId {
    X,
    Y,
    Zs,
    /// A single smooth (e.g. regularized) field with no switching.
    Smooth,
}

impl FieldId {
    pub fn label(&self) -> &'static str {
        match self {
            FieldId::X => "X",
            FieldId::Y => "Y",
            FieldId::Zs => "Zs",
            FieldId::Smooth => "S",
        }
    }
}

/// Polynomial vector field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmoothField {
    components: Vec<Polynomial>,
}

impl SmoothField {
    pub fn new(components: Vec<Polynomial>) -> Result<Self, SystemError> {
        let n = components.len();
        if !(2..=3).contains(&n) {
            return Err(SystemError::BadDimension(n));
        }
        for c in &components {
            if c.dim() != n {
                return Err(SystemError::DimensionMismatch {
                    expected: n,
                    found: c.dim(),
                });
            }
        }
        Ok(SmoothField { components })
    }

    /// Parses a comma-separated component list such as `"1, 0, x1"`.
    pub fn parse(text: &str, dim: usize) -> Result<Self, SystemError> {
        let parts = crate::poly::split_components(text);
        if parts.len() != dim {
            return Err(SystemError::DimensionMismatch {
                expected: dim,
                found: parts.len(),
            });
        }
        let mut comps = Vec::with_capacity(dim);
        for (offset, s) in parts {
            comps.push(Polynomial::parse(s, dim).map_err(|e| shift_column(e, offset))?);
        }
        Self::new(comps)
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Polynomial] {
        &self.components
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(Polynomial::is_zero)
    }

    pub fn neg(&self) -> SmoothField {
        SmoothField {
            components: self.components.iter().map(Polynomial::neg).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> SmoothField {
        SmoothField {
            components: self.components.iter().map(|p| p.scale(c)).collect(),
        }
    }

    pub fn eval(&self, p: &[f64], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c.eval(p);
        }
    }

    pub fn eval_vec(&self, p: &[f64]) -> Vec<f64> {
        self.components.iter().map(|c| c.eval(p)).collect()
    }
}

impl std::fmt::Display for SmoothField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.components.iter().map(|c| c.to_string()).collect();
        write!(f, "{}", parts.join(", "))
    }
}

fn shift_column(e: PolyError, offset: usize) -> PolyError {
    match e {
        PolyError::Parse { column, message } => PolyError::Parse {
            column: column + offset,
            message,
        },
        PolyError::UnknownVariable { name, column, dim } => PolyError::UnknownVariable {
            name,
            column: column + offset,
            dim,
        },
        other => other,
    }
}

/// `Σ f_i ∂g/∂x_i`, computed exactly.
pub fn lie_derivative(f: &SmoothField, g: &Polynomial) -> Result<Polynomial, SystemError> {
    if f.dim() != g.dim() {
        return Err(SystemError::DimensionMismatch {
            expected: f.dim(),
            found: g.dim(),
        });
    }
    let mut acc = Polynomial::zero(g.dim());
    for (i, fi) in f.components().iter().enumerate() {
        let d = g.derivative(i);
        if d.is_zero() || fi.is_zero() {
            continue;
        }
        acc = &acc + &(fi * &d);
    }
    Ok(acc)
}

/// `k`-fold iterated Lie derivative, `1 <= k <= 4`.
pub fn lie_derivative_k(
    f: &SmoothField,
    g: &Polynomial,
    k: usize,
) -> Result<Polynomial, SystemError> {
    if !(1..=4).contains(&k) {
        return Err(SystemError::OrderOutOfRange(k));
    }
    let mut acc = g.clone();
    for _ in 0..k {
        acc = lie_derivative(f, &acc)?;
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Visibility {
    Visible,
    Invisible,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TangencyCase {
    A1,
    A2,
    A3,
    A4,
    B1,
    B2,
    Unsupported,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TangencyInfo {
    pub tangent_x: bool,
    pub tangent_y: bool,
    /// 0 = not tangent, 2 = fold, 3 = cusp, 4 = degenerate (order above 3
    /// or a cusp failing the independence test).
    pub order_x: u8,
    pub order_y: u8,
    pub visibility_x: Visibility,
    pub visibility_y: Visibility,
    pub case: TangencyCase,
    /// Set for B2, whose fold-curve tangency test is numerical.
    pub heuristic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RegionLabel {
    InteriorPlus,
    InteriorMinus,
    CrossingPlus,
    CrossingMinus,
    Sliding,
    Escaping,
    Tangent(TangencyInfo),
}

/// The triple `(X, Y, h)` on a box, with its first three Lie derivatives
/// of `h` cached.
#[derive(Debug, Clone)]
pub struct PiecewiseSystem {
    pub x: SmoothField,
    pub y: SmoothField,
    pub h: Polynomial,
    pub domain: DomainBox,
    pub tol: Tolerances,
    grad_h: Vec<Polynomial>,
    xh: [Polynomial; 3],
    yh: [Polynomial; 3],
}

impl PiecewiseSystem {
    pub fn new(
        x: SmoothField,
        y: SmoothField,
        h: Polynomial,
        domain: DomainBox,
    ) -> Result<Self, SystemError> {
        let n = h.dim();
        for d in [x.dim(), y.dim(), domain.dim()] {
            if d != n {
                return Err(SystemError::DimensionMismatch {
                    expected: n,
                    found: d,
                });
            }
        }
        let lie3 = |f: &SmoothField| -> Result<[Polynomial; 3], SystemError> {
            let a = lie_derivative(f, &h)?;
            let b = lie_derivative(f, &a)?;
            let c = lie_derivative(f, &b)?;
            Ok([a, b, c])
        };
        let xh = lie3(&x)?;
        let yh = lie3(&y)?;
        Ok(PiecewiseSystem {
            grad_h: h.gradient(),
            x,
            y,
            h,
            domain,
            tol: Tolerances::default(),
            xh,
            yh,
        })
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self
    }

    /// The system `-Z = (-X, -Y, h)`.
    pub fn reversed(&self) -> PiecewiseSystem {
        PiecewiseSystem::new(self.x.neg(), self.y.neg(), self.h.clone(), self.domain.clone())
            .expect("dimensions already validated")
            .with_tolerances(self.tol)
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    pub fn field(&self, id: FieldId) -> Option<&SmoothField> {
        match id {
            FieldId::X => Some(&self.x),
            FieldId::Y => Some(&self.y),
            _ => None,
        }
    }

    /// `X^k h` for `k = 1..=3`.
    pub fn xh(&self, k: usize) -> &Polynomial {
        &self.xh[k - 1]
    }

    pub fn yh(&self, k: usize) -> &Polynomial {
        &self.yh[k - 1]
    }

    pub fn grad_h(&self) -> &[Polynomial] {
        &self.grad_h
    }

    pub fn eval_h(&self, p: &[f64]) -> f64 {
        self.h.eval(p)
    }

    pub fn eval_grad_h(&self, p: &[f64], out: &mut [f64]) {
        for (o, g) in out.iter_mut().zip(&self.grad_h) {
            *o = g.eval(p);
        }
    }

    pub fn eval_xh(&self, p: &[f64]) -> f64 {
        self.xh[0].eval(p)
    }

    pub fn eval_yh(&self, p: &[f64]) -> f64 {
        self.yh[0].eval(p)
    }

    pub fn classify_point(&self, p: &[f64]) -> RegionLabel {
        let hv = self.h.eval(p);
        if hv.abs() > self.tol.eps_sigma {
            return if hv > 0.0 {
                RegionLabel::InteriorPlus
            } else {
                RegionLabel::InteriorMinus
            };
        }
        let a = self.eval_xh(p);
        let b = self.eval_yh(p);
        let et = self.tol.eps_tan;
        if a.abs() <= et || b.abs() <= et {
            return RegionLabel::Tangent(self.classify_tangency(p));
        }
        match (a > 0.0, b > 0.0) {
            (true, true) => RegionLabel::CrossingPlus,
            (false, false) => RegionLabel::CrossingMinus,
            (false, true) => RegionLabel::Sliding,
            (true, false) => RegionLabel::Escaping,
        }
    }

    /// Order of contact of `X` (or `Y`) with `Σ` at `p`: 0, 2, 3, or 4 for
    /// anything more degenerate.
    fn contact_order(&self, lie: &[Polynomial; 3], p: &[f64]) -> u8 {
        let et = self.tol.eps_tan;
        if lie[0].eval(p).abs() > et {
            return 0;
        }
        if lie[1].eval(p).abs() > et {
            return 2;
        }
        if lie[2].eval(p).abs() > et && self.cusp_rank_ok(lie, p) {
            return 3;
        }
        4
    }

    /// Rank-3 test of `{Dh, D(Fh), D(F²h)}` via the smallest singular value.
    fn cusp_rank_ok(&self, lie: &[Polynomial; 3], p: &[f64]) -> bool {
        let n = self.dim();
        if n < 3 {
            return false;
        }
        let mut m = DMatrix::<f64>::zeros(3, n);
        let rows = [&self.h, &lie[0], &lie[1]];
        for (r, poly) in rows.iter().enumerate() {
            let mut g = vec![0.0; n];
            poly.eval_gradient(p, &mut g);
            for (c, v) in g.into_iter().enumerate() {
                m[(r, c)] = v;
            }
        }
        let sv = m.singular_values();
        sv.iter().cloned().fold(f64::INFINITY, f64::min) > self.tol.rank_floor
    }

    pub fn classify_tangency(&self, p: &[f64]) -> TangencyInfo {
        let ox = self.contact_order(&self.xh, p);
        let oy = self.contact_order(&self.yh, p);
        let vis = |order: u8, lie: &[Polynomial; 3], sign: f64| -> Visibility {
            match order {
                2 | 3 => {
                    if sign * lie[order as usize - 1].eval(p) > 0.0 {
                        Visibility::Visible
                    } else {
                        Visibility::Invisible
                    }
                }
                _ => Visibility::None,
            }
        };
        let vx = vis(ox, &self.xh, 1.0);
        let vy = vis(oy, &self.yh, -1.0);
        let mut info = TangencyInfo {
            tangent_x: ox != 0,
            tangent_y: oy != 0,
            order_x: ox,
            order_y: oy,
            visibility_x: vx,
            visibility_y: vy,
            case: TangencyCase::Unsupported,
            heuristic: false,
        };
        let single = |order: u8, v: Visibility| match (order, v) {
            (2, Visibility::Visible) => TangencyCase::A1,
            (2, Visibility::Invisible) => TangencyCase::A2,
            (3, Visibility::Invisible) => TangencyCase::A3,
            (3, Visibility::Visible) => TangencyCase::A4,
            _ => TangencyCase::Unsupported,
        };
        info.case = match (ox != 0, oy != 0) {
            (true, false) => {
                if self.eval_yh(p) > 0.0 {
                    single(ox, vx)
                } else {
                    TangencyCase::Unsupported
                }
            }
            (false, true) => {
                if self.eval_xh(p) < 0.0 {
                    single(oy, vy)
                } else {
                    TangencyCase::Unsupported
                }
            }
            (true, true) => {
                use Visibility::*;
                match (ox, vx, oy, vy) {
                    (2, Visible, 2, Invisible) | (2, Invisible, 2, Visible) => TangencyCase::B1,
                    (3, Invisible, 2, Invisible) | (2, Invisible, 3, Invisible)
                        if self.fold_curves_tangent(p) =>
                    {
                        info.heuristic = true;
                        TangencyCase::B2
                    }
                    _ => TangencyCase::Unsupported,
                }
            }
            (false, false) => TangencyCase::Unsupported,
        };
        info
    }

    /// Numerical tangency of the fold curves `S_X = {h = Xh = 0}` and
    /// `S_Y = {h = Yh = 0}` at `p` (n = 3 only): angle below 1e-4.
    fn fold_curves_tangent(&self, p: &[f64]) -> bool {
        if self.dim() != 3 {
            return false;
        }
        let grad = |q: &Polynomial| {
            let mut g = [0.0; 3];
            q.eval_gradient(p, &mut g);
            g
        };
        let cross = |a: [f64; 3], b: [f64; 3]| {
            [
                a[1] * b[2] - a[2] * b[1],
                a[2] * b[0] - a[0] * b[2],
                a[0] * b[1] - a[1] * b[0],
            ]
        };
        let norm = |v: [f64; 3]| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let gh = grad(&self.h);
        let tx = cross(gh, grad(&self.xh[0]));
        let ty = cross(gh, grad(&self.yh[0]));
        let (nx, ny) = (norm(tx), norm(ty));
        if nx < 1e-14 || ny < 1e-14 {
            return false;
        }
        let s = norm(cross(tx, ty)) / (nx * ny);
        s.asin() < 1e-4
    }

    /// Samples points of `Σ ∩ domain` on a lattice with `per_axis` nodes
    /// per coordinate: sign changes of `h` along lattice edges are bisected,
    /// and discrete local minima of `|h|` are polished by Newton steps.
    pub fn sample_sigma(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let n = self.dim();
        let per_axis = per_axis.max(2);
        let dom = &self.domain;
        let node = |idx: &[usize]| -> Vec<f64> {
            (0..n)
                .map(|i| dom.lo[i] + dom.extent(i) * idx[i] as f64 / (per_axis - 1) as f64)
                .collect()
        };
        let total = per_axis.pow(n as u32);
        let unravel = |mut k: usize| -> Vec<usize> {
            let mut idx = vec![0; n];
            for slot in idx.iter_mut() {
                *slot = k % per_axis;
                k /= per_axis;
            }
            idx
        };
        let values: Vec<f64> = (0..total).map(|k| self.h.eval(&node(&unravel(k)))).collect();
        let mut out = Vec::new();
        for k in 0..total {
            let idx = unravel(k);
            let p = node(&idx);
            let hv = values[k];
            if hv.abs() <= self.tol.eps_sigma {
                out.push(p.clone());
            }
            let mut is_min = hv.abs() > self.tol.eps_sigma;
            let mut stride = 1;
            for i in 0..n {
                for dir in [-1i64, 1] {
                    let j = idx[i] as i64 + dir;
                    if j < 0 || j >= per_axis as i64 {
                        continue;
                    }
                    let nb = (k as i64 + dir * stride as i64) as usize;
                    if values[nb].abs() < hv.abs() {
                        is_min = false;
                    }
                    if dir == 1 && hv * values[nb] < 0.0 {
                        out.push(self.bisect_edge(&p, &node(&unravel(nb))));
                    }
                }
                stride *= per_axis;
            }
            if is_min {
                if let Some(q) = self.newton_to_sigma(&p, 60) {
                    out.push(q);
                }
            }
        }
        out
    }

    fn bisect_edge(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut lo = 0.0;
        let mut hi = 1.0;
        let ha = self.h.eval(a);
        let at = |s: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + s * (y - x)).collect() };
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            let hm = self.h.eval(&at(mid));
            if hm == 0.0 {
                return at(mid);
            }
            if (hm > 0.0) == (ha > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        at(0.5 * (lo + hi))
    }

    /// Gauss-Newton iteration `p ← p − h ∇h / |∇h|²`; returns a point with
    /// `|h| ≤ eps_sigma` inside the domain, if reached.
    pub fn newton_to_sigma(&self, p: &[f64], iters: usize) -> Option<Vec<f64>> {
        let n = self.dim();
        let mut q = p.to_vec();
        let mut g = vec![0.0; n];
        for _ in 0..iters {
            let hv = self.h.eval(&q);
            if hv.abs() <= self.tol.eps_sigma * 1e-3 {
                break;
            }
            self.eval_grad_h(&q, &mut g);
            let g2: f64 = g.iter().map(|v| v * v).sum();
            if g2 == 0.0 || !g2.is_finite() {
                return None;
            }
            for i in 0..n {
                q[i] -= hv * g[i] / g2;
            }
        }
        if self.h.eval(&q).abs() <= self.tol.eps_sigma && self.domain.contains(&q) {
            Some(q)
        } else {
            None
        }
    }

    pub fn validate(&self) -> ValidationReport {
        self.validate_with(if self.dim() == 2 { 201 } else { 31 })
    }

    pub fn validate_with(&self, per_axis: usize) -> ValidationReport {
        let mut report = ValidationReport::default();
        if self.domain.is_empty() {
            report.degenerate.push("empty domain box".into());
        }
        if self.x.is_zero() {
            report.degenerate.push("field X is identically zero".into());
        }
        if self.y.is_zero() {
            report.degenerate.push("field Y is identically zero".into());
        }
        if !report.degenerate.is_empty() {
            report.passed = false;
            return report;
        }
        let n = self.dim();
        let mut g = vec![0.0; n];
        for p in self.sample_sigma(per_axis) {
            report.sigma_samples += 1;
            self.eval_grad_h(&p, &mut g);
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm <= self.tol.eps_reg {
                if report.regular_value_violations.len() < 16 {
                    report.regular_value_violations.push(p);
                } else {
                    report.regular_value_violation_count += 1;
                }
                continue;
            }
            match self.classify_point(&p) {
                RegionLabel::Escaping => {
                    report.escaping_count += 1;
                    if report.escaping_points.len() < 16 {
                        report.escaping_points.push(p);
                    }
                }
                RegionLabel::Tangent(info) if info.case == TangencyCase::Unsupported => {
                    report.unsupported.push(UnsupportedTangency { point: p, info });
                }
                _ => {}
            }
        }
        report.regular_value_violation_count += report.regular_value_violations.len();
        report.passed = report.regular_value_violation_count == 0 && report.escaping_count == 0;
        report
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct UnsupportedTangency {
    pub point: Vec<f64>,
    pub info: TangencyInfo,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ValidationReport {
    pub passed: bool,
    pub sigma_samples: usize,
    pub regular_value_violations: Vec<Vec<f64>>,
    pub regular_value_violation_count: usize,
    pub escaping_points: Vec<Vec<f64>>,
    pub escaping_count: usize,
    pub unsupported: Vec<UnsupportedTangency>,
    pub degenerate: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(s: &str, n: usize) -> SmoothField {
        SmoothField::parse(s, n).unwrap()
    }

    fn sys(x: &str, y: &str, h: &str) -> PiecewiseSystem {
        PiecewiseSystem::new(
            field(x, 3),
            field(y, 3),
            Polynomial::parse(h, 3).unwrap(),
            DomainBox::new(vec![-1.0; 3], vec![1.0; 3]),
        )
        .unwrap()
    }

    #[test]
    fn lie_derivative_examples() {
        let x3 = Polynomial::parse("x3", 3).unwrap();
        let f = field("0, 0, -1", 3);
        assert_eq!(lie_derivative(&f, &x3).unwrap(), Polynomial::constant(3, -1.0));
        let cusp = field("1, 0, x2 + x1^2", 3);
        assert_eq!(
            lie_derivative(&cusp, &x3).unwrap(),
            Polynomial::parse("x2 + x1^2", 3).unwrap()
        );
        assert_eq!(
            lie_derivative_k(&cusp, &x3, 2).unwrap(),
            Polynomial::parse("2*x1", 3).unwrap()
        );
        assert_eq!(
            lie_derivative_k(&cusp, &x3, 3).unwrap(),
            Polynomial::constant(3, 2.0)
        );
        assert_eq!(
            lie_derivative_k(&cusp, &x3, 1).unwrap(),
            lie_derivative(&cusp, &x3).unwrap()
        );
        assert!(lie_derivative_k(&field("0,0,1", 3), &x3, 2).unwrap().is_zero());
        assert!(matches!(
            lie_derivative_k(&cusp, &x3, 5),
            Err(SystemError::OrderOutOfRange(5))
        ));
        let x1 = Polynomial::parse("x1", 2).unwrap();
        assert!(lie_derivative(&cusp, &x1).is_err());
    }

    #[test]
    fn point_classification() {
        let z = sys("0, 0, -1", "0, 0, 1", "x3");
        assert_eq!(z.classify_point(&[0.0, 0.0, 0.0]), RegionLabel::Sliding);
        assert_eq!(z.classify_point(&[0.0, 0.0, 0.5]), RegionLabel::InteriorPlus);
        assert_eq!(z.classify_point(&[0.0, 0.0, -0.5]), RegionLabel::InteriorMinus);
        let t = sys("0, 0, 1", "0, 0, 1", "x3");
        assert_eq!(t.classify_point(&[0.3, 0.1, 0.0]), RegionLabel::CrossingPlus);
        let d = sys("0, 0, -1", "0, 0, -1", "x3");
        assert_eq!(d.classify_point(&[0.3, 0.1, 0.0]), RegionLabel::CrossingMinus);
        let e = sys("0, 0, 1", "0, 0, -1", "x3");
        assert_eq!(e.classify_point(&[0.0, 0.0, 0.0]), RegionLabel::Escaping);
    }

    fn case_at_origin(x: &str, y: &str) -> TangencyInfo {
        match sys(x, y, "x3").classify_point(&[0.0; 3]) {
            RegionLabel::Tangent(info) => info,
            other => panic!("expected tangency, got {other:?}"),
        }
    }

    #[test]
    fn tangency_table() {
        let a1 = case_at_origin("1, 0, x1", "0, 0, 1");
        assert_eq!((a1.order_x, a1.visibility_x, a1.case), (2, Visibility::Visible, TangencyCase::A1));
        let a2 = case_at_origin("1, 0, -x1", "0, 0, 1");
        assert_eq!((a2.visibility_x, a2.case), (Visibility::Invisible, TangencyCase::A2));
        let a4 = case_at_origin("1, 0, x2 + x1^2", "0, 0, 1");
        assert_eq!((a4.order_x, a4.visibility_x, a4.case), (3, Visibility::Visible, TangencyCase::A4));
        let a3 = case_at_origin("1, 0, x2 - x1^2", "0, 0, 1");
        assert_eq!((a3.order_x, a3.case), (3, TangencyCase::A3));
        let b1 = case_at_origin("1, 0, x1", "1, 1, 2*x1");
        assert_eq!(b1.case, TangencyCase::B1);
        assert_eq!(b1.visibility_y, Visibility::Invisible);
        // Y-side folds mirror the visibility convention.
        let ay = case_at_origin("0, 0, -1", "1, 0, -x1");
        assert_eq!((ay.tangent_y, ay.visibility_y, ay.case), (true, Visibility::Visible, TangencyCase::A1));
        // Both folds visible is outside the supported table.
        let vv = case_at_origin("1, 0, x1", "1, 0, -x1");
        assert_eq!(vv.case, TangencyCase::Unsupported);
        // A fold of X over an escaping neighbourhood.
        let esc = case_at_origin("1, 0, x1", "0, 0, -1");
        assert_eq!(esc.case, TangencyCase::Unsupported);
        // Degenerate order (X h = x1^3).
        let deg = case_at_origin("1, 0, x1^3", "0, 0, 1");
        assert_eq!((deg.order_x, deg.case), (4, TangencyCase::Unsupported));
    }

    #[test]
    fn b2_double_tangency() {
        // X: invisible cusp (X h = x2 - x1^2), Y: invisible fold with
        // fold curve {x3 = 0, x2 = 0} tangent to S_X at the origin.
        let b2 = case_at_origin("1, 0, x2 - x1^2", "0, 1, x2");
        assert_eq!((b2.order_x, b2.order_y), (3, 2));
        assert_eq!(b2.visibility_y, Visibility::Invisible);
        assert_eq!(b2.case, TangencyCase::B2);
        assert!(b2.heuristic);
    }

    #[test]
    fn planar_cusp_is_unsupported() {
        let z = PiecewiseSystem::new(
            field("1, x1^2", 2),
            field("0, 1", 2),
            Polynomial::parse("x2", 2).unwrap(),
            DomainBox::new(vec![-1.0; 2], vec![1.0; 2]),
        )
        .unwrap();
        match z.classify_point(&[0.0, 0.0]) {
            RegionLabel::Tangent(info) => assert_eq!(info.case, TangencyCase::Unsupported),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn validation_reports() {
        assert!(sys("0, 0, -1", "0, 0, 1", "x3").validate().passed);
        let esc = sys("0, 0, 1", "0, 0, -1", "x3").validate();
        assert!(!esc.passed);
        assert!(esc.escaping_count > 0);
        let sq = sys("0, 0, -1", "0, 0, 1", "x3^2").validate();
        assert!(!sq.passed);
        assert!(sq.regular_value_violation_count > 0);
        let z = sys("0, 0, 0", "0, 0, 1", "x3").validate();
        assert!(!z.passed && !z.degenerate.is_empty());
        let mut empty = sys("0, 0, -1", "0, 0, 1", "x3");
        empty.domain = DomainBox::new(vec![0.0; 3], vec![0.0, 1.0, 1.0]);
        assert!(!empty.validate().passed);
    }

    #[test]
    fn off_lattice_sigma_is_found() {
        // Σ = {x3 = x1^2 - 0.3} never passes through lattice nodes exactly.
        let z = sys("0, 0, -1", "0, 0, 1", "x3 - x1^2 + 0.3");
        let pts = z.sample_sigma(9);
        assert!(pts.len() > 20);
        for p in pts {
            assert!(z.eval_h(&p).abs() <= 1e-9);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn tangency_invariant_under_positive_rescaling(c in 0.01f64..100.0) {
                for (x, y) in [
                    ("1, 0, x1", "0, 0, 1"),
                    ("1, 0, -x1", "0, 0, 1"),
                    ("1, 0, x2 + x1^2", "0, 0, 1"),
                    ("1, 0, x1", "1, 1, 2*x1"),
                ] {
                    let base = sys(x, y, "x3");
                    let scaled = PiecewiseSystem::new(
                        base.x.scale(c), base.y.clone(), base.h.clone(), base.domain.clone(),
                    ).unwrap();
                    let a = base.classify_tangency(&[0.0; 3]);
                    let b = scaled.classify_tangency(&[0.0; 3]);
                    prop_assert_eq!(a.order_x, b.order_x);
                    prop_assert_eq!(a.visibility_x, b.visibility_x);
                    prop_assert_eq!(a.case, b.case);
                }
            }
        }
    }
}
