//! Planar-disk sections, first-return maps and periodic orbits.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::semiflow::{Flow, SemiflowError, Trajectory, Truncation};
use crate::system::{DomainBox, FieldId, PiecewiseSystem, RegionLabel, TangencyCase, Visibility};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PoincareError {
    #[error("no return to the section within {0} time units")]
    NoReturn(f64),
    #[error("trajectory left the neighbourhood at t = {time}")]
    LeftNeighborhood { time: f64 },
    #[error("point {0:?} is not on the section disk")]
    NotOnSection(Vec<f64>),
    #[error("fixed-point iteration did not converge: {0}")]
    NoConvergence(String),
    #[error("invalid section: {0}")]
    InvalidSection(String),
    #[error(transparent)]
    Flow(#[from] SemiflowError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CrossingSense {
    Positive,
    Negative,
    Both,
}

/// Disk `{p : ⟨p − anchor, normal⟩ = 0, |p − anchor| ≤ radius}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SectionSpec {
    pub anchor: Vec<f64>,
    pub normal: Vec<f64>,
    pub radius: f64,
    pub sense: CrossingSense,
    pub xi_window: f64,
}

impl SectionSpec {
    /// Normalizes `normal`; rejects zero normals and non-positive radii.
    pub fn new(
        anchor: Vec<f64>,
        normal: Vec<f64>,
        radius: f64,
        sense: CrossingSense,
        xi_window: f64,
    ) -> Result<Self, PoincareError> {
        if anchor.len() != normal.len() {
            return Err(PoincareError::InvalidSection("anchor/normal dimension mismatch".into()));
        }
        let norm = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(PoincareError::InvalidSection("zero normal".into()));
        }
        if !(radius > 0.0) {
            return Err(PoincareError::InvalidSection("radius must be positive".into()));
        }
        if !(xi_window > 0.0) {
            return Err(PoincareError::InvalidSection("xi window must be positive".into()));
        }
        Ok(SectionSpec {
            anchor,
            normal: normal.iter().map(|v| v / norm).collect(),
            radius,
            sense,
            xi_window,
        })
    }

    pub fn dim(&self) -> usize {
        self.anchor.len()
    }

    /// Signed distance to the section plane.
    pub fn value(&self, p: &[f64]) -> f64 {
        p.iter()
            .zip(&self.anchor)
            .zip(&self.normal)
            .map(|((x, a), n)| (x - a) * n)
            .sum()
    }

    pub fn distance_to_anchor(&self, p: &[f64]) -> f64 {
        p.iter()
            .zip(&self.anchor)
            .map(|(x, a)| (x - a) * (x - a))
            .sum::<f64>()
            .sqrt()
    }

    pub fn on_disk(&self, p: &[f64], tol: f64) -> bool {
        self.value(p).abs() <= tol && self.distance_to_anchor(p) <= self.radius + tol
    }

    fn project(&self, p: &mut [f64]) {
        let s = self.value(p);
        for (x, n) in p.iter_mut().zip(&self.normal) {
            *x -= s * n;
        }
    }

    /// Orthonormal basis of the section plane.
    pub fn basis(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for k in 0..n {
            let mut v = vec![0.0; n];
            v[k] = 1.0;
            for b in std::iter::once(&self.normal).chain(basis.iter()) {
                let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= d * y;
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-8 {
                basis.push(v.into_iter().map(|x| x / norm).collect());
            }
            if basis.len() == n - 1 {
                break;
            }
        }
        basis
    }

    pub fn to_coords(&self, p: &[f64]) -> Vec<f64> {
        self.basis()
            .iter()
            .map(|b| {
                p.iter()
                    .zip(&self.anchor)
                    .zip(b)
                    .map(|((x, a), e)| (x - a) * e)
                    .sum()
            })
            .collect()
    }

    pub fn from_coords(&self, u: &[f64]) -> Vec<f64> {
        let mut p = self.anchor.clone();
        for (c, b) in u.iter().zip(self.basis()) {
            for (x, e) in p.iter_mut().zip(&b) {
                *x += c * e;
            }
        }
        p
    }

    fn sense_ok(&self, before: f64, after: f64) -> bool {
        match self.sense {
            CrossingSense::Positive => before < 0.0 && after >= 0.0,
            CrossingSense::Negative => before > 0.0 && after <= 0.0,
            CrossingSense::Both => (before < 0.0 && after >= 0.0) || (before > 0.0 && after <= 0.0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReturnRecord {
    pub start: Vec<f64>,
    pub image: Vec<f64>,
    pub return_time: f64,
    pub trajectory: Trajectory,
}

/// Smallest admissible return time.
pub const MIN_RETURN_TIME: f64 = 1e-9;
const SCAN_PER_STEP: usize = 8;

/// Section crossings of a trajectory after `t_min`, in time order.
pub fn section_crossings(traj: &Trajectory, spec: &SectionSpec, t_min: f64) -> Vec<(f64, Vec<f64>)> {
    let mut out = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    let mut times: Vec<f64> = Vec::new();
    for seg in &traj.segments {
        for st in &seg.steps {
            let t0 = st.t0.max(seg.start_time);
            let t1 = st.t1().min(seg.end_time);
            if t1 <= t0 {
                continue;
            }
            for k in 0..SCAN_PER_STEP {
                times.push(t0 + (t1 - t0) * k as f64 / SCAN_PER_STEP as f64);
            }
        }
    }
    times.push(traj.end_time());
    for &t in &times {
        if t < t_min {
            continue;
        }
        let Some(p) = traj.at(t) else { continue };
        let s = spec.value(&p);
        if let Some((tp, sp)) = prev {
            if t > tp && spec.sense_ok(sp, s) {
                let (tc, pc) = polish_crossing(traj, spec, tp, t, sp);
                out.push((tc, pc));
            }
        }
        prev = Some((t, s));
    }
    out
}

fn polish_crossing(
    traj: &Trajectory,
    spec: &SectionSpec,
    mut ta: f64,
    mut tb: f64,
    sa: f64,
) -> (f64, Vec<f64>) {
    for _ in 0..200 {
        if tb - ta <= 1e-13 * (1.0 + tb.abs()) {
            break;
        }
        let tm = 0.5 * (ta + tb);
        let sm = spec.value(&traj.at(tm).unwrap());
        if (sm < 0.0) == (sa < 0.0) && sm != 0.0 {
            ta = tm;
        } else {
            tb = tm;
        }
    }
    let mut p = traj.at(tb).unwrap();
    spec.project(&mut p);
    (tb, p)
}

/// First return `Π_Ξ(x)` to the section.
pub fn return_map(
    flow: &dyn Flow,
    spec: &SectionSpec,
    x: &[f64],
    t_cap: f64,
) -> Result<ReturnRecord, PoincareError> {
    if !spec.on_disk(x, 1e-8) {
        return Err(PoincareError::NotOnSection(x.to_vec()));
    }
    let traj = flow.trajectory(x, t_cap)?;
    for (t, p) in section_crossings(&traj, spec, MIN_RETURN_TIME) {
        if spec.distance_to_anchor(&p) <= spec.radius {
            let mut trajectory = traj;
            truncate(&mut trajectory, t);
            return Ok(ReturnRecord {
                start: x.to_vec(),
                image: p,
                return_time: t,
                trajectory,
            });
        }
    }
    match traj.truncation {
        Truncation::DomainExit => Err(PoincareError::LeftNeighborhood {
            time: traj.end_time(),
        }),
        _ => Err(PoincareError::NoReturn(t_cap)),
    }
}

fn truncate(traj: &mut Trajectory, t: f64) {
    let keep = traj.segments.partition_point(|s| s.start_time < t).max(1);
    traj.segments.truncate(keep);
    traj.switch_points.truncate(keep);
    traj.cumulative_times.truncate(keep);
    traj.field_sequence.truncate(keep);
    if let Some(end) = traj.at(t) {
        if let Some(last) = traj.segments.last_mut() {
            last.end_time = t;
            last.end_point = end;
        }
        if let Some(c) = traj.cumulative_times.last_mut() {
            *c = t;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OrbitKind {
    #[serde(rename = "smooth")]
    Smooth,
    #[serde(rename = "polyI")]
    PolyI,
    #[serde(rename = "polyII")]
    PolyII,
    #[serde(rename = "polyIII")]
    PolyIII,
}

#[derive(Debug, Clone)]
pub struct PeriodicOrbit {
    pub base_point: Vec<f64>,
    pub period: f64,
    pub closure_error: f64,
    pub trajectory: Trajectory,
    pub iterations: usize,
}

/// Stops on a tiny residual, or on a small one that no longer improves
/// (the integrator's own error floor).
struct Convergence {
    best: f64,
    stalls: usize,
}

impl Default for Convergence {
    fn default() -> Self {
        Convergence { best: f64::INFINITY, stalls: 0 }
    }
}

impl Convergence {
    fn settled(&mut self, r: f64) -> bool {
        if r <= 1e-11 {
            return true;
        }
        if r < 0.5 * self.best {
            self.best = r;
            self.stalls = 0;
        } else {
            self.stalls += 1;
        }
        r < 1e-8 && self.stalls >= 2
    }
}

/// Fixed point of `Π_Ξ` by secant (planar) or Broyden iteration in
/// section coordinates. Any failed return aborts with `NoConvergence`.
pub fn find_periodic(
    flow: &dyn Flow,
    spec: &SectionSpec,
    seed: &[f64],
    max_iter: usize,
    t_cap: f64,
) -> Result<PeriodicOrbit, PoincareError> {
    let m = spec.dim() - 1;
    let lift = |u: &[f64]| spec.from_coords(u);
    let residual = |u: &[f64]| -> Result<Vec<f64>, PoincareError> {
        let x = lift(u);
        if spec.distance_to_anchor(&x) > spec.radius {
            return Err(PoincareError::NoConvergence(format!(
                "iterate {x:?} left the section disk"
            )));
        }
        let rec = return_map(flow, spec, &x, t_cap)
            .map_err(|e| PoincareError::NoConvergence(format!("return failed at {x:?}: {e}")))?;
        Ok(spec.to_coords(&rec.image).iter().zip(u).map(|(a, b)| a - b).collect())
    };
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut u = spec.to_coords(seed);
    let mut f = residual(&u)?;
    let delta = 1e-4 * spec.radius;
    let mut iterations = 0;
    let mut tracker = Convergence::default();
    if m == 1 {
        let mut u_prev = vec![u[0] + delta];
        let mut f_prev = residual(&u_prev)?;
        while !tracker.settled(norm(&f)) {
            iterations += 1;
            if iterations > max_iter {
                return Err(PoincareError::NoConvergence(format!(
                    "{max_iter} iterations, residual {:e}",
                    norm(&f)
                )));
            }
            let du = u[0] - u_prev[0];
            let slope = (f[0] - f_prev[0]) / du;
            // Near-neutral returns make the secant step meaningless.
            let next = if slope.abs() > 1e-6 {
                let step = (f[0] / slope).clamp(-0.25 * spec.radius, 0.25 * spec.radius);
                u[0] - step
            } else {
                u[0] + f[0]
            };
            if (next - u[0]).abs() < 1e-14 * (1.0 + u[0].abs()) {
                break;
            }
            u_prev = std::mem::replace(&mut u, vec![next]);
            f_prev = std::mem::replace(&mut f, residual(&u)?);
        }
    } else {
        // Broyden with a finite-difference initial Jacobian.
        let mut jac = DMatrix::<f64>::zeros(m, m);
        for k in 0..m {
            let mut up = u.clone();
            up[k] += delta;
            let fp = residual(&up)?;
            for r in 0..m {
                jac[(r, k)] = (fp[r] - f[r]) / delta;
            }
        }
        while !tracker.settled(norm(&f)) {
            iterations += 1;
            if iterations > max_iter {
                return Err(PoincareError::NoConvergence(format!(
                    "{max_iter} iterations, residual {:e}",
                    norm(&f)
                )));
            }
            let fv = DVector::from_column_slice(&f);
            let step = jac
                .clone()
                .lu()
                .solve(&fv)
                .ok_or_else(|| PoincareError::NoConvergence("singular Jacobian".into()))?;
            let s: Vec<f64> = step.iter().map(|v| -v).collect();
            if norm(&s) < 1e-14 {
                break;
            }
            let u_new: Vec<f64> = u.iter().zip(&s).map(|(a, b)| a + b).collect();
            let f_new = residual(&u_new)?;
            let y = DVector::from_iterator(m, f_new.iter().zip(&f).map(|(a, b)| a - b));
            let sv = DVector::from_column_slice(&s);
            let ss = sv.dot(&sv);
            let upd = (y - &jac * &sv) * sv.transpose() / ss;
            jac += upd;
            u = u_new;
            f = f_new;
        }
    }

    let base_point = lift(&u);
    // Independent certificate run.
    let rec = return_map(flow, spec, &base_point, t_cap)
        .map_err(|e| PoincareError::NoConvergence(format!("certificate run failed: {e}")))?;
    let closure_error = norm(
        &rec.image
            .iter()
            .zip(&base_point)
            .map(|(a, b)| a - b)
            .collect::<Vec<_>>(),
    );
    if !(closure_error < 1e-6) {
        return Err(PoincareError::NoConvergence(format!(
            "closure error {closure_error:e} after {iterations} iterations"
        )));
    }
    Ok(PeriodicOrbit {
        base_point,
        period: rec.return_time,
        closure_error,
        trajectory: rec.trajectory,
        iterations,
    })
}

/// Finite-difference derivative of `Π_Ξ` in section coordinates at `x`
/// (spectral radius of the Jacobian when the section is 2-D).
pub fn return_map_derivative(
    flow: &dyn Flow,
    spec: &SectionSpec,
    x: &[f64],
    delta: f64,
    t_cap: f64,
) -> Result<f64, PoincareError> {
    let u = spec.to_coords(x);
    let m = u.len();
    let mut jac = DMatrix::<f64>::zeros(m, m);
    for k in 0..m {
        let mut up = u.clone();
        let mut um = u.clone();
        up[k] += delta;
        um[k] -= delta;
        let ip = spec.to_coords(&return_map(flow, spec, &spec.from_coords(&up), t_cap)?.image);
        let im = spec.to_coords(&return_map(flow, spec, &spec.from_coords(&um), t_cap)?.image);
        for r in 0..m {
            jac[(r, k)] = (ip[r] - im[r]) / (2.0 * delta);
        }
    }
    if m == 1 {
        return Ok(jac[(0, 0)]);
    }
    let ev = jac.complex_eigenvalues();
    Ok(ev.iter().map(|c| c.norm()).fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum ArcKind {
    Focal,
    Graphic,
    /// More than one internal fold between a fold and its landing.
    Multiple,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FoldCensus {
    pub crossings: usize,
    pub sliding_arcs: usize,
    pub visible_folds: usize,
    pub invisible_folds: usize,
    pub grazes: usize,
    pub escaping_incidences: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct OrbitClassification {
    pub kind: OrbitKind,
    pub hyperbolic: Option<bool>,
    pub eta_prime: Option<f64>,
    pub fold_census: FoldCensus,
    pub arc_kinds: Vec<ArcKind>,
}

/// Census of an orbit's incidences with `Σ` and the poly-trajectory kind.
/// `eta` supplies the derivative of the return map for kind I orbits.
pub fn classify_orbit(
    z: Option<&PiecewiseSystem>,
    orbit: &PeriodicOrbit,
    eta: impl FnOnce() -> Option<f64>,
) -> OrbitClassification {
    let traj = &orbit.trajectory;
    let mut census = FoldCensus::default();
    let fields: Vec<FieldId> = traj.segments.iter().map(|s| s.field).collect();
    let smooth_only = z.is_none()
        || fields.iter().all(|f| *f == FieldId::Smooth)
        || (traj.segments.len() <= 1
            && fields.first().is_some_and(|f| *f != FieldId::Zs)
            && traj.all_grazes().next().is_none());
    if smooth_only {
        return OrbitClassification {
            kind: OrbitKind::Smooth,
            hyperbolic: None,
            eta_prime: None,
            fold_census: census,
            arc_kinds: Vec::new(),
        };
    }
    let z = z.unwrap();
    census.sliding_arcs = fields.iter().filter(|f| **f == FieldId::Zs).count();
    census.grazes = traj.all_grazes().count();
    // Folds touched tangentially from inside an X/Y arc are visible folds.
    census.visible_folds += census.grazes;
    for k in 1..traj.segments.len() {
        let p = &traj.segments[k].start_point;
        match z.classify_point(p) {
            RegionLabel::CrossingPlus | RegionLabel::CrossingMinus => census.crossings += 1,
            RegionLabel::Escaping => census.escaping_incidences += 1,
            RegionLabel::Tangent(info) => {
                let vis = (info.tangent_x && info.visibility_x == Visibility::Visible)
                    || (info.tangent_y && info.visibility_y == Visibility::Visible);
                if vis && info.case != TangencyCase::Unsupported {
                    census.visible_folds += 1;
                } else {
                    census.invisible_folds += 1;
                }
            }
            _ => {}
        }
    }

    let mut arc_kinds = Vec::new();
    for (k, seg) in traj.segments.iter().enumerate() {
        if seg.field == FieldId::Zs {
            continue;
        }
        let from_fold = k > 0
            && matches!(
                z.classify_point(&seg.start_point),
                RegionLabel::Tangent(_)
            );
        if from_fold {
            arc_kinds.push(match seg.grazes.len() {
                0 => ArcKind::Focal,
                1 => ArcKind::Graphic,
                _ => ArcKind::Multiple,
            });
        }
    }
    // An orbit based on a fold (base point at the fold itself) starts its
    // arc there; count that arc too.
    if arc_kinds.is_empty() && census.visible_folds > 0 {
        if let Some(seg) = traj.segments.iter().find(|s| s.field != FieldId::Zs) {
            arc_kinds.push(match seg.grazes.len() {
                0 => ArcKind::Focal,
                1 => ArcKind::Graphic,
                _ => ArcKind::Multiple,
            });
        }
    }

    let kind = if fields.iter().all(|f| *f == FieldId::Zs) {
        OrbitKind::PolyII
    } else if census.visible_folds > 0 {
        OrbitKind::PolyIII
    } else {
        OrbitKind::PolyI
    };
    let (hyperbolic, eta_prime) = match kind {
        OrbitKind::PolyI => {
            let e = eta();
            (e.map(|v| (v - 1.0).abs() > 1e-4), e)
        }
        OrbitKind::PolyIII => {
            let no_escape = census.escaping_incidences == 0;
            let no_slide = census.sliding_arcs == 0;
            (Some(no_escape || no_slide), None)
        }
        _ => (None, None),
    };
    OrbitClassification {
        kind,
        hyperbolic,
        eta_prime,
        fold_census: census,
        arc_kinds,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SectionReport {
    pub passed: bool,
    pub transversality_violations: Vec<Vec<f64>>,
    pub uniqueness_violations: Vec<Vec<f64>>,
    pub intersects_region: bool,
    pub recurrence_violations: Vec<Vec<f64>>,
    pub seeds_checked: usize,
    pub min_transversality: f64,
}

/// A region `N` for section validation: a membership test plus a bounding
/// box used to draw seeds.
pub struct Region<'a> {
    pub contains: &'a (dyn Fn(&[f64]) -> bool + Sync),
    pub bounds: DomainBox,
}

fn halton(index: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let mut i = index;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Sampled check of the Poincaré-section conditions for `spec` on `N`.
pub fn validate_section(
    flow: &dyn Flow,
    region: &Region,
    spec: &SectionSpec,
    samples: usize,
    t_cap: f64,
) -> SectionReport {
    use rayon::prelude::*;
    let mut report = SectionReport {
        min_transversality: f64::INFINITY,
        ..Default::default()
    };
    let basis = spec.basis();
    let m = basis.len();
    let per = if m == 1 { 41 } else { 9 };
    let mut disk = Vec::new();
    let grid: Vec<Vec<f64>> = if m == 1 {
        (0..per).map(|k| vec![-1.0 + 2.0 * k as f64 / (per - 1) as f64]).collect()
    } else {
        (0..per * per)
            .map(|k| {
                vec![
                    -1.0 + 2.0 * (k % per) as f64 / (per - 1) as f64,
                    -1.0 + 2.0 * (k / per) as f64 / (per - 1) as f64,
                ]
            })
            .filter(|u| u.iter().map(|v| v * v).sum::<f64>() <= 1.0)
            .collect()
    };
    for u in grid {
        let c: Vec<f64> = u.iter().map(|v| v * spec.radius).collect();
        disk.push(spec.from_coords(&c));
    }
    let want = match spec.sense {
        CrossingSense::Positive => 1.0,
        CrossingSense::Negative => -1.0,
        CrossingSense::Both => 0.0,
    };
    for p in &disk {
        if !flow.domain().contains(p) {
            continue;
        }
        if (region.contains)(p) {
            report.intersects_region = true;
        }
        let Some(v) = flow.velocity(p) else {
            report.transversality_violations.push(p.clone());
            continue;
        };
        let speed = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let dot: f64 = v.iter().zip(&spec.normal).map(|(a, b)| a * b).sum();
        let tr = if speed > 0.0 { dot / speed } else { 0.0 };
        let signed = if want == 0.0 { tr.abs() } else { tr * want };
        report.min_transversality = report.min_transversality.min(signed);
        if signed <= 1e-6 {
            report.transversality_violations.push(p.clone());
            continue;
        }
        // A second crossing inside the window would break uniqueness.
        if let Ok(traj) = flow.trajectory(p, spec.xi_window) {
            let again = section_crossings(&traj, spec, MIN_RETURN_TIME)
                .into_iter()
                .any(|(_, q)| spec.distance_to_anchor(&q) <= spec.radius);
            if again {
                report.uniqueness_violations.push(p.clone());
            }
        }
    }

    let n = spec.dim();
    let bounds = &region.bounds;
    let mut seeds = Vec::new();
    let primes = [2, 3, 5];
    let mut k = 1;
    while seeds.len() < samples && k < samples * 1000 {
        let p: Vec<f64> = (0..n)
            .map(|i| bounds.lo[i] + (bounds.hi[i] - bounds.lo[i]) * halton(k, primes[i]))
            .collect();
        k += 1;
        if (region.contains)(&p) && flow.domain().contains(&p) {
            seeds.push(p);
        }
    }
    report.seeds_checked = seeds.len();
    let failures: Vec<Vec<f64>> = seeds
        .par_iter()
        .filter(|p| {
            let Ok(traj) = flow.trajectory(p, t_cap) else {
                return true;
            };
            !section_crossings(&traj, spec, 0.0)
                .into_iter()
                .any(|(_, q)| spec.distance_to_anchor(&q) <= spec.radius)
        })
        .cloned()
        .collect();
    report.recurrence_violations = failures;
    report.passed = report.transversality_violations.is_empty()
        && report.uniqueness_violations.is_empty()
        && report.intersects_region
        && report.recurrence_violations.is_empty()
        && report.seeds_checked > 0;
    report
}
