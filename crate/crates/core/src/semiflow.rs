//! The forward semiflow of a Filippov system, built by concatenating
//! X-, Y- and sliding arcs.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::integrate::{
    dense_at, integrate, ArcStop, DenseStep, EventSpec, Graze, IntegrateError, IntegrateOptions,
    VectorField,
};
use crate::poly::{Polynomial, MAX_DIM};
use crate::sliding::eval_sliding_into;
use crate::system::{
    DomainBox, FieldId, PiecewiseSystem, RegionLabel, SmoothField, TangencyCase, TangencyInfo,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SemiflowError {
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error("unsupported tangency at {point:?}: {info:?}")]
    UnsupportedTangency { point: Vec<f64>, info: TangencyInfo },
    #[error("point {point:?} lies in the escaping region")]
    EscapingPoint { point: Vec<f64> },
    #[error("more than {limit} switches (last point {point:?})")]
    MaxSwitches { limit: usize, point: Vec<f64> },
    #[error("no progress at {point:?}: repeated zero-length arcs")]
    Stalled { point: Vec<f64> },
    #[error("point {point:?} lies outside the domain")]
    OutsideDomain { point: Vec<f64> },
    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EventKind {
    TransversalHit,
    TangencyHit,
    SlidingBoundaryExit,
    DomainExit,
    NoExit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EventRecord {
    pub kind: EventKind,
    /// Arc duration up to the event; `f64::INFINITY` for `NoExit`.
    pub time: f64,
    pub location: Vec<f64>,
    pub case: Option<TangencyCase>,
}

#[derive(Debug, Clone)]
pub struct ArcSegment {
    pub field: FieldId,
    pub start_time: f64,
    pub end_time: f64,
    pub start_point: Vec<f64>,
    pub end_point: Vec<f64>,
    /// Continuous output in absolute time.
    pub steps: Vec<DenseStep>,
    pub terminal: EventRecord,
    /// Local minima of `±h` close to zero (visible grazes), absolute time.
    pub grazes: Vec<Graze>,
    projected: bool,
}

impl ArcSegment {
    pub fn duration(&self) -> f64 {
        self.end_time - self.start_time
    }

    /// `(t, point)` at every accepted step boundary.
    pub fn samples(&self) -> Vec<(f64, Vec<f64>)> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        out.push((self.start_time, self.start_point.clone()));
        for s in self.steps.iter().skip(1) {
            if s.t0 < self.end_time {
                out.push((s.t0, s.start().to_vec()));
            }
        }
        if self.end_time > self.start_time {
            out.push((self.end_time, self.end_point.clone()));
        }
        out
    }

    fn point_at(&self, t: f64, h: &dyn Fn(&mut [f64])) -> Vec<f64> {
        if t <= self.start_time {
            return self.start_point.clone();
        }
        if t >= self.end_time {
            return self.end_point.clone();
        }
        let n = self.start_point.len();
        let mut p = dense_at(&self.steps, t);
        if self.projected {
            h(&mut p[..n]);
        }
        p[..n].to_vec()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Truncation {
    TimeBudget,
    DomainExit,
    EquilibriumReached,
    NoExit,
}

/// A forward orbit `φ_Z(p, [0, T])` with its switching bookkeeping.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub initial_point: Vec<f64>,
    pub segments: Vec<ArcSegment>,
    pub switch_points: Vec<Vec<f64>>,
    pub cumulative_times: Vec<f64>,
    pub field_sequence: Vec<FieldId>,
    pub truncation: Truncation,
    sigma: Option<Polynomial>,
}

impl Trajectory {
    pub fn end_time(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.end_time)
    }

    pub fn end_point(&self) -> &[f64] {
        self.segments
            .last()
            .map_or(&self.initial_point, |s| &s.end_point)
    }

    /// `φ_Z(p, t)` for `0 ≤ t ≤ end_time()`; `None` beyond.
    pub fn at(&self, t: f64) -> Option<Vec<f64>> {
        if t <= 0.0 {
            return Some(self.initial_point.clone());
        }
        if t > self.end_time() {
            return None;
        }
        let k = self
            .segments
            .partition_point(|s| s.end_time < t)
            .min(self.segments.len() - 1);
        let proj = |p: &mut [f64]| {
            if let Some(h) = &self.sigma {
                project_onto_zero_set(h, p);
            }
        };
        Some(self.segments[k].point_at(t, &proj))
    }

    pub fn all_grazes(&self) -> impl Iterator<Item = &Graze> {
        self.segments.iter().flat_map(|s| s.grazes.iter())
    }

    /// One row per dense sample: `t,x1..xn,fieldId,segmentIndex`. Rows at
    /// switch points appear once per adjacent segment.
    pub fn to_csv(&self) -> String {
        let n = self.initial_point.len();
        let mut s = String::from("t");
        for i in 1..=n {
            let _ = write!(s, ",x{i}");
        }
        s.push_str(",fieldId,segmentIndex\n");
        for (k, seg) in self.segments.iter().enumerate() {
            for (t, p) in seg.samples() {
                let _ = write!(s, "{t:.16e}");
                for v in &p {
                    let _ = write!(s, ",{v:.16e}");
                }
                let _ = writeln!(s, ",{},{k}", seg.field.label());
            }
        }
        s
    }
}

/// One Newton step along `∇h` towards `{h = 0}`.
pub fn project_to_sigma(z: &PiecewiseSystem, p: &mut [f64]) {
    project_onto_zero_set(&z.h, p)
}

fn project_onto_zero_set(h: &Polynomial, p: &mut [f64]) {
    let n = h.dim();
    let mut g = [0.0; MAX_DIM];
    let hv = h.eval(p);
    h.eval_gradient(p, &mut g[..n]);
    let g2: f64 = g[..n].iter().map(|v| v * v).sum();
    if g2 > 0.0 {
        for i in 0..n {
            p[i] -= hv * g[i] / g2;
        }
    }
}

/// Which field drives the flow forward from `p`.
pub fn select_field(z: &PiecewiseSystem, p: &[f64]) -> Result<FieldId, SemiflowError> {
    Ok(match z.classify_point(p) {
        RegionLabel::InteriorPlus | RegionLabel::CrossingPlus => FieldId::X,
        RegionLabel::InteriorMinus | RegionLabel::CrossingMinus => FieldId::Y,
        RegionLabel::Sliding => FieldId::Zs,
        RegionLabel::Escaping => {
            return Err(SemiflowError::EscapingPoint { point: p.to_vec() })
        }
        RegionLabel::Tangent(info) => match info.case {
            TangencyCase::A1 | TangencyCase::A4 | TangencyCase::B1 => {
                use crate::system::Visibility::Visible;
                if info.tangent_x && info.visibility_x == Visible {
                    FieldId::X
                } else {
                    FieldId::Y
                }
            }
            TangencyCase::A2 | TangencyCase::A3 | TangencyCase::B2 => FieldId::Zs,
            TangencyCase::Unsupported => {
                return Err(SemiflowError::UnsupportedTangency {
                    point: p.to_vec(),
                    info,
                })
            }
        },
    })
}

struct PolyField<'a>(&'a SmoothField);

impl VectorField for PolyField<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn eval(&self, p: &[f64], out: &mut [f64]) -> Result<(), IntegrateError> {
        self.0.eval(p, out);
        Ok(())
    }
}

struct SlidingVectorField<'a>(&'a PiecewiseSystem);

impl VectorField for SlidingVectorField<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn eval(&self, p: &[f64], out: &mut [f64]) -> Result<(), IntegrateError> {
        eval_sliding_into(self.0, p, out).map_err(|e| IntegrateError::Field(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SemiflowOptions {
    pub record_grazes: bool,
    pub h_max: f64,
}

impl Default for SemiflowOptions {
    fn default() -> Self {
        SemiflowOptions {
            record_grazes: true,
            h_max: 0.2,
        }
    }
}

fn integrate_opts(z: &PiecewiseSystem, so: &SemiflowOptions) -> IntegrateOptions {
    IntegrateOptions {
        rtol: z.tol.rtol,
        atol: z.tol.atol,
        h_max: so.h_max,
        graze_tol: z.tol.eps_sigma,
        record_grazes: so.record_grazes,
        ..Default::default()
    }
}

/// Integrates one arc of `field` from `p` (arc-local time starting at
/// `t_start`) until it leaves its stratum, exits the domain, or exhausts
/// `budget`.
pub fn integrate_arc(
    z: &PiecewiseSystem,
    field: FieldId,
    p: &[f64],
    t_start: f64,
    budget: f64,
    so: &SemiflowOptions,
) -> Result<ArcSegment, SemiflowError> {
    let n = z.dim();
    let dom = &z.domain;
    let h_val = |q: &[f64]| z.eval_h(q);
    let neg_h = |q: &[f64]| -z.eval_h(q);
    let grad_h = |q: &[f64], o: &mut [f64]| z.eval_grad_h(q, o);
    let neg_grad_h = |q: &[f64], o: &mut [f64]| {
        z.eval_grad_h(q, o);
        o.iter_mut().for_each(|v| *v = -*v);
    };
    let neg_xh = |q: &[f64]| -z.eval_xh(q);
    let yh = |q: &[f64]| z.eval_yh(q);
    let faces: Vec<Box<dyn Fn(&[f64]) -> f64 + '_>> = (0..n)
        .flat_map(|i| {
            let lo = dom.lo[i];
            let hi = dom.hi[i];
            [
                Box::new(move |q: &[f64]| q[i] - lo) as Box<dyn Fn(&[f64]) -> f64>,
                Box::new(move |q: &[f64]| hi - q[i]) as Box<dyn Fn(&[f64]) -> f64>,
            ]
        })
        .collect();

    let mut events: Vec<EventSpec> = Vec::new();
    match field {
        FieldId::X => events.push(EventSpec {
            value: &h_val,
            gradient: Some(&grad_h),
            band: z.tol.eps_sigma,
        }),
        FieldId::Y => events.push(EventSpec {
            value: &neg_h,
            gradient: Some(&neg_grad_h),
            band: z.tol.eps_sigma,
        }),
        FieldId::Zs => {
            events.push(EventSpec {
                value: &neg_xh,
                gradient: None,
                band: z.tol.eps_tan,
            });
            events.push(EventSpec {
                value: &yh,
                gradient: None,
                band: z.tol.eps_tan,
            });
        }
        FieldId::Smooth => unreachable!("smooth arcs are integrated by the regularized flow"),
    }
    let n_sigma_events = events.len();
    for f in &faces {
        events.push(EventSpec {
            value: f.as_ref(),
            gradient: None,
            band: 0.0,
        });
    }

    let proj = |q: &mut [f64]| project_to_sigma(z, q);
    let opts = integrate_opts(z, so);
    let arc = match field {
        FieldId::X => integrate(&PolyField(&z.x), p, budget, &events, None, &opts)?,
        FieldId::Y => integrate(&PolyField(&z.y), p, budget, &events, None, &opts)?,
        _ => integrate(&SlidingVectorField(z), p, budget, &events, Some(&proj), &opts)?,
    };

    let terminal = match arc.stop {
        ArcStop::Budget => EventRecord {
            kind: EventKind::NoExit,
            time: f64::INFINITY,
            location: arc.end_point.clone(),
            case: None,
        },
        ArcStop::Event { event } if event >= n_sigma_events => EventRecord {
            kind: EventKind::DomainExit,
            time: arc.end_time,
            location: arc.end_point.clone(),
            case: None,
        },
        ArcStop::Event { .. } => {
            let loc = &arc.end_point;
            let case = match z.classify_point(loc) {
                RegionLabel::Tangent(info) => Some(info.case),
                _ => None,
            };
            let kind = match field {
                FieldId::Zs => EventKind::SlidingBoundaryExit,
                FieldId::X if z.eval_xh(loc).abs() <= z.tol.eps_tan => EventKind::TangencyHit,
                FieldId::Y if z.eval_yh(loc).abs() <= z.tol.eps_tan => EventKind::TangencyHit,
                _ => EventKind::TransversalHit,
            };
            EventRecord {
                kind,
                time: arc.end_time,
                location: loc.clone(),
                case,
            }
        }
    };

    let shift = |mut s: DenseStep| {
        s.t0 += t_start;
        s
    };
    Ok(ArcSegment {
        field,
        start_time: t_start,
        end_time: t_start + arc.end_time,
        start_point: p.to_vec(),
        end_point: arc.end_point.clone(),
        steps: arc.steps.into_iter().map(shift).collect(),
        terminal,
        grazes: arc
            .grazes
            .into_iter()
            .filter(|g| g.event < n_sigma_events)
            .map(|mut g| {
                g.t += t_start;
                g
            })
            .collect(),
        projected: field == FieldId::Zs,
    })
}

/// `t⁺` of `field` at `p`, searched up to `t_max`.
pub fn exit_time(
    z: &PiecewiseSystem,
    p: &[f64],
    field: FieldId,
    t_max: f64,
) -> Result<EventRecord, SemiflowError> {
    Ok(integrate_arc(z, field, p, 0.0, t_max, &SemiflowOptions::default())?.terminal)
}

fn field_norm(z: &PiecewiseSystem, field: FieldId, p: &[f64]) -> Result<f64, SemiflowError> {
    let n = z.dim();
    let mut v = [0.0; MAX_DIM];
    match field {
        FieldId::X => z.x.eval(p, &mut v[..n]),
        FieldId::Y => z.y.eval(p, &mut v[..n]),
        _ => eval_sliding_into(z, p, &mut v[..n])
            .map_err(|e| IntegrateError::Field(e.to_string()))?,
    }
    Ok(v[..n].iter().map(|c| c * c).sum::<f64>().sqrt())
}

/// `φ_Z(p, ·)` on `[0, T]`.
pub fn semiflow(z: &PiecewiseSystem, p: &[f64], t_final: f64) -> Result<Trajectory, SemiflowError> {
    semiflow_with(z, p, t_final, &SemiflowOptions::default())
}

pub fn semiflow_with(
    z: &PiecewiseSystem,
    p0: &[f64],
    t_final: f64,
    so: &SemiflowOptions,
) -> Result<Trajectory, SemiflowError> {
    if !(t_final > 0.0) {
        return Err(SemiflowError::NonPositiveTime(t_final));
    }
    if !z.domain.contains(p0) {
        return Err(SemiflowError::OutsideDomain { point: p0.to_vec() });
    }
    let mut traj = Trajectory {
        initial_point: p0.to_vec(),
        segments: Vec::new(),
        switch_points: Vec::new(),
        cumulative_times: Vec::new(),
        field_sequence: Vec::new(),
        truncation: Truncation::TimeBudget,
        sigma: Some(z.h.clone()),
    };
    let mut p = p0.to_vec();
    let mut t = 0.0;
    let mut switches = 0usize;
    let mut stalls = 0usize;
    loop {
        let field = select_field(z, &p)?;
        if field == FieldId::Zs {
            project_to_sigma(z, &mut p);
        }
        if field_norm(z, field, &p)? < z.tol.equilibrium {
            traj.push(ArcSegment {
                field,
                start_time: t,
                end_time: t_final,
                start_point: p.clone(),
                end_point: p.clone(),
                steps: vec![DenseStep::constant(t, t_final - t, &p)],
                terminal: EventRecord {
                    kind: EventKind::NoExit,
                    time: f64::INFINITY,
                    location: p.clone(),
                    case: None,
                },
                grazes: Vec::new(),
                projected: false,
            });
            traj.truncation = Truncation::EquilibriumReached;
            return Ok(traj);
        }
        let seg = integrate_arc(z, field, &p, t, t_final - t, so)?;
        let terminal = seg.terminal.clone();
        let end_time = seg.end_time;
        if seg.duration() > 0.0 {
            traj.push(seg);
            stalls = 0;
        } else {
            stalls += 1;
            if stalls > 2 {
                return Err(SemiflowError::Stalled { point: p });
            }
        }
        t = end_time;
        p = terminal.location.clone();
        match terminal.kind {
            EventKind::NoExit => {
                traj.truncation = if traj.segments.len() == 1 {
                    Truncation::NoExit
                } else {
                    Truncation::TimeBudget
                };
                return Ok(traj);
            }
            EventKind::DomainExit => {
                traj.truncation = Truncation::DomainExit;
                return Ok(traj);
            }
            _ => {}
        }
        if t >= t_final {
            traj.truncation = Truncation::TimeBudget;
            return Ok(traj);
        }
        switches += 1;
        if switches > z.tol.max_switches {
            return Err(SemiflowError::MaxSwitches {
                limit: z.tol.max_switches,
                point: p,
            });
        }
    }
}

impl Trajectory {
    fn push(&mut self, seg: ArcSegment) {
        self.switch_points.push(seg.start_point.clone());
        self.cumulative_times.push(seg.end_time);
        self.field_sequence.push(seg.field);
        self.segments.push(seg);
    }
}

/// A forward flow on a box: either the Filippov semiflow or a smooth field.
pub trait Flow: Sync {
    fn dim(&self) -> usize;
    fn domain(&self) -> &DomainBox;
    fn trajectory(&self, p: &[f64], t: f64) -> Result<Trajectory, SemiflowError>;
    /// Velocity of the flow at `p` (the selected field), if defined.
    fn velocity(&self, p: &[f64]) -> Option<Vec<f64>>;
}

/// The Filippov semiflow of a system with fixed options.
#[derive(Debug, Clone)]
pub struct FilippovFlow {
    pub system: PiecewiseSystem,
    pub options: SemiflowOptions,
}

impl FilippovFlow {
    pub fn new(system: PiecewiseSystem) -> Self {
        FilippovFlow {
            system,
            options: SemiflowOptions::default(),
        }
    }
}

impl Flow for FilippovFlow {
    fn dim(&self) -> usize {
        self.system.dim()
    }
    fn domain(&self) -> &DomainBox {
        &self.system.domain
    }
    fn trajectory(&self, p: &[f64], t: f64) -> Result<Trajectory, SemiflowError> {
        semiflow_with(&self.system, p, t, &self.options)
    }
    fn velocity(&self, p: &[f64]) -> Option<Vec<f64>> {
        let z = &self.system;
        let field = select_field(z, p).ok()?;
        match field {
            FieldId::X => Some(z.x.eval_vec(p)),
            FieldId::Y => Some(z.y.eval_vec(p)),
            _ => crate::sliding::eval_sliding(z, p).ok(),
        }
    }
}

/// Flow of a single smooth field on a box, stopped at the box faces.
pub struct SmoothFlow<F> {
    pub field: F,
    pub domain: DomainBox,
    pub options: IntegrateOptions,
}

impl<F: VectorField> SmoothFlow<F> {
    pub fn new(field: F, domain: DomainBox) -> Self {
        SmoothFlow {
            field,
            domain,
            options: IntegrateOptions::default(),
        }
    }
}

impl<F: VectorField + Sync> Flow for SmoothFlow<F> {
    fn dim(&self) -> usize {
        self.field.dim()
    }
    fn domain(&self) -> &DomainBox {
        &self.domain
    }
    fn trajectory(&self, p: &[f64], t: f64) -> Result<Trajectory, SemiflowError> {
        if !(t > 0.0) {
            return Err(SemiflowError::NonPositiveTime(t));
        }
        if !self.domain.contains(p) {
            return Err(SemiflowError::OutsideDomain { point: p.to_vec() });
        }
        let n = self.dim();
        let dom = &self.domain;
        let faces: Vec<Box<dyn Fn(&[f64]) -> f64 + '_>> = (0..n)
            .flat_map(|i| {
                let lo = dom.lo[i];
                let hi = dom.hi[i];
                [
                    Box::new(move |q: &[f64]| q[i] - lo) as Box<dyn Fn(&[f64]) -> f64>,
                    Box::new(move |q: &[f64]| hi - q[i]) as Box<dyn Fn(&[f64]) -> f64>,
                ]
            })
            .collect();
        let events: Vec<EventSpec> = faces
            .iter()
            .map(|f| EventSpec {
                value: f.as_ref(),
                gradient: None,
                band: 0.0,
            })
            .collect();
        let arc = integrate(&self.field, p, t, &events, None, &self.options)?;
        let exited = matches!(arc.stop, ArcStop::Event { .. });
        let terminal = EventRecord {
            kind: if exited { EventKind::DomainExit } else { EventKind::NoExit },
            time: if exited { arc.end_time } else { f64::INFINITY },
            location: arc.end_point.clone(),
            case: None,
        };
        let mut traj = Trajectory {
            initial_point: p.to_vec(),
            segments: Vec::new(),
            switch_points: Vec::new(),
            cumulative_times: Vec::new(),
            field_sequence: Vec::new(),
            truncation: if exited { Truncation::DomainExit } else { Truncation::NoExit },
            sigma: None,
        };
        if arc.end_time > 0.0 {
            traj.push(ArcSegment {
                field: FieldId::Smooth,
                start_time: 0.0,
                end_time: arc.end_time,
                start_point: p.to_vec(),
                end_point: arc.end_point,
                steps: arc.steps,
                terminal,
                grazes: arc.grazes,
                projected: false,
            });
        }
        Ok(traj)
    }
    fn velocity(&self, p: &[f64]) -> Option<Vec<f64>> {
        let mut v = vec![0.0; self.dim()];
        self.field.eval(p, &mut v).ok()?;
        Some(v)
    }
}

/// A polynomial field as an integrable [`VectorField`].
pub struct PolynomialField(pub SmoothField);

impl VectorField for PolynomialField {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn eval(&self, p: &[f64], out: &mut [f64]) -> Result<(), IntegrateError> {
        self.0.eval(p, out);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase", tag = "status")]
pub enum FlowOutcome {
    Reached { point: Vec<f64> },
    Exited { time: f64, point: Vec<f64> },
    Failed { reason: String },
}

/// `φ(p, τ)` for every point, evaluated in parallel; output order matches
/// input order.
pub fn flow_map(flow: &dyn Flow, points: &[Vec<f64>], tau: f64) -> Vec<FlowOutcome> {
    assert!(tau > 0.0, "flow_map requires tau > 0");
    points
        .par_iter()
        .map(|p| flow_point(flow, p, tau))
        .collect()
}

pub fn flow_point(flow: &dyn Flow, p: &[f64], tau: f64) -> FlowOutcome {
    match flow.trajectory(p, tau) {
        Ok(tr) => match tr.truncation {
            Truncation::DomainExit => FlowOutcome::Exited {
                time: tr.end_time(),
                point: tr.end_point().to_vec(),
            },
            _ => FlowOutcome::Reached {
                point: tr.at(tau).unwrap_or_else(|| tr.end_point().to_vec()),
            },
        },
        Err(SemiflowError::OutsideDomain { point }) => FlowOutcome::Exited { time: 0.0, point },
        Err(e) => FlowOutcome::Failed {
            reason: e.to_string(),
        },
    }
}
