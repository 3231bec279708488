//! Dormand–Prince 5(4) integration with continuous output and event location.

use thiserror::Error;

use crate::poly::MAX_DIM;

pub type State = [f64; MAX_DIM];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrateError {
    #[error("step size underflow at t = {t} (state {state:?})")]
    StepUnderflow { t: f64, state: Vec<f64> },
    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("field evaluation failed: {0}")]
    Field(String),
}

/// Anything that can be integrated: `out = F(p)`.
pub trait VectorField {
    fn dim(&self) -> usize;
    fn eval(&self, p: &[f64], out: &mut [f64]) -> Result<(), IntegrateError>;
}

impl<F> VectorField for (usize, F)
where
    F: Fn(&[f64], &mut [f64]),
{
    fn dim(&self) -> usize {
        self.0
    }
    fn eval(&self, p: &[f64], out: &mut [f64]) -> Result<(), IntegrateError> {
        (self.1)(p, out);
        Ok(())
    }
}

/// A scalar event function `g`; the arc stays in the region `g ≥ 0` and
/// the event fires once `g < −band` is observed.
pub struct EventSpec<'a> {
    pub value: &'a dyn Fn(&[f64]) -> f64,
    /// `∇g`, needed only for graze (local minimum) detection.
    pub gradient: Option<&'a dyn Fn(&[f64], &mut [f64])>,
    pub band: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct IntegrateOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub event_tol: f64,
    /// Local minima of an event function below this value are recorded.
    pub graze_tol: f64,
    pub record_grazes: bool,
    pub max_steps: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions {
            rtol: 1e-9,
            atol: 1e-12,
            h_max: 0.2,
            event_tol: 1e-13,
            graze_tol: 1e-9,
            record_grazes: false,
            max_steps: 2_000_000,
        }
    }
}

/// One accepted step with its quartic continuous extension.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseStep {
    pub t0: f64,
    pub dt: f64,
    n: usize,
    r: [State; 5],
}

impl DenseStep {
    pub fn t1(&self) -> f64 {
        self.t0 + self.dt
    }

    pub fn start(&self) -> &[f64] {
        &self.r[0][..self.n]
    }

    pub fn eval(&self, t: f64) -> State {
        let th = if self.dt == 0.0 { 0.0 } else { (t - self.t0) / self.dt };
        let th1 = 1.0 - th;
        let mut out = [0.0; MAX_DIM];
        for i in 0..self.n {
            let r = &self.r;
            out[i] = r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i])));
        }
        out
    }

    /// A degenerate step that stays at `p` for `dt`.
    pub fn constant(t0: f64, dt: f64, p: &[f64]) -> DenseStep {
        let mut r = [[0.0; MAX_DIM]; 5];
        r[0][..p.len()].copy_from_slice(p);
        DenseStep { t0, dt, n: p.len(), r }
    }
}

/// Continuous-output lookup over consecutive steps; `t` is clamped to the
/// covered range.
pub fn dense_at(steps: &[DenseStep], t: f64) -> State {
    let k = steps.partition_point(|s| s.t1() < t).min(steps.len() - 1);
    steps[k].eval(t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Graze {
    pub event: usize,
    pub t: f64,
    pub point: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArcStop {
    Budget,
    Event { event: usize },
}

#[derive(Debug, Clone)]
pub struct ArcIntegration {
    pub steps: Vec<DenseStep>,
    pub end_time: f64,
    pub end_point: Vec<f64>,
    pub stop: ArcStop,
    pub grazes: Vec<Graze>,
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

struct Stepper<'a> {
    f: &'a dyn VectorField,
    n: usize,
}

impl Stepper<'_> {
    fn call(&self, y: &State, out: &mut State) -> Result<(), IntegrateError> {
        self.f.eval(&y[..self.n], &mut out[..self.n])
    }

    fn combo(&self, y: &State, h: f64, terms: &[(f64, &State)]) -> State {
        let mut out = *y;
        for i in 0..self.n {
            let mut s = 0.0;
            for (c, k) in terms {
                s += c * k[i];
            }
            out[i] += h * s;
        }
        out
    }

    /// One trial step; returns `(y1, k7, err, rcont)`.
    fn step(
        &self,
        y: &State,
        k1: &State,
        h: f64,
        opts: &IntegrateOptions,
    ) -> Result<(State, State, f64, [State; 5]), IntegrateError> {
        let n = self.n;
        let mut k2 = [0.0; MAX_DIM];
        let mut k3 = [0.0; MAX_DIM];
        let mut k4 = [0.0; MAX_DIM];
        let mut k5 = [0.0; MAX_DIM];
        let mut k6 = [0.0; MAX_DIM];
        let mut k7 = [0.0; MAX_DIM];
        self.call(&self.combo(y, h, &[(A21, k1)]), &mut k2)?;
        self.call(&self.combo(y, h, &[(A31, k1), (A32, &k2)]), &mut k3)?;
        self.call(&self.combo(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]), &mut k4)?;
        self.call(
            &self.combo(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            &mut k5,
        )?;
        self.call(
            &self.combo(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
            &mut k6,
        )?;
        let y1 = self.combo(
            y,
            h,
            &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        self.call(&y1, &mut k7)?;
        let mut err = 0.0;
        for i in 0..n {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sk = opts.atol + opts.rtol * y[i].abs().max(y1[i].abs());
            err += (e / sk) * (e / sk);
        }
        err = (err / n as f64).sqrt();
        let mut r = [[0.0; MAX_DIM]; 5];
        for i in 0..n {
            let ydiff = y1[i] - y[i];
            let bspl = h * k1[i] - ydiff;
            r[0][i] = y[i];
            r[1][i] = ydiff;
            r[2][i] = bspl;
            r[3][i] = ydiff - h * k7[i] - bspl;
            r[4][i] = h
                * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
        }
        Ok((y1, k7, err, r))
    }
}

const SAMPLES_PER_STEP: usize = 4;

/// Integrates `y' = F(y)` from `y0` for at most `t_budget`, stopping at the
/// first event. `project`, when given, maps every accepted state (and the
/// final point) back onto a constraint manifold.
pub fn integrate(
    field: &dyn VectorField,
    y0: &[f64],
    t_budget: f64,
    events: &[EventSpec],
    project: Option<&dyn Fn(&mut [f64])>,
    opts: &IntegrateOptions,
) -> Result<ArcIntegration, IntegrateError> {
    let n = field.dim();
    let st = Stepper { f: field, n };
    let mut y = [0.0; MAX_DIM];
    y[..n].copy_from_slice(y0);
    let mut k1 = [0.0; MAX_DIM];
    st.call(&y, &mut k1)?;
    if !k1[..n].iter().all(|v| v.is_finite()) {
        return Err(IntegrateError::NonFiniteState { t: 0.0 });
    }

    let fnorm = k1[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut h = if fnorm > 0.0 {
        (0.01 * (1.0 + y[..n].iter().map(|v| v.abs()).fold(0.0, f64::max)) / fnorm)
            .clamp(1e-6, opts.h_max)
    } else {
        opts.h_max
    };
    h = h.min(t_budget);

    let mut steps: Vec<DenseStep> = Vec::new();
    let mut grazes = Vec::new();
    let mut t = 0.0;
    let mut g_prev: Vec<f64> = events.iter().map(|e| (e.value)(&y[..n])).collect();
    let mut last_nonneg: Vec<Option<f64>> =
        g_prev.iter().map(|&g| if g >= 0.0 { Some(0.0) } else { None }).collect();
    let mut gdot_prev: Vec<f64> = events
        .iter()
        .map(|e| event_rate(e, &y[..n], &k1[..n], n))
        .collect();

    let mut nsteps = 0usize;
    loop {
        if t_budget - t <= 0.0 {
            return Ok(ArcIntegration {
                steps,
                end_time: t_budget,
                end_point: y[..n].to_vec(),
                stop: ArcStop::Budget,
                grazes,
            });
        }
        nsteps += 1;
        if nsteps > opts.max_steps {
            return Err(IntegrateError::StepUnderflow {
                t,
                state: y[..n].to_vec(),
            });
        }
        let last = h >= t_budget - t;
        let hh = if last { t_budget - t } else { h };
        let (mut y1, mut k7, err, r) = st.step(&y, &k1, hh, opts)?;
        if !err.is_finite() {
            if hh < 1e-14 * (1.0 + t.abs()) {
                return Err(IntegrateError::NonFiniteState { t });
            }
            h = hh * 0.1;
            continue;
        }
        if err > 1.0 {
            let fac = (0.9 * err.powf(-0.2)).max(0.2);
            h = hh * fac;
            if h < 1e-14 * (1.0 + t.abs()) {
                return Err(IntegrateError::StepUnderflow {
                    t,
                    state: y[..n].to_vec(),
                });
            }
            continue;
        }
        if !y1[..n].iter().all(|v| v.is_finite()) {
            return Err(IntegrateError::NonFiniteState { t: t + hh });
        }
        let t1 = if last { t_budget } else { t + hh };
        if let Some(proj) = project {
            proj(&mut y1[..n]);
            st.call(&y1, &mut k7)?;
        }
        steps.push(DenseStep {
            t0: t,
            dt: t1 - t,
            n,
            r,
        });

        // Event scan over interior samples of the step.
        let mut fired: Option<(f64, usize)> = None;
        let mut g_end = vec![0.0; events.len()];
        let mut gdot_end = vec![0.0; events.len()];
        for (ei, ev) in events.iter().enumerate() {
            let mut t_a = t;
            let mut gd_a = gdot_prev[ei];
            let mut nonneg = last_nonneg[ei];
            for s in 1..=SAMPLES_PER_STEP {
                let ts = if s == SAMPLES_PER_STEP {
                    t1
                } else {
                    t + (t1 - t) * s as f64 / SAMPLES_PER_STEP as f64
                };
                let ps = if s == SAMPLES_PER_STEP {
                    y1
                } else {
                    steps.last().unwrap().eval(ts)
                };
                let g_b = (ev.value)(&ps[..n]);
                if ev.gradient.is_some() {
                    let mut fv = [0.0; MAX_DIM];
                    st.call(&ps, &mut fv)?;
                    let gd_b = event_rate(ev, &ps[..n], &fv[..n], n);
                    if gd_a < 0.0 && gd_b >= 0.0 && g_b >= -ev.band {
                        // A local minimum between samples: a shallow dip
                        // below the band is a crossing, otherwise a graze.
                        let gz = locate_minimum(&st, ev, ei, &steps, t_a, ts, opts, n)?;
                        if gz.value < -ev.band {
                            let te = match nonneg {
                                Some(tn) => bisect(&steps, |p| (ev.value)(&p[..n]), tn, gz.t, 0.0, opts.event_tol),
                                None => bisect(
                                    &steps,
                                    |p| (ev.value)(&p[..n]),
                                    t_a,
                                    gz.t,
                                    -0.5 * ev.band,
                                    opts.event_tol,
                                ),
                            };
                            if fired.is_none_or(|(tf, _)| te < tf) {
                                fired = Some((te, ei));
                            }
                            break;
                        }
                        if opts.record_grazes && gz.value < opts.graze_tol {
                            grazes.push(gz);
                        }
                    }
                    gd_a = gd_b;
                }
                if g_b < -ev.band {
                    let te = match nonneg {
                        Some(tn) => bisect(&steps, |p| (ev.value)(&p[..n]), tn, ts, 0.0, opts.event_tol),
                        None => bisect(
                            &steps,
                            |p| (ev.value)(&p[..n]),
                            t_a,
                            ts,
                            -0.5 * ev.band,
                            opts.event_tol,
                        ),
                    };
                    let te = if nonneg.is_none() && g_prev[ei] < -0.5 * ev.band {
                        t_a
                    } else {
                        te
                    };
                    if fired.is_none_or(|(tf, _)| te < tf) {
                        fired = Some((te, ei));
                    }
                    break;
                }
                if g_b >= 0.0 {
                    nonneg = Some(ts);
                }
                t_a = ts;
            }
            g_end[ei] = (ev.value)(&y1[..n]);
            last_nonneg[ei] = nonneg;
            gdot_end[ei] = gd_a;
        }

        if let Some((te, ei)) = fired {
            grazes.retain(|g| g.t < te);
            let mut pe = dense_at(&steps, te);
            if let Some(proj) = project {
                proj(&mut pe[..n]);
            }
            // Trim steps past the event.
            while steps.len() > 1 && steps.last().unwrap().t0 >= te {
                steps.pop();
            }
            return Ok(ArcIntegration {
                steps,
                end_time: te,
                end_point: pe[..n].to_vec(),
                stop: ArcStop::Event { event: ei },
                grazes,
            });
        }

        g_prev = g_end;
        gdot_prev = gdot_end;
        t = t1;
        y = y1;
        k1 = k7;
        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = (hh * fac).min(opts.h_max);
        if last {
            h = hh;
        }
    }
}

fn event_rate(ev: &EventSpec, p: &[f64], f: &[f64], n: usize) -> f64 {
    match ev.gradient {
        Some(grad) => {
            let mut g = [0.0; MAX_DIM];
            grad(p, &mut g[..n]);
            (0..n).map(|i| g[i] * f[i]).sum()
        }
        None => 0.0,
    }
}

/// Root of `g(y(t)) = target` on `[ta, tb]` with `g(ta) ≥ target > g(tb)`.
fn bisect(
    steps: &[DenseStep],
    g: impl Fn(&State) -> f64,
    mut ta: f64,
    mut tb: f64,
    target: f64,
    tol: f64,
) -> f64 {
    for _ in 0..200 {
        if tb - ta <= tol {
            break;
        }
        let tm = 0.5 * (ta + tb);
        if g(&dense_at(steps, tm)) >= target {
            ta = tm;
        } else {
            tb = tm;
        }
    }
    tb
}

#[allow(clippy::too_many_arguments)]
fn locate_minimum(
    st: &Stepper,
    ev: &EventSpec,
    ei: usize,
    steps: &[DenseStep],
    mut ta: f64,
    mut tb: f64,
    opts: &IntegrateOptions,
    n: usize,
) -> Result<Graze, IntegrateError> {
    let rate = |t: f64| -> Result<f64, IntegrateError> {
        let p = dense_at(steps, t);
        let mut fv = [0.0; MAX_DIM];
        st.call(&p, &mut fv)?;
        Ok(event_rate(ev, &p[..n], &fv[..n], n))
    };
    for _ in 0..200 {
        if tb - ta <= opts.event_tol {
            break;
        }
        let tm = 0.5 * (ta + tb);
        if rate(tm)? < 0.0 {
            ta = tm;
        } else {
            tb = tm;
        }
    }
    let tm = 0.5 * (ta + tb);
    let p = dense_at(steps, tm);
    Ok(Graze {
        event: ei,
        t: tm,
        point: p[..n].to_vec(),
        value: (ev.value)(&p[..n]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(
        dim: usize,
        f: impl Fn(&[f64], &mut [f64]),
        y0: &[f64],
        t: f64,
        events: &[EventSpec],
        opts: IntegrateOptions,
    ) -> ArcIntegration {
        integrate(&(dim, f), y0, t, events, None, &opts).unwrap()
    }

    #[test]
    fn linear_flow_hits_plane_at_unit_time() {
        let g = |p: &[f64]| -p[2];
        let ev = [EventSpec { value: &g, gradient: None, band: 1e-9 }];
        let arc = run(3, |_, o| o.copy_from_slice(&[0.0, 0.0, 1.0]), &[0.0, 0.0, -1.0], 5.0, &ev, Default::default());
        assert_eq!(arc.stop, ArcStop::Event { event: 0 });
        assert!((arc.end_time - 1.0).abs() < 1e-10);
        assert!(arc.end_point[2].abs() < 1e-9);
    }

    #[test]
    fn rest_point_consumes_budget() {
        let arc = run(3, |_, o| o.fill(0.0), &[0.1, 0.2, 0.3], 2.5, &[], Default::default());
        assert_eq!(arc.stop, ArcStop::Budget);
        assert_eq!(arc.end_time, 2.5);
        assert_eq!(arc.end_point, vec![0.1, 0.2, 0.3]);
    }

    #[test]
    fn harmonic_oscillator_accuracy_and_dense_output() {
        let arc = run(2, |p, o| { o[0] = p[1]; o[1] = -p[0]; }, &[1.0, 0.0], 10.0, &[], Default::default());
        assert!((arc.end_point[0] - 10f64.cos()).abs() < 1e-7);
        assert!((arc.end_point[1] + 10f64.sin()).abs() < 1e-7);
        for k in 0..100 {
            let t = 0.1 * k as f64 + 0.037;
            let p = dense_at(&arc.steps, t);
            assert!((p[0] - t.cos()).abs() < 1e-7, "t={t}");
        }
        assert!(arc.steps.windows(2).all(|w| (w[0].t1() - w[1].t0).abs() < 1e-15));
    }

    #[test]
    fn tangential_contact_is_a_graze_not_an_event() {
        // x1' = 1, x3' = x1 from (-1, 0, 0.5): x3 = (t - 1)^2 / 2 touches 0 at t = 1.
        let g = |p: &[f64]| p[2];
        let grad = |_: &[f64], o: &mut [f64]| o.copy_from_slice(&[0.0, 0.0, 1.0]);
        let ev = [EventSpec { value: &g, gradient: Some(&grad), band: 1e-9 }];
        let opts = IntegrateOptions { record_grazes: true, ..Default::default() };
        let arc = run(3, |p, o| { o[0] = 1.0; o[1] = 0.0; o[2] = p[0]; }, &[-1.0, 0.0, 0.5], 3.0, &ev, opts);
        assert_eq!(arc.stop, ArcStop::Budget);
        assert_eq!(arc.grazes.len(), 1);
        assert!((arc.grazes[0].t - 1.0).abs() < 1e-6);
        assert!(arc.grazes[0].value.abs() < 1e-9);
    }

    #[test]
    fn transversal_root_matches_quadratic_formula() {
        // x3 = 0.4 - t + t^2/2 has its first root at t = 1 - sqrt(0.2).
        let g = |p: &[f64]| p[2];
        let ev = [EventSpec { value: &g, gradient: None, band: 1e-9 }];
        let arc = run(3, |p, o| { o[0] = 1.0; o[1] = 0.0; o[2] = p[0]; }, &[-1.0, 0.0, 0.4], 3.0, &ev, Default::default());
        let exact = 1.0 - 0.2f64.sqrt();
        assert!((arc.end_time - exact).abs() < 1e-10, "{}", arc.end_time - exact);
    }

    #[test]
    fn immediate_exit_when_starting_outside() {
        let g = |p: &[f64]| p[1];
        let ev = [EventSpec { value: &g, gradient: None, band: 1e-9 }];
        let arc = run(2, |_, o| o.copy_from_slice(&[0.0, -1.0]), &[0.0, -1e-9], 1.0, &ev, Default::default());
        assert_eq!(arc.end_time, 0.0);
    }

    #[test]
    fn projection_keeps_constraint() {
        // Rotation restricted to the unit circle.
        let proj = |p: &mut [f64]| {
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            p[0] /= r;
            p[1] /= r;
        };
        let arc = integrate(
            &(2, |p: &[f64], o: &mut [f64]| { o[0] = -p[1]; o[1] = p[0]; }),
            &[1.0, 0.0],
            6.0,
            &[],
            Some(&proj),
            &Default::default(),
        )
        .unwrap();
        let r = arc.end_point[0].hypot(arc.end_point[1]);
        assert!((r - 1.0).abs() < 1e-15);
    }

    #[test]
    fn nonfinite_field_is_reported() {
        let r = integrate(&(1, |_: &[f64], o: &mut [f64]| o[0] = f64::NAN), &[0.0], 1.0, &[], None, &Default::default());
        assert!(matches!(r, Err(IntegrateError::NonFiniteState { .. })));
    }
}
