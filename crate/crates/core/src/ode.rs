//! Embedded Dormand–Prince 5(4) integrator with optional post-step projection.
//!
//! States are fixed-size `SVector`s so the hot loops stay allocation free.
//! Integration runs in either time direction. After every accepted step the
//! caller-supplied projection is applied, which is how trajectories are kept
//! on a constraint level set.

use nalgebra::SVector;

use crate::error::{Error, Result};

// Dormand–Prince tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

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

// Error weights: fifth-order minus embedded fourth-order solution.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Step-size control knobs.
#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Smallest step magnitude before the integration is declared failed.
    pub h_min: f64,
    /// Largest step magnitude.
    pub h_max: f64,
    pub max_steps: usize,
}

impl OdeOptions {
    /// Relative and absolute tolerance both set to `tol`.
    pub fn with_tol(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            ..Self::default()
        }
    }
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-10,
            h_min: 1e-14,
            h_max: 0.5,
            max_steps: 5_000_000,
        }
    }
}

/// Stateful integrator: keeps the current time, state and step-size
/// proposal between calls to [`Stepper::advance_to`].
pub struct Stepper<const N: usize, F, P>
where
    F: FnMut(f64, &SVector<f64, N>) -> SVector<f64, N>,
    P: FnMut(&mut SVector<f64, N>),
{
    rhs: F,
    project: P,
    t: f64,
    y: SVector<f64, N>,
    h: f64,
    opts: OdeOptions,
    steps: usize,
}

impl<const N: usize, F, P> Stepper<N, F, P>
where
    F: FnMut(f64, &SVector<f64, N>) -> SVector<f64, N>,
    P: FnMut(&mut SVector<f64, N>),
{
    pub fn new(rhs: F, project: P, t0: f64, y0: SVector<f64, N>, opts: OdeOptions) -> Self {
        Self {
            rhs,
            project,
            t: t0,
            y: y0,
            h: 0.0,
            opts,
            steps: 0,
        }
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &SVector<f64, N> {
        &self.y
    }

    /// Number of accepted steps so far.
    pub fn steps(&self) -> usize {
        self.steps
    }

    fn fail(&self, reason: impl Into<String>) -> Error {
        Error::Integration {
            t: self.t,
            last_state: self.y.iter().copied().collect(),
            reason: reason.into(),
        }
    }

    fn initial_step(&mut self, dir: f64) -> f64 {
        let f0 = (self.rhs)(self.t, &self.y);
        let scale = |v: f64| self.opts.atol + self.opts.rtol * v.abs();
        let d0 = self.y.iter().map(|&v| (v / scale(v)).powi(2)).sum::<f64>().sqrt();
        let d1 = self
            .y
            .iter()
            .zip(f0.iter())
            .map(|(&v, &dv)| (dv / scale(v)).powi(2))
            .sum::<f64>()
            .sqrt();
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        dir * h0.min(self.opts.h_max)
    }

    /// Integrates up to `t_target` exactly (the last step is clamped).
    pub fn advance_to(&mut self, t_target: f64) -> Result<()> {
        if t_target == self.t {
            return Ok(());
        }
        let dir = if t_target > self.t { 1.0 } else { -1.0 };
        if self.h == 0.0 || self.h.signum() != dir {
            self.h = self.initial_step(dir);
        }
        let mut k1 = (self.rhs)(self.t, &self.y);
        loop {
            let remaining = t_target - self.t;
            if remaining * dir <= 0.0 {
                return Ok(());
            }
            if self.steps >= self.opts.max_steps {
                return Err(self.fail("maximum number of steps exceeded"));
            }
            let mut h = self.h.abs().min(self.opts.h_max) * dir;
            let mut last = false;
            if (self.t + h - t_target) * dir >= 0.0 {
                h = remaining;
                last = true;
            }
            let t = self.t;
            let y = self.y;
            let f = &mut self.rhs;
            let k2 = f(t + C2 * h, &(y + k1 * (A21 * h)));
            let k3 = f(t + C3 * h, &(y + (k1 * A31 + k2 * A32) * h));
            let k4 = f(t + C4 * h, &(y + (k1 * A41 + k2 * A42 + k3 * A43) * h));
            let k5 = f(t + C5 * h, &(y + (k1 * A51 + k2 * A52 + k3 * A53 + k4 * A54) * h));
            let k6 = f(t + h, &(y + (k1 * A61 + k2 * A62 + k3 * A63 + k4 * A64 + k5 * A65) * h));
            let y_new = y + (k1 * A71 + k3 * A73 + k4 * A74 + k5 * A75 + k6 * A76) * h;
            let k7 = f(t + h, &y_new);
            let err_vec = (k1 * E1 + k3 * E3 + k4 * E4 + k5 * E5 + k6 * E6 + k7 * E7) * h;

            let mut err: f64 = 0.0;
            for i in 0..N {
                let sc = self.opts.atol + self.opts.rtol * y[i].abs().max(y_new[i].abs());
                err = err.max((err_vec[i] / sc).abs());
            }
            if !err.is_finite() {
                return Err(self.fail("non-finite error estimate"));
            }
            if err <= 1.0 {
                let mut y_acc = y_new;
                (self.project)(&mut y_acc);
                self.t = if last { t_target } else { t + h };
                self.y = y_acc;
                self.steps += 1;
                let fac = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                // A clamped final step says nothing about the natural step size.
                if !last {
                    self.h = h * fac;
                }
                k1 = (self.rhs)(self.t, &self.y);
            } else {
                let fac = (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
                self.h = h * fac;
                if self.h.abs() < self.opts.h_min {
                    return Err(self.fail("step size underflow"));
                }
            }
        }
    }
}

/// One-shot integration from `t0` to `t1`.
pub fn integrate<const N: usize, F, P>(
    rhs: F,
    project: P,
    t0: f64,
    y0: SVector<f64, N>,
    t1: f64,
    opts: OdeOptions,
) -> Result<SVector<f64, N>>
where
    F: FnMut(f64, &SVector<f64, N>) -> SVector<f64, N>,
    P: FnMut(&mut SVector<f64, N>),
{
    let mut stepper = Stepper::new(rhs, project, t0, y0, opts);
    stepper.advance_to(t1)?;
    Ok(*stepper.state())
}

/// Integrates and records the state at each of the (monotone) `times`.
pub fn integrate_grid<const N: usize, F, P>(
    rhs: F,
    project: P,
    y0: SVector<f64, N>,
    times: &[f64],
    opts: OdeOptions,
) -> Result<Vec<SVector<f64, N>>>
where
    F: FnMut(f64, &SVector<f64, N>) -> SVector<f64, N>,
    P: FnMut(&mut SVector<f64, N>),
{
    let Some(&t0) = times.first() else {
        return Ok(Vec::new());
    };
    let mut stepper = Stepper::new(rhs, project, t0, y0, opts);
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        stepper.advance_to(t)?;
        out.push(*stepper.state());
    }
    Ok(out)
}

/// No-op projection.
pub fn no_projection<const N: usize>(_: &mut SVector<f64, N>) {}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Vector1, Vector2};

    #[test]
    fn harmonic_oscillator_full_period() {
        let y0 = Vector2::new(1.0, 0.0);
        let y = integrate(
            |_, y: &Vector2<f64>| Vector2::new(y[1], -y[0]),
            no_projection,
            0.0,
            y0,
            2.0 * std::f64::consts::PI,
            OdeOptions::with_tol(1e-12),
        )
        .unwrap();
        assert!((y - y0).norm() < 1e-10, "{y}");
    }

    #[test]
    fn backward_integration_inverts_forward() {
        let rhs = |t: f64, y: &Vector1<f64>| Vector1::new(t.sin() * y[0]);
        let y1 = integrate(rhs, no_projection, 0.0, Vector1::new(1.0), 3.0, OdeOptions::default()).unwrap();
        let y0 = integrate(rhs, no_projection, 3.0, y1, 0.0, OdeOptions::default()).unwrap();
        assert!((y0[0] - 1.0).abs() < 1e-9);
        // exact solution exp(1 - cos t)
        assert!((y1[0] - (1.0 - 3.0f64.cos()).exp()).abs() < 1e-8);
    }

    #[test]
    fn zero_length_interval_is_identity() {
        let y0 = Vector2::new(0.3, -0.7);
        let y = integrate(
            |_, y: &Vector2<f64>| Vector2::new(y[1], -y[0]),
            no_projection,
            1.0,
            y0,
            1.0,
            OdeOptions::default(),
        )
        .unwrap();
        assert_eq!(y, y0);
    }

    #[test]
    fn grid_output_hits_requested_times() {
        let times: Vec<f64> = (0..=10).map(|i| i as f64 * 0.3).collect();
        let ys = integrate_grid(
            |_, y: &Vector1<f64>| Vector1::new(-y[0]),
            no_projection,
            Vector1::new(1.0),
            &times,
            OdeOptions::with_tol(1e-12),
        )
        .unwrap();
        for (t, y) in times.iter().zip(&ys) {
            assert!((y[0] - (-t).exp()).abs() < 1e-11);
        }
    }

    #[test]
    fn blow_up_reports_failure_with_last_state() {
        let opts = OdeOptions {
            max_steps: 10_000,
            ..OdeOptions::default()
        };
        let err = integrate(
            |_, y: &Vector1<f64>| Vector1::new(y[0] * y[0]),
            no_projection,
            0.0,
            Vector1::new(1.0),
            2.0,
            opts,
        )
        .unwrap_err();
        match err {
            Error::Integration { t, last_state, .. } => {
                assert!(t < 1.0 && t > 0.9);
                assert_eq!(last_state.len(), 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
