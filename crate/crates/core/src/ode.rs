//! Adaptive Dormand–Prince 5(4) integration.
//!
//! Steps are clamped so that requested output times are hit exactly; the
//! cubic Hermite interpolant of each accepted step is available for event
//! location between grid points.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub atol: f64,
    pub rtol: f64,
    /// Step sizes below this abort the integration.
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            atol: 1e-10,
            rtol: 1e-8,
            h_min: 1e-12,
            max_steps: 1_000_000,
        }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights are the last row of A; these are fifth minus fourth
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// One accepted step with endpoint derivatives.
#[derive(Debug, Clone)]
pub struct Step {
    pub t0: f64,
    pub y0: Vec<f64>,
    pub f0: Vec<f64>,
    pub t1: f64,
    pub y1: Vec<f64>,
    pub f1: Vec<f64>,
}

impl Step {
    /// Cubic Hermite interpolant at `t` inside the step.
    pub fn hermite(&self, t: f64) -> Vec<f64> {
        let h = self.t1 - self.t0;
        let s = (t - self.t0) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        (0..self.y0.len())
            .map(|i| h00 * self.y0[i] + h10 * h * self.f0[i] + h01 * self.y1[i] + h11 * h * self.f1[i])
            .collect()
    }
}

/// Right-hand side `f(t, y, out)`.
pub trait Rhs: FnMut(f64, &[f64], &mut [f64]) -> Result<()> {}
impl<T: FnMut(f64, &[f64], &mut [f64]) -> Result<()>> Rhs for T {}

pub struct Integrator<F: Rhs> {
    f: F,
    t: f64,
    y: Vec<f64>,
    fy: Vec<f64>,
    h: f64,
    dir: f64,
    tol: Tolerances,
    steps: usize,
}

impl<F: Rhs> Integrator<F> {
    /// `direction` is the sign of time flow.
    pub fn new(mut f: F, t0: f64, y0: Vec<f64>, direction: f64, tol: Tolerances) -> Result<Self> {
        let mut fy = vec![0.0; y0.len()];
        f(t0, &y0, &mut fy)?;
        let scale = y0.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        let speed = fy.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let h = if speed > 0.0 { (0.01 * scale / speed).min(0.1) } else { 0.1 };
        Ok(Integrator {
            f,
            t: t0,
            y: y0,
            fy,
            h,
            dir: direction.signum(),
            tol,
            steps: 0,
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &[f64] {
        &self.y
    }

    fn attempt(&mut self, h: f64) -> Result<(Vec<f64>, Vec<f64>, f64)> {
        let n = self.y.len();
        let mut k: Vec<Vec<f64>> = vec![self.fy.clone()];
        let mut tmp = vec![0.0; n];
        for s in 1..7 {
            for i in 0..n {
                tmp[i] = self.y[i] + h * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>();
            }
            let mut out = vec![0.0; n];
            (self.f)(self.t + C[s] * h, &tmp, &mut out)?;
            k.push(out);
        }
        // stage 7 was evaluated at the fifth-order solution (FSAL)
        let y_new = tmp;
        let mut err: f64 = 0.0;
        for i in 0..n {
            let e = h * (0..7).map(|j| E[j] * k[j][i]).sum::<f64>();
            let sc = self.tol.atol + self.tol.rtol * self.y[i].abs().max(y_new[i].abs());
            err = err.max((e / sc).abs());
        }
        let f_new = k.pop().expect("seven stages");
        Ok((y_new, f_new, err))
    }

    /// Advances by one accepted step, never past `limit`.
    pub fn step(&mut self, limit: f64) -> Result<Step> {
        loop {
            self.steps += 1;
            if self.steps > self.tol.max_steps {
                return Err(Error::Numerical("step budget exhausted".into()));
            }
            let remaining = (limit - self.t) * self.dir;
            let mut h = self.h.min(remaining);
            let landing = h >= remaining * (1.0 - 1e-12);
            if landing {
                h = remaining;
            }
            if h < self.tol.h_min && !landing {
                return Err(Error::Numerical(format!("step size collapsed at t = {}", self.t)));
            }
            let signed = h * self.dir;
            match self.attempt(signed) {
                Ok((y_new, f_new, err)) if err <= 1.0 => {
                    let step = Step {
                        t0: self.t,
                        y0: std::mem::replace(&mut self.y, y_new.clone()),
                        f0: std::mem::replace(&mut self.fy, f_new.clone()),
                        t1: if landing { limit } else { self.t + signed },
                        y1: y_new,
                        f1: f_new,
                    };
                    self.t = step.t1;
                    let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                    // keep the pre-landing size so short landings do not throttle later steps
                    self.h = (h * grow).max(if landing { self.h } else { 0.0 });
                    return Ok(step);
                }
                Ok((_, _, err)) => {
                    self.h = h * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
                }
                Err(e) => {
                    if h <= self.tol.h_min {
                        return Err(e);
                    }
                    self.h = h * 0.25;
                }
            }
        }
    }
}

/// Solution sampled on a grid.
#[derive(Debug, Clone)]
pub struct GridSolution {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Why integration ended before the last grid time, if it did.
    pub stopped: Option<String>,
}

/// Integrates through a monotone grid, landing on every grid time.
///
/// `keep_going` inspects each landed state; returning false ends the run
/// early with the message it produced.
pub fn integrate_grid<F: Rhs>(
    f: F,
    y0: Vec<f64>,
    grid: &[f64],
    tol: Tolerances,
    mut keep_going: impl FnMut(f64, &[f64]) -> std::result::Result<(), String>,
) -> Result<GridSolution> {
    let t0 = grid[0];
    let dir = if grid.len() > 1 && grid[1] < grid[0] { -1.0 } else { 1.0 };
    let mut out = GridSolution {
        times: vec![t0],
        states: vec![y0.clone()],
        stopped: None,
    };
    if let Err(msg) = keep_going(t0, &y0) {
        out.stopped = Some(msg);
        return Ok(out);
    }
    let mut integ = Integrator::new(f, t0, y0, dir, tol)?;
    for &t in &grid[1..] {
        while (t - integ.time()) * dir > 0.0 {
            if let Err(e) = integ.step(t) {
                out.stopped = Some(e.to_string());
                return Ok(out);
            }
        }
        out.times.push(t);
        out.states.push(integ.state().to_vec());
        if let Err(msg) = keep_going(t, integ.state()) {
            out.stopped = Some(msg);
            return Ok(out);
        }
    }
    Ok(out)
}

/// `n + 1` equally spaced times from `a` to `b`.
pub fn uniform_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| a + (b - a) * k as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let sol = integrate_grid(
            |_t, y: &[f64], out: &mut [f64]| {
                out[0] = -y[0];
                Ok(())
            },
            vec![1.0],
            &uniform_grid(0.0, 5.0, 10),
            Tolerances::default(),
            |_, _| Ok(()),
        )
        .unwrap();
        assert!(sol.stopped.is_none());
        for (t, y) in sol.times.iter().zip(&sol.states) {
            assert!((y[0] - (-t).exp()).abs() < 1e-8);
        }
        assert_eq!(*sol.times.last().unwrap(), 5.0);
    }

    #[test]
    fn harmonic_oscillator_backwards() {
        let sol = integrate_grid(
            |_t, y: &[f64], out: &mut [f64]| {
                out[0] = y[1];
                out[1] = -y[0];
                Ok(())
            },
            vec![0.0, 1.0],
            &uniform_grid(0.0, -10.0, 40),
            Tolerances::default(),
            |_, _| Ok(()),
        )
        .unwrap();
        for (t, y) in sol.times.iter().zip(&sol.states) {
            assert!((y[0] - t.sin()).abs() < 1e-7, "{t}");
        }
    }

    #[test]
    fn hermite_reproduces_cubic() {
        let step = Step {
            t0: 1.0,
            y0: vec![1.0],
            f0: vec![3.0],
            t1: 2.0,
            y1: vec![8.0],
            f1: vec![12.0],
        };
        assert!((step.hermite(1.5)[0] - 3.375).abs() < 1e-14);
    }

    #[test]
    fn early_stop_is_reported() {
        let sol = integrate_grid(
            |_t, _y: &[f64], out: &mut [f64]| {
                out[0] = 1.0;
                Ok(())
            },
            vec![0.0],
            &uniform_grid(0.0, 10.0, 10),
            Tolerances::default(),
            |_, y| if y[0] > 3.5 { Err("left box".into()) } else { Ok(()) },
        )
        .unwrap();
        assert_eq!(sol.stopped.as_deref(), Some("left box"));
        assert_eq!(sol.times.len(), 5);
    }
}
