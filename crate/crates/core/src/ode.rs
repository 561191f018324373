//! Adaptive Dormand–Prince 5(4) integrator for small systems.

/// Tolerances and step limits.
#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Steps smaller than `min_step * |t|` count as an underflow.
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-13,
            atol: 1e-15,
            min_step: 1e-14,
            max_steps: 1_000_000,
        }
    }
}

/// Why an integration stopped early.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Halt {
    /// The user predicate fired.
    Event,
    /// The step size collapsed.
    Underflow,
    /// Non-finite state.
    Blowup,
    TooManySteps,
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrator state for an `N`-dimensional system `x' = f(t, x)`.
pub struct Dopri5<F, const N: usize>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    rhs: F,
    pub opts: OdeOptions,
    pub t: f64,
    pub x: [f64; N],
    step: f64,
    pub steps: usize,
}

impl<F, const N: usize> Dopri5<F, N>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    pub fn new(rhs: F, t: f64, x: [f64; N], opts: OdeOptions) -> Self {
        Self {
            rhs,
            opts,
            t,
            x,
            step: 0.0,
            steps: 0,
        }
    }

    /// Advances to `t_end` (either direction), stopping early if `event`
    /// returns true after an accepted step.
    pub fn advance(
        &mut self,
        t_end: f64,
        mut event: impl FnMut(f64, &[f64; N]) -> bool,
    ) -> Result<(), Halt> {
        let dir = if t_end >= self.t { 1.0 } else { -1.0 };
        let span = (t_end - self.t).abs();
        if span == 0.0 {
            return Ok(());
        }
        if self.step == 0.0 || self.step.signum() != dir {
            self.step = dir * (1e-3 * span).max(1e-6 * (self.t.abs() + span)).min(span);
        }
        loop {
            let remaining = t_end - self.t;
            if remaining * dir <= 0.0 {
                return Ok(());
            }
            let last = self.step.abs() >= remaining.abs();
            let h = if last { remaining } else { self.step };
            if h.abs() < self.opts.min_step * self.t.abs().max(1.0) {
                return Err(Halt::Underflow);
            }
            if self.steps >= self.opts.max_steps {
                return Err(Halt::TooManySteps);
            }
            let (xn, err) = self.trial(h);
            if !err.is_finite() || xn.iter().any(|v| !v.is_finite()) {
                if h.abs() < 1e-300 {
                    return Err(Halt::Blowup);
                }
                self.step = 0.25 * h;
                continue;
            }
            let fac = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if err <= 1.0 {
                self.t = if last { t_end } else { self.t + h };
                self.x = xn;
                self.steps += 1;
                if !last || fac < 1.0 {
                    self.step = h * fac;
                }
                if event(self.t, &self.x) {
                    return Err(Halt::Event);
                }
            } else {
                self.step = h * fac.min(1.0);
            }
        }
    }

    fn trial(&self, h: f64) -> ([f64; N], f64) {
        let mut k = [[0.0; N]; 7];
        k[0] = (self.rhs)(self.t, &self.x);
        for s in 1..7 {
            let mut xs = self.x;
            for (j, kj) in k.iter().enumerate().take(s) {
                let a = A[s][j];
                if a != 0.0 {
                    for i in 0..N {
                        xs[i] += h * a * kj[i];
                    }
                }
            }
            k[s] = (self.rhs)(self.t + C[s] * h, &xs);
        }
        let mut xn = self.x;
        for (j, kj) in k.iter().enumerate().take(6) {
            for i in 0..N {
                xn[i] += h * A[6][j] * kj[i];
            }
        }
        let mut err = 0.0;
        for i in 0..N {
            let e: f64 = (0..7).map(|j| E[j] * k[j][i]).sum::<f64>() * h;
            let sc = self.opts.atol + self.opts.rtol * self.x[i].abs().max(xn[i].abs());
            err += (e / sc).powi(2);
        }
        (xn, (err / N as f64).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_harmonic_oscillator_both_ways() {
        let f = |_t: f64, x: &[f64; 2]| [x[1], -x[0]];
        let mut ode = Dopri5::new(f, 0.0, [0.0, 1.0], OdeOptions::default());
        ode.advance(10.0, |_, _| false).unwrap();
        assert!((ode.x[0] - 10f64.sin()).abs() < 1e-11);
        ode.advance(0.0, |_, _| false).unwrap();
        assert!(ode.x[0].abs() < 1e-11);
    }
}
