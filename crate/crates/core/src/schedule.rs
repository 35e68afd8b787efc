//! Power-law step sizes `α_k = a k^{−τ_α}` and penalty weights
//! `γ_k = g k^{τ_γ}`, the elapsed clock `ζ_k`, and the smooth interpolation
//! `t ↦ γ_t`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub alpha_scale: f64,
    pub tau_alpha: f64,
    pub gamma_scale: f64,
    pub tau_gamma: f64,
}

/// What `validate` learned about a schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleReport {
    /// Exponent of `β_k = α_k γ_k`, i.e. `τ_α − τ_γ`.
    pub tau_beta: f64,
}

impl Schedule {
    pub fn new(alpha_scale: f64, tau_alpha: f64, gamma_scale: f64, tau_gamma: f64) -> Self {
        Self {
            alpha_scale,
            tau_alpha,
            gamma_scale,
            tau_gamma,
        }
    }

    /// Check `½ < τ_γ < τ_α ≤ 1` and positive scales.
    pub fn validate(&self) -> Result<ScheduleReport> {
        let bad = |m: &str| Err(Error::Schedule(m.to_string()));
        if !(self.alpha_scale > 0.0 && self.alpha_scale.is_finite()) {
            return bad("alpha_scale must be positive");
        }
        if !(self.gamma_scale > 0.0 && self.gamma_scale.is_finite()) {
            return bad("gamma_scale must be positive");
        }
        if !(self.tau_alpha <= 1.0) {
            return bad("τ_α > 1 violates τ_α ≤ 1");
        }
        if !(self.tau_alpha > 0.5) {
            return bad("τ_α ≤ ½ violates ½ < τ_γ < τ_α");
        }
        if !(self.tau_gamma > 0.5) {
            return bad("τ_γ ≤ ½ violates ½ < τ_γ");
        }
        if !(self.tau_gamma < self.tau_alpha) {
            return bad("τ_γ < τ_α violated");
        }
        Ok(ScheduleReport {
            tau_beta: self.tau_alpha - self.tau_gamma,
        })
    }

    pub fn alpha(&self, k: u64) -> f64 {
        self.alpha_scale * (k as f64).powf(-self.tau_alpha)
    }

    pub fn gamma(&self, k: u64) -> f64 {
        self.gamma_scale * (k as f64).powf(self.tau_gamma)
    }

    /// `β_k = α_k γ_k`, the weight on neighbor differences.
    pub fn beta(&self, k: u64) -> f64 {
        self.alpha(k) * self.gamma(k)
    }
}

/// Running sum `ζ_k = Σ_{j≤k} α_j`. Starts at `k = 0`, `ζ_0 = 0`.
#[derive(Debug, Clone)]
pub struct ElapsedClock {
    schedule: Schedule,
    k: u64,
    zeta: f64,
}

impl ElapsedClock {
    pub fn new(schedule: Schedule) -> Self {
        Self {
            schedule,
            k: 0,
            zeta: 0.0,
        }
    }

    pub fn step(&self) -> u64 {
        self.k
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    /// Move to `k + 1` and return `ζ_{k+1}`.
    pub fn advance(&mut self) -> f64 {
        self.k += 1;
        self.zeta += self.schedule.alpha(self.k);
        self.zeta
    }
}

/// `t ↦ scale · t^exponent` with its derivative and integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaCurve {
    pub scale: f64,
    pub exponent: f64,
}

impl GammaCurve {
    pub fn new(scale: f64, exponent: f64) -> Self {
        Self { scale, exponent }
    }

    /// `γ_t ≡ c`.
    pub fn constant(c: f64) -> Self {
        Self::new(c, 0.0)
    }

    pub fn value(&self, t: f64) -> f64 {
        if self.exponent == 0.0 {
            self.scale
        } else {
            self.scale * t.powf(self.exponent)
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        if self.exponent == 0.0 {
            0.0
        } else {
            self.scale * self.exponent * t.powf(self.exponent - 1.0)
        }
    }

    /// `∫_a^b γ_s ds` for `0 ≤ a ≤ b`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        let p = self.exponent + 1.0;
        self.scale * (b.powf(p) - a.powf(p)) / p
    }
}

/// `γ_t = g t^{τ_γ}`, which equals `γ_k` at every integer `t = k`.
pub fn interpolate_gamma(schedule: &Schedule) -> GammaCurve {
    GammaCurve::new(schedule.gamma_scale, schedule.tau_gamma)
}

/// Grid values of `γ_t ∫_{t0}^t e^{−∫_τ^t γ} e^{−α(τ − t0)} dτ`.
#[derive(Debug, Clone)]
pub struct GammaConditionReport {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub peak: f64,
    pub terminal: f64,
    /// Recorded values are nonincreasing from the peak onward.
    pub decreasing_tail: bool,
}

/// Default quadrature step for [`gamma_condition_check`].
pub const GAMMA_CHECK_STEP: f64 = 1e-3;
/// Largest number of quadrature steps accepted.
pub const GAMMA_CHECK_BUDGET: usize = 10_000_000;

/// Evaluate the quantity on a uniform grid with an exponential recurrence:
/// `I(t+h) = e^{−ΔΓ} I(t) + ∫_t^{t+h} …`, the last integral by the trapezoid
/// rule. About 200 evenly spaced values are kept.
pub fn gamma_condition_check(
    gamma: &GammaCurve,
    t0: f64,
    alpha_decay: f64,
    horizon: f64,
) -> Result<GammaConditionReport> {
    if !(alpha_decay > 0.0) {
        return Err(Error::Parameter("alpha_decay must be positive".into()));
    }
    if !(horizon >= t0) || !(t0 > 0.0) {
        return Err(Error::Parameter("need 0 < t0 ≤ horizon".into()));
    }
    let span = horizon - t0;
    let n = (span / GAMMA_CHECK_STEP).ceil() as usize;
    if n > GAMMA_CHECK_BUDGET {
        return Err(Error::Quadrature(format!(
            "{n} steps exceed the budget of {GAMMA_CHECK_BUDGET}"
        )));
    }
    let h = if n == 0 { 0.0 } else { span / n as f64 };
    let every = (n / 200).max(1);
    let mut times = vec![t0];
    let mut values = vec![0.0];
    let mut integral = 0.0;
    for i in 0..n {
        let a = t0 + i as f64 * h;
        let b = a + h;
        let decay = (-gamma.integral(a, b)).exp();
        let ea = (-alpha_decay * (a - t0)).exp();
        let eb = (-alpha_decay * (b - t0)).exp();
        integral = decay * integral + 0.5 * h * (decay * ea + eb);
        if (i + 1) % every == 0 || i + 1 == n {
            times.push(b);
            values.push(gamma.value(b) * integral);
        }
    }
    let (ipeak, &peak) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let decreasing_tail = values[ipeak..].windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    Ok(GammaConditionReport {
        terminal: *values.last().unwrap(),
        times,
        values,
        peak,
        decreasing_tail,
    })
}
