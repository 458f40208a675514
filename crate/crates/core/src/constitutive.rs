//! Scalar constitutive laws of the model.
//!
//! * `p0` is the speed obstacle as a function of averaged biomass density,
//!   `p_mu` its bounded and strictly positive regularization;
//! * `d` is the nutrient diffusivity, `f` the Monod consumption rate;
//! * `d1` is the degenerate/singular biomass diffusion potential, whose
//!   primitive `beta_hat` is the biomass energy density and whose graph is
//!   replaced in the solver by the Lipschitz surrogate `beta_reg`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical and constitutive constants (the `[model]` config section).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    /// Kinematic viscosity.
    pub nu: f64,
    /// Biomass decay rate.
    pub b: f64,
    /// Maximum biomass density.
    pub u_star: f64,
    /// Density above which biomass is solid.
    pub delta0: f64,
    /// Averaging radius of the obstacle argument.
    pub eps: f64,
    /// Regularization parameter.
    pub mu: f64,
    pub k1: f64,
    pub k2: f64,
    pub c_d: f64,
    pub c_d_prime: f64,
    /// Obstacle scale: `p0(delta0 / 2) == v_max`.
    pub v_max: f64,
    pub kappa: f64,
    pub alpha_exp: f64,
    pub gamma_exp: f64,
    /// Width of the band below `u_star` where `beta_reg` is linearized.
    pub beta_reg_lambda: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            nu: 0.05,
            b: 0.1,
            u_star: 1.0,
            delta0: 0.5,
            eps: 0.05,
            mu: 0.05,
            k1: 2.0,
            k2: 0.5,
            c_d: 0.005,
            c_d_prime: 0.01,
            v_max: 1.0,
            kappa: 0.01,
            alpha_exp: 2.0,
            gamma_exp: 1.0,
            beta_reg_lambda: 1e-3,
        }
    }
}

impl ModelParams {
    /// Checks every structural hypothesis on the constants.
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("nu", self.nu),
            ("b", self.b),
            ("u_star", self.u_star),
            ("delta0", self.delta0),
            ("eps", self.eps),
            ("mu", self.mu),
            ("k1", self.k1),
            ("k2", self.k2),
            ("c_d", self.c_d),
            ("c_d_prime", self.c_d_prime),
            ("v_max", self.v_max),
            ("kappa", self.kappa),
            ("alpha_exp", self.alpha_exp),
            ("gamma_exp", self.gamma_exp),
            ("beta_reg_lambda", self.beta_reg_lambda),
        ];
        for (name, v) in named {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Param(format!("{name} must be finite and strictly positive, got {v}")));
            }
        }
        if self.delta0 >= self.u_star {
            return Err(Error::Param(format!(
                "delta0 = {} must lie in (0, u_star = {})",
                self.delta0, self.u_star
            )));
        }
        if self.mu >= self.delta0 || self.mu >= 1.0 {
            return Err(Error::Param(format!(
                "mu = {} must lie in (0, delta0) and (0, 1) for the regularized coupled problem to be solvable",
                self.mu
            )));
        }
        let p0_mu = self.p0_unchecked(self.mu);
        if self.mu >= p0_mu {
            return Err(Error::Param(format!(
                "mu = {} must be smaller than p0(mu) = {p0_mu}",
                self.mu
            )));
        }
        if self.alpha_exp <= 1.0 {
            return Err(Error::Param(format!(
                "alpha_exp = {} must exceed 1 so that d1(r)/r -> 0 as r -> 0",
                self.alpha_exp
            )));
        }
        if self.c_d > self.c_d_prime {
            return Err(Error::Param(format!(
                "c_d = {} must not exceed c_d_prime = {}",
                self.c_d, self.c_d_prime
            )));
        }
        if self.beta_reg_lambda >= self.u_star {
            return Err(Error::Param("beta_reg_lambda must be smaller than u_star".into()));
        }
        Ok(())
    }

    fn p0_unchecked(&self, r: f64) -> f64 {
        if r >= self.delta0 {
            0.0
        } else {
            self.v_max * (self.delta0 / r - 1.0)
        }
    }

    /// Speed obstacle `p0(r) = v_max (delta0 / r - 1)` below `delta0`, zero above.
    pub fn p0(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::Param(format!("p0 is undefined at r = {r} <= 0")));
        }
        Ok(self.p0_unchecked(r))
    }

    /// Inverse of `p0` on `(0, delta0)`, i.e. the density where the speed bound equals `s`.
    pub fn p0_inv(&self, s: f64) -> f64 {
        self.delta0 * self.v_max / (self.v_max + s)
    }

    /// Regularized obstacle: `p0(mu)` on `[0, mu]`, `p0` in the middle, `mu` once `p0` drops below `mu`.
    pub fn p_mu(&self, r: f64) -> Result<f64> {
        if !(0.0..=self.u_star).contains(&r) {
            return Err(Error::Param(format!(
                "p_mu argument {r} outside [0, u_star = {}]",
                self.u_star
            )));
        }
        Ok(self.p_mu_clamped(r))
    }

    /// `p_mu` with the argument clamped into `[0, u_star]`.
    pub fn p_mu_clamped(&self, r: f64) -> f64 {
        let mu = self.mu;
        if r <= mu {
            self.p0_unchecked(mu)
        } else if r <= self.p0_inv(mu) {
            // Guard against rounding pushing the value below mu near the joint.
            self.p0_unchecked(r).max(mu)
        } else {
            mu
        }
    }

    /// Largest value of `p_mu`.
    pub fn p_mu_max(&self) -> f64 {
        self.p0_unchecked(self.mu)
    }

    /// Nutrient diffusivity, linear between `c_d_prime` (no biomass) and `c_d` (at `u_star`).
    pub fn d(&self, r: f64) -> f64 {
        let s = (r / self.u_star).clamp(0.0, 1.0);
        self.c_d_prime - (self.c_d_prime - self.c_d) * s
    }

    pub fn lipschitz_d(&self) -> f64 {
        (self.c_d_prime - self.c_d) / self.u_star
    }

    /// Monod consumption rate, continued linearly for negative concentrations.
    pub fn f(&self, w: f64) -> f64 {
        if w >= 0.0 {
            self.k1 * w / (self.k2 + w)
        } else {
            self.k1 * w / self.k2
        }
    }

    pub fn lipschitz_f(&self) -> f64 {
        self.k1 / self.k2
    }

    fn d1_unchecked(&self, r: f64) -> f64 {
        self.kappa * r.powf(self.alpha_exp) / (self.u_star - r).powf(self.gamma_exp)
    }

    fn d1_prime_unchecked(&self, r: f64) -> f64 {
        let gap = self.u_star - r;
        self.kappa
            * (self.alpha_exp * r.powf(self.alpha_exp - 1.0) / gap.powf(self.gamma_exp)
                + self.gamma_exp * r.powf(self.alpha_exp) / gap.powf(self.gamma_exp + 1.0))
    }

    /// Biomass diffusion potential `kappa r^alpha / (u_star - r)^gamma` on `[0, u_star)`.
    pub fn d1(&self, r: f64) -> Result<f64> {
        if !(0.0..self.u_star).contains(&r) {
            return Err(Error::Param(format!(
                "d1 is only defined on [0, u_star), got {r}"
            )));
        }
        Ok(self.d1_unchecked(r))
    }

    pub fn d1_prime(&self, r: f64) -> Result<f64> {
        self.d1(r)?;
        Ok(self.d1_prime_unchecked(r))
    }

    /// Density above which `beta_reg` continues linearly.
    pub fn beta_reg_knee(&self) -> f64 {
        self.u_star - self.beta_reg_lambda
    }

    /// Slope of `beta_reg` above the knee.
    pub fn beta_reg_top_slope(&self) -> f64 {
        self.d1_prime_unchecked(self.beta_reg_knee())
    }

    /// Single-valued Lipschitz surrogate of the biomass diffusion graph.
    pub fn beta_reg(&self, r: f64) -> f64 {
        let knee = self.beta_reg_knee();
        let lambda = self.beta_reg_lambda;
        if r < 0.0 {
            r / lambda
        } else if r <= knee {
            self.d1_unchecked(r)
        } else {
            self.d1_unchecked(knee) + (r - knee) * self.beta_reg_top_slope()
        }
    }

    pub fn beta_reg_prime(&self, r: f64) -> f64 {
        let knee = self.beta_reg_knee();
        if r < 0.0 {
            1.0 / self.beta_reg_lambda
        } else if r <= knee {
            self.d1_prime_unchecked(r)
        } else {
            self.beta_reg_top_slope()
        }
    }

    /// Inverse of `beta_reg` restricted to nonnegative values (returns 0 for `s <= 0`).
    pub fn beta_reg_inv_nonneg(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let knee = self.beta_reg_knee();
        let top = self.d1_unchecked(knee);
        if s >= top {
            return knee + (s - top) / self.beta_reg_top_slope();
        }
        // d1 is strictly increasing on [0, knee]: bisection then a few Newton steps.
        let (mut lo, mut hi) = (0.0, knee);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.d1_unchecked(mid) < s {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 * self.u_star {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Cumulative quadrature table for `beta_hat(r) = int_0^r beta_reg`.
///
/// Built once; evaluation adds a 5-point Gauss-Legendre rule on the partial
/// subinterval.
#[derive(Clone, Debug)]
pub struct BetaHat {
    params: ModelParams,
    step: f64,
    cumulative: Vec<f64>,
}

const GL5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

impl BetaHat {
    const INTERVALS: usize = 4096;

    pub fn new(params: &ModelParams) -> BetaHat {
        let knee = params.beta_reg_knee();
        let step = knee / Self::INTERVALS as f64;
        let mut cumulative = Vec::with_capacity(Self::INTERVALS + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for k in 0..Self::INTERVALS {
            let a = k as f64 * step;
            acc += gauss5(|r| params.d1_unchecked(r), a, a + step);
            cumulative.push(acc);
        }
        BetaHat {
            params: params.clone(),
            step,
            cumulative,
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn eval(&self, r: f64) -> f64 {
        let p = &self.params;
        let knee = p.beta_reg_knee();
        if r <= 0.0 {
            return 0.5 * r * r / p.beta_reg_lambda;
        }
        if r >= knee {
            let over = r - knee;
            return self.cumulative[Self::INTERVALS]
                + p.d1_unchecked(knee) * over
                + 0.5 * p.beta_reg_top_slope() * over * over;
        }
        let k = ((r / self.step) as usize).min(Self::INTERVALS - 1);
        let a = k as f64 * self.step;
        self.cumulative[k] + gauss5(|s| p.d1_unchecked(s), a, r)
    }
}

fn gauss5(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    GL5_NODES
        .iter()
        .zip(GL5_WEIGHTS.iter())
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}
