//! Special functions, quadrature and partition combinatorics.

pub mod partition;
pub mod quadrature;
pub mod special;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

pub use partition::{gen_factorial_coeff_signed, log_gen_factorial_row, v_integral_log};
pub use quadrature::{integrate, integrate_log, integrate_log_real_line, QuadOptions, QuadResult};
pub use special::{
    gauss_2f1_1bc, ln_1m_exp, ln_beta_inc, ln_gauss_2f1_1bc, log_add_exp, log_beta, log_gamma,
    log_sum_exp,
};

/// A real number stored as sign and log-magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLogValue {
    pub log_magnitude: f64,
    pub sign: i8,
}

impl SignedLogValue {
    pub fn zero() -> Self {
        Self {
            log_magnitude: f64::NEG_INFINITY,
            sign: 0,
        }
    }

    /// Positive value e^{log_value}; −∞ maps to zero.
    pub fn from_log(log_value: f64) -> Self {
        if log_value == f64::NEG_INFINITY {
            Self::zero()
        } else {
            Self {
                log_magnitude: log_value,
                sign: 1,
            }
        }
    }

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::zero()
        } else {
            Self {
                log_magnitude: x.abs().ln(),
                sign: if x > 0.0 { 1 } else { -1 },
            }
        }
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    pub fn to_f64(&self) -> f64 {
        match self.sign {
            0 => 0.0,
            s => f64::from(s) * self.log_magnitude.exp(),
        }
    }

    pub fn mul(self, other: Self) -> Self {
        if self.sign == 0 || other.sign == 0 {
            return Self::zero();
        }
        Self {
            log_magnitude: self.log_magnitude + other.log_magnitude,
            sign: self.sign * other.sign,
        }
    }

    pub fn add(self, other: Self) -> Self {
        if self.sign == 0 {
            return other;
        }
        if other.sign == 0 {
            return self;
        }
        if self.sign == other.sign {
            return Self {
                log_magnitude: log_add_exp(self.log_magnitude, other.log_magnitude),
                sign: self.sign,
            };
        }
        let (big, small) = if self.log_magnitude >= other.log_magnitude {
            (self, other)
        } else {
            (other, self)
        };
        if big.log_magnitude == small.log_magnitude {
            return Self::zero();
        }
        Self {
            log_magnitude: big.log_magnitude + ln_1m_exp(small.log_magnitude - big.log_magnitude),
            sign: big.sign,
        }
    }
}

/// Draw from the Poisson(λ) law shifted to start at `shift`.
pub fn shifted_poisson_sample<R: Rng + ?Sized>(shift: u32, lambda: f64, rng: &mut R) -> u64 {
    if !(lambda > 0.0) {
        return u64::from(shift);
    }
    let draw: f64 = Poisson::new(lambda).expect("positive rate").sample(rng);
    u64::from(shift) + draw as u64
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
