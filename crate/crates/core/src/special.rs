//! Log-gamma, digamma and trigamma on the positive half-line, plus seeded
//! beta variates in the mean/precision parametrization.
//!
//! The polygamma functions shift the argument upward with the recurrences
//! `ψ(x) = ψ(x+1) − 1/x` and `ψ′(x) = ψ′(x+1) + 1/x²` until `x ≥ 6`, then
//! evaluate the Bernoulli asymptotic series. `ln Γ` uses Taylor series about
//! 2 in the awkward region around its zeros at 1 and 2 and Stirling's series
//! for large arguments.

use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};

/// Deterministic, stream-addressable generator. Each Monte Carlo replication
/// owns the stream with its index, so replications are independent of the
/// order in which they are executed.
pub type RandomStream = ChaCha8Rng;

/// Opens stream `stream` of the generator keyed by `seed`.
pub fn random_stream(seed: u64, stream: u64) -> RandomStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A strictly positive, finite real.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct PositiveReal(f64);

impl PositiveReal {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 {
            Ok(Self(value))
        } else {
            Err(Error::domain("positive real argument", value))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for PositiveReal {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;
const ASYMPTOTIC_THRESHOLD: f64 = 6.0;

/// B_2, B_4, ..., B_28.
const BERNOULLI_EVEN: [f64; 14] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
    854513.0 / 138.0,
    -236364091.0 / 2730.0,
    8553103.0 / 6.0,
    -23749461029.0 / 870.0,
];

const ZETA_TERMS: usize = 48;

/// `ζ(k) − 1` for `k = 2..ZETA_TERMS+2`, by direct summation with an
/// Euler–Maclaurin tail.
fn zeta_minus_one() -> &'static [f64; ZETA_TERMS] {
    static TABLE: OnceLock<[f64; ZETA_TERMS]> = OnceLock::new();
    TABLE.get_or_init(|| {
        const CUT: f64 = 64.0;
        let mut table = [0.0; ZETA_TERMS];
        for (i, slot) in table.iter_mut().enumerate() {
            let k = (i + 2) as f64;
            let head: f64 = (2..64).rev().map(|j| (j as f64).powf(-k)).sum();
            let tail = CUT.powf(1.0 - k) / (k - 1.0) + 0.5 * CUT.powf(-k) + k * CUT.powf(-k - 1.0) / 12.0
                - k * (k + 1.0) * (k + 2.0) * CUT.powf(-k - 3.0) / 720.0
                + k * (k + 1.0) * (k + 2.0) * (k + 3.0) * (k + 4.0) * CUT.powf(-k - 5.0) / 30240.0;
            *slot = head + tail;
        }
        table
    })
}

/// `ln Γ(2 + ε)` for `|ε| ≤ 1/2`.
fn ln_gamma_near_two(eps: f64) -> f64 {
    let zeta = zeta_minus_one();
    let mut sum = 0.0;
    // Horner-free accumulation from the smallest term upward.
    for i in (0..ZETA_TERMS).rev() {
        let k = (i + 2) as f64;
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * zeta[i] / k * eps.powi(i as i32 + 2);
    }
    (1.0 - EULER_GAMMA) * eps + sum
}

fn ln_gamma_stirling(x: f64) -> f64 {
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut correction = 0.0;
    let mut power = inv;
    for (i, b) in BERNOULLI_EVEN.iter().take(10).enumerate() {
        let two_k = 2.0 * (i + 1) as f64;
        correction += b / (two_k * (two_k - 1.0)) * power;
        power *= inv2;
    }
    (x - 0.5) * x.ln() - x + HALF_LN_2PI + correction
}

pub(crate) fn ln_gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        ln_gamma_unchecked(x + 1.0) - x.ln()
    } else if x < 1.5 {
        ln_gamma_near_two(x - 1.0) - (x - 1.0).ln_1p()
    } else if x < 2.5 {
        ln_gamma_near_two(x - 2.0)
    } else if x < 10.0 {
        let mut z = x;
        let mut product = 1.0;
        while z >= 2.5 {
            z -= 1.0;
            product *= z;
        }
        ln_gamma_near_two(z - 2.0) + product.ln()
    } else {
        ln_gamma_stirling(x)
    }
}

pub(crate) fn digamma_unchecked(x: f64) -> f64 {
    let mut z = x;
    let mut shift = 0.0;
    while z < ASYMPTOTIC_THRESHOLD {
        shift -= 1.0 / z;
        z += 1.0;
    }
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    let mut series = 0.0;
    let mut power = inv2;
    for (i, b) in BERNOULLI_EVEN.iter().enumerate() {
        series += b / (2.0 * (i + 1) as f64) * power;
        power *= inv2;
    }
    shift + z.ln() - 0.5 * inv - series
}

pub(crate) fn trigamma_unchecked(x: f64) -> f64 {
    let mut z = x;
    let mut shift = 0.0;
    while z < ASYMPTOTIC_THRESHOLD {
        shift += 1.0 / (z * z);
        z += 1.0;
    }
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    let mut series = 0.0;
    let mut power = inv2 * inv;
    for b in BERNOULLI_EVEN.iter() {
        series += b * power;
        power *= inv2;
    }
    shift + inv + 0.5 * inv2 + series
}

/// `ln Γ(x)` for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    let x = PositiveReal::new(x)?;
    Ok(ln_gamma_unchecked(x.get()))
}

/// `ψ(x) = d ln Γ(x) / dx` for `x > 0`.
pub fn digamma(x: f64) -> Result<f64> {
    let x = PositiveReal::new(x)?;
    Ok(digamma_unchecked(x.get()))
}

/// `ψ′(x)` for `x > 0`; strictly positive.
pub fn trigamma(x: f64) -> Result<f64> {
    let x = PositiveReal::new(x)?;
    Ok(trigamma_unchecked(x.get()))
}

/// Draws `y ~ Beta(μφ, (1−μ)φ)` as `G₁ / (G₁ + G₂)` with independent gamma
/// variates of shapes `μφ` and `(1−μ)φ`.
pub fn sample_beta<R: rand::Rng + ?Sized>(mu: f64, phi: f64, rng: &mut R) -> Result<f64> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::domain("beta mean", mu));
    }
    let phi = PositiveReal::new(phi)?.get();
    let shape_a = mu * phi;
    let shape_b = (1.0 - mu) * phi;
    let first = Gamma::new(shape_a, 1.0).map_err(|_| Error::domain("gamma shape", shape_a))?;
    let second = Gamma::new(shape_b, 1.0).map_err(|_| Error::domain("gamma shape", shape_b))?;
    loop {
        let g1 = first.sample(rng);
        let g2 = second.sample(rng);
        let y = g1 / (g1 + g2);
        // Tiny shapes can round the ratio onto the boundary; the open support
        // is kept by drawing again.
        if y > 0.0 && y < 1.0 {
            return Ok(y);
        }
    }
}
