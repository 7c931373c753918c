use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spec::rho;
use crate::error::{Error, Result};
use crate::partition::max_intervals;
use crate::schauder::eta_vector;
use crate::variation::{abs_pow, check_p};

/// Upper limit on the number of digit strings an exact enumeration visits.
pub const MAX_ENUMERATION: u128 = 1 << 36;
/// Upper limit on Monte Carlo sample counts.
pub const MAX_SAMPLES: u128 = 1 << 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Method {
    ExactEnumeration {
        #[serde(rename = "J")]
        j: u32,
    },
    MonteCarlo {
        #[serde(rename = "N")]
        n: u64,
        seed: u64,
    },
    ClosedForm,
}

/// `C_{p,q,a} = E |sum_{j >= 1} rho_q^j eta_{D_j}(a)|^p` with an error bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationConstant {
    pub value: f64,
    pub method: Method,
    /// Truncation bound plus, for Monte Carlo, three standard errors.
    pub error_bound: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
}

/// Parameters of the digit series `Z = sum_j rho^j eta_{D_j}`.
#[derive(Debug, Clone)]
struct Series {
    p: f64,
    q: u32,
    rho: f64,
    eta: Vec<f64>,
    /// `|a|^2 = E eta_D^2`.
    second_moment: f64,
}

impl Series {
    fn new(p: f64, q: u32, a: &[f64]) -> Result<Self> {
        check_p(p)?;
        let a: Vec<f64> = if a.is_empty() { vec![1.0; q.saturating_sub(1) as usize] } else { a.to_vec() };
        if a.iter().all(|&v| v == 0.0) {
            return Err(Error::param("branch weights must not all be zero"));
        }
        let eta = eta_vector(&a, q)?;
        let second_moment = a.iter().map(|v| v * v).sum();
        Ok(Self { p, q, rho: rho(q, p), eta, second_moment })
    }

    fn eta_max(&self) -> f64 {
        self.eta.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `sup |Z| <= max_d |eta_d| rho / (1 - rho)`.
    fn sup_bound(&self) -> f64 {
        self.eta_max() * self.rho / (1.0 - self.rho)
    }

    /// Bound on `|E|Z|^p - E|Z_J|^p|` from the Lipschitz constant of
    /// `|u|^p` on `[-M, M]` and the sup of the tail.
    fn crude_tail(&self, j: u32) -> f64 {
        let m = self.sup_bound();
        let tail = self.eta_max() * self.rho.powi(j as i32 + 1) / (1.0 - self.rho);
        self.p * (2.0 * m).powf(self.p - 1.0) * tail
    }

    /// Second-order bound using that the tail `R` is independent of `Z_J`
    /// and has mean zero, so the first-order term vanishes in expectation.
    fn refined_tail(&self, j: u32) -> f64 {
        let p = self.p;
        let er2 = self.second_moment * self.rho.powi(2 * (j as i32 + 1)) / (1.0 - self.rho * self.rho);
        if p >= 2.0 {
            0.5 * p * (p - 1.0) * self.sup_bound().powf(p - 2.0) * er2
        } else {
            2f64.powf(2.0 - p) * er2.powf(p / 2.0)
        }
    }

    fn tail_bound(&self, j: u32) -> f64 {
        self.crude_tail(j).min(self.refined_tail(j))
    }

    /// Smallest `J` whose tail bound is below `target`.
    fn truncation_for(&self, target: f64) -> u32 {
        (1..200).find(|&j| self.tail_bound(j) < target).unwrap_or(200)
    }

    /// All `q^len` partial sums `sum_{j=1}^{len} rho^j eta_{d_j}`.
    fn partial_sums(&self, len: u32) -> Vec<f64> {
        let mut sums = vec![0.0];
        let mut w = 1.0;
        for _ in 0..len {
            w *= self.rho;
            sums = sums.iter().flat_map(|s| self.eta.iter().map(move |e| s + w * e)).collect();
        }
        sums
    }
}

/// Default tail target for the exact oracle.
pub const DEFAULT_TAIL_TARGET: f64 = 1e-6;

/// Truncation depth the exact oracle uses for a given tail target.
pub fn truncation_depth(p: f64, q: u32, a: &[f64], target: f64) -> Result<u32> {
    Ok(Series::new(p, q, a)?.truncation_for(target))
}

/// Tail bound for truncating after `j` digits.
pub fn tail_bound(p: f64, q: u32, a: &[f64], j: u32) -> Result<f64> {
    Ok(Series::new(p, q, a)?.tail_bound(j))
}

pub fn variation_constant(p: f64, q: u32, a: &[f64], method: &Method) -> Result<VariationConstant> {
    let s = Series::new(p, q, a)?;
    match *method {
        Method::ExactEnumeration { j } => exact(&s, j),
        Method::MonteCarlo { n, seed } => monte_carlo(&s, n, seed),
        Method::ClosedForm => closed_form(&s),
    }
}

/// Exact enumeration with `J` picked so the tail bound is below `target`.
pub fn variation_constant_exact(p: f64, q: u32, a: &[f64], target: f64) -> Result<VariationConstant> {
    let s = Series::new(p, q, a)?;
    let j = s.truncation_for(target);
    exact(&s, j)
}

fn exact(s: &Series, j: u32) -> Result<VariationConstant> {
    if j == 0 {
        return Err(Error::param("J must be >= 1"));
    }
    let total = (s.q as u128).checked_pow(j).unwrap_or(u128::MAX);
    if total > MAX_ENUMERATION {
        return Err(Error::BudgetExceeded { what: "digit strings", requested: total, limit: MAX_ENUMERATION });
    }
    // Z_J = A + rho^{J1} B with A over the first J1 digits, B over the rest
    let j1 = j.div_ceil(2);
    let j2 = j - j1;
    let half = (s.q as u128).pow(j1);
    if half > max_intervals() as u128 {
        return Err(Error::BudgetExceeded { what: "enumeration table", requested: half, limit: max_intervals() as u128 });
    }
    let head = s.partial_sums(j1);
    let shift = s.rho.powi(j1 as i32);
    let tail: Vec<f64> = s.partial_sums(j2).into_iter().map(|b| shift * b).collect();
    let p = s.p;
    let sums: Vec<f64> = head
        .par_iter()
        .map(|&a| tail.iter().map(|&b| abs_pow(a + b, p)).sum::<f64>())
        .collect();
    let value = sums.iter().sum::<f64>() / total as f64;
    Ok(VariationConstant {
        value,
        method: Method::ExactEnumeration { j },
        error_bound: s.tail_bound(j),
        std_error: None,
    })
}

/// Number of leading digits fixed per stratum.
fn strata_depth(s: &Series, n: u64) -> u32 {
    let mut d = 0;
    while (s.q as u64).saturating_pow(d + 1).saturating_mul(16) <= n && d < 12 {
        d += 1;
    }
    d
}

/// Stratified on the leading digits: strata get equal sample counts (up to
/// one) and independent ChaCha streams.
fn monte_carlo(s: &Series, n: u64, seed: u64) -> Result<VariationConstant> {
    if n < 2 {
        return Err(Error::param("Monte Carlo needs N >= 2"));
    }
    if n as u128 > MAX_SAMPLES {
        return Err(Error::BudgetExceeded { what: "Monte Carlo samples", requested: n as u128, limit: MAX_SAMPLES });
    }
    let j = s.truncation_for(1e-9);
    let depth = strata_depth(s, n).min(j);
    let strata = (s.q as u64).pow(depth);
    let (per, extra) = (n / strata, n % strata);
    let heads = s.partial_sums(depth);
    let q = s.q;
    let stats: Vec<(f64, f64)> = heads
        .par_iter()
        .enumerate()
        .map(|(h, &head)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(h as u64);
            let count = per + u64::from((h as u64) < extra);
            let (mut mean, mut m2) = (0.0, 0.0);
            for i in 0..count {
                let mut w = s.rho.powi(depth as i32);
                let mut z = head;
                for _ in depth..j {
                    w *= s.rho;
                    z += w * s.eta[rng.gen_range(0..q) as usize];
                }
                let v = abs_pow(z, s.p);
                let delta = v - mean;
                mean += delta / (i + 1) as f64;
                m2 += delta * (v - mean);
            }
            (mean, m2 / (count - 1) as f64 / count as f64)
        })
        .collect();
    let h = strata as f64;
    let value = stats.iter().map(|s| s.0).sum::<f64>() / h;
    let var = stats.iter().map(|s| s.1).sum::<f64>() / (h * h);
    let se = var.sqrt();
    Ok(VariationConstant {
        value,
        method: Method::MonteCarlo { n, seed },
        error_bound: s.tail_bound(j) + 3.0 * se,
        std_error: Some(se),
    })
}

/// Moments of `Z` from its cumulants `kappa_r(Z) = kappa_r(eta_D) rho^r / (1 - rho^r)`.
fn closed_form(s: &Series) -> Result<VariationConstant> {
    let p = s.p;
    if p.fract() != 0.0 || (p as u64) % 2 != 0 || p > 60.0 {
        return Err(Error::param(format!("closed form needs an even integer p, got {p}")));
    }
    let n = p as usize;
    let qf = s.q as f64;
    let mu: Vec<f64> = (0..=n).map(|r| s.eta.iter().map(|e| e.powi(r as i32)).sum::<f64>() / qf).collect();
    let kx = moments_to_cumulants(&mu);
    let kz: Vec<f64> = kx
        .iter()
        .enumerate()
        .map(|(r, k)| if r == 0 { 0.0 } else { k * s.rho.powi(r as i32) / (1.0 - s.rho.powi(r as i32)) })
        .collect();
    let mz = cumulants_to_moments(&kz);
    let value = mz[n];
    Ok(VariationConstant {
        value,
        method: Method::ClosedForm,
        error_bound: 1e-13 * value.abs().max(1.0),
        std_error: None,
    })
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

pub(crate) fn moments_to_cumulants(mu: &[f64]) -> Vec<f64> {
    let mut k = vec![0.0; mu.len()];
    for n in 1..mu.len() {
        let mut acc = mu[n];
        for j in 1..n {
            acc -= binom(n - 1, j - 1) * k[j] * mu[n - j];
        }
        k[n] = acc;
    }
    k
}

pub(crate) fn cumulants_to_moments(kappa: &[f64]) -> Vec<f64> {
    let mut m = vec![0.0; kappa.len()];
    m[0] = 1.0;
    for n in 1..kappa.len() {
        m[n] = (1..=n).map(|j| binom(n - 1, j - 1) * kappa[j] * m[n - j]).sum();
    }
    m
}
