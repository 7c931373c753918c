//! q-adic Haar and Faber-Schauder basis functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_branch(q: u32, ell: u32) -> Result<()> {
    if q < 2 {
        return Err(Error::param(format!("base q must be >= 2, got {q}")));
    }
    if ell == 0 || ell >= q {
        return Err(Error::range(format!("branch {ell} not in 1..={}", q - 1)));
    }
    Ok(())
}

/// Entry `gamma_{ell,d}` of the q-adic Haar weight matrix.
pub fn gamma(q: u32, ell: u32, d: u32) -> Result<f64> {
    check_branch(q, ell)?;
    if d >= q {
        return Err(Error::range(format!("child {d} not in 0..{q}")));
    }
    Ok(gamma_unchecked(q, ell, d))
}

#[inline]
pub(crate) fn gamma_unchecked(q: u32, ell: u32, d: u32) -> f64 {
    let (qf, l) = (q as f64, ell as f64);
    if d < ell {
        (qf / (l * (l + 1.0))).sqrt()
    } else if d == ell {
        -(qf * l / (l + 1.0)).sqrt()
    } else {
        0.0
    }
}

/// The full `(q-1) x q` matrix of Haar weights, row `ell - 1` holding
/// `gamma_{ell,0..q}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaMatrix {
    pub q: u32,
    pub rows: Vec<Vec<f64>>,
}

impl GammaMatrix {
    pub fn new(q: u32) -> Result<Self> {
        if q < 2 {
            return Err(Error::param(format!("base q must be >= 2, got {q}")));
        }
        let rows = (1..q)
            .map(|ell| (0..q).map(|d| gamma_unchecked(q, ell, d)).collect())
            .collect();
        Ok(Self { q, rows })
    }

    pub fn row(&self, ell: u32) -> &[f64] {
        &self.rows[ell as usize - 1]
    }

    /// `max_ell |sum_d gamma_{ell,d}|`.
    pub fn max_row_sum(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.iter().sum::<f64>().abs())
            .fold(0.0, f64::max)
    }

    /// `max |(1/q) sum_d gamma_{ell,d} gamma_{ell',d} - delta|`.
    pub fn max_orthonormality_error(&self) -> f64 {
        let q = self.q as f64;
        let mut worst: f64 = 0.0;
        for (i, a) in self.rows.iter().enumerate() {
            for (j, b) in self.rows.iter().enumerate() {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / q;
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    /// Running sums `sum_{d' < d} gamma_{ell,d'}` for `d = 0..q`.
    pub(crate) fn prefix_sums(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| {
                let mut acc = 0.0;
                r.iter()
                    .map(|g| {
                        let before = acc;
                        acc += g;
                        before
                    })
                    .collect()
            })
            .collect()
    }
}

/// `eta_d(a) = sum_ell a_ell gamma_{ell,d}`.
pub fn eta(a: &[f64], q: u32, d: u32) -> Result<f64> {
    if q < 2 {
        return Err(Error::param(format!("base q must be >= 2, got {q}")));
    }
    if a.len() != q as usize - 1 {
        return Err(Error::param(format!(
            "branch weights need {} entries, got {}",
            q - 1,
            a.len()
        )));
    }
    if d >= q {
        return Err(Error::range(format!("child {d} not in 0..{q}")));
    }
    Ok(a.iter()
        .enumerate()
        .map(|(i, &w)| w * gamma_unchecked(q, i as u32 + 1, d))
        .sum())
}

/// All `eta_0(a), ..., eta_{q-1}(a)`.
pub fn eta_vector(a: &[f64], q: u32) -> Result<Vec<f64>> {
    (0..q).map(|d| eta(a, q, d)).collect()
}

fn check_cell(q: u32, m: u32, k: u64, ell: u32) -> Result<f64> {
    check_branch(q, ell)?;
    let count = (q as f64).powi(m as i32);
    if (k as f64) >= count {
        return Err(Error::range(format!("cell index {k} >= {q}^{m}")));
    }
    Ok(count)
}

/// `psi_{m,k,ell}(t) = q^{m/2} gamma_{ell, d(t)}` on the support
/// `[k/q^m, (k+1)/q^m)`, with half-open children.
pub fn haar_eval(q: u32, m: u32, k: u64, ell: u32, t: f64) -> Result<f64> {
    let count = check_cell(q, m, k, ell)?;
    let lo = k as f64 / count;
    let hi = (k + 1) as f64 / count;
    if !(t >= lo && t < hi) {
        return Ok(0.0);
    }
    let local = t * count - k as f64;
    let d = ((local * q as f64).floor() as i64).clamp(0, q as i64 - 1) as u32;
    Ok(count.sqrt() * gamma_unchecked(q, ell, d))
}

/// `e_{m,k,ell}(t) = int_0^t psi_{m,k,ell}`, evaluated in closed form.
/// Exactly zero at and outside the endpoints of the support.
pub fn schauder_eval(q: u32, m: u32, k: u64, ell: u32, t: f64) -> Result<f64> {
    let count = check_cell(q, m, k, ell)?;
    let lo = k as f64 / count;
    let hi = (k + 1) as f64 / count;
    if t <= lo || t >= hi {
        return Ok(0.0);
    }
    let qf = q as f64;
    // local coordinate in child widths, in (0, q)
    let local = (t * count - k as f64) * qf;
    let d = (local.floor() as i64).clamp(0, q as i64 - 1) as u32;
    let frac = local - d as f64;
    let before: f64 = (0..d).map(|c| gamma_unchecked(q, ell, c)).sum();
    let integral = before + gamma_unchecked(q, ell, d) * frac;
    Ok(integral / (count.sqrt() * qf))
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: f64 = 1e-14;

    #[test]
    fn gamma_examples() {
        assert_eq!((gamma(2, 1, 0).unwrap(), gamma(2, 1, 1).unwrap()), (1.0, -1.0));
        let r = 1.5f64.sqrt();
        assert!((gamma(3, 1, 0).unwrap() - r).abs() < EPS);
        assert!((gamma(3, 1, 1).unwrap() + r).abs() < EPS);
        assert_eq!(gamma(3, 1, 2).unwrap(), 0.0);
        let s = 0.5f64.sqrt();
        assert!((gamma(3, 2, 0).unwrap() - s).abs() < EPS);
        assert!((gamma(3, 2, 1).unwrap() - s).abs() < EPS);
        assert!((gamma(3, 2, 2).unwrap() + 2f64.sqrt()).abs() < EPS);
        assert!(gamma(3, 3, 0).is_err());
        assert!(gamma(3, 0, 0).is_err());
        assert!(gamma(3, 1, 3).is_err());
    }

    #[test]
    fn gamma_rows_are_mean_zero_and_orthonormal() {
        for q in 2..=8 {
            let g = GammaMatrix::new(q).unwrap();
            assert!(g.max_row_sum() < 1e-12, "q={q}");
            assert!(g.max_orthonormality_error() < 1e-12, "q={q}");
        }
        assert_eq!(GammaMatrix::new(2).unwrap().rows, vec![vec![1.0, -1.0]]);
    }

    #[test]
    fn eta_examples() {
        assert!((eta(&[1.0, 1.0], 3, 2).unwrap() + 2f64.sqrt()).abs() < EPS);
        for d in 0..4 {
            assert_eq!(eta(&[1.0, 0.0, 0.0], 4, d).unwrap(), gamma(4, 1, d).unwrap());
        }
        let e = eta_vector(&[1.0, 1.0], 3).unwrap();
        let msq: f64 = e.iter().map(|x| x * x).sum::<f64>() / 3.0;
        assert!((msq - 2.0).abs() < 1e-12);
        assert!(eta(&[1.0], 3, 0).is_err());
    }

    #[test]
    fn haar_examples() {
        assert_eq!(haar_eval(2, 0, 0, 1, 0.25).unwrap(), 1.0);
        assert!((haar_eval(2, 1, 0, 1, 0.3).unwrap() + 2f64.sqrt()).abs() < EPS);
        assert!((haar_eval(3, 0, 0, 1, 0.5).unwrap() + 1.5f64.sqrt()).abs() < EPS);
        assert_eq!(haar_eval(2, 1, 0, 1, 0.5).unwrap(), 0.0);
        assert_eq!(haar_eval(2, 0, 0, 1, 1.0).unwrap(), 0.0);
        // right-continuous at the child boundary
        assert_eq!(haar_eval(2, 0, 0, 1, 0.5).unwrap(), -1.0);
    }

    #[test]
    fn schauder_examples() {
        assert_eq!(schauder_eval(2, 0, 0, 1, 0.5).unwrap(), 0.5);
        assert_eq!(schauder_eval(2, 0, 0, 1, 1.0).unwrap(), 0.0);
        let v = schauder_eval(2, 1, 1, 1, 0.75).unwrap();
        assert!((v - 2f64.sqrt() / 4.0).abs() < EPS);
    }

    #[test]
    fn schauder_vanishes_on_own_level_grid() {
        for q in 2..=4u32 {
            for m in 0..3u32 {
                let count = q.pow(m) as u64;
                for k in 0..count {
                    for ell in 1..q {
                        for j in 0..=count {
                            let t = j as f64 / count as f64;
                            assert_eq!(schauder_eval(q, m, k, ell, t).unwrap(), 0.0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn schauder_matches_integrated_haar() {
        // midpoint-rule integral of the Haar function on a fine grid
        for q in 2..=4u32 {
            let (m, k) = (1u32, 1u64);
            for ell in 1..q {
                let steps = 3000 * q as usize;
                let h = 1.0 / steps as f64;
                let mut acc = 0.0;
                for s in 0..steps {
                    let t = (s as f64 + 0.5) * h;
                    acc += haar_eval(q, m, k, ell, t).unwrap() * h;
                    let t_end = (s + 1) as f64 * h;
                    let exact = schauder_eval(q, m, k, ell, t_end).unwrap();
                    assert!((acc - exact).abs() < 1e-9, "q={q} ell={ell} t={t_end}");
                }
            }
        }
    }
}
