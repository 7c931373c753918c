//! Pathwise Föllmer-Itô sums, change-of-variable residuals, grid norms and
//! stability bounds.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schauder::SampledPath;
use crate::variation::{abs_pow, check_p, cumulative_sums, pvar_profile_full, stieltjes_against_profile};

type Deriv = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `f` together with its derivatives `f, f', ..., f^{(order)}`.
#[derive(Clone)]
pub struct FunctionWithDerivatives {
    pub label: String,
    derivs: Vec<Deriv>,
}

impl fmt::Debug for FunctionWithDerivatives {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FunctionWithDerivatives({}, order {})", self.label, self.order())
    }
}

impl FunctionWithDerivatives {
    /// User-supplied derivatives; `derivs[k]` evaluates `f^{(k)}`.
    pub fn custom(label: impl Into<String>, derivs: Vec<Deriv>) -> Result<Self> {
        if derivs.is_empty() {
            return Err(Error::param("need at least f itself"));
        }
        Ok(Self { label: label.into(), derivs })
    }

    /// `sum_i c_i y^i` with exact derivatives up to `order`.
    pub fn polynomial(coeffs: &[f64], order: usize) -> Self {
        let mut cur = coeffs.to_vec();
        let mut derivs: Vec<Deriv> = Vec::with_capacity(order + 1);
        for _ in 0..=order {
            let c = cur.clone();
            derivs.push(Arc::new(move |y| c.iter().rev().fold(0.0, |acc, a| acc * y + a)));
            cur = cur.iter().enumerate().skip(1).map(|(i, a)| a * i as f64).collect();
        }
        Self { label: format!("poly{coeffs:?}"), derivs }
    }

    /// `y^k` with derivatives up to `order`.
    pub fn monomial(k: usize, order: usize) -> Self {
        let mut c = vec![0.0; k + 1];
        c[k] = 1.0;
        let mut f = Self::polynomial(&c, order);
        f.label = format!("y^{k}");
        f
    }

    pub fn exp(order: usize) -> Self {
        let derivs: Vec<Deriv> = (0..=order).map(|_| Arc::new(f64::exp) as Deriv).collect();
        Self { label: "exp".into(), derivs }
    }

    pub fn order(&self) -> usize {
        self.derivs.len() - 1
    }

    pub fn eval(&self, k: usize, y: f64) -> f64 {
        (self.derivs[k])(y)
    }

    /// Compares each `f^{(k)}` with a central difference of `f^{(k-1)}`
    /// (step `1e-5`); returns the worst relative error.
    pub fn finite_difference_check(&self, points: &[f64]) -> f64 {
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for k in 1..=self.order() {
            for &y in points {
                let fd = (self.eval(k - 1, y + h) - self.eval(k - 1, y - h)) / (2.0 * h);
                let exact = self.eval(k, y);
                worst = worst.max((fd - exact).abs() / exact.abs().max(1.0));
            }
        }
        worst
    }

    fn require(&self, order: usize) -> Result<()> {
        if self.order() < order {
            return Err(Error::param(format!(
                "{} provides derivatives up to order {}, need {order}",
                self.label,
                self.order()
            )));
        }
        Ok(())
    }
}

fn even_order(p: f64) -> Result<usize> {
    if p >= 2.0 && p.fract() == 0.0 && (p as u64) % 2 == 0 && p <= 64.0 {
        Ok(p as usize)
    } else {
        Err(Error::param(format!(
            "compensated sums need an even integer p, got {p}; non-integer p is not supported"
        )))
    }
}

/// Level-`n` compensated sums
/// `sum_{t_i < t} sum_{k=1}^{p-1} f^{(k)}(y(t_i)) / k! (Delta_i y)^k`
/// at every grid point.
pub fn follmer_sum(f: &FunctionWithDerivatives, y: &SampledPath, p: f64) -> Result<Vec<f64>> {
    let order = even_order(p)?;
    f.require(order - 1)?;
    let terms: Vec<f64> = y
        .values
        .par_windows(2)
        .map(|w| {
            let d = w[1] - w[0];
            let mut acc = 0.0;
            let mut pow = 1.0;
            let mut fact = 1.0;
            for k in 1..order {
                pow *= d;
                fact *= k as f64;
                acc += f.eval(k, w[0]) / fact * pow;
            }
            acc
        })
        .collect();
    Ok(cumulative_sums(&terms))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualProfile {
    pub level: u32,
    pub points: Vec<f64>,
    pub residual: Vec<f64>,
    pub sup: f64,
}

impl ResidualProfile {
    /// CSV with header `t,residual`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,residual\n");
        for (t, r) in self.points.iter().zip(&self.residual) {
            out.push_str(&format!("{t:.16e},{r:.16e}\n"));
        }
        out
    }
}

/// `f(y_t) - f(y_0) - follmer_sum(t) - (1/p!) int_0^t f^{(p)}(y) d[y]^{(p)}_{T^n}`
/// with the level-`n` profile of `y` as integrator.
pub fn change_of_variable_residual(f: &FunctionWithDerivatives, y: &SampledPath, p: f64) -> Result<ResidualProfile> {
    let order = even_order(p)?;
    f.require(order)?;
    let fs = follmer_sum(f, y, p)?;
    let profile = pvar_profile_full(y, p)?;
    let w = y.map(|v| f.eval(order, v))?;
    let st = stieltjes_against_profile(&w, &profile)?;
    let fact: f64 = (1..=order).map(|k| k as f64).product();
    let f0 = f.eval(0, y.values[0]);
    let residual: Vec<f64> = y
        .values
        .iter()
        .zip(fs.iter().zip(&st))
        .map(|(&v, (&a, &b))| f.eval(0, v) - f0 - a - b / fact)
        .collect();
    let sup = residual.iter().fold(0.0, |m: f64, r| m.max(r.abs()));
    Ok(ResidualProfile { level: y.level(), points: y.points().to_vec(), residual, sup })
}

/// Grid-restricted norms for multipliers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormSelector {
    Holder { alpha: f64 },
    TvPlusSup,
    Lp { p: f64 },
    Sup,
}

/// Largest grid the all-pairs Hölder quotient accepts.
pub const MAX_HOLDER_POINTS: usize = (1 << 12) + 1;

impl NormSelector {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NormSelector::Holder { alpha } if !(alpha > 0.0 && alpha < 1.0) => {
                Err(Error::param(format!("Hölder exponent must lie in (0,1), got {alpha}")))
            }
            NormSelector::Lp { p } if !(p >= 1.0 && p.is_finite()) => {
                Err(Error::param(format!("L^p exponent must be >= 1, got {p}")))
            }
            _ => Ok(()),
        }
    }

    /// Grid-level embedding constant `K_{B,p}`.
    pub fn embedding_constant(&self) -> f64 {
        1.0
    }
}

/// `sup_{s < t} |g(t) - g(s)| / (t - s)^alpha` over all grid pairs.
pub fn holder_quotient(g: &SampledPath, alpha: f64) -> Result<f64> {
    let n = g.values.len();
    if n > MAX_HOLDER_POINTS {
        return Err(Error::BudgetExceeded {
            what: "Hölder grid points",
            requested: n as u128,
            limit: MAX_HOLDER_POINTS as u128,
        });
    }
    let (pts, vals) = (g.points(), &g.values);
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let mut worst: f64 = 0.0;
            for j in i + 1..n {
                worst = worst.max((vals[j] - vals[i]).abs() / (pts[j] - pts[i]).powf(alpha));
            }
            worst
        })
        .reduce(|| 0.0, f64::max))
}

pub fn grid_norm(g: &SampledPath, selector: &NormSelector) -> Result<f64> {
    selector.validate()?;
    let sup = g.sup_norm();
    Ok(match *selector {
        NormSelector::Sup => sup,
        NormSelector::Holder { alpha } => g.values[0].abs() + holder_quotient(g, alpha)?,
        NormSelector::TvPlusSup => sup + g.values.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>(),
        NormSelector::Lp { p } => {
            let pts = g.points();
            let s: f64 = (0..pts.len() - 1).map(|i| abs_pow(g.values[i], p) * (pts[i + 1] - pts[i])).sum();
            s.powf(1.0 / p)
        }
    })
}

/// `grid_norm(y / xbar)` for a strictly positive `xbar` on the same grid.
pub fn transported_norm(y: &SampledPath, xbar: &SampledPath, selector: &NormSelector) -> Result<f64> {
    positive(xbar)?;
    grid_norm(&y.zip_with(xbar, |a, b| a / b)?, selector)
}

fn positive(xbar: &SampledPath) -> Result<()> {
    match xbar.values.iter().find(|&&v| !(v > 0.0)) {
        Some(v) => Err(Error::param(format!("reference must be strictly positive, found {v}"))),
        None => Ok(()),
    }
}

/// An element `g xbar` of the transported space, kept in factored form.
#[derive(Debug, Clone)]
pub struct Transported {
    pub g: SampledPath,
    pub xbar: SampledPath,
}

impl Transported {
    pub fn new(g: SampledPath, xbar: SampledPath) -> Result<Self> {
        g.ensure_same_grid(&xbar)?;
        positive(&xbar)?;
        Ok(Self { g, xbar })
    }

    pub fn path(&self) -> SampledPath {
        self.g.zip_with(&self.xbar, |a, b| a * b).expect("same grid")
    }

    /// `||g xbar||_L = ||g||_B`.
    pub fn norm(&self, selector: &NormSelector) -> Result<f64> {
        grid_norm(&self.g, selector)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityBound {
    /// `sup_t |C_p int_0^t (|g1|^p - |g2|^p) du|`.
    pub lhs: f64,
    /// `C_p || |g1|^p - |g2|^p ||_{L^1}`.
    pub rhs_l1: f64,
    /// `p C_p K^p (||g1||^{p-1} + ||g2||^{p-1}) ||g1 - g2||`.
    pub rhs_local_lip: f64,
}

impl StabilityBound {
    pub fn ordered(&self) -> bool {
        self.lhs <= self.rhs_l1 && self.rhs_l1 <= self.rhs_local_lip
    }
}

/// Both bounds on the gap between the predicted profiles of `g1 x` and
/// `g2 x` when `[x]^{(p)}(t) = C_p t`. All integrals use the same
/// left-endpoint quadrature, so `lhs <= rhs_l1` holds exactly.
pub fn stability_bound(
    g1: &SampledPath,
    g2: &SampledPath,
    p: f64,
    c_p: f64,
    selector: &NormSelector,
) -> Result<StabilityBound> {
    check_p(p)?;
    g1.ensure_same_grid(g2)?;
    let pts = g1.points();
    let terms: Vec<f64> = (0..pts.len() - 1)
        .map(|i| c_p * (abs_pow(g1.values[i], p) - abs_pow(g2.values[i], p)) * (pts[i + 1] - pts[i]))
        .collect();
    let mut run = 0.0;
    let mut lhs: f64 = 0.0;
    let mut rhs_l1 = 0.0;
    for t in &terms {
        run += t;
        lhs = lhs.max(run.abs());
        rhs_l1 += t.abs();
    }
    let k = selector.embedding_constant();
    let n1 = grid_norm(g1, selector)?;
    let n2 = grid_norm(g2, selector)?;
    let diff = grid_norm(&g1.zip_with(g2, |a, b| a - b)?, selector)?;
    let rhs_local_lip = p * c_p * k.powf(p) * (n1.powf(p - 1.0) + n2.powf(p - 1.0)) * diff;
    Ok(StabilityBound { lhs, rhs_l1, rhs_local_lip })
}
