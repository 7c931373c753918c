use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::partition::{interval_count, qpow};
use crate::schauder::{eta_vector, synthesize, CoefficientArray, SampledPath};
use crate::variation::{abs_pow, check_p, pvar_total};

/// Level magnitudes `c_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Value", into = "Value")]
pub enum MagnitudeRule {
    /// `c_m = q^{m(1/2 - 1/p)}`, which makes `xi_m = 1`.
    Default,
    Explicit(Vec<f64>),
}

impl TryFrom<Value> for MagnitudeRule {
    type Error = String;
    fn try_from(v: Value) -> std::result::Result<Self, String> {
        match v {
            Value::String(s) if s == "default" => Ok(Self::Default),
            Value::Array(_) => serde_json::from_value(v).map(Self::Explicit).map_err(|e| e.to_string()),
            other => Err(format!("c_rule must be \"default\" or a list of floats, got {other}")),
        }
    }
}

impl From<MagnitudeRule> for Value {
    fn from(r: MagnitudeRule) -> Value {
        match r {
            MagnitudeRule::Default => json!("default"),
            MagnitudeRule::Explicit(c) => json!(c),
        }
    }
}

/// Coefficient signs `sigma_{m,k}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Value", into = "Value")]
pub enum SignRule {
    Plus,
    Seeded(u64),
    /// One row of `q^m` entries in `{-1, +1}` per level.
    Explicit(Vec<Vec<i8>>),
}

impl TryFrom<Value> for SignRule {
    type Error = String;
    fn try_from(v: Value) -> std::result::Result<Self, String> {
        match v {
            Value::String(s) if s == "plus" => Ok(Self::Plus),
            Value::Object(ref o) if o.len() == 1 && o.contains_key("seed") => o["seed"]
                .as_u64()
                .map(Self::Seeded)
                .ok_or_else(|| "seed must be a nonnegative integer".to_string()),
            Value::Array(_) => {
                let rows: Vec<Vec<i8>> = serde_json::from_value(v).map_err(|e| e.to_string())?;
                if rows.iter().flatten().any(|s| *s != 1 && *s != -1) {
                    return Err("explicit signs must be +1 or -1".into());
                }
                Ok(Self::Explicit(rows))
            }
            other => Err(format!("signs must be \"plus\", {{\"seed\": n}} or [[±1,...],...], got {other}")),
        }
    }
}

impl From<SignRule> for Value {
    fn from(r: SignRule) -> Value {
        match r {
            SignRule::Plus => json!("plus"),
            SignRule::Seeded(s) => json!({ "seed": s }),
            SignRule::Explicit(rows) => json!(rows),
        }
    }
}

/// Parameters of a uniform-magnitude reference path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformMagnitudeSpec {
    pub q: u32,
    pub p: f64,
    #[serde(default = "default_rule")]
    pub c_rule: MagnitudeRule,
    #[serde(default = "plus")]
    pub signs: SignRule,
    /// Branch weights `a_1..a_{q-1}`; empty means all ones.
    #[serde(default)]
    pub a: Vec<f64>,
    /// Truncation level `M`: coefficients exist for levels `0..M`.
    pub levels: u32,
}

fn default_rule() -> MagnitudeRule {
    MagnitudeRule::Default
}

fn plus() -> SignRule {
    SignRule::Plus
}

impl UniformMagnitudeSpec {
    pub fn new(q: u32, p: f64, levels: u32) -> Self {
        Self { q, p, c_rule: MagnitudeRule::Default, signs: SignRule::Plus, a: Vec::new(), levels }
    }

    pub fn with_signs(mut self, signs: SignRule) -> Self {
        self.signs = signs;
        self
    }

    pub fn with_weights(mut self, a: Vec<f64>) -> Self {
        self.a = a;
        self
    }

    pub fn with_magnitudes(mut self, c: Vec<f64>) -> Self {
        self.c_rule = MagnitudeRule::Explicit(c);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.q < 2 {
            return Err(Error::param(format!("base q must be >= 2, got {}", self.q)));
        }
        check_p(self.p)?;
        if self.levels == 0 {
            return Err(Error::param("levels must be >= 1"));
        }
        let a = self.weights();
        if a.len() != self.q as usize - 1 {
            return Err(Error::param(format!("a needs {} entries, got {}", self.q - 1, a.len())));
        }
        if a.iter().any(|v| !v.is_finite()) || a.iter().all(|&v| v == 0.0) {
            return Err(Error::param("branch weights must be finite and not all zero"));
        }
        if let MagnitudeRule::Explicit(c) = &self.c_rule {
            if c.len() < self.levels as usize {
                return Err(Error::param(format!(
                    "c_rule lists {} magnitudes for {} levels",
                    c.len(),
                    self.levels
                )));
            }
            if c.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::param("magnitudes must be finite and nonnegative"));
            }
        }
        match &self.signs {
            SignRule::Plus => {}
            _ if self.q > 2 => {
                return Err(Error::param("sign patterns are only supported for q = 2"));
            }
            SignRule::Seeded(_) => {}
            SignRule::Explicit(rows) => {
                if rows.len() < self.levels as usize {
                    return Err(Error::param("explicit signs need one row per level"));
                }
                for (m, row) in rows.iter().take(self.levels as usize).enumerate() {
                    if row.len() != qpow(self.q, m as u32) {
                        return Err(Error::param(format!("sign row {m} needs {} entries", qpow(self.q, m as u32))));
                    }
                }
            }
        }
        interval_count(self.q, self.levels)?;
        Ok(())
    }

    /// Branch weights with the all-ones default filled in.
    pub fn weights(&self) -> Vec<f64> {
        if self.a.is_empty() {
            vec![1.0; self.q.saturating_sub(1) as usize]
        } else {
            self.a.clone()
        }
    }

    pub fn c(&self, m: u32) -> f64 {
        if m >= self.levels {
            return 0.0;
        }
        match &self.c_rule {
            MagnitudeRule::Default => (self.q as f64).powf(m as f64 * (0.5 - 1.0 / self.p)),
            MagnitudeRule::Explicit(c) => c[m as usize],
        }
    }

    /// `y_m = q^{m(1/p - 1/2)} c_m`.
    pub fn y(&self, m: u32) -> f64 {
        (self.q as f64).powf(m as f64 * (1.0 / self.p - 0.5)) * self.c(m)
    }

    /// `rho_q = q^{-(1 - 1/p)}`.
    pub fn rho(&self) -> f64 {
        rho(self.q, self.p)
    }

    /// `q^{m(1 - p/2)} c_m^p`.
    pub fn xi(&self, m: u32) -> f64 {
        (self.q as f64).powf(m as f64 * (1.0 - self.p / 2.0)) * self.c(m).powf(self.p)
    }

    /// Materialized `sigma_{m,k}` for every stored level.
    pub fn sign_table(&self) -> Result<Vec<Vec<i8>>> {
        self.validate()?;
        let sizes: Vec<usize> = (0..self.levels).map(|m| qpow(self.q, m)).collect();
        Ok(match &self.signs {
            SignRule::Plus => sizes.iter().map(|&s| vec![1; s]).collect(),
            SignRule::Seeded(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                sizes
                    .iter()
                    .map(|&s| (0..s).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect())
                    .collect()
            }
            SignRule::Explicit(rows) => rows[..self.levels as usize].to_vec(),
        })
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn content_hash(&self) -> String {
        let s = serde_json::to_string(self).expect("spec serializes");
        hex::encode(Sha256::digest(s.as_bytes()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn seed(&self) -> Option<u64> {
        match self.signs {
            SignRule::Seeded(s) => Some(s),
            _ => None,
        }
    }
}

pub fn rho(q: u32, p: f64) -> f64 {
    (q as f64).powf(-(1.0 - 1.0 / p))
}

/// Coefficients `theta_{m,k} = c_m a_1 sigma_{m,k}` (q = 2) or
/// `theta_{m,k,ell} = c_m a_ell` (q >= 3) with zero boundary values.
pub fn build_reference(spec: &UniformMagnitudeSpec) -> Result<CoefficientArray> {
    let signs = spec.sign_table()?;
    let a = spec.weights();
    let levels = signs
        .iter()
        .enumerate()
        .map(|(m, row)| {
            let cm = spec.c(m as u32);
            row.iter()
                .flat_map(|&s| a.iter().map(move |&w| cm * w * s as f64))
                .collect()
        })
        .collect();
    CoefficientArray::new(spec.q, [0.0, 0.0], levels)
}

/// The reference path sampled on the level-`n` q-adic grid, tagged with the
/// spec hash.
pub fn reference_path(spec: &UniformMagnitudeSpec, n: u32) -> Result<SampledPath> {
    let mut path = synthesize(&build_reference(spec)?, n)?;
    path.meta.spec_hash = Some(spec.content_hash());
    path.meta.seed = spec.seed();
    Ok(path)
}

/// Both sides of the increment identity for one level-`n` interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementDecomposition {
    /// `q^{n/p} Delta_k^n x` from the series `sum_j rho^j y_{n-j} s_j`.
    pub value: f64,
    /// `digits[j-1] = d_j(k)`.
    pub digits: Vec<u32>,
    /// Level signs `epsilon_j(k)` (q = 2 only).
    pub signs: Option<Vec<i8>>,
}

/// Shared per-spec tables for evaluating the series quickly.
pub(crate) struct SeriesTables {
    q: u32,
    rho: f64,
    y: Vec<f64>,
    eta: Vec<f64>,
    signs: Vec<Vec<i8>>,
}

impl SeriesTables {
    pub(crate) fn new(spec: &UniformMagnitudeSpec) -> Result<Self> {
        Ok(Self {
            q: spec.q,
            rho: spec.rho(),
            y: (0..spec.levels).map(|m| spec.y(m)).collect(),
            eta: eta_vector(&spec.weights(), spec.q)?,
            signs: spec.sign_table()?,
        })
    }

    fn y(&self, m: u32) -> f64 {
        self.y.get(m as usize).copied().unwrap_or(0.0)
    }

    /// Series value and digits for interval `k` of level `n`.
    fn evaluate(&self, n: u32, k: u64) -> (f64, Vec<u32>, Vec<i8>) {
        let q = self.q as u64;
        let mut rest = k;
        let mut ds = Vec::with_capacity(n as usize);
        let mut eps = Vec::with_capacity(n as usize);
        let mut value = 0.0;
        let mut rho_j = 1.0;
        for j in 1..=n {
            let d = (rest % q) as u32;
            rest /= q;
            rho_j *= self.rho;
            let m = n - j;
            // ancestor at level m is k / q^{j}, which is `rest` now
            let sigma = self.signs.get(m as usize).map_or(1, |row| row[rest as usize]);
            let term = sigma as f64 * self.eta[d as usize];
            value += rho_j * self.y(m) * term;
            ds.push(d);
            eps.push(if self.q == 2 { sigma * if d == 0 { 1 } else { -1 } } else { 0 });
        }
        (value, ds, eps)
    }
}

pub fn increment_decomposition(spec: &UniformMagnitudeSpec, n: u32, k: u64) -> Result<IncrementDecomposition> {
    let count = interval_count(spec.q, n)? as u64;
    if k >= count {
        return Err(Error::range(format!("interval {k} >= {}^{n}", spec.q)));
    }
    let tables = SeriesTables::new(spec)?;
    let (value, ds, eps) = tables.evaluate(n, k);
    Ok(IncrementDecomposition { value, digits: ds, signs: (spec.q == 2).then_some(eps) })
}

/// `max_k |series_k - q^{n/p} (x(t_{k+1}) - x(t_k))|` over all level-`n`
/// intervals of the synthesized reference path.
pub fn increment_identity_gap(spec: &UniformMagnitudeSpec, n: u32) -> Result<f64> {
    let tables = SeriesTables::new(spec)?;
    let path = reference_path(spec, n)?;
    let scale = (spec.q as f64).powf(n as f64 / spec.p);
    Ok(path
        .values
        .par_windows(2)
        .enumerate()
        .map(|(k, w)| (tables.evaluate(n, k as u64).0 - scale * (w[1] - w[0])).abs())
        .reduce(|| 0.0, f64::max))
}

/// Outcome of the sign-pattern enumeration at one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignMatrixReport {
    pub n: u32,
    pub rows: usize,
    pub distinct_patterns: usize,
    pub bijective: bool,
    /// `[x]^{(p)}_{T^n}(1)` from the synthesized path.
    pub level_total: f64,
    /// Average of `|sum_j rho^j y_{n-j} s_j|^p` over all patterns `s`.
    pub expectation: f64,
    pub gap: f64,
}

/// Checks that `k -> (epsilon_1(k), ..., epsilon_n(k))` (q = 2) or
/// `k -> (d_1(k), ..., d_n(k))` (q >= 3) hits every pattern exactly once and
/// compares the level-`n` total with the pattern average.
pub fn sign_matrix(spec: &UniformMagnitudeSpec, n: u32) -> Result<SignMatrixReport> {
    if n == 0 || n > 20 {
        return Err(Error::BudgetExceeded { what: "sign-matrix level", requested: n as u128, limit: 20 });
    }
    let tables = SeriesTables::new(spec)?;
    let count = interval_count(spec.q, n)?;
    let q = spec.q as usize;
    let mut seen = vec![false; count];
    for k in 0..count {
        let (_, ds, eps) = tables.evaluate(n, k as u64);
        // pattern code in base q, entry j-1 most significant last
        let code = if spec.q == 2 {
            eps.iter().rev().fold(0usize, |acc, &e| acc * 2 + usize::from(e < 0))
        } else {
            ds.iter().rev().fold(0usize, |acc, &d| acc * q + d as usize)
        };
        seen[code] = true;
    }
    let distinct = seen.iter().filter(|&&s| s).count();

    // independent side: sum over patterns, not intervals
    let rho = spec.rho();
    let ys: Vec<f64> = (1..=n).map(|j| rho.powi(j as i32) * tables.y(n - j)).collect();
    let eta = &tables.eta;
    let terms: Vec<f64> = (0..count)
        .into_par_iter()
        .map(|code| {
            let mut c = code;
            let mut v = 0.0;
            for w in &ys {
                let s = if spec.q == 2 {
                    if c % 2 == 0 { 1.0 } else { -1.0 }
                } else {
                    eta[c % q]
                };
                c /= q;
                v += w * s;
            }
            abs_pow(v, spec.p)
        })
        .collect();
    let expectation = terms.iter().sum::<f64>() / count as f64;
    let level_total = pvar_total(&reference_path(spec, n)?, spec.p)?;
    Ok(SignMatrixReport {
        n,
        rows: count,
        distinct_patterns: distinct,
        bijective: distinct == count,
        level_total,
        expectation,
        gap: (level_total - expectation).abs(),
    })
}
