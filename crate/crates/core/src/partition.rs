//! Dyadic, q-adic and general q-refining partition sequences.
//!
//! Grid points are rendered to `f64` from exact integer ratios `i / q^n`; all
//! identities downstream are indexed by `(level, index)` rather than by the
//! real coordinate.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Default upper bound on the number of intervals of any grid built here.
pub const DEFAULT_MAX_INTERVALS: u64 = 1 << 24;

static MAX_INTERVALS: AtomicU64 = AtomicU64::new(DEFAULT_MAX_INTERVALS);

/// Current interval budget shared by every grid constructor.
pub fn max_intervals() -> u64 {
    MAX_INTERVALS.load(Ordering::Relaxed)
}

/// Overrides the interval budget for the whole process.
pub fn set_max_intervals(limit: u64) {
    MAX_INTERVALS.store(limit.max(1), Ordering::Relaxed);
}

/// `q^n` as an interval count, checked against the configured budget.
pub fn interval_count(q: u32, n: u32) -> Result<usize> {
    if q < 2 {
        return Err(Error::param(format!("branching factor q must be >= 2, got {q}")));
    }
    let limit = max_intervals() as u128;
    let mut count: u128 = 1;
    for _ in 0..n {
        count *= q as u128;
        if count > limit {
            return Err(Error::BudgetExceeded {
                what: "grid intervals",
                requested: (q as u128).saturating_pow(n),
                limit,
            });
        }
    }
    Ok(count as usize)
}

/// `q^e` for small exponents; callers have already bounded `q^e` via
/// [`interval_count`].
#[inline]
pub(crate) fn qpow(q: u32, e: u32) -> usize {
    (q as usize).pow(e)
}

/// A finite partition `0 = t_0 < ... < t_{q^n} = 1` at one level of a
/// q-refining sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionGrid {
    pub q: u32,
    pub level: u32,
    pub points: Vec<f64>,
}

impl PartitionGrid {
    /// Wraps an explicit point list after checking count, endpoints and
    /// strict monotonicity.
    pub fn from_points(q: u32, level: u32, points: Vec<f64>) -> Result<Self> {
        let count = interval_count(q, level)?;
        if points.len() != count + 1 {
            return Err(Error::param(format!(
                "level {level} of a {q}-refining grid needs {} points, got {}",
                count + 1,
                points.len()
            )));
        }
        if points[0] != 0.0 || points[count] != 1.0 {
            return Err(Error::param("grid endpoints must be exactly 0 and 1"));
        }
        if let Some(i) = points.windows(2).position(|w| !(w[0] < w[1])) {
            return Err(Error::NonMonotone(format!(
                "points {i} and {} of level {level} are not strictly increasing",
                i + 1
            )));
        }
        Ok(Self { q, level, points })
    }

    pub fn intervals(&self) -> usize {
        self.points.len() - 1
    }

    /// True when the points are exactly `i / q^level`.
    pub fn is_qadic(&self) -> bool {
        let denom = self.intervals() as f64;
        self.points
            .iter()
            .enumerate()
            .all(|(i, &t)| t == i as f64 / denom)
    }

    pub fn mesh(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Grid index holding exactly the real value `t`, if any.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let i = self.points.partition_point(|&s| s < t);
        (i < self.points.len() && self.points[i] == t).then_some(i)
    }

    /// One point per line, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.points.len() * 24);
        for t in &self.points {
            out.push_str(&format!("{t:.16e}\n"));
        }
        out
    }
}

/// The level-`n` q-adic grid `{i / q^n}`.
pub fn qadic_grid(q: u32, n: u32) -> Result<PartitionGrid> {
    let count = interval_count(q, n)?;
    let denom = count as f64;
    let points = (0..=count).map(|i| i as f64 / denom).collect();
    Ok(PartitionGrid { q, level: n, points })
}

/// Base-q digits `d_1, ..., d_n` of an interval index, least significant first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DigitVector {
    pub q: u32,
    pub digits: Vec<u32>,
}

impl DigitVector {
    /// `sum_j d_j q^{j-1}`.
    pub fn reconstruct(&self) -> u64 {
        self.digits
            .iter()
            .rev()
            .fold(0u64, |acc, &d| acc * self.q as u64 + d as u64)
    }

    /// Digit `d_j` with the 1-based indexing used for level signs.
    pub fn get(&self, j: usize) -> u32 {
        self.digits[j - 1]
    }
}

pub fn digits(k: u64, n: u32, q: u32) -> Result<DigitVector> {
    if q < 2 {
        return Err(Error::param(format!("base q must be >= 2, got {q}")));
    }
    let bound = (q as u128).checked_pow(n).unwrap_or(u128::MAX);
    if (k as u128) >= bound {
        return Err(Error::range(format!("interval index {k} >= {q}^{n}")));
    }
    let mut rest = k;
    let digits = (0..n)
        .map(|_| {
            let d = (rest % q as u64) as u32;
            rest /= q as u64;
            d
        })
        .collect();
    Ok(DigitVector { q, digits })
}

/// Index `floor(k / q^{n-m})` of the level-`m` interval containing the
/// level-`n` interval `k`.
pub fn ancestor_index(m: u32, n: u32, k: u64, q: u32) -> Result<u64> {
    if m >= n {
        return Err(Error::param(format!(
            "ancestor level {m} must be strictly coarser than level {n}"
        )));
    }
    if q < 2 {
        return Err(Error::param(format!("base q must be >= 2, got {q}")));
    }
    let span = (q as u128).checked_pow(n).unwrap_or(u128::MAX);
    if (k as u128) >= span {
        return Err(Error::range(format!("interval index {k} >= {q}^{n}")));
    }
    Ok(k / (q as u64).pow(n - m))
}

/// A finite stack of nested partitions `levels[0..=N]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RefiningTable {
    pub q: u32,
    pub levels: Vec<PartitionGrid>,
}

#[derive(Serialize, Deserialize)]
struct RefiningTableRecord {
    q: u32,
    levels: Vec<Vec<f64>>,
}

impl RefiningTable {
    /// Builds a table from raw point lists, checking each level's shape but
    /// not the nesting (see [`validate_refining`]).
    pub fn new(q: u32, levels: Vec<Vec<f64>>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::param("refining table has no levels"));
        }
        let levels = levels
            .into_iter()
            .enumerate()
            .map(|(n, pts)| PartitionGrid::from_points(q, n as u32, pts))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { q, levels })
    }

    /// The q-adic sequence itself, levels `0..=depth`.
    pub fn qadic(q: u32, depth: u32) -> Result<Self> {
        let levels = (0..=depth).map(|n| qadic_grid(q, n)).collect::<Result<_>>()?;
        Ok(Self { q, levels })
    }

    /// Levels `t_i^n = f(i / q^n)` for an increasing bijection `f` of [0,1].
    /// Nesting is exact because `i / q^n` and `qi / q^{n+1}` round to the
    /// same float.
    pub fn from_map(q: u32, depth: u32, f: impl Fn(f64) -> f64) -> Result<Self> {
        let levels = (0..=depth)
            .map(|n| {
                let grid = qadic_grid(q, n)?;
                let pts = grid.points.iter().map(|&t| f(t)).collect();
                PartitionGrid::from_points(q, n, pts)
            })
            .collect::<Result<_>>()?;
        Ok(Self { q, levels })
    }

    /// The table `t_i^n = (i / q^n)^2`.
    pub fn squared(q: u32, depth: u32) -> Result<Self> {
        Self::from_map(q, depth, |t| t * t)
    }

    /// Random refinement: each interval is cut at `q - 1` sorted uniform
    /// positions, with cut weights kept away from zero so the table stays
    /// strictly increasing.
    pub fn random(q: u32, depth: u32, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut levels = vec![PartitionGrid { q, level: 0, points: vec![0.0, 1.0] }];
        for n in 1..=depth {
            let count = interval_count(q, n)?;
            let prev = &levels[n as usize - 1].points;
            let mut pts = Vec::with_capacity(count + 1);
            for w in prev.windows(2) {
                let (a, b) = (w[0], w[1]);
                let mut weights: Vec<f64> = (0..q).map(|_| rng.gen_range(0.25..1.0)).collect();
                let total: f64 = weights.iter().sum();
                weights.iter_mut().for_each(|x| *x /= total);
                pts.push(a);
                let mut acc = 0.0;
                for wt in &weights[..q as usize - 1] {
                    acc += wt;
                    pts.push(a + (b - a) * acc);
                }
            }
            pts.push(1.0);
            levels.push(PartitionGrid::from_points(q, n, pts)?);
        }
        Ok(Self { q, levels })
    }

    pub fn depth(&self) -> u32 {
        (self.levels.len() - 1) as u32
    }

    pub fn finest(&self) -> &PartitionGrid {
        self.levels.last().expect("table is nonempty")
    }

    pub fn to_json(&self) -> Result<String> {
        let rec = RefiningTableRecord {
            q: self.q,
            levels: self.levels.iter().map(|g| g.points.clone()).collect(),
        };
        Ok(serde_json::to_string(&rec)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let rec: RefiningTableRecord = serde_json::from_str(s)?;
        Self::new(rec.q, rec.levels)
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn content_hash(&self) -> String {
        let json = self.to_json().unwrap_or_default();
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// Outcome of checking `t_i^n = t_{qi}^{n+1}` on every stored level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefiningReport {
    /// `(level n, index i)` pairs where the nesting identity fails.
    pub violations: Vec<(u32, usize)>,
    pub top_mesh: f64,
    pub mesh_threshold: f64,
    pub passed: bool,
}

/// Default mesh threshold used as a finite stand-in for density.
pub const DEFAULT_MESH_THRESHOLD: f64 = 0.5;

pub fn validate_refining(table: &RefiningTable) -> RefiningReport {
    validate_refining_with(table, DEFAULT_MESH_THRESHOLD)
}

pub fn validate_refining_with(table: &RefiningTable, mesh_threshold: f64) -> RefiningReport {
    let q = table.q as usize;
    let mut violations = Vec::new();
    for (n, pair) in table.levels.windows(2).enumerate() {
        let (coarse, fine) = (&pair[0], &pair[1]);
        if fine.points.len() != q * coarse.intervals() + 1 {
            violations.push((n as u32, usize::MAX));
            continue;
        }
        for (i, &t) in coarse.points.iter().enumerate() {
            if fine.points[q * i] != t {
                violations.push((n as u32, i));
            }
        }
    }
    let top_mesh = table.finest().mesh();
    let passed = violations.is_empty() && top_mesh <= mesh_threshold;
    RefiningReport { violations, top_mesh, mesh_threshold, passed }
}

/// Paired tables `(s_i, i / q^N)` realizing the time change `phi` at the
/// finest stored level and its inverse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomeomorphismTable {
    pub q: u32,
    pub depth: u32,
    /// Refining-sequence points `s_i = t_i^N`.
    pub source: Vec<f64>,
    /// Matching q-adic points `i / q^N`.
    pub target: Vec<f64>,
    pub table_hash: String,
}

pub fn build_homeomorphism(table: &RefiningTable) -> Result<HomeomorphismTable> {
    let report = validate_refining_with(table, 1.0);
    if !report.violations.is_empty() {
        let (n, i) = report.violations[0];
        return Err(Error::NonMonotone(format!(
            "table is not q-refining at level {n}, index {i}"
        )));
    }
    let finest = table.finest();
    if let Some(i) = finest.points.windows(2).position(|w| !(w[0] < w[1])) {
        return Err(Error::NonMonotone(format!("finest level decreases at index {i}")));
    }
    let target = qadic_grid(table.q, finest.level)?.points;
    Ok(HomeomorphismTable {
        q: table.q,
        depth: finest.level,
        source: finest.points.clone(),
        target,
        table_hash: table.content_hash(),
    })
}

fn interpolate(xs: &[f64], ys: &[f64], t: f64) -> f64 {
    let last = xs.len() - 1;
    if t <= xs[0] {
        return ys[0];
    }
    if t >= xs[last] {
        return ys[last];
    }
    let i = xs.partition_point(|&s| s <= t) - 1;
    if xs[i] == t {
        return ys[i];
    }
    let w = (t - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] + w * (ys[i + 1] - ys[i])
}

impl HomeomorphismTable {
    /// `phi(t)`: exact at table points, piecewise linear between them.
    pub fn forward(&self, t: f64) -> f64 {
        interpolate(&self.source, &self.target, t)
    }

    /// `phi^{-1}(u)`: exact at q-adic points of the finest level.
    pub fn inverse(&self, u: f64) -> f64 {
        interpolate(&self.target, &self.source, u)
    }

    /// Level-`n` refining points `t_i^n = s_{i q^{N-n}}`.
    pub fn level_points(&self, n: u32) -> Result<Vec<f64>> {
        if n > self.depth {
            return Err(Error::InsufficientLevels {
                needed: n as usize,
                available: self.depth as usize,
            });
        }
        let stride = qpow(self.q, self.depth - n);
        Ok(self.source.iter().step_by(stride).copied().collect())
    }

    pub fn level_grid(&self, n: u32) -> Result<PartitionGrid> {
        PartitionGrid::from_points(self.q, n, self.level_points(n)?)
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.source.windows(2).all(|w| w[0] < w[1])
            && self.target.windows(2).all(|w| w[0] < w[1])
            && self.source[0] == 0.0
            && *self.source.last().unwrap() == 1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_grids() {
        assert_eq!(qadic_grid(2, 0).unwrap().points, vec![0.0, 1.0]);
        assert_eq!(qadic_grid(2, 2).unwrap().points, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(qadic_grid(3, 1).unwrap().points, vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]);
    }

    #[test]
    fn grid_budget_guard() {
        assert!(matches!(qadic_grid(2, 40), Err(Error::BudgetExceeded { .. })));
        assert!(qadic_grid(1, 3).is_err());
    }

    #[test]
    fn digit_examples() {
        assert_eq!(digits(71, 5, 3).unwrap().digits, vec![2, 2, 1, 2, 0]);
        assert_eq!(digits(0, 4, 5).unwrap().digits, vec![0, 0, 0, 0]);
        assert_eq!(digits(5, 3, 2).unwrap().digits, vec![1, 0, 1]);
        assert!(digits(8, 3, 2).is_err());
    }

    #[test]
    fn ancestor_examples() {
        assert_eq!(ancestor_index(4, 5, 71, 3).unwrap(), 23);
        assert_eq!(ancestor_index(3, 5, 71, 3).unwrap(), 7);
        assert_eq!(ancestor_index(0, 6, 17, 2).unwrap(), 0);
        assert!(ancestor_index(5, 5, 3, 2).is_err());
        assert!(ancestor_index(6, 5, 3, 2).is_err());
    }

    #[test]
    fn digit_round_trip_exhaustive() {
        for q in 2..=5u32 {
            for n in 0..=8u32 {
                if (q as u64).pow(n) > 50_000 {
                    continue;
                }
                for k in 0..(q as u64).pow(n) {
                    assert_eq!(digits(k, n, q).unwrap().reconstruct(), k);
                }
            }
        }
    }

    #[test]
    fn ancestor_child_relation() {
        for q in 2..=4u32 {
            for n in 1..=6u32 {
                for k in 0..(q as u64).pow(n) {
                    let dv = digits(k, n, q).unwrap();
                    for m in 0..n - 1 {
                        let a = ancestor_index(m, n, k, q).unwrap();
                        let b = ancestor_index(m + 1, n, k, q).unwrap();
                        assert_eq!(b, q as u64 * a + dv.get((n - m) as usize) as u64);
                    }
                }
            }
        }
    }

    #[test]
    fn qadic_table_validates() {
        let t = RefiningTable::qadic(3, 5).unwrap();
        let r = validate_refining(&t);
        assert!(r.passed);
        assert!((r.top_mesh - 1.0 / 243.0).abs() < 1e-15);
    }

    #[test]
    fn squared_table_validates() {
        let t = RefiningTable::squared(2, 8).unwrap();
        assert!(validate_refining(&t).passed);
    }

    #[test]
    fn perturbed_point_is_reported() {
        let mut t = RefiningTable::qadic(2, 4).unwrap();
        t.levels[2].points[1] += 1e-3;
        let r = validate_refining(&t);
        assert!(!r.passed);
        // level 1 -> 2 nesting only touches even level-2 indices
        assert_eq!(r.violations, vec![(2, 1)]);
    }

    #[test]
    fn random_table_is_refining() {
        let t = RefiningTable::random(3, 6, 9).unwrap();
        assert!(validate_refining(&t).passed);
        assert!(!t.finest().is_qadic());
    }

    #[test]
    fn homeomorphism_on_tables() {
        let id = build_homeomorphism(&RefiningTable::qadic(2, 6).unwrap()).unwrap();
        for &s in &id.source {
            assert_eq!(id.forward(s), s);
        }
        let sq = build_homeomorphism(&RefiningTable::squared(2, 10).unwrap()).unwrap();
        for (i, &s) in sq.source.iter().enumerate() {
            assert_eq!(sq.forward(s), i as f64 / 1024.0);
            assert!((sq.forward(s) - s.sqrt()).abs() < 1e-15);
        }
        assert!(sq.is_strictly_increasing());
    }

    #[test]
    fn homeomorphism_inverse_pairing() {
        let table = RefiningTable::random(2, 12, 1).unwrap();
        let h = build_homeomorphism(&table).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let i = rng.gen_range(0..h.source.len());
            assert_eq!(h.forward(h.inverse(h.target[i])), h.target[i]);
            assert_eq!(h.inverse(h.forward(h.source[i])), h.source[i]);
        }
    }

    #[test]
    fn json_round_trip() {
        let t = RefiningTable::random(3, 3, 4).unwrap();
        let back = RefiningTable::from_json(&t.to_json().unwrap()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.content_hash(), t.content_hash());
    }

    #[test]
    fn from_points_rejects_bad_grids() {
        assert!(PartitionGrid::from_points(2, 1, vec![0.0, 0.7, 0.6]).is_err());
        assert!(PartitionGrid::from_points(2, 1, vec![0.0, 0.5]).is_err());
        assert!(PartitionGrid::from_points(2, 1, vec![0.1, 0.5, 1.0]).is_err());
    }
}
