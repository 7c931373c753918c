//! End-to-end checks with fixed tolerances and runtime limits.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::calculus::{change_of_variable_residual, grid_norm, holder_quotient, stability_bound, FunctionWithDerivatives, NormSelector};
use crate::construct::{
    bernstein_path, build_reference, increment_identity_gap, recipe, reference_path, sign_matrix, splice,
    variation_constant, variation_constant_exact, Method, SignRule, UniformMagnitudeSpec, VariationConstant,
    DEFAULT_TAIL_TARGET,
};
use crate::error::Result;
use crate::partition::{build_homeomorphism, qadic_grid, RefiningTable};
use crate::schauder::{synthesize, xi, CoefficientArray, SampledPath};
use crate::timechange::transported_pvar_check;
use crate::variation::{coarse_indices, default_eval_indices, level_totals, pvar_profile, pvar_total};

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub limit: Duration,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2} {:<34} {:>8.3}s / {:>4.0}s  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.elapsed.as_secs_f64(),
            self.limit.as_secs_f64(),
            self.detail
        )
    }
}

type Check = fn() -> Result<(bool, String)>;

const CRITERIA: [(u8, &str, u64, Check); 12] = [
    (1, "exact dyadic level identity", 1, c01_level_identity),
    (2, "linear p-variation convergence", 10, c02_linear_pvar),
    (3, "variation constant oracles agree", 30, c03_oracles),
    (4, "sign-matrix bijection", 5, c04_sign_matrix),
    (5, "increment identity", 5, c05_increments),
    (6, "prescribed-variation recipe", 20, c06_recipe),
    (7, "q-adic convergence", 20, c07_qadic),
    (8, "Föllmer-Itô exactness", 10, c08_follmer),
    (9, "time-change transport identity", 5, c09_timechange),
    (10, "stability bounds", 5, c10_stability),
    (11, "Bernstein Hölder bound", 5, c11_bernstein),
    (12, "splice mechanics", 5, c12_splice),
];

pub fn criterion_ids() -> impl Iterator<Item = u8> {
    CRITERIA.iter().map(|c| c.0)
}

/// Runs one criterion; errors count as failures.
pub fn run_criterion(id: u8) -> Option<CriterionResult> {
    let &(id, name, secs, check) = CRITERIA.iter().find(|c| c.0 == id)?;
    let start = Instant::now();
    let outcome = check();
    let elapsed = start.elapsed();
    let limit = Duration::from_secs(secs);
    let (ok, mut detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    if elapsed > limit {
        detail.push_str(" (over time limit)");
    }
    Some(CriterionResult { id, name, passed: ok && elapsed <= limit, detail, elapsed, limit })
}

pub fn run_all() -> Vec<CriterionResult> {
    criterion_ids().filter_map(run_criterion).collect()
}

fn c01_level_identity() -> Result<(bool, String)> {
    let n = 16;
    let x = reference_path(&UniformMagnitudeSpec::new(2, 2.0, n), n)?;
    let totals = level_totals(&x, 2.0)?;
    let worst = totals
        .iter()
        .enumerate()
        .map(|(m, v)| (v - (1.0 - 2f64.powi(-(m as i32)))).abs())
        .fold(0.0, f64::max);
    Ok((worst <= 1e-12, format!("max gap {worst:.2e} over levels 0..=16")))
}

fn c02_linear_pvar() -> Result<(bool, String)> {
    let n = 16;
    let mut ok = true;
    let mut parts = Vec::new();
    for p in [2.0, 3.0, 4.0] {
        let c = variation_constant_exact(p, 2, &[], DEFAULT_TAIL_TARGET)?;
        let x = reference_path(&UniformMagnitudeSpec::new(2, p, n), n)?;
        let prof = pvar_profile(&x, p, &coarse_indices(2, n, 4))?;
        let total = prof.terminal().expect("t = 1 is an eval point");
        let gap = (total - c.value).abs();
        let lin = prof
            .values
            .iter()
            .zip(&prof.eval_points)
            .map(|(v, t)| (v - t * total).abs())
            .fold(0.0, f64::max);
        ok &= gap <= 1e-2 && lin <= 1e-2 && c.error_bound < 1e-6;
        parts.push(format!("p={p}: |V-C|={gap:.1e} lin={lin:.1e}"));
    }
    Ok((ok, parts.join("; ")))
}

/// `|a - b|` against three standard errors plus both deterministic bounds.
fn agree(a: &VariationConstant, b: &VariationConstant) -> (bool, f64) {
    let se = a.std_error.unwrap_or(0.0).hypot(b.std_error.unwrap_or(0.0));
    let det = |c: &VariationConstant| match c.std_error {
        Some(s) => c.error_bound - 3.0 * s,
        None => c.error_bound,
    };
    let gap = (a.value - b.value).abs();
    (gap <= 3.0 * se + det(a) + det(b) && gap <= 1e-3, gap)
}

fn c03_oracles() -> Result<(bool, String)> {
    let mut ok = true;
    let mut parts = Vec::new();
    for p in [2.0, 4.0] {
        let e = variation_constant_exact(p, 2, &[], DEFAULT_TAIL_TARGET)?;
        let m = variation_constant(p, 2, &[], &Method::MonteCarlo { n: 1_000_000, seed: 0 })?;
        let c = variation_constant(p, 2, &[], &Method::ClosedForm)?;
        let (a1, g1) = agree(&e, &m);
        let (a2, g2) = agree(&e, &c);
        let (a3, g3) = agree(&m, &c);
        ok &= a1 && a2 && a3;
        parts.push(format!(
            "p={p}: C={:.6} se={:.1e} gaps {g1:.1e}/{g2:.1e}/{g3:.1e}",
            c.value,
            m.std_error.unwrap_or(0.0)
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn c04_sign_matrix() -> Result<(bool, String)> {
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for signs in [SignRule::Plus, SignRule::Seeded(1)] {
        let spec = UniformMagnitudeSpec::new(2, 2.0, 12).with_signs(signs);
        for n in 1..=12 {
            let r = sign_matrix(&spec, n)?;
            ok &= r.bijective && r.gap <= 1e-12;
            worst = worst.max(r.gap);
        }
    }
    Ok((ok, format!("n=1..=12, plus and seeded; max expectation gap {worst:.1e}")))
}

fn c05_increments() -> Result<(bool, String)> {
    let mut ok = true;
    let mut parts = Vec::new();
    for (q, p) in [(2, 2.0), (2, 3.0), (3, 2.0)] {
        let gap = increment_identity_gap(&UniformMagnitudeSpec::new(q, p, 10), 10)?;
        ok &= gap <= 1e-12;
        parts.push(format!("(q={q},p={p}) {gap:.1e}"));
    }
    Ok((ok, parts.join(", ")))
}

/// `(label, h, h')` for the recipe targets.
fn recipe_targets() -> [(&'static str, fn(f64) -> f64, fn(f64) -> f64); 3] {
    [
        ("t", |t| t, |_| 1.0),
        ("e^t-1", |t| t.exp() - 1.0, f64::exp),
        ("log(1+t)", |t| t.ln_1p(), |t| 1.0 / (1.0 + t)),
    ]
}

fn recipe_path(hprime: fn(f64) -> f64, n: u32) -> Result<SampledPath> {
    let spec = UniformMagnitudeSpec::new(2, 2.0, n);
    let c = variation_constant_exact(2.0, 2, &[], DEFAULT_TAIL_TARGET)?;
    let hp = SampledPath::qadic_fn(2, n, hprime)?;
    Ok(recipe(&hp, &spec, c.value)?.y)
}

fn c06_recipe() -> Result<(bool, String)> {
    let n = 16;
    let mut ok = true;
    let mut parts = Vec::new();
    for (label, h, hp) in recipe_targets() {
        let y = recipe_path(hp, n)?;
        let prof = pvar_profile(&y, 2.0, &default_eval_indices(&y))?;
        let gap = prof
            .values
            .iter()
            .zip(&prof.eval_points)
            .map(|(v, &t)| (v - h(t)).abs())
            .fold(0.0, f64::max);
        let tol = 0.02 * (1.0 + h(1.0));
        ok &= gap <= tol;
        parts.push(format!("{label}: {gap:.1e} (tol {tol:.2})"));
    }
    Ok((ok, parts.join("; ")))
}

fn c07_qadic() -> Result<(bool, String)> {
    let spec = UniformMagnitudeSpec::new(3, 2.0, 10).with_weights(vec![1.0, 1.0]);
    let v = pvar_total(&reference_path(&spec, 10)?, 2.0)?;
    let gap = (v - 1.0).abs();
    Ok((gap <= 2e-2, format!("V_10 = {v:.6}, gap {gap:.1e}")))
}

fn c08_follmer() -> Result<(bool, String)> {
    let sq = FunctionWithDerivatives::monomial(2, 2);
    let quartic = FunctionWithDerivatives::monomial(4, 2);
    let mut ok = true;
    let mut parts = Vec::new();
    for (label, _, hp) in recipe_targets() {
        let y = recipe_path(hp, 16)?;
        let exact = change_of_variable_residual(&sq, &y.subsample(14)?, 2.0)?.sup;
        let sups = [12, 14, 16]
            .iter()
            .map(|&m| Ok(change_of_variable_residual(&quartic, &y.subsample(m)?, 2.0)?.sup))
            .collect::<Result<Vec<f64>>>()?;
        let decreasing = sups.windows(2).all(|w| w[1] < w[0]);
        ok &= exact <= 1e-12 && sups[2] <= 5e-2 && decreasing;
        parts.push(format!(
            "{label}: y^2 {exact:.1e}, y^4 {:.1e}/{:.1e}/{:.1e}",
            sups[0], sups[1], sups[2]
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn c09_timechange() -> Result<(bool, String)> {
    let n = 10;
    let x2 = reference_path(&UniformMagnitudeSpec::new(2, 2.0, n), n)?;
    let sq = build_homeomorphism(&RefiningTable::squared(2, n)?)?;
    let g1 = transported_pvar_check(&x2, &sq, 2.0, n)?;
    let x3 = reference_path(&UniformMagnitudeSpec::new(3, 2.0, n), n)?;
    let rnd = build_homeomorphism(&RefiningTable::random(3, n, 2024)?)?;
    let g2 = transported_pvar_check(&x3, &rnd, 2.0, n)?;
    Ok((g1 <= 1e-12 && g2 <= 1e-12, format!("square-root {g1:.1e}, random q=3 {g2:.1e}")))
}

fn c10_stability() -> Result<(bool, String)> {
    let grid = qadic_grid(2, 8)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut ok = true;
    let mut worst_ratio: f64 = 0.0;
    for i in 0..100 {
        let p = if i % 2 == 0 { 2.0 } else { 3.0 };
        let (a1, a2, f1, f2): (f64, f64, f64, f64) =
            (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(0.5..8.0), rng.gen_range(0.5..8.0));
        let noise: Vec<f64> = (0..grid.points.len()).map(|_| rng.gen_range(-0.3..0.3)).collect();
        let g1 = SampledPath::from_fn(grid.clone(), |t| a1 * (f1 * t).sin() + 0.5)?;
        let g2 = SampledPath::new(
            grid.clone(),
            grid.points.iter().zip(&noise).map(|(t, e)| a2 * (f2 * t).cos() + e).collect(),
        )?;
        let b = stability_bound(&g1, &g2, p, 1.0, &NormSelector::Sup)?;
        ok &= b.lhs <= b.rhs_l1;
        if b.rhs_l1 > 0.0 {
            worst_ratio = worst_ratio.max(b.lhs / b.rhs_l1);
        }
    }
    let c2 = variation_constant_exact(2.0, 2, &[], DEFAULT_TAIL_TARGET)?.value;
    let one = SampledPath::from_fn(grid.clone(), |_| 1.0)?;
    let zero = SampledPath::from_fn(grid, |_| 0.0)?;
    let b = stability_bound(&one, &zero, 2.0, c2, &NormSelector::Sup)?;
    let eq = b.lhs == b.rhs_l1 && (b.lhs - c2).abs() <= 1e-15;
    Ok((ok && eq, format!("100 pairs, max lhs/rhs {worst_ratio:.3}; equality case lhs={:.9} C_2={c2:.9}", b.lhs)))
}

fn c11_bernstein() -> Result<(bool, String)> {
    let grid = qadic_grid(2, 10)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let amp = rng.gen_range(0.1..5.0);
        let z = SampledPath::new(grid.clone(), (0..grid.points.len()).map(|_| amp * rng.gen_range(-1.0..1.0)).collect())?;
        let sup = z.sup_norm();
        for deg in [4usize, 16, 64] {
            let xn = bernstein_path(&z, deg, &grid)?;
            let quotient = holder_quotient(&xn, 0.5)?;
            let bound = (2 * deg + 1) as f64 * sup;
            ok &= quotient <= bound;
            worst = worst.max(quotient / bound);
        }
    }
    Ok((ok, format!("60 cases, max quotient/bound {worst:.3}")))
}

fn random_brownian(depth: u32, seed: u64) -> Result<CoefficientArray> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = CoefficientArray::zeros(2, depth)?;
    c.boundary = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
    for lvl in &mut c.levels {
        // sum of uniforms, a cheap bell-shaped variate with unit variance
        lvl.iter_mut().for_each(|v| *v = (0..12).map(|_| rng.gen::<f64>()).sum::<f64>() - 6.0);
    }
    Ok(c)
}

fn c12_splice() -> Result<(bool, String)> {
    let depth = 10;
    let xs = [
        build_reference(&UniformMagnitudeSpec::new(2, 2.0, depth))?,
        random_brownian(depth, 3)?,
        crate::schauder::analyze(&SampledPath::qadic_fn(2, depth, |t| (6.0 * t).sin() + t)?)?,
    ];
    let ys = [
        build_reference(&UniformMagnitudeSpec::new(2, 3.0, depth).with_signs(SignRule::Seeded(3)))?,
        random_brownian(depth, 4)?,
    ];
    let sel = NormSelector::Holder { alpha: 0.5 };
    let mut ok = true;
    let mut worst_ratio: f64 = 0.0;
    let mut worst_agree: f64 = 0.0;
    for x in &xs {
        let xp = synthesize(x, depth)?;
        let x_norm = grid_norm(&xp, &sel)?;
        for y in &ys {
            let c_y = holder_quotient(&synthesize(y, depth)?, 0.5)?;
            for n in [0, 2, 4, 6, 8] {
                let s = splice(x, y, n)?;
                let sp = synthesize(&s, depth)?;
                let agree = sp
                    .subsample(n)?
                    .values
                    .iter()
                    .zip(&xp.subsample(n)?.values)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                worst_agree = worst_agree.max(agree);
                ok &= agree <= 1e-12;
                for m in n..depth {
                    ok &= xi(&s, 2.0, m)? == xi(y, 2.0, m)?;
                }
                let dist = sp.values.iter().zip(&xp.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                let bound = (x_norm + c_y) * 2f64.powf(-(n as f64) / 2.0);
                ok &= dist <= bound;
                worst_ratio = worst_ratio.max(dist / bound);
            }
        }
    }
    Ok((ok, format!("agreement {worst_agree:.1e}, max distance/bound {worst_ratio:.3}")))
}
