//! Conditional expectations onto approximant masas and finite-level
//! estimates of `d∞,2` between two approximants.
//!
//! For a masa with minimal projections `f = v v*`, `E(x) = Σ_f ⟨v, x v⟩ f`.
//! Results are usually kept as coefficient vectors over the labels; the
//! two-norm of `Σ c_f f` is `(Σ |c_f|² / dim)^{1/2}`.

use std::f64::consts::PI;

use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::construction::{Construction, ProjLabel};
use crate::error::{Error, Result};
use crate::matrix::{random_gaussian, random_unitary, ComplexMatrix, DENSE_BUDGET};
use crate::tower::TowerRational;

/// Relative tolerance for the power iteration on `Φ*Φ`.
pub const POWER_TOL: f64 = 1e-8;
/// Default iteration budget for the power iteration.
pub const POWER_MAX_ITERS: usize = 500;

/// `ω_d^j` for `j = 0 … d-1`: coefficients of the canonical trace-free unitary.
pub fn phase_coefficients(d: usize) -> Vec<Complex64> {
    (0..d).map(|j| Complex64::from_polar(1.0, 2.0 * PI * j as f64 / d as f64)).collect()
}

/// `‖Σ_f c_f f‖₂` for a masa with `c.len()` minimal projections of equal trace.
pub fn coefficient_norm(c: &[Complex64]) -> f64 {
    (c.iter().map(|z| z.norm_sqr()).sum::<f64>() / c.len() as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Dense,
    Factorized,
}

/// `E_A` for the masa `A` spanned by the given minimal projections.
#[derive(Debug, Clone)]
pub struct ExpectationOperator<'c> {
    construction: &'c Construction,
    labels: Vec<ProjLabel>,
    dim: usize,
    strategy: Strategy,
    vectors: Vec<Vec<Complex64>>,
}

impl<'c> ExpectationOperator<'c> {
    /// The labels must be the complete set of minimal projections of a masa.
    pub fn new(construction: &'c Construction, labels: Vec<ProjLabel>, strategy: Strategy) -> Result<Self> {
        let first = labels
            .first()
            .ok_or_else(|| Error::InvalidParameters("empty masa".into()))?;
        let dim = construction.label_dim(first)?;
        if labels.len() != dim {
            return Err(Error::DimensionMismatch { left: dim, right: labels.len() });
        }
        let vectors = match strategy {
            Strategy::Dense => {
                if dim > DENSE_BUDGET {
                    return Err(Error::DenseBudget { dim, budget: DENSE_BUDGET });
                }
                labels.iter().map(|l| construction.label_vector(l)).collect::<Result<_>>()?
            }
            Strategy::Factorized => Vec::new(),
        };
        Ok(ExpectationOperator { construction, labels, dim, strategy, vectors })
    }

    /// `E_{A_n(t)}`.
    pub fn for_approximant(
        construction: &'c Construction,
        t: &TowerRational,
        n: usize,
        strategy: Strategy,
    ) -> Result<Self> {
        Self::new(construction, construction.approximant(t, n)?.into_labels(), strategy)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[ProjLabel] {
        &self.labels
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    fn dense_vectors(&self) -> Result<&[Vec<Complex64>]> {
        match self.strategy {
            Strategy::Dense => Ok(&self.vectors),
            Strategy::Factorized => Err(Error::InvalidParameters(
                "dense application needs a dense operator".into(),
            )),
        }
    }

    /// `⟨v_f, x v_f⟩` for each minimal projection `f`.
    pub fn coefficients(&self, x: &ComplexMatrix) -> Result<Vec<Complex64>> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch { left: self.dim, right: x.dim() });
        }
        let vectors = self.dense_vectors()?;
        Ok(vectors.par_iter().map(|v| x.expectation_value(v)).collect())
    }

    /// `E(x)` for an elementary tensor `x = ⊗_r x_r`, leg by leg.
    pub fn coefficients_elementary(&self, factors: &[ComplexMatrix]) -> Result<Vec<Complex64>> {
        let first = &self.labels[0];
        if factors.len() != first.legs().len() {
            return Err(Error::LevelMismatch { left: first.legs().len(), right: factors.len() });
        }
        for ((leg, _), x) in first.entries().zip(factors) {
            let k = self.construction.tower().prime_usize(leg)?;
            if x.dim() != k {
                return Err(Error::DimensionMismatch { left: k, right: x.dim() });
            }
        }
        self.labels
            .iter()
            .map(|label| {
                label.entries().zip(factors).try_fold(Complex64::new(1.0, 0.0), |acc, ((leg, e), x)| {
                    let v = self.construction.family(leg)?.min_projection_vector(e.masa, e.index)?;
                    Ok(acc * x.expectation_value(&v))
                })
            })
            .collect()
    }

    /// `E(Σ_g c_g g)` for an element of another masa on the same legs, using
    /// only the factorized overlaps `tr(g f)`.
    pub fn coefficients_of_masa_element(&self, labels: &[ProjLabel], coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
        if labels.len() != coeffs.len() {
            return Err(Error::DimensionMismatch { left: labels.len(), right: coeffs.len() });
        }
        self.labels
            .par_iter()
            .map(|f| {
                labels.iter().zip(coeffs).try_fold(Complex64::new(0.0, 0.0), |acc, (g, c)| {
                    Ok(acc + c * self.construction.trace_pairing(g, f)?)
                })
            })
            .collect()
    }

    /// Dense `Σ_f c_f f`.
    pub fn assemble(&self, coeffs: &[Complex64]) -> Result<ComplexMatrix> {
        let vectors = self.dense_vectors()?;
        let n = self.dim;
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        data.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            for (v, c) in vectors.iter().zip(coeffs) {
                let a = c * v[i];
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for (o, vj) in row.iter_mut().zip(v) {
                    *o += a * vj.conj();
                }
            }
        });
        ComplexMatrix::from_rows(n, data)
    }

    pub fn apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.assemble(&self.coefficients(x)?)
    }
}

/// Gram matrix `G_ij = |⟨v_i, w_j⟩|²` between the minimal projections of two masas.
pub fn overlap_matrix(construction: &Construction, a: &[ProjLabel], b: &[ProjLabel]) -> Result<Vec<Vec<f64>>> {
    a.par_iter()
        .map(|f| b.iter().map(|g| construction.trace_pairing(f, g)).collect())
        .collect()
}

/// `‖Σ a_i f_i - Σ b_j g_j‖₂` given the overlap matrix of the two masas.
pub fn coefficient_distance(a: &[Complex64], b: &[Complex64], gram: &[Vec<f64>]) -> f64 {
    let d = a.len() as f64;
    let aa: f64 = a.iter().map(|z| z.norm_sqr()).sum();
    let bb: f64 = b.iter().map(|z| z.norm_sqr()).sum();
    let cross: f64 = a
        .iter()
        .zip(gram)
        .map(|(ai, row)| {
            let s: Complex64 = row.iter().zip(b).map(|(g, bj)| bj * *g).sum();
            (ai.conj() * s).re
        })
        .sum();
    ((aa + bb - 2.0 * cross).max(0.0) / d).sqrt()
}

/// `max ‖E_{A_{n'}}(x⊗1) - E_{A_n}(x)⊗1‖₂` over `samples` random unitaries `x ∈ N_n`.
pub fn compatibility_defect(
    construction: &Construction,
    t: &TowerRational,
    n: usize,
    n_fine: usize,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if n_fine <= n {
        return Err(Error::InvalidParameters(format!("need n' > n, got {n_fine} ≤ {n}")));
    }
    let coarse = ExpectationOperator::for_approximant(construction, t, n, Strategy::Dense)?;
    let fine = ExpectationOperator::for_approximant(construction, t, n_fine, Strategy::Dense)?;
    let pad = ComplexMatrix::identity(fine.dim() / coarse.dim());
    (0..samples)
        .into_par_iter()
        .map(|i| {
            let x = random_unitary(coarse.dim(), seed.wrapping_add(i as u64));
            let lhs = fine.apply(&x.kron(&pad))?;
            let rhs = coarse.apply(&x)?.kron(&pad);
            Ok(lhs.distance(&rhs))
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

/// Certified sandwich `lower ≤ ‖E_s - E_t‖∞,2 restricted to N_n ≤ upper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapEstimate {
    pub s: String,
    pub t: String,
    pub n: usize,
    pub lower: f64,
    pub upper: f64,
    pub probes: usize,
    pub iterations: usize,
    pub bound: f64,
    #[serde(default = "default_true")]
    pub converged: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapOptions {
    /// Number of Haar-random unitary probes (structured probes come on top).
    pub probes: usize,
    pub iterations: usize,
    pub tolerance: f64,
    pub seed: u64,
    /// Route for the power iteration; `None` picks dense up to level 3.
    pub route: Option<Strategy>,
}

impl Default for GapOptions {
    fn default() -> Self {
        GapOptions { probes: 16, iterations: POWER_MAX_ITERS, tolerance: POWER_TOL, seed: 0, route: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerResult {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Largest singular value of `Φ = E_s - E_t` on the Hilbert–Schmidt space,
/// by power iteration on `Φ*Φ = Φ²` with dense matrix-free application.
/// The estimate never drops below `‖Φ x₀‖ / ‖x₀‖` for the start `x₀`.
pub fn superoperator_norm_dense(
    es: &ExpectationOperator<'_>,
    et: &ExpectationOperator<'_>,
    iterations: usize,
    tolerance: f64,
    seed: u64,
    start: Option<&ComplexMatrix>,
) -> Result<PowerResult> {
    let phi = |x: &ComplexMatrix| -> Result<ComplexMatrix> { Ok(&es.apply(x)? - &et.apply(x)?) };
    let mut x = start.cloned().unwrap_or_else(|| random_gaussian(es.dim(), seed));
    let n0 = x.two_norm();
    if n0 == 0.0 {
        return Ok(PowerResult { value: 0.0, iterations: 0, converged: true });
    }
    x = x.scale((1.0 / n0).into());
    let mut value = 0.0;
    for it in 1..=iterations {
        let y = phi(&x)?;
        let next = y.two_norm().powi(2);
        let z = phi(&y)?;
        let norm = z.two_norm();
        if norm == 0.0 {
            return Ok(PowerResult { value: 0.0, iterations: it, converged: true });
        }
        x = z.scale((1.0 / norm).into());
        if (next - value).abs() <= tolerance * next {
            return Ok(PowerResult { value: next.sqrt(), iterations: it, converged: true });
        }
        value = next;
    }
    Ok(PowerResult { value: value.sqrt(), iterations, converged: false })
}

/// Same quantity as [`superoperator_norm_dense`], iterating on coordinates
/// over the two label sets. `Φ²` maps into the span of both masas' minimal
/// projections, where `Φ(a, b) = (a + G b, -(Gᵀ a + b))`.
pub fn superoperator_norm_factorized(
    gram: &[Vec<f64>],
    iterations: usize,
    tolerance: f64,
    seed: u64,
    start: Option<(Vec<f64>, Vec<f64>)>,
) -> PowerResult {
    let d = gram.len();
    let (mut a, mut b) = start.unwrap_or_else(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = (0..d).map(|_| rng.random::<f64>() - 0.5).collect();
        let b = (0..d).map(|_| rng.random::<f64>() - 0.5).collect();
        (a, b)
    });
    let norm_sq = |a: &[f64], b: &[f64]| -> f64 {
        let gb: f64 = a.iter().zip(gram).map(|(ai, row)| ai * row.iter().zip(b).map(|(g, bj)| g * bj).sum::<f64>()).sum();
        a.iter().map(|v| v * v).sum::<f64>() + b.iter().map(|v| v * v).sum::<f64>() + 2.0 * gb
    };
    let apply = |a: &[f64], b: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let na: Vec<f64> = gram
            .par_iter()
            .zip(a)
            .map(|(row, ai)| ai + row.iter().zip(b).map(|(g, bj)| g * bj).sum::<f64>())
            .collect();
        let nb: Vec<f64> = (0..d)
            .into_par_iter()
            .map(|j| -(b[j] + gram.iter().zip(a).map(|(row, ai)| row[j] * ai).sum::<f64>()))
            .collect();
        (na, nb)
    };
    let scale = |a: &mut Vec<f64>, b: &mut Vec<f64>, s: f64| {
        a.iter_mut().chain(b.iter_mut()).for_each(|v| *v *= s);
    };
    let n0 = norm_sq(&a, &b).sqrt();
    if n0 == 0.0 {
        return PowerResult { value: 0.0, iterations: 0, converged: true };
    }
    scale(&mut a, &mut b, 1.0 / n0);
    let mut value = 0.0;
    for it in 1..=iterations {
        let (ya, yb) = apply(&a, &b);
        let next = norm_sq(&ya, &yb);
        let (mut za, mut zb) = apply(&ya, &yb);
        let nz = norm_sq(&za, &zb).sqrt();
        if nz == 0.0 {
            return PowerResult { value: 0.0, iterations: it, converged: true };
        }
        scale(&mut za, &mut zb, 1.0 / nz);
        a = za;
        b = zb;
        if (next - value).abs() <= tolerance * next {
            return PowerResult { value: next.sqrt(), iterations: it, converged: true };
        }
        value = next;
    }
    PowerResult { value: value.sqrt(), iterations, converged: false }
}

/// Exact `2√|s-t|` as a float.
pub fn path_distance_bound(s: &TowerRational, t: &TowerRational) -> f64 {
    2.0 * abs_difference(s, t).to_f64().unwrap_or(f64::NAN).sqrt()
}

fn abs_difference(s: &TowerRational, t: &TowerRational) -> BigRational {
    (s.to_ratio() - t.to_ratio()).abs()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathBound {
    /// `2√|s-t|`.
    pub bound: f64,
    /// `2‖1-q‖₂` with `q` the common cutdown at the requested level.
    pub cutdown_bound: Option<f64>,
    /// `tr(1-q) = |s-t|` as exact rationals.
    pub exact_agreement: Option<bool>,
}

pub fn path_distance_bound_at(
    construction: &Construction,
    s: &TowerRational,
    t: &TowerRational,
    level: Option<usize>,
) -> Result<PathBound> {
    let bound = path_distance_bound(s, t);
    let Some(n) = level else {
        return Ok(PathBound { bound, cutdown_bound: None, exact_agreement: None });
    };
    let (lo, hi) = if s <= t { (s, t) } else { (t, s) };
    let size = construction.tower().size(n)?;
    let kept = if lo == hi { size } else { construction.common_cutdown(lo, hi, n)?.len() };
    let complement = BigRational::new(((size - kept) as u64).into(), (size as u64).into());
    let agree = complement == abs_difference(s, t);
    let cutdown = 2.0 * complement.to_f64().unwrap_or(f64::NAN).sqrt();
    Ok(PathBound { bound, cutdown_bound: Some(cutdown), exact_agreement: Some(agree) })
}

/// Unitaries of `N_n` that expose the difference between `A_n(s)` and `A_n(t)`.
fn structured_probes(
    construction: &Construction,
    s_labels: &[ProjLabel],
    t_labels: &[ProjLabel],
    differing: &[usize],
) -> Result<Vec<ComplexMatrix>> {
    let dim = s_labels.len();
    let mut probes = Vec::new();
    let phase_over = |labels: &[ProjLabel], chosen: &[usize]| -> Result<ComplexMatrix> {
        let mut coeffs = vec![Complex64::new(1.0, 0.0); dim];
        for (&m, w) in chosen.iter().zip(phase_coefficients(chosen.len())) {
            coeffs[m] = w;
        }
        let op = ExpectationOperator::new(construction, labels.to_vec(), Strategy::Dense)?;
        op.assemble(&coeffs)
    };
    let all: Vec<usize> = (0..dim).collect();
    for labels in [s_labels, t_labels] {
        probes.push(phase_over(labels, &all)?);
        if differing.len() >= 2 {
            probes.push(phase_over(labels, differing)?);
        }
        // Reflections 1 - 2f through a spread of differing labels.
        let step = (differing.len() / 8).max(1);
        for &m in differing.iter().step_by(step).take(8) {
            let mut coeffs = vec![Complex64::new(1.0, 0.0); dim];
            coeffs[m] = Complex64::new(-1.0, 0.0);
            let op = ExpectationOperator::new(construction, labels.to_vec(), Strategy::Dense)?;
            probes.push(op.assemble(&coeffs)?);
        }
    }
    // 1 ⊗ w on the top leg, for each top-leg masa in use.
    let top = s_labels[0].last_leg();
    let mut masas: Vec<usize> = s_labels
        .iter()
        .chain(t_labels)
        .map(|l| l.legs()[top - 1].masa)
        .collect();
    masas.sort_unstable();
    masas.dedup();
    let family = construction.family(top)?;
    let pad = ComplexMatrix::identity(dim / family.prime());
    for &j in masas.iter().take(8) {
        probes.push(pad.kron(&family.basis(j)?.trace_free_unitary()));
    }
    Ok(probes)
}

/// Structured and random probes at level `n`, plus the probes of level
/// `n − 1` lifted as `u ⊗ 1`, so the lower bound cannot drop with the level.
fn probe_set(
    construction: &Construction,
    s: &TowerRational,
    t: &TowerRational,
    n: usize,
    options: &GapOptions,
) -> Result<Vec<ComplexMatrix>> {
    let s_labels = construction.approximant(s, n)?.into_labels();
    let t_labels = construction.approximant(t, n)?.into_labels();
    let dim = s_labels.len();
    let differing: Vec<usize> = (0..dim).filter(|&m| s_labels[m] != t_labels[m]).collect();
    let mut probes = structured_probes(construction, &s_labels, &t_labels, &differing)?;
    probes.extend((0..options.probes).map(|i| random_unitary(dim, options.seed.wrapping_add(i as u64))));
    if n > s.canonical_level().max(t.canonical_level()) {
        let pad = ComplexMatrix::identity(construction.tower().prime_usize(n)?);
        probes.extend(probe_set(construction, s, t, n - 1, options)?.iter().map(|u| u.kron(&pad)));
    }
    Ok(probes)
}

/// `lower` from unitary probes (structured and Haar-random); `upper` from the
/// Hilbert–Schmidt norm of `E_s - E_t`, which dominates the `∞ → 2` norm.
pub fn gap_estimate(
    construction: &Construction,
    s: &TowerRational,
    t: &TowerRational,
    n: usize,
    options: GapOptions,
) -> Result<GapEstimate> {
    let s_labels = construction.approximant(s, n)?.into_labels();
    let t_labels = construction.approximant(t, n)?.into_labels();
    let dim = s_labels.len();
    if dim > DENSE_BUDGET {
        return Err(Error::DenseBudget { dim, budget: DENSE_BUDGET });
    }
    let es = ExpectationOperator::new(construction, s_labels.clone(), Strategy::Dense)?;
    let et = ExpectationOperator::new(construction, t_labels.clone(), Strategy::Dense)?;
    let gram = overlap_matrix(construction, &s_labels, &t_labels)?;
    let bound = path_distance_bound(s, t);

    let differing: Vec<usize> = (0..dim).filter(|&m| s_labels[m] != t_labels[m]).collect();
    if differing.is_empty() {
        return Ok(GapEstimate {
            s: s.to_string(),
            t: t.to_string(),
            n,
            lower: 0.0,
            upper: 0.0,
            probes: 0,
            iterations: 0,
            bound,
            converged: true,
        });
    }

    let probes = probe_set(construction, s, t, n, &options)?;
    let distances = probes
        .par_iter()
        .map(|u| Ok(coefficient_distance(&es.coefficients(u)?, &et.coefficients(u)?, &gram)))
        .collect::<Result<Vec<f64>>>()?;
    let (best, lower) = distances
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0), |acc, (i, d)| if d > acc.1 { (i, d) } else { acc });

    // A second run warm-started at the best probe keeps the estimate above `lower`.
    let route = options.route.unwrap_or(if n <= 3 { Strategy::Dense } else { Strategy::Factorized });
    let (it, tol, seed) = (options.iterations, options.tolerance, options.seed);
    let runs = match route {
        Strategy::Dense => vec![
            superoperator_norm_dense(&es, &et, it, tol, seed, None)?,
            superoperator_norm_dense(&es, &et, it, tol, seed, Some(&probes[best]))?,
        ],
        Strategy::Factorized => {
            let (cs, ct) = (es.coefficients(&probes[best])?, et.coefficients(&probes[best])?);
            let part = |f: fn(&Complex64) -> f64| -> (Vec<f64>, Vec<f64>) {
                (cs.iter().map(f).collect(), ct.iter().map(|c| -f(c)).collect())
            };
            vec![
                superoperator_norm_factorized(&gram, it, tol, seed, None),
                superoperator_norm_factorized(&gram, it, tol, seed, Some(part(|c| c.re))),
                superoperator_norm_factorized(&gram, it, tol, seed, Some(part(|c| c.im))),
            ]
        }
    };
    let power = PowerResult {
        value: runs.iter().map(|r| r.value).fold(0.0, f64::max),
        iterations: runs.iter().map(|r| r.iterations).max().unwrap_or(0),
        converged: runs.iter().all(|r| r.converged),
    };
    Ok(GapEstimate {
        s: s.to_string(),
        t: t.to_string(),
        n,
        lower,
        upper: power.value,
        probes: probes.len(),
        iterations: power.iterations,
        bound,
        converged: power.converged,
    })
}

/// True when `a ≤ b + slack`.
pub fn within(a: f64, b: f64, slack: f64) -> bool {
    a <= b + slack
}
