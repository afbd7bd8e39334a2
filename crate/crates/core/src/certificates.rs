//! Mechanical checks of the finite-level identities behind singularity,
//! the Γ value and the continuity of the path. Each check returns a
//! [`Certificate`] recording the achieved defect against a threshold.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::construction::{Construction, ProjLabel};
use crate::error::{Error, Result};
use crate::expectation::{coefficient_norm, phase_coefficients, ExpectationOperator, GapEstimate, Strategy};
use crate::matrix::{random_unitary, ComplexMatrix, DENSE_BUDGET};
use crate::tower::TowerRational;

/// Threshold for quantities that vanish exactly in exact arithmetic.
pub const EXACT_ZERO: f64 = 1e-10;
/// Threshold for identities that combine `O(dim)` floating-point sums.
pub const FLOAT_SUM: f64 = 1e-8;
/// Largest `K_{n+1}` for which the Γ commutator is checked on dense `u`.
pub const DENSE_COMMUTATOR_LIMIT: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificateKind {
    Singularity,
    BlockOrthogonality,
    GammaCommutation,
    Anticommutation,
    Cutdown,
}

impl CertificateKind {
    /// The finite-level statement a certificate of this kind checks.
    pub fn claim(self) -> &'static str {
        match self {
            CertificateKind::Singularity => {
                "trace-free unitary of one block masa has zero expectation onto every other block masa"
            }
            CertificateKind::BlockOrthogonality => {
                "block masas over distinct minimal projections above the cut are orthogonal"
            }
            CertificateKind::GammaCommutation => {
                "u = p ⊗ v is a trace-free unitary of A p commuting with p N_n p"
            }
            CertificateKind::Anticommutation => {
                "‖[u,x]q‖₂² = 2tr(q) − 2Re[tr(xuqx*)·conj(tr(uq))/tr(q)] for a cyclic permutation unitary x"
            }
            CertificateKind::Cutdown => "A_n(s) and A_n(t) share the labels outside [s·K_n, t·K_n), with tr(q) = 1 − (t − s)",
        }
    }
}

impl fmt::Display for CertificateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            CertificateKind::Singularity => "singularity",
            CertificateKind::BlockOrthogonality => "block-orthogonality",
            CertificateKind::GammaCommutation => "gamma-commutation",
            CertificateKind::Anticommutation => "anticommutation",
            CertificateKind::Cutdown => "cutdown",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub kind: CertificateKind,
    pub params: BTreeMap<String, String>,
    pub defect: f64,
    pub threshold: f64,
    pub pass: bool,
    pub witness: String,
    pub seed: Option<u64>,
    pub claim: String,
}

impl Certificate {
    pub fn new(
        kind: CertificateKind,
        params: BTreeMap<String, String>,
        defect: f64,
        threshold: f64,
        witness: String,
        seed: Option<u64>,
    ) -> Self {
        Certificate {
            kind,
            params,
            defect,
            threshold,
            // NaN never passes.
            pass: defect <= threshold,
            witness,
            seed,
            claim: kind.claim().to_string(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }
}

fn params<const N: usize>(pairs: [(&str, String); N]) -> BTreeMap<String, String> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// `‖E_B(Σ_j c_j g_j)‖₂` for `g_j` the labels of `a`, computed in the block algebra.
fn cross_expectation(c: &Construction, a: &[ProjLabel], coeffs: &[Complex64], b: &[ProjLabel]) -> Result<f64> {
    let projected = b
        .iter()
        .map(|h| {
            a.iter().zip(coeffs).try_fold(Complex64::new(0.0, 0.0), |acc, (g, w)| {
                Ok(acc + w * c.trace_pairing(g, h)?)
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(coefficient_norm(&projected))
}

/// Singularity witness at `n₂ = n₁ + 1`.
pub fn singularity_certificate(c: &Construction, t: &TowerRational, n1: usize, eps: f64) -> Result<Certificate> {
    singularity_certificate_to(c, t, n1, n1 + 1, eps)
}

/// For each minimal `e` of `A_{n₁}(t)`, `w_e = Σ_j ω^j g_j` over the block
/// masa `A^(e)_{n₂,n₁}`; reports `max_{f ≠ e} ‖E_{A^(f)}(w_e)‖₂`.
pub fn singularity_certificate_to(
    c: &Construction,
    t: &TowerRational,
    n1: usize,
    n2: usize,
    eps: f64,
) -> Result<Certificate> {
    if n1 % 2 == 1 {
        return Err(Error::InvalidParameters(format!(
            "singularity witness needs an even level n₁, got {n1}"
        )));
    }
    let blocks = c.blocks(t, n1, n2)?;
    let d = blocks[0].labels.len();
    let w = phase_coefficients(d);
    let (defect, (e, f)) = (0..blocks.len())
        .into_par_iter()
        .map(|e| {
            let mut worst = (0.0f64, (e, e));
            for f in (0..blocks.len()).filter(|&f| f != e) {
                let v = cross_expectation(c, &blocks[e].labels, &w, &blocks[f].labels)?;
                if v > worst.0 || v.is_nan() {
                    worst = (v, (e, f));
                }
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold((0.0f64, (0, 0)), |a, b| if b.0 > a.0 || b.0.is_nan() { b } else { a });
    let witness = format!(
        "w_e = Σ_j ω^j g_j over the {d} labels of each of {} blocks on legs {}..{n2}; worst pair (e, f) = ({e}, {f})",
        blocks.len(),
        n1 + 1
    );
    Ok(Certificate::new(
        CertificateKind::Singularity,
        params([("t", t.to_string()), ("n1", n1.to_string()), ("n2", n2.to_string())]),
        defect,
        eps,
        witness,
        None,
    ))
}

/// `max |tr(gh) − tr(g)tr(h)|` over minimal projections of the block masas
/// of `ⁿf_m(t)` and `ⁿf_{m'}(t)` at depth `n₁`, from factorized traces.
pub fn block_orthogonality_check(
    c: &Construction,
    t: &TowerRational,
    n: usize,
    m: usize,
    m2: usize,
    n1: usize,
) -> Result<Certificate> {
    let cut = c.cut(t, n)?;
    let size = c.tower().size(n)?;
    for index in [m, m2] {
        if index < cut {
            return Err(Error::BelowGammaCut { index, cut });
        }
        if index >= size {
            return Err(Error::IndexOutOfRange { what: "block index", index, bound: size });
        }
    }
    if m >= m2 {
        return Err(Error::InvalidParameters(format!("need m < m′, got {m}, {m2}")));
    }
    let blocks = c.blocks(t, n, n1)?;
    let (a, b) = (&blocks[m].labels, &blocks[m2].labels);
    let d = a.len() as f64;
    let target = 1.0 / (d * d);
    let defect = a
        .par_iter()
        .map(|g| {
            b.iter().try_fold(0.0f64, |worst, h| {
                Ok(worst.max((c.trace_pairing(g, h)? / d - target).abs()))
            })
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(Certificate::new(
        CertificateKind::BlockOrthogonality,
        params([
            ("t", t.to_string()),
            ("n", n.to_string()),
            ("m", m.to_string()),
            ("m2", m2.to_string()),
            ("n1", n1.to_string()),
        ]),
        defect,
        EXACT_ZERO,
        format!("{} × {} minimal projections on legs {}..{n1}", a.len(), b.len(), n + 1),
        None,
    ))
}

/// Every admissible pair `t·K_n ≤ m < m' < K_n`.
pub fn admissible_pairs(c: &Construction, t: &TowerRational, n: usize) -> Result<Vec<(usize, usize)>> {
    let (cut, size) = (c.cut(t, n)?, c.tower().size(n)?);
    Ok((cut..size).flat_map(|m| (m + 1..size).map(move |m2| (m, m2))).collect())
}

/// Checks that `u = Σ_{m<t·K_n} ⁿf_m(t) ⊗ v`, `v` the ω-phase unitary of the
/// extra masa on leg `n+1`, is trace-free and commutes with `p x p` for
/// random unitaries `x ∈ N_n`.
pub fn gamma_commutator_check(
    c: &Construction,
    t: &TowerRational,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<Certificate> {
    let base = params([("t", t.to_string()), ("n", n.to_string()), ("samples", samples.to_string())]);
    if t.is_zero() {
        return Ok(Certificate::new(
            CertificateKind::GammaCommutation,
            base,
            0.0,
            EXACT_ZERO,
            "empty witness: p = 0".into(),
            Some(seed),
        ));
    }
    if n.is_multiple_of(2) {
        return Err(Error::InvalidParameters(format!("Γ witness needs an odd level, got {n}")));
    }
    let size = c.tower().size(n)?;
    if n + 1 > c.depth() {
        return Err(Error::LevelOutOfRange { level: n + 1, depth: c.depth() });
    }
    if size > DENSE_BUDGET {
        return Err(Error::DenseBudget { dim: size, budget: DENSE_BUDGET });
    }
    let cut = c.cut(t, n)?;
    let coarse = c.approximant(t, n)?.into_labels();
    let fine = c.approximant(t, n + 1)?.into_labels();
    let k = c.tower().prime_usize(n + 1)?;

    // Labels under p on level n+1 must be ⁿf_m ⊗ e^(K_n)_l, in order.
    let structure = fine[..cut * k]
        .iter()
        .enumerate()
        .filter(|(i, g)| {
            let e = g.legs()[n];
            g.prefix(n) != coarse[i / k] || e.masa != size || e.index != i % k
        })
        .count();

    let p = c.materialize(&coarse[..cut])?;
    let v = c.family(n + 1)?.basis(size)?.trace_free_unitary();
    let dense = size * k <= DENSE_COMMUTATOR_LIMIT;
    let (trace, route) = if dense {
        let op = ExpectationOperator::new(c, fine.clone(), Strategy::Dense)?;
        let phases = phase_coefficients(k);
        let coeffs: Vec<Complex64> = (0..fine.len())
            .map(|i| if i < cut * k { phases[i % k] } else { Complex64::new(0.0, 0.0) })
            .collect();
        let u = op.assemble(&coeffs)?;
        (u.normalized_trace().norm(), Some(u))
    } else {
        (p.normalized_trace().norm() * v.normalized_trace().norm(), None)
    };
    let pad = ComplexMatrix::identity(k);
    let commutator = (0..samples)
        .into_par_iter()
        .map(|i| {
            let x = random_unitary(size, seed.wrapping_add(i as u64));
            let pxp = &(&p * &x) * &p;
            match &route {
                Some(u) => {
                    let big = pxp.kron(&pad);
                    (&(u * &big) - &(&big * u)).two_norm()
                }
                // [p ⊗ v, pxp ⊗ 1] = [p, pxp] ⊗ v and ‖v‖₂ = 1.
                None => (&(&p * &pxp) - &(&pxp * &p)).two_norm() * v.two_norm(),
            }
        })
        .reduce(|| 0.0, f64::max);
    let defect = (structure as f64).max(trace).max(commutator);
    let witness = format!(
        "u = p ⊗ v, v the ω-phase unitary of masa {size} on leg {}; tr(p) = {}/{size}; {} route; {structure} structural mismatches, |tr u| = {trace:.3e}, max commutator {commutator:.3e}",
        n + 1,
        cut,
        if dense { "dense" } else { "tensor-factor" },
    );
    Ok(Certificate::new(CertificateKind::GammaCommutation, base, defect, EXACT_ZERO, witness, Some(seed)))
}

/// Unitary `u ∈ A q` used by [`anticommutation_check`]: `u = Σ_{q ∈ P} q ⊗ u_q`
/// with `u_q = Σ_l λ_l g_l` over the block masa of `q`, the same `λ` for every `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockUnitary {
    /// `λ_l = ω^l`, so `tr(uq) = 0`.
    TraceFree,
    /// `λ_l = e^{iθ_l}` with `θ` drawn from the seed.
    RandomPhases,
    /// `λ_l = 1`, i.e. `u = q`.
    Projection,
}

/// Detailed terms of one anticommutation configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnticommutationTerms {
    pub lhs: f64,
    pub rhs: f64,
    /// Right side with `tr(uq)` in place of its conjugate.
    pub rhs_unconjugated: f64,
    pub trace_q: f64,
    pub trace_uq: [f64; 2],
}

pub fn anticommutation_terms(
    c: &Construction,
    t: &TowerRational,
    n: usize,
    selection: &[usize],
    unitary: BlockUnitary,
    seed: u64,
) -> Result<AnticommutationTerms> {
    let size = c.tower().size(n)?;
    let cut = c.cut(t, n)?;
    if selection.len() < 2 {
        return Err(Error::InvalidParameters("the permutation needs at least two labels".into()));
    }
    for (i, &m) in selection.iter().enumerate() {
        if m >= size {
            return Err(Error::IndexOutOfRange { what: "label index", index: m, bound: size });
        }
        if m < cut {
            return Err(Error::BelowGammaCut { index: m, cut });
        }
        if selection[..i].contains(&m) {
            return Err(Error::InvalidParameters(format!("label {m} selected twice")));
        }
    }
    if n + 1 > c.depth() {
        return Err(Error::LevelOutOfRange { level: n + 1, depth: c.depth() });
    }
    let k = c.tower().prime_usize(n + 1)?;
    if size * k > DENSE_BUDGET {
        return Err(Error::DenseBudget { dim: size * k, budget: DENSE_BUDGET });
    }
    let coarse = c.approximant(t, n)?.into_labels();
    let vectors = selection
        .iter()
        .map(|&m| c.label_vector(&coarse[m]))
        .collect::<Result<Vec<_>>>()?;

    // x = Σ_i |w_{σ(i)}⟩⟨w_i| + (1 − q) with σ the full cycle on the selection.
    let mut x = ComplexMatrix::identity(size);
    for (i, w) in vectors.iter().enumerate() {
        let next = &vectors[(i + 1) % vectors.len()];
        x = &x - &ComplexMatrix::outer(w, w)?;
        x = &x + &ComplexMatrix::outer(next, w)?;
    }
    let x = x.kron(&ComplexMatrix::identity(k));

    let lambda: Vec<Complex64> = match unitary {
        BlockUnitary::TraceFree => phase_coefficients(k),
        BlockUnitary::Projection => vec![Complex64::new(1.0, 0.0); k],
        BlockUnitary::RandomPhases => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..k)
                .map(|_| Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU))
                .collect()
        }
    };
    let fine = c.approximant(t, n + 1)?.into_labels();
    let op = ExpectationOperator::new(c, fine, Strategy::Dense)?;
    let zero = Complex64::new(0.0, 0.0);
    let mut u_coeffs = vec![zero; size * k];
    let mut q_coeffs = vec![zero; size * k];
    for &m in selection {
        for l in 0..k {
            u_coeffs[m * k + l] = lambda[l];
            q_coeffs[m * k + l] = Complex64::new(1.0, 0.0);
        }
    }
    let u = op.assemble(&u_coeffs)?;
    let q = op.assemble(&q_coeffs)?;

    let qxq = &(&q * &x) * &q;
    let quq = &(&q * &u) * &q;
    let lhs = (&(&qxq * &quq) - &(&quq * &qxq)).two_norm().powi(2);
    let trace_q = q.normalized_trace().re;
    let trace_uq = (&u * &q).normalized_trace();
    let cross = (&(&x * &(&u * &q)) * &x.adjoint()).normalized_trace();
    let rhs = 2.0 * trace_q - 2.0 * (cross * trace_uq.conj() / trace_q).re;
    let rhs_unconjugated = 2.0 * trace_q - 2.0 * (cross * trace_uq / trace_q).re;
    Ok(AnticommutationTerms { lhs, rhs, rhs_unconjugated, trace_q, trace_uq: [trace_uq.re, trace_uq.im] })
}

/// Dense check of the commutator identity for a cyclic permutation unitary
/// `x` on the selected labels and a block unitary `u ∈ A q`.
pub fn anticommutation_check(
    c: &Construction,
    t: &TowerRational,
    n: usize,
    selection: &[usize],
    unitary: BlockUnitary,
    seed: u64,
) -> Result<Certificate> {
    let terms = anticommutation_terms(c, t, n, selection, unitary, seed)?;
    let trace_uq = Complex64::new(terms.trace_uq[0], terms.trace_uq[1]);
    let identity = (terms.lhs - terms.rhs).abs();
    let trace_free = if trace_uq.norm() <= 1e-12 { (terms.lhs - 2.0 * terms.trace_q).abs() } else { 0.0 };
    let witness = format!(
        "x cycles labels {selection:?} of A_{n}(t); u = {unitary:?}; ‖[u,x]q‖₂² = {:.12}, identity {:.12}, unconjugated form {:.12}, tr(q) = {:.12}, |tr(uq)| = {:.3e}",
        terms.lhs,
        terms.rhs,
        terms.rhs_unconjugated,
        terms.trace_q,
        trace_uq.norm(),
    );
    Ok(Certificate::new(
        CertificateKind::Anticommutation,
        params([
            ("t", t.to_string()),
            ("n", n.to_string()),
            ("selection", format!("{selection:?}")),
            ("unitary", format!("{unitary:?}")),
        ]),
        identity.max(trace_free),
        FLOAT_SUM,
        witness,
        Some(seed),
    ))
}

/// Exact label comparison of `A_n(s)` and `A_n(t)` outside `[s·K_n, t·K_n)`,
/// with every label recomputed by the pointwise evaluator as a second route.
pub fn cutdown_equality_check(c: &Construction, s: &TowerRational, t: &TowerRational, n: usize) -> Result<Certificate> {
    if s >= t {
        return Err(Error::InvalidParameters(format!("need s < t, got s = {s}, t = {t}")));
    }
    let a = c.approximant(s, n)?.into_labels();
    let b = c.approximant(t, n)?.into_labels();
    let (lo, hi) = (c.cut(s, n)?, c.cut(t, n)?);
    let kept: Vec<usize> = (0..a.len()).filter(|&m| m < lo || m >= hi).collect();
    let mismatched: Vec<usize> = kept.iter().copied().filter(|&m| a[m] != b[m]).collect();
    let routes = (0..a.len())
        .into_par_iter()
        .map(|m| {
            Ok(usize::from(c.label_at(s, n, m)? != a[m]) + usize::from(c.label_at(t, n, m)? != b[m]))
        })
        .collect::<Result<Vec<usize>>>()?
        .into_iter()
        .sum::<usize>();
    let trace_q = BigRational::new(kept.len().into(), a.len().into());
    let expected = BigRational::from_integer(1.into()) - (t.to_ratio() - s.to_ratio()).abs();
    let trace_ok = trace_q == expected;
    let defect = (mismatched.len() + routes + usize::from(!trace_ok)) as f64;
    let witness = format!(
        "{} of {} shared labels differ{}; {routes} disagreements between list and pointwise routes; tr(q) = {trace_q}, 1 − (t − s) = {expected}",
        mismatched.len(),
        kept.len(),
        mismatched.first().map(|m| format!(" (first at m = {m}: {} vs {})", a[*m], b[*m])).unwrap_or_default(),
    );
    Ok(Certificate::new(
        CertificateKind::Cutdown,
        params([("s", s.to_string()), ("t", t.to_string()), ("n", n.to_string()), ("trace_q", trace_q.to_string())]),
        defect,
        0.0,
        witness,
        None,
    ))
}

/// Consistency sentinel tying a gap estimate to the Γ values of its endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityRecord {
    pub s: String,
    pub t: String,
    pub level: usize,
    /// `|Γ(A(s)) − Γ(A(t))| = |s − t|`.
    pub gamma_difference: f64,
    /// `15 · 2√|s−t|`.
    pub implied_bound: f64,
    pub gap_upper: f64,
    /// `|s−t| ≤ 30√|s−t|`, decided in exact arithmetic.
    pub pass: bool,
}

pub fn gamma_continuity_report(s: &TowerRational, t: &TowerRational, level: usize, gap: &GapEstimate) -> ContinuityRecord {
    let d = (s.to_ratio() - t.to_ratio()).abs();
    let pass = &d * &d <= BigRational::from_integer(900.into()) * &d;
    let diff = d.to_f64().unwrap_or(f64::NAN);
    ContinuityRecord {
        s: s.to_string(),
        t: t.to_string(),
        level,
        gamma_difference: diff,
        implied_bound: 15.0 * 2.0 * diff.sqrt(),
        gap_upper: gap.upper,
        pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction::SeedingRule;
    use crate::expectation::{gap_estimate, GapOptions};

    fn setup() -> Construction {
        Construction::new(4).unwrap()
    }

    #[test]
    fn singularity_examples() {
        let c = setup();
        for t in ["0", "1/2", "1"] {
            let cert = singularity_certificate(&c, &c.parse(t).unwrap(), 2, EXACT_ZERO).unwrap();
            assert!(cert.pass, "{}", cert.to_json());
            assert!(cert.defect <= 1e-12);
        }
        assert!(singularity_certificate(&c, &c.parse("1/2").unwrap(), 1, 1e-6).is_err());
    }

    #[test]
    fn singularity_matches_dense_oracle() {
        // √K_{n₁}·‖E_{A_{n₂}}(f ⊗ w_e)‖₂ at dim 42 against the factorized value.
        let c = setup();
        let t = c.parse("1/3").unwrap();
        let blocks = c.blocks(&t, 2, 3).unwrap();
        let fine = ExpectationOperator::for_approximant(&c, &t, 3, Strategy::Dense).unwrap();
        let w = phase_coefficients(7);
        for e in 0..6 {
            let we = ExpectationOperator::new(&c, blocks[e].labels.clone(), Strategy::Dense)
                .unwrap()
                .assemble(&w)
                .unwrap();
            for f in 0..6 {
                let proj = c.materialize(&[blocks[f].base.clone()]).unwrap();
                let dense = fine.apply(&proj.kron(&we)).unwrap().two_norm() * 6f64.sqrt();
                let fact = cross_expectation(&c, &blocks[e].labels, &w, &blocks[f].labels).unwrap();
                assert!((dense - fact).abs() <= 1e-10, "e={e} f={f}: {dense} vs {fact}");
                if e == f {
                    assert!((fact - 1.0).abs() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn block_orthogonality_examples() {
        let c = setup();
        let zero = c.parse("0").unwrap();
        assert!(block_orthogonality_check(&c, &zero, 1, 0, 1, 2).unwrap().defect <= 1e-12);
        let deep = block_orthogonality_check(&c, &zero, 1, 0, 1, 3).unwrap();
        assert!(deep.pass);
        assert!(deep.witness.starts_with("21 × 21"));
        assert_eq!(
            block_orthogonality_check(&c, &c.parse("1/2").unwrap(), 1, 0, 1, 2).unwrap_err(),
            Error::BelowGammaCut { index: 0, cut: 1 }
        );
    }

    #[test]
    fn block_orthogonality_detects_shared_masa() {
        // Below the cut at odd n both blocks use the extra masa, so the check must fail.
        let c = setup();
        let one = c.parse("1").unwrap();
        let blocks = c.blocks(&one, 1, 2).unwrap();
        let pairing = c.trace_pairing(&blocks[0].labels[0], &blocks[1].labels[0]).unwrap();
        assert_eq!(pairing, 1.0);
    }

    #[test]
    fn gamma_examples() {
        let c = setup();
        let half = gamma_commutator_check(&c, &c.parse("1/2").unwrap(), 1, 100, 7).unwrap();
        assert!(half.pass && half.defect <= 1e-12, "{}", half.to_json());
        assert!(gamma_commutator_check(&c, &c.parse("1").unwrap(), 1, 20, 1).unwrap().pass);
        let zero = gamma_commutator_check(&c, &c.parse("0").unwrap(), 1, 20, 1).unwrap();
        assert!(zero.pass && zero.witness.contains("p = 0"));
        assert!(gamma_commutator_check(&c, &c.parse("1/2").unwrap(), 2, 5, 1).is_err());
        let deep = gamma_commutator_check(&c, &c.parse("1/3").unwrap(), 3, 10, 2).unwrap();
        assert!(deep.pass, "{}", deep.to_json());
    }

    #[test]
    fn gamma_factored_route_matches_dense() {
        let c = setup();
        let t = c.parse("1/2").unwrap();
        let p = c.materialize(&c.gamma_projection(&t, 1).unwrap()).unwrap();
        let v = c.family(2).unwrap().basis(2).unwrap().trace_free_unitary();
        let x = random_unitary(2, 3);
        let pxp = &(&p * &x) * &p;
        let u = p.kron(&v);
        let big = pxp.kron(&ComplexMatrix::identity(3));
        let dense = (&(&u * &big) - &(&big * &u)).two_norm();
        let factored = (&(&p * &pxp) - &(&pxp * &p)).two_norm() * v.two_norm();
        assert!((dense - factored).abs() <= 1e-14);
    }

    #[test]
    fn anticommutation_examples() {
        let c = setup();
        let zero = c.parse("0").unwrap();
        let cert = anticommutation_check(&c, &zero, 1, &[0, 1], BlockUnitary::TraceFree, 0).unwrap();
        assert!(cert.defect <= 1e-10, "{}", cert.to_json());
        let half = c.parse("1/2").unwrap();
        let terms = anticommutation_terms(&c, &half, 2, &[3, 4, 5], BlockUnitary::TraceFree, 0).unwrap();
        assert!((terms.lhs - 1.0).abs() <= 1e-8);
        assert!((terms.trace_q - 0.5).abs() <= 1e-12);
        let proj = anticommutation_terms(&c, &half, 2, &[3, 4, 5], BlockUnitary::Projection, 0).unwrap();
        assert!(proj.lhs <= 1e-20);
        assert!((proj.rhs - proj.lhs).abs() <= 1e-10);
        assert!(anticommutation_check(&c, &half, 2, &[3, 4, 5], BlockUnitary::RandomPhases, 9).unwrap().pass);
    }

    #[test]
    fn anticommutation_needs_the_conjugate() {
        let c = setup();
        let terms = anticommutation_terms(&c, &c.parse("1/3").unwrap(), 2, &[2, 5, 3], BlockUnitary::RandomPhases, 4).unwrap();
        assert!((terms.lhs - terms.rhs).abs() <= 1e-10);
        assert!((terms.lhs - terms.rhs_unconjugated).abs() > 1e-6);
    }

    #[test]
    fn anticommutation_rejects_bad_selections() {
        let c = setup();
        let half = c.parse("1/2").unwrap();
        let check = |sel: &[usize]| anticommutation_check(&c, &half, 2, sel, BlockUnitary::TraceFree, 0);
        assert_eq!(check(&[2, 4]).unwrap_err(), Error::BelowGammaCut { index: 2, cut: 3 });
        assert!(check(&[4]).is_err());
        assert!(check(&[4, 4]).is_err());
        assert!(check(&[4, 6]).is_err());
    }

    #[test]
    fn cutdown_examples() {
        let c = setup();
        let cert = cutdown_equality_check(&c, &c.parse("1/2").unwrap(), &c.parse("2/3").unwrap(), 2).unwrap();
        assert_eq!(cert.params["trace_q"], "5/6");
        // A_2(2/3) is spliced blockwise from A_2(1), so block 1 differs from A_2(1/2).
        assert_eq!(cert.defect, 2.0);
        let literal = setup().with_seeding(SeedingRule::Literal);
        let cert = cutdown_equality_check(&literal, &literal.parse("1/2").unwrap(), &literal.parse("2/3").unwrap(), 2).unwrap();
        assert!(cert.pass, "{}", cert.to_json());
        let full = cutdown_equality_check(&c, &c.parse("0").unwrap(), &c.parse("1").unwrap(), 2).unwrap();
        assert!(full.pass);
        assert_eq!(full.params["trace_q"], "0");
        assert!(cutdown_equality_check(&c, &c.parse("1").unwrap(), &c.parse("0").unwrap(), 2).is_err());
    }

    #[test]
    fn cutdown_with_seeded_parameters() {
        // The literal splice keeps the shared labels; the blockwise splice
        // (the one that yields masas) cannot.
        let (s, t) = ("1/6", "5/6");
        let literal = setup().with_seeding(SeedingRule::Literal);
        let cert = cutdown_equality_check(&literal, &literal.parse(s).unwrap(), &literal.parse(t).unwrap(), 3).unwrap();
        assert!(cert.pass, "{}", cert.to_json());
        let c = setup();
        let cert = cutdown_equality_check(&c, &c.parse(s).unwrap(), &c.parse(t).unwrap(), 3).unwrap();
        assert!(!cert.pass);
        assert!(cert.witness.contains("0 disagreements"));
    }

    #[test]
    fn continuity_sentinel() {
        let c = setup();
        let (s, t) = (c.parse("1/2").unwrap(), c.parse("2/3").unwrap());
        let gap = gap_estimate(&c, &s, &t, 2, GapOptions::default()).unwrap();
        let rec = gamma_continuity_report(&s, &t, 2, &gap);
        assert!(rec.pass);
        assert!((rec.gamma_difference - 1.0 / 6.0).abs() < 1e-15);
        let same = gamma_continuity_report(&s, &s, 2, &gap);
        assert!(same.pass && same.gamma_difference == 0.0);
    }

    #[test]
    fn certificate_json_schema_and_determinism() {
        let c = setup();
        let t = c.parse("1/2").unwrap();
        let a = gamma_commutator_check(&c, &t, 1, 10, 3).unwrap();
        let b = gamma_commutator_check(&c, &t, 1, 10, 3).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let v: serde_json::Value = serde_json::from_str(&a.to_json()).unwrap();
        for key in ["kind", "params", "defect", "threshold", "pass", "witness", "seed"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["kind"], "gamma-commutation");
        let back: Certificate = serde_json::from_value(v).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn nan_never_passes() {
        let cert = Certificate::new(CertificateKind::Cutdown, BTreeMap::new(), f64::NAN, 1.0, String::new(), None);
        assert!(!cert.pass);
    }
}
