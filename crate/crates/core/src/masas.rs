//! Pairwise orthogonal masas in `M_p` for prime `p`, realized as the
//! eigenbases of the clock operator `Z` and the Weyl unitaries `X Z^a`.
//!
//! For odd `p`, the eigenvector of `X Z^a` with eigenvalue `ω^l` has
//! coordinates `ω^{a·j(j-1)/2 - l·j} / √p`. For `p = 2` and `a = 1` the
//! eigenvalues are `±i`; vector `l` then carries eigenvalue `i·(-1)^l`.
//! Coordinate 0 is always `1/√p`, which fixes the global phase.

use std::f64::consts::PI;

use num_bigint::BigUint;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;
use crate::tower::is_prime;

/// Families with at most this many stored coordinates are cached.
const CACHE_LIMIT: usize = 1 << 20;

fn root_of_unity(p: usize, k: usize) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * (k % p) as f64 / p as f64)
}

/// One masa of `M_p`, held as its orthonormal eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct MasaBasis {
    p: usize,
    columns: Vec<Vec<Complex64>>,
}

impl MasaBasis {
    pub fn new(columns: Vec<Vec<Complex64>>) -> Result<Self> {
        let p = columns.len();
        if let Some(bad) = columns.iter().find(|c| c.len() != p) {
            return Err(Error::DimensionMismatch { left: p, right: bad.len() });
        }
        Ok(MasaBasis { p, columns })
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn vector(&self, l: usize) -> &[Complex64] {
        &self.columns[l]
    }

    /// Columns `v_0 … v_{p-1}` as a unitary matrix.
    pub fn unitary(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.p, |i, j| self.columns[j][i])
    }

    /// Minimal projection `e_l = v_l v_l*`.
    pub fn projection(&self, l: usize) -> ComplexMatrix {
        ComplexMatrix::projection(&self.columns[l])
    }

    /// `Σ_l ω^l e_l`, a unitary of the masa with zero trace.
    pub fn trace_free_unitary(&self) -> ComplexMatrix {
        let mut w = ComplexMatrix::zeros(self.p);
        for (l, v) in self.columns.iter().enumerate() {
            let phase = root_of_unity(self.p, l);
            for i in 0..self.p {
                for j in 0..self.p {
                    let z = w.get(i, j) + phase * v[i] * v[j].conj();
                    w.set(i, j, z);
                }
            }
        }
        w
    }

    /// `‖Σ_l e_l - 1‖₂`.
    pub fn completeness_defect(&self) -> f64 {
        let mut sum = ComplexMatrix::zeros(self.p);
        for l in 0..self.p {
            sum = &sum + &self.projection(l);
        }
        sum.distance(&ComplexMatrix::identity(self.p))
    }

    /// Largest deviation of the Gram matrix from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (a, va) in self.columns.iter().enumerate() {
            for (b, vb) in self.columns.iter().enumerate() {
                let g = inner(va, vb);
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((g - target).norm());
            }
        }
        worst
    }
}

/// `⟨a, b⟩`, conjugate-linear in `a`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `max_{l,l'} |tr(e_l f_{l'}) - tr(e_l) tr(f_{l'})|` with the normalized trace.
/// Zero exactly when the two masas are orthogonal.
pub fn orthogonality_defect(a: &MasaBasis, b: &MasaBasis) -> Result<f64> {
    if a.p != b.p {
        return Err(Error::DimensionMismatch { left: a.p, right: b.p });
    }
    let p = a.p as f64;
    let mut worst = 0.0f64;
    for v in &a.columns {
        for w in &b.columns {
            let tr_ef = inner(v, w).norm_sqr() / p;
            worst = worst.max((tr_ef - 1.0 / (p * p)).abs());
        }
    }
    Ok(worst)
}

/// The family `D^(0), …, D^(count-1)` of pairwise orthogonal masas in `M_p`.
#[derive(Debug, Clone)]
pub struct OrthoFamily {
    p: usize,
    count: usize,
    /// `cache[(m * p + l) * p + i]` is coordinate `i` of `v^(m)_l`.
    cache: Option<Vec<Complex64>>,
}

impl OrthoFamily {
    pub fn weyl(p: usize, count: usize) -> Result<Self> {
        if !is_prime(&BigUint::from(p)) {
            return Err(Error::NotPrime(p as u64));
        }
        if count > p + 1 {
            return Err(Error::FamilyTooLarge { count, max: p + 1 });
        }
        let mut family = OrthoFamily { p, count, cache: None };
        if p * p * count <= CACHE_LIMIT {
            let mut cache = Vec::with_capacity(p * p * count);
            for m in 0..count {
                for l in 0..p {
                    cache.extend(family.compute_vector(m, l));
                }
            }
            family.cache = Some(cache);
        }
        Ok(family)
    }

    pub fn prime(&self) -> usize {
        self.p
    }

    pub fn count(&self) -> usize {
        self.count
    }

    fn check(&self, m: usize, l: usize) -> Result<()> {
        if m >= self.count {
            return Err(Error::IndexOutOfRange { what: "masa index", index: m, bound: self.count });
        }
        if l >= self.p {
            return Err(Error::IndexOutOfRange { what: "vector index", index: l, bound: self.p });
        }
        Ok(())
    }

    /// `v^(m)_l`, the unit vector of the minimal projection `e^(m)_l`.
    pub fn min_projection_vector(&self, m: usize, l: usize) -> Result<Vec<Complex64>> {
        self.check(m, l)?;
        Ok(self.vector_unchecked(m, l).into_owned())
    }

    pub(crate) fn vector_unchecked(&self, m: usize, l: usize) -> std::borrow::Cow<'_, [Complex64]> {
        match &self.cache {
            Some(cache) => {
                let start = (m * self.p + l) * self.p;
                std::borrow::Cow::Borrowed(&cache[start..start + self.p])
            }
            None => std::borrow::Cow::Owned(self.compute_vector(m, l)),
        }
    }

    fn compute_vector(&self, m: usize, l: usize) -> Vec<Complex64> {
        let p = self.p;
        let scale = 1.0 / (p as f64).sqrt();
        if m == 0 {
            let mut v = vec![Complex64::new(0.0, 0.0); p];
            v[l] = Complex64::new(1.0, 0.0);
            return v;
        }
        let a = m - 1;
        if p == 2 {
            // Eigenvalue λ = i^a (-1)^l; coordinates (1, λ^{-1}) / √2.
            let lambda = Complex64::i().powu(a as u32) * if l == 0 { 1.0 } else { -1.0 };
            return vec![Complex64::new(scale, 0.0), lambda.inv() * scale];
        }
        (0..p)
            .map(|j| {
                let quad = (a * (j * j.saturating_sub(1) / 2 % p)) % p;
                let lin = (l * j) % p;
                root_of_unity(p, quad + p - lin) * scale
            })
            .collect()
    }

    /// Eigenvalue of the Weyl operator of masa `m` on vector `l`.
    pub fn eigenvalue(&self, m: usize, l: usize) -> Complex64 {
        let base = root_of_unity(self.p, l);
        if self.p == 2 && m == 2 {
            base * Complex64::i()
        } else {
            base
        }
    }

    /// `Z` for `m = 0`, `X Z^{m-1}` otherwise; `X` is the cyclic shift `|j⟩ ↦ |j+1⟩`.
    pub fn weyl_operator(&self, m: usize) -> ComplexMatrix {
        let p = self.p;
        if m == 0 {
            let diag: Vec<Complex64> = (0..p).map(|j| root_of_unity(p, j)).collect();
            return ComplexMatrix::diagonal(&diag);
        }
        let a = m - 1;
        let mut out = ComplexMatrix::zeros(p);
        for j in 0..p {
            out.set((j + 1) % p, j, root_of_unity(p, a * j));
        }
        out
    }

    pub fn basis(&self, m: usize) -> Result<MasaBasis> {
        self.check(m, 0)?;
        let columns = (0..self.p).map(|l| self.vector_unchecked(m, l).into_owned()).collect();
        MasaBasis::new(columns)
    }

    /// `|⟨v^(m)_l, v^(m')_{l'}⟩|²`.
    pub fn overlap(&self, (m, l): (usize, usize), (m2, l2): (usize, usize)) -> f64 {
        if m == m2 {
            return if l == l2 { 1.0 } else { 0.0 };
        }
        inner(&self.vector_unchecked(m, l), &self.vector_unchecked(m2, l2)).norm_sqr()
    }

    /// Exhaustive check: the largest `||⟨v, w⟩|² - 1/p|` over vectors in
    /// distinct masas.
    pub fn cross_defect(&self) -> f64 {
        let target = 1.0 / self.p as f64;
        let mut worst = 0.0f64;
        for m in 0..self.count {
            for m2 in (m + 1)..self.count {
                for l in 0..self.p {
                    let v = self.vector_unchecked(m, l);
                    for l2 in 0..self.p {
                        let o = inner(&v, &self.vector_unchecked(m2, l2)).norm_sqr();
                        worst = worst.max((o - target).abs());
                    }
                }
            }
        }
        worst
    }

    pub fn export(&self) -> FamilyRecord {
        let bases = (0..self.count)
            .map(|m| {
                (0..self.p)
                    .flat_map(|l| self.vector_unchecked(m, l).into_owned())
                    .map(|z| [z.re, z.im])
                    .collect()
            })
            .collect();
        FamilyRecord { p: self.p, count: self.count, bases }
    }
}

/// JSON export: each basis is its unitary flattened column-major as `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyRecord {
    pub p: usize,
    pub count: usize,
    pub bases: Vec<Vec<[f64; 2]>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn qubit_family_is_the_three_pauli_bases() {
        let fam = OrthoFamily::weyl(2, 3).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let h0 = fam.min_projection_vector(1, 0).unwrap();
        assert!(close(h0[0], Complex64::new(s, 0.0), 1e-15));
        assert!(close(h0[1], Complex64::new(s, 0.0), 1e-15));
        // Y eigenbasis: (1, ±i)/√2.
        let y = fam.basis(2).unwrap();
        let pauli_y = ComplexMatrix::from_rows(
            2,
            vec![0.0.into(), -Complex64::i(), Complex64::i(), 0.0.into()],
        )
        .unwrap();
        for l in 0..2 {
            let v = y.vector(l);
            let yv = pauli_y.apply(v);
            let ev = inner(v, &yv);
            assert!((ev.re.abs() - 1.0).abs() < 1e-15 && ev.im.abs() < 1e-15);
        }
        assert!(fam.cross_defect() <= 1e-15);
    }

    #[test]
    fn dense_cross_pairs_for_p3() {
        let fam = OrthoFamily::weyl(3, 4).unwrap();
        let mut pairs = 0;
        for m in 0..4 {
            for m2 in 0..4 {
                if m == m2 {
                    continue;
                }
                let (a, b) = (fam.basis(m).unwrap(), fam.basis(m2).unwrap());
                for l in 0..3 {
                    for l2 in 0..3 {
                        let o = inner(a.vector(l), b.vector(l2)).norm_sqr();
                        assert!((o - 1.0 / 3.0).abs() <= 1e-12);
                        pairs += 1;
                    }
                }
            }
        }
        assert_eq!(pairs, 108);
    }

    #[test]
    fn p43_family() {
        let fam = OrthoFamily::weyl(43, 7).unwrap();
        assert!(fam.cross_defect() <= 1e-10);
        for m in 0..7 {
            let b = fam.basis(m).unwrap();
            assert!(b.orthonormality_defect() <= 1e-12);
        }
    }

    #[test]
    fn family_errors() {
        assert_eq!(OrthoFamily::weyl(5, 7).unwrap_err(), Error::FamilyTooLarge { count: 7, max: 6 });
        assert_eq!(OrthoFamily::weyl(6, 2).unwrap_err(), Error::NotPrime(6));
        let fam = OrthoFamily::weyl(3, 2).unwrap();
        assert!(fam.min_projection_vector(2, 0).is_err());
        assert!(fam.min_projection_vector(0, 3).is_err());
    }

    #[test]
    fn defect_examples() {
        let fam = OrthoFamily::weyl(2, 3).unwrap();
        let (d, h) = (fam.basis(0).unwrap(), fam.basis(1).unwrap());
        assert!((orthogonality_defect(&d, &d).unwrap() - 0.25).abs() < 1e-15);
        assert!(orthogonality_defect(&d, &h).unwrap() <= 1e-12);
        for p in [3usize, 5, 7, 11] {
            let f = OrthoFamily::weyl(p, 2).unwrap();
            let b = f.basis(1).unwrap();
            let expected = (p as f64 - 1.0) / (p * p) as f64;
            assert!((orthogonality_defect(&b, &b).unwrap() - expected).abs() < 1e-12);
        }
        let other = OrthoFamily::weyl(3, 1).unwrap().basis(0).unwrap();
        assert!(orthogonality_defect(&d, &other).is_err());
    }

    #[test]
    fn standard_basis_and_unit_norms() {
        let fam = OrthoFamily::weyl(7, 8).unwrap();
        for j in 0..7 {
            let v = fam.min_projection_vector(0, j).unwrap();
            for (i, z) in v.iter().enumerate() {
                assert_eq!(*z, Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0));
            }
        }
        for m in 0..8 {
            for l in 0..7 {
                let v = fam.min_projection_vector(m, l).unwrap();
                assert!((inner(&v, &v).re - 1.0).abs() <= 1e-12);
                if m > 0 {
                    assert!(v[0].im == 0.0 && v[0].re > 0.0);
                }
            }
        }
    }

    #[test]
    fn eigen_enumeration_completeness_and_trace_free_unitaries() {
        for (p, count) in [(2usize, 3usize), (3, 4), (7, 8), (43, 7)] {
            let fam = OrthoFamily::weyl(p, count).unwrap();
            for m in 0..count {
                let op = fam.weyl_operator(m);
                let basis = fam.basis(m).unwrap();
                for l in 0..p {
                    let v = basis.vector(l);
                    let lhs = op.apply(v);
                    let lambda = fam.eigenvalue(m, l);
                    let err = lhs.iter().zip(v).map(|(a, b)| (a - lambda * b).norm()).fold(0.0, f64::max);
                    assert!(err <= 1e-10, "p={p} m={m} l={l} err={err}");
                }
                assert!(basis.completeness_defect() <= 1e-12);
                let w = basis.trace_free_unitary();
                assert!(w.normalized_trace().norm() <= 1e-12);
                assert!(w.unitarity_defect() <= 1e-12);
            }
        }
    }

    #[test]
    fn cross_family_trace_factorizes() {
        let fam = OrthoFamily::weyl(7, 8).unwrap();
        for m in 0..8 {
            for m2 in 0..8 {
                if m == m2 {
                    continue;
                }
                let (e, f) = (fam.basis(m).unwrap().projection(2), fam.basis(m2).unwrap().projection(5));
                let tr = (&e * &f).normalized_trace();
                assert!((tr - Complex64::new(1.0 / 49.0, 0.0)).norm() <= 1e-10);
            }
        }
    }

    #[test]
    fn uncached_family_matches_cache() {
        let small = OrthoFamily::weyl(43, 44).unwrap();
        let big = OrthoFamily { p: 43, count: 44, cache: None };
        for (m, l) in [(0, 5), (3, 0), (43, 42), (17, 11)] {
            assert_eq!(small.min_projection_vector(m, l).unwrap(), big.min_projection_vector(m, l).unwrap());
        }
    }

    #[test]
    fn export_shape() {
        let fam = OrthoFamily::weyl(3, 2).unwrap();
        let rec = fam.export();
        assert_eq!(rec.bases.len(), 2);
        assert_eq!(rec.bases[1].len(), 9);
        let json = serde_json::to_string(&rec).unwrap();
        let back: FamilyRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rec);
    }
}
