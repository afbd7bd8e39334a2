//! Dense square complex matrices with the normalized trace `tr(1) = 1`.

use std::io::{self, Write};
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Largest dimension the crate will hold densely (level 4 of the default tower is 1806).
pub const DENSE_BUDGET: usize = 2048;

/// Default comparison tolerance for float checks.
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        ComplexMatrix { dim, data: vec![Complex64::new(0.0, 0.0); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Row-major entries.
    pub fn from_rows(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch { left: dim * dim, right: data.len() });
        }
        Ok(ComplexMatrix { dim, data })
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> Complex64) -> Self {
        let data = (0..dim * dim).map(|k| f(k / dim, k % dim)).collect();
        ComplexMatrix { dim, data }
    }

    pub fn diagonal(diag: &[Complex64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * diag.len() + i] = d;
        }
        m
    }

    /// `|a⟩⟨b|`.
    pub fn outer(a: &[Complex64], b: &[Complex64]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch { left: a.len(), right: b.len() });
        }
        Ok(Self::from_fn(a.len(), |i, j| a[i] * b[j].conj()))
    }

    pub fn projection(v: &[Complex64]) -> Self {
        Self::from_fn(v.len(), |i, j| v[i] * v[j].conj())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: Complex64) {
        self.data[i * self.dim + j] = value;
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self.get(j, i).conj())
    }

    pub fn scale(&self, c: Complex64) -> Self {
        ComplexMatrix { dim: self.dim, data: self.data.iter().map(|&x| x * c).collect() }
    }

    /// `y = x v`.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(v.len(), self.dim);
        self.data
            .chunks_exact(self.dim)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `⟨v, x v⟩`, linear in the second slot.
    pub fn expectation_value(&self, v: &[Complex64]) -> Complex64 {
        let xv = self.apply(v);
        v.iter().zip(&xv).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let n = self.dim;
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * n..(k + 1) * n];
                for (o, b) in row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        });
        Ok(ComplexMatrix { dim: n, data: out })
    }

    pub fn kron(&self, other: &Self) -> Self {
        let (a, b) = (self.dim, other.dim);
        let n = a * b;
        Self::from_fn(n, |r, c| self.get(r / b, c / b) * other.get(r % b, c % b))
    }

    /// `(1/dim) Σ x_ii`.
    pub fn normalized_trace(&self) -> Complex64 {
        let sum: Complex64 = (0..self.dim).map(|i| self.get(i, i)).sum();
        sum / self.dim as f64
    }

    /// `tr(x* x)^{1/2}` with the normalized trace.
    pub fn two_norm(&self) -> f64 {
        (self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.dim as f64).sqrt()
    }

    /// Normalized Hilbert–Schmidt inner product `tr(x* y)`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        let sum: Complex64 = self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum();
        sum / self.dim as f64
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `‖x - y‖₂`.
    pub fn distance(&self, other: &Self) -> f64 {
        (self - other).two_norm()
    }

    /// `‖x* x - 1‖₂`.
    pub fn unitarity_defect(&self) -> f64 {
        let g = self.adjoint().matmul(self).expect("square");
        g.distance(&Self::identity(self.dim))
    }

    /// Little-endian `f64` pairs `(re, im)`, row-major. Debug aid only.
    pub fn write_binary<W: Write>(&self, mut w: W) -> io::Result<()> {
        for z in &self.data {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(dim: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != dim * dim * 16 {
            return Err(Error::DimensionMismatch { left: dim * dim * 16, right: bytes.len() });
        }
        let data = bytes
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().unwrap());
                let im = f64::from_le_bytes(c[8..].try_into().unwrap());
                Complex64::new(re, im)
            })
            .collect();
        Ok(ComplexMatrix { dim, data })
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            Err(Error::DimensionMismatch { left: self.dim, right: other.dim })
        } else {
            Ok(())
        }
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect();
        ComplexMatrix { dim: self.dim, data }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect();
        ComplexMatrix { dim: self.dim, data }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs).expect("dimension mismatch")
    }
}

/// Kronecker product of a non-empty list, in list order.
pub fn kron_chain(factors: &[ComplexMatrix]) -> Result<ComplexMatrix> {
    let (first, rest) = factors
        .split_first()
        .ok_or_else(|| Error::InvalidParameters("empty Kronecker chain".into()))?;
    Ok(rest.iter().fold(first.clone(), |acc, f| acc.kron(f)))
}

/// Kronecker product of vectors, in list order.
pub fn kron_vectors(factors: &[&[Complex64]]) -> Vec<Complex64> {
    factors.iter().fold(vec![Complex64::new(1.0, 0.0)], |acc, f| {
        acc.iter().flat_map(|a| f.iter().map(move |b| a * b)).collect()
    })
}

/// Entries i.i.d. standard complex Gaussian, deterministic per seed.
pub fn random_gaussian(dim: usize, seed: u64) -> ComplexMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..dim * dim)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        })
        .collect();
    ComplexMatrix { dim, data }
}

/// Approximately Haar-distributed unitary: Gram–Schmidt on the columns of a
/// complex Gaussian matrix, run twice for orthogonality to machine precision.
pub fn random_unitary(dim: usize, seed: u64) -> ComplexMatrix {
    let g = random_gaussian(dim, seed);
    let mut cols: Vec<Vec<Complex64>> =
        (0..dim).map(|j| (0..dim).map(|i| g.get(i, j)).collect()).collect();
    for j in 0..dim {
        for _pass in 0..2 {
            for k in 0..j {
                let (done, rest) = cols.split_at_mut(j);
                let proj: Complex64 = done[k].iter().zip(&rest[0]).map(|(a, b)| a.conj() * b).sum();
                for (x, q) in rest[0].iter_mut().zip(&done[k]) {
                    *x -= proj * q;
                }
            }
        }
        let norm = cols[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for x in cols[j].iter_mut() {
            *x /= norm;
        }
    }
    ComplexMatrix::from_fn(dim, |i, j| cols[j][i])
}
