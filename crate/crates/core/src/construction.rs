//! Symbolic construction of the approximants `A_n(t)`.
//!
//! A minimal projection of `A_n(t)` is an elementary tensor of rank-one
//! projections, one per leg, so it is stored as a list of `(masa, vector)`
//! index pairs. All branching is integer arithmetic on those labels; matrices
//! only appear in [`Construction::materialize`].
//!
//! Level `n + 1` is built from level `n` by splitting label `m` into
//! `m' = m·k_{n+1} + l`, appending `e^(j)_l` on leg `n + 1` where the masa
//! index is `j = m` when `n` is even, and when `n` is odd `j = K_n` below
//! the cut `t·K_n` and `j = m` at or above it. At its first level `n_0(t) > 1`
//! a parameter copies labels from the two neighbouring points of `I_{n_0 - 1}`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use num_traits::ToPrimitive;

use crate::error::{Error, Result};
use crate::masas::OrthoFamily;
use crate::matrix::{kron_vectors, ComplexMatrix, DENSE_BUDGET};
use crate::tower::{PrimeTower, TowerRational};

/// Largest approximant enumerated as an explicit label list.
pub const LABEL_BUDGET: usize = 4_000_000;

/// `e^(masa)_index` on one leg.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LegEntry {
    pub masa: usize,
    pub index: usize,
}

/// An elementary tensor of rank-one projections on consecutive legs
/// `first_leg, first_leg + 1, …`. Full labels start at leg 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProjLabel {
    first_leg: usize,
    legs: Vec<LegEntry>,
}

impl ProjLabel {
    pub fn new(first_leg: usize, legs: Vec<LegEntry>) -> Self {
        ProjLabel { first_leg, legs }
    }

    pub fn full(legs: Vec<LegEntry>) -> Self {
        ProjLabel { first_leg: 1, legs }
    }

    pub fn first_leg(&self) -> usize {
        self.first_leg
    }

    /// Last leg covered; equals the level for full labels.
    pub fn last_leg(&self) -> usize {
        self.first_leg + self.legs.len() - 1
    }

    pub fn level(&self) -> usize {
        self.last_leg()
    }

    pub fn legs(&self) -> &[LegEntry] {
        &self.legs
    }

    /// `(leg, entry)` pairs.
    pub fn entries(&self) -> impl Iterator<Item = (usize, LegEntry)> + '_ {
        self.legs.iter().enumerate().map(move |(i, e)| (self.first_leg + i, *e))
    }

    pub fn extended(&self, entry: LegEntry) -> Self {
        let mut legs = Vec::with_capacity(self.legs.len() + 1);
        legs.extend_from_slice(&self.legs);
        legs.push(entry);
        ProjLabel { first_leg: self.first_leg, legs }
    }

    /// The part of the label on legs `from..`.
    pub fn tail(&self, from: usize) -> ProjLabel {
        let skip = from - self.first_leg;
        ProjLabel { first_leg: from, legs: self.legs[skip..].to_vec() }
    }

    /// The part of the label on legs `..=to`.
    pub fn prefix(&self, to: usize) -> ProjLabel {
        let keep = to + 1 - self.first_leg;
        ProjLabel { first_leg: self.first_leg, legs: self.legs[..keep].to_vec() }
    }

    fn same_shape(&self, other: &ProjLabel) -> Result<()> {
        if self.first_leg != other.first_leg || self.legs.len() != other.legs.len() {
            Err(Error::LevelMismatch { left: self.last_leg(), right: other.last_leg() })
        } else {
            Ok(())
        }
    }
}

impl fmt::Display for ProjLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.legs {
            write!(f, "({},{})", e.masa, e.index)?;
        }
        Ok(())
    }
}

impl FromStr for ProjLabel {
    type Err = Error;

    /// Parses `(m_1,l_1)(m_2,l_2)…` as a full label.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("bad label {s:?}"));
        let body = s.trim().strip_prefix('(').and_then(|b| b.strip_suffix(')')).ok_or_else(bad)?;
        let legs = body
            .split(")(")
            .map(|pair| {
                let (m, l) = pair.split_once(',').ok_or_else(bad)?;
                Ok(LegEntry {
                    masa: m.trim().parse().map_err(|_| bad())?,
                    index: l.trim().parse().map_err(|_| bad())?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ProjLabel::full(legs))
    }
}

/// The ordered minimal projections of `A_n(t)`; position `m` holds `ⁿf_m(t)`.
#[derive(Debug, Clone)]
pub struct Approximant {
    t: TowerRational,
    level: usize,
    labels: Vec<ProjLabel>,
}

impl Approximant {
    pub fn t(&self) -> &TowerRational {
        &self.t
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn labels(&self) -> &[ProjLabel] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<ProjLabel> {
        self.labels
    }

    /// One line per label: `m: (m_1,l_1)(m_2,l_2)…`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (m, label) in self.labels.iter().enumerate() {
            out.push_str(&format!("{m}: {label}\n"));
        }
        out
    }
}

/// Parses the text produced by [`Approximant::dump`].
pub fn parse_label_dump(text: &str) -> Result<Vec<(usize, ProjLabel)>> {
    text.lines()
        .filter(|line| !line.trim().is_empty())
        .map(|line| {
            let (m, label) = line
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("bad dump line {line:?}")))?;
            let m = m.trim().parse().map_err(|_| Error::Parse(format!("bad index in {line:?}")))?;
            Ok((m, label.parse()?))
        })
        .collect()
}

/// `A^(e)_{n₂,n₁}(t)` for `e = ⁿ¹f_m(t)`: the partial labels on legs
/// `n₁+1 … n₂` of all level-`n₂` labels extending `e`.
#[derive(Debug, Clone)]
pub struct BlockMasa {
    pub base: ProjLabel,
    pub base_index: usize,
    pub target_level: usize,
    pub labels: Vec<ProjLabel>,
}

impl BlockMasa {
    pub fn base_level(&self) -> usize {
        self.base.level()
    }
}

/// How the first approximant of a parameter `t ∉ I_{n₁}` is spliced from
/// its neighbours `m₀/K_{n₁}` and `(m₀+1)/K_{n₁}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SeedingRule {
    /// Whole blocks: the upper neighbour supplies the labels under the first
    /// `S` labels of level `n₁`, the lower one the rest. `S ≥ m₀ + 1` is the
    /// least split at which both neighbours' prefixes are the same
    /// projection, so the result is always a masa.
    #[default]
    Blockwise,
    /// Split at label `t·K_{n₁+1}`, inside block `m₀`. The block then mixes
    /// two mutually unbiased masas and the labels are not orthogonal.
    Literal,
}

/// The prime tower together with one orthogonal family per leg.
#[derive(Debug, Clone)]
pub struct Construction {
    tower: PrimeTower,
    families: Vec<OrthoFamily>,
    seeding: SeedingRule,
}

impl Construction {
    /// Leg `r` gets the `K_{r-1} + 1` Weyl masas of `M_{k_r}`.
    pub fn new(depth: usize) -> Result<Self> {
        Self::with_tower(PrimeTower::build(depth)?)
    }

    pub fn with_tower(tower: PrimeTower) -> Result<Self> {
        let families = (1..=tower.depth())
            .map(|r| OrthoFamily::weyl(tower.prime_usize(r)?, tower.size(r - 1)? + 1))
            .collect::<Result<Vec<_>>>()?;
        Ok(Construction { tower, families, seeding: SeedingRule::default() })
    }

    pub fn with_seeding(mut self, seeding: SeedingRule) -> Self {
        self.seeding = seeding;
        self
    }

    pub fn seeding(&self) -> SeedingRule {
        self.seeding
    }

    /// Number of leading labels of `A_n(t)`, `n = n₀(t)`, copied from the upper neighbour.
    fn seed_split(&self, t: &TowerRational, n: usize) -> Result<usize> {
        match self.seeding {
            SeedingRule::Literal => self.cut(t, n),
            SeedingRule::Blockwise => {
                let n1 = n - 1;
                let m0 = self.tower.floor_scaled(t, n1)?.to_usize().unwrap_or(usize::MAX);
                let upper = self.build_labels(&self.tower.rational(m0 + 1, n1)?, n1)?;
                let lower = self.build_labels(&self.tower.rational(m0, n1)?, n1)?;
                let split = (m0 + 1..upper.len())
                    .find(|&s| self.same_prefix_projection(&upper, &lower, s))
                    .unwrap_or(upper.len());
                Ok(split * self.tower.prime_usize(n)?)
            }
        }
    }

    /// Whether the first `split` labels of two masas of `N_n` sum to the same
    /// projection: they agree label by label at some level `j`, and `split`
    /// is a whole number of level-`j` blocks.
    fn same_prefix_projection(&self, a: &[ProjLabel], b: &[ProjLabel], split: usize) -> bool {
        let n = a.first().map_or(1, ProjLabel::last_leg);
        (1..=n).rev().any(|j| {
            let block = a.len() / self.tower.size(j).unwrap_or(a.len());
            split.is_multiple_of(block) && (0..split).all(|i| a[i].prefix(j) == b[i].prefix(j))
        })
    }

    pub fn tower(&self) -> &PrimeTower {
        &self.tower
    }

    pub fn depth(&self) -> usize {
        self.tower.depth()
    }

    /// Orthogonal family on leg `r` (1-based).
    pub fn family(&self, r: usize) -> Result<&OrthoFamily> {
        self.families
            .get(r.wrapping_sub(1))
            .ok_or(Error::LevelOutOfRange { level: r, depth: self.depth() })
    }

    pub fn families(&self) -> &[OrthoFamily] {
        &self.families
    }

    pub fn parse(&self, t: &str) -> Result<TowerRational> {
        self.tower.parse_rational(t)
    }

    fn check_parameter(&self, t: &TowerRational, n: usize) -> Result<()> {
        if n == 0 || n > self.depth() {
            return Err(Error::LevelOutOfRange { level: n, depth: self.depth() });
        }
        let n0 = self.tower.level_of(t)?;
        if n < n0 {
            return Err(Error::LevelBelowCanonical { level: n, canonical: n0 });
        }
        Ok(())
    }

    /// `t·K_n`, the number of labels under the projection `p`.
    pub fn cut(&self, t: &TowerRational, n: usize) -> Result<usize> {
        self.tower.cut(t, n)
    }

    /// Masa index used on leg `n₁ + 1` under label `m` of level `n₁`.
    fn rule_masa(&self, n1: usize, m: usize, cut: usize) -> Result<usize> {
        if n1.is_multiple_of(2) || m >= cut {
            Ok(m)
        } else {
            self.tower.size(n1)
        }
    }

    pub fn approximant(&self, t: &TowerRational, n: usize) -> Result<Approximant> {
        self.check_parameter(t, n)?;
        let count = self.tower.product(n)?;
        if count.to_usize().is_none_or(|c| c > LABEL_BUDGET) {
            return Err(Error::LabelBudget { level: n, count: count.to_string() });
        }
        let labels = self.build_labels(t, n)?;
        Ok(Approximant { t: t.clone(), level: n, labels })
    }

    fn build_labels(&self, t: &TowerRational, n: usize) -> Result<Vec<ProjLabel>> {
        let n0 = t.canonical_level();
        if n == 1 {
            return Ok((0..2)
                .map(|l| ProjLabel::full(vec![LegEntry { masa: 0, index: l }]))
                .collect());
        }
        let n1 = n - 1;
        if n > n0 {
            let parent = self.build_labels(t, n1)?;
            let k = self.tower.prime_usize(n)?;
            let cut = self.cut(t, n1)?;
            let mut out = Vec::with_capacity(parent.len() * k);
            for (m, f) in parent.iter().enumerate() {
                let masa = self.rule_masa(n1, m, cut)?;
                out.extend((0..k).map(|l| f.extended(LegEntry { masa, index: l })));
            }
            return Ok(out);
        }
        // First level of t: splice the neighbours m0/K_{n1} and (m0+1)/K_{n1}.
        let m0 = self.tower.floor_scaled(t, n1)?;
        let below = self.tower.rational(m0.clone(), n1)?;
        let above = self.tower.rational(m0 + 1u32, n1)?;
        let split = self.seed_split(t, n)?;
        let upper = self.build_labels(&above, n)?;
        let lower = self.build_labels(&below, n)?;
        Ok(upper
            .into_iter()
            .take(split)
            .chain(lower.into_iter().skip(split))
            .collect())
    }

    /// `ⁿf_m(t)` computed by walking from the top level down, without
    /// enumerating any approximant.
    pub fn label_at(&self, t: &TowerRational, n: usize, m: usize) -> Result<ProjLabel> {
        self.check_parameter(t, n)?;
        let size = self.tower.size(n)?;
        if m >= size {
            return Err(Error::IndexOutOfRange { what: "label index", index: m, bound: size });
        }
        self.label_at_unchecked(t, n, m)
    }

    fn label_at_unchecked(&self, t: &TowerRational, n: usize, m: usize) -> Result<ProjLabel> {
        if n == 1 {
            return Ok(ProjLabel::full(vec![LegEntry { masa: 0, index: m }]));
        }
        let n1 = n - 1;
        if n > t.canonical_level() {
            let k = self.tower.prime_usize(n)?;
            let (parent, l) = (m / k, m % k);
            let masa = self.rule_masa(n1, parent, self.cut(t, n1)?)?;
            return Ok(self.label_at_unchecked(t, n1, parent)?.extended(LegEntry { masa, index: l }));
        }
        let m0 = self.tower.floor_scaled(t, n1)?;
        let neighbour = if m < self.seed_split(t, n)? { m0 + 1u32 } else { m0 };
        self.label_at_unchecked(&self.tower.rational(neighbour, n1)?, n, m)
    }

    pub fn block_masa(&self, t: &TowerRational, m: usize, n1: usize, n2: usize) -> Result<BlockMasa> {
        self.check_parameter(t, n1)?;
        if n2 <= n1 || n2 > self.depth() {
            return Err(Error::InvalidParameters(format!("need n₁ < n₂ ≤ depth, got {n1}, {n2}")));
        }
        let base_size = self.tower.size(n1)?;
        if m >= base_size {
            return Err(Error::IndexOutOfRange { what: "block index", index: m, bound: base_size });
        }
        let block = self.tower.size(n2)? / base_size;
        let base = self.label_at(t, n1, m)?;
        let fine = self.approximant(t, n2)?;
        let labels = fine.labels[m * block..(m + 1) * block]
            .iter()
            .map(|g| {
                debug_assert_eq!(g.prefix(n1), base);
                g.tail(n1 + 1)
            })
            .collect();
        Ok(BlockMasa { base, base_index: m, target_level: n2, labels })
    }

    /// Every block masa `A^(e)_{n₂,n₁}(t)`, `e` running over `A_{n₁}(t)` in order.
    pub fn blocks(&self, t: &TowerRational, n1: usize, n2: usize) -> Result<Vec<BlockMasa>> {
        self.check_parameter(t, n1)?;
        if n2 <= n1 || n2 > self.depth() {
            return Err(Error::InvalidParameters(format!("need n₁ < n₂ ≤ depth, got {n1}, {n2}")));
        }
        let fine = self.approximant(t, n2)?.into_labels();
        let block = self.tower.size(n2)? / self.tower.size(n1)?;
        Ok(fine
            .chunks(block)
            .enumerate()
            .map(|(m, chunk)| BlockMasa {
                base: chunk[0].prefix(n1),
                base_index: m,
                target_level: n2,
                labels: chunk.iter().map(|g| g.tail(n1 + 1)).collect(),
            })
            .collect())
    }

    /// Labels `ⁿf_m(t)` for `m < t·K_n`; their sum is the projection `p` with `tr(p) = t`.
    pub fn gamma_projection(&self, t: &TowerRational, n: usize) -> Result<Vec<ProjLabel>> {
        let cut = self.cut(t, n)?;
        let mut labels = self.approximant(t, n)?.into_labels();
        labels.truncate(cut);
        Ok(labels)
    }

    /// Labels of `A_n(s)` with `m < s·K_n` or `m ≥ t·K_n`, summing to `q`.
    pub fn common_cutdown(&self, s: &TowerRational, t: &TowerRational, n: usize) -> Result<Vec<ProjLabel>> {
        if s >= t {
            return Err(Error::InvalidParameters(format!("need s < t, got s = {s}, t = {t}")));
        }
        self.check_parameter(s, n)?;
        self.check_parameter(t, n)?;
        let (lo, hi) = (self.cut(s, n)?, self.cut(t, n)?);
        Ok(self
            .approximant(s, n)?
            .into_labels()
            .into_iter()
            .enumerate()
            .filter(|(m, _)| *m < lo || *m >= hi)
            .map(|(_, label)| label)
            .collect())
    }

    /// Unnormalized overlap `Π_r |⟨v_r, w_r⟩|²` of two labels on the same legs.
    /// Divide by the dimension of those legs for the normalized `tr(ab)`.
    pub fn trace_pairing(&self, a: &ProjLabel, b: &ProjLabel) -> Result<f64> {
        a.same_shape(b)?;
        let mut product = 1.0;
        for ((leg, ea), eb) in a.entries().zip(b.legs()) {
            let fam = self.family(leg)?;
            product *= fam.overlap((ea.masa, ea.index), (eb.masa, eb.index));
            if product == 0.0 {
                break;
            }
        }
        Ok(product)
    }

    /// Dimension of the legs a label covers.
    pub fn label_dim(&self, label: &ProjLabel) -> Result<usize> {
        (label.first_leg()..=label.last_leg()).try_fold(1usize, |acc, r| {
            let k = self.tower.prime_usize(r)?;
            acc.checked_mul(k)
                .ok_or_else(|| Error::InvalidParameters("dimension overflow".into()))
        })
    }

    /// The unit vector `⊗_r v_r` of a label.
    pub fn label_vector(&self, label: &ProjLabel) -> Result<Vec<Complex64>> {
        let vectors = label
            .entries()
            .map(|(leg, e)| self.family(leg)?.min_projection_vector(e.masa, e.index))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&[Complex64]> = vectors.iter().map(|v| v.as_slice()).collect();
        Ok(kron_vectors(&refs))
    }

    /// Dense `Σ ⊗_r v_r v_r*` over the labels.
    pub fn materialize(&self, labels: &[ProjLabel]) -> Result<ComplexMatrix> {
        let first = labels
            .first()
            .ok_or_else(|| Error::InvalidParameters("no labels to materialize".into()))?;
        let dim = self.label_dim(first)?;
        if dim > DENSE_BUDGET {
            return Err(Error::DenseBudget { dim, budget: DENSE_BUDGET });
        }
        let mut out = ComplexMatrix::zeros(dim);
        for label in labels {
            label.same_shape(first)?;
            let v = self.label_vector(label)?;
            for (i, vi) in v.iter().enumerate() {
                if vi.norm_sqr() == 0.0 {
                    continue;
                }
                for (j, vj) in v.iter().enumerate() {
                    let z = out.get(i, j) + vi * vj.conj();
                    out.set(i, j, z);
                }
            }
        }
        Ok(out)
    }

    /// Largest pairing between distinct labels; zero iff the projections
    /// are mutually orthogonal.
    pub fn max_cross_pairing(&self, labels: &[ProjLabel]) -> Result<f64> {
        let mut worst = 0.0f64;
        for (i, a) in labels.iter().enumerate() {
            for b in &labels[i + 1..] {
                worst = worst.max(self.trace_pairing(a, b)?);
            }
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leg(masa: usize, index: usize) -> LegEntry {
        LegEntry { masa, index }
    }

    fn construction() -> Construction {
        Construction::new(4).unwrap()
    }

    #[test]
    fn base_level_is_diagonal() {
        let c = construction();
        for t in ["0", "1/2", "1"] {
            let a = c.approximant(&c.parse(t).unwrap(), 1).unwrap();
            assert_eq!(a.labels(), &[ProjLabel::full(vec![leg(0, 0)]), ProjLabel::full(vec![leg(0, 1)])]);
        }
    }

    #[test]
    fn odd_rule_at_half() {
        let c = construction();
        let a = c.approximant(&c.parse("1/2").unwrap(), 2).unwrap();
        for (m, label) in a.labels().iter().enumerate() {
            let block = m / 3;
            let expected_masa = if block == 0 { 2 } else { 1 };
            assert_eq!(label.legs()[1], leg(expected_masa, m % 3));
            assert_eq!(label.legs()[0], leg(0, block));
        }
    }

    #[test]
    fn odd_rule_at_zero_uses_block_index() {
        let c = construction();
        let a = c.approximant(&c.parse("0").unwrap(), 2).unwrap();
        for (m, label) in a.labels().iter().enumerate() {
            assert_eq!(label.legs()[1].masa, m / 3);
        }
        let one = c.approximant(&c.parse("1").unwrap(), 2).unwrap();
        assert!(one.labels().iter().all(|l| l.legs()[1].masa == 2));
    }

    #[test]
    fn even_rule_uses_parent_index() {
        let c = construction();
        for t in c.tower().grid(2).unwrap() {
            let a = c.approximant(&t, 3).unwrap();
            for (m, label) in a.labels().iter().enumerate() {
                assert_eq!(label.legs()[2], leg(m / 7, m % 7));
            }
        }
    }

    #[test]
    fn seeding_splices_neighbours() {
        let c = construction();
        let t = c.parse("5/6").unwrap();
        let lo = c.approximant(&c.parse("1/2").unwrap(), 2).unwrap();
        let hi = c.approximant(&c.parse("1").unwrap(), 2).unwrap();
        let a = c.approximant(&t, 2).unwrap();
        // m0 = 1: both blocks come from the upper neighbour.
        assert_eq!(a.labels(), hi.labels());
        let third = c.approximant(&c.parse("1/3").unwrap(), 2).unwrap();
        let zero = c.approximant(&c.parse("0").unwrap(), 2).unwrap();
        assert_eq!(third.labels()[..3], c.approximant(&c.parse("1/2").unwrap(), 2).unwrap().labels()[..3]);
        assert_eq!(third.labels()[3..], zero.labels()[3..]);
        let literal = construction().with_seeding(SeedingRule::Literal);
        let a = literal.approximant(&t, 2).unwrap();
        for m in 0..6 {
            let src = if m < 5 { &hi } else { &lo };
            assert_eq!(a.labels()[m], src.labels()[m]);
        }
        assert!(literal.max_cross_pairing(a.labels()).unwrap() > 0.3);
        assert_eq!(c.max_cross_pairing(c.approximant(&t, 2).unwrap().labels()).unwrap(), 0.0);
    }

    #[test]
    fn seeding_moves_split_past_coarse_disagreement() {
        // Neighbours 2/3 and 1/2 differ under the whole second level-1 label,
        // so no split inside it is a masa and the upper neighbour is copied.
        let c = construction();
        let t = c.parse("11/21").unwrap();
        let a = c.approximant(&t, 3).unwrap();
        assert_eq!(a.labels(), c.approximant(&c.parse("2/3").unwrap(), 3).unwrap().labels());
        assert_eq!(c.max_cross_pairing(a.labels()).unwrap(), 0.0);
        // For 1/7 the first admissible split is the end of level-1 label 0.
        let s = c.parse("1/7").unwrap();
        let b = c.approximant(&s, 3).unwrap();
        let upper = c.approximant(&c.parse("1/6").unwrap(), 3).unwrap();
        let lower = c.approximant(&c.parse("0").unwrap(), 3).unwrap();
        assert_ne!(upper.labels()[0], lower.labels()[0]);
        assert_eq!(b.labels()[..21], upper.labels()[..21]);
        assert_eq!(b.labels()[21..], lower.labels()[21..]);
    }

    #[test]
    fn below_canonical_level_is_rejected() {
        let c = construction();
        let t = c.parse("5/6").unwrap();
        assert_eq!(
            c.approximant(&t, 1).unwrap_err(),
            Error::LevelBelowCanonical { level: 1, canonical: 2 }
        );
        assert!(c.approximant(&t, 5).is_err());
    }

    #[test]
    fn pointwise_and_list_builders_agree() {
        let c = construction();
        for t in c.tower().grid(3).unwrap() {
            for n in t.canonical_level()..=3 {
                let a = c.approximant(&t, n).unwrap();
                for (m, label) in a.labels().iter().enumerate() {
                    assert_eq!(&c.label_at(&t, n, m).unwrap(), label, "t={t} n={n} m={m}");
                }
            }
        }
    }

    #[test]
    fn enumeration_law_and_tower_consistency() {
        let c = construction();
        for t in c.tower().grid(3).unwrap() {
            let n0 = t.canonical_level();
            for n in n0..=3 {
                let coarse = c.approximant(&t, n).unwrap();
                let fine = c.approximant(&t, n + 1).unwrap();
                let k = c.tower().prime_usize(n + 1).unwrap();
                for (m, label) in fine.labels().iter().enumerate() {
                    assert_eq!(label.prefix(n), coarse.labels()[m / k]);
                }
            }
        }
    }

    #[test]
    fn label_ranges() {
        let c = construction();
        for t in c.tower().grid(2).unwrap() {
            let a = c.approximant(&t, 4).unwrap();
            assert_eq!(a.labels().len(), 1806);
            for label in a.labels() {
                for (r, e) in label.entries() {
                    assert!(e.masa <= c.tower().size(r - 1).unwrap());
                    assert!(e.index < c.tower().prime_usize(r).unwrap());
                }
            }
        }
    }

    #[test]
    fn block_masas() {
        let c = construction();
        let zero = c.parse("0").unwrap();
        let b = c.block_masa(&zero, 1, 2, 3).unwrap();
        assert!(b.labels.iter().enumerate().all(|(l, g)| g.legs() == [leg(1, l)]));
        let half = c.parse("1/2").unwrap();
        let odd = c.block_masa(&half, 0, 1, 2).unwrap();
        assert!(odd.labels.iter().all(|g| g.legs()[0].masa == 2));
        let deep = c.block_masa(&zero, 0, 1, 3).unwrap();
        assert_eq!(deep.labels.len(), 21);
        assert_eq!(c.max_cross_pairing(&deep.labels).unwrap(), 0.0);
        assert!(c.block_masa(&zero, 2, 1, 3).is_err());
        assert!(c.block_masa(&zero, 0, 3, 3).is_err());
    }

    #[test]
    fn gamma_projection_counts() {
        let c = construction();
        assert!(c.gamma_projection(&c.parse("0").unwrap(), 2).unwrap().is_empty());
        assert_eq!(c.gamma_projection(&c.parse("1").unwrap(), 2).unwrap().len(), 6);
        let half = c.gamma_projection(&c.parse("1/2").unwrap(), 2).unwrap();
        assert_eq!(half.len(), 3);
        let p = c.materialize(&half).unwrap();
        assert!((p.normalized_trace().re - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn common_cutdown_examples() {
        let c = construction();
        let (s, t) = (c.parse("1/2").unwrap(), c.parse("2/3").unwrap());
        assert_eq!(c.common_cutdown(&s, &t, 2).unwrap().len(), 5);
        let (zero, one) = (c.parse("0").unwrap(), c.parse("1").unwrap());
        assert!(c.common_cutdown(&zero, &one, 2).unwrap().is_empty());
        let a = c.parse("16/42").unwrap();
        let b = c.parse("17/42").unwrap();
        assert_eq!(c.common_cutdown(&a, &b, 3).unwrap().len(), 41);
        assert!(c.common_cutdown(&t, &s, 2).is_err());
    }

    #[test]
    fn trace_pairing_examples() {
        let c = construction();
        let a = ProjLabel::full(vec![leg(0, 0), leg(1, 2)]);
        assert_eq!(c.trace_pairing(&a, &a).unwrap(), 1.0);
        let b = ProjLabel::full(vec![leg(0, 0), leg(1, 1)]);
        assert_eq!(c.trace_pairing(&a, &b).unwrap(), 0.0);
        let d = ProjLabel::full(vec![leg(0, 0), leg(2, 0)]);
        assert!((c.trace_pairing(&a, &d).unwrap() - 1.0 / 3.0).abs() <= 1e-12);
        let short = ProjLabel::full(vec![leg(0, 0)]);
        assert!(c.trace_pairing(&a, &short).is_err());
    }

    #[test]
    fn pairing_matches_dense_trace() {
        let c = construction();
        let labels = c.approximant(&c.parse("0").unwrap(), 2).unwrap().into_labels();
        let other = c.approximant(&c.parse("1").unwrap(), 2).unwrap().into_labels();
        for a in &labels {
            for b in &other {
                let dense = (&c.materialize(std::slice::from_ref(a)).unwrap()
                    * &c.materialize(std::slice::from_ref(b)).unwrap())
                    .normalized_trace();
                let factored = c.trace_pairing(a, b).unwrap() / 6.0;
                assert!((dense.re - factored).abs() <= 1e-12 && dense.im.abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn materialize_examples() {
        let c = construction();
        let single = c.materialize(&[ProjLabel::full(vec![leg(0, 0)])]).unwrap();
        assert_eq!(single, ComplexMatrix::diagonal(&[1.0.into(), 0.0.into()]));
        for t in c.tower().grid(2).unwrap() {
            let a = c.approximant(&t, 2).unwrap();
            let sum = c.materialize(a.labels()).unwrap();
            assert!(sum.max_abs_diff(&ComplexMatrix::identity(6)) <= 1e-10);
        }
        assert!(c.materialize(&[]).is_err());
    }

    #[test]
    fn dump_round_trip() {
        let c = construction();
        let a = c.approximant(&c.parse("1/2").unwrap(), 2).unwrap();
        let text = a.dump();
        assert!(text.starts_with("0: (0,0)(2,0)\n"));
        let parsed = parse_label_dump(&text).unwrap();
        assert_eq!(parsed.len(), 6);
        for (m, label) in parsed {
            assert_eq!(&label, &a.labels()[m]);
        }
        assert!("(1,2".parse::<ProjLabel>().is_err());
    }
}
