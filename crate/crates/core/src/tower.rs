//! Prime tower `k_1 = 2 < k_2 < ...` with `k_r` prime and `k_r > k_1 ⋯ k_{r-1}`,
//! level sizes `K_n = k_1 ⋯ k_n`, and the parameter sets
//! `I_n = { m / K_n : 0 ≤ m ≤ K_n }`.
//!
//! All arithmetic here is exact. Branching in the construction depends on
//! comparisons like `m < t·K_n`, so floating point never enters this module.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bases for Miller–Rabin. The first 13 primes make the test deterministic
/// below 3.3·10^24; the remainder only matter for towers deeper than 7.
const WITNESSES: [u32; 20] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71,
];

pub fn is_prime(n: &BigUint) -> bool {
    let two = BigUint::from(2u32);
    if n < &two {
        return false;
    }
    for &w in WITNESSES.iter() {
        let w = BigUint::from(w);
        if n == &w {
            return true;
        }
        if (n % &w).is_zero() {
            return false;
        }
    }
    let one = BigUint::one();
    let n_minus_one = n - &one;
    let mut d = n_minus_one.clone();
    let mut s = 0u32;
    while d.is_even() {
        d >>= 1;
        s += 1;
    }
    'witness: for &w in WITNESSES.iter() {
        let mut x = BigUint::from(w).modpow(&d, n);
        if x == one || x == n_minus_one {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_one {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Smallest prime strictly greater than `n`.
pub fn next_prime_above(n: &BigUint) -> BigUint {
    let mut candidate = n + 1u32;
    while !is_prime(&candidate) {
        candidate += 1u32;
    }
    candidate
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimeTower {
    primes: Vec<BigUint>,
    /// `products[n]` is `K_n`, with `products[0] = 1`.
    products: Vec<BigUint>,
}

impl PrimeTower {
    /// Builds the tower with `k_1 = 2` and each later `k_r` the smallest prime
    /// exceeding `K_{r-1}`.
    pub fn build(depth: usize) -> Result<Self> {
        if depth == 0 {
            return Err(Error::EmptyTower);
        }
        let mut primes = Vec::with_capacity(depth);
        let mut products = vec![BigUint::one()];
        for r in 0..depth {
            let k = if r == 0 {
                BigUint::from(2u32)
            } else {
                next_prime_above(&products[r])
            };
            products.push(&products[r] * &k);
            primes.push(k);
        }
        Ok(PrimeTower { primes, products })
    }

    /// Rebuilds a tower from an explicit prime list, checking every invariant.
    pub fn from_primes(primes: Vec<BigUint>) -> Result<Self> {
        if primes.is_empty() {
            return Err(Error::EmptyTower);
        }
        if primes[0] != BigUint::from(2u32) {
            return Err(Error::InvalidParameters("k_1 must be 2".into()));
        }
        let mut products = vec![BigUint::one()];
        for (r, k) in primes.iter().enumerate() {
            if !is_prime(k) {
                return Err(Error::InvalidParameters(format!("k_{} = {k} is not prime", r + 1)));
            }
            if r > 0 && k <= &products[r] {
                return Err(Error::InvalidParameters(format!(
                    "k_{} = {k} does not exceed K_{} = {}",
                    r + 1,
                    r,
                    products[r]
                )));
            }
            products.push(&products[r] * k);
        }
        Ok(PrimeTower { primes, products })
    }

    pub fn depth(&self) -> usize {
        self.primes.len()
    }

    pub fn primes(&self) -> &[BigUint] {
        &self.primes
    }

    /// `K_1, …, K_depth`.
    pub fn products(&self) -> &[BigUint] {
        &self.products[1..]
    }

    /// The prime on leg `r` (1-based).
    pub fn prime(&self, r: usize) -> Result<&BigUint> {
        self.check_level(r)?;
        Ok(&self.primes[r - 1])
    }

    /// `K_n`; `K_0 = 1`.
    pub fn product(&self, n: usize) -> Result<&BigUint> {
        if n > self.depth() {
            return Err(Error::LevelOutOfRange { level: n, depth: self.depth() });
        }
        Ok(&self.products[n])
    }

    pub fn prime_usize(&self, r: usize) -> Result<usize> {
        to_usize(self.prime(r)?)
    }

    /// `K_n` as a machine integer, for code that enumerates labels.
    pub fn size(&self, n: usize) -> Result<usize> {
        to_usize(self.product(n)?)
    }

    fn check_level(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.depth() {
            Err(Error::LevelOutOfRange { level: n, depth: self.depth() })
        } else {
            Ok(())
        }
    }

    /// `m / K_n` as a tower rational.
    pub fn rational(&self, num: impl Into<BigUint>, level: usize) -> Result<TowerRational> {
        self.check_level(level)?;
        let num = num.into();
        let denom = self.products[level].clone();
        if num > denom {
            return Err(Error::NotTowerRational(format!("{num}/{denom} exceeds 1")));
        }
        let canonical_level = (1..=level)
            .find(|&n| (&num * &self.products[n]).is_multiple_of(&denom))
            .expect("level itself always qualifies");
        Ok(TowerRational { num, level, denom, canonical_level })
    }

    /// `p / q` in lowest terms or not; fails unless the value lies in `I_depth`.
    pub fn fraction(&self, p: impl Into<BigUint>, q: impl Into<BigUint>) -> Result<TowerRational> {
        let (p, q) = (p.into(), q.into());
        if q.is_zero() {
            return Err(Error::NotTowerRational("zero denominator".into()));
        }
        let depth = self.depth();
        let k = &self.products[depth];
        let scaled = &p * k;
        if !scaled.is_multiple_of(&q) {
            return Err(Error::NotTowerRational(format!("{p}/{q} at depth {depth}")));
        }
        let t = self.rational(scaled / &q, depth)?;
        t.at_level(self, t.canonical_level)
    }

    /// Parses `"a/b"`, `"0"` or `"1"`.
    pub fn parse_rational(&self, s: &str) -> Result<TowerRational> {
        let s = s.trim();
        let parse = |x: &str| {
            x.trim()
                .parse::<BigUint>()
                .map_err(|_| Error::Parse(format!("bad integer in {s:?}")))
        };
        match s.split_once('/') {
            Some((p, q)) => self.fraction(parse(p)?, parse(q)?),
            None => self.fraction(parse(s)?, 1u32),
        }
    }

    /// `n_0(t)`, the minimal level containing `t`.
    pub fn level_of(&self, t: &TowerRational) -> Result<usize> {
        self.check_level(t.level)?;
        if &self.products[t.level] != t.denominator() {
            return Err(Error::NotTowerRational("rational built on another tower".into()));
        }
        Ok(t.canonical_level)
    }

    /// All `K_n + 1` points `m / K_n`, ascending.
    pub fn grid(&self, n: usize) -> Result<Vec<TowerRational>> {
        let size = self.size(n)?;
        (0..=size).map(|m| self.rational(m, n)).collect()
    }

    /// `⌊t·K_n⌋`.
    pub fn floor_scaled(&self, t: &TowerRational, n: usize) -> Result<BigUint> {
        let k = self.product(n)?;
        Ok((&t.num * k) / &t.denom)
    }

    /// `t·K_n`, which must be an integer (i.e. `n ≥ n_0(t)`).
    pub fn cut(&self, t: &TowerRational, n: usize) -> Result<usize> {
        if n < t.canonical_level {
            return Err(Error::LevelBelowCanonical { level: n, canonical: t.canonical_level });
        }
        to_usize(&self.floor_scaled(t, n)?)
    }
}

fn to_usize(x: &BigUint) -> Result<usize> {
    x.to_usize()
        .ok_or_else(|| Error::InvalidParameters(format!("{x} does not fit in a machine word")))
}

/// A point of `I = ∪ I_n`, stored as `num / K_level`.
#[derive(Debug, Clone)]
pub struct TowerRational {
    num: BigUint,
    level: usize,
    denom: BigUint,
    canonical_level: usize,
}

impl TowerRational {
    pub fn numerator(&self) -> &BigUint {
        &self.num
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn denominator(&self) -> &BigUint {
        &self.denom
    }

    pub fn canonical_level(&self) -> usize {
        self.canonical_level
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.num == self.denom
    }

    /// Same value written over `K_n`.
    pub fn at_level(&self, tower: &PrimeTower, n: usize) -> Result<TowerRational> {
        if n < self.canonical_level {
            return Err(Error::LevelBelowCanonical { level: n, canonical: self.canonical_level });
        }
        tower.rational(tower.floor_scaled(self, n)?, n)
    }

    pub fn to_ratio(&self) -> BigRational {
        BigRational::new(self.num.clone().into(), self.denom.clone().into())
    }

    pub fn to_f64(&self) -> f64 {
        self.to_ratio().to_f64().unwrap_or(f64::NAN)
    }

    pub fn record(&self) -> RationalRecord {
        RationalRecord { num: self.num.to_string(), level: self.level }
    }

    pub fn from_record(record: &RationalRecord, tower: &PrimeTower) -> Result<Self> {
        let num = record
            .num
            .parse::<BigUint>()
            .map_err(|_| Error::Parse(format!("bad numerator {:?}", record.num)))?;
        tower.rational(num, record.level)
    }
}

impl PartialEq for TowerRational {
    fn eq(&self, other: &Self) -> bool {
        &self.num * &other.denom == &other.num * &self.denom
    }
}

impl Eq for TowerRational {}

impl PartialOrd for TowerRational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for TowerRational {
    fn cmp(&self, other: &Self) -> Ordering {
        (&self.num * &other.denom).cmp(&(&other.num * &self.denom))
    }
}

impl fmt::Display for TowerRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let g = self.num.gcd(&self.denom);
        if g.is_zero() {
            return write!(f, "0");
        }
        let (p, q) = (&self.num / &g, &self.denom / &g);
        if q.is_one() {
            write!(f, "{p}")
        } else {
            write!(f, "{p}/{q}")
        }
    }
}

/// JSON form `{"num": "5", "level": 2}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalRecord {
    pub num: String,
    pub level: usize,
}

/// JSON form `{"primes": ["2", "3", ...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TowerRecord {
    pub primes: Vec<String>,
}

impl Serialize for PrimeTower {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        TowerRecord { primes: self.primes.iter().map(|p| p.to_string()).collect() }
            .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PrimeTower {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let record = TowerRecord::deserialize(deserializer)?;
        let primes = record
            .primes
            .iter()
            .map(|p| p.parse::<BigUint>().map_err(serde::de::Error::custom))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        PrimeTower::from_primes(primes).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial_division(n: u64) -> bool {
        n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d))
    }

    fn brute_tower(depth: usize) -> Vec<u64> {
        let mut primes = vec![2u64];
        let mut product = 2u64;
        while primes.len() < depth {
            let mut k = product + 1;
            while !trial_division(k) {
                k += 1;
            }
            primes.push(k);
            product *= k;
        }
        primes
    }

    fn small(tower: &PrimeTower) -> Vec<u64> {
        tower.primes().iter().map(|p| p.to_u64().unwrap()).collect()
    }

    #[test]
    fn towers_match_brute_force_scan() {
        assert_eq!(small(&PrimeTower::build(1).unwrap()), vec![2]);
        assert_eq!(small(&PrimeTower::build(2).unwrap()), vec![2, 3]);
        let t4 = PrimeTower::build(4).unwrap();
        assert_eq!(small(&t4), vec![2, 3, 7, 43]);
        let products: Vec<u64> = t4.products().iter().map(|p| p.to_u64().unwrap()).collect();
        assert_eq!(products, vec![2, 6, 42, 1806]);
        assert_eq!(small(&PrimeTower::build(6).unwrap()), brute_tower(6));
    }

    #[test]
    fn depth_zero_rejected() {
        assert_eq!(PrimeTower::build(0), Err(Error::EmptyTower));
    }

    #[test]
    fn depth_six_invariants() {
        let tower = PrimeTower::build(6).unwrap();
        assert_eq!(tower.primes()[0], BigUint::from(2u32));
        for r in 1..6 {
            let k = tower.primes()[r].to_u64().unwrap();
            assert!(trial_division(k));
            assert!(tower.primes()[r] > tower.products()[r - 1]);
            assert_eq!(tower.products()[r], &tower.products()[r - 1] * &tower.primes()[r]);
        }
    }

    #[test]
    fn miller_rabin_agrees_with_trial_division() {
        for n in 0u64..5000 {
            assert_eq!(is_prime(&BigUint::from(n)), trial_division(n), "n = {n}");
        }
        // Strong pseudoprime to bases 2..=37 (product of two primes).
        let spsp = "3825123056546413051".parse::<BigUint>().unwrap();
        assert!(!is_prime(&spsp));
    }

    #[test]
    fn canonical_levels() {
        let tower = PrimeTower::build(4).unwrap();
        assert_eq!(tower.level_of(&tower.parse_rational("1/2").unwrap()).unwrap(), 1);
        assert_eq!(tower.level_of(&tower.parse_rational("0").unwrap()).unwrap(), 1);
        assert_eq!(tower.level_of(&tower.parse_rational("1").unwrap()).unwrap(), 1);
        assert_eq!(tower.level_of(&tower.parse_rational("5/6").unwrap()).unwrap(), 2);
        assert_eq!(tower.level_of(&tower.fraction(21u32, 42u32).unwrap()).unwrap(), 1);
        assert_eq!(tower.level_of(&tower.parse_rational("1/43").unwrap()).unwrap(), 4);
        assert!(matches!(
            tower.parse_rational("1/5"),
            Err(Error::NotTowerRational(_))
        ));
    }

    #[test]
    fn grids() {
        let tower = PrimeTower::build(4).unwrap();
        let g1: Vec<String> = tower.grid(1).unwrap().iter().map(|t| t.to_string()).collect();
        assert_eq!(g1, vec!["0", "1/2", "1"]);
        assert_eq!(tower.grid(2).unwrap().len(), 7);
        assert_eq!(tower.grid(3).unwrap().len(), 43);
        for n in 1..4 {
            let finer = tower.grid(n + 1).unwrap();
            for t in tower.grid(n).unwrap() {
                assert!(finer.contains(&t));
            }
        }
        let g = tower.grid(3).unwrap();
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn floor_scaled_examples() {
        let tower = PrimeTower::build(3).unwrap();
        let five_sixths = tower.parse_rational("5/6").unwrap();
        assert_eq!(tower.floor_scaled(&five_sixths, 1).unwrap(), BigUint::from(1u32));
        let zero = tower.parse_rational("0").unwrap();
        for n in 1..=3 {
            assert!(tower.floor_scaled(&zero, n).unwrap().is_zero());
        }
        let one = tower.parse_rational("1").unwrap();
        assert_eq!(tower.floor_scaled(&one, 2).unwrap(), BigUint::from(6u32));
        assert_eq!(
            tower.cut(&five_sixths, 1),
            Err(Error::LevelBelowCanonical { level: 1, canonical: 2 })
        );
        assert_eq!(tower.cut(&five_sixths, 3).unwrap(), 35);
    }

    #[test]
    fn exactness_above_canonical_level() {
        let tower = PrimeTower::build(4).unwrap();
        for t in tower.grid(3).unwrap() {
            for m in t.canonical_level()..=4 {
                let k = tower.product(m).unwrap();
                assert!((t.numerator() * k).is_multiple_of(t.denominator()));
            }
        }
    }

    #[test]
    fn equality_is_by_value() {
        let tower = PrimeTower::build(3).unwrap();
        let a = tower.rational(1u32, 1).unwrap();
        let b = tower.rational(21u32, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(b.canonical_level(), 1);
        assert_eq!(b.at_level(&tower, 2).unwrap().numerator(), &BigUint::from(3u32));
    }

    #[test]
    fn json_forms() {
        let tower = PrimeTower::build(4).unwrap();
        let json = serde_json::to_string(&tower).unwrap();
        assert_eq!(json, r#"{"primes":["2","3","7","43"]}"#);
        let back: PrimeTower = serde_json::from_str(&json).unwrap();
        assert_eq!(back, tower);
        assert!(serde_json::from_str::<PrimeTower>(r#"{"primes":["2","5"]}"#).is_ok());
        assert!(serde_json::from_str::<PrimeTower>(r#"{"primes":["2","4"]}"#).is_err());
        assert!(serde_json::from_str::<PrimeTower>(r#"{"primes":["3"]}"#).is_err());

        let t = tower.parse_rational("5/6").unwrap();
        let record = t.record();
        assert_eq!(serde_json::to_string(&record).unwrap(), r#"{"num":"5","level":2}"#);
        assert_eq!(TowerRational::from_record(&record, &tower).unwrap(), t);
    }

    #[test]
    fn build_is_deterministic() {
        assert_eq!(PrimeTower::build(5).unwrap(), PrimeTower::build(5).unwrap());
    }
}
