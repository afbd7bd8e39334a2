//! Scenario configuration and the batch runners behind the command line.
//!
//! Config files hold one `key = value` per line; `#` starts a comment.
//!
//! | key          | value                                         | default |
//! |--------------|-----------------------------------------------|---------|
//! | `depth`      | tower depth                                   | 4       |
//! | `levels`     | comma-separated levels                        | 2       |
//! | `grid`       | `level:N` or comma-separated rationals        | `level:2` |
//! | `probes`     | random probes per gap estimate                | 16      |
//! | `iterations` | power-iteration budget                        | 500     |
//! | `seed`       | base seed                                     | 0       |
//! | `out`        | output directory                              | `out`   |
//! | `tolerance`  | overrides the float thresholds of certificates | unset  |

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::certificates::{
    admissible_pairs, anticommutation_check, block_orthogonality_check, cutdown_equality_check,
    gamma_commutator_check, gamma_continuity_report, singularity_certificate, BlockUnitary, Certificate,
    CertificateKind, ContinuityRecord, EXACT_ZERO,
};
use crate::construction::Construction;
use crate::error::{Error, Result};
use crate::expectation::{gap_estimate, GapEstimate, GapOptions, POWER_MAX_ITERS};
use crate::tower::TowerRational;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "TAUER_PATH_OUT";

const DISTANCE_CLAIM: &str = "finite-level gap between approximants is at most 2√|s−t|";
/// Slack for comparisons between independently computed floats.
const COMPARE_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GridSpec {
    Level(usize),
    List(Vec<String>),
}

impl GridSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if let Some(level) = text.strip_prefix("level:") {
            return level
                .trim()
                .parse()
                .map(GridSpec::Level)
                .map_err(|_| Error::Parse(format!("bad grid level: {level}")));
        }
        Ok(GridSpec::List(
            text.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect(),
        ))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub depth: usize,
    pub levels: Vec<usize>,
    pub grid: GridSpec,
    pub probes: usize,
    pub iterations: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub tolerance: Option<f64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            depth: 4,
            levels: vec![2],
            grid: GridSpec::Level(2),
            probes: 16,
            iterations: POWER_MAX_ITERS,
            seed: 0,
            out: PathBuf::from("out"),
            tolerance: None,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Parse(format!("bad value for {key}: {value}")))
}

pub fn parse_levels(value: &str) -> Result<Vec<usize>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value("levels", s))
        .collect()
}

impl ScenarioConfig {
    /// Applies `key = value` lines on top of `self`.
    pub fn apply_text(mut self, text: &str) -> Result<Self> {
        for (number, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", number + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "depth" => self.depth = parse_value(key, value)?,
                "levels" => self.levels = parse_levels(value)?,
                "grid" => self.grid = GridSpec::parse(value)?,
                "probes" => self.probes = parse_value(key, value)?,
                "iterations" => self.iterations = parse_value(key, value)?,
                "seed" => self.seed = parse_value(key, value)?,
                "out" => self.out = PathBuf::from(value),
                "tolerance" => self.tolerance = Some(parse_value(key, value)?),
                other => return Err(Error::Parse(format!("line {}: unknown key {other}", number + 1))),
            }
        }
        Ok(self)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::default().apply_text(&text)
    }

    /// Checks the config and returns the construction and grid it describes.
    pub fn resolve(&self) -> Result<(Construction, Vec<TowerRational>)> {
        let construction = Construction::new(self.depth)?;
        if self.levels.is_empty() {
            return Err(Error::InvalidParameters("no levels requested".into()));
        }
        if let Some(&bad) = self.levels.iter().find(|&&n| n == 0 || n > self.depth) {
            return Err(Error::LevelOutOfRange { level: bad, depth: self.depth });
        }
        let grid = match &self.grid {
            GridSpec::Level(n) => construction.tower().grid(*n)?,
            GridSpec::List(items) => items.iter().map(|s| construction.parse(s)).collect::<Result<_>>()?,
        };
        if grid.is_empty() {
            return Err(Error::InvalidParameters("empty parameter grid".into()));
        }
        let top = *self.levels.iter().max().expect("levels non-empty");
        if let Some(t) = grid.iter().find(|t| t.canonical_level() > top) {
            return Err(Error::LevelBelowCanonical { level: top, canonical: t.canonical_level() });
        }
        Ok((construction, grid))
    }

    fn gap_options(&self) -> GapOptions {
        GapOptions { probes: self.probes, iterations: self.iterations, seed: self.seed, ..GapOptions::default() }
    }
}

/// Result of one subcommand: whether every check passed and what was written.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub pass: bool,
    pub files: Vec<PathBuf>,
    pub failures: Vec<String>,
}

fn write(out: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(out).map_err(|e| Error::Parse(format!("{}: {e}", out.display())))?;
    let path = out.join(name);
    fs::write(&path, contents).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    Ok(path)
}

fn csv_string<S: Serialize>(rows: &[S]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row).map_err(|e| Error::Parse(e.to_string()))?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

fn json<S: Serialize>(value: &S) -> String {
    serde_json::to_string_pretty(value).expect("report serializes") + "\n"
}

pub fn run_tower(config: &ScenarioConfig) -> Result<Outcome> {
    let (c, _) = config.resolve()?;
    let path = write(&config.out, "tower.json", &json(c.tower()))?;
    Ok(Outcome { pass: true, files: vec![path], failures: vec![] })
}

#[derive(Debug, Serialize)]
struct FamilyRow {
    leg: usize,
    p: usize,
    masas: usize,
    cross_defect: f64,
    basis_defect: f64,
    pass: bool,
    claim: &'static str,
}

pub fn run_family(config: &ScenarioConfig) -> Result<Outcome> {
    let (c, _) = config.resolve()?;
    let rows = c
        .families()
        .par_iter()
        .enumerate()
        .map(|(i, fam)| {
            let basis_defect = (0..fam.count())
                .map(|m| {
                    let b = fam.basis(m)?;
                    Ok(b.orthonormality_defect().max(b.completeness_defect()))
                })
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            let cross_defect = fam.cross_defect();
            let tol = config.tolerance.unwrap_or(EXACT_ZERO);
            Ok(FamilyRow {
                leg: i + 1,
                p: fam.prime(),
                masas: fam.count(),
                cross_defect,
                basis_defect,
                pass: cross_defect <= tol && basis_defect <= tol,
                claim: "distinct masas of the leg family are mutually unbiased",
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let failures = rows.iter().filter(|r| !r.pass).map(|r| format!("leg {} family defect", r.leg)).collect::<Vec<_>>();
    let path = write(&config.out, "family.csv", &csv_string(&rows)?)?;
    Ok(Outcome { pass: failures.is_empty(), files: vec![path], failures })
}

fn file_stem(t: &TowerRational) -> String {
    t.to_string().replace('/', "_")
}

pub fn run_approximant(config: &ScenarioConfig) -> Result<Outcome> {
    let (c, grid) = config.resolve()?;
    let mut files = Vec::new();
    for &n in &config.levels {
        for t in grid.iter().filter(|t| t.canonical_level() <= n) {
            let a = c.approximant(t, n)?;
            files.push(write(&config.out, &format!("approximant_{}_level{n}.txt", file_stem(t)), &a.dump())?);
        }
    }
    Ok(Outcome { pass: true, files, failures: vec![] })
}

#[derive(Debug, Clone, Serialize)]
pub struct DistanceRow {
    pub s: String,
    pub t: String,
    pub lower: f64,
    pub upper: f64,
    pub bound: f64,
    pub n: usize,
    pub probes: usize,
    pub iterations: usize,
    pub converged: bool,
    pub pass: bool,
    pub claim: &'static str,
}

impl From<GapEstimate> for DistanceRow {
    fn from(g: GapEstimate) -> Self {
        let pass = g.lower <= g.bound + COMPARE_SLACK && g.lower <= g.upper + COMPARE_SLACK;
        DistanceRow {
            s: g.s,
            t: g.t,
            lower: g.lower,
            upper: g.upper,
            bound: g.bound,
            n: g.n,
            probes: g.probes,
            iterations: g.iterations,
            converged: g.converged,
            pass,
            claim: DISTANCE_CLAIM,
        }
    }
}

fn grid_pairs(grid: &[TowerRational], n: usize) -> Vec<(TowerRational, TowerRational)> {
    let valid: Vec<&TowerRational> = grid.iter().filter(|t| t.canonical_level() <= n).collect();
    valid
        .iter()
        .enumerate()
        .flat_map(|(i, s)| valid[i + 1..].iter().map(move |t| ((*s).clone(), (*t).clone())))
        .collect()
}

/// Gap estimates for every grid pair at the given level, in grid order.
pub fn distance_rows(config: &ScenarioConfig, c: &Construction, grid: &[TowerRational], n: usize) -> Result<Vec<DistanceRow>> {
    grid_pairs(grid, n)
        .par_iter()
        .map(|(s, t)| Ok(gap_estimate(c, s, t, n, config.gap_options())?.into()))
        .collect()
}

pub fn run_distances(config: &ScenarioConfig) -> Result<Outcome> {
    let (c, grid) = config.resolve()?;
    let mut files = Vec::new();
    let mut failures = Vec::new();
    for &n in &config.levels {
        let rows = distance_rows(config, &c, &grid, n)?;
        failures.extend(rows.iter().filter(|r| !r.pass).map(|r| format!("distance {},{} at level {n}", r.s, r.t)));
        files.push(write(&config.out, &format!("distances_level{n}.csv"), &csv_string(&rows)?)?);
    }
    Ok(Outcome { pass: failures.is_empty(), files, failures })
}

fn retune(cert: Certificate, tolerance: Option<f64>) -> Certificate {
    match tolerance {
        Some(tol) if cert.kind != CertificateKind::Cutdown => {
            Certificate::new(cert.kind, cert.params, cert.defect, tol, cert.witness, cert.seed)
        }
        _ => cert,
    }
}

/// Every certificate kind over the grid at each requested level.
pub fn certificate_suite(config: &ScenarioConfig, c: &Construction, grid: &[TowerRational]) -> Result<Vec<Certificate>> {
    let mut certs = Vec::new();
    for &n in &config.levels {
        let valid: Vec<&TowerRational> = grid.iter().filter(|t| t.canonical_level() <= n).collect();
        let deeper = n < c.depth();
        for t in &valid {
            if n % 2 == 0 && deeper {
                certs.push(singularity_certificate(c, t, n, EXACT_ZERO)?);
            }
            if deeper {
                for (m, m2) in admissible_pairs(c, t, n)? {
                    certs.push(block_orthogonality_check(c, t, n, m, m2, n + 1)?);
                }
            }
            if n % 2 == 1 && deeper {
                certs.push(gamma_commutator_check(c, t, n, 20, config.seed)?);
            }
            let free: Vec<usize> = (c.cut(t, n)?..c.tower().size(n)?).take(6).collect();
            if deeper && free.len() >= 2 && c.tower().size(n + 1)? <= 64 {
                certs.push(anticommutation_check(c, t, n, &free, BlockUnitary::TraceFree, config.seed)?);
            }
        }
        for (s, t) in grid_pairs(grid, n) {
            certs.push(cutdown_equality_check(c, &s, &t, n)?);
        }
    }
    Ok(certs.into_iter().map(|cert| retune(cert, config.tolerance)).collect())
}

#[derive(Debug, Serialize)]
struct CertificateSummary<'a> {
    total: usize,
    passed: usize,
    failed: usize,
    certificates: &'a [Certificate],
}

fn summarize(config: &ScenarioConfig, name: &str, certs: &[Certificate]) -> Result<Outcome> {
    let passed = certs.iter().filter(|c| c.pass).count();
    let summary = CertificateSummary { total: certs.len(), passed, failed: certs.len() - passed, certificates: certs };
    let path = write(&config.out, name, &json(&summary))?;
    let failures = certs.iter().filter(|c| !c.pass).map(Certificate::to_json).collect::<Vec<_>>();
    Ok(Outcome { pass: failures.is_empty(), files: vec![path], failures })
}

pub fn run_certify(config: &ScenarioConfig) -> Result<Outcome> {
    let (c, grid) = config.resolve()?;
    summarize(config, "certificates.json", &certificate_suite(config, &c, &grid)?)
}

pub fn run_gamma(config: &ScenarioConfig) -> Result<Outcome> {
    let (c, grid) = config.resolve()?;
    let top = *config.levels.iter().max().expect("validated");
    let mut certs = Vec::new();
    for t in &grid {
        for n in (t.canonical_level()..=top).filter(|n| n % 2 == 1 && *n < c.depth()) {
            certs.push(retune(gamma_commutator_check(&c, t, n, 20, config.seed)?, config.tolerance));
        }
    }
    let mut outcome = summarize(config, "gamma.json", &certs)?;

    let n = *config.levels.iter().min().expect("validated");
    let records: Vec<ContinuityRecord> = distance_rows(config, &c, &grid, n)?
        .into_iter()
        .map(|row| {
            let (s, t) = (c.parse(&row.s)?, c.parse(&row.t)?);
            let gap = GapEstimate {
                s: row.s,
                t: row.t,
                n,
                lower: row.lower,
                upper: row.upper,
                probes: row.probes,
                iterations: row.iterations,
                bound: row.bound,
                converged: row.converged,
            };
            Ok(gamma_continuity_report(&s, &t, n, &gap))
        })
        .collect::<Result<_>>()?;
    outcome
        .failures
        .extend(records.iter().filter(|r| !r.pass).map(|r| format!("continuity sentinel {},{}", r.s, r.t)));
    outcome.pass = outcome.failures.is_empty();
    outcome.files.push(write(&config.out, "gamma_continuity.csv", &csv_string(&records)?)?);
    Ok(outcome)
}
