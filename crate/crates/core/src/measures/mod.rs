//! Empirical measures on the line, their centring functionals, tail
//! functions, and exact one-dimensional transport distances.

mod tail;
mod transport;

pub(crate) use tail::{check_level, last_at_least};
pub use tail::{w1_to_analytic, Dilated, ExpTail, PointMass, Shifted, TailCdf, TailFunction};
pub use transport::{
    capped_matching, capped_matching_cost, w1_weighted, w_weighted, wasserstein_w, wasserstein_w1,
    WeightedMeasure,
};

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Absolute tolerance for membership of the min-centred state space.
pub const TOL_GAMMA: f64 = 1e-12;
/// Tolerance on the end values of a tail CDF.
pub const TOL_CDF: f64 = 1e-8;

/// How a configuration is shifted before it is observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Centring {
    None,
    Leftmost,
    Median,
}

impl std::str::FromStr for Centring {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Centring::None),
            "leftmost" => Ok(Centring::Leftmost),
            "median" => Ok(Centring::Median),
            other => Err(Error::InvalidArgument(format!("unknown centring {other:?}"))),
        }
    }
}

impl std::fmt::Display for Centring {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Centring::None => "none",
            Centring::Leftmost => "leftmost",
            Centring::Median => "median",
        })
    }
}

/// Uniform-weight atomic probability measure `(1/N) Σ δ_{x_i}`.
///
/// Atoms are kept sorted; duplicates are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    atoms: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MeasureJson {
    n: usize,
    atoms: Vec<f64>,
}

impl EmpiricalMeasure {
    pub fn from_positions(positions: &[f64]) -> Result<Self> {
        Self::from_vec(positions.to_vec())
    }

    pub fn from_vec(mut atoms: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        if atoms.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinitePosition);
        }
        atoms.sort_unstable_by(f64::total_cmp);
        Ok(Self { atoms })
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `L(μ)`, the smallest atom.
    pub fn leftmost(&self) -> f64 {
        self.atoms[0]
    }

    /// `A(μ) = inf{x : μ([x, ∞)) < 1/2}`.
    ///
    /// For atomic measures this is the `(⌊N/2⌋ + 1)`-th order statistic, so
    /// for even `N` it is the upper of the two middle atoms.
    pub fn median(&self) -> f64 {
        self.atoms[self.atoms.len() / 2]
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().sum::<f64>() / self.atoms.len() as f64
    }

    pub fn centring_stats(&self) -> CentringStats {
        let n = self.atoms.len() as f64;
        CentringStats {
            leftmost: self.leftmost(),
            median: self.median(),
            mean: self.mean(),
            abs_first_moment: self.atoms.iter().map(|x| x.abs()).sum::<f64>() / n,
        }
    }

    /// Translate every atom by `c`.
    pub fn shifted(&self, c: f64) -> Self {
        Self {
            atoms: self.atoms.iter().map(|x| x + c).collect(),
        }
    }

    /// Shift so that the leftmost atom (or the median) sits at 0.
    pub fn recentre(&self, mode: Centring) -> Self {
        let anchor = match mode {
            Centring::None => return self.clone(),
            Centring::Leftmost => self.leftmost(),
            Centring::Median => self.median(),
        };
        Self {
            atoms: self.atoms.iter().map(|x| x - anchor).collect(),
        }
    }

    /// `μ((x, ∞))`.
    pub fn tail(&self, x: f64) -> f64 {
        let above = self.atoms.len() - self.atoms.partition_point(|&a| a <= x);
        above as f64 / self.atoms.len() as f64
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.atoms.len() * 20);
        for x in &self.atoms {
            let _ = writeln!(s, "{x}");
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut atoms = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let x: f64 = line
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad position {line:?}")))?;
            atoms.push(x);
        }
        Self::from_vec(atoms)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&MeasureJson {
            n: self.atoms.len(),
            atoms: self.atoms.clone(),
        })
        .expect("finite atoms serialise")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let parsed: MeasureJson = serde_json::from_str(text)?;
        if parsed.n != parsed.atoms.len() {
            return Err(Error::LengthMismatch(parsed.n, parsed.atoms.len()));
        }
        Self::from_vec(parsed.atoms)
    }
}

/// Centring functionals `L`, `A`, `M`, `H` of a measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CentringStats {
    pub leftmost: f64,
    pub median: f64,
    pub mean: f64,
    pub abs_first_moment: f64,
}

/// `b(y) = (1/N) Σ y_i` for a configuration whose minimum is 0.
pub fn gap_mean(y: &[f64]) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    let min = y.iter().copied().fold(f64::INFINITY, f64::min);
    if !min.is_finite() || min.abs() > TOL_GAMMA {
        return Err(Error::NotInGamma(min));
    }
    Ok(y.iter().sum::<f64>() / y.len() as f64)
}
