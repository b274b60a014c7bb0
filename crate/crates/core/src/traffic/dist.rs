use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, LogNormal};

use super::TrafficError;

/// Distribution of request or file sizes in bytes.
#[derive(Debug, Clone)]
pub enum SizeDistribution {
    Fixed(u64),
    Empirical(Empirical),
    LogNormal { mu: f64, sigma: f64 },
}

/// A histogram of observed sizes with normalized weights.
#[derive(Debug, Clone)]
pub struct Empirical {
    atoms: Vec<(u64, f64)>,
    index: WeightedIndex<f64>,
}

impl PartialEq for Empirical {
    fn eq(&self, other: &Self) -> bool {
        self.atoms == other.atoms
    }
}

impl PartialEq for SizeDistribution {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Self::Fixed(a), Self::Fixed(b)) => a == b,
            (Self::Empirical(a), Self::Empirical(b)) => a == b,
            (Self::LogNormal { mu: m1, sigma: s1 }, Self::LogNormal { mu: m2, sigma: s2 }) => {
                m1 == m2 && s1 == s2
            }
            _ => false,
        }
    }
}

impl Empirical {
    pub fn atoms(&self) -> &[(u64, f64)] {
        &self.atoms
    }
}

impl SizeDistribution {
    pub fn fixed(size: u64) -> Result<Self, TrafficError> {
        if size == 0 {
            return Err(TrafficError::InvalidParameter(
                "fixed size must be > 0".into(),
            ));
        }
        Ok(Self::Fixed(size))
    }

    /// Histogram from `(size, weight)` pairs; weights are normalized and
    /// repeated sizes merged.
    pub fn empirical(atoms: &[(u64, f64)]) -> Result<Self, TrafficError> {
        if atoms.is_empty() {
            return Err(TrafficError::EmptySamples);
        }
        let mut merged: BTreeMap<u64, f64> = BTreeMap::new();
        for &(size, weight) in atoms {
            if size == 0 {
                return Err(TrafficError::InvalidParameter("sizes must be > 0".into()));
            }
            if !(weight > 0.0) || !weight.is_finite() {
                return Err(TrafficError::InvalidParameter(format!(
                    "weight {weight} for size {size} is not positive"
                )));
            }
            *merged.entry(size).or_default() += weight;
        }
        let total: f64 = merged.values().sum();
        let atoms: Vec<(u64, f64)> = merged.into_iter().map(|(s, w)| (s, w / total)).collect();
        let index = WeightedIndex::new(atoms.iter().map(|a| a.1))
            .map_err(|e| TrafficError::InvalidParameter(e.to_string()))?;
        Ok(Self::Empirical(Empirical { atoms, index }))
    }

    /// Log-normal over bytes: `ln(size) ~ N(mu, sigma^2)`.
    pub fn lognormal(mu: f64, sigma: f64) -> Result<Self, TrafficError> {
        if !mu.is_finite() || !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(TrafficError::InvalidParameter(
                "lognormal needs finite mu and sigma >= 0".into(),
            ));
        }
        Ok(Self::LogNormal { mu, sigma })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self {
            Self::Fixed(size) => *size,
            Self::Empirical(e) => e.atoms[e.index.sample(rng)].0,
            Self::LogNormal { mu, sigma } => {
                let d = LogNormal::new(*mu, *sigma).expect("validated on construction");
                (d.sample(rng).round() as u64).max(1)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Fixed(size) => *size as f64,
            Self::Empirical(e) => e.atoms.iter().map(|(s, w)| *s as f64 * w).sum(),
            Self::LogNormal { mu, sigma } => (mu + sigma * sigma / 2.0).exp(),
        }
    }
}

/// One atom per distinct observed size, weighted by its frequency.
pub fn fit_empirical(samples: &[u64]) -> Result<SizeDistribution, TrafficError> {
    if samples.is_empty() {
        return Err(TrafficError::EmptySamples);
    }
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    for &s in samples {
        *counts.entry(s).or_default() += 1;
    }
    let atoms: Vec<(u64, f64)> = counts.into_iter().map(|(s, c)| (s, c as f64)).collect();
    SizeDistribution::empirical(&atoms)
}

/// Observed sizes, one byte count per line; `#` starts a comment.
pub fn parse_size_samples(text: &str) -> Result<Vec<u64>, TrafficError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let token = raw.split('#').next().unwrap_or("").trim();
        if token.is_empty() {
            continue;
        }
        let size = crate::units::parse_bytes(token).map_err(|reason| TrafficError::Syntax {
            line: idx + 1,
            reason,
        })?;
        out.push(size);
    }
    Ok(out)
}

/// How request start times are spaced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArrivalModel {
    FixedInterval(f64),
    /// rate per second
    Poisson(f64),
}

impl ArrivalModel {
    pub fn fixed_interval(seconds: f64) -> Result<Self, TrafficError> {
        if !(seconds > 0.0) || !seconds.is_finite() {
            return Err(TrafficError::InvalidParameter(
                "interval must be > 0".into(),
            ));
        }
        Ok(Self::FixedInterval(seconds))
    }

    pub fn poisson(rate: f64) -> Result<Self, TrafficError> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(TrafficError::InvalidParameter("rate must be > 0".into()));
        }
        Ok(Self::Poisson(rate))
    }
}
