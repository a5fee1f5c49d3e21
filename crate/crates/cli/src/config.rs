//! Run configuration: defaults, then a `key=value` file, then flags.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use linni::{Domain, Exponent};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Interval,
    Square,
    Rectangle,
    Ball,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    /// `1 + amplitude·u₂`, clipped positive.
    Mode,
    /// Seeded smooth random field with sup deviation `amplitude`.
    Random,
}

/// Flags shared by every subcommand. Each one can also be given in the
/// config file under the same name with dashes replaced by underscores.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// key=value configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub domain: Option<DomainKind>,
    /// Side lengths of a rectangle, or the length of an interval.
    #[arg(long, global = true, value_delimiter = ',')]
    pub lengths: Option<Vec<f64>>,
    /// Dimension (ball domains and the `bounds` table).
    #[arg(long, global = true)]
    pub d: Option<usize>,
    /// Grid resolution per axis.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true)]
    pub p: Option<f64>,
    /// Use the logarithmic Sobolev endpoint p = 1.
    #[arg(long, global = true)]
    pub log_sobolev: bool,
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    #[arg(long, global = true)]
    pub theta: Option<f64>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub lambda: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub mu: Option<Vec<f64>>,
    /// Spectral gap to use instead of computing one.
    #[arg(long, global = true)]
    pub lambda2: Option<f64>,
    /// Logarithmic Sobolev constant used by the Beckner bound.
    #[arg(long, global = true)]
    pub lsi: Option<f64>,
    #[arg(long, global = true)]
    pub t_end: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub init: Option<Init>,
    #[arg(long, global = true)]
    pub amplitude: Option<f64>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub domain: DomainKind,
    pub lengths: Vec<f64>,
    pub d: Option<usize>,
    pub n: usize,
    pub p: Option<f64>,
    pub log_sobolev: bool,
    pub beta: Option<f64>,
    pub theta: f64,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub lambda2: Option<f64>,
    pub lsi: Option<f64>,
    pub t_end: f64,
    pub init: Init,
    pub amplitude: f64,
    pub tol: f64,
    pub seed: u64,
    pub format: Format,
    #[serde(skip)]
    pub jobs: usize,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            domain: DomainKind::Interval,
            lengths: Vec::new(),
            d: None,
            n: 128,
            p: None,
            log_sobolev: false,
            beta: None,
            theta: 0.9,
            lambda: Vec::new(),
            mu: Vec::new(),
            lambda2: None,
            lsi: None,
            t_end: 0.2,
            init: Init::Mode,
            amplitude: 0.2,
            tol: 1e-4,
            seed: 0x5eed,
            format: Format::Csv,
            jobs: 1,
            out: None,
        }
    }
}

pub fn parse_file(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut map = BTreeMap::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key=value", k + 1))?;
        map.insert(key.trim().replace('-', "_"), value.trim().to_string());
    }
    Ok(map)
}

fn parse_value<T: FromStr>(key: &str, raw: &str) -> Result<T, String>
where
    T::Err: Display,
{
    raw.parse().map_err(|e| format!("config key {key}: {e}"))
}

fn parse_list(key: &str, raw: &str) -> Result<Vec<f64>, String> {
    raw.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_value(key, s.trim()))
        .collect()
}

fn parse_enum<T: ValueEnum>(key: &str, raw: &str) -> Result<T, String> {
    T::from_str(raw, true).map_err(|e| format!("config key {key}: {e}"))
}

impl RunConfig {
    /// Merges defaults, the config file named in `flags` and the flags.
    pub fn resolve(flags: &Flags) -> Result<Self, String> {
        let file = match &flags.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
                parse_file(&text)?
            }
            None => BTreeMap::new(),
        };
        Self::merge(&file, flags)
    }

    pub fn merge(file: &BTreeMap<String, String>, flags: &Flags) -> Result<Self, String> {
        let mut c = RunConfig::default();
        for (key, raw) in file {
            match key.as_str() {
                "domain" => c.domain = parse_enum(key, raw)?,
                "lengths" => c.lengths = parse_list(key, raw)?,
                "d" => c.d = Some(parse_value(key, raw)?),
                "n" => c.n = parse_value(key, raw)?,
                "p" => c.p = Some(parse_value(key, raw)?),
                "log_sobolev" => c.log_sobolev = parse_value(key, raw)?,
                "beta" => c.beta = Some(parse_value(key, raw)?),
                "theta" => c.theta = parse_value(key, raw)?,
                "lambda" => c.lambda = parse_list(key, raw)?,
                "mu" => c.mu = parse_list(key, raw)?,
                "lambda2" => c.lambda2 = Some(parse_value(key, raw)?),
                "lsi" => c.lsi = Some(parse_value(key, raw)?),
                "t_end" => c.t_end = parse_value(key, raw)?,
                "init" => c.init = parse_enum(key, raw)?,
                "amplitude" => c.amplitude = parse_value(key, raw)?,
                "tol" => c.tol = parse_value(key, raw)?,
                "seed" => c.seed = parse_value(key, raw)?,
                "jobs" => c.jobs = parse_value(key, raw)?,
                "format" => c.format = parse_enum(key, raw)?,
                "out" => c.out = Some(PathBuf::from(raw)),
                other => return Err(format!("unknown config key `{other}`")),
            }
        }
        macro_rules! over {
            ($field:ident) => {
                if let Some(v) = flags.$field.clone() {
                    c.$field = v;
                }
            };
            ($field:ident, some) => {
                if flags.$field.is_some() {
                    c.$field = flags.$field.clone();
                }
            };
        }
        over!(domain);
        over!(lengths);
        over!(d, some);
        over!(n);
        over!(p, some);
        over!(beta, some);
        over!(theta);
        over!(lambda);
        over!(mu);
        over!(lambda2, some);
        over!(lsi, some);
        over!(t_end);
        over!(init);
        over!(amplitude);
        over!(tol);
        over!(seed);
        over!(jobs);
        over!(format);
        over!(out, some);
        c.log_sobolev |= flags.log_sobolev;
        if c.jobs == 0 {
            return Err("jobs must be at least 1".into());
        }
        Ok(c)
    }

    /// SHA-256 of the output-relevant settings and the subcommand.
    pub fn hash(&self, command: &str) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(format!("{command}\n{json}").as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn domain(&self) -> Result<Domain, String> {
        let len = |k: usize, default: f64| self.lengths.get(k).copied().unwrap_or(default);
        Ok(match self.domain {
            DomainKind::Interval => Domain::interval(len(0, 1.0)),
            DomainKind::Square => Domain::unit_square(),
            DomainKind::Rectangle => {
                if self.lengths.len() != 2 {
                    return Err("a rectangle needs --lengths LX,LY".into());
                }
                Domain::rectangle(len(0, 1.0), len(1, 1.0))
            }
            DomainKind::Ball => Domain::radial_ball(self.d.unwrap_or(2), len(0, 1.0)),
        })
    }

    /// Dimension of the configured domain, or `--d` when given.
    pub fn dimension(&self) -> usize {
        self.d.unwrap_or(match self.domain {
            DomainKind::Interval => 1,
            DomainKind::Square | DomainKind::Rectangle => 2,
            DomainKind::Ball => 2,
        })
    }

    pub fn exponent(&self) -> Result<Exponent, String> {
        match (self.p, self.log_sobolev) {
            (_, true) => Ok(Exponent::LogSobolev),
            (Some(p), false) if p == 1.0 => Err("p = 1 needs --log-sobolev".into()),
            (Some(p), false) => Ok(Exponent::Power(p)),
            (None, false) => Err("missing --p".into()),
        }
    }

    pub fn power(&self) -> Result<f64, String> {
        match self.exponent()? {
            Exponent::Power(p) => Ok(p),
            Exponent::LogSobolev => Err("this subcommand needs p ≠ 1".into()),
        }
    }

    pub fn out_path(&self) -> Option<&Path> {
        self.out.as_deref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file = parse_file("# comment\nn = 64\np=2\nlambda=1,2, 3\ndomain=square\n").unwrap();
        let flags = Flags {
            n: Some(32),
            ..Default::default()
        };
        let c = RunConfig::merge(&file, &flags).unwrap();
        assert_eq!(c.n, 32);
        assert_eq!(c.p, Some(2.0));
        assert_eq!(c.lambda, vec![1.0, 2.0, 3.0]);
        assert_eq!(c.domain, DomainKind::Square);
    }

    #[test]
    fn bad_files_are_rejected() {
        assert!(parse_file("no equals sign").is_err());
        let file = parse_file("colour=blue").unwrap();
        assert!(RunConfig::merge(&file, &Flags::default()).is_err());
        let file = parse_file("n=abc").unwrap();
        assert!(RunConfig::merge(&file, &Flags::default()).is_err());
    }

    #[test]
    fn hash_ignores_output_location_and_jobs() {
        let a = RunConfig::default();
        let b = RunConfig {
            jobs: 4,
            out: Some("x.csv".into()),
            ..RunConfig::default()
        };
        assert_eq!(a.hash("eigen"), b.hash("eigen"));
        assert_ne!(a.hash("eigen"), a.hash("mu2"));
        let c = RunConfig {
            seed: 1,
            ..RunConfig::default()
        };
        assert_ne!(a.hash("eigen"), c.hash("eigen"));
    }

    #[test]
    fn exponent_rules() {
        let mut c = RunConfig {
            p: Some(1.0),
            ..RunConfig::default()
        };
        assert!(c.exponent().is_err());
        c.log_sobolev = true;
        assert_eq!(c.exponent().unwrap(), Exponent::LogSobolev);
        c.p = None;
        c.log_sobolev = false;
        assert!(c.exponent().is_err());
    }
}
