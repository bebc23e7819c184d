//! Config overlay, problem loading and flag validation.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use bpri_core::{BpriError, LossMatrix, PriceParam, Prior};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{context}: {source}")]
    Solver {
        context: String,
        #[source]
        source: BpriError,
    },
    #[error("{0}")]
    Failed(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver { source, .. } if source.is_non_convergence() => 1,
            CliError::Solver { source, .. } => match source {
                BpriError::Io(_) | BpriError::Csv(_) | BpriError::Json(_) => 1,
                _ => 2,
            },
            CliError::Failed(_) => 1,
            CliError::Io { .. } => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Attaches context to core errors.
pub trait Context<T> {
    fn context(self, what: &str) -> CliResult<T>;
}

impl<T> Context<T> for bpri_core::Result<T> {
    fn context(self, what: &str) -> CliResult<T> {
        self.map_err(|source| CliError::Solver { context: what.to_string(), source })
    }
}

/// Discrete problem, either inline or in a separate JSON file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProblemSource {
    Path(PathBuf),
    Inline(ProblemSpec),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub prior: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<Vec<Vec<f64>>>,
    /// Payoffs; converted to loss by negation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utility: Option<Vec<Vec<f64>>>,
}

impl ProblemSpec {
    pub fn build(&self) -> CliResult<(Prior, LossMatrix)> {
        let prior = Prior::new(self.prior.clone()).map_err(|e| CliError::Config(format!("prior: {e}")))?;
        let loss = match (&self.loss, &self.utility) {
            (Some(l), None) => LossMatrix::new(l.clone()),
            (None, Some(u)) => LossMatrix::from_utility(u.clone()),
            _ => return Err(CliError::Config("problem needs exactly one of `loss` or `utility`".into())),
        }
        .map_err(|e| CliError::Config(format!("loss: {e}")))?;
        loss.check_dims(prior.len(), None)
            .map_err(|e| CliError::Config(format!("problem: {e}")))?;
        Ok((prior, loss))
    }
}

pub fn load_problem(src: Option<&ProblemSource>) -> CliResult<(Prior, LossMatrix)> {
    match src {
        None => Err(CliError::Config("missing `problem`".into())),
        Some(ProblemSource::Inline(spec)) => spec.build(),
        Some(ProblemSource::Path(p)) => read_json::<ProblemSpec>(p)?.build(),
    }
}

/// Reads and validates a JSON document, naming the failing field on error.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let file = File::open(path).map_err(|e| CliError::Config(format!("cannot open {}: {e}", path.display())))?;
    let mut de = serde_json::Deserializer::from_reader(BufReader::new(file));
    serde_path_to_error::deserialize(&mut de)
        .map_err(|e| CliError::Config(format!("{}: at `{}`: {}", path.display(), e.path(), e.inner())))
}

/// Grid of positive reals: `lo:hi:step`, `log:lo:hi:n`, a comma list, or a
/// JSON array.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    List(Vec<f64>),
    Text(String),
}

impl GridSpec {
    pub fn values(&self) -> CliResult<Vec<f64>> {
        let bad = |s: &str| CliError::Config(format!("cannot parse grid `{s}`"));
        let v = match self {
            GridSpec::List(v) => v.clone(),
            GridSpec::Text(s) => {
                let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad(s));
                let parts: Vec<&str> = s.split(':').collect();
                match parts.as_slice() {
                    ["log", lo, hi, n] => {
                        let (lo, hi) = (num(lo)?, num(hi)?);
                        let n: usize = n.trim().parse().map_err(|_| bad(s))?;
                        if !(lo > 0.0 && hi > lo && n >= 2) {
                            return Err(bad(s));
                        }
                        (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
                    }
                    [lo, hi, step] => {
                        let (lo, hi, step) = (num(lo)?, num(hi)?, num(step)?);
                        if !(step > 0.0 && hi >= lo) {
                            return Err(bad(s));
                        }
                        let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
                        // snap to 12 decimals so 0.3 + 4 * 0.2 prints as 1.1
                        (0..n).map(|i| ((lo + i as f64 * step) * 1e12).round() / 1e12).collect()
                    }
                    [_] => s.split(',').map(num).collect::<CliResult<Vec<f64>>>()?,
                    _ => return Err(bad(s)),
                }
            }
        };
        if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
            return Err(CliError::Config("grid must be a nonempty list of finite numbers".into()));
        }
        Ok(v)
    }
}

pub fn grid_values(g: &Option<GridSpec>, what: &str) -> CliResult<Vec<f64>> {
    g.as_ref()
        .ok_or_else(|| CliError::Config(format!("missing `{what}`")))?
        .values()
}

/// Exactly one of `lambda` and `price`.
pub fn resolve_price(lambda: Option<f64>, price: Option<f64>) -> CliResult<PriceParam> {
    let r = match (lambda, price) {
        (Some(l), None) => PriceParam::new(l),
        (None, Some(p)) => PriceParam::from_price(p),
        (Some(_), Some(_)) => return Err(CliError::Config("give `lambda` or `price`, not both".into())),
        (None, None) => return Err(CliError::Config("one of `lambda` or `price` is required".into())),
    };
    r.map_err(|e| CliError::Config(e.to_string()))
}

pub fn require_seed(seed: Option<u64>) -> CliResult<u64> {
    seed.ok_or_else(|| CliError::Config("`seed` is required for this experiment".into()))
}

/// Keys of the config file that are not subcommand fields.
#[derive(Debug, Default)]
pub struct ConfigHeader {
    pub out_dir: Option<PathBuf>,
}

/// Overlays the keys of a config file onto the parsed flags.
///
/// The optional `experiment` key must name the subcommand. Relative
/// `problem` and `mdp` paths are taken relative to the config file.
pub fn overlay<T: Serialize + DeserializeOwned>(
    args: &T,
    config: &Path,
    experiment: &str,
) -> CliResult<(T, ConfigHeader)> {
    let raw: Value = read_json(config)?;
    let Value::Object(mut cfg) = raw else {
        return Err(CliError::Config(format!("{}: top level must be an object", config.display())));
    };
    if let Some(name) = cfg.remove("experiment") {
        if name.as_str() != Some(experiment) {
            return Err(CliError::Config(format!(
                "{}: `experiment` is {name}, but the subcommand is `{experiment}`",
                config.display()
            )));
        }
    }
    let mut header = ConfigHeader::default();
    if let Some(dir) = cfg.remove("out_dir") {
        let dir = dir
            .as_str()
            .ok_or_else(|| CliError::Config(format!("{}: at `out_dir`: expected a string", config.display())))?;
        header.out_dir = Some(PathBuf::from(dir));
    }
    let base = config.parent().unwrap_or(Path::new(""));
    for key in ["problem", "mdp"] {
        if let Some(Value::String(p)) = cfg.get_mut(key) {
            if Path::new(p.as_str()).is_relative() {
                *p = base.join(&*p).to_string_lossy().into_owned();
            }
        }
    }
    let mut merged = serde_json::to_value(args).expect("flags serialize");
    if let Value::Object(m) = &mut merged {
        m.extend(cfg);
    }
    let args = serde_path_to_error::deserialize(merged)
        .map_err(|e| CliError::Config(format!("{}: at `{}`: {}", config.display(), e.path(), e.inner())))?;
    Ok((args, header))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_grid_is_snapped() {
        let g = GridSpec::Text("0.3:2.5:0.2".into()).values().unwrap();
        assert_eq!(g.len(), 12);
        assert_eq!(g[4], 1.1);
        assert_eq!(g[11], 2.5);
    }

    #[test]
    fn log_and_list_grids() {
        let g = GridSpec::Text("log:0.1:10:3".into()).values().unwrap();
        assert!((g[1] - 1.0).abs() < 1e-12);
        assert_eq!(GridSpec::Text("1,2.5".into()).values().unwrap(), vec![1.0, 2.5]);
        assert!(GridSpec::Text("1:x".into()).values().is_err());
    }

    #[test]
    fn price_flags_are_exclusive() {
        assert!((resolve_price(None, Some(0.5)).unwrap().lambda() - 2.0).abs() < 1e-15);
        assert!(resolve_price(Some(1.0), Some(1.0)).is_err());
        assert!(resolve_price(None, None).is_err());
        assert!(resolve_price(Some(-1.0), None).is_err());
    }
}
