//! `key = value` config files and their merge with command-line flags.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dpsde::scheme::SchemeKind;

use crate::CliError;

/// Parsed config file. Keys are normalised to `snake_case`.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct ConfigFile {
    values: HashMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::validation("config", format!("line {}: expected `key = value`", i + 1)))?;
            let key = key.trim().replace('-', "_");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::validation("config", format!("line {}: unknown key `{key}`", i + 1)));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::runtime("io", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: fmt::Display,
    {
        self.values
            .get(key)
            .map(|v| v.parse::<T>().map_err(|e| CliError::validation("config", format!("{key} = {v}: {e}"))))
            .transpose()
    }

    fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, CliError>
    where
        T::Err: fmt::Display,
    {
        self.values
            .get(key)
            .map(|v| parse_list(v).map_err(|e| CliError::validation("config", format!("{key} = {v}: {e}"))))
            .transpose()
    }
}

const KNOWN_KEYS: &[&str] = &[
    "model", "alpha", "beta", "x0", "horizon", "steps", "n_list", "p_list", "paths", "seed", "scheme", "n",
    "path_index", "output", "out_dir", "format", "threads",
];

pub fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    s.split(',')
        .map(|p| p.trim())
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<T>().map_err(|e| format!("`{p}`: {e}")))
        .collect()
}

/// Comma-separated list flag value.
#[derive(Debug, Clone, PartialEq)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: fmt::Display,
{
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_list(s).map(List)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

/// What `simulate` produces: a scheme path or the reference solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathSource {
    Scheme(SchemeKind),
    Reference,
}

impl FromStr for PathSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "reference" {
            Ok(Self::Reference)
        } else {
            s.parse().map(Self::Scheme)
        }
    }
}

/// Values a flag may supply; `None` falls back to the config file, then to
/// the built-in default.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub model: Option<String>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub x0: Option<f64>,
    pub horizon: Option<f64>,
    pub steps: Option<usize>,
    pub n_list: Option<Vec<usize>>,
    pub p_list: Option<Vec<f64>>,
    pub paths: Option<usize>,
    pub seed: Option<u64>,
    pub scheme: Option<String>,
    pub n: Option<usize>,
    pub path_index: Option<u64>,
    pub output: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub format: Option<OutputFormat>,
    pub threads: Option<usize>,
}

/// Fully resolved run settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model_id: String,
    pub alpha: f64,
    pub beta: f64,
    pub x0: f64,
    pub horizon: f64,
    pub grid_steps: usize,
    pub n_list: Vec<usize>,
    pub p_list: Vec<f64>,
    pub paths: usize,
    pub master_seed: u64,
    pub scheme: String,
    pub n: usize,
    pub path_index: u64,
    pub output: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub format: OutputFormat,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn resolve(flags: Overrides, file: &ConfigFile) -> Result<Self, CliError> {
        Ok(Self {
            model_id: pick(flags.model, file.get("model")?, "affine".to_string()),
            alpha: pick(flags.alpha, file.get("alpha")?, 0.6),
            beta: pick(flags.beta, file.get("beta")?, -1.0),
            x0: pick(flags.x0, file.get("x0")?, 0.0),
            horizon: pick(flags.horizon, file.get("horizon")?, 1.0),
            grid_steps: pick(flags.steps, file.get("steps")?, 4096),
            n_list: pick(flags.n_list, file.get_list("n_list")?, vec![8, 16, 32, 64]),
            p_list: pick(flags.p_list, file.get_list("p_list")?, vec![2.0, 4.0]),
            paths: pick(flags.paths, file.get("paths")?, 2000),
            master_seed: pick(flags.seed, file.get("seed")?, 42),
            scheme: pick(flags.scheme, file.get("scheme")?, "new".to_string()),
            n: pick(flags.n, file.get("n")?, 8),
            path_index: pick(flags.path_index, file.get("path_index")?, 0),
            output: flags.output.or(file.get("output")?),
            out_dir: flags.out_dir.or(file.get("out_dir")?),
            format: pick(flags.format, file.get("format")?, OutputFormat::Csv),
            threads: flags.threads.or(file.get("threads")?),
        })
    }
}

fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_lists() {
        let f = ConfigFile::parse("# study\nalpha = 0.3  # inline\n\nn-list = 8, 16,32\nmodel=gbm\n").unwrap();
        let c = RunConfig::resolve(Overrides::default(), &f).unwrap();
        assert_eq!(c.alpha, 0.3);
        assert_eq!(c.n_list, vec![8, 16, 32]);
        assert_eq!(c.model_id, "gbm");
        assert_eq!(c.beta, -1.0);
    }

    #[test]
    fn flags_override_file() {
        let f = ConfigFile::parse("alpha = 0.3\npaths = 10").unwrap();
        let c = RunConfig::resolve(Overrides { alpha: Some(0.1), ..Default::default() }, &f).unwrap();
        assert_eq!(c.alpha, 0.1);
        assert_eq!(c.paths, 10);
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(ConfigFile::parse("alpha 0.3").is_err());
        assert!(ConfigFile::parse("colour = red").is_err());
        let f = ConfigFile::parse("alpha = abc").unwrap();
        assert!(RunConfig::resolve(Overrides::default(), &f).is_err());
    }

    #[test]
    fn path_source() {
        assert_eq!("reference".parse::<PathSource>().unwrap(), PathSource::Reference);
        assert_eq!("old".parse::<PathSource>().unwrap(), PathSource::Scheme(SchemeKind::Old));
        assert!("euler".parse::<PathSource>().is_err());
    }
}
