use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datagen::SourceSpec;
use crate::error::{Error, Result};
use crate::model::ModelDims;
use crate::pipelines::Method;

/// Observation dimension either fixed or as a multiple of `D_s`
/// (`"2*Ds"`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DxRule {
    Fixed(usize),
    Rule(String),
}

impl Default for DxRule {
    fn default() -> Self {
        DxRule::Rule("2*Ds".into())
    }
}

impl DxRule {
    pub fn resolve(&self, ds: usize) -> Result<usize> {
        match self {
            DxRule::Fixed(v) => Ok(*v),
            DxRule::Rule(text) => {
                let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
                let factor = compact
                    .strip_suffix("*Ds")
                    .or_else(|| compact.strip_prefix("Ds*"))
                    .or(if compact == "Ds" { Some("1") } else { None })
                    .and_then(|f| f.parse::<usize>().ok())
                    .ok_or_else(|| Error::Config(format!("cannot read D_x rule {text:?}; expected e.g. \"2*Ds\"")))?;
                Ok(factor * ds)
            }
        }
    }
}

/// Log-spaced sample sizes from `min` to `max` inclusive, rounded to integers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleGrid {
    pub min: usize,
    pub max: usize,
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_points() -> usize {
    10
}

impl SampleGrid {
    pub fn values(&self) -> Vec<usize> {
        if self.points <= 1 || self.min >= self.max {
            return vec![self.min];
        }
        let (lo, hi) = ((self.min as f64).ln(), (self.max as f64).ln());
        let mut out: Vec<usize> = (0..self.points)
            .map(|i| (lo + (hi - lo) * i as f64 / (self.points - 1) as f64).exp().round() as usize)
            .collect();
        out.dedup();
        out
    }
}

fn default_seeds() -> usize {
    50
}

fn default_methods() -> Vec<Method> {
    vec![Method::Lpa]
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

fn default_name() -> String {
    "sweep".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub database: SourceSpec,
    pub d: usize,
    pub m: usize,
    #[serde(default)]
    pub dx: DxRule,
    /// Mixing filter degrees.
    pub l: Vec<usize>,
    /// Explicit sample sizes; alternatively `t_grid`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<SampleGrid>,
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative asset and output paths are taken
    /// relative to the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut cfg.database {
            SourceSpec::ImageDensity { images } => images.iter_mut().for_each(rebase),
            SourceSpec::Audio { files, .. } => files.iter_mut().for_each(rebase),
            _ => {}
        }
        rebase(&mut cfg.output);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn sample_sizes(&self) -> Vec<usize> {
        match (&self.t, &self.t_grid) {
            (Some(t), _) => t.clone(),
            (None, Some(g)) => g.values(),
            (None, None) => Vec::new(),
        }
    }

    pub fn dims(&self, l: usize, t: usize) -> Result<ModelDims> {
        let ds = self.d * self.m;
        ModelDims::new(self.d, self.m, self.dx.resolve(ds)?, l, t)
    }

    pub fn validate(&self) -> Result<()> {
        let ts = self.sample_sizes();
        if ts.is_empty() {
            return Err(Error::Config("no sample sizes: give `t` or `t_grid`".into()));
        }
        if self.t.is_some() && self.t_grid.is_some() {
            return Err(Error::Config("give either `t` or `t_grid`, not both".into()));
        }
        if ts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!("sample sizes must be strictly ascending: {ts:?}")));
        }
        if self.l.is_empty() {
            return Err(Error::Config("no filter degrees in `l`".into()));
        }
        if self.seeds == 0 {
            return Err(Error::Config("`seeds` must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        let mut seen = self.methods.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.methods.len() {
            return Err(Error::Config("duplicate methods".into()));
        }
        for &l in &self.l {
            let dims = self.dims(l, ts[0])?;
            self.database.check(&dims).map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }
}

/// Parses `"lpa,tcc"`.
pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const LETTERS: &str = r#"
name = "letters"
d = 2
m = 2
dx = "2*Ds"
l = [1, 2]
t_grid = { min = 1000, max = 75000, points = 10 }
seeds = 3
master_seed = 7
methods = ["lpa", "tcc"]

[database]
kind = "letters"
"#;

    #[test]
    fn parses_letters_config() {
        let cfg = ExperimentConfig::from_toml(LETTERS).unwrap();
        assert_eq!(cfg.dims(1, 1000).unwrap(), ModelDims::new(2, 2, 8, 1, 1000).unwrap());
        let ts = cfg.sample_sizes();
        assert_eq!(ts.len(), 10);
        assert_eq!((ts[0], ts[9]), (1000, 75000));
        assert!(ts.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(cfg.methods, vec![Method::Lpa, Method::Tcc]);
        let again = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            LETTERS.replace("seeds = 3", "seeds = 0"),
            LETTERS.replace("t_grid = { min = 1000, max = 75000, points = 10 }", "t = [5000, 1000]"),
            LETTERS.replace("l = [1, 2]", "l = []"),
            LETTERS.replace("\"2*Ds\"", "\"twice\""),
            LETTERS.replace("m = 2", "m = 3"),
            LETTERS.replace("methods = [\"lpa\", \"tcc\"]", "methods = [\"ica\"]"),
            LETTERS.replace("seeds = 3", "sedes = 3"),
        ];
        for text in bad {
            assert!(ExperimentConfig::from_toml(&text).is_err(), "{text}");
        }
    }

    #[test]
    fn dx_rules() {
        assert_eq!(DxRule::default().resolve(6).unwrap(), 12);
        assert_eq!(DxRule::Rule("Ds * 3".into()).resolve(4).unwrap(), 12);
        assert_eq!(DxRule::Fixed(9).resolve(4).unwrap(), 9);
        assert!(DxRule::Rule("2*Dx".into()).resolve(4).is_err());
    }

    #[test]
    fn method_lists() {
        assert_eq!(parse_methods("lpa,tcc").unwrap(), vec![Method::Lpa, Method::Tcc]);
        assert_eq!(parse_methods("TCC").unwrap(), vec![Method::Tcc]);
        assert!(parse_methods("lpa,foo").is_err());
    }
}
