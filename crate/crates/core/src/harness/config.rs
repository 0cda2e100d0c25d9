//! JSON experiment configuration.

use crate::error::{Error, Result};
use crate::expr::{Env, Expr};
use crate::grid::{Exterior, Grid, GridFunction};
use crate::kernels::{Kernel, KernelSpec};
use crate::solver::Dt;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    CheckKernel,
    OperatorTest,
    SolveLinear,
    SolveNonlinear,
    Calibrate,
    TrackEvolution,
    VerifyEstimates,
    /// One of the numbered acceptance criteria.
    Criterion,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "one")]
    pub n: usize,
    pub radius: f64,
    pub n_points: usize,
}

fn one() -> usize {
    1
}

impl GridSpec {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.n, self.n_points, self.radius)
    }
}

/// A number or the string "auto".
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DtSpec(pub Dt);

impl Serialize for DtSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0 {
            Dt::Auto => s.serialize_str("auto"),
            Dt::Fixed(v) => s.serialize_f64(v),
        }
    }
}

impl<'de> Deserialize<'de> for DtSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(DtSpec(Dt::Fixed(v))),
            Raw::Str(s) if s == "auto" => Ok(DtSpec(Dt::Auto)),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("expected a number or \"auto\", got {s:?}"))),
        }
    }
}

impl Default for DtSpec {
    fn default() -> Self {
        DtSpec(Dt::Auto)
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub t_end: f64,
    #[serde(default)]
    pub dt: DtSpec,
    #[serde(default)]
    pub snapshot_stride: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    #[serde(default = "double_bump")]
    pub generator: String,
    pub count: usize,
    pub seed: u64,
    pub radii: Vec<f64>,
    #[serde(default)]
    pub heldout_count: Option<usize>,
    #[serde(default)]
    pub heldout_seed: Option<u64>,
}

fn double_bump() -> String {
    "double_bump".into()
}

/// (φ, φ′, φ″) in the variable `u`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiSpec {
    pub phi: String,
    pub d1: String,
    pub d2: String,
    #[serde(default)]
    pub holder_nu: Option<f64>,
    #[serde(default)]
    pub holder_seminorm: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub phi: PhiSpec,
    #[serde(rename = "lambda", alias = "Lambda")]
    pub lambda: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub kernel: Option<KernelSpec>,
    /// Path to a JSON kernel spec, relative to the config file.
    #[serde(default)]
    pub kernel_file: Option<PathBuf>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default = "zero_ext")]
    pub exterior: Exterior,
    #[serde(default)]
    pub time: Option<TimeSpec>,
    /// Initial datum as an expression in x (and x2).
    #[serde(default)]
    pub initial: Option<String>,
    #[serde(default)]
    pub ensemble: Option<EnsembleSpec>,
    #[serde(default)]
    pub problem: Option<ProblemSpec>,
    #[serde(default)]
    pub constants_file: Option<PathBuf>,
    #[serde(default)]
    pub criterion: Option<u8>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub horizons: Option<Vec<f64>>,
    #[serde(default)]
    pub slack: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn zero_ext() -> Exterior {
    Exterior::Zero
}

/// A parsed config with the hash of its bytes and its base directory.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub hash: String,
    pub base: PathBuf,
}

pub fn config_hash(bytes: &[u8]) -> String {
    let d = Sha256::digest(bytes);
    d.iter().map(|b| format!("{b:02x}")).collect()
}

fn missing(path: &str) -> Error {
    Error::Config { path: path.into(), msg: "required for this experiment".into() }
}

impl LoadedConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::Config { path: path.display().to_string(), msg: e.to_string() })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_bytes(&bytes, base)
    }

    pub fn from_bytes(bytes: &[u8], base: PathBuf) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_slice(bytes).map_err(|e| Error::Config { path: format!("line {} column {}", e.line(), e.column()), msg: e.to_string() })?;
        let c = LoadedConfig { config, hash: config_hash(bytes), base };
        c.validate()?;
        Ok(c)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() { p.to_path_buf() } else { self.base.join(p) }
    }

    pub fn constants_path(&self) -> Option<PathBuf> {
        self.config.constants_file.as_deref().map(|p| self.resolve(p))
    }

    /// Field-level checks; referenced files must exist.
    pub fn validate(&self) -> Result<()> {
        let c = &self.config;
        for (field, p) in [("kernel_file", &c.kernel_file), ("constants_file", &c.constants_file)] {
            if let Some(p) = p {
                let full = self.resolve(p);
                if !full.exists() {
                    return Err(Error::Config { path: field.into(), msg: format!("file {} does not exist", full.display()) });
                }
            }
        }
        if c.kernel.is_some() && c.kernel_file.is_some() {
            return Err(Error::Config { path: "kernel".into(), msg: "give either kernel or kernel_file, not both".into() });
        }
        if let Some(k) = &c.kernel {
            k.params.resolve().map_err(|e| Error::Config { path: "kernel.params".into(), msg: e.to_string() })?;
        }
        if let Some(g) = &c.grid {
            g.grid().map_err(|e| Error::Config { path: "grid".into(), msg: e.to_string() })?;
        }
        if let Some(t) = &c.time {
            if !(t.t_end >= 0.0 && t.t_end.is_finite()) {
                return Err(Error::Config { path: "time.t_end".into(), msg: format!("{} must be finite and >= 0", t.t_end) });
            }
            if let Dt::Fixed(d) = t.dt.0 {
                if !(d > 0.0 && d.is_finite()) {
                    return Err(Error::Config { path: "time.dt".into(), msg: format!("{d} must be positive or \"auto\"") });
                }
            }
        }
        if let Some(s) = c.slack {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::Config { path: "slack".into(), msg: format!("{s} must be >= 0") });
            }
        }
        if c.experiment == ExperimentKind::Criterion {
            match c.criterion {
                Some(1..=10) => {}
                other => return Err(Error::Config { path: "criterion".into(), msg: format!("{other:?} is not a criterion in 1..=10") }),
            }
        }
        if let Some(e) = &c.ensemble {
            if e.generator != "double_bump" {
                return Err(Error::Config { path: "ensemble.generator".into(), msg: format!("unknown generator {:?}; only \"double_bump\"", e.generator) });
            }
            if e.radii.iter().any(|r| !(*r > 0.0 && *r <= 1.0)) || e.radii.is_empty() {
                return Err(Error::Config { path: "ensemble.radii".into(), msg: "radii must be non-empty and lie in (0, 1]".into() });
            }
        }
        Ok(())
    }

    pub fn kernel(&self) -> Result<Kernel> {
        let c = &self.config;
        let spec = match (&c.kernel, &c.kernel_file) {
            (Some(k), _) => k.clone(),
            (None, Some(p)) => {
                let full = self.resolve(p);
                let bytes = std::fs::read(&full)?;
                serde_json::from_slice(&bytes).map_err(|e| Error::Config { path: "kernel_file".into(), msg: e.to_string() })?
            }
            (None, None) => return Err(missing("kernel")),
        };
        Kernel::from_spec(&spec).map_err(|e| Error::Config { path: "kernel".into(), msg: e.to_string() })
    }

    pub fn grid(&self) -> Result<Grid> {
        self.config.grid.ok_or_else(|| missing("grid"))?.grid()
    }

    pub fn time(&self) -> Result<TimeSpec> {
        self.config.time.ok_or_else(|| missing("time"))
    }

    pub fn initial(&self) -> Result<GridFunction> {
        let src = self.config.initial.as_deref().ok_or_else(|| missing("initial"))?;
        let e = Expr::parse(src).map_err(|err| Error::Config { path: "initial".into(), msg: err.to_string() })?;
        let g = self.grid()?;
        let nd = g.n_dim;
        let f = GridFunction::from_fn(g, self.config.exterior, |x| e.eval(&Env::txz(0.0, &x[..nd], &[0.0, 0.0][..nd])));
        GridFunction::new(f.grid, f.values, f.exterior)
    }

    pub fn seed(&self) -> u64 {
        self.config.seed.unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_out_of_range_names_the_field() {
        let src = br#"{"experiment": "check-kernel", "kernel": {"type": "fractional_heat", "params": {"alpha": 2.5, "lambda": 4}}}"#;
        let e = LoadedConfig::from_bytes(src, PathBuf::new()).unwrap_err().to_string();
        assert!(e.contains("alpha"), "{e}");
        assert!(e.contains("(0, 2)") || e.contains("0, 2"), "{e}");
    }

    #[test]
    fn hash_is_of_the_bytes() {
        let src = br#"{"experiment": "criterion", "criterion": 3}"#;
        let a = LoadedConfig::from_bytes(src, PathBuf::new()).unwrap();
        assert_eq!(a.hash, config_hash(src));
        assert_eq!(a.hash.len(), 64);
    }

    #[test]
    fn dt_auto_or_number() {
        let t: TimeSpec = serde_json::from_str(r#"{"t_end": 1, "dt": "auto"}"#).unwrap();
        assert_eq!(t.dt.0, Dt::Auto);
        let t: TimeSpec = serde_json::from_str(r#"{"t_end": 1, "dt": 0.01}"#).unwrap();
        assert_eq!(t.dt.0, Dt::Fixed(0.01));
        assert!(serde_json::from_str::<TimeSpec>(r#"{"t_end": 1, "dt": "fast"}"#).is_err());
    }

    #[test]
    fn missing_file_is_reported() {
        let src = br#"{"experiment": "track-evolution", "constants_file": "nope.json"}"#;
        let e = LoadedConfig::from_bytes(src, PathBuf::from("/nonexistent")).unwrap_err().to_string();
        assert!(e.contains("constants_file"), "{e}");
    }
}
