//! Run configuration in a sectioned `key = value` text format.
//!
//! ```text
//! # comments start with '#'
//! [model]
//! kind = scalar_ou        # scalar_ou | rlc | matrix
//! a = 1.0
//! snr_db = 0              # or: snr = 1.0 (linear)
//!
//! [sampling]
//! kind = poisson          # regular | poisson | bernoulli | empirical
//! rate = 1.0
//! scale = 1.0
//!
//! [sweep]
//! param = a               # a | s | snr_db
//! grid = 0.1, 0.2, 0.5, 1, 2, 5
//!
//! [mc]
//! chain_length = 1000000
//! replicates = 1
//! seed = 0
//!
//! [detect]
//! n = 50, 100, 200, 400
//! epsilon = 0.01, 0.05, 0.1
//! trials = 100000
//! orientation = h0_noise
//!
//! [output]
//! path = out.csv
//! ```
//!
//! Matrices for `kind = matrix` are written row by row, rows separated by `;`:
//! `A = 0 -1; 1 1`. Decibel values are converted to linear scale here and
//! nowhere else.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::detection::Orientation;
use crate::exponents::McConfig;
use crate::linalg::Matrix;
use crate::model::{GaussMarkovModel, ModelError};
use crate::sampling::{RenewalSpec, SamplingError};

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    ScalarOu { a: f64, snr: f64 },
    /// The two-dimensional RLC circuit, optionally rescaled to a target SNR.
    Rlc { snr: Option<f64> },
    Matrices { a: Matrix, b: Matrix, c: Matrix, snr: Option<f64> },
}

impl ModelSpec {
    pub fn build(&self) -> Result<GaussMarkovModel, ModelError> {
        match self {
            ModelSpec::ScalarOu { a, snr } => GaussMarkovModel::scalar_ou(*a, *snr),
            ModelSpec::Rlc { snr } => {
                let m = GaussMarkovModel::rlc();
                snr.map_or(Ok(m.clone()), |s| m.with_snr(s))
            }
            ModelSpec::Matrices { a, b, c, snr } => {
                let m = GaussMarkovModel::validate(a.clone(), b.clone(), c.clone())?;
                snr.map_or(Ok(m.clone()), |s| m.with_snr(s))
            }
        }
    }

    /// The model with drift parameter `a`; only the scalar model has one.
    pub fn with_a(&self, a: f64) -> Option<ModelSpec> {
        match self {
            ModelSpec::ScalarOu { snr, .. } => Some(ModelSpec::ScalarOu { a, snr: *snr }),
            _ => None,
        }
    }

    pub fn with_snr(&self, snr: f64) -> ModelSpec {
        match self {
            ModelSpec::ScalarOu { a, .. } => ModelSpec::ScalarOu { a: *a, snr },
            ModelSpec::Rlc { .. } => ModelSpec::Rlc { snr: Some(snr) },
            ModelSpec::Matrices { a, b, c, .. } => {
                ModelSpec::Matrices { a: a.clone(), b: b.clone(), c: c.clone(), snr: Some(snr) }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    A,
    S,
    SnrDb,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::A => "a",
            SweepParam::S => "s",
            SweepParam::SnrDb => "snr_db",
        }
    }
}

/// One grid point: `label` as written in the file, `value` in model units
/// (linear SNR for decibel sweeps).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub label: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub grid: Vec<GridPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectSpec {
    pub lengths: Vec<usize>,
    pub epsilons: Vec<f64>,
    pub trials: usize,
    pub orientation: Orientation,
}

impl Default for DetectSpec {
    fn default() -> Self {
        Self { lengths: vec![50, 100, 200, 400], epsilons: vec![0.01, 0.05, 0.1], trials: 100_000, orientation: Orientation::H0Noise }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelSpec,
    /// Holding-time law before scaling.
    pub sampling: RenewalSpec,
    pub scale: f64,
    pub sweep: Option<SweepSpec>,
    pub mc: McConfig,
    pub detect: DetectSpec,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelSpec::ScalarOu { a: 1.0, snr: 1.0 },
            sampling: RenewalSpec::Regular { period: 1.0 },
            scale: 1.0,
            sweep: None,
            mc: McConfig::default(),
            detect: DetectSpec::default(),
            output: None,
        }
    }
}

impl RunConfig {
    /// The holding-time law actually sampled, with `scale` applied.
    pub fn scaled_sampling(&self, extra: f64) -> Result<RenewalSpec, SamplingError> {
        self.sampling.scale(self.scale * extra)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{location}: {message}")]
pub struct ConfigError {
    pub location: String,
    pub message: String,
}

fn err(location: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError { location: location.into(), message: message.into() }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

type Section = BTreeMap<String, (usize, String)>;

fn split_sections(text: &str) -> Result<BTreeMap<String, Section>, ConfigError> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim().to_string();
            if !matches!(name.as_str(), "model" | "sampling" | "sweep" | "mc" | "detect" | "output") {
                return Err(err(format!("line {lineno}"), format!("unknown section [{name}]")));
            }
            if sections.contains_key(&name) {
                return Err(err(format!("line {lineno}"), format!("section [{name}] appears twice")));
            }
            sections.insert(name.clone(), Section::new());
            current = Some(name);
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(err(format!("line {lineno}"), "expected `key = value`"));
        };
        let Some(section) = &current else {
            return Err(err(format!("line {lineno}"), "key outside of any section"));
        };
        let key = key.trim().to_string();
        let entry = sections.get_mut(section).expect("section registered on header");
        if entry.insert(key.clone(), (lineno, value.trim().to_string())).is_some() {
            return Err(err(format!("line {lineno}"), format!("duplicate key `{key}` in [{section}]")));
        }
    }
    Ok(sections)
}

struct Reader<'a> {
    name: &'a str,
    entries: Section,
}

impl<'a> Reader<'a> {
    fn new(name: &'a str, entries: Option<Section>) -> Self {
        Self { name, entries: entries.unwrap_or_default() }
    }

    fn loc(&self, key: &str) -> String {
        match self.entries.get(key) {
            Some((line, _)) => format!("line {line}, [{}] {key}", self.name),
            None => format!("[{}] {key}", self.name),
        }
    }

    fn take(&mut self, key: &str) -> Option<(String, String)> {
        let loc = self.loc(key);
        self.entries.remove(key).map(|(_, v)| (loc, v))
    }

    fn f64(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.take(key).map(|(loc, v)| parse_f64(&loc, &v)).transpose()
    }

    fn req_f64(&mut self, key: &str) -> Result<f64, ConfigError> {
        self.f64(key)?.ok_or_else(|| err(format!("[{}]", self.name), format!("missing key `{key}`")))
    }

    fn usize(&mut self, key: &str) -> Result<Option<usize>, ConfigError> {
        self.take(key)
            .map(|(loc, v)| v.parse::<usize>().map_err(|_| err(loc, format!("expected a non-negative integer, got `{v}`"))))
            .transpose()
    }

    fn string(&mut self, key: &str) -> Option<(String, String)> {
        self.take(key)
    }

    fn finish(self) -> Result<(), ConfigError> {
        match self.entries.iter().next() {
            Some((key, (line, _))) => Err(err(format!("line {line}"), format!("unknown key `{key}` in [{}]", self.name))),
            None => Ok(()),
        }
    }
}

fn parse_f64(loc: &str, v: &str) -> Result<f64, ConfigError> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(err(loc, format!("expected a finite number, got `{v}`"))),
    }
}

fn parse_list(loc: &str, v: &str) -> Result<Vec<f64>, ConfigError> {
    v.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| parse_f64(loc, t))
        .collect()
}

fn parse_matrix(loc: &str, v: &str) -> Result<Matrix, ConfigError> {
    let rows: Vec<Vec<f64>> = v.split(';').map(|r| parse_list(loc, r)).collect::<Result<_, _>>()?;
    let ncols = rows.first().map_or(0, Vec::len);
    if ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(err(loc, "matrix rows must be non-empty and of equal length"));
    }
    Ok(Matrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// Reads `snr` (linear) or `snr_db`; at most one may be present.
fn read_snr(r: &mut Reader) -> Result<Option<f64>, ConfigError> {
    let lin = r.f64("snr")?;
    let db = r.f64("snr_db")?;
    match (lin, db) {
        (Some(_), Some(_)) => Err(err(format!("[{}]", r.name), "give either `snr` or `snr_db`, not both")),
        (Some(s), None) => Ok(Some(s)),
        (None, Some(d)) => Ok(Some(db_to_linear(d))),
        (None, None) => Ok(None),
    }
}

fn parse_model(mut r: Reader) -> Result<ModelSpec, ConfigError> {
    let kind = r.string("kind").map(|(_, v)| v).unwrap_or_else(|| "scalar_ou".into());
    let spec = match kind.as_str() {
        "scalar_ou" => {
            let a = r.f64("a")?.unwrap_or(1.0);
            let snr = read_snr(&mut r)?.unwrap_or(1.0);
            ModelSpec::ScalarOu { a, snr }
        }
        "rlc" => ModelSpec::Rlc { snr: read_snr(&mut r)? },
        "matrix" => {
            let mut mat = |key: &str| -> Result<Matrix, ConfigError> {
                let (loc, v) = r.string(key).ok_or_else(|| err("[model]", format!("missing key `{key}`")))?;
                parse_matrix(&loc, &v)
            };
            let (a, b, c) = (mat("A")?, mat("B")?, mat("C")?);
            ModelSpec::Matrices { a, b, c, snr: read_snr(&mut r)? }
        }
        other => return Err(err("[model] kind", format!("unknown model kind `{other}`"))),
    };
    r.finish()?;
    Ok(spec)
}

fn parse_sampling(mut r: Reader, base_dir: &Path) -> Result<(RenewalSpec, f64), ConfigError> {
    let kind = r.string("kind").map(|(_, v)| v).unwrap_or_else(|| "regular".into());
    let loc = r.loc("kind");
    let wrap = |e: SamplingError| err(loc.clone(), e.to_string());
    let spec = match kind.as_str() {
        "regular" => RenewalSpec::regular(r.f64("period")?.unwrap_or(1.0)).map_err(wrap)?,
        "poisson" => {
            let rate = match (r.f64("rate")?, r.f64("mean")?) {
                (Some(_), Some(_)) => return Err(err("[sampling]", "give either `rate` or `mean`, not both")),
                (Some(rate), None) => rate,
                (None, Some(mean)) => 1.0 / mean,
                (None, None) => 1.0,
            };
            RenewalSpec::poisson(rate).map_err(wrap)?
        }
        "bernoulli" => {
            let period = r.f64("period")?.unwrap_or(1.0);
            let prob = r.req_f64("prob")?;
            RenewalSpec::bernoulli(period, prob).map_err(wrap)?
        }
        "empirical" => {
            let (floc, file) = r.string("file").ok_or_else(|| err("[sampling]", "missing key `file`"))?;
            let path = base_dir.join(file);
            RenewalSpec::load_empirical(&path).map_err(|e| err(floc, e.to_string()))?
        }
        other => return Err(err(loc, format!("unknown sampling kind `{other}`"))),
    };
    let scale = r.f64("scale")?.unwrap_or(1.0);
    if scale <= 0.0 {
        return Err(err("[sampling] scale", "scale must be positive"));
    }
    r.finish()?;
    Ok((spec, scale))
}

fn parse_sweep(mut r: Reader) -> Result<SweepSpec, ConfigError> {
    let (ploc, pname) = r.string("param").ok_or_else(|| err("[sweep]", "missing key `param`"))?;
    let param = match pname.as_str() {
        "a" => SweepParam::A,
        "s" => SweepParam::S,
        "snr_db" => SweepParam::SnrDb,
        other => return Err(err(ploc, format!("unknown sweep parameter `{other}` (expected a, s or snr_db)"))),
    };
    let (gloc, gtext) = r.string("grid").ok_or_else(|| err("[sweep]", "missing key `grid`"))?;
    let labels = parse_list(&gloc, &gtext)?;
    if labels.is_empty() {
        return Err(err(gloc, "grid is empty"));
    }
    if labels.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(err(gloc, "grid must be strictly increasing"));
    }
    if param != SweepParam::SnrDb && labels[0] <= 0.0 {
        return Err(err(gloc, format!("grid values for `{}` must be positive", param.name())));
    }
    let grid = labels
        .into_iter()
        .map(|label| GridPoint { label, value: if param == SweepParam::SnrDb { db_to_linear(label) } else { label } })
        .collect();
    r.finish()?;
    Ok(SweepSpec { param, grid })
}

fn parse_mc(mut r: Reader) -> Result<McConfig, ConfigError> {
    let mut mc = McConfig::default();
    if let Some(n) = r.usize("chain_length")? {
        mc.chain_length = n;
    }
    mc.burn_in = r.usize("burn_in")?;
    if let Some(k) = r.usize("replicates")? {
        mc.replicates = k;
    }
    if let Some((loc, v)) = r.string("seed") {
        mc.seed = v.parse().map_err(|_| err(loc, format!("expected an unsigned 64-bit seed, got `{v}`")))?;
    }
    if let Some(b) = r.usize("batches")? {
        mc.batches = b;
    }
    mc.validate().map_err(|e| err("[mc]", e.to_string()))?;
    r.finish()?;
    Ok(mc)
}

fn parse_detect(mut r: Reader) -> Result<DetectSpec, ConfigError> {
    let mut d = DetectSpec::default();
    if let Some((loc, v)) = r.string("n") {
        d.lengths = v
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<usize>().ok().filter(|&n| n > 0).ok_or_else(|| err(&loc, format!("bad path length `{t}`"))))
            .collect::<Result<_, _>>()?;
        if d.lengths.is_empty() {
            return Err(err(loc, "no path lengths given"));
        }
    }
    if let Some((loc, v)) = r.string("epsilon") {
        d.epsilons = parse_list(&loc, &v)?;
        if d.epsilons.is_empty() || d.epsilons.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            return Err(err(loc, "false-alarm levels must lie in (0, 1)"));
        }
    }
    if let Some(t) = r.usize("trials")? {
        d.trials = t;
    }
    if let Some((loc, v)) = r.string("orientation") {
        d.orientation = match v.as_str() {
            "h0_noise" => Orientation::H0Noise,
            "h0_signal" => Orientation::H0Signal,
            other => return Err(err(loc, format!("unknown orientation `{other}` (expected h0_noise or h0_signal)"))),
        };
    }
    r.finish()?;
    Ok(d)
}

/// Parses a configuration; relative file names resolve against `base_dir`.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<RunConfig, ConfigError> {
    let mut sections = split_sections(text)?;
    let mut cfg = RunConfig::default();
    if let Some(s) = sections.remove("model") {
        cfg.model = parse_model(Reader::new("model", Some(s)))?;
    }
    if let Some(s) = sections.remove("sampling") {
        let (spec, scale) = parse_sampling(Reader::new("sampling", Some(s)), base_dir)?;
        cfg.sampling = spec;
        cfg.scale = scale;
    }
    if let Some(s) = sections.remove("sweep") {
        cfg.sweep = Some(parse_sweep(Reader::new("sweep", Some(s)))?);
    }
    if let Some(s) = sections.remove("mc") {
        cfg.mc = parse_mc(Reader::new("mc", Some(s)))?;
    }
    if let Some(s) = sections.remove("detect") {
        cfg.detect = parse_detect(Reader::new("detect", Some(s)))?;
    }
    if let Some(s) = sections.remove("output") {
        let mut r = Reader::new("output", Some(s));
        cfg.output = r.string("path").map(|(_, v)| base_dir.join(v));
        r.finish()?;
    }
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| err(path.display().to_string(), e.to_string()))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config(&text, base)
}
