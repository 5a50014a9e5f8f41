//! Flat sectioned key-value configuration:
//!
//! ```text
//! [plant]
//! preset = benchmark-2d
//! A = 0 1; 19 -2
//!
//! [run]
//! h = 0.3
//! ```
//!
//! Matrices are rows separated by `;`, entries by whitespace or commas.
//! `#` starts a comment.

use std::collections::BTreeMap;
use std::fmt;

use smclab::sim::format_number;
use smclab::{Benchmark2D, EqLaw, GainMatrix, Mat, Perturbation, PerturbationKind, Plant, ScenarioConfig, UsLaw};

pub const PRESETS: [&str; 1] = ["benchmark-2d"];

const SECTIONS: [(&str, &[&str]); 3] = [
    ("plant", &["preset", "A", "B", "C", "alpha", "x0"]),
    ("run", &["h", "t_end", "eq_law", "us_law", "epsilon", "gain_matrix", "divergence_cap", "seed"]),
    ("perturbation", &["kind", "params"]),
];

/// Where a value came from: a file line or a command-line override.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Override,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Line(n) => write!(f, "line {n}"),
            Origin::Override => f.write_str("--set"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Raw entries keyed by `section.key`.
#[derive(Debug, Clone, Default)]
pub struct Document {
    entries: BTreeMap<String, (String, Origin)>,
}

impl Document {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut doc = Document::default();
        let mut section: Option<&str> = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                match SECTIONS.iter().find(|(s, _)| *s == name) {
                    Some((s, _)) => section = Some(s),
                    None => return err(format!("line {line_no}: unknown section [{name}]")),
                }
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return err(format!("line {line_no}: expected `key = value`, got `{line}`"));
            };
            let Some(sec) = section else {
                return err(format!("line {line_no}: key `{}` appears before any section", key.trim()));
            };
            doc.insert(sec, key.trim(), value.trim(), Origin::Line(line_no))?;
        }
        Ok(doc)
    }

    /// Applies a `section.key=value` override.
    pub fn set(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let Some((path, value)) = assignment.split_once('=') else {
            return err(format!("--set {assignment}: expected section.key=value"));
        };
        let Some((sec, key)) = path.trim().split_once('.') else {
            return err(format!("--set {assignment}: key must be written section.key"));
        };
        let Some((sec, _)) = SECTIONS.iter().find(|(s, _)| *s == sec) else {
            return err(format!("--set {assignment}: unknown section [{sec}]"));
        };
        self.insert(sec, key, value.trim(), Origin::Override)
    }

    fn insert(&mut self, sec: &str, key: &str, value: &str, origin: Origin) -> Result<(), ConfigError> {
        let known = SECTIONS.iter().find(|(s, _)| *s == sec).map(|(_, k)| *k).unwrap_or(&[]);
        if !known.contains(&key) {
            return err(format!("{origin}: unknown key `{key}` in section [{sec}]"));
        }
        let full = format!("{sec}.{key}");
        if let (Some((_, Origin::Line(prev))), Origin::Line(_)) = (self.entries.get(&full), origin) {
            return err(format!("{origin}: duplicate key `{key}` (first set on line {prev})"));
        }
        self.entries.insert(full, (value.to_string(), origin));
        Ok(())
    }

    pub fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn get(&self, key: &str) -> Option<(&str, Origin)> {
        self.entries.get(key).map(|(v, o)| (v.as_str(), *o))
    }

    fn number(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some((v, o)) => parse_number(v).map(Some).ok_or_else(|| {
                ConfigError(format!("{o}: key `{key}` expects a number, got `{v}`"))
            }),
        }
    }

    fn vector(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some((v, o)) => parse_vector(v)
                .map(Some)
                .ok_or_else(|| ConfigError(format!("{o}: key `{key}` expects a list of numbers, got `{v}`"))),
        }
    }

    fn matrix(&self, key: &str) -> Result<Option<Mat>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some((v, o)) => parse_matrix(v)
                .map(Some)
                .ok_or_else(|| ConfigError(format!("{o}: key `{key}` expects a matrix `a b; c d`, got `{v}`"))),
        }
    }

    /// Builds the scenario, filling unset keys from the preset and defaults.
    pub fn resolve(&self) -> Result<ScenarioConfig, ConfigError> {
        let preset = match self.get("plant.preset") {
            None => None,
            Some((name, _)) if PRESETS.contains(&name) => Some(Benchmark2D::new()),
            Some((name, o)) => {
                return err(format!("{o}: key `plant.preset`: unknown preset `{name}` (known: {})", PRESETS.join(", ")))
            }
        };
        let pick = |key: &str, from_preset: Option<Mat>| -> Result<Mat, ConfigError> {
            match (self.matrix(key)?, from_preset) {
                (Some(m), _) => Ok(m),
                (None, Some(m)) => Ok(m),
                (None, None) => err(format!("missing plant matrix `{key}` and no preset given")),
            }
        };
        let a = pick("plant.A", preset.as_ref().map(|b| b.plant.a().clone()))?;
        let b = pick("plant.B", preset.as_ref().map(|b| b.plant.b().clone()))?;
        let c = pick("plant.C", preset.as_ref().map(|b| b.plant.c().clone()))?;
        let alpha = self.number("plant.alpha")?.unwrap_or(1.0);
        let plant = Plant::new(a, b, c, alpha).map_err(|e| ConfigError(format!("[plant]: {e}")))?;
        let x0 = match (self.vector("plant.x0")?, &preset) {
            (Some(x), _) => x,
            (None, Some(p)) => p.x0.clone(),
            (None, None) => return err("missing `plant.x0` and no preset given"),
        };

        let Some(h) = self.number("run.h")? else {
            return err("missing `run.h`");
        };
        let t_end = self.number("run.t_end")?.unwrap_or(150.0);
        let eq_law = match self.get("run.eq_law") {
            None => EqLaw::Exact,
            Some((v, o)) => EqLaw::parse(v)
                .ok_or_else(|| ConfigError(format!("{o}: key `run.eq_law`: unknown law `{v}`")))?,
        };
        let epsilon = self.number("run.epsilon")?;
        let us_law = match self.get("run.us_law") {
            None => UsLaw::ImplicitAvi,
            Some((v, o)) => UsLaw::parse(v, epsilon).map_err(|e| ConfigError(format!("{o}: key `run.us_law`: {e}")))?,
        };
        if epsilon.is_some() && !matches!(us_law, UsLaw::Saturation { .. }) {
            let (_, o) = self.get("run.epsilon").expect("present");
            return err(format!("{o}: key `run.epsilon` only applies to us_law = saturation"));
        }
        let gain_matrix = match self.get("run.gain_matrix") {
            None => GainMatrix::Cb,
            Some((v, o)) => GainMatrix::parse(v)
                .ok_or_else(|| ConfigError(format!("{o}: key `run.gain_matrix`: expected CB or CBstar, got `{v}`")))?,
        };
        let divergence_cap = self.number("run.divergence_cap")?.unwrap_or(smclab::sim::DEFAULT_DIVERGENCE_CAP);
        let seed = match self.get("run.seed") {
            None => 0,
            Some((v, o)) => v
                .parse::<u64>()
                .map_err(|_| ConfigError(format!("{o}: key `run.seed` expects an unsigned integer, got `{v}`")))?,
        };

        let kind = match self.get("perturbation.kind") {
            None => PerturbationKind::None,
            Some((v, o)) => PerturbationKind::parse(v)
                .ok_or_else(|| ConfigError(format!("{o}: key `perturbation.kind`: unknown kind `{v}`")))?,
        };
        let params = self.vector("perturbation.params")?.unwrap_or_default();
        let perturbation = Perturbation::new(kind, params).map_err(|e| {
            let at = self.get("perturbation.params").map(|(_, o)| format!("{o}: ")).unwrap_or_default();
            ConfigError(format!("{at}key `perturbation.params`: {e}"))
        })?;

        let mut cfg = ScenarioConfig::new(plant, h, t_end, x0)
            .with_laws(eq_law, us_law)
            .with_gain_matrix(gain_matrix)
            .with_perturbation(perturbation);
        cfg.divergence_cap = divergence_cap;
        cfg.seed = seed;
        Ok(cfg)
    }
}

pub fn parse_number(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

pub fn parse_vector(s: &str) -> Option<Vec<f64>> {
    let v: Option<Vec<f64>> = s
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(parse_number)
        .collect();
    v.filter(|v| !v.is_empty())
}

pub fn parse_matrix(s: &str) -> Option<Mat> {
    let rows: Vec<Vec<f64>> = s.split(';').map(parse_vector).collect::<Option<_>>()?;
    let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
    Mat::from_rows(&refs).ok()
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format_number(*x)).collect::<Vec<_>>().join(" ")
}

fn matrix_text(m: &Mat) -> String {
    (0..m.rows()).map(|i| join(m.row_slice(i))).collect::<Vec<_>>().join("; ")
}

/// Fully explicit configuration text; parsing it back gives the same scenario.
pub fn echo(cfg: &ScenarioConfig) -> String {
    let p = &cfg.plant;
    let mut out = String::from("# resolved configuration\n[plant]\n");
    out += &format!("A = {}\n", matrix_text(p.a()));
    out += &format!("B = {}\n", matrix_text(p.b()));
    out += &format!("C = {}\n", matrix_text(p.c()));
    out += &format!("alpha = {}\n", format_number(p.alpha()));
    out += &format!("x0 = {}\n", join(&cfg.x0));
    out += "\n[run]\n";
    out += &format!("h = {}\n", format_number(cfg.h));
    out += &format!("t_end = {}\n", format_number(cfg.t_end));
    out += &format!("eq_law = {}\n", cfg.eq_law.name());
    out += &format!("us_law = {}\n", cfg.us_law.name());
    if let UsLaw::Saturation { epsilon } = cfg.us_law {
        out += &format!("epsilon = {}\n", format_number(epsilon));
    }
    out += &format!("gain_matrix = {}\n", cfg.gain_matrix.name());
    out += &format!("divergence_cap = {}\n", format_number(cfg.divergence_cap));
    out += &format!("seed = {}\n", cfg.seed);
    out += "\n[perturbation]\n";
    out += &format!("kind = {}\n", cfg.perturbation.kind().name());
    if !cfg.perturbation.params().is_empty() {
        out += &format!("params = {}\n", join(cfg.perturbation.params()));
    }
    out
}
