//! Sectioned `key = value` problem configuration.
//!
//! Three sections: `[problem]` (expressions h, f, g and the order n),
//! `[numerics]` (discretization and iteration settings, all optional),
//! `[output]` (artifact directory and formats). Unknown sections and keys
//! are rejected so typos cannot silently fall back to defaults.

use crate::expr::{parse, ParseError, ParsedFunction};
use crate::jets::MAX_ORDER;
use crate::operator::ProblemSpec;
use std::collections::HashSet;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Malformed { line: usize, text: String },
    #[error("line {line}: unknown section [{name}]")]
    UnknownSection { line: usize, name: String },
    #[error("line {line}: key `{key}` outside any section")]
    KeyOutsideSection { line: usize, key: String },
    #[error("line {line}: unknown key `{key}` in section [{section}]")]
    UnknownKey {
        line: usize,
        section: String,
        key: String,
    },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("missing required key `{key}` in section [{section}]")]
    MissingKey { section: String, key: String },
    #[error("key `{key}`: cannot parse `{value}` as {want}")]
    BadValue {
        key: String,
        value: String,
        want: &'static str,
    },
    #[error("key `{key}` = {value} out of range: {constraint}")]
    OutOfRange {
        key: String,
        value: String,
        constraint: String,
    },
    #[error("key `{key}`: {source}")]
    Expr {
        key: String,
        #[source]
        source: ParseError,
    },
}

/// Output artifact formats; both are written by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutputFormats {
    pub csv: bool,
    pub json: bool,
}

/// Parsed and validated configuration.
#[derive(Debug, Clone)]
pub struct Config {
    pub h: ParsedFunction,
    pub f: ParsedFunction,
    pub g: ParsedFunction,
    pub n: usize,
    pub window: f64,
    pub step: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub samples: usize,
    pub trials: usize,
    pub seed: u64,
    pub directory: PathBuf,
    pub formats: OutputFormats,
    /// Original text, kept so solve can archive the config next to its
    /// artifacts for later verification.
    pub source_text: String,
}

impl Config {
    pub fn problem(&self) -> ProblemSpec {
        ProblemSpec {
            h: self.h.clone(),
            f: self.f.clone(),
            g: self.g.clone(),
            n: self.n,
            window: self.window,
            step: self.step,
            newton_tol: self.newton_tol,
            newton_max_iter: self.newton_max_iter,
        }
    }
}

const PROBLEM_KEYS: &[&str] = &["h", "f", "g", "n"];
const NUMERICS_KEYS: &[&str] = &[
    "window",
    "step",
    "tol",
    "max_iter",
    "newton_tol",
    "newton_max_iter",
    "samples",
    "trials",
    "seed",
];
const OUTPUT_KEYS: &[&str] = &["directory", "formats"];

struct Entries {
    // (section, key, value, line)
    items: Vec<(String, String, String, usize)>,
}

impl Entries {
    fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.items
            .iter()
            .find(|(s, k, _, _)| s == section && k == key)
            .map(|(_, _, v, _)| v.as_str())
    }

    fn require(&self, section: &str, key: &str) -> Result<&str, ConfigError> {
        self.get(section, key).ok_or_else(|| ConfigError::MissingKey {
            section: section.to_string(),
            key: key.to_string(),
        })
    }
}

fn tokenize(text: &str) -> Result<Entries, ConfigError> {
    let mut items = Vec::new();
    let mut section: Option<String> = None;
    let mut seen = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.split('#').next().unwrap_or("").trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Malformed {
                line,
                text: trimmed.to_string(),
            })?;
            if !matches!(name, "problem" | "numerics" | "output") {
                return Err(ConfigError::UnknownSection {
                    line,
                    name: name.to_string(),
                });
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = trimmed.split_once('=').ok_or_else(|| ConfigError::Malformed {
            line,
            text: trimmed.to_string(),
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        let section = section.clone().ok_or_else(|| ConfigError::KeyOutsideSection {
            line,
            key: key.clone(),
        })?;
        let allowed: &[&str] = match section.as_str() {
            "problem" => PROBLEM_KEYS,
            "numerics" => NUMERICS_KEYS,
            _ => OUTPUT_KEYS,
        };
        if !allowed.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey { line, section, key });
        }
        if !seen.insert((section.clone(), key.clone())) {
            return Err(ConfigError::DuplicateKey { line, key });
        }
        items.push((section, key, value, line));
    }
    Ok(Entries { items })
}

fn parse_num<T: std::str::FromStr>(
    entries: &Entries,
    section: &str,
    key: &str,
    default: T,
    want: &'static str,
) -> Result<T, ConfigError> {
    match entries.get(section, key) {
        None => Ok(default),
        Some(v) => v.parse().map_err(|_| ConfigError::BadValue {
            key: key.to_string(),
            value: v.to_string(),
            want,
        }),
    }
}

fn parse_expr(entries: &Entries, key: &str) -> Result<ParsedFunction, ConfigError> {
    let text = entries.require("problem", key)?;
    parse(text).map_err(|source| ConfigError::Expr {
        key: key.to_string(),
        source,
    })
}

fn range_err(key: &str, value: impl std::fmt::Display, constraint: &str) -> ConfigError {
    ConfigError::OutOfRange {
        key: key.to_string(),
        value: value.to_string(),
        constraint: constraint.to_string(),
    }
}

pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let entries = tokenize(text)?;

    let h = parse_expr(&entries, "h")?;
    let f = parse_expr(&entries, "f")?;
    let g = parse_expr(&entries, "g")?;
    let n_text = entries.require("problem", "n")?;
    let n: usize = n_text.parse().map_err(|_| ConfigError::BadValue {
        key: "n".into(),
        value: n_text.to_string(),
        want: "positive integer",
    })?;
    if !(1..=MAX_ORDER).contains(&n) {
        return Err(range_err("n", n, &format!("1 <= n <= {MAX_ORDER}")));
    }

    let window: f64 = parse_num(&entries, "numerics", "window", 10.0, "number")?;
    let step: f64 = parse_num(&entries, "numerics", "step", 2e-3, "number")?;
    let tol: f64 = parse_num(&entries, "numerics", "tol", 1e-11, "number")?;
    let max_iter: usize = parse_num(&entries, "numerics", "max_iter", 200, "positive integer")?;
    let newton_tol: f64 = parse_num(&entries, "numerics", "newton_tol", 1e-13, "number")?;
    let newton_max_iter: usize =
        parse_num(&entries, "numerics", "newton_max_iter", 60, "positive integer")?;
    let samples: usize = parse_num(&entries, "numerics", "samples", 20_001, "positive integer")?;
    let trials: usize = parse_num(&entries, "numerics", "trials", 64, "positive integer")?;
    let seed: u64 = parse_num(&entries, "numerics", "seed", 0, "unsigned integer")?;

    if !(window > 0.0 && window.is_finite()) {
        return Err(range_err("window", window, "window > 0"));
    }
    if !(step > 0.0 && step <= window) {
        return Err(range_err("step", step, "0 < step <= window"));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(range_err("tol", tol, "0 < tol < 1"));
    }
    if max_iter < 1 {
        return Err(range_err("max_iter", max_iter, "max_iter >= 1"));
    }
    if !(newton_tol > 0.0 && newton_tol < 1.0) {
        return Err(range_err("newton_tol", newton_tol, "0 < newton_tol < 1"));
    }
    if samples < 1000 {
        return Err(range_err("samples", samples, "samples >= 1000"));
    }
    if trials < 1 {
        return Err(range_err("trials", trials, "trials >= 1"));
    }

    let directory = PathBuf::from(entries.get("output", "directory").unwrap_or("out"));
    let formats = match entries.get("output", "formats") {
        None => OutputFormats { csv: true, json: true },
        Some(v) => {
            let mut fmt = OutputFormats { csv: false, json: false };
            for part in v.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                match part {
                    "csv" => fmt.csv = true,
                    "json" => fmt.json = true,
                    other => {
                        return Err(ConfigError::BadValue {
                            key: "formats".into(),
                            value: other.to_string(),
                            want: "comma list of csv, json",
                        })
                    }
                }
            }
            fmt
        }
    };

    Ok(Config {
        h,
        f,
        g,
        n,
        window,
        step,
        tol,
        max_iter,
        newton_tol,
        newton_max_iter,
        samples,
        trials,
        seed,
        directory,
        formats,
        source_text: text.to_string(),
    })
}

pub fn load_config<P: AsRef<Path>>(path: P) -> Result<Config, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = "\
# worked example
[problem]
h = 2*x
f = 3*x
g = sin(x)/100
n = 3

[numerics]
window = 10
step = 2e-3
tol = 1e-11

[output]
directory = out/example
";

    #[test]
    fn parses_example_with_defaults() {
        let cfg = parse_config(EXAMPLE).unwrap();
        assert_eq!(cfg.n, 3);
        assert_eq!(cfg.window, 10.0);
        assert_eq!(cfg.step, 2e-3);
        assert_eq!(cfg.tol, 1e-11);
        assert_eq!(cfg.max_iter, 200);
        assert_eq!(cfg.newton_tol, 1e-13);
        assert_eq!(cfg.samples, 20_001);
        assert_eq!(cfg.trials, 64);
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.directory, PathBuf::from("out/example"));
        assert!(cfg.formats.csv && cfg.formats.json);
        assert_eq!(cfg.h.eval(2.0).unwrap(), 4.0);
        let p = cfg.problem();
        assert_eq!(p.n, 3);
        assert_eq!(p.window, 10.0);
    }

    #[test]
    fn rejects_unknown_key_and_section() {
        let bad = EXAMPLE.replace("step = 2e-3", "stepp = 2e-3");
        assert!(matches!(
            parse_config(&bad),
            Err(ConfigError::UnknownKey { key, .. }) if key == "stepp"
        ));
        let bad = EXAMPLE.replace("[numerics]", "[numeric]");
        assert!(matches!(
            parse_config(&bad),
            Err(ConfigError::UnknownSection { name, .. }) if name == "numeric"
        ));
    }

    #[test]
    fn rejects_missing_required_and_duplicates() {
        let bad = EXAMPLE.replace("g = sin(x)/100\n", "");
        assert!(matches!(
            parse_config(&bad),
            Err(ConfigError::MissingKey { key, .. }) if key == "g"
        ));
        let bad = format!("{EXAMPLE}\n[problem]\nn = 4\n");
        assert!(matches!(
            parse_config(&bad),
            Err(ConfigError::DuplicateKey { key, .. }) if key == "n"
        ));
    }

    #[test]
    fn rejects_out_of_range_values() {
        let bad = EXAMPLE.replace("n = 3", "n = 0");
        assert!(matches!(parse_config(&bad), Err(ConfigError::OutOfRange { .. })));
        let bad = EXAMPLE.replace("n = 3", "n = 25");
        assert!(matches!(parse_config(&bad), Err(ConfigError::OutOfRange { .. })));
        let bad = EXAMPLE.replace("step = 2e-3", "step = -1");
        assert!(matches!(parse_config(&bad), Err(ConfigError::OutOfRange { .. })));
        let bad = EXAMPLE.replace("window = 10", "window = 0");
        assert!(matches!(parse_config(&bad), Err(ConfigError::OutOfRange { .. })));
    }

    #[test]
    fn rejects_bad_expression_with_key_context() {
        let bad = EXAMPLE.replace("h = 2*x", "h = 2*y");
        match parse_config(&bad) {
            Err(ConfigError::Expr { key, .. }) => assert_eq!(key, "h"),
            other => panic!("expected Expr error, got {other:?}"),
        }
    }

    #[test]
    fn comments_and_formats_list() {
        let text = format!("{EXAMPLE}formats = json # no csv today\n");
        let cfg = parse_config(&text).unwrap();
        assert!(cfg.formats.json && !cfg.formats.csv);
        let bad = format!("{EXAMPLE}formats = yaml\n");
        assert!(matches!(parse_config(&bad), Err(ConfigError::BadValue { .. })));
    }

    #[test]
    fn key_outside_section_and_malformed_lines() {
        assert!(matches!(
            parse_config("h = x\n"),
            Err(ConfigError::KeyOutsideSection { .. })
        ));
        assert!(matches!(
            parse_config("[problem\nh = x\n"),
            Err(ConfigError::Malformed { line: 1, .. })
        ));
        assert!(matches!(
            parse_config("[problem]\njust words\n"),
            Err(ConfigError::Malformed { line: 2, .. })
        ));
    }
}
