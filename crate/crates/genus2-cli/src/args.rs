//! Complex-literal parsing and layered configuration.
//!
//! Complex numbers on the command line are written as `a+bi` (also `a`,
//! `bi`, `a-bi`, `i`, `-i`). Defaults resolve flag > config file > env >
//! built-in; the config file is plain `key = value` text.

use genus2::{Error, Result};
use num::complex::Complex64;
use std::collections::BTreeMap;
use std::path::Path;

/// Parse an `a+bi` literal.
pub fn parse_complex(text: &str) -> Result<Complex64> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return Err(Error::InvalidInput("empty complex literal".into()));
    }
    let bad = |s: &str| Error::InvalidInput(format!("cannot parse complex literal '{}'", s));
    if !s.ends_with('i') {
        return s.parse::<f64>().map(|re| Complex64::new(re, 0.0)).map_err(|_| bad(text));
    }
    let body = &s[..s.len() - 1];
    // split at the last +/- that is not a leading sign and not an exponent sign
    let bytes = body.as_bytes();
    let mut split = None;
    for i in (1..bytes.len()).rev() {
        let c = bytes[i] as char;
        if (c == '+' || c == '-') && !matches!(bytes[i - 1] as char, 'e' | 'E') {
            split = Some(i);
            break;
        }
    }
    match split {
        Some(i) => {
            let (re_part, im_part) = (&body[..i], &body[i..]);
            let re = re_part.parse::<f64>().map_err(|_| bad(text))?;
            let im = match im_part {
                "+" => 1.0,
                "-" => -1.0,
                other => other.parse::<f64>().map_err(|_| bad(text))?,
            };
            Ok(Complex64::new(re, im))
        }
        None => {
            let im = match body {
                "" => 1.0,
                "-" => -1.0,
                other => other.parse::<f64>().map_err(|_| bad(text))?,
            };
            Ok(Complex64::new(0.0, im))
        }
    }
}

pub fn format_complex(c: Complex64) -> String {
    if c.im == 0.0 {
        format!("{}", c.re)
    } else if c.im >= 0.0 {
        format!("{}+{}i", c.re, c.im)
    } else {
        format!("{}{}i", c.re, c.im)
    }
}

/// Key = value config file, one pair per line, `#` comments.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("config file {}: {}", path.display(), e)))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidInput(format!("config line {}: expected key = value", lineno + 1))
            })?;
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(ConfigFile { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }
}

/// Resolve a complex-valued setting: flag, then config file.
pub fn resolve_complex(
    flag: Option<&str>,
    cfg: &ConfigFile,
    key: &str,
    default: Option<Complex64>,
) -> Result<Complex64> {
    if let Some(text) = flag {
        return parse_complex(text);
    }
    if let Some(text) = cfg.get(key) {
        return parse_complex(text);
    }
    default.ok_or_else(|| Error::InvalidInput(format!("missing required parameter '{}'", key)))
}

/// Resolve the truncation K: flag, config file, GENUS2_DEFAULT_K, then 12.
pub fn resolve_k(flag: Option<usize>, cfg: &ConfigFile) -> Result<usize> {
    if let Some(k) = flag {
        return Ok(k);
    }
    if let Some(text) = cfg.get("k") {
        return text
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad k in config: '{}'", text)));
    }
    if let Ok(text) = std::env::var("GENUS2_DEFAULT_K") {
        return text
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad GENUS2_DEFAULT_K: '{}'", text)));
    }
    Ok(12)
}

pub fn resolve_usize(flag: Option<usize>, cfg: &ConfigFile, key: &str, default: usize) -> Result<usize> {
    if let Some(v) = flag {
        return Ok(v);
    }
    if let Some(text) = cfg.get(key) {
        return text
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad {} in config: '{}'", key, text)));
    }
    Ok(default)
}
