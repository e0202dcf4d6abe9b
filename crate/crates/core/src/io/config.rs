//! Plain-text `key = value` configuration.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::inversion::{FilterKind, RampFilterSpec};

#[derive(Clone, Copy)]
enum Kind {
    Text,
    PositiveInt,
    Unsigned,
    PositiveReal,
    Real,
    UnitInterval,
}

const SCHEMA: &[(&str, Kind)] = &[
    ("grid.n", Kind::PositiveInt),
    ("grid.length", Kind::PositiveReal),
    ("phantom.kind", Kind::Text),
    ("phantom.path", Kind::Text),
    ("phantom.radius", Kind::PositiveReal),
    ("wave.l_over_lambda", Kind::PositiveReal),
    ("angles.count", Kind::PositiveInt),
    ("angles.step_deg", Kind::PositiveReal),
    ("filter.kind", Kind::Text),
    ("filter.cutoff", Kind::UnitInterval),
    ("recon.part", Kind::Text),
    ("seed", Kind::Unsigned),
    ("threads", Kind::PositiveInt),
    ("paths.phantom", Kind::Text),
    ("paths.sino", Kind::Text),
    ("paths.truth", Kind::Text),
    ("paths.out", Kind::Text),
    ("paths.report", Kind::Text),
    ("paths.pgm", Kind::Text),
    ("paths.envelope", Kind::Text),
    ("adjoint.n", Kind::PositiveInt),
    ("adjoint.angles", Kind::PositiveInt),
    ("riccati.profile", Kind::Text),
    ("riccati.step", Kind::PositiveReal),
    ("riccati.tau_end", Kind::PositiveReal),
    ("xray.n", Kind::PositiveInt),
    ("xray.offset", Kind::Real),
    ("xray.angle_deg", Kind::Real),
    ("westervelt.n_x", Kind::PositiveInt),
    ("westervelt.eps", Kind::PositiveReal),
];

/// Keys accepted by [`parse_config`].
pub fn known_keys() -> impl Iterator<Item = &'static str> {
    SCHEMA.iter().map(|(k, _)| *k)
}

/// Validated key-value configuration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ToolConfig {
    entries: BTreeMap<String, String>,
}

fn out_of_range(key: &str, reason: impl Into<String>) -> Error {
    Error::ValueOutOfRange {
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn check_value(key: &str, kind: Kind, value: &str) -> Result<()> {
    match kind {
        Kind::Text => {
            if value.is_empty() {
                return Err(out_of_range(key, "empty value"));
            }
        }
        Kind::PositiveInt => match value.parse::<u64>() {
            Ok(v) if v > 0 => {}
            _ => {
                return Err(out_of_range(
                    key,
                    format!("`{value}` is not a positive integer"),
                ))
            }
        },
        Kind::Unsigned => {
            value
                .parse::<u64>()
                .map_err(|_| out_of_range(key, format!("`{value}` is not an unsigned integer")))?;
        }
        Kind::PositiveReal | Kind::Real | Kind::UnitInterval => {
            let v: f64 = value
                .parse()
                .map_err(|_| out_of_range(key, format!("`{value}` is not a number")))?;
            if !v.is_finite() {
                return Err(out_of_range(key, "not finite"));
            }
            match kind {
                Kind::PositiveReal if v <= 0.0 => return Err(out_of_range(key, "must be > 0")),
                Kind::UnitInterval if !(v > 0.0 && v <= 1.0) => {
                    return Err(out_of_range(key, "must lie in (0, 1]"))
                }
                _ => {}
            }
        }
    }
    match key {
        "filter.kind" => {
            value.parse::<FilterKind>()?;
        }
        "recon.part" if value != "real" && value != "modulus" => {
            return Err(out_of_range(key, "expected `real` or `modulus`"));
        }
        "phantom.kind" if !["shepp-logan", "disk", "raster"].contains(&value) => {
            return Err(out_of_range(key, "expected shepp-logan, disk or raster"));
        }
        _ => {}
    }
    Ok(())
}

/// Parses `key = value` lines; `#` starts a comment. Later duplicates win.
pub fn parse_config(text: &str) -> Result<ToolConfig> {
    let mut entries = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(Error::MalformedLine {
                line,
                text: raw.to_string(),
            });
        };
        let key = key.trim();
        let value = value.trim();
        let Some(&(_, kind)) = SCHEMA.iter().find(|(k, _)| *k == key) else {
            return Err(Error::UnknownKey {
                line,
                key: key.to_string(),
            });
        };
        check_value(key, kind, value)?;
        entries.insert(key.to_string(), value.to_string());
    }
    Ok(ToolConfig { entries })
}

pub fn read_config(path: impl AsRef<Path>) -> Result<ToolConfig> {
    let text = fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
    parse_config(&text)
}

impl ToolConfig {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.get(key).and_then(|v| v.parse().ok())
    }

    pub fn get_usize(&self, key: &str) -> Option<usize> {
        self.get(key).and_then(|v| v.parse().ok())
    }

    pub fn get_u64(&self, key: &str) -> Option<u64> {
        self.get(key).and_then(|v| v.parse().ok())
    }

    /// Sets a value after validating it; used to merge command-line flags.
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        let value = value.into();
        let Some(&(_, kind)) = SCHEMA.iter().find(|(k, _)| *k == key) else {
            return Err(Error::UnknownKey {
                line: 0,
                key: key.to_string(),
            });
        };
        check_value(key, kind, &value)?;
        self.entries.insert(key.to_string(), value);
        Ok(())
    }

    /// Ramp filter from `filter.kind` / `filter.cutoff` (defaults: ramlak, 1.0).
    pub fn filter_spec(&self) -> Result<RampFilterSpec> {
        let kind = match self.get("filter.kind") {
            Some(k) => k.parse()?,
            None => FilterKind::RamLak,
        };
        RampFilterSpec::new(kind, self.get_f64("filter.cutoff").unwrap_or(1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_kind_line_defaults_cutoff() {
        let cfg = parse_config("filter.kind = ramlak\n").unwrap();
        let spec = cfg.filter_spec().unwrap();
        assert_eq!(spec.kind(), FilterKind::RamLak);
        assert_eq!(spec.cutoff_fraction(), 1.0);
    }

    #[test]
    fn comments_and_blank_lines() {
        let cfg =
            parse_config("# header\n\ngrid.n = 128   # nodes\nwave.l_over_lambda=1.5e2\n").unwrap();
        assert_eq!(cfg.get_usize("grid.n"), Some(128));
        assert_eq!(cfg.get_f64("wave.l_over_lambda"), Some(150.0));
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = parse_config("grid.n = 4\n\nbogus.key = 1\n").unwrap_err();
        assert!(matches!(err, Error::UnknownKey { line: 3, ref key } if key == "bogus.key"));
    }

    #[test]
    fn out_of_range_values() {
        for text in [
            "filter.cutoff = 0",
            "filter.cutoff = 1.5",
            "grid.n = -3",
            "grid.n = 0",
            "wave.l_over_lambda = nan",
            "filter.kind = shepp",
            "angles.step_deg = 1,5",
        ] {
            assert!(
                matches!(parse_config(text), Err(Error::ValueOutOfRange { .. })),
                "{text}"
            );
        }
        assert!(matches!(
            parse_config("grid.n 4"),
            Err(Error::MalformedLine { line: 1, .. })
        ));
    }
}
