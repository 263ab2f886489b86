//! Flat `key = value` configuration files with `[section]` headers.
//!
//! ```text
//! # comment
//! [radar]
//! center_freq_hz = 3e9
//! ```
//!
//! Keys before the first header belong to the unnamed section `""`.
//! Values are raw strings; typed accessors report the offending line.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::metrics::StudyConfig;
use crate::mitigate::MpConfig;
use crate::sigmodel::{GapSpec, Method, RadarParams, Target};
use crate::synth::{ExtendedTarget, GapMode, InterferenceSpec, ScenarioConfig, Scene};

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
}

fn valid_name(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.')
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        let mut section = String::new();
        cfg.sections.insert(section.clone(), BTreeMap::new());
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split(['#', ';']).next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(rest) = body.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::ConfigSyntax {
                        line,
                        message: "section header is missing `]`".into(),
                    })?
                    .trim();
                if !valid_name(name) {
                    return Err(Error::ConfigSyntax {
                        line,
                        message: format!("invalid section name `{name}`"),
                    });
                }
                section = name.to_ascii_lowercase();
                cfg.sections.entry(section.clone()).or_default();
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| Error::ConfigSyntax {
                line,
                message: format!("expected `key = value`, found `{body}`"),
            })?;
            let key = key.trim().to_ascii_lowercase();
            if !valid_name(&key) {
                return Err(Error::ConfigSyntax {
                    line,
                    message: format!("invalid key `{key}`"),
                });
            }
            let map = cfg.sections.get_mut(&section).expect("section inserted");
            if let Some(prev) = map.get(&key) {
                return Err(Error::ConfigSyntax {
                    line,
                    message: format!("duplicate key `{key}` (first set on line {})", prev.line),
                });
            }
            map.insert(
                key,
                Entry {
                    value: value.trim().to_string(),
                    line,
                },
            );
        }
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::ConfigSyntax {
            line: 0,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.sections.get(section).is_some_and(|m| !m.is_empty())
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section)?.get(key).map(|e| e.value.as_str())
    }

    fn field_err(&self, section: &str, key: &str, message: impl std::fmt::Display) -> Error {
        let line = self
            .sections
            .get(section)
            .and_then(|m| m.get(key))
            .map_or(0, |e| e.line);
        Error::ConfigField {
            section: section.into(),
            key: key.into(),
            message: format!("line {line}: {message}"),
        }
    }

    fn parse_value<T: std::str::FromStr>(&self, section: &str, key: &str, raw: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        raw.parse::<T>()
            .map_err(|e| self.field_err(section, key, format!("`{raw}`: {e}")))
    }

    pub fn opt<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(section, key)
            .map(|raw| self.parse_value(section, key, raw))
            .transpose()
    }

    pub fn req<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.opt(section, key)?.ok_or_else(|| Error::ConfigMissing {
            section: section.into(),
            key: key.into(),
        })
    }

    /// Comma-separated list.
    pub fn opt_list<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        let Some(raw) = self.get(section, key) else {
            return Ok(None);
        };
        raw.split(',')
            .map(|item| self.parse_value(section, key, item.trim()))
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    pub fn req_list<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.opt_list(section, key)?.ok_or_else(|| Error::ConfigMissing {
            section: section.into(),
            key: key.into(),
        })
    }

    fn opt_bool(&self, section: &str, key: &str) -> Result<Option<bool>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(raw) => match raw.to_ascii_lowercase().as_str() {
                "true" | "yes" | "on" | "1" => Ok(Some(true)),
                "false" | "no" | "off" | "0" => Ok(Some(false)),
                _ => Err(self.field_err(section, key, format!("`{raw}` is not a boolean"))),
            },
        }
    }

    pub fn radar(&self) -> Result<RadarParams> {
        let s = "radar";
        let bandwidth: f64 = self.req(s, "bandwidth_hz")?;
        let f0 = match (
            self.opt::<f64>(s, "start_freq_hz")?,
            self.opt::<f64>(s, "center_freq_hz")?,
        ) {
            (Some(_), Some(_)) => {
                return Err(self.field_err(s, "start_freq_hz", "give start_freq_hz or center_freq_hz, not both"))
            }
            (Some(f), None) => f,
            (None, Some(fc)) => fc - 0.5 * bandwidth,
            (None, None) => {
                return Err(Error::ConfigMissing {
                    section: s.into(),
                    key: "center_freq_hz".into(),
                })
            }
        };
        RadarParams::new(
            f0,
            bandwidth,
            self.req(s, "sweep_time_s")?,
            self.req(s, "sample_rate_hz")?,
        )
        .map_err(|e| self.field_err(s, "radar", e))
    }

    fn scene(&self) -> Result<Scene> {
        let s = "scene";
        let kind: String = self.req(s, "kind")?;
        match kind.to_ascii_lowercase().as_str() {
            "point" => {
                let ranges: Vec<f64> = self.req_list(s, "ranges_m")?;
                let amps: Vec<f64> = self.req_list(s, "amplitudes")?;
                let phases: Vec<f64> = self
                    .opt_list(s, "phases_rad")?
                    .unwrap_or_else(|| vec![0.0; ranges.len()]);
                let vels: Vec<f64> = self
                    .opt_list(s, "velocities_mps")?
                    .unwrap_or_else(|| vec![0.0; ranges.len()]);
                for (key, len) in [
                    ("amplitudes", amps.len()),
                    ("phases_rad", phases.len()),
                    ("velocities_mps", vels.len()),
                ] {
                    if len != ranges.len() {
                        return Err(self.field_err(s, key, format!("{len} entries for {} ranges", ranges.len())));
                    }
                }
                Ok(Scene::Point(
                    (0..ranges.len())
                        .map(|i| {
                            Target::new(ranges[i], Complex64::from_polar(amps[i], phases[i])).with_velocity(vels[i])
                        })
                        .collect(),
                ))
            }
            "extended" => Ok(Scene::Extended(ExtendedTarget {
                n_scatterers: self.req(s, "n_scatterers")?,
                start_m: self.req(s, "start_m")?,
                extent_m: self.req(s, "extent_m")?,
                max_amplitude: self.req(s, "max_amplitude")?,
            })),
            other => Err(self.field_err(s, "kind", format!("unknown scene kind `{other}` (point|extended)"))),
        }
    }

    fn interference(&self) -> Result<Option<InterferenceSpec>> {
        let s = "interference";
        if !self.has_section(s) || self.opt_bool(s, "enabled")? == Some(false) {
            return Ok(None);
        }
        Ok(Some(InterferenceSpec {
            slope_ratio: self.req(s, "slope_ratio")?,
            delay_s: self.req(s, "delay_s")?,
            sir_db: self.req(s, "sir_db")?,
            lowpass_hz: self.opt(s, "lowpass_hz")?,
            sweep_time_s: self.opt(s, "sweep_time_s")?,
            center_freq_hz: self.opt(s, "center_freq_hz")?,
        }))
    }

    fn gap_mode(&self) -> Result<GapMode> {
        let s = "gap";
        let mode: String = self.opt(s, "mode")?.unwrap_or_else(|| "predicted".into());
        match mode.to_ascii_lowercase().as_str() {
            "window" => Ok(GapMode::Window {
                start_s: self.req(s, "start_s")?,
                end_s: self.req(s, "end_s")?,
            }),
            "fraction" => Ok(GapMode::Fraction {
                fraction: self.req(s, "fraction")?,
            }),
            "predicted" => Ok(GapMode::Predicted {
                guard: self.opt(s, "guard")?.unwrap_or(0),
            }),
            other => Err(self.field_err(
                s,
                "mode",
                format!("unknown gap mode `{other}` (window|fraction|predicted)"),
            )),
        }
    }

    pub fn scenario(&self) -> Result<ScenarioConfig> {
        let snr_db = match self.get("noise", "snr_db") {
            Some(v) if v.eq_ignore_ascii_case("inf") => f64::INFINITY,
            _ => self.req("noise", "snr_db")?,
        };
        Ok(ScenarioConfig {
            radar: self.radar()?,
            scene: self.scene()?,
            interference: self.interference()?,
            snr_db,
            seed: self.opt("noise", "seed")?.unwrap_or(0),
            gap: self.gap_mode()?,
        })
    }

    /// `[mp]` settings on top of the defaults.
    pub fn mp(&self) -> Result<MpConfig> {
        let s = "mp";
        let d = MpConfig::default();
        Ok(MpConfig {
            order: self.opt(s, "order")?,
            l: self.opt(s, "l")?,
            sv_threshold: self.opt(s, "sv_threshold")?.unwrap_or(d.sv_threshold),
            max_iter: self.opt(s, "max_iter")?.unwrap_or(d.max_iter),
            clamp_delta: self.opt(s, "clamp_delta")?.unwrap_or(d.clamp_delta),
            max_order: self.opt(s, "max_order")?,
            eps_rel_tol: self.opt(s, "eps_rel_tol")?.unwrap_or(d.eps_rel_tol),
        })
    }

    /// Sweeps per CPI and their spacing, if a `[cpi]` section is present.
    pub fn cpi(&self) -> Result<Option<(usize, Option<f64>)>> {
        if !self.has_section("cpi") {
            return Ok(None);
        }
        Ok(Some((
            self.req("cpi", "n_sweeps")?,
            self.opt("cpi", "sweep_interval_s")?,
        )))
    }

    pub fn study(&self) -> Result<StudyConfig> {
        let s = "study";
        let gap_pct: Vec<f64> = self.req_list(s, "gap_pct")?;
        let methods: Vec<Method> = self
            .opt_list(s, "methods")?
            .unwrap_or_else(|| vec![Method::Mp, Method::Burg, Method::Zeroing]);
        Ok(StudyConfig {
            scenario: self.scenario()?,
            snr_db: self.req_list(s, "snr_db")?,
            gap_fractions: gap_pct.iter().map(|p| p / 100.0).collect(),
            trials: self.req(s, "trials")?,
            seed: self.opt(s, "seed")?.unwrap_or(0),
            methods,
            mp: self.mp()?,
        })
    }
}

/// Parse a `n1:n2` gap argument (inclusive indices).
pub fn parse_gap_arg(s: &str) -> Result<GapSpec> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| Error::param("gap", format!("`{s}` is not of the form n1:n2")))?;
    let n1: usize = a
        .trim()
        .parse()
        .map_err(|e| Error::param("gap", format!("`{a}`: {e}")))?;
    let n2: usize = b
        .trim()
        .parse()
        .map_err(|e| Error::param("gap", format!("`{b}`: {e}")))?;
    if n2 < n1 {
        return Err(Error::param("gap", format!("n2 = {n2} precedes n1 = {n1}")));
    }
    Ok(GapSpec::new(n1, n2))
}

#[cfg(test)]
mod tests {
    use super::*;

    const POINT: &str = "
        # point targets
        [radar]
        center_freq_hz = 3e9
        bandwidth_hz = 40e6
        sweep_time_s = 500e-6
        sample_rate_hz = 12e6

        [scene]
        kind = point
        ranges_m = 2000, 5000, 5100
        amplitudes = 1, 0.2, 0.1

        [interference]
        slope_ratio = -1
        delay_s = -75e-6
        sir_db = -26.0206

        [noise]
        snr_db = 15
        seed = 1

        [gap]
        mode = window
        start_s = 165e-6
        end_s = 265e-6
    ";

    #[test]
    fn point_matches_builtin() {
        let cfg = Config::parse(POINT).unwrap().scenario().unwrap();
        let builtin = ScenarioConfig::point_target();
        assert_eq!(cfg.radar, builtin.radar);
        assert_eq!(cfg.scene, builtin.scene);
        assert_eq!(cfg.interference, builtin.interference);
        assert_eq!(cfg.gap, builtin.gap);
        assert_eq!(cfg, builtin);
    }

    #[test]
    fn syntax_errors_name_lines() {
        assert_eq!(
            Config::parse("[radar]\nbandwidth_hz 40e6\n").unwrap_err(),
            Error::ConfigSyntax {
                line: 2,
                message: "expected `key = value`, found `bandwidth_hz 40e6`".into()
            }
        );
        assert!(matches!(
            Config::parse("[radar\n"),
            Err(Error::ConfigSyntax { line: 1, .. })
        ));
        assert!(matches!(
            Config::parse("a = 1\na = 2\n"),
            Err(Error::ConfigSyntax { line: 2, .. })
        ));
        assert!(matches!(
            Config::parse("= 2\n"),
            Err(Error::ConfigSyntax { line: 1, .. })
        ));
    }

    #[test]
    fn missing_and_bad_fields() {
        let text = POINT.replace("bandwidth_hz = 40e6", "");
        assert_eq!(
            Config::parse(&text).unwrap().scenario().unwrap_err(),
            Error::ConfigMissing {
                section: "radar".into(),
                key: "bandwidth_hz".into()
            }
        );
        let text = POINT.replace("snr_db = 15", "snr_db = loud");
        let err = Config::parse(&text).unwrap().scenario().unwrap_err();
        assert!(
            matches!(err, Error::ConfigField { ref section, ref key, .. } if section == "noise" && key == "snr_db"),
            "{err}"
        );
        let text = POINT.replace("amplitudes = 1, 0.2, 0.1", "amplitudes = 1, 0.2");
        assert!(matches!(
            Config::parse(&text).unwrap().scenario(),
            Err(Error::ConfigField { .. })
        ));
    }

    #[test]
    fn optional_sections() {
        let text = POINT.replace("slope_ratio = -1", "enabled = false\nslope_ratio = -1");
        assert_eq!(Config::parse(&text).unwrap().scenario().unwrap().interference, None);
        let text = POINT.replace("snr_db = 15", "snr_db = inf");
        assert_eq!(Config::parse(&text).unwrap().scenario().unwrap().snr_db, f64::INFINITY);
        let mp = Config::parse("[mp]\norder = 4\nL = 100\n").unwrap().mp().unwrap();
        assert_eq!((mp.order, mp.l), (Some(4), Some(100)));
    }

    #[test]
    fn gap_args() {
        assert_eq!(parse_gap_arg("1980:3179").unwrap(), GapSpec::new(1980, 3179));
        assert!(parse_gap_arg("5:4").is_err());
        assert!(parse_gap_arg("5").is_err());
        assert!(parse_gap_arg("a:4").is_err());
    }
}
