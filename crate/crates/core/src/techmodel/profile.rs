//! Technology profiles and their flat key-value file format.
//!
//! A profile file holds one `key = value` pair per line. Values carry an
//! optional SI prefix and unit suffix (`0.15fF`, `0.7uA`, `245ohm`, `0.6ns`,
//! `1.88pJ`); a bare number is read in the field's base unit (V, A, F, ohm,
//! s, pJ). `#` starts a comment.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// CAM cell technology.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Technology {
    Sot,
    Sram,
    Fefet,
}

impl Technology {
    pub fn as_str(self) -> &'static str {
        match self {
            Technology::Sot => "sot",
            Technology::Sram => "sram",
            Technology::Fefet => "fefet",
        }
    }
}

impl fmt::Display for Technology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Technology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sot" => Ok(Technology::Sot),
            "sram" => Ok(Technology::Sram),
            "fefet" => Ok(Technology::Fefet),
            other => Err(Error::InvalidProfile {
                field: "name",
                message: format!("unknown technology `{other}`"),
            }),
        }
    }
}

/// Per-technology physical constants driving the timing, energy and
/// variation models. All quantities are SI except energies, which are pJ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TechProfile {
    pub name: Technology,
    /// Identifier of the profile, e.g. `sram_0v5`.
    pub label: String,
    pub vdd: f64,
    /// Matchline precharge level.
    pub v_ml: f64,
    /// Sense-amplifier trip point.
    pub v_sa_threshold: f64,
    /// Discharge current of one mismatching cell.
    pub i_sat0: f64,
    /// Matchline capacitance per column.
    pub c_cell: f64,
    /// Fixed matchline load.
    pub c_fixed: f64,
    /// Searchline resistance per row segment.
    pub r_sl_row: f64,
    /// Searchline capacitance per row segment.
    pub c_sl_row: f64,
    /// Fractional discharge-current loss at row `ir_ref_rows - 1`.
    pub ir_gamma: f64,
    /// Row count at which `ir_gamma` is specified. The current loss grows
    /// linearly with row index at a fixed per-row rate.
    pub ir_ref_rows: usize,
    pub t_sa_latch: f64,
    /// Energy per search at zero rows (pJ).
    pub eps_intercept: f64,
    /// Energy per search per row (pJ/row) at `eps_ref_cols` columns.
    pub eps_slope: f64,
    pub eps_ref_cols: usize,
    /// Granularity of the reported search latency.
    pub latency_step: f64,
    /// Default per-cell relative current sigma for Monte Carlo runs.
    pub sigma_isat_rel: f64,
    pub s2x_skew_reduction: f64,
    pub s2x_energy_overhead: f64,
    pub clk_match_gain: f64,
    pub clk_match_energy_overhead: f64,
    /// Skew-calibration provenance: the row-to-row delay increase (percent)
    /// the searchline parameters were fit to.
    pub skew_target_percent: Option<f64>,
    pub skew_target_rows: Option<usize>,
    pub skew_target_hdist: Option<usize>,
}

const BUILTIN_SOT: &str = include_str!("../../profiles/sot.profile");
const BUILTIN_SRAM_0V5: &str = include_str!("../../profiles/sram_0v5.profile");
const BUILTIN_SRAM_0V7: &str = include_str!("../../profiles/sram_0v7.profile");
const BUILTIN_FEFET: &str = include_str!("../../profiles/fefet.profile");

/// Names of the profiles compiled into the crate.
pub const BUILTIN_PROFILES: [&str; 4] = ["sot", "sram_0v5", "sram_0v7", "fefet"];

/// Raw text of a built-in profile.
pub fn builtin_profile_text(name: &str) -> Option<&'static str> {
    match name {
        "sot" => Some(BUILTIN_SOT),
        "sram_0v5" | "sram" => Some(BUILTIN_SRAM_0V5),
        "sram_0v7" => Some(BUILTIN_SRAM_0V7),
        "fefet" => Some(BUILTIN_FEFET),
        _ => None,
    }
}

/// Resolves a built-in name or a profile file path.
pub fn load_profile(source: &str) -> Result<TechProfile> {
    if let Some(text) = builtin_profile_text(source) {
        return TechProfile::parse(text);
    }
    let path = Path::new(source);
    if path.exists() || source.contains('/') || source.contains('.') {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        return TechProfile::parse(&text);
    }
    Err(Error::UnknownProfile(source.to_string()))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Unit {
    Volt,
    Amp,
    Farad,
    Ohm,
    Second,
    PicoJoule,
    Dimensionless,
}

impl Unit {
    fn suffix(self) -> &'static str {
        match self {
            Unit::Volt => "V",
            Unit::Amp => "A",
            Unit::Farad => "F",
            Unit::Ohm => "ohm",
            Unit::Second => "s",
            Unit::PicoJoule => "J",
            Unit::Dimensionless => "",
        }
    }
}

fn si_prefix(c: char) -> Option<f64> {
    Some(match c {
        'a' => 1e-18,
        'f' => 1e-15,
        'p' => 1e-12,
        'n' => 1e-9,
        'u' | 'µ' => 1e-6,
        'm' => 1e-3,
        'k' => 1e3,
        'M' => 1e6,
        'G' => 1e9,
        _ => return None,
    })
}

fn parse_quantity(raw: &str, unit: Unit) -> std::result::Result<f64, String> {
    let raw = raw.trim();
    let split = raw
        .char_indices()
        .find(|&(i, c)| {
            !(c.is_ascii_digit()
                || c == '.'
                || c == '+'
                || c == '-'
                || ((c == 'e' || c == 'E')
                    && raw[i + 1..]
                        .chars()
                        .next()
                        .is_some_and(|n| n.is_ascii_digit() || n == '-' || n == '+')))
        })
        .map_or(raw.len(), |(i, _)| i);
    let (num, suffix) = raw.split_at(split);
    let mut value: f64 = num
        .parse()
        .map_err(|_| format!("cannot parse number from `{raw}`"))?;
    let suffix = suffix.trim();
    if suffix.is_empty() {
        return Ok(value);
    }
    let base = unit.suffix();
    if base.is_empty() {
        return Err(format!("unexpected unit suffix `{suffix}`"));
    }
    let prefix = suffix
        .strip_suffix(base)
        .or_else(|| {
            (unit == Unit::Ohm)
                .then(|| suffix.strip_suffix('Ω'))
                .flatten()
        })
        .ok_or_else(|| format!("expected a value in {base}, found suffix `{suffix}`"))?;
    let mut chars = prefix.chars();
    match (chars.next(), chars.next()) {
        (None, _) => {}
        (Some(c), None) => {
            value *= si_prefix(c).ok_or_else(|| format!("unknown SI prefix `{c}`"))?;
        }
        _ => return Err(format!("unknown SI prefix `{prefix}`")),
    }
    if unit == Unit::PicoJoule {
        value *= 1e12;
    }
    Ok(value)
}

fn format_quantity(value: f64, unit: Unit) -> String {
    match unit {
        Unit::Dimensionless => format!("{value}"),
        Unit::PicoJoule => format!("{value}pJ"),
        _ => {
            let prefixes = [
                (1e9, "G"),
                (1e6, "M"),
                (1e3, "k"),
                (1.0, ""),
                (1e-3, "m"),
                (1e-6, "u"),
                (1e-9, "n"),
                (1e-12, "p"),
                (1e-15, "f"),
                (1e-18, "a"),
            ];
            let magnitude = value.abs();
            let (scale, p) = if magnitude == 0.0 {
                (1.0, "")
            } else {
                *prefixes
                    .iter()
                    .find(|(s, _)| magnitude >= *s * 0.9999999)
                    .unwrap_or(&(1e-18, "a"))
            };
            let mantissa = value / scale;
            let text = format!("{mantissa:.9}");
            let text = text.trim_end_matches('0').trim_end_matches('.');
            format!("{text}{p}{}", unit.suffix())
        }
    }
}

macro_rules! profile_fields {
    ($($key:ident : $unit:ident),* $(,)?) => {
        const REAL_FIELDS: &[(&str, Unit)] = &[$((stringify!($key), Unit::$unit)),*];

        fn real_field_mut<'a>(p: &'a mut Draft, key: &str) -> Option<&'a mut Option<f64>> {
            match key {
                $(stringify!($key) => Some(&mut p.$key),)*
                _ => None,
            }
        }
    };
}

profile_fields! {
    vdd: Volt,
    v_ml: Volt,
    v_sa_threshold: Volt,
    i_sat0: Amp,
    c_cell: Farad,
    c_fixed: Farad,
    r_sl_row: Ohm,
    c_sl_row: Farad,
    ir_gamma: Dimensionless,
    t_sa_latch: Second,
    eps_intercept: PicoJoule,
    eps_slope: PicoJoule,
    latency_step: Second,
    sigma_isat_rel: Dimensionless,
    s2x_skew_reduction: Dimensionless,
    s2x_energy_overhead: Dimensionless,
    clk_match_gain: Dimensionless,
    clk_match_energy_overhead: Dimensionless,
    skew_target_percent: Dimensionless,
}

const COUNT_FIELDS: &[&str] = &[
    "ir_ref_rows",
    "eps_ref_cols",
    "skew_target_rows",
    "skew_target_hdist",
];

#[derive(Default)]
struct Draft {
    name: Option<Technology>,
    label: Option<String>,
    vdd: Option<f64>,
    v_ml: Option<f64>,
    v_sa_threshold: Option<f64>,
    i_sat0: Option<f64>,
    c_cell: Option<f64>,
    c_fixed: Option<f64>,
    r_sl_row: Option<f64>,
    c_sl_row: Option<f64>,
    ir_gamma: Option<f64>,
    t_sa_latch: Option<f64>,
    eps_intercept: Option<f64>,
    eps_slope: Option<f64>,
    latency_step: Option<f64>,
    sigma_isat_rel: Option<f64>,
    s2x_skew_reduction: Option<f64>,
    s2x_energy_overhead: Option<f64>,
    clk_match_gain: Option<f64>,
    clk_match_energy_overhead: Option<f64>,
    skew_target_percent: Option<f64>,
    ir_ref_rows: Option<usize>,
    eps_ref_cols: Option<usize>,
    skew_target_rows: Option<usize>,
    skew_target_hdist: Option<usize>,
}

fn required<T>(value: Option<T>, field: &'static str) -> Result<T> {
    value.ok_or(Error::InvalidProfile {
        field,
        message: "missing".into(),
    })
}

impl TechProfile {
    /// Parses profile text and validates every invariant.
    pub fn parse(text: &str) -> Result<Self> {
        let mut d = Draft::default();
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::ProfileSyntax {
                line: line_no,
                message: format!("expected `key = value`, found `{line}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let syntax = |message: String| Error::ProfileSyntax {
                line: line_no,
                message: format!("`{key}`: {message}"),
            };
            match key {
                "name" => d.name = Some(value.parse()?),
                "label" => d.label = Some(value.to_string()),
                _ if COUNT_FIELDS.contains(&key) => {
                    let v: usize = value
                        .parse()
                        .map_err(|_| syntax(format!("expected a count, found `{value}`")))?;
                    match key {
                        "ir_ref_rows" => d.ir_ref_rows = Some(v),
                        "eps_ref_cols" => d.eps_ref_cols = Some(v),
                        "skew_target_rows" => d.skew_target_rows = Some(v),
                        _ => d.skew_target_hdist = Some(v),
                    }
                }
                _ => {
                    let unit = REAL_FIELDS
                        .iter()
                        .find(|(k, _)| *k == key)
                        .map(|(_, u)| *u)
                        .ok_or_else(|| syntax("unknown key".into()))?;
                    let v = parse_quantity(value, unit).map_err(syntax)?;
                    *real_field_mut(&mut d, key).expect("field table is exhaustive") = Some(v);
                }
            }
        }

        let name = required(d.name, "name")?;
        let profile = TechProfile {
            name,
            label: d.label.unwrap_or_else(|| name.to_string()),
            vdd: required(d.vdd, "vdd")?,
            v_ml: required(d.v_ml, "v_ml")?,
            v_sa_threshold: required(d.v_sa_threshold, "v_sa_threshold")?,
            i_sat0: required(d.i_sat0, "i_sat0")?,
            c_cell: required(d.c_cell, "c_cell")?,
            c_fixed: required(d.c_fixed, "c_fixed")?,
            r_sl_row: d.r_sl_row.unwrap_or(0.0),
            c_sl_row: d.c_sl_row.unwrap_or(0.0),
            ir_gamma: d.ir_gamma.unwrap_or(0.0),
            ir_ref_rows: d.ir_ref_rows.unwrap_or(256),
            t_sa_latch: d.t_sa_latch.unwrap_or(0.0),
            eps_intercept: required(d.eps_intercept, "eps_intercept")?,
            eps_slope: required(d.eps_slope, "eps_slope")?,
            eps_ref_cols: d.eps_ref_cols.unwrap_or(128),
            latency_step: d.latency_step.unwrap_or(0.4e-9),
            sigma_isat_rel: d.sigma_isat_rel.unwrap_or(0.05),
            s2x_skew_reduction: d.s2x_skew_reduction.unwrap_or(1.0),
            s2x_energy_overhead: d.s2x_energy_overhead.unwrap_or(0.0),
            clk_match_gain: d.clk_match_gain.unwrap_or(1.0),
            clk_match_energy_overhead: d.clk_match_energy_overhead.unwrap_or(0.0),
            skew_target_percent: d.skew_target_percent,
            skew_target_rows: d.skew_target_rows,
            skew_target_hdist: d.skew_target_hdist,
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn builtin(name: &str) -> Result<Self> {
        let text = builtin_profile_text(name).ok_or_else(|| Error::UnknownProfile(name.into()))?;
        Self::parse(text)
    }

    /// Checks every profile invariant, naming the first offending field.
    pub fn validate(&self) -> Result<()> {
        fn bad(field: &'static str, message: impl Into<String>) -> Result<()> {
            Err(Error::InvalidProfile {
                field,
                message: message.into(),
            })
        }
        let finite = [
            ("vdd", self.vdd),
            ("v_ml", self.v_ml),
            ("v_sa_threshold", self.v_sa_threshold),
            ("i_sat0", self.i_sat0),
            ("c_cell", self.c_cell),
            ("c_fixed", self.c_fixed),
            ("r_sl_row", self.r_sl_row),
            ("c_sl_row", self.c_sl_row),
            ("ir_gamma", self.ir_gamma),
            ("t_sa_latch", self.t_sa_latch),
            ("eps_intercept", self.eps_intercept),
            ("eps_slope", self.eps_slope),
            ("latency_step", self.latency_step),
            ("sigma_isat_rel", self.sigma_isat_rel),
        ];
        for (field, v) in finite {
            if !v.is_finite() {
                return bad(field, format!("must be finite, got {v}"));
            }
        }
        if self.v_sa_threshold <= 0.0 {
            return bad("v_sa_threshold", "must be positive");
        }
        if self.v_ml <= self.v_sa_threshold {
            return bad(
                "v_ml",
                format!(
                    "precharge level {} V must exceed the sense threshold {} V",
                    self.v_ml, self.v_sa_threshold
                ),
            );
        }
        if self.i_sat0 <= 0.0 {
            return bad("i_sat0", "must be positive");
        }
        if self.c_cell < 0.0 {
            return bad("c_cell", "must be non-negative");
        }
        if self.c_fixed < 0.0 {
            return bad("c_fixed", "must be non-negative");
        }
        if self.c_cell == 0.0 && self.c_fixed == 0.0 {
            return bad("c_fixed", "matchline capacitance would be zero");
        }
        if self.r_sl_row < 0.0 {
            return bad("r_sl_row", "must be non-negative");
        }
        if self.c_sl_row < 0.0 {
            return bad("c_sl_row", "must be non-negative");
        }
        if !(0.0..1.0).contains(&self.ir_gamma) {
            return bad(
                "ir_gamma",
                format!("must lie in [0, 1), got {}", self.ir_gamma),
            );
        }
        if self.ir_ref_rows < 2 {
            return bad("ir_ref_rows", "must be at least 2");
        }
        if self.t_sa_latch < 0.0 {
            return bad("t_sa_latch", "must be non-negative");
        }
        if self.eps_slope < 0.0 {
            return bad("eps_slope", "must be non-negative");
        }
        if self.eps_intercept + self.eps_slope <= 0.0 {
            return bad(
                "eps_intercept",
                "energy per search must be positive for every row count >= 1",
            );
        }
        if self.eps_ref_cols == 0 {
            return bad("eps_ref_cols", "must be positive");
        }
        if self.latency_step <= 0.0 {
            return bad("latency_step", "must be positive");
        }
        if self.sigma_isat_rel < 0.0 {
            return bad("sigma_isat_rel", "must be non-negative");
        }
        if !(self.s2x_skew_reduction >= 1.0) {
            return bad("s2x_skew_reduction", "must be >= 1");
        }
        if !(self.s2x_energy_overhead >= 0.0) {
            return bad("s2x_energy_overhead", "must be non-negative");
        }
        if !(0.0..=2.0).contains(&self.clk_match_gain) {
            return bad("clk_match_gain", "must lie in [0, 2]");
        }
        if !(self.clk_match_energy_overhead >= 0.0) {
            return bad("clk_match_energy_overhead", "must be non-negative");
        }
        Ok(())
    }

    /// Serializes the profile back into the key-value file format.
    pub fn to_profile_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "name = {}", self.name);
        let _ = writeln!(out, "label = {}", self.label);
        let reals = [
            self.vdd,
            self.v_ml,
            self.v_sa_threshold,
            self.i_sat0,
            self.c_cell,
            self.c_fixed,
            self.r_sl_row,
            self.c_sl_row,
            self.ir_gamma,
            self.t_sa_latch,
            self.eps_intercept,
            self.eps_slope,
            self.latency_step,
            self.sigma_isat_rel,
            self.s2x_skew_reduction,
            self.s2x_energy_overhead,
            self.clk_match_gain,
            self.clk_match_energy_overhead,
        ];
        for ((key, unit), value) in REAL_FIELDS.iter().zip(reals) {
            let _ = writeln!(out, "{key} = {}", format_quantity(value, *unit));
        }
        let _ = writeln!(out, "ir_ref_rows = {}", self.ir_ref_rows);
        let _ = writeln!(out, "eps_ref_cols = {}", self.eps_ref_cols);
        if let Some(p) = self.skew_target_percent {
            let _ = writeln!(out, "skew_target_percent = {p}");
        }
        if let Some(r) = self.skew_target_rows {
            let _ = writeln!(out, "skew_target_rows = {r}");
        }
        if let Some(h) = self.skew_target_hdist {
            let _ = writeln!(out, "skew_target_hdist = {h}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "
        name = sram
        vdd = 0.5V
        v_ml = 0.5V
        v_sa_threshold = 250mV
        i_sat0 = 1uA
        c_cell = 0.2fF
        c_fixed = 1fF
        eps_intercept = 0.1pJ
        eps_slope = 0.01pJ
    ";

    #[test]
    fn quantities_accept_prefixes() {
        assert!((parse_quantity("0.15fF", Unit::Farad).unwrap() - 0.15e-15).abs() < 1e-30);
        assert!((parse_quantity("245ohm", Unit::Ohm).unwrap() - 245.0).abs() < 1e-12);
        assert!((parse_quantity("2kΩ", Unit::Ohm).unwrap() - 2000.0).abs() < 1e-9);
        assert!((parse_quantity("1.88pJ", Unit::PicoJoule).unwrap() - 1.88).abs() < 1e-12);
        assert!((parse_quantity("1e-9", Unit::Second).unwrap() - 1e-9).abs() < 1e-24);
        assert!((parse_quantity("0.6ns", Unit::Second).unwrap() - 0.6e-9).abs() < 1e-24);
        assert!(parse_quantity("3nA", Unit::Volt).is_err());
        assert!(parse_quantity("0.2x", Unit::Dimensionless).is_err());
    }

    #[test]
    fn minimal_profile_gets_defaults() {
        let p = TechProfile::parse(MINIMAL).unwrap();
        assert_eq!(p.name, Technology::Sram);
        assert_eq!(p.label, "sram");
        assert_eq!(p.eps_ref_cols, 128);
        assert_eq!(p.ir_gamma, 0.0);
        assert!((p.latency_step - 0.4e-9).abs() < 1e-21);
    }

    #[test]
    fn inverted_voltages_name_v_ml() {
        let text = MINIMAL.replace("v_ml = 0.5V", "v_ml = 0.2V");
        match TechProfile::parse(&text) {
            Err(Error::InvalidProfile { field, .. }) => assert_eq!(field, "v_ml"),
            other => panic!("expected v_ml error, got {other:?}"),
        }
    }

    #[test]
    fn missing_field_is_reported() {
        let text = MINIMAL.replace("i_sat0 = 1uA", "");
        match TechProfile::parse(&text) {
            Err(Error::InvalidProfile { field, .. }) => assert_eq!(field, "i_sat0"),
            other => panic!("expected i_sat0 error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_a_syntax_error() {
        let text = format!("{MINIMAL}\nbogus = 1");
        assert!(matches!(
            TechProfile::parse(&text),
            Err(Error::ProfileSyntax { .. })
        ));
    }

    #[test]
    fn ir_gamma_must_be_below_one() {
        let text = format!("{MINIMAL}\nir_gamma = 1.0");
        assert!(matches!(
            TechProfile::parse(&text),
            Err(Error::InvalidProfile {
                field: "ir_gamma",
                ..
            })
        ));
    }

    #[test]
    fn builtins_parse_and_dump_round_trips() {
        for name in BUILTIN_PROFILES {
            let p = TechProfile::builtin(name).unwrap();
            assert_eq!(p.label, name);
            let again = TechProfile::parse(&p.to_profile_text()).unwrap();
            for (a, b) in [
                (p.i_sat0, again.i_sat0),
                (p.c_cell, again.c_cell),
                (p.r_sl_row, again.r_sl_row),
                (p.eps_slope, again.eps_slope),
                (p.t_sa_latch, again.t_sa_latch),
            ] {
                assert!((a - b).abs() <= 1e-9 * a.abs(), "{name}: {a} vs {b}");
            }
            assert_eq!(p.ir_gamma, again.ir_gamma);
        }
    }

    #[test]
    fn load_profile_reads_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("custom.profile");
        std::fs::write(&path, MINIMAL).unwrap();
        let p = load_profile(path.to_str().unwrap()).unwrap();
        assert_eq!(p.name, Technology::Sram);
        assert!(matches!(
            load_profile("no_such_profile"),
            Err(Error::UnknownProfile(_))
        ));
        assert!(matches!(
            load_profile("/does/not/exist.profile"),
            Err(Error::Io { .. })
        ));
    }
}
