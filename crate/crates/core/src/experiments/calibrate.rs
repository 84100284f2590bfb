//! Fitting technology parameters to target skew and energy figures.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::linear_fit;
use crate::techmodel::{MitigationConfig, TechProfile, CURRENT_FLOOR};

/// Which searchline parameter absorbs the skew target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkewMechanism {
    /// Solve for the per-row `r·c` product (resistance is adjusted).
    #[serde(alias = "rc")]
    SearchlineRc,
    /// Solve for the far-row current loss `ir_gamma`.
    #[serde(alias = "ir")]
    IrDrop,
}

impl SkewMechanism {
    /// IR drop for SOT arrays, whose resistive cells dominate the loss;
    /// searchline RC otherwise.
    pub fn default_for(tech: crate::techmodel::Technology) -> Self {
        match tech {
            crate::techmodel::Technology::Sot => SkewMechanism::IrDrop,
            _ => SkewMechanism::SearchlineRc,
        }
    }
}

impl std::str::FromStr for SkewMechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rc" | "searchline_rc" => Ok(SkewMechanism::SearchlineRc),
            "ir" | "ir_drop" => Ok(SkewMechanism::IrDrop),
            other => Err(Error::config(
                "calibrate.mechanism",
                format!("unknown skew mechanism `{other}` (rc, ir)"),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkewCalibration {
    pub mechanism: SkewMechanism,
    /// Fitted `r_sl_row·c_sl_row` in seconds, or `ir_gamma`.
    pub parameter: f64,
    pub target_percent: f64,
    pub achieved_percent: f64,
    pub profile: TechProfile,
}

/// Solves for the one free parameter of `mechanism` so that the baseline
/// skew at `hdist` mismatches over `rows` rows equals `target_percent`,
/// holding every other parameter of `profile` fixed.
pub fn calibrate_skew(
    profile: &TechProfile,
    rows: usize,
    cols: usize,
    target_percent: f64,
    hdist: usize,
    mechanism: SkewMechanism,
) -> Result<SkewCalibration> {
    if !(target_percent >= 0.0) || !target_percent.is_finite() {
        return Err(Error::Precondition(
            "skew target must be finite and >= 0".into(),
        ));
    }
    if rows < 2 || hdist == 0 || hdist > cols {
        return Err(Error::Precondition(format!(
            "skew calibration needs rows >= 2 and 1 <= hdist <= cols, got rows={rows}, hdist={hdist}"
        )));
    }
    let base = MitigationConfig::baseline();
    let far = rows - 1;
    let t_h = profile.ideal_discharge_delay(cols, hdist);
    // Elmore arrival at the far row per unit r·c.
    let arrival_per_rc = 0.5 * (far * (far + 1)) as f64;
    let excess = target_percent / 100.0 + 1.0;

    let mut fitted = profile.clone();
    let parameter = match mechanism {
        SkewMechanism::SearchlineRc => {
            if profile.c_sl_row <= 0.0 {
                return Err(Error::InvalidProfile {
                    field: "c_sl_row",
                    message: "must be positive to calibrate searchline RC".into(),
                });
            }
            let ir_term = 1.0 / profile.ir_current_factor(&base, far);
            let rc = (excess - ir_term) * t_h / arrival_per_rc;
            if rc < -1e-15 * t_h {
                return Err(Error::Precondition(format!(
                    "IR drop alone already exceeds {target_percent}% skew"
                )));
            }
            let rc = rc.max(0.0);
            fitted.r_sl_row = rc / profile.c_sl_row;
            rc
        }
        SkewMechanism::IrDrop => {
            let rc_term = profile.searchline_arrival(&base, far) / t_h;
            let inv_factor = excess - rc_term;
            if inv_factor < 1.0 - 1e-12 {
                return Err(Error::Precondition(format!(
                    "searchline RC alone already exceeds {target_percent}% skew"
                )));
            }
            let factor = 1.0 / inv_factor.max(1.0);
            if factor < CURRENT_FLOOR {
                return Err(Error::Precondition(format!(
                    "{target_percent}% skew needs less than the minimum cell current"
                )));
            }
            let ref_span = (profile.ir_ref_rows.max(2) - 1) as f64;
            let gamma = (1.0 - factor) * ref_span / far as f64;
            if gamma >= 1.0 {
                return Err(Error::Precondition(format!(
                    "{target_percent}% skew over {rows} rows needs ir_gamma >= 1"
                )));
            }
            fitted.ir_gamma = gamma;
            gamma
        }
    };
    let achieved_percent = fitted.skew_percent(rows, cols, &base, hdist)?;
    Ok(SkewCalibration {
        mechanism,
        parameter,
        target_percent,
        achieved_percent,
        profile: fitted,
    })
}

/// Linear energy-per-search model in the row count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyFit {
    pub eps_intercept: f64,
    pub eps_slope: f64,
    /// `(fit - measured) / measured` per input point.
    pub relative_residuals: Vec<f64>,
    pub max_relative_residual: f64,
    /// The unconstrained fit had a negative intercept and was refit through
    /// the origin.
    pub intercept_pinned: bool,
}

/// Least-squares fit of `(rows, eps_pj)` points. A negative intercept is
/// unphysical, so such data are refit with the intercept held at zero.
pub fn calibrate_energy(points: &[(f64, f64)]) -> Result<EnergyFit> {
    if points.len() < 2 {
        return Err(Error::Precondition(
            "energy fit needs at least two points".into(),
        ));
    }
    if points.iter().any(|&(_, y)| y == 0.0) {
        return Err(Error::Precondition("energy points must be non-zero".into()));
    }
    let fit = linear_fit(points)
        .ok_or_else(|| Error::Precondition("energy fit needs two distinct row counts".into()))?;
    let (intercept, slope, pinned) = if fit.intercept < 0.0 {
        let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
        let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
        (0.0, sxy / sxx, true)
    } else {
        (fit.intercept, fit.slope, false)
    };
    let relative_residuals: Vec<f64> = points
        .iter()
        .map(|&(x, y)| (intercept + slope * x - y) / y)
        .collect();
    let max_relative_residual = relative_residuals
        .iter()
        .fold(0.0, |m: f64, r| m.max(r.abs()));
    Ok(EnergyFit {
        eps_intercept: intercept,
        eps_slope: slope,
        relative_residuals,
        max_relative_residual,
        intercept_pinned: pinned,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_target_gives_zero_parameter() {
        let p = TechProfile::builtin("fefet")
            .unwrap()
            .without_interconnect();
        let p = TechProfile {
            c_sl_row: 1e-16,
            ..p
        };
        for m in [SkewMechanism::SearchlineRc, SkewMechanism::IrDrop] {
            let c = calibrate_skew(&p, 256, 128, 0.0, 40, m).unwrap();
            assert_eq!(c.parameter, 0.0);
        }
    }

    #[test]
    fn round_trip_hits_target() {
        for name in ["sot", "sram_0v5", "fefet"] {
            let p = TechProfile::builtin(name).unwrap();
            for target in [50.0, 250.0, 500.0] {
                let c = calibrate_skew(&p, 128, 128, target, 30, SkewMechanism::SearchlineRc);
                if let Ok(c) = c {
                    assert_relative_eq!(c.achieved_percent, target, max_relative = 1e-3);
                }
            }
        }
    }

    #[test]
    fn pure_ir_gamma_closed_form() {
        let p = TechProfile::builtin("sot").unwrap().without_interconnect();
        let c = calibrate_skew(&p, 256, 128, 150.0, 40, SkewMechanism::IrDrop).unwrap();
        assert_relative_eq!(c.parameter, 150.0 / 250.0, max_relative = 1e-12);
        assert_relative_eq!(c.achieved_percent, 150.0, max_relative = 1e-9);
    }

    #[test]
    fn builtin_sot_reproduces_from_its_targets() {
        let p = TechProfile::builtin("sot").unwrap();
        let bare = p.without_interconnect();
        let bare = TechProfile {
            c_sl_row: p.c_sl_row,
            ..bare
        };
        let rc = calibrate_skew(&bare, 256, 128, 160.0, 40, SkewMechanism::SearchlineRc).unwrap();
        let ir = calibrate_skew(&rc.profile, 256, 128, 200.0, 40, SkewMechanism::IrDrop).unwrap();
        assert_relative_eq!(ir.profile.r_sl_row, p.r_sl_row, max_relative = 1e-6);
        assert_relative_eq!(ir.profile.ir_gamma, p.ir_gamma, max_relative = 1e-6);
    }

    #[test]
    fn ir_exceeding_target_is_rejected() {
        let p = TechProfile::builtin("sot").unwrap();
        assert!(calibrate_skew(&p, 256, 128, 10.0, 40, SkewMechanism::SearchlineRc).is_err());
        assert!(calibrate_skew(&p, 256, 128, 1e9, 40, SkewMechanism::IrDrop).is_err());
    }

    #[test]
    fn two_points_interpolate_exactly() {
        let f = calibrate_energy(&[(64.0, 2.0), (128.0, 3.0)]).unwrap();
        assert_relative_eq!(f.eps_intercept, 1.0, max_relative = 1e-12);
        assert!(f.max_relative_residual < 1e-12);
        assert!(!f.intercept_pinned);
        assert!(calibrate_energy(&[(64.0, 2.0)]).is_err());
    }

    #[test]
    fn negative_intercept_is_pinned() {
        let f = calibrate_energy(&[(64.0, 0.8), (128.0, 1.7), (256.0, 3.33)]).unwrap();
        assert!(f.intercept_pinned);
        assert_eq!(f.eps_intercept, 0.0);
        assert!(f.eps_slope > 0.0);
    }
}
