use serde::{Deserialize, Serialize};

use crate::env::DerivedParams;
use crate::error::{Error, Result};

/// Which time scale a horizon is measured in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleSelector {
    #[default]
    C,
    Cbar,
    Raw,
}

impl std::str::FromStr for ScaleSelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "c" => Ok(ScaleSelector::C),
            "cbar" => Ok(ScaleSelector::Cbar),
            "raw" => Ok(ScaleSelector::Raw),
            other => Err(Error::Config(format!(
                "unknown scale `{other}`, expected c, cbar or raw"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeScales {
    /// `ln c_N^L`.
    pub c_n_log: f64,
    /// `ln c̄_N`.
    pub bar_c_n_log: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub theta: f64,
    #[serde(rename = "beta_FT")]
    pub beta_ft: f64,
}

impl TimeScales {
    pub fn log_of(&self, selector: ScaleSelector) -> f64 {
        match selector {
            ScaleSelector::C => self.c_n_log,
            ScaleSelector::Cbar => self.bar_c_n_log,
            ScaleSelector::Raw => 0.0,
        }
    }
}

/// Fine-tuning shift `θ = (1-p) L / (2 a^{3/2})`.
pub fn theta_of(d: &DerivedParams, l: f64) -> f64 {
    (1.0 - d.params.p) / (2.0 * d.params.a.powf(1.5)) * l
}

pub fn timescales(d: &DerivedParams, l: f64) -> Result<TimeScales> {
    if !l.is_finite() {
        return Err(Error::InvalidParams(format!("L must be finite, got {l}")));
    }
    if d.params.is_critical() && l >= 0.0 {
        return Err(Error::InvalidParams(format!(
            "a = p requires L < 0, got {l}"
        )));
    }
    let n = d.n() as f64;
    let beta = d.beta();
    let bs = d.beta_star;
    let common = beta * (bs * n - (n.ln() + d.kappa) / (2.0 * bs));
    let theta = theta_of(d, l);
    Ok(TimeScales {
        c_n_log: common - beta * (bs * d.params.a * n + (d.params.a * n).sqrt() * l),
        bar_c_n_log: -(d.n2 as f64) * std::f64::consts::LN_2 + common,
        l,
        theta,
        beta_ft: d.bar_beta_ft - theta / n.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{derive, ModelParams};
    use approx::assert_relative_eq;

    #[test]
    fn slope_in_l() {
        let d = derive(ModelParams::new(16, 0.5, 0.2, 1.4, 0)).unwrap();
        let (a, b) = (timescales(&d, 0.3).unwrap(), timescales(&d, -1.1).unwrap());
        assert_relative_eq!(
            a.c_n_log - b.c_n_log,
            -1.4 * (0.2f64 * 16.0).sqrt() * 1.4,
            max_relative = 1e-12
        );
        assert_eq!(a.bar_c_n_log, b.bar_c_n_log);
    }

    #[test]
    fn theta_value() {
        let d = derive(ModelParams::new(16, 0.5, 0.2, 1.4, 0)).unwrap();
        assert_relative_eq!(
            timescales(&d, 1.0).unwrap().theta,
            2.795_084_971_874_737,
            max_relative = 1e-12
        );
    }

    #[test]
    fn extreme_scale_dominates_below_fine_tuning() {
        for n in [20u32, 30, 40] {
            let base = derive(ModelParams::new(n, 0.5, 0.2, 1.0, 0)).unwrap();
            let d = derive(ModelParams::new(n, 0.5, 0.2, 1.2 * base.bar_beta_ft, 0)).unwrap();
            let s = timescales(&d, 0.0).unwrap();
            assert!(s.bar_c_n_log > s.c_n_log, "N = {n}");
        }
    }

    #[test]
    fn critical_case_needs_negative_l() {
        let d = derive(ModelParams::new(16, 0.5, 0.5, 1.4, 0)).unwrap();
        assert!(timescales(&d, 0.0).is_err());
        assert!(timescales(&d, -0.5).is_ok());
    }

    #[test]
    fn selector_parsing() {
        assert_eq!(
            "cbar".parse::<ScaleSelector>().unwrap(),
            ScaleSelector::Cbar
        );
        assert!("x".parse::<ScaleSelector>().is_err());
    }
}
