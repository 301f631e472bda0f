//! Standard tapped-delay-line presets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Tap;
use crate::{Error, Result};

const PRESET_TABLES: &str = include_str!("../../data/tdl_presets.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TdlFamily {
    Tdla,
    Tdlb,
    Tdlc,
}

impl TdlFamily {
    fn section(self) -> &'static str {
        match self {
            TdlFamily::Tdla => "tdla",
            TdlFamily::Tdlb => "tdlb",
            TdlFamily::Tdlc => "tdlc",
        }
    }

    /// Normalized (delay, power dB) table for this family.
    pub fn normalized_table(self) -> Vec<(f64, f64)> {
        let header = format!("[{}]", self.section());
        PRESET_TABLES
            .lines()
            .map(str::trim)
            .skip_while(|l| *l != header)
            .skip(1)
            .take_while(|l| !l.starts_with('['))
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| {
                let mut it = l.split_whitespace().map(|v| v.parse::<f64>().expect("preset table is numeric"));
                (it.next().unwrap(), it.next().unwrap())
            })
            .collect()
    }
}

/// A preset name such as `tdla30`: a family plus an optional default delay spread in ns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdlPreset {
    pub family: TdlFamily,
    pub default_delay_spread_ns: Option<f64>,
}

impl FromStr for TdlPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let family = [TdlFamily::Tdla, TdlFamily::Tdlb, TdlFamily::Tdlc]
            .into_iter()
            .find(|f| lower.starts_with(f.section()))
            .ok_or_else(|| Error::invalid("tdl preset", format!("unknown preset {s:?}")))?;
        let suffix = &lower[family.section().len()..];
        let default_delay_spread_ns = if suffix.is_empty() {
            None
        } else {
            Some(
                suffix
                    .parse::<f64>()
                    .map_err(|_| Error::invalid("tdl preset", format!("unknown preset {s:?}")))?,
            )
        };
        Ok(Self {
            family,
            default_delay_spread_ns,
        })
    }
}

impl fmt::Display for TdlPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.family.section())?;
        if let Some(ds) = self.default_delay_spread_ns {
            write!(f, "{ds}")?;
        }
        Ok(())
    }
}

/// Scales a normalized table by `delay_spread_ns`. Dopplers are left at 0 for the caller to set.
pub fn scale_table(normalized: &[(f64, f64)], delay_spread_ns: f64) -> Result<Vec<Tap>> {
    if !(delay_spread_ns > 0.0 && delay_spread_ns.is_finite()) {
        return Err(Error::invalid(
            "delay spread",
            format!("must be positive, got {delay_spread_ns} ns"),
        ));
    }
    if normalized.is_empty() {
        return Err(Error::Empty("normalized tap table"));
    }
    normalized
        .iter()
        .map(|&(d, p)| Tap::new(d * delay_spread_ns, p, 0.0))
        .collect()
}

/// Taps of a named preset. `delay_spread_ns` overrides the spread encoded in the name.
pub fn load_tdl_preset(preset: TdlPreset, delay_spread_ns: Option<f64>) -> Result<Vec<Tap>> {
    let ds = delay_spread_ns
        .or(preset.default_delay_spread_ns)
        .ok_or_else(|| Error::invalid("delay spread", format!("preset {preset} needs an explicit delay spread")))?;
    scale_table(&preset.family.normalized_table(), ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_sizes() {
        assert_eq!(TdlFamily::Tdla.normalized_table().len(), 23);
        assert_eq!(TdlFamily::Tdlb.normalized_table().len(), 23);
        assert_eq!(TdlFamily::Tdlc.normalized_table().len(), 24);
        // Each family has exactly one 0 dB reference tap.
        for f in [TdlFamily::Tdla, TdlFamily::Tdlb, TdlFamily::Tdlc] {
            assert_eq!(f.normalized_table().iter().filter(|(_, p)| *p == 0.0).count(), 1);
        }
    }

    #[test]
    fn parse_names() {
        let p: TdlPreset = "tdla30".parse().unwrap();
        assert_eq!(p.family, TdlFamily::Tdla);
        assert_eq!(p.default_delay_spread_ns, Some(30.0));
        assert_eq!("TDLC300".parse::<TdlPreset>().unwrap().default_delay_spread_ns, Some(300.0));
        assert_eq!("tdlb".parse::<TdlPreset>().unwrap().default_delay_spread_ns, None);
        assert!("tdld30".parse::<TdlPreset>().is_err());
        assert!("tdlaXX".parse::<TdlPreset>().is_err());
        assert_eq!("tdlb100".parse::<TdlPreset>().unwrap().to_string(), "tdlb100");
    }

    #[test]
    fn unit_normalized_delay_scales_to_spread() {
        let taps = scale_table(&[(1.0, 0.0)], 30.0).unwrap();
        assert_eq!(taps[0].delay_ns, 30.0);
    }

    #[test]
    fn zero_or_negative_spread_rejected() {
        let p: TdlPreset = "tdla30".parse().unwrap();
        assert!(load_tdl_preset(p, Some(0.0)).is_err());
        assert!(load_tdl_preset(p, Some(-5.0)).is_err());
        assert!(load_tdl_preset("tdla".parse().unwrap(), None).is_err());
    }

    #[test]
    fn override_doubles_delays() {
        let base = load_tdl_preset("tdla30".parse().unwrap(), None).unwrap();
        let doubled = load_tdl_preset("tdla".parse().unwrap(), Some(60.0)).unwrap();
        assert_eq!(base.len(), doubled.len());
        for (a, b) in base.iter().zip(&doubled) {
            assert_eq!(b.delay_ns, 2.0 * a.delay_ns);
            assert_eq!(b.power_db, a.power_db);
        }
    }
}
