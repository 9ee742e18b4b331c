//! Day-ahead price profiles: a seeded synthetic generator with morning and
//! evening peaks, plus CSV ingestion and emission.

use crate::mdp::{PriceProfile, QUARTERS_PER_DAY};
use crate::util::stream_rng;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// Parameters of the synthetic price model: a flat base plus Gaussian-shaped
/// morning/evening bumps plus seeded per-quarter noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriceSynthConfig {
    /// Base level, EUR/kWh.
    pub base_eur_per_kwh: f64,
    /// Morning peak amplitude, EUR/kWh, centred at `morning_hour`.
    pub morning_amplitude: f64,
    pub morning_hour: f64,
    pub morning_width_h: f64,
    /// Evening peak amplitude, EUR/kWh, centred at `evening_hour`.
    pub evening_amplitude: f64,
    pub evening_hour: f64,
    pub evening_width_h: f64,
    /// Std of iid per-quarter noise, EUR/kWh.
    pub noise_std: f64,
}

impl Default for PriceSynthConfig {
    fn default() -> Self {
        PriceSynthConfig {
            base_eur_per_kwh: 0.05,
            morning_amplitude: 0.10,
            morning_hour: 8.0,
            morning_width_h: 1.5,
            evening_amplitude: 0.15,
            evening_hour: 19.0,
            evening_width_h: 2.0,
            noise_std: 0.005,
        }
    }
}

/// Generates the announced price profile for one day; pure in `(seed, day)`.
pub fn synth_price(cfg: &PriceSynthConfig, seed: u64, day: u32) -> PriceProfile {
    let mut rng = stream_rng(seed, "price", u64::from(day));
    let bump = |hour: f64, centre: f64, width: f64, amp: f64| {
        if amp == 0.0 {
            return 0.0;
        }
        let d = (hour - centre) / width;
        amp * (-0.5 * d * d).exp()
    };
    let values = (0..QUARTERS_PER_DAY)
        .map(|q| {
            let hour = f64::from(q) * 0.25;
            let noise = if cfg.noise_std > 0.0 {
                let g: f64 =
                    rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
                g * cfg.noise_std
            } else {
                0.0
            };
            cfg.base_eur_per_kwh
                + bump(hour, cfg.morning_hour, cfg.morning_width_h, cfg.morning_amplitude)
                + bump(hour, cfg.evening_hour, cfg.evening_width_h, cfg.evening_amplitude)
                + noise
        })
        .collect();
    PriceProfile::new(values).expect("synthetic profile is always 96 finite values")
}

/// Loads price profiles from a CSV with header `day,quarter,price_eur_per_kwh`.
/// Every listed day must carry exactly 96 quarters.
pub fn load_price_csv(path: impl AsRef<Path>) -> Result<Vec<PriceProfile>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path.as_ref())?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    if headers.len() < 3
        || &headers[0] != "day"
        || &headers[1] != "quarter"
        || &headers[2] != "price_eur_per_kwh"
    {
        return Err(Error::parse(1, "expected header `day,quarter,price_eur_per_kwh`"));
    }

    let mut days: BTreeMap<u32, Vec<Option<f64>>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let day: u32 = record[0]
            .trim()
            .parse()
            .map_err(|_| Error::parse(line, format!("bad day `{}`", &record[0])))?;
        let quarter: u16 = record[1]
            .trim()
            .parse()
            .map_err(|_| Error::parse(line, format!("bad quarter `{}`", &record[1])))?;
        let price: f64 = record[2]
            .trim()
            .parse()
            .map_err(|_| Error::parse(line, format!("bad price `{}`", &record[2])))?;
        if quarter == 0 || quarter > QUARTERS_PER_DAY {
            return Err(Error::parse(line, format!("quarter {quarter} out of 1..=96")));
        }
        let slots = days
            .entry(day)
            .or_insert_with(|| vec![None; QUARTERS_PER_DAY as usize]);
        if slots[(quarter - 1) as usize].replace(price).is_some() {
            return Err(Error::parse(
                line,
                format!("duplicate entry for day {day} quarter {quarter}"),
            ));
        }
    }

    let mut profiles = Vec::with_capacity(days.len());
    for (day, slots) in days {
        let values: Option<Vec<f64>> = slots.into_iter().collect();
        match values {
            Some(v) => profiles.push(PriceProfile::new(v)?),
            None => {
                return Err(Error::parse(0, format!("day {day} does not hold 96 quarters")));
            }
        }
    }
    if profiles.is_empty() {
        return Err(Error::parse(1, "price file holds no rows"));
    }
    Ok(profiles)
}

/// Writes price profiles in the same format `load_price_csv` reads.
pub fn write_price_csv(path: impl AsRef<Path>, profiles: &[PriceProfile]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    writer
        .write_record(["day", "quarter", "price_eur_per_kwh"])
        .map_err(csv_err)?;
    for (day, profile) in profiles.iter().enumerate() {
        for q in 1..=QUARTERS_PER_DAY {
            writer
                .write_record([day.to_string(), q.to_string(), format!("{}", profile.at(q))])
                .map_err(csv_err)?;
        }
    }
    writer.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    let line = match e.position() {
        Some(pos) => pos.line(),
        None => 0,
    };
    Error::parse(line, e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_profile_without_bumps_and_noise() {
        let cfg = PriceSynthConfig {
            morning_amplitude: 0.0,
            evening_amplitude: 0.0,
            noise_std: 0.0,
            ..PriceSynthConfig::default()
        };
        let p = synth_price(&cfg, 3, 0);
        for q in 1..=96 {
            assert_eq!(p.at(q), cfg.base_eur_per_kwh);
        }
    }

    #[test]
    fn same_seed_and_day_reproduce_the_profile() {
        let cfg = PriceSynthConfig::default();
        assert_eq!(synth_price(&cfg, 5, 7), synth_price(&cfg, 5, 7));
        assert_ne!(synth_price(&cfg, 5, 7), synth_price(&cfg, 5, 8));
    }

    #[test]
    fn csv_round_trip_is_identity() {
        let cfg = PriceSynthConfig::default();
        let days: Vec<PriceProfile> = (0..3).map(|d| synth_price(&cfg, 11, d)).collect();
        let file = tempfile::NamedTempFile::new().unwrap();
        write_price_csv(file.path(), &days).unwrap();
        let back = load_price_csv(file.path()).unwrap();
        assert_eq!(days, back);
    }

    #[test]
    fn incomplete_day_is_rejected() {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "day,quarter,price_eur_per_kwh").unwrap();
        for q in 1..=95 {
            writeln!(f, "0,{q},0.05").unwrap();
        }
        f.flush().unwrap();
        assert!(load_price_csv(f.path()).is_err());
    }
}
