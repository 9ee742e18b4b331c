//! Outside-temperature data: CSV ingestion with resampling to quarters, and
//! a seeded synthetic generator for desk-scale experiments.

use crate::mdp::QUARTERS_PER_DAY;
use crate::util::stream_rng;
use crate::{Error, Result};
use chrono::{NaiveDate, NaiveDateTime, Timelike};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Parameters of the synthetic weather model: a seasonal mean plus a daily
/// sinusoid plus AR(1) noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WeatherSynthConfig {
    /// Annual mean temperature, degrees C.
    pub mean_c: f64,
    /// Amplitude of the across-days seasonal swing, degrees C.
    pub seasonal_amplitude_c: f64,
    /// Day index at which the seasonal term is coldest.
    pub coldest_day: u32,
    /// Amplitude of the within-day sinusoid, degrees C.
    pub daily_amplitude_c: f64,
    /// Hour of day (0-24) at which the daily sinusoid is at its minimum.
    pub coldest_hour: f64,
    /// AR(1) coefficient of the quarter-to-quarter noise.
    pub ar1_rho: f64,
    /// Stationary standard deviation of the noise, degrees C.
    pub noise_std_c: f64,
}

impl Default for WeatherSynthConfig {
    fn default() -> Self {
        WeatherSynthConfig {
            mean_c: 5.0,
            seasonal_amplitude_c: 0.0,
            coldest_day: 0,
            daily_amplitude_c: 4.0,
            coldest_hour: 5.0,
            ar1_rho: 0.9,
            noise_std_c: 0.6,
        }
    }
}

/// Generates the 96-quarter outside-temperature profile for one day. Pure
/// in `(seed, day)`: the same pair always produces the same profile.
pub fn synth_weather(cfg: &WeatherSynthConfig, seed: u64, day: u32) -> Vec<f64> {
    let mut rng = stream_rng(seed, "weather", u64::from(day));
    let seasonal = cfg.mean_c
        - cfg.seasonal_amplitude_c
            * (2.0 * std::f64::consts::PI * (f64::from(day) - f64::from(cfg.coldest_day)) / 365.0)
                .cos();

    let innovation_std = cfg.noise_std_c * (1.0 - cfg.ar1_rho * cfg.ar1_rho).max(0.0).sqrt();
    let mut noise = if cfg.noise_std_c > 0.0 {
        sample_gauss(&mut rng) * cfg.noise_std_c
    } else {
        0.0
    };

    (0..QUARTERS_PER_DAY)
        .map(|q| {
            let hour = f64::from(q) * 0.25;
            let diurnal = -cfg.daily_amplitude_c
                * (2.0 * std::f64::consts::PI * (hour - cfg.coldest_hour) / 24.0).cos();
            if cfg.noise_std_c > 0.0 && q > 0 {
                noise = cfg.ar1_rho * noise + innovation_std * sample_gauss(&mut rng);
            }
            seasonal + diurnal + noise
        })
        .collect()
}

fn sample_gauss<R: Rng>(rng: &mut R) -> f64 {
    rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng)
}

/// Loads a weather CSV (`timestamp,temp_c`, ISO-8601 timestamps) and
/// resamples it to complete days of 96 quarter-hour averages.
///
/// Samples finer than 15 minutes are averaged into their quarter; coarser
/// regular spacings are repeated across the quarters they cover. Remaining
/// gaps of up to 4 quarters are filled by linear interpolation; anything
/// longer is an error.
pub fn load_weather_csv(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path.as_ref())?;

    let headers = reader.headers().map_err(csv_err)?.clone();
    if headers.len() < 2 || &headers[0] != "timestamp" || &headers[1] != "temp_c" {
        return Err(Error::parse(1, "expected header `timestamp,temp_c`"));
    }

    let mut samples: Vec<(NaiveDateTime, f64)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record
            .position()
            .map(|p| p.line())
            .unwrap_or(samples.len() as u64 + 2);
        if record.len() < 2 {
            return Err(Error::parse(line, "expected two fields"));
        }
        let ts = parse_timestamp(&record[0])
            .ok_or_else(|| Error::parse(line, format!("bad timestamp `{}`", &record[0])))?;
        let temp: f64 = record[1]
            .trim()
            .parse()
            .map_err(|_| Error::parse(line, format!("bad temperature `{}`", &record[1])))?;
        if !temp.is_finite() {
            return Err(Error::parse(line, "non-finite temperature"));
        }
        if let Some((last_ts, _)) = samples.last() {
            if ts <= *last_ts {
                return Err(Error::parse(line, "timestamps must be strictly increasing"));
            }
        }
        samples.push((ts, temp));
    }
    if samples.is_empty() {
        return Err(Error::parse(1, "weather file holds no samples"));
    }

    // Native sample spacing, in quarters covered per sample.
    let mut deltas: Vec<i64> = samples
        .windows(2)
        .map(|w| (w[1].0 - w[0].0).num_seconds())
        .collect();
    deltas.sort_unstable();
    let native_s = if deltas.is_empty() {
        900
    } else {
        deltas[deltas.len() / 2]
    };
    let cover = ((native_s as f64 / 900.0).round() as usize).max(1);

    let first_day = samples[0].0.date();
    let last_day = samples.last().unwrap().0.date();
    let n_days = (last_day - first_day).num_days() as usize + 1;
    let n_slots = n_days * QUARTERS_PER_DAY as usize;

    let mut sums = vec![0.0f64; n_slots];
    let mut counts = vec![0u32; n_slots];
    for (ts, temp) in &samples {
        let idx = slot_index(first_day, *ts);
        sums[idx] += temp;
        counts[idx] += 1;
    }

    let mut values: Vec<Option<f64>> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| if c > 0 { Some(s / f64::from(c)) } else { None })
        .collect();

    // Coarse data: each sample stands for `cover` quarters.
    if cover > 1 {
        let mut i = 0;
        while i < n_slots {
            if let Some(v) = values[i] {
                for j in 1..cover {
                    if i + j < n_slots && values[i + j].is_none() {
                        values[i + j] = Some(v);
                    } else {
                        break;
                    }
                }
                i += cover;
            } else {
                i += 1;
            }
        }
    }

    fill_gaps(&mut values)?;

    Ok(values
        .chunks(QUARTERS_PER_DAY as usize)
        .map(|day| day.iter().map(|v| v.unwrap()).collect())
        .collect())
}

fn parse_timestamp(raw: &str) -> Option<NaiveDateTime> {
    let raw = raw.trim();
    if let Ok(dt) = chrono::DateTime::parse_from_rfc3339(raw) {
        return Some(dt.naive_utc());
    }
    NaiveDateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M:%S")
        .or_else(|_| NaiveDateTime::parse_from_str(raw, "%Y-%m-%d %H:%M:%S"))
        .or_else(|_| NaiveDateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M"))
        .ok()
}

fn slot_index(first_day: NaiveDate, ts: NaiveDateTime) -> usize {
    let day = (ts.date() - first_day).num_days() as usize;
    let quarter = (ts.time().hour() * 4 + ts.time().minute() / 15) as usize;
    day * QUARTERS_PER_DAY as usize + quarter
}

/// Linear interpolation for interior gaps of at most 4 quarters; longer
/// gaps and uncovered edges are errors.
fn fill_gaps(values: &mut [Option<f64>]) -> Result<()> {
    let n = values.len();
    let mut i = 0;
    while i < n {
        if values[i].is_some() {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && values[i].is_none() {
            i += 1;
        }
        let len = i - start;
        let before = start.checked_sub(1).and_then(|j| values[j]);
        let after = values.get(i).copied().flatten();
        match (before, after) {
            (Some(a), Some(b)) if len <= 4 => {
                for (k, v) in values[start..start + len].iter_mut().enumerate() {
                    let frac = (k + 1) as f64 / (len + 1) as f64;
                    *v = Some(a + (b - a) * frac);
                }
            }
            (Some(_), Some(_)) => {
                return Err(Error::parse(
                    0,
                    format!("gap of {len} quarters starting at slot {start} exceeds 4"),
                ));
            }
            _ => {
                return Err(Error::parse(
                    0,
                    format!("file does not cover complete days (missing data at slot {start})"),
                ));
            }
        }
    }
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
    use std::io::Write;

    fn write_csv(lines: &[String]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "timestamp,temp_c").unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f.flush().unwrap();
        f
    }

    fn day_of_timestamps(step_min: u32, temp: impl Fn(usize) -> f64) -> Vec<String> {
        let per_day = 24 * 60 / step_min;
        (0..per_day)
            .map(|i| {
                let minutes = i * step_min;
                format!(
                    "2024-01-01T{:02}:{:02}:00,{}",
                    minutes / 60,
                    minutes % 60,
                    temp(i as usize)
                )
            })
            .collect()
    }

    #[test]
    fn constant_file_resamples_to_constant_day() {
        let f = write_csv(&day_of_timestamps(15, |_| 10.0));
        let days = load_weather_csv(f.path()).unwrap();
        assert_eq!(days.len(), 1);
        assert_eq!(days[0], vec![10.0; 96]);
    }

    #[test]
    fn half_hour_data_repeats_into_two_quarters() {
        let f = write_csv(&day_of_timestamps(30, |i| i as f64));
        let days = load_weather_csv(f.path()).unwrap();
        assert_eq!(days[0].len(), 96);
        for i in 0..48 {
            assert_eq!(days[0][2 * i], i as f64);
            assert_eq!(days[0][2 * i + 1], i as f64);
        }
    }

    #[test]
    fn sub_quarter_data_is_averaged() {
        let f = write_csv(&day_of_timestamps(5, |i| (i % 3) as f64));
        let days = load_weather_csv(f.path()).unwrap();
        // every quarter holds samples 0,1,2 in some order
        for v in &days[0] {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn short_gap_is_interpolated_long_gap_errors() {
        let mut lines = day_of_timestamps(15, |_| 10.0);
        lines.remove(40); // one missing quarter
        let f = write_csv(&lines);
        let days = load_weather_csv(f.path()).unwrap();
        assert_eq!(days[0][40], 10.0);

        let mut lines = day_of_timestamps(15, |_| 10.0);
        lines.drain(40..45); // five missing quarters
        let f = write_csv(&lines);
        assert!(load_weather_csv(f.path()).is_err());
    }

    #[test]
    fn malformed_rows_report_line_numbers() {
        let f = write_csv(&["2024-01-01T00:00:00,not-a-number".to_string()]);
        match load_weather_csv(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn synth_zero_noise_is_a_pure_sinusoid_with_min_at_configured_hour() {
        let cfg = WeatherSynthConfig {
            noise_std_c: 0.0,
            coldest_hour: 5.0,
            ..WeatherSynthConfig::default()
        };
        let day = synth_weather(&cfg, 1, 0);
        assert_eq!(day.len(), 96);
        let (argmin, _) = day
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        assert_eq!(argmin, 20); // 5.0 h = quarter index 20
        let mean: f64 = day.iter().sum::<f64>() / 96.0;
        assert!((mean - cfg.mean_c).abs() < 1e-9);
    }

    #[test]
    fn synth_is_deterministic_per_seed_and_day() {
        let cfg = WeatherSynthConfig::default();
        assert_eq!(synth_weather(&cfg, 9, 4), synth_weather(&cfg, 9, 4));
        assert_ne!(synth_weather(&cfg, 9, 4), synth_weather(&cfg, 9, 5));
        assert_ne!(synth_weather(&cfg, 9, 4), synth_weather(&cfg, 10, 4));
    }
}
