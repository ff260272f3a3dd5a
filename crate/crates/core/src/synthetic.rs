//! Seeded synthetic monthly incidence series with climate covariates.
//!
//! The log-incidence signal has a secular trend, a 12-month seasonal cycle,
//! a temperature effect, and noise whose scale grows in the peak season.
//! Counts are `round(expm1(signal))`.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{Month, RawRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub months: usize,
    pub start: Month,
    pub seed: u64,
    pub base_level: f64,
    /// Log-scale growth per month.
    pub trend: f64,
    pub seasonal_amplitude: f64,
    pub period: f64,
    /// Log-scale effect of one degree of temperature anomaly.
    pub temperature_effect: f64,
    /// Noise standard deviation in the off season and at the peak.
    pub noise_low: f64,
    pub noise_high: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            months: 120,
            start: Month::new(2005, 1).expect("valid month"),
            seed: 0,
            base_level: 5.0,
            trend: 0.012,
            seasonal_amplitude: 0.9,
            period: 12.0,
            temperature_effect: 0.25,
            noise_low: 0.04,
            noise_high: 0.12,
        }
    }
}

pub fn generate(cfg: &SyntheticConfig) -> Vec<RawRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    let mut month = cfg.start;
    let mut temp_anomaly = 0.0;
    let mut out = Vec::with_capacity(cfg.months);
    for i in 0..cfg.months {
        let t = (i + 1) as f64;
        let phase = 2.0 * PI * t / cfg.period;

        temp_anomaly = 0.6 * temp_anomaly + 0.35 * unit.sample(&mut rng);
        let temperature = 27.5 + 1.1 * (phase - 0.6).sin() + temp_anomaly;
        let humidity = (79.0 + 4.0 * phase.cos() + 1.5 * unit.sample(&mut rng)).clamp(0.0, 100.0);
        let rainfall = (170.0 + 90.0 * (phase + 0.8).cos() + 35.0 * unit.sample(&mut rng)).max(0.0);

        let season = (phase - 1.2).sin();
        let noise_sd = cfg.noise_low + (cfg.noise_high - cfg.noise_low) * 0.5 * (1.0 + season);
        let level = cfg.base_level
            + cfg.trend * t
            + cfg.seasonal_amplitude * season
            + cfg.temperature_effect * temp_anomaly
            + noise_sd * unit.sample(&mut rng);
        let incidence = level.exp_m1().round().max(0.0) as u64;

        out.push(RawRecord::monthly(
            month,
            incidence,
            round_to(rainfall, 1),
            round_to(humidity, 1),
            round_to(temperature, 2),
        ));
        month = month.next();
    }
    out
}

fn round_to(v: f64, digits: i32) -> f64 {
    let s = 10f64.powi(digits);
    (v * s).round() / s
}

/// The committed 120-month fixture (2005-01 .. 2014-12, seed 0).
pub fn fixture_120() -> Vec<RawRecord> {
    generate(&SyntheticConfig::default())
}

/// Last training month of the fixture: the final 12 months are held out.
pub fn fixture_train_end() -> Month {
    Month::new(2013, 12).expect("valid month")
}
