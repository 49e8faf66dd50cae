use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::domain::{AmbientReading, UtcTimestamp};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("ambient sensor unavailable: {0}")]
pub struct BackendError(pub String);

/// Source of desk-level ambient readings.
pub trait AmbientBackend: Send {
    /// Must return within bounded time.
    fn read(&mut self, now: UtcTimestamp) -> Result<AmbientReading, BackendError>;
}

impl<B: AmbientBackend + ?Sized> AmbientBackend for Box<B> {
    fn read(&mut self, now: UtcTimestamp) -> Result<AmbientReading, BackendError> {
        (**self).read(now)
    }
}

/// Diurnal sinusoid plus seeded Gaussian noise. A reading is a pure function of (seed, time).
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedAmbient {
    pub seed: u64,
    pub mean_temp_c: f64,
    pub temp_amplitude: f64,
    pub mean_rh: f64,
    pub rh_amplitude: f64,
    pub temp_noise_sd: f64,
    pub rh_noise_sd: f64,
    pub light_day: f64,
    pub light_night: f64,
    /// UTC hour range with daylight, start inclusive.
    pub day_hours: (u32, u32),
}

impl SimulatedAmbient {
    pub fn new(seed: u64) -> Self {
        SimulatedAmbient {
            seed,
            mean_temp_c: 22.0,
            temp_amplitude: 3.0,
            mean_rh: 45.0,
            rh_amplitude: 10.0,
            temp_noise_sd: 0.3,
            rh_noise_sd: 1.0,
            light_day: 300.0,
            light_night: 5.0,
            day_hours: (7, 19),
        }
    }

    pub fn with_temperature(mut self, mean: f64, amplitude: f64) -> Self {
        self.mean_temp_c = mean;
        self.temp_amplitude = amplitude;
        self
    }

    pub fn reading_at(&self, t: UtcTimestamp) -> AmbientReading {
        let secs_of_day = t.unix().rem_euclid(86_400);
        // peaks mid-afternoon
        let phase = 2.0 * PI * (secs_of_day as f64 - 9.0 * 3600.0) / 86_400.0;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(t.unix() as u64);
        let noise = Normal::new(0.0, 1.0).expect("unit normal");
        let temp = self.mean_temp_c + self.temp_amplitude * phase.sin() + self.temp_noise_sd * noise.sample(&mut rng);
        let rh = self.mean_rh - self.rh_amplitude * phase.sin() + self.rh_noise_sd * noise.sample(&mut rng);
        let hour = (secs_of_day / 3600) as u32;
        let light = if (self.day_hours.0..self.day_hours.1).contains(&hour) { self.light_day } else { self.light_night };
        AmbientReading { light, temp_c: temp.clamp(-40.0, 85.0), rh: rh.clamp(0.0, 100.0) }
    }
}

impl AmbientBackend for SimulatedAmbient {
    fn read(&mut self, now: UtcTimestamp) -> Result<AmbientReading, BackendError> {
        Ok(self.reading_at(now))
    }
}

/// Always returns the same reading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedAmbient(pub AmbientReading);

impl AmbientBackend for FixedAmbient {
    fn read(&mut self, _now: UtcTimestamp) -> Result<AmbientReading, BackendError> {
        Ok(self.0)
    }
}

/// A sensor stick that is never there.
#[derive(Debug, Clone, Copy, Default)]
pub struct UnpluggedAmbient;

impl AmbientBackend for UnpluggedAmbient {
    fn read(&mut self, _now: UtcTimestamp) -> Result<AmbientReading, BackendError> {
        Err(BackendError("no sensor attached".into()))
    }
}
