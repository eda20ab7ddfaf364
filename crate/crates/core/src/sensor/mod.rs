//! Image formation for photon-counting (QIS) and conventional (CIS) sensors.
//!
//! A clean linear RGB scene is sub-sampled by an RGGB color filter array,
//! scaled by the sensor gain, optionally modulated by a fixed PRNU gain
//! field, offset by dark current, sampled as a Poisson photon arrival,
//! corrupted by Gaussian read noise and finally truncated by the ADC:
//!
//! ```text
//! count(p) = ADC[0,L]( Poisson(prnu(p) * alpha * CFA(x)(p) + dark * t) + eta ),  eta ~ N(0, sigma^2)
//! ```

mod config;
mod frame;
mod image;
mod prnu;
mod sampling;
mod simulate;

pub use config::{AdcMode, SensorConfig, SensorKind};
pub use frame::RawFrame;
pub use image::{apply_cfa, BayerMosaic, CfaColor, RgbImage};
pub use prnu::{generate_prnu, PrnuMask};
pub use sampling::{adc_quantize, adc_quantize_with, sample_poisson};
pub use simulate::{calibrate_gain, measure_ppp, naive_demosaic, rate_field, simulate_analog, simulate_frame};
