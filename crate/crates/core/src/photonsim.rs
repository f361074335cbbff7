//! Monte Carlo photon-counting interferograms.
//!
//! Every interferogram is a deterministic function of its model, scan and
//! seed. Campaign runs derive their seeds from the master seed and the run
//! index only, so runs can be generated in any order or in parallel.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interferometer::{mz_signal, SagnacModel};

/// Above this mean the Poisson draw uses the normal approximation.
pub const NORMAL_APPROX_CUTOFF: f64 = 1000.0;

pub const DEFAULT_STEPS: usize = 100;
pub const DEFAULT_MEAN_COUNTS: f64 = 20_000.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScanError {
    #[error("scan needs at least 8 steps, got {0}")]
    TooFewSteps(usize),
    #[error("scan must cover at least one full fringe (2π), got span {0}")]
    SpanTooShort(f64),
    #[error("mean counts per step must be positive and finite, got {0}")]
    InvalidMeanCounts(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    /// Independent Poisson counts.
    #[default]
    Poisson,
    /// Diagnostic mode: counts are the rounded expectation values.
    Expected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub n_steps: usize,
    pub phase_start: f64,
    pub phase_end: f64,
    /// Expected heralded detections per step before any element losses.
    pub mean_counts_per_step: f64,
    pub rng_seed: u64,
    pub noise: NoiseModel,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            n_steps: DEFAULT_STEPS,
            phase_start: 0.0,
            phase_end: 4.0 * PI,
            mean_counts_per_step: DEFAULT_MEAN_COUNTS,
            rng_seed: 0,
            noise: NoiseModel::Poisson,
        }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<(), ScanError> {
        if self.n_steps < 8 {
            return Err(ScanError::TooFewSteps(self.n_steps));
        }
        let span = self.phase_end - self.phase_start;
        if !(span >= 2.0 * PI - 1e-12) {
            return Err(ScanError::SpanTooShort(span));
        }
        if !(self.mean_counts_per_step > 0.0 && self.mean_counts_per_step.is_finite()) {
            return Err(ScanError::InvalidMeanCounts(self.mean_counts_per_step));
        }
        Ok(())
    }

    /// Stage phase of step `s`; the end point is excluded so the scan covers
    /// whole periods without a duplicated sample.
    pub fn phase_at(&self, s: usize) -> f64 {
        self.phase_start + (self.phase_end - self.phase_start) * s as f64 / self.n_steps as f64
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            rng_seed: seed,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub phase_rad: f64,
    pub counts_d1: u64,
    pub counts_d2: u64,
}

impl Sample {
    pub fn total(&self) -> u64 {
        self.counts_d1 + self.counts_d2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interferogram {
    pub samples: Vec<Sample>,
    pub seed: u64,
    pub label: String,
}

impl Interferogram {
    pub fn new(samples: Vec<Sample>, seed: u64, label: impl Into<String>) -> Self {
        Self {
            samples,
            seed,
            label: label.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn total_counts(&self) -> u64 {
        self.samples.iter().map(Sample::total).sum()
    }

    /// Same data with the detector labels exchanged.
    pub fn swapped_detectors(&self) -> Self {
        let samples = self
            .samples
            .iter()
            .map(|s| Sample {
                phase_rad: s.phase_rad,
                counts_d1: s.counts_d2,
                counts_d2: s.counts_d1,
            })
            .collect();
        Self::new(samples, self.seed, self.label.clone())
    }
}

/// Poisson draw: library sampler below the cutoff, continuity-corrected
/// normal approximation above it.
pub fn sample_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if !(mean > 0.0) {
        return 0;
    }
    if mean > NORMAL_APPROX_CUTOFF {
        let z: f64 = rng.sample(StandardNormal);
        return (mean + mean.sqrt() * z + 0.5).floor().max(0.0) as u64;
    }
    // the mean is positive and finite here
    let dist = Poisson::new(mean).expect("valid Poisson mean");
    dist.sample(rng) as u64
}

fn draw<R: Rng + ?Sized>(mean: f64, noise: NoiseModel, rng: &mut R) -> u64 {
    match noise {
        NoiseModel::Poisson => sample_poisson(mean, rng),
        NoiseModel::Expected => mean.max(0.0).round() as u64,
    }
}

/// Expected detections per step after element losses.
pub fn effective_mean_counts(model: &SagnacModel, scan: &ScanConfig) -> f64 {
    scan.mean_counts_per_step * model.intensity_transmission()
}

fn generate(model: &SagnacModel, scan: &ScanConfig, rng: &mut ChaCha8Rng, seed: u64, label: &str) -> Interferogram {
    let visibility = model.analytic_visibility();
    let n_eff = effective_mean_counts(model, scan);
    generate_fraction(|phase| mz_signal(phase, visibility), n_eff, scan, rng, seed, label)
}

fn generate_fraction(
    fraction: impl Fn(f64) -> f64,
    n_eff: f64,
    scan: &ScanConfig,
    rng: &mut ChaCha8Rng,
    seed: u64,
    label: &str,
) -> Interferogram {
    let samples = (0..scan.n_steps)
        .map(|s| {
            let phase = scan.phase_at(s);
            let p1 = fraction(phase).clamp(0.0, 1.0);
            Sample {
                phase_rad: phase,
                counts_d1: draw(n_eff * p1, scan.noise, rng),
                counts_d2: draw(n_eff * (1.0 - p1), scan.noise, rng),
            }
        })
        .collect();
    Interferogram::new(samples, seed, label)
}

/// Interferogram whose first detector receives `fraction(phase)` of
/// `scan.mean_counts_per_step`, with no element losses.
pub fn simulate_fringe(fraction: impl Fn(f64) -> f64, scan: &ScanConfig) -> Result<Interferogram, ScanError> {
    scan.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scan.rng_seed);
    Ok(generate_fraction(
        fraction,
        scan.mean_counts_per_step,
        scan,
        &mut rng,
        scan.rng_seed,
        "fringe",
    ))
}

/// One scanned interferogram seeded from `scan.rng_seed`.
pub fn simulate_interferogram(model: &SagnacModel, scan: &ScanConfig) -> Result<Interferogram, ScanError> {
    scan.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scan.rng_seed);
    Ok(generate(model, scan, &mut rng, scan.rng_seed, "single"))
}

/// The two interferograms of one LC toggle: LC off, then LC on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub run_index: usize,
    pub seed: u64,
    pub lc_off: Interferogram,
    pub lc_on: Interferogram,
}

const STREAM_LC_OFF: u64 = 1;
const STREAM_LC_ON: u64 = 2;

/// Simulate one run. The two configurations use separate ChaCha streams of
/// the same seed, so their noise is independent.
pub fn simulate_run(
    model_off: &SagnacModel,
    model_on: &SagnacModel,
    scan: &ScanConfig,
) -> Result<RunOutput, ScanError> {
    scan.validate()?;
    Ok(run_with_seed(model_off, model_on, scan, 0, scan.rng_seed))
}

fn run_with_seed(
    model_off: &SagnacModel,
    model_on: &SagnacModel,
    scan: &ScanConfig,
    run_index: usize,
    seed: u64,
) -> RunOutput {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_LC_OFF);
    let lc_off = generate(model_off, scan, &mut rng, seed, "lc_off");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_LC_ON);
    let lc_on = generate(model_on, scan, &mut rng, seed, "lc_on");
    RunOutput {
        run_index,
        seed,
        lc_off,
        lc_on,
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of run `run_index` within a campaign.
pub fn run_seed(master_seed: u64, run_index: usize) -> u64 {
    splitmix64(splitmix64(master_seed) ^ (run_index as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// One run of a campaign, independent of any other run.
pub fn simulate_campaign_run(
    model_off: &SagnacModel,
    model_on: &SagnacModel,
    scan: &ScanConfig,
    master_seed: u64,
    run_index: usize,
) -> RunOutput {
    run_with_seed(model_off, model_on, scan, run_index, run_seed(master_seed, run_index))
}

/// `n_runs` independent runs, ordered by run index. Runs are spread over
/// the current rayon pool.
pub fn simulate_campaign(
    model_off: &SagnacModel,
    model_on: &SagnacModel,
    scan: &ScanConfig,
    n_runs: usize,
    master_seed: u64,
) -> Result<Vec<RunOutput>, ScanError> {
    scan.validate()?;
    Ok((0..n_runs)
        .into_par_iter()
        .map(|i| simulate_campaign_run(model_off, model_on, scan, master_seed, i))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypercomplex::PhaseVector;
    use crate::interferometer::PhaseElement;

    fn model(v: f64, nim_transmission: f64) -> SagnacModel {
        SagnacModel::with_elements(
            v,
            vec![
                PhaseElement::new("lc", PhaseVector::complex(PI), 1.0),
                PhaseElement::new("nim", PhaseVector::complex(-PI), nim_transmission),
            ],
        )
        .unwrap()
    }

    #[test]
    fn scan_validation() {
        assert!(ScanConfig::default().validate().is_ok());
        let s = ScanConfig {
            n_steps: 7,
            ..Default::default()
        };
        assert_eq!(s.validate(), Err(ScanError::TooFewSteps(7)));
        let s = ScanConfig {
            phase_end: 3.0,
            ..Default::default()
        };
        assert!(matches!(s.validate(), Err(ScanError::SpanTooShort(_))));
        let s = ScanConfig {
            mean_counts_per_step: 0.0,
            ..Default::default()
        };
        assert!(matches!(s.validate(), Err(ScanError::InvalidMeanCounts(_))));
    }

    #[test]
    fn flat_fringe_is_balanced() {
        // v = 1 with commuting phases gives P_D = 0 and therefore V = 0
        let m = model(1.0, 1.0);
        assert_eq!(m.analytic_visibility(), 0.0);
        let scan = ScanConfig {
            mean_counts_per_step: 500.0,
            rng_seed: 11,
            ..Default::default()
        };
        let ig = simulate_interferogram(&m, &scan).unwrap();
        let d1: u64 = ig.samples.iter().map(|s| s.counts_d1).sum();
        let n = ig.total_counts() as f64;
        let frac = d1 as f64 / n;
        let sigma = (0.25 / n).sqrt();
        assert!((frac - 0.5).abs() < 5.0 * sigma, "fraction {frac}");
    }

    #[test]
    fn same_seed_same_interferogram() {
        let m = model(0.9992774, 0.13f64.sqrt());
        let scan = ScanConfig {
            rng_seed: 42,
            ..Default::default()
        };
        assert_eq!(
            simulate_interferogram(&m, &scan).unwrap(),
            simulate_interferogram(&m, &scan).unwrap()
        );
        let other = simulate_interferogram(&m, &scan.with_seed(43)).unwrap();
        assert_ne!(simulate_interferogram(&m, &scan).unwrap(), other);
    }

    #[test]
    fn nim_transmission_scales_counts() {
        let scan = ScanConfig {
            mean_counts_per_step: 500.0,
            rng_seed: 5,
            ..Default::default()
        };
        let open = simulate_interferogram(&model(0.9992774, 1.0), &scan).unwrap();
        let lossy = simulate_interferogram(&model(0.9992774, 0.13f64.sqrt()), &scan).unwrap();
        let expected = 0.13 * 500.0 * scan.n_steps as f64;
        let got = lossy.total_counts() as f64;
        assert!((got - expected).abs() < 5.0 * expected.sqrt(), "{got} vs {expected}");
        let baseline = open.total_counts() as f64;
        assert!((got / baseline - 0.13).abs() < 0.01);
    }

    #[test]
    fn expected_counts_conserved() {
        // normal-approximation regime and library regime
        for mean in [200.0, 5000.0] {
            let m = model(0.9992774, 1.0);
            let scan = ScanConfig {
                mean_counts_per_step: mean,
                n_steps: 400,
                phase_end: 8.0 * PI,
                rng_seed: 9,
                ..Default::default()
            };
            let ig = simulate_interferogram(&m, &scan).unwrap();
            let per_step = ig.total_counts() as f64 / ig.len() as f64;
            let se = (mean / ig.len() as f64).sqrt();
            assert!((per_step - mean).abs() < 5.0 * se, "mean {mean}: {per_step}");
        }
    }

    #[test]
    fn poisson_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for mean in [0.3, 7.0, 900.0, 2500.0] {
            let n = 20_000;
            let xs: Vec<f64> = (0..n).map(|_| sample_poisson(mean, &mut rng) as f64).collect();
            let m = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
            assert!((m - mean).abs() < 5.0 * (mean / n as f64).sqrt(), "mean {mean}: {m}");
            assert!((var / mean - 1.0).abs() < 0.05, "var {mean}: {var}");
        }
        assert_eq!(sample_poisson(0.0, &mut rng), 0);
    }

    #[test]
    fn expected_mode_is_noiseless() {
        let m = model(0.0, 1.0);
        let scan = ScanConfig {
            noise: NoiseModel::Expected,
            mean_counts_per_step: 1000.0,
            ..Default::default()
        };
        let ig = simulate_interferogram(&m, &scan).unwrap();
        assert!(ig.samples.iter().all(|s| s.counts_d1 + s.counts_d2 == 1000));
    }

    #[test]
    fn campaign_is_order_independent() {
        let off = model(0.9992774, 1.0);
        let on = off.clone();
        let scan = ScanConfig::default();
        let all = simulate_campaign(&off, &on, &scan, 6, 77).unwrap();
        assert_eq!(all.len(), 6);
        for i in (0..6).rev() {
            assert_eq!(simulate_campaign_run(&off, &on, &scan, 77, i), all[i]);
            assert_eq!(all[i].run_index, i);
        }
        assert_ne!(all[0].lc_off.samples, all[0].lc_on.samples);
        assert_ne!(all[0].seed, all[1].seed);
        let again = simulate_campaign(&off, &on, &scan, 6, 77).unwrap();
        assert_eq!(again, all);
        assert_eq!(simulate_campaign(&off, &on, &scan, 1, 77).unwrap().len(), 1);
    }

    #[test]
    fn swapped_detectors_round_trip() {
        let ig = simulate_interferogram(&model(0.9, 1.0), &ScanConfig::default()).unwrap();
        assert_eq!(ig.swapped_detectors().swapped_detectors(), ig);
    }

    #[test]
    fn fringe_follows_fraction() {
        let scan = ScanConfig {
            noise: NoiseModel::Expected,
            mean_counts_per_step: 1000.0,
            ..Default::default()
        };
        let ig = simulate_fringe(|x| 0.25 + 0.5 * x.sin().powi(2), &scan).unwrap();
        assert_eq!(ig.len(), DEFAULT_STEPS);
        let s = ig.samples[25];
        let p1 = 0.25 + 0.5 * s.phase_rad.sin().powi(2);
        assert_eq!(s.counts_d1, (1000.0 * p1).round() as u64);
        assert_eq!(s.total(), 1000);
        assert!(simulate_fringe(|_| 0.5, &ScanConfig { n_steps: 2, ..scan }).is_err());
    }
}
