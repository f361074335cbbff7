//! Campaign statistics: ΔV and Γ-ratio distributions, the θ bound, the
//! liquid-crystal systematic, and detection-power sweeps.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fitcore::{fit_interferogram, Detector};
use crate::hypercomplex::PhaseVector;
use crate::interferometer::{
    gamma_of_model, gamma_ratio, theta_bound, ElementSelection, Estimate, InterferometerError, SagnacModel,
    VisibilityValue,
};
use crate::photonsim::{simulate_campaign_run, RunOutput, ScanConfig, ScanError};

/// Deviations of the mean Γ ratio from one beyond this many standard errors
/// count as a detection.
pub const DETECTION_SIGMAS: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("need at least {needed} values, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error(transparent)]
    Scan(#[from] ScanError),
    #[error(transparent)]
    Model(#[from] InterferometerError),
}

/// Visibilities of one detector with the liquid crystal off (`V_NIM` in the
/// main campaign) and on (`V_BOTH`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorPair {
    pub lc_off: VisibilityValue,
    pub lc_on: VisibilityValue,
}

impl DetectorPair {
    pub fn delta_v(&self) -> f64 {
        self.lc_on.value - self.lc_off.value
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_index: usize,
    pub d1: Option<DetectorPair>,
    pub d2: Option<DetectorPair>,
}

impl RunRecord {
    /// Both detectors fitted in both configurations.
    pub fn is_complete(&self) -> bool {
        self.d1.is_some() && self.d2.is_some()
    }

    pub fn pairs(&self) -> impl Iterator<Item = &DetectorPair> {
        self.d1.iter().chain(self.d2.iter())
    }

    pub fn swapped_detectors(&self) -> Self {
        Self {
            run_index: self.run_index,
            d1: self.d2,
            d2: self.d1,
        }
    }
}

fn fit_visibility(run: &RunOutput, lc_on: bool, detector: Detector) -> Option<VisibilityValue> {
    let ig = if lc_on { &run.lc_on } else { &run.lc_off };
    match fit_interferogram(ig, detector) {
        Ok(fit) if fit.converged && fit.visibility.value.is_finite() && fit.visibility.sigma.is_finite() => {
            Some(fit.visibility)
        }
        Ok(_) => {
            warn!("run {}: {detector:?} fit did not converge", run.run_index);
            None
        }
        Err(e) => {
            warn!("run {}: {detector:?} fit failed: {e}", run.run_index);
            None
        }
    }
}

/// Fit both detectors of both configurations of a run. A detector whose fit
/// fails in either configuration is left out of the record.
pub fn analyze_run(run: &RunOutput) -> RunRecord {
    let pair = |d| {
        Some(DetectorPair {
            lc_off: fit_visibility(run, false, d)?,
            lc_on: fit_visibility(run, true, d)?,
        })
    };
    RunRecord {
        run_index: run.run_index,
        d1: pair(Detector::D1),
        d2: pair(Detector::D2),
    }
}

/// Simulate and fit `n_runs` runs on the current rayon pool, ordered by run index.
pub fn run_campaign(
    model_off: &SagnacModel,
    model_on: &SagnacModel,
    scan: &ScanConfig,
    n_runs: usize,
    master_seed: u64,
) -> Result<Vec<RunRecord>, AnalysisError> {
    scan.validate()?;
    Ok((0..n_runs)
        .into_par_iter()
        .map(|i| analyze_run(&simulate_campaign_run(model_off, model_on, scan, master_seed, i)))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub std: f64,
    pub stderr: f64,
}

impl SampleStats {
    pub fn from_values(values: &[f64]) -> Result<Self, AnalysisError> {
        let n = values.len();
        if n < 2 {
            return Err(AnalysisError::TooFew { needed: 2, got: n });
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let std = var.sqrt();
        Ok(Self {
            n,
            mean,
            std,
            stderr: std / (n as f64).sqrt(),
        })
    }

    pub fn mean_estimate(&self) -> Estimate {
        Estimate::new(self.mean, self.stderr)
    }
}

/// ΔV values of complete runs, two per run.
pub fn delta_v_values(records: &[RunRecord]) -> Vec<f64> {
    records
        .iter()
        .filter(|r| r.is_complete())
        .flat_map(|r| r.pairs().map(DetectorPair::delta_v).collect::<Vec<_>>())
        .collect()
}

/// Pooled ΔV = V_on - V_off over both detectors of every complete run.
pub fn delta_v_statistics(records: &[RunRecord]) -> Result<SampleStats, AnalysisError> {
    if records.len() < 2 {
        return Err(AnalysisError::TooFew {
            needed: 2,
            got: records.len(),
        });
    }
    SampleStats::from_values(&delta_v_values(records))
}

/// ΔV averaged over the detectors of each complete run, one value per run.
pub fn delta_v_run_statistics(records: &[RunRecord]) -> Result<SampleStats, AnalysisError> {
    let means: Vec<f64> = records
        .iter()
        .filter(|r| r.is_complete())
        .map(|r| {
            let (sum, n) = r.pairs().fold((0.0, 0), |(s, n), p| (s + p.delta_v(), n + 1));
            sum / n as f64
        })
        .collect();
    SampleStats::from_values(&means)
}

/// Same statistic for a campaign that toggles only the liquid crystal.
pub fn lc_systematic(records: &[RunRecord]) -> Result<SampleStats, AnalysisError> {
    delta_v_statistics(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaRatioStats {
    pub ratios: Vec<f64>,
    /// Propagated sigma of each ratio.
    pub per_point_sigma: Vec<f64>,
    pub stats: SampleStats,
    /// Statistics of the per-run mean ratio. The two detectors of a run are
    /// correlated, so this standard error is the honest one.
    pub run_stats: Option<SampleStats>,
    pub mean_propagated_sigma: f64,
    /// Points dropped because a visibility was non-physical.
    pub excluded: usize,
}

impl GammaRatioStats {
    /// The larger of the pooled and the per-run standard errors.
    pub fn stderr(&self) -> f64 {
        self.run_stats
            .map_or(self.stats.stderr, |r| r.stderr.max(self.stats.stderr))
    }

    /// Campaign mean with its standard error.
    pub fn estimate(&self) -> Estimate {
        Estimate::new(self.stats.mean, self.stderr())
    }

    /// `|mean - 1|` in units of the standard error.
    pub fn significance(&self) -> f64 {
        let se = self.stderr();
        if se > 0.0 {
            (self.stats.mean - 1.0).abs() / se
        } else if self.stats.mean == 1.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    pub fn noncommutativity_detected(&self) -> bool {
        self.significance() > DETECTION_SIGMAS
    }
}

/// Γ_BOTH/Γ_NIM for every ΔV point.
pub fn gamma_ratio_distribution(records: &[RunRecord]) -> Result<GammaRatioStats, AnalysisError> {
    if records.is_empty() {
        return Err(AnalysisError::TooFew { needed: 1, got: 0 });
    }
    let mut ratios = Vec::new();
    let mut sigmas = Vec::new();
    let mut run_means = Vec::new();
    let mut excluded = 0;
    for r in records.iter().filter(|r| r.is_complete()) {
        let first = ratios.len();
        for pair in r.pairs() {
            match gamma_ratio(pair.lc_on, pair.lc_off) {
                Ok(e) => {
                    ratios.push(e.value);
                    sigmas.push(e.sigma);
                }
                Err(e) => {
                    warn!("run {}: point excluded: {e}", r.run_index);
                    excluded += 1;
                }
            }
        }
        let own = &ratios[first..];
        if !own.is_empty() {
            run_means.push(own.iter().sum::<f64>() / own.len() as f64);
        }
    }
    let stats = SampleStats::from_values(&ratios)?;
    let run_stats = SampleStats::from_values(&run_means).ok();
    let mean_propagated_sigma = sigmas.iter().sum::<f64>() / sigmas.len() as f64;
    Ok(GammaRatioStats {
        ratios,
        per_point_sigma: sigmas,
        stats,
        run_stats,
        mean_propagated_sigma,
        excluded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "method", content = "bins")]
pub enum Binning {
    #[default]
    FreedmanDiaconis,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_center: f64,
    pub count: usize,
}

const MAX_BINS: usize = 10_000;

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn histogram(values: &[f64], binning: Binning) -> Vec<HistogramBin> {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if sorted.is_empty() {
        return Vec::new();
    }
    sorted.sort_by(f64::total_cmp);
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    let range = max - min;
    if range == 0.0 {
        return vec![HistogramBin {
            bin_center: min,
            count: sorted.len(),
        }];
    }
    let n_bins = match binning {
        Binning::Fixed(n) => n.max(1),
        Binning::FreedmanDiaconis => {
            let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
            let width = 2.0 * iqr / (sorted.len() as f64).cbrt();
            if width > 0.0 {
                ((range / width).ceil() as usize).clamp(1, MAX_BINS)
            } else {
                1
            }
        }
    };
    let width = range / n_bins as f64;
    let mut counts = vec![0usize; n_bins];
    for v in &sorted {
        let idx = (((v - min) / width) as usize).min(n_bins - 1);
        counts[idx] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            bin_center: min + (i as f64 + 0.5) * width,
            count,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BoundOptions {
    pub binning: Binning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub n_runs: usize,
    pub n_complete_runs: usize,
    pub n_values: usize,
    pub delta_v_mean: f64,
    pub delta_v_std: f64,
    pub delta_v_stderr: f64,
    /// Standard error of the per-run mean ΔV.
    pub delta_v_run_stderr: f64,
    pub gamma_ratio_mean: f64,
    /// Standard error of the mean ratio; the headline uncertainty.
    pub gamma_ratio_sigma: f64,
    /// Standard error of the pooled ratios, treating every point as independent.
    pub gamma_ratio_pooled_sigma: f64,
    pub gamma_ratio_std: f64,
    /// Mean of the per-point propagated ratio sigmas.
    pub gamma_ratio_propagated_sigma: f64,
    pub gamma_ratio_excluded: usize,
    pub significance: f64,
    pub noncommutativity_detected: bool,
    pub theta_central_deg: f64,
    pub theta_conservative_deg: f64,
    pub delta_v_histogram: Vec<HistogramBin>,
    pub gamma_ratio_histogram: Vec<HistogramBin>,
    pub notes: Vec<String>,
}

const DETECTOR_CORRELATION_NOTE: &str = "the two detectors of a run see complementary normalized curves, so \
     their values are correlated; gamma_ratio_sigma is the larger of the pooled and per-run standard errors";

pub fn bound_from_campaign(records: &[RunRecord], options: &BoundOptions) -> Result<BoundReport, AnalysisError> {
    let dv = delta_v_statistics(records)?;
    let dv_values = delta_v_values(records);
    let gamma = gamma_ratio_distribution(records)?;
    let theta = theta_bound(gamma.estimate());
    Ok(BoundReport {
        n_runs: records.len(),
        n_complete_runs: records.iter().filter(|r| r.is_complete()).count(),
        n_values: dv.n,
        delta_v_mean: dv.mean,
        delta_v_std: dv.std,
        delta_v_stderr: dv.stderr,
        delta_v_run_stderr: delta_v_run_statistics(records).map_or(dv.stderr, |s| s.stderr),
        gamma_ratio_mean: gamma.stats.mean,
        gamma_ratio_sigma: gamma.stderr(),
        gamma_ratio_pooled_sigma: gamma.stats.stderr,
        gamma_ratio_std: gamma.stats.std,
        gamma_ratio_propagated_sigma: gamma.mean_propagated_sigma,
        gamma_ratio_excluded: gamma.excluded,
        significance: gamma.significance(),
        noncommutativity_detected: gamma.noncommutativity_detected(),
        theta_central_deg: theta.central_deg,
        theta_conservative_deg: theta.conservative_deg,
        delta_v_histogram: histogram(&dv_values, options.binning),
        gamma_ratio_histogram: histogram(&gamma.ratios, options.binning),
        notes: vec![DETECTOR_CORRELATION_NOTE.to_string()],
    })
}

/// Detection-power sweep over an injected quaternionic liquid-crystal phase
/// `ε · direction`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Apparatus with every element in place.
    pub model: SagnacModel,
    pub lc_label: String,
    /// Unit direction of the injected phase vector.
    pub direction: PhaseVector,
    pub scan: ScanConfig,
    pub n_runs: usize,
    pub master_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub epsilon: f64,
    /// Closed-form `1 - Γ_BOTH/Γ_NIM`.
    pub gamma_shift: f64,
    /// Closed-form shift of the visibility-derived ratio, `1 - |Γ_BOTH/Γ_NIM|`.
    /// Visibilities only see Γ², so the sign of Γ is lost.
    pub measurable_shift: f64,
    /// Measurable shift over the campaign's measured standard error.
    pub significance: f64,
    /// `(1 - mean ratio)` over the standard error, as measured.
    pub observed_z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
    /// Smallest grid ε reaching the detection threshold.
    pub min_detectable_epsilon: Option<f64>,
    /// Threshold crossing interpolated linearly between grid points.
    pub interpolated_threshold: Option<f64>,
}

pub fn sweep_point(config: &SweepConfig, epsilon: f64) -> Result<SweepPoint, AnalysisError> {
    let d = config.direction;
    let injected = PhaseVector::new(epsilon * d.phi1, epsilon * d.phi2, epsilon * d.phi3);
    let on = config.model.with_phase(&config.lc_label, injected)?;
    let off = config.model.switched_off(&config.lc_label)?;
    let g_on = gamma_of_model(&on, &ElementSelection::All)?;
    let g_off = gamma_of_model(&off, &ElementSelection::All)?;
    let gamma_shift = 1.0 - g_on / g_off;
    let measurable_shift = 1.0 - (g_on / g_off).abs();

    let records = run_campaign(&off, &on, &config.scan, config.n_runs, config.master_seed)?;
    let stats = gamma_ratio_distribution(&records)?;
    let se = stats.stderr();
    let significance = if measurable_shift == 0.0 {
        0.0
    } else {
        measurable_shift.abs() / se
    };
    Ok(SweepPoint {
        epsilon,
        gamma_shift,
        measurable_shift,
        significance,
        observed_z: (1.0 - stats.stats.mean) / se,
    })
}

/// Evaluate each ε with the same master seed, so every point sees the same
/// photon-noise realisation.
pub fn sensitivity_sweep(epsilons: &[f64], config: &SweepConfig) -> Result<SweepReport, AnalysisError> {
    let points = epsilons
        .iter()
        .map(|&e| sweep_point(config, e))
        .collect::<Result<Vec<_>, _>>()?;
    let min_detectable_epsilon = points
        .iter()
        .find(|p| p.significance >= DETECTION_SIGMAS)
        .map(|p| p.epsilon);
    let interpolated_threshold = points.windows(2).find_map(|w| {
        let (a, b) = (w[0], w[1]);
        (a.significance < DETECTION_SIGMAS && b.significance >= DETECTION_SIGMAS).then(|| {
            let t = (DETECTION_SIGMAS - a.significance) / (b.significance - a.significance);
            a.epsilon + t * (b.epsilon - a.epsilon)
        })
    });
    let interpolated_threshold = interpolated_threshold.or_else(|| {
        points
            .first()
            .filter(|p| p.significance >= DETECTION_SIGMAS)
            .map(|p| p.epsilon)
    });
    Ok(SweepReport {
        points,
        min_detectable_epsilon,
        interpolated_threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interferometer::PhaseElement;
    use crate::photonsim::NoiseModel;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    const V_APPARATUS: f64 = 0.9992774;

    fn pair(off: f64, on: f64) -> DetectorPair {
        DetectorPair {
            lc_off: Estimate::new(off, 0.002),
            lc_on: Estimate::new(on, 0.002),
        }
    }

    fn record(i: usize, d1: DetectorPair, d2: DetectorPair) -> RunRecord {
        RunRecord {
            run_index: i,
            d1: Some(d1),
            d2: Some(d2),
        }
    }

    pub(crate) fn apparatus(lc: PhaseVector) -> SagnacModel {
        SagnacModel::with_elements(
            V_APPARATUS,
            vec![
                PhaseElement::new("lc", lc, 1.0),
                PhaseElement::new("nim", PhaseVector::complex(-PI), 0.13f64.sqrt()),
            ],
        )
        .unwrap()
    }

    #[test]
    fn sample_stats_examples() {
        let s = SampleStats::from_values(&[0.0; 6]).unwrap();
        assert_eq!((s.mean, s.std, s.stderr), (0.0, 0.0, 0.0));
        let a = 0.003;
        let s = SampleStats::from_values(&[a, -a]).unwrap();
        assert_eq!(s.mean, 0.0);
        assert_abs_diff_eq!(s.std, a * 2f64.sqrt(), epsilon = 1e-18);
        assert!(SampleStats::from_values(&[1.0]).is_err());
    }

    #[test]
    fn delta_v_pools_detectors_and_skips_partial() {
        let records = vec![
            record(0, pair(0.04, 0.041), pair(0.04, 0.039)),
            record(1, pair(0.04, 0.04), pair(0.04, 0.04)),
            RunRecord {
                run_index: 2,
                d1: Some(pair(0.04, 0.5)),
                d2: None,
            },
        ];
        let s = delta_v_statistics(&records).unwrap();
        assert_eq!(s.n, 4);
        assert_abs_diff_eq!(s.mean, 0.0, epsilon = 1e-15);
        assert!(delta_v_statistics(&records[..1]).is_err());
        assert!(delta_v_statistics(&[]).is_err());
    }

    #[test]
    fn gamma_distribution_examples() {
        let same = vec![record(0, pair(0.04, 0.04), pair(0.05, 0.05)); 3];
        let g = gamma_ratio_distribution(&same).unwrap();
        assert!(g.ratios.iter().all(|&r| r == 1.0));
        assert!(!g.noncommutativity_detected());
        assert_eq!(g.significance(), 0.0);

        let single = vec![record(0, pair(0.042, 0.040), pair(0.042, 0.040))];
        let g = gamma_ratio_distribution(&single).unwrap();
        assert_abs_diff_eq!(g.ratios[0], 1.0000823, epsilon = 5e-7);

        let bad = vec![
            record(0, pair(1.0, 0.04), pair(0.04, 0.04)),
            record(1, pair(0.04, 0.04), pair(0.04, 0.04)),
        ];
        let g = gamma_ratio_distribution(&bad).unwrap();
        assert_eq!(g.excluded, 1);
        assert_eq!(g.ratios.len(), 3);
    }

    #[test]
    fn detection_threshold_definition() {
        // mean offset by 6 standard errors
        let mut records = Vec::new();
        for i in 0..50 {
            let jitter = if i % 2 == 0 { 0.0005 } else { -0.0005 };
            records.push(record(i, pair(0.04, 0.10 + jitter), pair(0.04, 0.10 - jitter)));
        }
        let g = gamma_ratio_distribution(&records).unwrap();
        assert!(g.noncommutativity_detected());
        assert!(g.significance() > DETECTION_SIGMAS);
    }

    #[test]
    fn per_point_sigma_linearization() {
        // for small V the ratio sigma is about V σ_ΔV with σ_ΔV = √2 σ
        for &v in &[0.01, 0.04, 0.08] {
            let sigma = 0.002;
            let r = gamma_ratio(Estimate::new(v, sigma), Estimate::new(v, sigma)).unwrap();
            let approx = v * sigma * 2f64.sqrt();
            assert!((r.sigma / approx - 1.0).abs() < 0.05, "V = {v}");
        }
    }

    #[test]
    fn histogram_counts_everything() {
        let values: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 1000) as f64 / 1000.0).collect();
        let h = histogram(&values, Binning::FreedmanDiaconis);
        assert_eq!(h.iter().map(|b| b.count).sum::<usize>(), 1000);
        // IQR = 0.4995, width = 2·0.4995/10 = 0.0999 = range/10 up to rounding
        assert!((10..=11).contains(&h.len()), "{}", h.len());
        let h = histogram(&values, Binning::Fixed(4));
        assert_eq!(h.len(), 4);
        assert!(h.iter().all(|b| b.count == 250));
        let h = histogram(&[2.0; 5], Binning::FreedmanDiaconis);
        assert_eq!(
            h,
            vec![HistogramBin {
                bin_center: 2.0,
                count: 5
            }]
        );
        assert!(histogram(&[], Binning::FreedmanDiaconis).is_empty());
    }

    #[test]
    fn degenerate_campaign_has_equal_thetas() {
        let records = vec![record(0, pair(0.04, 0.04), pair(0.04, 0.04)); 4];
        let b = bound_from_campaign(&records, &BoundOptions::default()).unwrap();
        assert_eq!(b.theta_central_deg, b.theta_conservative_deg);
        assert_eq!(b.n_values, 8);
        assert_eq!(b.delta_v_stderr, b.delta_v_std / (b.n_values as f64).sqrt());
    }

    #[test]
    fn lc_systematic_noiseless_is_zero() {
        let full = apparatus(PhaseVector::complex(PI));
        let lc_only = full.without("nim").unwrap();
        let off = lc_only.switched_off("lc").unwrap();
        let scan = ScanConfig {
            noise: NoiseModel::Expected,
            ..Default::default()
        };
        let records = run_campaign(&off, &lc_only, &scan, 5, 1).unwrap();
        let s = lc_systematic(&records).unwrap();
        assert_eq!(s.mean, 0.0);
        assert_eq!(s.std, 0.0);
    }

    #[test]
    fn lc_systematic_sees_injected_component() {
        let full = apparatus(PhaseVector::new(0.0, 0.3, 0.0));
        let lc_only = full.without("nim").unwrap();
        let off = lc_only.switched_off("lc").unwrap();
        let records = run_campaign(&off, &lc_only, &ScanConfig::default(), 10, 2).unwrap();
        let s = lc_systematic(&records).unwrap();
        let expected = lc_only.analytic_visibility() - off.analytic_visibility();
        assert!(expected > 0.1);
        assert!((s.mean - expected).abs() < 5.0 * s.stderr.max(1e-4));
    }

    #[test]
    fn swapping_detectors_preserves_statistics() {
        let on = apparatus(PhaseVector::complex(PI));
        let off = on.switched_off("lc").unwrap();
        let records = run_campaign(&off, &on, &ScanConfig::default(), 20, 4).unwrap();
        let swapped: Vec<_> = records.iter().map(RunRecord::swapped_detectors).collect();
        let a = delta_v_statistics(&records).unwrap();
        let b = delta_v_statistics(&swapped).unwrap();
        assert_abs_diff_eq!(a.mean.abs(), b.mean.abs(), epsilon = 1e-15);
        assert_abs_diff_eq!(a.std, b.std, epsilon = 1e-15);
    }

    #[test]
    fn zero_count_runs_become_partial_records() {
        let on = apparatus(PhaseVector::complex(PI));
        let off = on.switched_off("lc").unwrap();
        let scan = ScanConfig {
            mean_counts_per_step: 0.001,
            ..Default::default()
        };
        let records = run_campaign(&off, &on, &scan, 3, 0).unwrap();
        assert!(records.iter().all(|r| !r.is_complete()));
        assert!(delta_v_statistics(&records).is_err());
    }

    #[test]
    fn sweep_zero_epsilon_has_zero_significance() {
        let config = SweepConfig {
            model: apparatus(PhaseVector::complex(PI)),
            lc_label: "lc".into(),
            direction: PhaseVector::new(0.0, 1.0, 0.0),
            scan: ScanConfig::default(),
            n_runs: 10,
            master_seed: 3,
        };
        let p = sweep_point(&config, 0.0).unwrap();
        assert_eq!(p.gamma_shift, 0.0);
        assert_eq!(p.significance, 0.0);
        // defect 2: Γ_BOTH = -1, the largest possible shift, but Γ² = 1 so
        // the visibilities cannot see it
        let big = sweep_point(&config, PI / 2.0).unwrap();
        assert_abs_diff_eq!(big.gamma_shift, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(big.measurable_shift, 0.0, epsilon = 1e-12);
    }
}
