//! Phase ↔ effective index conversion for a thin metamaterial slab.
//!
//! Single pass, no multiple reflections: a slab of index `n` and thickness
//! `d` shifts the phase by `(n - 1) 2π d / λ` relative to the air it displaces.
//! Negative phases are phase advances relative to air.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Three Ag/MgF2 pairs of 40 nm + 50 nm plus a 15 nm MgF2 cap.
pub const DEFAULT_THICKNESS_NM: f64 = 3.0 * (40.0 + 50.0) + 15.0;

/// Largest step between neighbouring unwrapped phases that is still
/// considered unambiguous.
pub const DEFAULT_AMBIGUITY_THRESHOLD: f64 = PI / 2.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetaOpticsError {
    #[error("slab thickness must be positive, got {0} nm")]
    InvalidThickness(f64),
    #[error("wavelength must be positive, got {0} nm")]
    InvalidWavelength(f64),
    #[error("wavelengths must be strictly increasing (position {0})")]
    NotIncreasing(usize),
    #[error("phase spectrum is empty")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlabSpec {
    pub thickness_nm: f64,
}

impl Default for SlabSpec {
    fn default() -> Self {
        Self {
            thickness_nm: DEFAULT_THICKNESS_NM,
        }
    }
}

impl SlabSpec {
    pub fn new(thickness_nm: f64) -> Result<Self, MetaOpticsError> {
        if !(thickness_nm > 0.0 && thickness_nm.is_finite()) {
            return Err(MetaOpticsError::InvalidThickness(thickness_nm));
        }
        Ok(Self { thickness_nm })
    }
}

fn check(lambda_nm: f64, slab: &SlabSpec) -> Result<(), MetaOpticsError> {
    if !(lambda_nm > 0.0 && lambda_nm.is_finite()) {
        return Err(MetaOpticsError::InvalidWavelength(lambda_nm));
    }
    if !(slab.thickness_nm > 0.0) {
        return Err(MetaOpticsError::InvalidThickness(slab.thickness_nm));
    }
    Ok(())
}

/// `n = 1 + Δφ λ / (2π d)`.
pub fn phase_to_index(delta_phi: f64, lambda_nm: f64, slab: &SlabSpec) -> Result<f64, MetaOpticsError> {
    check(lambda_nm, slab)?;
    Ok(1.0 + delta_phi * lambda_nm / (2.0 * PI * slab.thickness_nm))
}

/// `Δφ = (n - 1) 2π d / λ`.
pub fn index_to_phase(n: f64, lambda_nm: f64, slab: &SlabSpec) -> Result<f64, MetaOpticsError> {
    check(lambda_nm, slab)?;
    Ok((n - 1.0) * 2.0 * PI * slab.thickness_nm / lambda_nm)
}

/// Relative phase versus wavelength, strictly increasing in wavelength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpectrum {
    points: Vec<(f64, f64)>,
}

impl PhaseSpectrum {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, MetaOpticsError> {
        if points.is_empty() {
            return Err(MetaOpticsError::Empty);
        }
        for (i, &(l, _)) in points.iter().enumerate() {
            if !(l > 0.0) {
                return Err(MetaOpticsError::InvalidWavelength(l));
            }
            if i > 0 && l <= points[i - 1].0 {
                return Err(MetaOpticsError::NotIncreasing(i));
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Spectrum produced by an index curve, with phases wrapped into `(-π, π]`
    /// as a modulo-2π phase measurement would report them.
    pub fn from_index_curve(
        wavelengths: &[f64],
        index: impl Fn(f64) -> f64,
        slab: &SlabSpec,
    ) -> Result<Self, MetaOpticsError> {
        let points = wavelengths
            .iter()
            .map(|&l| Ok((l, wrap(index_to_phase(index(l), l, slab)?))))
            .collect::<Result<Vec<_>, MetaOpticsError>>()?;
        Self::new(points)
    }
}

/// Wrap a phase into `(-π, π]`.
pub fn wrap(phi: f64) -> f64 {
    let w = (phi + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexPoint {
    pub wavelength_nm: f64,
    pub unwrapped_phase: f64,
    pub index: f64,
    /// The step from the previous point exceeded the ambiguity threshold.
    pub ambiguous: bool,
}

/// Unwrap by nearest 2π branch (first point kept as given), then convert
/// each phase to an index.
pub fn index_spectrum(spectrum: &PhaseSpectrum, slab: &SlabSpec) -> Result<Vec<IndexPoint>, MetaOpticsError> {
    index_spectrum_with_threshold(spectrum, slab, DEFAULT_AMBIGUITY_THRESHOLD)
}

pub fn index_spectrum_with_threshold(
    spectrum: &PhaseSpectrum,
    slab: &SlabSpec,
    ambiguity_threshold: f64,
) -> Result<Vec<IndexPoint>, MetaOpticsError> {
    let mut out: Vec<IndexPoint> = Vec::with_capacity(spectrum.points.len());
    for &(lambda, raw) in &spectrum.points {
        let (phase, ambiguous) = match out.last() {
            None => (raw, false),
            Some(prev) => {
                let turns = ((prev.unwrapped_phase - raw) / (2.0 * PI)).round();
                let phase = raw + 2.0 * PI * turns;
                (phase, (phase - prev.unwrapped_phase).abs() > ambiguity_threshold)
            }
        };
        out.push(IndexPoint {
            wavelength_nm: lambda,
            unwrapped_phase: phase,
            index: phase_to_index(phase, lambda, slab)?,
            ambiguous,
        });
    }
    Ok(out)
}

/// Wavelengths where the index changes sign, by linear interpolation.
pub fn zero_crossings(points: &[IndexPoint]) -> Vec<f64> {
    points
        .windows(2)
        .filter_map(|w| {
            let (a, b) = (w[0], w[1]);
            if a.index == 0.0 {
                Some(a.wavelength_nm)
            } else if a.index.signum() != b.index.signum() && b.index != 0.0 {
                let t = a.index / (a.index - b.index);
                Some(a.wavelength_nm + t * (b.wavelength_nm - a.wavelength_nm))
            } else {
                None
            }
        })
        .chain(
            points
                .last()
                .filter(|p| p.index == 0.0 && points.len() > 1)
                .map(|p| p.wavelength_nm),
        )
        .collect()
}
