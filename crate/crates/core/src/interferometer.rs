//! Sagnac interferometer nested in a Mach-Zehnder: port probabilities,
//! fringe visibilities, the commutativity factor Γ, and its phase equivalent θ.
//!
//! Amplitudes are quaternions. Operators act by left multiplication, so a
//! phase element applied after the beamsplitter reflection `r` contributes
//! `e · r`. The clockwise mode picks up the elements in list order, the
//! counter-clockwise mode in reverse order.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hypercomplex::{ordered_defect, qexp, AlgebraError, PhaseVector, Quaternion};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InterferometerError {
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("Sagnac visibility must lie in [0, 1], got {0}")]
    InvalidSagnacVisibility(f64),
    #[error("element `{label}`: amplitude transmission must lie in [0, 1], got {value}")]
    InvalidTransmission { label: String, value: f64 },
    #[error("element `{0}`: phase vector is not finite")]
    NonFinitePhase(String),
    #[error("no element labelled `{0}`")]
    UnknownElement(String),
    #[error("non-physical visibility pair: V_both = {v_both}, V_nim = {v_nim}")]
    NonPhysicalVisibility { v_both: f64, v_nim: f64 },
}

/// One phase-imparting optic inside the Sagnac loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseElement {
    pub label: String,
    pub phase: PhaseVector,
    pub amplitude_transmission: f64,
}

impl PhaseElement {
    pub fn new(label: impl Into<String>, phase: PhaseVector, amplitude_transmission: f64) -> Self {
        Self {
            label: label.into(),
            phase,
            amplitude_transmission,
        }
    }

    pub fn quaternion(&self) -> Quaternion {
        qexp(self.phase)
    }

    fn validate(&self) -> Result<(), InterferometerError> {
        if !(0.0..=1.0).contains(&self.amplitude_transmission) {
            return Err(InterferometerError::InvalidTransmission {
                label: self.label.clone(),
                value: self.amplitude_transmission,
            });
        }
        if !self.phase.is_finite() {
            return Err(InterferometerError::NonFinitePhase(self.label.clone()));
        }
        Ok(())
    }
}

/// Which elements take part in a Γ evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum ElementSelection {
    All,
    Labels(Vec<String>),
}

impl ElementSelection {
    pub fn labels<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::Labels(labels.into_iter().map(Into::into).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SagnacModel {
    visibility_v: f64,
    reflection: Quaternion,
    elements: Vec<PhaseElement>,
}

impl SagnacModel {
    /// The reflection unit must be a pure-imaginary unit quaternion (`r² = -1`),
    /// otherwise the beamsplitter is not unitary.
    pub fn new(
        visibility_v: f64,
        reflection: Quaternion,
        elements: Vec<PhaseElement>,
    ) -> Result<Self, InterferometerError> {
        if !(0.0..=1.0).contains(&visibility_v) {
            return Err(InterferometerError::InvalidSagnacVisibility(visibility_v));
        }
        reflection.ensure_pure_imaginary_unit()?;
        for e in &elements {
            e.validate()?;
        }
        Ok(Self {
            visibility_v,
            reflection,
            elements,
        })
    }

    /// Model with the standard `π/2` reflection phase (`r = i`).
    pub fn with_elements(visibility_v: f64, elements: Vec<PhaseElement>) -> Result<Self, InterferometerError> {
        Self::new(visibility_v, Quaternion::I, elements)
    }

    pub fn visibility_v(&self) -> f64 {
        self.visibility_v
    }

    pub fn reflection(&self) -> Quaternion {
        self.reflection
    }

    pub fn elements(&self) -> &[PhaseElement] {
        &self.elements
    }

    pub fn element(&self, label: &str) -> Option<&PhaseElement> {
        self.elements.iter().find(|e| e.label == label)
    }

    /// Same apparatus with the labelled element's phase set to zero. The
    /// element stays in the beam, so its transmission still applies.
    pub fn switched_off(&self, label: &str) -> Result<Self, InterferometerError> {
        let mut out = self.clone();
        let e = out
            .elements
            .iter_mut()
            .find(|e| e.label == label)
            .ok_or_else(|| InterferometerError::UnknownElement(label.to_string()))?;
        e.phase = PhaseVector::default();
        Ok(out)
    }

    /// Same apparatus with the labelled element physically removed.
    pub fn without(&self, label: &str) -> Result<Self, InterferometerError> {
        if self.element(label).is_none() {
            return Err(InterferometerError::UnknownElement(label.to_string()));
        }
        let mut out = self.clone();
        out.elements.retain(|e| e.label != label);
        Ok(out)
    }

    /// Replace the phase of the labelled element.
    pub fn with_phase(&self, label: &str, phase: PhaseVector) -> Result<Self, InterferometerError> {
        let mut out = self.clone();
        let e = out
            .elements
            .iter_mut()
            .find(|e| e.label == label)
            .ok_or_else(|| InterferometerError::UnknownElement(label.to_string()))?;
        e.phase = phase;
        if !phase.is_finite() {
            return Err(InterferometerError::NonFinitePhase(label.to_string()));
        }
        Ok(out)
    }

    /// Product of squared amplitude transmissions.
    pub fn intensity_transmission(&self) -> f64 {
        self.elements
            .iter()
            .map(|e| e.amplitude_transmission * e.amplitude_transmission)
            .product()
    }

    fn quaternions(&self, selection: &ElementSelection) -> Result<Vec<Quaternion>, InterferometerError> {
        match selection {
            ElementSelection::All => Ok(self.elements.iter().map(PhaseElement::quaternion).collect()),
            ElementSelection::Labels(labels) => {
                for l in labels {
                    if self.element(l).is_none() {
                        return Err(InterferometerError::UnknownElement(l.clone()));
                    }
                }
                Ok(self
                    .elements
                    .iter()
                    .filter(|e| labels.contains(&e.label))
                    .map(PhaseElement::quaternion)
                    .collect())
            }
        }
    }

    /// `|r P - Q r|` over all elements.
    pub fn defect(&self) -> f64 {
        let qs: Vec<_> = self.elements.iter().map(PhaseElement::quaternion).collect();
        ordered_defect(&qs, self.reflection)
    }

    /// Mach-Zehnder fringe visibility expected from this Sagnac configuration.
    pub fn analytic_visibility(&self) -> f64 {
        mz_visibility_from_ports(dark_port_prob(self))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PortProbabilities {
    pub p_bright: f64,
    pub p_dark: f64,
}

impl PortProbabilities {
    pub fn from_dark(p_dark: f64) -> Self {
        Self {
            p_bright: 1.0 - p_dark,
            p_dark,
        }
    }
}

/// A measured or derived quantity with its one-sigma uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub sigma: f64,
}

impl Estimate {
    pub const fn new(value: f64, sigma: f64) -> Self {
        Self { value, sigma }
    }

    pub const fn exact(value: f64) -> Self {
        Self { value, sigma: 0.0 }
    }
}

/// Fringe visibility with uncertainty.
pub type VisibilityValue = Estimate;

/// `¼ |r α β - β α r|²`, the dark-port probability of a perfect Sagnac.
pub fn dark_port_prob_ideal(alpha: Quaternion, beta: Quaternion, r: Quaternion) -> Result<f64, InterferometerError> {
    alpha.ensure_unit()?;
    beta.ensure_unit()?;
    let d = crate::hypercomplex::generalized_defect(alpha, beta, r)?;
    Ok(0.25 * d * d)
}

/// Quaternionic 2×2 density matrix over the (clockwise, counter-clockwise) modes,
/// `ρ_ab = ψ_a ψ̄_b`.
#[derive(Debug, Clone, Copy)]
struct ModeDensity([[Quaternion; 2]; 2]);

impl ModeDensity {
    fn pure(psi: [Quaternion; 2]) -> Self {
        let mut m = [[Quaternion::ZERO; 2]; 2];
        for (a, row) in m.iter_mut().enumerate() {
            for (b, cell) in row.iter_mut().enumerate() {
                *cell = psi[a] * psi[b].conj();
            }
        }
        Self(m)
    }

    fn scale_coherences(mut self, v: f64) -> Self {
        self.0[0][1] = self.0[0][1].scale(v);
        self.0[1][0] = self.0[1][0].scale(v);
        self
    }

    /// Probability of the output port whose amplitude is `u · ψ`.
    fn port_probability(&self, u: [Quaternion; 2]) -> f64 {
        let mut acc = Quaternion::ZERO;
        for a in 0..2 {
            for b in 0..2 {
                acc = acc + u[a] * self.0[a][b] * u[b].conj();
            }
        }
        acc.re()
    }
}

/// Explicit state propagation through the Sagnac loop, including the
/// decoherence that reduces the Sagnac visibility to `v`. Ground truth for
/// the closed forms.
pub fn propagate_state(model: &SagnacModel) -> PortProbabilities {
    let r = model.reflection;
    let qs: Vec<_> = model.elements.iter().map(PhaseElement::quaternion).collect();
    let forward = qs.iter().fold(Quaternion::ONE, |acc, &q| acc * q);
    let reverse = qs.iter().rev().fold(Quaternion::ONE, |acc, &q| acc * q);

    // after the first beamsplitter: (r|1,0> + |0,1>)/√2, then the phases
    let cw = (forward * r).scale(FRAC_1_SQRT_2);
    let ccw = reverse.scale(FRAC_1_SQRT_2);

    let rho = ModeDensity::pure([cw, ccw]).scale_coherences(model.visibility_v);

    let s = FRAC_1_SQRT_2;
    let bright = rho.port_probability([Quaternion::ONE.scale(s), r.scale(s)]);
    let dark = rho.port_probability([r.scale(s), Quaternion::ONE.scale(s)]);
    PortProbabilities {
        p_bright: bright,
        p_dark: dark,
    }
}

/// Closed-form `P_D = ½ - (v/2)(1 - |rP - Qr|²/2)`.
pub fn dark_port_prob(model: &SagnacModel) -> PortProbabilities {
    let d = model.defect();
    let p_dark = 0.5 - 0.5 * model.visibility_v * (1.0 - 0.5 * d * d);
    PortProbabilities::from_dark(p_dark)
}

/// `2 √(P_B P_D)`.
pub fn mz_visibility_from_ports(p: PortProbabilities) -> f64 {
    2.0 * (p.p_bright * p.p_dark).max(0.0).sqrt()
}

/// Count probability in the first Mach-Zehnder output port at stage phase `phi`.
pub fn mz_signal(phi: f64, visibility: f64) -> f64 {
    0.5 + 0.5 * visibility * phi.cos()
}

/// Γ = 1 - ½ |r P - Q r|² restricted to the selected elements.
pub fn gamma_of_model(model: &SagnacModel, selection: &ElementSelection) -> Result<f64, InterferometerError> {
    let qs = model.quaternions(selection)?;
    let d = ordered_defect(&qs, model.reflection);
    Ok(1.0 - 0.5 * d * d)
}

/// `Γ_BOTH / Γ_NIM = √((1 - V_BOTH²) / (1 - V_NIM²))` with first-order
/// propagation of the two independent visibility sigmas.
pub fn gamma_ratio(v_both: VisibilityValue, v_nim: VisibilityValue) -> Result<Estimate, InterferometerError> {
    let num = 1.0 - v_both.value * v_both.value;
    let den = 1.0 - v_nim.value * v_nim.value;
    if den <= 0.0 || num < 0.0 || !num.is_finite() || !den.is_finite() {
        return Err(InterferometerError::NonPhysicalVisibility {
            v_both: v_both.value,
            v_nim: v_nim.value,
        });
    }
    let ratio = (num / den).sqrt();
    if ratio == 0.0 {
        // V_BOTH = 1: derivative singular, report the value only
        return Ok(Estimate::new(0.0, f64::INFINITY));
    }
    let d_both = -v_both.value / (ratio * den);
    let d_nim = ratio * v_nim.value / den;
    let sigma = ((d_both * v_both.sigma).powi(2) + (d_nim * v_nim.sigma).powi(2)).sqrt();
    Ok(Estimate::new(ratio, sigma))
}

/// Effective clockwise/counter-clockwise phase implied by a Γ ratio, in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaBound {
    /// `acos(ratio)`
    pub central_deg: f64,
    /// `acos(ratio - sigma)`
    pub conservative_deg: f64,
}

pub fn theta_bound(ratio: Estimate) -> ThetaBound {
    let acos_deg = |x: f64| x.clamp(-1.0, 1.0).acos().to_degrees();
    ThetaBound {
        central_deg: acos_deg(ratio.value),
        conservative_deg: acos_deg(ratio.value - ratio.sigma.max(0.0)),
    }
}

/// Port probabilities when the two Sagnac modes differ by a plain phase `theta`.
pub fn sagnac_probs_theta(v: f64, theta: f64) -> PortProbabilities {
    let c = 0.5 * v * theta.cos();
    PortProbabilities {
        p_bright: 0.5 + c,
        p_dark: 0.5 - c,
    }
}

/// `√(1 - v² cos²θ)`.
pub fn mz_visibility_theta(v: f64, theta: f64) -> f64 {
    let c = v * theta.cos();
    (1.0 - c * c).max(0.0).sqrt()
}
