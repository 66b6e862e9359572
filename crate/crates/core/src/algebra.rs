//! Symbolic term algebra for intensity expectations.
//!
//! Port intensities, and products of them, are kept as explicit sums of terms.
//! Each term records which intensity factors multiply it, a numeric angular
//! coefficient, and the power of cos θ (θ the random relative phase) it carries.
//! Expectations are then formed in two steps:
//!
//! 1. **Coincidence rule.** For a given branch, a term is retained only if every
//!    intensity factor belongs to a photon-carrying component. Terms containing
//!    a vacuum intensity (½) describe firing of one detector or none and are
//!    dropped. Interference factors `√(I_H I_V)` always pair a photon component
//!    with a vacuum one and are retained.
//! 2. **Phase moments.** Powers of cos θ are replaced by their averages
//!    (`cos θ → 0`, `cos² θ → ½`), or for a single event by the sampled
//!    `cos² θ` with first powers still set to zero.

use std::fmt;

use crate::optics::Port;
use crate::source::{Branch, Polarization, Side};

/// Intensity-valued factor of a term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Factor {
    /// Mean intensity of one source component.
    Intensity(Side, Polarization),
    /// `√(I_H I_V)` of one beam.
    Interference(Side),
}

impl Factor {
    pub fn value(self, branch: Branch) -> f64 {
        match self {
            Factor::Intensity(side, pol) => branch.intensity(side, pol),
            Factor::Interference(side) => {
                (branch.intensity(side, Polarization::H) * branch.intensity(side, Polarization::V)).sqrt()
            }
        }
    }

    pub fn carries_photon(self, branch: Branch) -> bool {
        match self {
            Factor::Intensity(side, pol) => branch.carries_photon(side, pol),
            Factor::Interference(_) => true,
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let beam = |s: &Side| match s {
            Side::A => 1,
            Side::B => 2,
        };
        match self {
            Factor::Intensity(s, p) => write!(f, "I{}{:?}", beam(s), p),
            Factor::Interference(s) => write!(f, "sqrt(I{0}H I{0}V)", beam(s)),
        }
    }
}

/// How powers of cos θ are evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhaseMoments {
    /// Ensemble averages: 1, 0, ½ for powers 0, 1, 2.
    Averaged,
    /// One event at relative phase θ: 1, 0, cos²θ. First powers are averaged
    /// before the coincidence rule is applied, so they stay at zero.
    Sampled(f64),
}

impl PhaseMoments {
    pub fn moment(self, power: u8) -> f64 {
        match (self, power) {
            (_, 0) => 1.0,
            (_, 1) => 0.0,
            (PhaseMoments::Averaged, 2) => 0.5,
            (PhaseMoments::Sampled(theta), 2) => {
                let c = theta.cos();
                c * c
            }
            (_, p) => unreachable!("cos power {p} does not occur in products of two intensities"),
        }
    }
}

/// `coefficient · Π factors · cos^power θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub coefficient: f64,
    pub factors: Vec<Factor>,
    pub cos_power: u8,
}

impl Term {
    fn new(coefficient: f64, factors: Vec<Factor>, cos_power: u8) -> Self {
        Term {
            coefficient,
            factors,
            cos_power,
        }
    }

    pub fn factor_product(&self, branch: Branch) -> f64 {
        self.factors.iter().map(|f| f.value(branch)).product()
    }

    /// Whether the term can describe photon counts in every detector it spans.
    pub fn is_coincidence(&self, branch: Branch) -> bool {
        self.factors.iter().all(|f| f.carries_photon(branch))
    }

    pub fn value(&self, branch: Branch, moments: PhaseMoments) -> f64 {
        self.coefficient * self.factor_product(branch) * moments.moment(self.cos_power)
    }

    fn times(&self, other: &Term) -> Term {
        let mut factors = Vec::with_capacity(self.factors.len() + other.factors.len());
        factors.extend_from_slice(&self.factors);
        factors.extend_from_slice(&other.factors);
        Term::new(
            self.coefficient * other.coefficient,
            factors,
            self.cos_power + other.cos_power,
        )
    }
}

/// A sum of terms.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Expansion {
    terms: Vec<Term>,
}

impl Expansion {
    /// Beat-averaged intensity at one analyzer port. Side B carries the opposite
    /// interference sign because its composite phase is shifted by π.
    pub fn port_intensity(side: Side, port: Port, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        let sin2 = (2.0 * theta).sin();
        let side_sign = match side {
            Side::A => 1.0,
            Side::B => -1.0,
        };
        let (h_trig, v_trig, port_sign) = match port {
            Port::N => (c * c, s * s, 1.0),
            Port::P => (s * s, c * c, -1.0),
        };
        Expansion {
            terms: vec![
                Term::new(h_trig, vec![Factor::Intensity(side, Polarization::H)], 0),
                Term::new(v_trig, vec![Factor::Intensity(side, Polarization::V)], 0),
                Term::new(side_sign * port_sign * sin2, vec![Factor::Interference(side)], 1),
            ],
        }
    }

    /// `S = I_n − I_p` written directly as
    /// `(I_H − I_V) cos 2θ ± 2 √(I_H I_V) cos θ sin 2θ`.
    pub fn s_function(side: Side, theta: f64) -> Self {
        let (sin2, cos2) = (2.0 * theta).sin_cos();
        let side_sign = match side {
            Side::A => 1.0,
            Side::B => -1.0,
        };
        Expansion {
            terms: vec![
                Term::new(cos2, vec![Factor::Intensity(side, Polarization::H)], 0),
                Term::new(-cos2, vec![Factor::Intensity(side, Polarization::V)], 0),
                Term::new(side_sign * 2.0 * sin2, vec![Factor::Interference(side)], 1),
            ],
        }
    }

    pub fn product(&self, other: &Expansion) -> Expansion {
        let terms = self
            .terms
            .iter()
            .flat_map(|a| other.terms.iter().map(move |b| a.times(b)))
            .collect();
        Expansion { terms }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn retained(&self, branch: Branch) -> impl Iterator<Item = &Term> {
        self.terms.iter().filter(move |t| t.is_coincidence(branch))
    }

    pub fn dropped(&self, branch: Branch) -> impl Iterator<Item = &Term> {
        self.terms.iter().filter(move |t| !t.is_coincidence(branch))
    }

    /// Sum of retained terms for one branch.
    pub fn branch_value(&self, branch: Branch, moments: PhaseMoments) -> f64 {
        self.retained(branch).map(|t| t.value(branch, moments)).sum()
    }

    /// Sum of every term for one branch, ignoring the coincidence rule.
    pub fn raw_branch_value(&self, branch: Branch, moments: PhaseMoments) -> f64 {
        self.terms.iter().map(|t| t.value(branch, moments)).sum()
    }

    /// Two-branch average of the retained terms with averaged phase moments.
    pub fn expectation(&self) -> f64 {
        Branch::ALL
            .iter()
            .map(|&b| 0.5 * self.branch_value(b, PhaseMoments::Averaged))
            .sum()
    }

    /// Retained terms of one branch collected by cos-power: `[c0, c1, c2]`.
    pub fn phase_polynomial(&self, branch: Branch) -> [f64; 3] {
        let mut coeffs = [0.0; 3];
        for t in self.retained(branch) {
            coeffs[usize::from(t.cos_power)] += t.coefficient * t.factor_product(branch);
        }
        coeffs
    }
}
