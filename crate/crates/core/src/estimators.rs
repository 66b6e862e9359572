//! Closed-form expectations of the wave model.
//!
//! Every value here is obtained by expanding the relevant intensity product
//! into terms, applying the coincidence rule branch by branch and substituting
//! the averaged phase moments (see [`crate::algebra`]). Nothing is hard-coded:
//! the ½ singles rate and the `−cos 2(θ₁−θ₂)` correlation fall out of the
//! term algebra.

use serde::{Deserialize, Serialize};

use crate::algebra::Expansion;
use crate::optics::{AnalyzerSetting, Port};
use crate::source::Side;

/// Detector pair `(side A port, side B port)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PortPair {
    pub side_a_port: Port,
    pub side_b_port: Port,
}

impl PortPair {
    pub const NN: PortPair = PortPair::new(Port::N, Port::N);
    pub const NP: PortPair = PortPair::new(Port::N, Port::P);
    pub const PN: PortPair = PortPair::new(Port::P, Port::N);
    pub const PP: PortPair = PortPair::new(Port::P, Port::P);
    /// Canonical order used for arrays of per-pair values.
    pub const ALL: [PortPair; 4] = [Self::NN, Self::NP, Self::PN, Self::PP];

    pub const fn new(side_a_port: Port, side_b_port: Port) -> Self {
        PortPair {
            side_a_port,
            side_b_port,
        }
    }

    pub fn index(self) -> usize {
        2 * self.side_a_port.index() + self.side_b_port.index()
    }

    /// Product of the ±1 outcomes: +1 for nn and pp, −1 for np and pn.
    pub fn sign(self) -> f64 {
        f64::from(self.side_a_port.outcome() * self.side_b_port.outcome())
    }

    pub fn label(self) -> &'static str {
        match (self.side_a_port, self.side_b_port) {
            (Port::N, Port::N) => "nn",
            (Port::N, Port::P) => "np",
            (Port::P, Port::N) => "pn",
            (Port::P, Port::P) => "pp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMethod {
    Analytic,
    MonteCarlo,
}

/// A correlation value with its uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_events: u64,
    pub method: EstimateMethod,
}

impl CorrelationEstimate {
    pub fn analytic(value: f64) -> Self {
        CorrelationEstimate {
            value,
            std_error: 0.0,
            n_events: 0,
            method: EstimateMethod::Analytic,
        }
    }
}

/// Mean detected intensity at one port. Depends only on that side's angle.
pub fn singles_mean(side: Side, port: Port, theta: f64) -> f64 {
    Expansion::port_intensity(side, port, theta).expectation()
}

/// `⟨I_n I_p⟩` on one side.
pub fn same_side_correlation(side: Side, theta: f64) -> f64 {
    Expansion::port_intensity(side, Port::N, theta)
        .product(&Expansion::port_intensity(side, Port::P, theta))
        .expectation()
}

pub(crate) fn joint_expansion(pair: PortPair, setting: &AnalyzerSetting) -> Expansion {
    Expansion::port_intensity(Side::A, pair.side_a_port, setting.theta1()).product(
        &Expansion::port_intensity(Side::B, pair.side_b_port, setting.theta2()),
    )
}

/// `⟨I_{1a} I_{2b}⟩` for one detector pair.
pub fn joint_correlation(pair: PortPair, setting: &AnalyzerSetting) -> f64 {
    joint_expansion(pair, setting).expectation()
}

/// Signed sum of the four joint correlations with `n ↦ +1`, `p ↦ −1`.
pub fn bell_correlation(setting: &AnalyzerSetting) -> f64 {
    PortPair::ALL
        .iter()
        .map(|&pair| pair.sign() * joint_correlation(pair, setting))
        .sum()
}

pub fn bell_estimate(setting: &AnalyzerSetting) -> CorrelationEstimate {
    CorrelationEstimate::analytic(bell_correlation(setting))
}

/// `⟨S⟩` with `S = I_n − I_p`.
pub fn s_function_mean(side: Side, theta: f64) -> f64 {
    Expansion::s_function(side, theta).expectation()
}

/// `⟨S²⟩`.
pub fn s_function_second_moment(side: Side, theta: f64) -> f64 {
    let s = Expansion::s_function(side, theta);
    s.product(&s).expectation()
}

/// `⟨S₁ S₂⟩`, an independent route to the Bell correlation.
pub fn s_function_correlation(setting: &AnalyzerSetting) -> f64 {
    Expansion::s_function(Side::A, setting.theta1())
        .product(&Expansion::s_function(Side::B, setting.theta2()))
        .expectation()
}
