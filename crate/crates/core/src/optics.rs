//! Analyzer geometry and intensity formation.
//!
//! Each analyzer is an ideal polarizing beam splitter rotated by θ from the
//! source H axis, with transmitted port `n` and reflected port `p`. Two paths
//! produce port intensities: the full optical-frequency field
//! ([`instantaneous_intensity`]), and the short-time-averaged form in which only
//! the slow beat between the H and V components survives
//! ([`beat_averaged_intensities`]). The first exists to check the second.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ModelError, Result};
use crate::source::{
    derive_beam2_frequencies, derive_beam2_phases, BeamIntensities, EmissionEvent, Side,
    SourceConstraints, WaveComponent,
};

/// Analyzer output port: `n` transmits along n̂, `p` reflects along p̂.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Port {
    N,
    P,
}

impl Port {
    pub const ALL: [Port; 2] = [Port::N, Port::P];

    /// ±1 outcome convention: `n` ↦ +1, `p` ↦ −1.
    pub fn outcome(self) -> i8 {
        match self {
            Port::N => 1,
            Port::P => -1,
        }
    }

    pub fn other(self) -> Port {
        match self {
            Port::N => Port::P,
            Port::P => Port::N,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Port::N => 0,
            Port::P => 1,
        }
    }
}

/// Maps an analyzer angle onto the polarizer period `[0, π)`.
pub fn canonical_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(PI);
    if r >= PI {
        0.0
    } else {
        r
    }
}

/// Analyzer angles (radians) for side A (θ₁) and side B (θ₂), stored in `[0, π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyzerSetting {
    theta1: f64,
    theta2: f64,
}

impl AnalyzerSetting {
    pub fn new(theta1: f64, theta2: f64) -> Result<Self> {
        ensure_finite("theta1", theta1)?;
        ensure_finite("theta2", theta2)?;
        Ok(AnalyzerSetting {
            theta1: canonical_angle(theta1),
            theta2: canonical_angle(theta2),
        })
    }

    pub fn from_degrees(theta1: f64, theta2: f64) -> Result<Self> {
        Self::new(theta1.to_radians(), theta2.to_radians())
    }

    /// Setting with θ₁ = `theta1` and θ₂ = θ₁ − `delta`.
    pub fn with_delta(theta1: f64, delta: f64) -> Result<Self> {
        Self::new(theta1, theta1 - delta)
    }

    pub fn theta1(&self) -> f64 {
        self.theta1
    }

    pub fn theta2(&self) -> f64 {
        self.theta2
    }

    pub fn theta(&self, side: Side) -> f64 {
        match side {
            Side::A => self.theta1,
            Side::B => self.theta2,
        }
    }

    /// θ₁ − θ₂.
    pub fn delta(&self) -> f64 {
        self.theta1 - self.theta2
    }
}

/// The four analyzer-output intensities, units of hν.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntensityQuad {
    pub i1n: f64,
    pub i1p: f64,
    pub i2n: f64,
    pub i2p: f64,
}

impl IntensityQuad {
    pub fn get(&self, side: Side, port: Port) -> f64 {
        match (side, port) {
            (Side::A, Port::N) => self.i1n,
            (Side::A, Port::P) => self.i1p,
            (Side::B, Port::N) => self.i2n,
            (Side::B, Port::P) => self.i2p,
        }
    }

    fn max_abs_diff(&self, other: &IntensityQuad) -> f64 {
        [
            self.i1n - other.i1n,
            self.i1p - other.i1p,
            self.i2n - other.i2n,
            self.i2p - other.i2p,
        ]
        .iter()
        .fold(0.0_f64, |m, d| m.max(d.abs()))
    }
}

/// Space-time point at which a field is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldProbe {
    pub time: f64,
    pub position: f64,
}

/// Transmit and reflect unit vectors `(n̂, p̂)` of an analyzer at `theta`.
pub fn analyzer_axes(theta: f64) -> ([f64; 2], [f64; 2]) {
    let (s, c) = theta.sin_cos();
    ([c, s], [-s, c])
}

/// Projects the field `(u_H, u_V)` onto the analyzer axes: `(U_n, U_p)`.
pub fn project_amplitudes(u_h: f64, u_v: f64, theta: f64) -> (f64, f64) {
    let (n, p) = analyzer_axes(theta);
    (u_h * n[0] + u_v * n[1], u_h * p[0] + u_v * p[1])
}

/// The H and V wave components of one beam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamWaves {
    pub h: WaveComponent,
    pub v: WaveComponent,
}

impl BeamWaves {
    fn composite_phase(&self, position: f64) -> f64 {
        self.h.phase() - self.v.phase()
            + TAU * position * (self.h.inverse_wavelength() - self.v.inverse_wavelength())
    }

    fn beat_frequency(&self) -> f64 {
        self.h.angular_frequency() - self.v.angular_frequency()
    }
}

/// Instantaneous intensity at one analyzer port, before any time averaging:
/// the squared projection of the full cosine fields, cross term included.
pub fn instantaneous_intensity(beam: &BeamWaves, port: Port, theta: f64, probe: FieldProbe) -> f64 {
    let h = beam.h.field(probe.time, probe.position);
    let v = beam.v.field(probe.time, probe.position);
    let (s, c) = theta.sin_cos();
    let sin2 = (2.0 * theta).sin();
    match port {
        Port::N => h * h * c * c + v * v * s * s + h * v * sin2,
        Port::P => h * h * s * s + v * v * c * c - h * v * sin2,
    }
}

// Port intensities given beam intensities and the value of the beat cosine for
// beam 1. Beam 2's composite phase is shifted by π, which flips its sign.
fn quad_from_beat_cosine(i: &BeamIntensities, setting: &AnalyzerSetting, cos_beat: f64) -> IntensityQuad {
    let (s1, c1) = setting.theta1().sin_cos();
    let (s2, c2) = setting.theta2().sin_cos();
    let sin2_1 = (2.0 * setting.theta1()).sin();
    let sin2_2 = (2.0 * setting.theta2()).sin();
    let x1 = (i.i1h * i.i1v).sqrt() * cos_beat * sin2_1;
    let x2 = (i.i2h * i.i2v).sqrt() * cos_beat * sin2_2;
    IntensityQuad {
        i1n: i.i1h * c1 * c1 + i.i1v * s1 * s1 + x1,
        i1p: i.i1h * s1 * s1 + i.i1v * c1 * c1 - x1,
        i2n: i.i2h * c2 * c2 + i.i2v * s2 * s2 - x2,
        i2p: i.i2h * s2 * s2 + i.i2v * c2 * c2 + x2,
    }
}

/// Four port intensities of one event with optical-frequency terms averaged
/// out, evaluated at the event's relative phase.
pub fn beat_averaged_intensities(event: &EmissionEvent, setting: &AnalyzerSetting) -> IntensityQuad {
    quad_from_beat_cosine(&event.intensities(), setting, event.relative_phase().cos())
}

/// Full wave description of an event: four components consistent with the
/// source constraints and with the event's intensities and relative phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveSet {
    pub beam1: BeamWaves,
    pub beam2: BeamWaves,
    pub position: f64,
}

impl WaveSet {
    /// Builds the components. θ₁V comes from `source`; θ₁H is chosen so that the
    /// beam-1 composite phase at t = 0 equals the event's relative phase. Beam 2
    /// follows from phase matching and energy conservation.
    pub fn new(source: &SourceConstraints, event: &EmissionEvent) -> Result<Self> {
        let (w1h, w1v) = source.beam1_frequencies;
        let (w2h, w2v) = derive_beam2_frequencies(source)?;
        let x = source.detector_distance;
        let i = event.intensities();

        let theta1v = source.beam1_phases.1;
        let inv = |w: f64| w / (TAU * crate::source::SPEED_OF_LIGHT);
        let path = TAU * x * (inv(w1h) - inv(w1v));
        let theta1h = theta1v + event.relative_phase() - path;
        let matched = SourceConstraints {
            beam1_phases: (theta1h, theta1v),
            ..source.clone()
        };
        let (theta2h, theta2v) = derive_beam2_phases(&matched)?;

        Ok(WaveSet {
            beam1: BeamWaves {
                h: WaveComponent::from_intensity(i.i1h, theta1h, w1h)?,
                v: WaveComponent::from_intensity(i.i1v, theta1v, w1v)?,
            },
            beam2: BeamWaves {
                h: WaveComponent::from_intensity(i.i2h, theta2h, w2h)?,
                v: WaveComponent::from_intensity(i.i2v, theta2v, w2v)?,
            },
            position: x,
        })
    }

    fn components(&self) -> [(&'static str, &WaveComponent); 4] {
        [
            ("1H", &self.beam1.h),
            ("1V", &self.beam1.v),
            ("2H", &self.beam2.h),
            ("2V", &self.beam2.v),
        ]
    }

    pub fn beam(&self, side: Side) -> &BeamWaves {
        match side {
            Side::A => &self.beam1,
            Side::B => &self.beam2,
        }
    }
}

/// Minimum number of optical periods in a time-average check.
pub const MIN_AVERAGING_PERIODS: u32 = 100;

const SAMPLES_PER_PERIOD: usize = 8;
const WHOLE_PERIOD_TOLERANCE: f64 = 1e-6;

/// Numerically averages [`instantaneous_intensity`] over `n_periods` whole
/// periods of the 1V component, for all four ports, and returns the largest
/// deviation from the beat-averaged intensities.
///
/// The reference keeps the slow beat term averaged over the same window; with
/// degenerate frequencies it is exactly [`beat_averaged_intensities`]. The
/// window must span a whole number of periods of every component, otherwise the
/// optical-frequency terms do not average out and the call fails.
pub fn time_average_check(
    source: &SourceConstraints,
    event: &EmissionEvent,
    setting: &AnalyzerSetting,
    n_periods: u32,
) -> Result<f64> {
    if n_periods < MIN_AVERAGING_PERIODS {
        return Err(ModelError::InvalidConfig(format!(
            "time average needs at least {MIN_AVERAGING_PERIODS} periods, got {n_periods}"
        )));
    }
    let waves = WaveSet::new(source, event)?;
    let reference_frequency = waves.beam1.v.angular_frequency();
    let window = f64::from(n_periods) * TAU / reference_frequency;

    let mut max_periods = 0.0_f64;
    for (name, c) in waves.components() {
        let periods = c.angular_frequency() * window / TAU;
        if (periods - periods.round()).abs() > WHOLE_PERIOD_TOLERANCE {
            return Err(ModelError::PartialPeriod {
                component: name,
                periods,
            });
        }
        max_periods = max_periods.max(periods.round());
    }

    // Uniform rule over whole periods: exact for every harmonic below `samples`.
    let samples = SAMPLES_PER_PERIOD * max_periods as usize;
    let dt = window / samples as f64;
    let mut sums = [0.0_f64; 4];
    for k in 0..samples {
        let probe = FieldProbe {
            time: k as f64 * dt,
            position: waves.position,
        };
        for (slot, (side, port)) in QUAD_ORDER.iter().enumerate() {
            sums[slot] += instantaneous_intensity(waves.beam(*side), *port, setting.theta(*side), probe);
        }
    }
    let numeric = IntensityQuad {
        i1n: sums[0] / samples as f64,
        i1p: sums[1] / samples as f64,
        i2n: sums[2] / samples as f64,
        i2p: sums[3] / samples as f64,
    };

    let beat = waves.beam1.beat_frequency();
    let phase0 = waves.beam1.composite_phase(waves.position);
    let cos_beat = if beat == 0.0 {
        phase0.cos()
    } else {
        ((phase0 + beat * window).sin() - phase0.sin()) / (beat * window)
    };
    let reference = quad_from_beat_cosine(&event.intensities(), setting, cos_beat);
    Ok(numeric.max_abs_diff(&reference))
}

const QUAD_ORDER: [(Side, Port); 4] = [
    (Side::A, Port::N),
    (Side::A, Port::P),
    (Side::B, Port::N),
    (Side::B, Port::P),
];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::Branch;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

    fn dimensionless_source(omega: f64) -> SourceConstraints {
        SourceConstraints {
            pump_frequency: 2.0 * omega,
            beam1_frequencies: (omega, omega),
            detector_distance: 0.25,
            ..SourceConstraints::default()
        }
    }

    #[test]
    fn axes_at_zero_and_right_angle() {
        assert_eq!(analyzer_axes(0.0), ([1.0, 0.0], [-0.0, 1.0]));
        let (n, p) = analyzer_axes(FRAC_PI_2);
        assert!((n[0]).abs() < 1e-16 && (n[1] - 1.0).abs() < 1e-16);
        assert!((p[0] + 1.0).abs() < 1e-16 && p[1].abs() < 1e-16);
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project_amplitudes(1.0, 0.0, 0.0), (1.0, 0.0));
        let (un, up) = project_amplitudes(1.0, 1.0, FRAC_PI_4);
        assert!((un - SQRT_2).abs() < 1e-15);
        assert!(up.abs() < 1e-15);
    }

    #[test]
    fn instantaneous_at_zero_angle_is_h_only() {
        let h = WaveComponent::new(1.3, 0.4, 2.0, 0.1).unwrap();
        let v = WaveComponent::new(0.7, 1.1, 2.0, 0.1).unwrap();
        let beam = BeamWaves { h, v };
        for k in 0..50 {
            let probe = FieldProbe { time: 0.13 * k as f64, position: 0.3 };
            let arg = h.argument(probe.time, probe.position);
            let expected = 1.3 * 1.3 * arg.cos().powi(2);
            assert!((instantaneous_intensity(&beam, Port::N, 0.0, probe) - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn cross_term_vanishes_at_right_angle() {
        let h = WaveComponent::new(1.0, 0.2, 3.0, 0.0).unwrap();
        let v = WaveComponent::new(0.5, 2.2, 3.0, 0.0).unwrap();
        let beam = BeamWaves { h, v };
        for k in 0..50 {
            let probe = FieldProbe { time: 0.07 * k as f64, position: 0.0 };
            let vf = v.field(probe.time, 0.0);
            let got = instantaneous_intensity(&beam, Port::N, FRAC_PI_2, probe);
            assert!((got - vf * vf).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_angle_recovers_source_intensities() {
        let setting = AnalyzerSetting::new(0.0, 0.0).unwrap();
        for phase in [0.0, 1.0, 2.5, 4.0] {
            let q = beat_averaged_intensities(&EmissionEvent::new(Branch::Pair1H2V, phase), &setting);
            assert_eq!((q.i1n, q.i1p), (1.0, 0.5));
        }
    }

    #[test]
    fn quarter_angle_quadrature_phase() {
        let setting = AnalyzerSetting::new(FRAC_PI_4, 0.0).unwrap();
        let q = beat_averaged_intensities(&EmissionEvent::new(Branch::Pair1H2V, FRAC_PI_2), &setting);
        assert!((q.i1n - 0.75).abs() < 1e-15);
        assert!((q.i1p - 0.75).abs() < 1e-15);
    }

    #[test]
    fn quadrature_phase_is_malus_without_interference() {
        let setting = AnalyzerSetting::new(0.3, 1.1).unwrap();
        let e = EmissionEvent::new(Branch::Pair1V2H, FRAC_PI_2);
        let q = beat_averaged_intensities(&e, &setting);
        let (c1, s1) = (0.3f64.cos(), 0.3f64.sin());
        let (c2, s2) = (1.1f64.cos(), 1.1f64.sin());
        assert!((q.i1n - (0.5 * c1 * c1 + s1 * s1)).abs() < 1e-15);
        assert!((q.i2p - (s2 * s2 + 0.5 * c2 * c2)).abs() < 1e-15);
    }

    #[test]
    fn time_average_degenerate_and_zero_angle() {
        let source = dimensionless_source(3.0);
        let event = EmissionEvent::new(Branch::Pair1H2V, 0.9);
        let setting = AnalyzerSetting::new(0.0, 0.0).unwrap();
        assert!(time_average_check(&source, &event, &setting, 200).unwrap() <= 1e-12);
        let setting = AnalyzerSetting::new(0.4, 1.2).unwrap();
        assert!(time_average_check(&source, &event, &setting, 1000).unwrap() <= 1e-9);
    }

    #[test]
    fn time_average_detuned_commensurate_window() {
        // ω₁H/ω₁V = 1007/1000: 0.7 % spread, window of 1000 periods of 1V.
        let source = SourceConstraints {
            pump_frequency: 4.014,
            beam1_frequencies: (2.014, 2.0),
            detector_distance: 0.5,
            ..SourceConstraints::default()
        };
        let event = EmissionEvent::new(Branch::Pair1V2H, 2.2);
        let setting = AnalyzerSetting::new(0.7, 0.2).unwrap();
        assert!(time_average_check(&source, &event, &setting, 1000).unwrap() <= 1e-6);
    }

    #[test]
    fn time_average_rejects_partial_periods() {
        let source = SourceConstraints {
            pump_frequency: 4.01,
            beam1_frequencies: (2.0 * 1.0012345, 2.0),
            ..SourceConstraints::default()
        };
        let event = EmissionEvent::new(Branch::Pair1H2V, 0.3);
        let setting = AnalyzerSetting::new(0.5, 0.1).unwrap();
        assert!(matches!(
            time_average_check(&source, &event, &setting, 100),
            Err(ModelError::PartialPeriod { .. })
        ));
        assert!(time_average_check(&dimensionless_source(1.0), &event, &setting, 10).is_err());
    }

    #[test]
    fn quarter_angle_extremes() {
        let setting = AnalyzerSetting::new(FRAC_PI_4, FRAC_PI_4).unwrap();
        let hi = beat_averaged_intensities(&EmissionEvent::new(Branch::Pair1H2V, 0.0), &setting);
        let lo = beat_averaged_intensities(&EmissionEvent::new(Branch::Pair1H2V, PI), &setting);
        assert!((hi.i1n - (0.75 + 1.0 / SQRT_2)).abs() < 1e-15);
        assert!((lo.i1n - (0.75 - 1.0 / SQRT_2)).abs() < 1e-15);
        assert!((hi.i2n - (0.75 - 1.0 / SQRT_2)).abs() < 1e-15);
    }

    #[test]
    fn setting_is_canonical() {
        let s = AnalyzerSetting::new(PI + 0.25, -0.5).unwrap();
        assert!((s.theta1() - 0.25).abs() < 1e-15);
        assert!((s.theta2() - (PI - 0.5)).abs() < 1e-15);
        assert!(AnalyzerSetting::new(f64::INFINITY, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn axes_orthonormal(theta in -20.0f64..20.0) {
            let (n, p) = analyzer_axes(theta);
            prop_assert!((n[0] * n[0] + n[1] * n[1] - 1.0).abs() < 1e-15);
            prop_assert!((p[0] * p[0] + p[1] * p[1] - 1.0).abs() < 1e-15);
            prop_assert!((n[0] * p[0] + n[1] * p[1]).abs() < 1e-15);
            prop_assert!((n[0] - theta.cos()).abs() < 1e-15);
        }

        #[test]
        fn projection_preserves_power(uh in -10.0f64..10.0, uv in -10.0f64..10.0, theta in -7.0f64..7.0) {
            let (un, up) = project_amplitudes(uh, uv, theta);
            prop_assert!((un * un + up * up - (uh * uh + uv * uv)).abs() <= 1e-12);
        }

        #[test]
        fn total_intensity_conserved(phase in 0.0f64..TAU, t1 in -4.0f64..4.0, t2 in -4.0f64..4.0, h in any::<bool>()) {
            let branch = if h { Branch::Pair1H2V } else { Branch::Pair1V2H };
            let q = beat_averaged_intensities(&EmissionEvent::new(branch, phase), &AnalyzerSetting::new(t1, t2).unwrap());
            prop_assert!((q.i1n + q.i1p - 1.5).abs() <= 1e-12);
            prop_assert!((q.i2n + q.i2p - 1.5).abs() <= 1e-12);
            for v in [q.i1n, q.i1p, q.i2n, q.i2p] {
                prop_assert!((-1e-12..=1.5 + 1e-12).contains(&v));
            }
        }
    }
}
