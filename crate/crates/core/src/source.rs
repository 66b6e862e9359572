//! Down-conversion source with compensator: wave components, phase-matching and
//! energy-conservation constraints, and per-event emission sampling.
//!
//! Intensities are expressed in units of the photon energy hν. A beam component
//! carrying the photon has intensity 1, the orthogonal photon-empty (vacuum)
//! component has intensity ½.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ModelError, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Intensity of a photon-carrying wave pulse (units of hν).
pub const PHOTON_INTENSITY: f64 = 1.0;

/// Intensity of a photon-empty wave (units of hν).
pub const VACUUM_INTENSITY: f64 = 0.5;

/// Largest relative frequency spread between the beams expected from the source.
pub const MAX_FRACTIONAL_DETUNING: f64 = 0.007;

/// Absolute tolerance on the waveplate condition Δ₂H − Δ₂V = π.
pub const WAVEPLATE_TOLERANCE: f64 = 1e-12;

/// Relative tolerance (in units of the pump frequency) for frequency identities.
pub const FREQUENCY_TOLERANCE: f64 = 1e-12;

/// Maps an angle onto `[0, 2π)`.
pub fn normalize_phase(phase: f64) -> f64 {
    let r = phase.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Maps an angle onto `(-π, π]`.
pub fn wrap_phase(phase: f64) -> f64 {
    let r = normalize_phase(phase);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Measurement side: analyzer A sits in beam 1, analyzer B in beam 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

/// Source polarization axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
}

/// One polarization component of a beam: `|u| cos(phase + ωt + 2πx/λ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveComponent {
    magnitude: f64,
    phase: f64,
    angular_frequency: f64,
    inverse_wavelength: f64,
}

impl WaveComponent {
    pub fn new(
        magnitude: f64,
        phase: f64,
        angular_frequency: f64,
        inverse_wavelength: f64,
    ) -> Result<Self> {
        ensure_finite("magnitude", magnitude)?;
        ensure_finite("phase", phase)?;
        ensure_finite("angular_frequency", angular_frequency)?;
        ensure_finite("inverse_wavelength", inverse_wavelength)?;
        if magnitude < 0.0 {
            return Err(ModelError::InvalidConfig(format!(
                "wave magnitude must be non-negative, got {magnitude}"
            )));
        }
        Ok(WaveComponent {
            magnitude,
            phase: normalize_phase(phase),
            angular_frequency,
            inverse_wavelength,
        })
    }

    /// Component whose short-time-averaged intensity `|u|²/2` equals `intensity`,
    /// with the free-space wavelength implied by its frequency.
    pub fn from_intensity(intensity: f64, phase: f64, angular_frequency: f64) -> Result<Self> {
        ensure_finite("intensity", intensity)?;
        if intensity < 0.0 {
            return Err(ModelError::InvalidConfig(format!(
                "intensity must be non-negative, got {intensity}"
            )));
        }
        Self::new(
            (2.0 * intensity).sqrt(),
            phase,
            angular_frequency,
            angular_frequency / (TAU * SPEED_OF_LIGHT),
        )
    }

    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn angular_frequency(&self) -> f64 {
        self.angular_frequency
    }

    pub fn inverse_wavelength(&self) -> f64 {
        self.inverse_wavelength
    }

    /// Short-time-averaged intensity `|u|²/2`.
    pub fn mean_intensity(&self) -> f64 {
        0.5 * self.magnitude * self.magnitude
    }

    /// Full cosine argument `phase + ωt + 2πx/λ`.
    pub fn argument(&self, time: f64, position: f64) -> f64 {
        self.phase + self.angular_frequency * time + TAU * position * self.inverse_wavelength
    }

    /// Instantaneous field value.
    pub fn field(&self, time: f64, position: f64) -> f64 {
        self.magnitude * self.argument(time, position).cos()
    }
}

/// Source parameters: phase-matching constant, waveplate shifts, pump and beam-1
/// frequencies, beam-1 phases and the common detector distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceConstraints {
    pub const_sum: f64,
    pub delta_2h: f64,
    pub delta_2v: f64,
    pub pump_frequency: f64,
    /// (θ₁H, θ₁V)
    pub beam1_phases: (f64, f64),
    /// (ω₁H, ω₁V)
    pub beam1_frequencies: (f64, f64),
    pub detector_distance: f64,
    /// Enforce Δ₂H − Δ₂V = π.
    pub entangled_source: bool,
}

impl Default for SourceConstraints {
    /// Degenerate 405 nm pumped source with the waveplate set for Δ₂H − Δ₂V = π.
    fn default() -> Self {
        let pump = TAU * SPEED_OF_LIGHT / 405e-9;
        SourceConstraints {
            const_sum: 0.0,
            delta_2h: PI,
            delta_2v: 0.0,
            pump_frequency: pump,
            beam1_phases: (0.0, 0.0),
            beam1_frequencies: (0.5 * pump, 0.5 * pump),
            detector_distance: 1.0,
            entangled_source: true,
        }
    }
}

impl SourceConstraints {
    /// Sets beam-1 frequencies to `ω_p/2 · (1 ± d)`.
    pub fn with_fractional_detuning(mut self, detuning: f64) -> Self {
        let half = 0.5 * self.pump_frequency;
        self.beam1_frequencies = (half * (1.0 + detuning), half * (1.0 - detuning));
        self
    }

    /// `|ω₁H − ω₁V| / (ω₁H + ω₁V)`: deviation of each beam-1 frequency from
    /// their mean, relative to that mean.
    pub fn fractional_detuning(&self) -> f64 {
        let (h, v) = self.beam1_frequencies;
        (h - v).abs() / (h + v)
    }

    fn check_finite(&self) -> Result<()> {
        ensure_finite("const_sum", self.const_sum)?;
        ensure_finite("delta_2h", self.delta_2h)?;
        ensure_finite("delta_2v", self.delta_2v)?;
        ensure_finite("pump_frequency", self.pump_frequency)?;
        ensure_finite("theta_1h", self.beam1_phases.0)?;
        ensure_finite("theta_1v", self.beam1_phases.1)?;
        ensure_finite("omega_1h", self.beam1_frequencies.0)?;
        ensure_finite("omega_1v", self.beam1_frequencies.1)?;
        ensure_finite("detector_distance", self.detector_distance)?;
        Ok(())
    }

    /// Residual of the waveplate condition, wrapped to `(-π, π]`.
    pub fn waveplate_residual(&self) -> f64 {
        wrap_phase(self.delta_2h - self.delta_2v - PI)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Warn,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintCheck {
    pub name: &'static str,
    pub status: CheckStatus,
    pub residual: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<ConstraintCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn check(&self, name: &str) -> Option<&ConstraintCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConstraintCheck> {
        self.checks.iter().filter(|c| c.status == CheckStatus::Fail)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &ConstraintCheck> {
        self.checks.iter().filter(|c| c.status == CheckStatus::Warn)
    }
}

fn check(name: &'static str, ok: bool, residual: f64, detail: String) -> ConstraintCheck {
    ConstraintCheck {
        name,
        status: if ok { CheckStatus::Pass } else { CheckStatus::Fail },
        residual,
        detail,
    }
}

/// Evaluates every source constraint. Violations are reported, not raised; only
/// non-finite inputs are an error.
pub fn validate_constraints(c: &SourceConstraints) -> Result<ValidationReport> {
    c.check_finite()?;
    let mut checks = Vec::with_capacity(7);
    let pump = c.pump_frequency;
    let freq_tol = FREQUENCY_TOLERANCE * pump.abs().max(1.0);

    let waveplate = c.waveplate_residual();
    let waveplate_ok = !c.entangled_source || waveplate.abs() <= WAVEPLATE_TOLERANCE;
    checks.push(check(
        "waveplate_shift",
        waveplate_ok,
        waveplate.abs(),
        format!(
            "delta_2h - delta_2v = {:.15} (target pi{})",
            c.delta_2h - c.delta_2v,
            if c.entangled_source { "" } else { ", not enforced" }
        ),
    ));

    let (th1h, th1v) = c.beam1_phases;
    let th2h = c.const_sum + c.delta_2h - th1v;
    let th2v = c.const_sum + c.delta_2v - th1h;
    let phase_residual = wrap_phase((th2h - th2v) - (th1h - th1v) - (c.delta_2h - c.delta_2v));
    checks.push(check(
        "phase_difference",
        phase_residual.abs() <= WAVEPLATE_TOLERANCE,
        phase_residual.abs(),
        format!("theta_2h - theta_2v = {:.15}", th2h - th2v),
    ));

    let (w1h, w1v) = c.beam1_frequencies;
    let range_excess = [w1h, w1v]
        .iter()
        .map(|&w| (-w).max(w - pump).max(0.0))
        .fold(0.0_f64, f64::max);
    let in_range = pump > 0.0 && w1h > 0.0 && w1h < pump && w1v > 0.0 && w1v < pump;
    checks.push(check(
        "frequency_range",
        in_range,
        range_excess,
        format!("omega_1h = {w1h:e}, omega_1v = {w1v:e}, pump = {pump:e}"),
    ));

    let (w2h, w2v) = (pump - w1v, pump - w1h);
    let e1 = (w1h + w2v - pump).abs();
    let e2 = (w1v + w2h - pump).abs();
    checks.push(check(
        "energy_1h_2v",
        e1 <= freq_tol,
        e1,
        format!("omega_1h + omega_2v - pump = {e1:e}"),
    ));
    checks.push(check(
        "energy_1v_2h",
        e2 <= freq_tol,
        e2,
        format!("omega_1v + omega_2h - pump = {e2:e}"),
    ));
    let beat = ((w1h - w1v) - (w2h - w2v)).abs();
    checks.push(check(
        "beat_frequency",
        beat <= freq_tol,
        beat,
        format!("(omega_1h - omega_1v) - (omega_2h - omega_2v) = {beat:e}"),
    ));

    let detuning = c.fractional_detuning();
    checks.push(ConstraintCheck {
        name: "fractional_detuning",
        status: if detuning <= MAX_FRACTIONAL_DETUNING {
            CheckStatus::Pass
        } else {
            CheckStatus::Warn
        },
        residual: (detuning - MAX_FRACTIONAL_DETUNING).max(0.0),
        detail: format!("d omega / omega = {detuning:.6} (expected <= {MAX_FRACTIONAL_DETUNING})"),
    });

    Ok(ValidationReport { checks })
}

/// Beam-2 phases `(θ₂H, θ₂V)` from phase matching. Not normalized.
pub fn derive_beam2_phases(c: &SourceConstraints) -> Result<(f64, f64)> {
    c.check_finite()?;
    let residual = c.waveplate_residual();
    if c.entangled_source && residual.abs() > WAVEPLATE_TOLERANCE {
        return Err(ModelError::ConstraintViolation {
            name: "waveplate_shift",
            residual: residual.abs(),
        });
    }
    let (th1h, th1v) = c.beam1_phases;
    Ok((c.const_sum + c.delta_2h - th1v, c.const_sum + c.delta_2v - th1h))
}

/// Beam-2 frequencies `(ω₂H, ω₂V)` from energy conservation.
pub fn derive_beam2_frequencies(c: &SourceConstraints) -> Result<(f64, f64)> {
    c.check_finite()?;
    let pump = c.pump_frequency;
    let (w1h, w1v) = c.beam1_frequencies;
    for (field, value) in [("omega_1h", w1h), ("omega_1v", w1v)] {
        if !(value > 0.0 && value < pump) {
            return Err(ModelError::FrequencyOutOfRange { field, value, pump });
        }
    }
    Ok((pump - w1v, pump - w1h))
}

/// Which beam component carries the photon on each side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    /// Photons in 1H and 2V; 1V and 2H are vacuum.
    Pair1H2V,
    /// Photons in 1V and 2H; 1H and 2V are vacuum.
    Pair1V2H,
}

impl Branch {
    pub const ALL: [Branch; 2] = [Branch::Pair1H2V, Branch::Pair1V2H];

    /// Whether the `(side, polarization)` component carries the photon.
    pub fn carries_photon(self, side: Side, pol: Polarization) -> bool {
        use Polarization::*;
        use Side::*;
        matches!(
            (self, side, pol),
            (Branch::Pair1H2V, A, H)
                | (Branch::Pair1H2V, B, V)
                | (Branch::Pair1V2H, A, V)
                | (Branch::Pair1V2H, B, H)
        )
    }

    pub fn intensity(self, side: Side, pol: Polarization) -> f64 {
        if self.carries_photon(side, pol) {
            PHOTON_INTENSITY
        } else {
            VACUUM_INTENSITY
        }
    }
}

/// Mean intensities of the four source components for one emission event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamIntensities {
    pub i1h: f64,
    pub i1v: f64,
    pub i2h: f64,
    pub i2v: f64,
}

impl BeamIntensities {
    pub fn get(&self, side: Side, pol: Polarization) -> f64 {
        match (side, pol) {
            (Side::A, Polarization::H) => self.i1h,
            (Side::A, Polarization::V) => self.i1v,
            (Side::B, Polarization::H) => self.i2h,
            (Side::B, Polarization::V) => self.i2v,
        }
    }
}

/// One photon-pair emission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmissionEvent {
    branch: Branch,
    intensities: BeamIntensities,
    relative_phase: f64,
}

impl EmissionEvent {
    /// `relative_phase` is the composite angle θ₁H − θ₁V + beat and path terms;
    /// it is normalized to `[0, 2π)`. Photon and vacuum components share it.
    pub fn new(branch: Branch, relative_phase: f64) -> Self {
        let intensities = BeamIntensities {
            i1h: branch.intensity(Side::A, Polarization::H),
            i1v: branch.intensity(Side::A, Polarization::V),
            i2h: branch.intensity(Side::B, Polarization::H),
            i2v: branch.intensity(Side::B, Polarization::V),
        };
        EmissionEvent {
            branch,
            intensities,
            relative_phase: normalize_phase(relative_phase),
        }
    }

    pub fn branch(&self) -> Branch {
        self.branch
    }

    pub fn intensities(&self) -> BeamIntensities {
        self.intensities
    }

    pub fn relative_phase(&self) -> f64 {
        self.relative_phase
    }
}

/// Draws the branch with probability ½ each and a relative phase uniform on
/// `[0, 2π)`. Consumes exactly two draws from `rng`.
pub fn sample_emission<R: Rng + ?Sized>(rng: &mut R) -> EmissionEvent {
    let branch = if rng.random::<f64>() < 0.5 {
        Branch::Pair1H2V
    } else {
        Branch::Pair1V2H
    };
    let phase = rng.random::<f64>() * TAU;
    EmissionEvent::new(branch, phase)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomStream;
    use proptest::prelude::*;

    fn basic() -> SourceConstraints {
        SourceConstraints {
            pump_frequency: 2.0,
            beam1_frequencies: (1.0, 1.0),
            ..SourceConstraints::default()
        }
    }

    #[test]
    fn waveplate_pi_passes() {
        let report = validate_constraints(&basic()).unwrap();
        assert_eq!(report.check("waveplate_shift").unwrap().status, CheckStatus::Pass);
        assert!(report.passed());
    }

    #[test]
    fn waveplate_zero_fails_with_residual_pi() {
        let c = SourceConstraints {
            delta_2h: 0.0,
            delta_2v: 0.0,
            ..basic()
        };
        let report = validate_constraints(&c).unwrap();
        let w = report.check("waveplate_shift").unwrap();
        assert_eq!(w.status, CheckStatus::Fail);
        assert!((w.residual - PI).abs() < 1e-15);
        assert!(!report.passed());
    }

    #[test]
    fn waveplate_not_enforced_without_entangled_mode() {
        let c = SourceConstraints {
            delta_2h: 0.0,
            delta_2v: 0.0,
            entangled_source: false,
            ..basic()
        };
        assert!(validate_constraints(&c).unwrap().passed());
        assert!(derive_beam2_phases(&c).is_ok());
    }

    #[test]
    fn degenerate_beat_residual_zero() {
        let report = validate_constraints(&basic()).unwrap();
        assert_eq!(report.check("beat_frequency").unwrap().residual, 0.0);
    }

    #[test]
    fn nan_rejected() {
        let c = SourceConstraints {
            delta_2v: f64::NAN,
            ..basic()
        };
        assert!(matches!(
            validate_constraints(&c),
            Err(ModelError::NonFinite { field: "delta_2v", .. })
        ));
    }

    #[test]
    fn beam2_phase_difference() {
        let c = SourceConstraints {
            beam1_phases: (0.3, 0.1),
            ..basic()
        };
        let (h, v) = derive_beam2_phases(&c).unwrap();
        assert!((h - v - (0.2 + PI)).abs() < 1e-15);

        let c = SourceConstraints {
            beam1_phases: (1.7, 1.7),
            ..basic()
        };
        let (h, v) = derive_beam2_phases(&c).unwrap();
        assert!((h - v - PI).abs() < 1e-15);
    }

    #[test]
    fn beam2_phases_reject_bad_waveplate() {
        let c = SourceConstraints {
            delta_2h: 0.0,
            ..basic()
        };
        assert!(matches!(
            derive_beam2_phases(&c),
            Err(ModelError::ConstraintViolation { .. })
        ));
    }

    #[test]
    fn beam2_frequencies_detuned() {
        let c = SourceConstraints {
            pump_frequency: 2.0,
            beam1_frequencies: (1.004, 0.996),
            ..SourceConstraints::default()
        };
        let (w2h, w2v) = derive_beam2_frequencies(&c).unwrap();
        assert!((w2v - 0.996).abs() < 1e-15);
        assert!((w2h - 1.004).abs() < 1e-15);
        assert!((c.fractional_detuning() - 0.004).abs() < 1e-12);
        assert!(c.fractional_detuning() <= MAX_FRACTIONAL_DETUNING);
    }

    #[test]
    fn beam2_frequencies_degenerate() {
        assert_eq!(derive_beam2_frequencies(&basic()).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn beam2_frequencies_out_of_range() {
        let c = SourceConstraints {
            beam1_frequencies: (2.5, 1.0),
            ..basic()
        };
        assert!(matches!(
            derive_beam2_frequencies(&c),
            Err(ModelError::FrequencyOutOfRange { field: "omega_1h", .. })
        ));
    }

    #[test]
    fn detuning_above_estimate_warns() {
        let c = basic().with_fractional_detuning(0.01);
        let report = validate_constraints(&c).unwrap();
        assert_eq!(report.check("fractional_detuning").unwrap().status, CheckStatus::Warn);
        assert!(report.passed());
    }

    #[test]
    fn event_intensities_follow_branch() {
        let e = EmissionEvent::new(Branch::Pair1H2V, 1.0);
        let i = e.intensities();
        assert_eq!((i.i1h, i.i1v, i.i2h, i.i2v), (1.0, 0.5, 0.5, 1.0));
        let e = EmissionEvent::new(Branch::Pair1V2H, 1.0);
        let i = e.intensities();
        assert_eq!((i.i1h, i.i1v, i.i2h, i.i2v), (0.5, 1.0, 1.0, 0.5));
    }

    #[test]
    fn sampled_branches_and_phase_moments() {
        let mut rng = RandomStream::new(1, 0);
        let n = 1_000_000;
        let (mut h, mut c1, mut c2) = (0u64, 0.0, 0.0);
        for _ in 0..n {
            let e = sample_emission(&mut rng);
            let i = e.intensities();
            match e.branch() {
                Branch::Pair1H2V => {
                    h += 1;
                    assert_eq!((i.i1h, i.i2v, i.i1v, i.i2h), (1.0, 1.0, 0.5, 0.5));
                }
                Branch::Pair1V2H => {
                    assert_eq!((i.i1v, i.i2h, i.i1h, i.i2v), (1.0, 1.0, 0.5, 0.5));
                }
            }
            assert!((0.0..TAU).contains(&e.relative_phase()));
            let c = e.relative_phase().cos();
            c1 += c;
            c2 += c * c;
        }
        let nf = n as f64;
        assert!((h as f64 / nf - 0.5).abs() <= 0.002);
        assert!((c1 / nf).abs() <= 0.005);
        assert!((c2 / nf - 0.5).abs() <= 0.005);
    }

    proptest! {
        #[test]
        fn normalize_idempotent(x in -1e6f64..1e6) {
            let once = normalize_phase(x);
            prop_assert!((0.0..TAU).contains(&once));
            prop_assert_eq!(normalize_phase(once), once);
        }

        #[test]
        fn beat_equality_on_random_inputs(pump in 1.0f64..1e16, f in 0.01f64..0.99, g in 0.01f64..0.99) {
            let c = SourceConstraints {
                pump_frequency: pump,
                beam1_frequencies: (f * pump, g * pump),
                ..SourceConstraints::default()
            };
            let (w2h, w2v) = derive_beam2_frequencies(&c).unwrap();
            let lhs = c.beam1_frequencies.0 - c.beam1_frequencies.1;
            prop_assert!((lhs - (w2h - w2v)).abs() <= 4.0 * f64::EPSILON * pump);
            prop_assert!(validate_constraints(&c).unwrap().check("beat_frequency").unwrap().status == CheckStatus::Pass);
        }

        #[test]
        fn beam2_phases_match_difference_identity(
            k in -10.0f64..10.0, d in -10.0f64..10.0, h1 in -10.0f64..10.0, v1 in -10.0f64..10.0
        ) {
            let c = SourceConstraints {
                const_sum: k,
                delta_2h: d + PI,
                delta_2v: d,
                beam1_phases: (h1, v1),
                ..basic()
            };
            let (h2, v2) = derive_beam2_phases(&c).unwrap();
            // Direct substitution: θ₂H − θ₂V = θ₁H − θ₁V + Δ₂H − Δ₂V.
            let expected = h1 - v1 + (c.delta_2h - c.delta_2v);
            prop_assert!(wrap_phase(h2 - v2 - expected).abs() < 1e-12);
            prop_assert!((h2 + v1 - (k + c.delta_2h)).abs() < 1e-12);
            prop_assert!((v2 + h1 - (k + c.delta_2v)).abs() < 1e-12);
        }
    }
}
