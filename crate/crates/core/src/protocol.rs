//! Pulse sequences for the data / rephasing / lock / unlock protocol.
//!
//! A pulse is rectangular and is placed by its **center** time. The echo
//! timing law below is exact for instantaneous pulses, and the center is the
//! instant a finite symmetric pulse acts at, so anchoring on centers keeps
//! the law exact in simulation as well.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bloch::{DriveField, Transition};
use crate::error::{Error, Result};

/// Slack used when comparing pulse edges.
pub const TIME_EPS: f64 = 1e-9;

/// Tolerance for deciding that an area (in units of π) is an integer.
pub const AREA_EPS: f64 = 1e-9;

/// Duration in μs of a rectangular pulse of `area` (in units of π) at Rabi
/// frequency `rabi` (Ω/2π in MHz): θ = 2π·rabi·τ ⇒ τ = area / (2·rabi).
pub fn area_to_duration(area: f64, rabi: f64) -> Result<f64> {
    if !(area >= 0.0) || !area.is_finite() {
        return Err(Error::Config(format!("pulse area must be >= 0, got {area}")));
    }
    if area == 0.0 {
        return Ok(0.0);
    }
    if !(rabi > 0.0) || !rabi.is_finite() {
        return Err(Error::Config(format!(
            "area {area}pi is infeasible at Rabi frequency {rabi} MHz"
        )));
    }
    Ok(area / (2.0 * rabi))
}

/// Inverse of [`area_to_duration`].
pub fn duration_to_area(duration: f64, rabi: f64) -> f64 {
    2.0 * rabi * duration
}

/// Echo time of the locked sequence:
/// T_E = T_B2 + (T_R − T_D) − (T_B1 − T_R).
pub fn predict_echo_time(t_d: f64, t_r: f64, t_b1: f64, t_b2: f64) -> Result<f64> {
    if !(t_d < t_r && t_r <= t_b1 && t_b1 < t_b2) {
        return Err(Error::Sequence(format!(
            "echo law needs T_D < T_R <= T_B1 < T_B2, got {t_d}, {t_r}, {t_b1}, {t_b2}"
        )));
    }
    Ok(t_b2 + (t_r - t_d) - (t_b1 - t_r))
}

/// Two-pulse echo time 2·T_R − T_D.
pub fn predict_conventional_echo_time(t_d: f64, t_r: f64) -> Result<f64> {
    if !(t_d < t_r) {
        return Err(Error::Sequence(format!(
            "two-pulse echo needs T_D < T_R, got {t_d}, {t_r}"
        )));
    }
    Ok(2.0 * t_r - t_d)
}

/// Expected outcome of an (R, B1, B2) area combination.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AreaClass {
    /// Echo recovered with its original sign.
    FullEcho,
    /// Amplitude left parked in the spin state: no echo.
    NullEcho,
    /// Echo recovered with inverted sign.
    InvertedEcho,
    /// R or B1 is not an odd multiple of π, so rephasing or locking is incomplete.
    NonRephasing,
}

impl fmt::Display for AreaClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AreaClass::FullEcho => "full echo",
            AreaClass::NullEcho => "null echo",
            AreaClass::InvertedEcho => "inverted echo",
            AreaClass::NonRephasing => "non-rephasing",
        };
        f.write_str(s)
    }
}

fn as_integer(x: f64) -> Option<i64> {
    let r = x.round();
    ((x - r).abs() <= AREA_EPS).then_some(r as i64)
}

fn is_odd_integer(x: f64) -> bool {
    as_integer(x).is_some_and(|n| n.rem_euclid(2) == 1)
}

/// Classifies areas given in units of π.
///
/// R and B1 must be odd multiples of π; the outcome then depends on
/// (B1 + B2) mod 4π. Returns `None` when the sum is not an integer multiple
/// of π, a case the selection rules do not cover.
pub fn classify_areas(phi_r: f64, phi_b1: f64, phi_b2: f64) -> Option<AreaClass> {
    if !is_odd_integer(phi_r) || !is_odd_integer(phi_b1) {
        return Some(AreaClass::NonRephasing);
    }
    let sum = as_integer(phi_b1 + phi_b2)?;
    Some(match sum.rem_euclid(4) {
        0 => AreaClass::FullEcho,
        2 => AreaClass::InvertedEcho,
        _ => AreaClass::NullEcho,
    })
}

/// Classification after rounding every area to the nearest multiple of π,
/// together with the largest rounding distance. Advisory only.
pub fn classify_areas_nearest(phi_r: f64, phi_b1: f64, phi_b2: f64) -> (AreaClass, f64) {
    let rounded = [phi_r, phi_b1, phi_b2].map(f64::round);
    let dist = [phi_r, phi_b1, phi_b2]
        .iter()
        .zip(rounded)
        .map(|(a, r)| (a - r).abs())
        .fold(0.0, f64::max);
    let class = classify_areas(rounded[0], rounded[1], rounded[2])
        .expect("integer areas always classify");
    (class, dist)
}

/// How long a pulse lasts: either an area (units of π) or an explicit duration (μs).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PulseLength {
    Area(f64),
    Duration(f64),
}

/// One rectangular pulse.
#[derive(Clone, Debug, PartialEq)]
pub struct PulseEvent {
    pub label: String,
    pub transition: Transition,
    /// Ω/2π in MHz.
    pub rabi: f64,
    pub length: PulseLength,
    /// Center time in μs.
    pub time: f64,
    /// Carrier phase in rad.
    pub phase: f64,
}

impl PulseEvent {
    pub fn new(
        label: impl Into<String>,
        transition: Transition,
        rabi: f64,
        area: f64,
        time: f64,
    ) -> Self {
        Self {
            label: label.into(),
            transition,
            rabi,
            length: PulseLength::Area(area),
            time,
            phase: 0.0,
        }
    }

    /// Data pulse on |1⟩–|3⟩.
    pub fn data(area: f64, rabi: f64, time: f64) -> Self {
        Self::new("D", Transition::Opt13, rabi, area, time)
    }

    /// Rephasing pulse on |1⟩–|3⟩.
    pub fn rephase(area: f64, rabi: f64, time: f64) -> Self {
        Self::new("R", Transition::Opt13, rabi, area, time)
    }

    /// Locking pulse on |2⟩–|3⟩.
    pub fn lock(area: f64, rabi: f64, time: f64) -> Self {
        Self::new("B1", Transition::Opt23, rabi, area, time)
    }

    /// Unlocking pulse on |2⟩–|3⟩.
    pub fn unlock(area: f64, rabi: f64, time: f64) -> Self {
        Self::new("B2", Transition::Opt23, rabi, area, time)
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    pub fn with_duration(mut self, duration: f64) -> Self {
        self.length = PulseLength::Duration(duration);
        self
    }

    /// Transition required by the protocol role of a standard label.
    pub fn standard_transition(label: &str) -> Option<Transition> {
        match label {
            "D" | "R" => Some(Transition::Opt13),
            "B1" | "B2" => Some(Transition::Opt23),
            _ => None,
        }
    }

    pub fn duration(&self) -> Result<f64> {
        match self.length {
            PulseLength::Area(a) => area_to_duration(a, self.rabi),
            PulseLength::Duration(d) if d >= 0.0 && d.is_finite() => Ok(d),
            PulseLength::Duration(d) => Err(Error::Config(format!(
                "pulse {} has invalid duration {d}",
                self.label
            ))),
        }
    }

    /// Area in units of π.
    pub fn area(&self) -> f64 {
        match self.length {
            PulseLength::Area(a) => a,
            PulseLength::Duration(d) => duration_to_area(d, self.rabi),
        }
    }

    pub fn start(&self) -> f64 {
        self.time - 0.5 * self.duration().unwrap_or(0.0)
    }

    pub fn end(&self) -> f64 {
        self.time + 0.5 * self.duration().unwrap_or(0.0)
    }

    pub fn drive(&self) -> DriveField {
        DriveField::new(self.transition, self.rabi).with_phase(self.phase)
    }

    fn validate(&self) -> Result<()> {
        if !(self.rabi >= 0.0) || !self.rabi.is_finite() {
            return Err(Error::Config(format!(
                "pulse {} has negative Rabi frequency {}",
                self.label, self.rabi
            )));
        }
        if !self.time.is_finite() {
            return Err(Error::Config(format!("pulse {} has no valid time", self.label)));
        }
        self.duration()?;
        if let Some(t) = Self::standard_transition(&self.label) {
            if t != self.transition {
                return Err(Error::Sequence(format!(
                    "pulse {} must drive transition {:?}",
                    self.label, t
                )));
            }
        }
        Ok(())
    }
}

/// Non-fatal findings from [`build_sequence`].
#[derive(Clone, Debug, PartialEq)]
pub enum SequenceWarning {
    /// B1 arrives after the two-pulse echo has already formed, so nothing is
    /// left to lock.
    LateLock { t_b1: f64, t_conventional_echo: f64 },
}

impl fmt::Display for SequenceWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SequenceWarning::LateLock { t_b1, t_conventional_echo } => write!(
                f,
                "late lock: B1 at {t_b1} us is not before the two-pulse echo at {t_conventional_echo} us"
            ),
        }
    }
}

/// Center times of the four protocol pulses, where present.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ProtocolTimes {
    pub d: Option<f64>,
    pub r: Option<f64>,
    pub b1: Option<f64>,
    pub b2: Option<f64>,
}

impl ProtocolTimes {
    /// Two-pulse echo time, if D and R are present.
    pub fn conventional_echo(&self) -> Option<f64> {
        predict_conventional_echo_time(self.d?, self.r?).ok()
    }

    /// Locked echo time, if all four pulses are present and ordered.
    pub fn locked_echo(&self) -> Option<f64> {
        predict_echo_time(self.d?, self.r?, self.b1?, self.b2?).ok()
    }

    /// True when B1 comes after the conventional echo.
    pub fn is_late_lock(&self) -> bool {
        match (self.conventional_echo(), self.b1) {
            (Some(te), Some(b1)) => b1 >= te,
            _ => false,
        }
    }

    /// Where the echo of interest should appear: the locked echo for a
    /// timely lock, otherwise the two-pulse echo.
    pub fn expected_echo(&self) -> Option<f64> {
        if self.b1.is_some() && self.b2.is_some() && !self.is_late_lock() {
            self.locked_echo()
        } else {
            self.conventional_echo()
        }
    }
}

/// Validated, time-ordered pulses plus the end of the simulation window.
#[derive(Clone, Debug, PartialEq)]
pub struct PulseSequence {
    pulses: Vec<PulseEvent>,
    end: f64,
    warnings: Vec<SequenceWarning>,
}

impl PulseSequence {
    pub fn pulses(&self) -> &[PulseEvent] {
        &self.pulses
    }

    pub fn warnings(&self) -> &[SequenceWarning] {
        &self.warnings
    }

    /// End of the simulation window (μs).
    pub fn end(&self) -> f64 {
        self.end
    }

    /// Replaces the window end. It may not cut into a pulse.
    pub fn with_end(mut self, end: f64) -> Result<Self> {
        let last = self.pulses.last().map_or(0.0, |p| p.end());
        if !(end >= last - TIME_EPS) {
            return Err(Error::Sequence(format!(
                "window end {end} us is before the last pulse ends at {last} us"
            )));
        }
        self.end = end;
        Ok(self)
    }

    pub fn get(&self, label: &str) -> Option<&PulseEvent> {
        self.pulses.iter().find(|p| p.label == label)
    }

    pub fn times(&self) -> ProtocolTimes {
        let t = |l| self.get(l).map(|p| p.time);
        ProtocolTimes {
            d: t("D"),
            r: t("R"),
            b1: t("B1"),
            b2: t("B2"),
        }
    }

    /// (start, end) of every pulse with non-zero length.
    pub fn pulse_intervals(&self) -> Vec<(f64, f64)> {
        self.pulses
            .iter()
            .filter(|p| p.end() > p.start())
            .map(|p| (p.start(), p.end()))
            .collect()
    }

    /// Drives active on the open interval around `t`.
    pub fn drives_at(&self, t: f64) -> Vec<DriveField> {
        self.pulses
            .iter()
            .filter(|p| p.start() < t && t < p.end() && p.rabi > 0.0)
            .map(PulseEvent::drive)
            .collect()
    }

    /// Default window end: a few μs past both the last pulse and the
    /// expected echo.
    fn default_end(pulses: &[PulseEvent], times: &ProtocolTimes) -> f64 {
        let last = pulses.last().map_or(0.0, |p| p.end());
        let echo = times.expected_echo().unwrap_or(last);
        last.max(echo) + 5.0
    }
}

/// Sorts and validates a pulse list.
///
/// Errors on overlapping pulses, duplicate labels, wrong transitions for the
/// standard labels, and standard labels out of D < R < B1 < B2 order. A lock
/// pulse placed at or after the two-pulse echo only produces a warning.
pub fn build_sequence(events: Vec<PulseEvent>) -> Result<PulseSequence> {
    let mut pulses = events;
    for p in &pulses {
        p.validate()?;
    }
    pulses.sort_by(|a, b| a.start().total_cmp(&b.start()).then(a.time.total_cmp(&b.time)));

    for (i, p) in pulses.iter().enumerate() {
        if pulses[..i].iter().any(|q| q.label == p.label) {
            return Err(Error::Sequence(format!("duplicate pulse label {}", p.label)));
        }
    }
    for w in pulses.windows(2) {
        if w[1].start() < w[0].end() - TIME_EPS || w[1].time <= w[0].time {
            return Err(Error::Sequence(format!(
                "pulses {} [{}, {}] and {} [{}, {}] overlap",
                w[0].label,
                w[0].start(),
                w[0].end(),
                w[1].label,
                w[1].start(),
                w[1].end()
            )));
        }
    }

    let order = ["D", "R", "B1", "B2"];
    let present: Vec<(&str, f64)> = order
        .iter()
        .filter_map(|l| pulses.iter().find(|p| p.label == *l).map(|p| (*l, p.time)))
        .collect();
    for w in present.windows(2) {
        if w[1].1 <= w[0].1 {
            return Err(Error::Sequence(format!(
                "{} at {} us must come after {} at {} us",
                w[1].0, w[1].1, w[0].0, w[0].1
            )));
        }
    }

    let mut seq = PulseSequence {
        pulses,
        end: 0.0,
        warnings: Vec::new(),
    };
    let times = seq.times();
    if times.is_late_lock() {
        let w = SequenceWarning::LateLock {
            t_b1: times.b1.unwrap(),
            t_conventional_echo: times.conventional_echo().unwrap(),
        };
        log::warn!("{w}");
        seq.warnings.push(w);
    }
    seq.end = PulseSequence::default_end(&seq.pulses, &times);
    Ok(seq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn area_durations() {
        assert_abs_diff_eq!(area_to_duration(2.0, 5.0).unwrap(), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(area_to_duration(7.0, 5.0).unwrap(), 0.7, epsilon = 1e-15);
        assert_eq!(area_to_duration(0.0, 5.0).unwrap(), 0.0);
        assert_eq!(area_to_duration(0.0, 0.0).unwrap(), 0.0);
        assert!(area_to_duration(1.0, 0.0).is_err());
    }

    #[test]
    fn echo_law_examples() {
        assert_abs_diff_eq!(predict_echo_time(5.0, 15.0, 22.0, 55.0).unwrap(), 58.0, epsilon = 1e-12);
        assert_abs_diff_eq!(predict_echo_time(5.0, 10.0, 10.1, 55.0).unwrap(), 59.9, epsilon = 1e-12);
        for tb2 in [20.0, 55.0, 123.4] {
            assert_abs_diff_eq!(predict_echo_time(5.0, 10.0, 10.0, tb2).unwrap(), tb2 + 5.0, epsilon = 1e-12);
        }
        assert!(predict_echo_time(5.0, 15.0, 14.0, 55.0).is_err());
        assert!(predict_echo_time(5.0, 15.0, 22.0, 20.0).is_err());
    }

    #[test]
    fn conventional_echo_examples() {
        assert_eq!(predict_conventional_echo_time(5.0, 15.0).unwrap(), 25.0);
        assert_eq!(predict_conventional_echo_time(5.0, 10.0).unwrap(), 15.0);
        assert_eq!(predict_conventional_echo_time(0.0, 7.5).unwrap(), 15.0);
        assert!(predict_conventional_echo_time(10.0, 5.0).is_err());
    }

    #[test]
    fn area_classes() {
        assert_eq!(classify_areas(1.0, 1.0, 3.0), Some(AreaClass::FullEcho));
        assert_eq!(classify_areas(1.0, 1.0, 1.0), Some(AreaClass::InvertedEcho));
        assert_eq!(classify_areas(1.0, 1.0, 2.0), Some(AreaClass::NullEcho));
        assert_eq!(classify_areas(1.0, 1.0, 7.0), Some(AreaClass::FullEcho));
        assert_eq!(classify_areas(1.0, 3.0, 1.0), Some(AreaClass::FullEcho));
        assert_eq!(classify_areas(2.0, 1.0, 3.0), Some(AreaClass::NonRephasing));
        assert_eq!(classify_areas(1.0, 0.5, 3.0), Some(AreaClass::NonRephasing));
        assert_eq!(classify_areas(1.0, 1.0, 2.5), None);
        assert_eq!(classify_areas_nearest(1.0, 1.0, 2.9), (AreaClass::FullEcho, 0.10000000000000009));
    }

    proptest! {
        #[test]
        fn classification_has_period_four(r in 0u32..6, b1 in 0u32..6, b2 in 0u32..12, k in 1u32..4) {
            let (r, b1, b2) = (r as f64, b1 as f64, b2 as f64);
            prop_assert_eq!(
                classify_areas(r, b1, b2),
                classify_areas(r, b1, b2 + 4.0 * k as f64)
            );
        }

        #[test]
        fn locked_law_reduces_to_two_pulse(td in 0.0..10.0f64, gap in 0.5..20.0f64, hold in 0.5..100.0f64) {
            let tr = td + gap;
            let tb2 = tr + hold;
            let te = predict_echo_time(td, tr, tr, tb2).unwrap();
            let conv = predict_conventional_echo_time(td, tr).unwrap();
            prop_assert!((te - tb2 - (tr - td)).abs() < 1e-9);
            prop_assert!((te - (conv + (tb2 - tr))).abs() < 1e-9);
        }
    }

    fn baseline_events() -> Vec<PulseEvent> {
        vec![
            PulseEvent::data(0.5, 5.0, 5.0),
            PulseEvent::rephase(1.0, 5.0, 10.0),
            PulseEvent::lock(1.0, 5.0, 10.1),
            PulseEvent::unlock(3.0, 5.0, 55.0),
        ]
    }

    #[test]
    fn baseline_sequence_is_valid() {
        let mut ev = baseline_events();
        ev.reverse();
        let seq = build_sequence(ev).unwrap();
        assert!(seq.warnings().is_empty());
        let labels: Vec<_> = seq.pulses().iter().map(|p| p.label.as_str()).collect();
        assert_eq!(labels, ["D", "R", "B1", "B2"]);
        assert_abs_diff_eq!(seq.times().locked_echo().unwrap(), 59.9, epsilon = 1e-12);
        assert!(seq.end() > 59.9);
        // R ends exactly where B1 starts
        assert_abs_diff_eq!(seq.get("R").unwrap().end(), seq.get("B1").unwrap().start(), epsilon = 1e-12);
    }

    #[test]
    fn late_lock_warns() {
        let seq = build_sequence(vec![
            PulseEvent::data(0.5, 5.0, 5.0),
            PulseEvent::rephase(1.0, 5.0, 15.0),
            PulseEvent::lock(1.0, 5.0, 30.0),
            PulseEvent::unlock(3.0, 5.0, 55.0),
        ])
        .unwrap();
        assert_eq!(
            seq.warnings(),
            &[SequenceWarning::LateLock {
                t_b1: 30.0,
                t_conventional_echo: 25.0
            }]
        );
        assert_eq!(seq.times().expected_echo(), Some(25.0));
    }

    #[test]
    fn overlap_is_an_error() {
        let err = build_sequence(vec![
            PulseEvent::data(0.5, 5.0, 5.0),
            PulseEvent::rephase(1.0, 5.0, 5.05),
        ]);
        assert!(matches!(err, Err(Error::Sequence(_))));
    }

    #[test]
    fn unlock_before_lock_is_an_error() {
        let err = build_sequence(vec![
            PulseEvent::data(0.5, 5.0, 5.0),
            PulseEvent::rephase(1.0, 5.0, 10.0),
            PulseEvent::lock(1.0, 5.0, 40.0),
            PulseEvent::unlock(3.0, 5.0, 20.0),
        ]);
        assert!(matches!(err, Err(Error::Sequence(_))));
    }

    #[test]
    fn wrong_transition_is_an_error() {
        let mut d = PulseEvent::data(0.5, 5.0, 5.0);
        d.transition = Transition::Opt23;
        assert!(build_sequence(vec![d]).is_err());
    }

    #[test]
    fn drives_follow_pulse_windows() {
        let seq = build_sequence(baseline_events()).unwrap();
        assert_eq!(seq.drives_at(5.0).len(), 1);
        assert_eq!(seq.drives_at(5.0)[0].transition, Transition::Opt13);
        assert!(seq.drives_at(7.0).is_empty());
        assert_eq!(seq.drives_at(55.1)[0].transition, Transition::Opt23);
        assert_eq!(seq.pulse_intervals().len(), 4);
    }
}
