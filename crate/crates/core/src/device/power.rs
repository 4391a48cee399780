//! Operating-state current model and battery accounting. Currents are
//! config so tests can sweep the plausible ranges; the defaults sit at the
//! midpoints. Response playback draws the baseline current plus the
//! amplifier's extra draw, an additivity assumption that is the documented
//! simplification here; the camera burst is folded into the active-query
//! current rather than modeled separately.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::DeviceError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceState {
    DeepSleep,
    LightSleep,
    BaselineListening,
    ActiveQuery,
    PlayingResponse,
}

impl DeviceState {
    pub const ALL: [DeviceState; 5] = [
        DeviceState::DeepSleep,
        DeviceState::LightSleep,
        DeviceState::BaselineListening,
        DeviceState::ActiveQuery,
        DeviceState::PlayingResponse,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DeviceState::DeepSleep => "deep_sleep",
            DeviceState::LightSleep => "light_sleep",
            DeviceState::BaselineListening => "baseline_listening",
            DeviceState::ActiveQuery => "active_query",
            DeviceState::PlayingResponse => "playing_response",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerProfile {
    pub deep_sleep_ma: f64,
    pub light_sleep_ma: f64,
    /// Wi-Fi modem sleep draw; reported in the profile table though no
    /// device state maps onto it directly.
    pub modem_sleep_ma: f64,
    pub baseline_listening_ma: f64,
    pub active_query_ma: f64,
    /// Speaker amplifier draw added on top of baseline during playback.
    pub playback_extra_ma: f64,
    pub battery_mah: f64,
}

impl Default for PowerProfile {
    fn default() -> Self {
        Self {
            deep_sleep_ma: 0.05,
            light_sleep_ma: 3.0,
            modem_sleep_ma: 25.0,
            baseline_listening_ma: 90.0,
            active_query_ma: 425.0,
            playback_extra_ma: 300.0,
            battery_mah: 200.0,
        }
    }
}

impl PowerProfile {
    pub fn validate(&self) -> Result<(), DeviceError> {
        let currents = [
            self.deep_sleep_ma,
            self.light_sleep_ma,
            self.modem_sleep_ma,
            self.baseline_listening_ma,
            self.active_query_ma,
            self.playback_extra_ma,
        ];
        if currents.iter().any(|&c| c <= 0.0 || !c.is_finite()) {
            return Err(DeviceError::InvalidProfile("all currents must be positive".into()));
        }
        if self.battery_mah <= 0.0 {
            return Err(DeviceError::InvalidProfile("battery capacity must be positive".into()));
        }
        if !(80.0..=100.0).contains(&self.baseline_listening_ma) {
            return Err(DeviceError::InvalidProfile(format!(
                "baseline_listening_ma {} outside the plausible 80-100 range",
                self.baseline_listening_ma
            )));
        }
        if !(400.0..=450.0).contains(&self.active_query_ma) {
            return Err(DeviceError::InvalidProfile(format!(
                "active_query_ma {} outside the plausible 400-450 range",
                self.active_query_ma
            )));
        }
        Ok(())
    }

    pub fn current_ma(&self, state: DeviceState) -> f64 {
        match state {
            DeviceState::DeepSleep => self.deep_sleep_ma,
            DeviceState::LightSleep => self.light_sleep_ma,
            DeviceState::BaselineListening => self.baseline_listening_ma,
            DeviceState::ActiveQuery => self.active_query_ma,
            DeviceState::PlayingResponse => self.baseline_listening_ma + self.playback_extra_ma,
        }
    }

    /// Hours until empty holding one state continuously.
    pub fn runtime_to_empty_h(&self, state: DeviceState) -> f64 {
        self.battery_mah / self.current_ma(state)
    }

    /// Hours until empty at an arbitrary average draw.
    pub fn runtime_at_average_h(&self, average_ma: f64) -> f64 {
        assert!(average_ma > 0.0, "average current must be positive");
        self.battery_mah / average_ma
    }

    /// Two-column summary of the state currents and single-state runtimes.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<22} {:>10} {:>14}\n", "state", "current", "runtime"));
        for state in DeviceState::ALL {
            let ma = self.current_ma(state);
            let h = self.runtime_to_empty_h(state);
            let runtime = if h >= 1.0 {
                format!("{h:.2} h")
            } else {
                format!("{:.1} min", h * 60.0)
            };
            out.push_str(&format!("{:<22} {:>7.2} mA {:>14}\n", state.as_str(), ma, runtime));
        }
        out.push_str(&format!(
            "{:<22} {:>7.2} mA {:>14}\n",
            "modem_sleep (radio)",
            self.modem_sleep_ma,
            format!("{:.2} h", self.battery_mah / self.modem_sleep_ma)
        ));
        out
    }
}

/// Battery accounting over a state timeline. Consumed and remaining always
/// sum to the capacity; the simulation halts when the cell is empty.
#[derive(Debug, Clone)]
pub struct EnergyLedger {
    capacity_mah: f64,
    per_state_mah: BTreeMap<DeviceState, f64>,
    consumed_mah: f64,
    /// (start_hours, state, duration_hours) in schedule order.
    timeline: Vec<(f64, DeviceState, f64)>,
    halted: bool,
}

impl EnergyLedger {
    pub fn new(capacity_mah: f64) -> Self {
        Self {
            capacity_mah,
            per_state_mah: BTreeMap::new(),
            consumed_mah: 0.0,
            timeline: Vec::new(),
            halted: false,
        }
    }

    pub fn capacity_mah(&self) -> f64 {
        self.capacity_mah
    }

    pub fn consumed_mah(&self) -> f64 {
        self.consumed_mah
    }

    pub fn remaining_mah(&self) -> f64 {
        self.capacity_mah - self.consumed_mah
    }

    pub fn per_state_mah(&self) -> &BTreeMap<DeviceState, f64> {
        &self.per_state_mah
    }

    pub fn timeline(&self) -> &[(f64, DeviceState, f64)] {
        &self.timeline
    }

    /// True once the battery hit empty and the run stopped early.
    pub fn halted(&self) -> bool {
        self.halted
    }

    /// Account one dwell. Returns the hours actually spent before the
    /// battery emptied (equal to `duration_h` unless the cell died).
    pub fn consume(&mut self, profile: &PowerProfile, state: DeviceState, duration_h: f64) -> f64 {
        if self.halted {
            return 0.0;
        }
        let current = profile.current_ma(state);
        let start = self.timeline.last().map(|(s, _, d)| s + d).unwrap_or(0.0);
        let full_mah = current * duration_h;
        let spent_h = if full_mah <= self.remaining_mah() {
            duration_h
        } else {
            let h = self.remaining_mah() / current;
            self.halted = true;
            h
        };
        let mah = current * spent_h;
        self.consumed_mah = (self.consumed_mah + mah).min(self.capacity_mah);
        *self.per_state_mah.entry(state).or_insert(0.0) += mah;
        self.timeline.push((start, state, spent_h));
        spent_h
    }
}

/// Run a (state, duration hours) schedule against a profile.
pub fn simulate_power(
    profile: &PowerProfile,
    schedule: &[(DeviceState, f64)],
) -> Result<EnergyLedger, DeviceError> {
    profile.validate()?;
    for (state, d) in schedule {
        if *d <= 0.0 || !d.is_finite() {
            return Err(DeviceError::InvalidSchedule(format!(
                "duration {d} for {} must be positive",
                state.as_str()
            )));
        }
    }
    let mut ledger = EnergyLedger::new(profile.battery_mah);
    for &(state, duration_h) in schedule {
        ledger.consume(profile, state, duration_h);
        if ledger.halted() {
            break;
        }
    }
    Ok(ledger)
}
