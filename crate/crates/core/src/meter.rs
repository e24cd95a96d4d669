//! Deterministic work-unit accounting. Meters count elementary algorithm
//! steps (pushes, relabels, scans, links) instead of wall time so budgets
//! and reported costs are reproducible.

#[derive(Clone, Debug, Default)]
pub struct WorkMeter {
    units: u64,
}

impl WorkMeter {
    pub fn new() -> Self {
        WorkMeter { units: 0 }
    }

    #[inline]
    pub fn charge(&mut self, units: u64) {
        self.units += units;
    }

    #[inline]
    pub fn tick(&mut self) {
        self.units += 1;
    }

    pub fn total(&self) -> u64 {
        self.units
    }

    pub fn reset(&mut self) {
        self.units = 0;
    }
}
