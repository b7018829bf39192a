use std::collections::BTreeMap;

/// Per-increment multipliers by name. Load profiles scale a bus's peak
/// demand, production profiles scale a unit's maximum output. A profile
/// shorter than the simulated horizon wraps around.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Profiles {
    series: BTreeMap<String, Vec<f64>>,
}

impl Profiles {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, values: Vec<f64>) {
        self.series.insert(name.into(), values);
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.series.get(name).map(|v| v.as_slice())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.series.keys().map(|k| k.as_str())
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    /// Multiplier for increment `step`; 1.0 for no profile or an empty one.
    pub fn factor(&self, name: Option<&str>, step: i64) -> f64 {
        match name.and_then(|n| self.series.get(n)) {
            Some(v) if !v.is_empty() => v[step.rem_euclid(v.len() as i64) as usize],
            _ => 1.0,
        }
    }
}
