use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};

/// Non-negative (possibly fractional) count per class label.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(transparent)
)]
pub struct ClassDistribution {
    counts: BTreeMap<String, f64>,
}

impl ClassDistribution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_counts<'a, I>(counts: I) -> Self
    where
        I: IntoIterator<Item = (&'a str, f64)>,
    {
        let mut dist = Self::new();
        for (label, n) in counts {
            dist.add(label, n);
        }
        dist
    }

    /// Adds `weight` to `label`. Negative or non-finite weights are ignored.
    pub fn add(&mut self, label: &str, weight: f64) {
        if !(weight >= 0.0 && weight.is_finite()) {
            return;
        }
        match self.counts.get_mut(label) {
            Some(c) => *c += weight,
            None => {
                self.counts.insert(label.to_string(), weight);
            }
        }
    }

    pub fn count(&self, label: &str) -> f64 {
        self.counts.get(label).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.counts.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> + '_ {
        self.counts.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> + '_ {
        self.counts.keys().map(String::as_str)
    }

    /// Label with the largest count; ties go to the lexicographically
    /// smallest label. `None` only for a distribution without labels.
    pub fn majority(&self) -> Option<&str> {
        let mut best: Option<(&str, f64)> = None;
        for (label, n) in self.iter() {
            match best {
                Some((_, m)) if n <= m => {}
                _ => best = Some((label, n)),
            }
        }
        best.map(|(label, _)| label)
    }

    /// Total minus the majority count.
    pub fn errors(&self) -> f64 {
        match self.majority() {
            Some(label) => self.total() - self.count(label),
            None => 0.0,
        }
    }

    /// Number of labels with a positive count.
    pub fn support(&self) -> usize {
        self.counts.values().filter(|&&n| n > 0.0).count()
    }

    pub fn merge(&mut self, other: &ClassDistribution) {
        for (label, n) in other.iter() {
            self.add(label, n);
        }
    }

    /// Same labels, every count multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> ClassDistribution {
        ClassDistribution {
            counts: self
                .counts
                .iter()
                .map(|(k, v)| (k.clone(), v * factor))
                .collect(),
        }
    }
}
