use crate::error::{Error, Result};

/// Class labels in `1..=classes`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    labels: Vec<usize>,
    classes: usize,
}

impl LabelVector {
    pub fn new(labels: Vec<usize>, classes: usize) -> Result<Self> {
        if classes == 0 {
            return Err(Error::data("labels", "class count must be positive"));
        }
        if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y == 0 || y > classes) {
            return Err(Error::data(
                "labels",
                format!("label {y} at position {i} outside 1..={classes}"),
            ));
        }
        Ok(LabelVector { labels, classes })
    }

    /// Infer the class count as the largest observed label.
    pub fn from_observed(labels: Vec<usize>) -> Result<Self> {
        let classes = labels.iter().copied().max().unwrap_or(0);
        Self::new(labels, classes)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.labels
    }

    /// Zero-based class index of entry `i`.
    pub fn index(&self, i: usize) -> usize {
        self.labels[i] - 1
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.labels.iter().copied()
    }

    /// Classes in `1..=classes` that never occur.
    pub fn missing_classes(&self) -> Vec<usize> {
        let mut seen = vec![false; self.classes];
        for &y in &self.labels {
            seen[y - 1] = true;
        }
        (1..=self.classes).filter(|&c| !seen[c - 1]).collect()
    }

    /// Same labels with a larger class count.
    pub fn with_classes(self, classes: usize) -> Result<Self> {
        Self::new(self.labels, classes)
    }
}

/// Index of the largest entry, preferring the lowest index on ties.
pub fn argmax(row: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (h, v) in row.into_iter().enumerate() {
        if v > best_v {
            best = h;
            best_v = v;
        }
    }
    best
}
