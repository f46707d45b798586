//! Compensated summation used by every weighted accumulator in the crate.
//!
//! Neumaier's variant of Kahan summation: unlike plain Kahan it also keeps
//! the correction when the incoming term is larger in magnitude than the
//! running sum, which happens routinely when weight-distance products span
//! several orders of magnitude.

/// Running compensated sum. `value()` returns sum plus carried correction.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    /// Folds another partial sum in. Merge order must be fixed by the caller;
    /// the parallel kernels merge block partials in block-index order so that
    /// results do not depend on worker count.
    pub fn merge(&mut self, other: NeumaierSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }

    #[cfg(test)]
    pub fn sum_iter<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
        let mut s = NeumaierSum::new();
        for x in iter {
            s.add(x);
        }
        s.value()
    }
}
