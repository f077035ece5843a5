use crate::Real;

/// Neumaier's variant of Kahan summation. Order of `add` calls is the order
/// of reduction, so callers fix it to get reproducible results.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum<T> {
    sum: T,
    comp: T,
}

impl<T: Real> NeumaierSum<T> {
    pub fn new() -> Self {
        Self {
            sum: T::zero(),
            comp: T::zero(),
        }
    }

    #[inline]
    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp = self.comp + ((self.sum - t) + x);
        } else {
            self.comp = self.comp + ((x - t) + self.sum);
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &Self) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> T {
        self.sum + self.comp
    }
}

pub fn neumaier_sum<T: Real, I: IntoIterator<Item = T>>(it: I) -> T {
    let mut acc = NeumaierSum::new();
    for x in it {
        acc.add(x);
    }
    acc.value()
}
