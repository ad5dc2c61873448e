//! Per-trial observation buffers shared by the methods of a paired trial.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dist::SimpleDistribution;

/// Observations drawn lazily from `dist` and kept, so a second method can
/// replay exactly the sequence the first one saw (and extend it if it needs
/// more).
#[derive(Debug)]
pub struct PairedStream {
    dist: SimpleDistribution,
    rng: ChaCha8Rng,
    values: Vec<f64>,
}

impl PairedStream {
    pub fn new(dist: SimpleDistribution, seed: u64) -> Self {
        PairedStream { dist, rng: ChaCha8Rng::seed_from_u64(seed), values: Vec::new() }
    }

    /// A fresh pass from the first observation.
    pub fn replay(&mut self) -> Cursor<'_> {
        Cursor { stream: self, pos: 0 }
    }

    pub fn generated(&self) -> usize {
        self.values.len()
    }
}

pub struct Cursor<'a> {
    stream: &'a mut PairedStream,
    pos: usize,
}

impl Iterator for Cursor<'_> {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let s = &mut *self.stream;
        if self.pos == s.values.len() {
            let x = s.dist.sample(&mut s.rng);
            s.values.push(x);
        }
        self.pos += 1;
        Some(s.values[self.pos - 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replays_are_identical_prefixes() {
        let mut s = PairedStream::new(SimpleDistribution::bernoulli(0.4).unwrap(), 5);
        let a: Vec<f64> = s.replay().take(30).collect();
        let b: Vec<f64> = s.replay().take(50).collect();
        assert_eq!(&b[..30], &a[..]);
        assert_eq!(s.generated(), 50);
        let mut t = PairedStream::new(SimpleDistribution::bernoulli(0.4).unwrap(), 5);
        let c: Vec<f64> = t.replay().take(50).collect();
        assert_eq!(b, c);
    }
}
