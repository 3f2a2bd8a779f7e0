//! Deterministic quasi-random points for sampled checks.

const PRIMES: [u32; 24] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89];

/// Radical inverse of `index` in `base`, in [0, 1).
pub fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += (index % b) as f64 * f;
        index /= b;
        f *= inv;
    }
    r
}

/// Halton sequence in the unit cube; index 0 (the origin) is skipped.
#[derive(Clone, Debug)]
pub struct Halton {
    dim: usize,
    next: u64,
}

impl Halton {
    pub fn new(dim: usize) -> Halton {
        assert!(dim <= PRIMES.len(), "Halton sequence supports at most {} dimensions", PRIMES.len());
        Halton { dim, next: 1 }
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        let i = self.next;
        self.next += 1;
        (0..self.dim).map(|d| radical_inverse(i, PRIMES[d])).collect()
    }

    /// Next point mapped affinely onto the box [lo, hi].
    pub fn next_in(&mut self, lo: &[f64], hi: &[f64]) -> Vec<f64> {
        self.next_point().iter().zip(lo.iter().zip(hi)).map(|(u, (a, b))| a + u * (b - a)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_two_sequence() {
        let v: Vec<f64> = (1..5).map(|i| radical_inverse(i, 2)).collect();
        assert_eq!(v, vec![0.5, 0.25, 0.75, 0.125]);
    }

    #[test]
    fn points_stay_in_box() {
        let mut h = Halton::new(3);
        for _ in 0..100 {
            let p = h.next_in(&[-1.0, 0.0, 2.0], &[1.0, 0.5, 3.0]);
            assert!(p[0] >= -1.0 && p[0] < 1.0 && p[1] >= 0.0 && p[1] < 0.5 && p[2] >= 2.0 && p[2] < 3.0);
        }
    }
}
