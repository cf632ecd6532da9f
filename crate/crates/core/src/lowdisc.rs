//! Randomly shifted Halton points on the unit hypercube.

use rand::Rng as _;

use crate::seed;

const PRIMES: [u32; 32] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103,
    107, 109, 113, 127, 131,
];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// `n` Halton points in `[0,1)^p`, each coordinate rotated by a seeded
/// uniform shift (Cranley-Patterson). Dimensions beyond the prime table fall
/// back to plain uniform draws.
pub fn shifted_halton(n: usize, p: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = seed::rng(seed);
    let shift: Vec<f64> = (0..p).map(|_| rng.gen()).collect();
    (0..n)
        .map(|i| {
            (0..p)
                .map(|d| match PRIMES.get(d) {
                    Some(&b) => {
                        let v = radical_inverse(i as u64 + 1, b as u64) + shift[d];
                        v - v.floor()
                    }
                    None => rng.gen(),
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radical_inverse_base_two() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(3, 2), 0.75);
    }

    #[test]
    fn points_in_unit_cube_and_spread() {
        let pts = shifted_halton(256, 2, 3);
        assert!(pts.iter().flatten().all(|v| (0.0..1.0).contains(v)));
        // every quadrant gets roughly a quarter
        let q = pts.iter().filter(|p| p[0] < 0.5 && p[1] < 0.5).count();
        assert!((54..=74).contains(&q), "{q}");
        assert_eq!(pts, shifted_halton(256, 2, 3));
        assert_ne!(pts, shifted_halton(256, 2, 4));
    }
}
