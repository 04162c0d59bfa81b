//! Argmax with uniform random tie-breaking, shared by every module that
//! selects a maximizing index. Comparison is strict floating-point equality;
//! no tolerance band.

use rand::Rng;

/// Index of the maximum of `f(0..n)`, ties broken uniformly at random.
/// Consumes randomness only when the maximum is attained more than once.
pub(crate) fn argmax_tied_by(n: usize, f: impl Fn(usize) -> f64, rng: &mut impl Rng) -> usize {
    assert!(n > 0, "argmax over empty range");
    let mut best = f(0);
    let mut ties = 1usize;
    for i in 1..n {
        let v = f(i);
        if v > best {
            best = v;
            ties = 1;
        } else if v == best {
            ties += 1;
        }
    }
    if ties == 1 {
        (0..n).find(|&i| f(i) == best).unwrap()
    } else {
        let pick = rng.random_range(0..ties);
        let mut seen = 0usize;
        for i in 0..n {
            if f(i) == best {
                if seen == pick {
                    return i;
                }
                seen += 1;
            }
        }
        unreachable!("tie index within counted ties")
    }
}

pub(crate) fn argmax_tied(values: &[f64], rng: &mut impl Rng) -> usize {
    argmax_tied_by(values.len(), |i| values[i], rng)
}

/// Plain first-index argmax, used where a deterministic rule is required.
pub(crate) fn argmax_first(values: &[f64]) -> usize {
    assert!(!values.is_empty(), "argmax over empty slice");
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::stream_rng;
    use rand::Rng;

    #[test]
    fn unique_max_needs_no_randomness() {
        let mut rng = stream_rng(0, 0);
        let before = rng.clone();
        assert_eq!(argmax_tied(&[0.0, 1.0, 0.5], &mut rng), 1);
        // strict comparison: 1.0 - 1e-15 loses to 1.0 deterministically
        assert_eq!(argmax_tied(&[1.0, 1.0 - 1e-15], &mut rng), 0);
        let mut b = before;
        assert_eq!(rng.random::<u64>(), b.random::<u64>());
    }

    #[test]
    fn ties_are_uniform() {
        let mut rng = stream_rng(1, 0);
        let mut counts = [0usize; 3];
        for _ in 0..30_000 {
            counts[argmax_tied(&[2.0, 2.0, 2.0], &mut rng)] += 1;
        }
        for c in counts {
            let freq = c as f64 / 30_000.0;
            assert!((freq - 1.0 / 3.0).abs() < 0.02, "freq {freq}");
        }
    }

    #[test]
    fn first_index_rule() {
        assert_eq!(argmax_first(&[1.0, 1.0, 0.0]), 0);
        assert_eq!(argmax_first(&[-1.0, 3.0, 3.0]), 1);
    }
}
