use num_bigint::BigUint;

use super::SuppressionError;
use crate::imaging::Histogram;
use crate::scalar::Scalar;

/// Otsu's threshold on a histogram, as a bin index `t`.
///
/// Classes are bins `<= t` and bins `> t`. The between-class variance
/// `w0 * w1 * (mu0 - mu1)^2` is compared in exact integer arithmetic via
/// the equivalent form `(N * S0 - n0 * S)^2 / (n0 * n1)`, so ties are
/// real ties and resolve to the smallest `t`.
pub fn otsu_threshold<T: Scalar>(h: &Histogram<T>) -> Result<usize, SuppressionError> {
    let counts = h.counts();
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(SuppressionError::ConstantImage);
    }
    let n_total = BigUint::from(h.total());
    let s_total: BigUint = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| BigUint::from(i as u64) * c)
        .sum();

    let mut best: Option<(usize, BigUint, BigUint)> = None;
    let mut n0: u64 = 0;
    let mut s0 = BigUint::from(0u8);
    for (t, &c) in counts.iter().enumerate().take(counts.len() - 1) {
        n0 += c;
        s0 += BigUint::from(t as u64) * c;
        let n1 = h.total() - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let a = &n_total * &s0;
        let b = BigUint::from(n0) * &s_total;
        let diff = if a >= b { a - b } else { b - a };
        let num = &diff * &diff;
        let den = BigUint::from(n0) * n1;
        let better = match &best {
            None => true,
            Some((_, bn, bd)) => &num * bd > bn * &den,
        };
        if better {
            best = Some((t, num, den));
        }
    }
    Ok(best.map(|(t, _, _)| t).expect("two nonzero bins give a valid split"))
}

/// Real-valued cut for an Otsu bin: pixels strictly above it are foreground.
pub fn otsu_cut_value<T: Scalar>(h: &Histogram<T>, t: usize) -> T {
    h.bin_lower_edge(t + 1)
}
