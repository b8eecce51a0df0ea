use serde::Serialize;

use super::SuppressionError;
use crate::mask::BinaryMask;

/// Overlap `2|A∩B| / (|A| + |B|)` together with the set sizes it came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiceScore {
    pub value: f64,
    pub size_a: usize,
    pub size_b: usize,
    pub intersection: usize,
}

/// Two empty masks score 1.
pub fn dice(a: &BinaryMask, b: &BinaryMask) -> Result<DiceScore, SuppressionError> {
    if a.dims() != b.dims() {
        return Err(SuppressionError::DimensionMismatch {
            expected: a.dims(),
            actual: b.dims(),
        });
    }
    let (mut size_a, mut size_b, mut intersection) = (0, 0, 0);
    for (&x, &y) in a.bits().iter().zip(b.bits()) {
        size_a += usize::from(x);
        size_b += usize::from(y);
        intersection += usize::from(x && y);
    }
    let value = if size_a + size_b == 0 {
        1.0
    } else {
        2.0 * intersection as f64 / (size_a + size_b) as f64
    };
    Ok(DiceScore {
        value,
        size_a,
        size_b,
        intersection,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_disjoint_partial() {
        let a = BinaryMask::new(5, 2, (0..10).map(|i| i < 4).collect()).unwrap();
        assert_eq!(dice(&a, &a).unwrap().value, 1.0);
        let b = a.complement();
        assert_eq!(dice(&a, &b).unwrap().value, 0.0);
        // |A| = 4, |B| = 6, |A∩B| = 3
        let c = BinaryMask::new(5, 2, (0..10).map(|i| (1..7).contains(&i)).collect()).unwrap();
        let d = dice(&a, &c).unwrap();
        assert_eq!((d.size_a, d.size_b, d.intersection), (4, 6, 3));
        assert_eq!(d.value, 0.6);
    }

    #[test]
    fn empty_pair_and_mismatch() {
        let e = BinaryMask::filled(3, 3, false);
        assert_eq!(dice(&e, &e).unwrap().value, 1.0);
        assert!(matches!(
            dice(&e, &BinaryMask::filled(3, 4, false)),
            Err(SuppressionError::DimensionMismatch { .. })
        ));
    }
}
