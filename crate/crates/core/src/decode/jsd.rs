//! Jensen-Shannon divergence in base 2: symmetric, non-negative, zero iff
//! the inputs are equal, and bounded by 1.

use crate::error::{Error, Result};

pub fn jsd(p: &[f32], q: &[f32]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Input(format!(
            "distribution lengths differ: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    let mut acc = 0.0f64;
    for (&pi, &qi) in p.iter().zip(q) {
        let pi = pi as f64;
        let qi = qi as f64;
        let mi = 0.5 * (pi + qi);
        // 0 * log(0/m) is zero by convention; m > 0 whenever either side is.
        if pi > 0.0 {
            acc += 0.5 * pi * (pi / mi).log2();
        }
        if qi > 0.0 {
            acc += 0.5 * qi * (qi / mi).log2();
        }
    }
    Ok(acc.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_distributions_give_zero() {
        let p = vec![0.25f32, 0.25, 0.5];
        assert_eq!(jsd(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn disjoint_support_hits_the_base2_maximum() {
        assert!((jsd(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn length_mismatch_is_an_input_error() {
        assert!(matches!(jsd(&[1.0], &[0.5, 0.5]), Err(Error::Input(_))));
    }

    fn arb_dist(len: usize) -> impl Strategy<Value = Vec<f32>> {
        proptest::collection::vec(0.01f32..1.0, len).prop_map(|v| {
            let s: f32 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        })
    }

    proptest! {
        #[test]
        fn symmetric_nonnegative_bounded((p, q) in (arb_dist(8), arb_dist(8))) {
            let a = jsd(&p, &q).unwrap();
            let b = jsd(&q, &p).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!(a >= 0.0);
            prop_assert!(a <= 1.0 + 1e-9);
        }
    }
}
