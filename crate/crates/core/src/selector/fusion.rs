use crate::Scalar;

/// Min-max normalisation to `[0, 1]`; a constant input maps to `0.5` everywhere.
pub fn minmax_normalize<F: Scalar>(values: &[F]) -> Vec<F> {
    let Some(&first) = values.first() else {
        return Vec::new();
    };
    let (lo, hi) = values
        .iter()
        .fold((first, first), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    if span <= F::zero() {
        return vec![F::lit(0.5); values.len()];
    }
    values.iter().map(|&v| (v - lo) / span).collect()
}

/// Normalised inputs and the fused score of every candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct Fusion<F> {
    pub s1_norm: Vec<F>,
    pub s2_norm: Vec<F>,
    pub s_final: Vec<F>,
}

/// `lambda * norm(s1) + (1 - lambda) * norm(s2)` with `s2` oriented so that
/// larger is better.
pub fn fuse<F: Scalar>(lambda: F, s1: &[F], s2_goodness: &[F]) -> Fusion<F> {
    assert_eq!(s1.len(), s2_goodness.len(), "score vectors differ in length");
    let s1_norm = minmax_normalize(s1);
    let s2_norm = minmax_normalize(s2_goodness);
    let s_final = s1_norm
        .iter()
        .zip(&s2_norm)
        .map(|(&a, &b)| lambda * a + (F::one() - lambda) * b)
        .collect();
    Fusion {
        s1_norm,
        s2_norm,
        s_final,
    }
}

/// Index of the largest value; ties go to the earliest index.
pub fn argmax_first<F: Scalar>(values: &[F]) -> Option<usize> {
    let mut best: Option<(usize, F)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if !(v > b) => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minmax_examples() {
        assert_eq!(minmax_normalize(&[1.0, 2.0, 3.0]), [0.0, 0.5, 1.0]);
        assert_eq!(minmax_normalize(&[4.0, 4.0, 4.0]), [0.5, 0.5, 0.5]);
        assert_eq!(minmax_normalize(&[-2.0, -5.0, -3.5]), [1.0, 0.0, 0.5]);
        assert!(minmax_normalize::<f64>(&[]).is_empty());
    }

    #[test]
    fn fusion_works_in_f32() {
        let f = fuse(0.7f32, &[0.9, 0.5, 0.75, 0.9], &[-2.0, -1.0, -1.5, -3.0]);
        let want = [0.85f32, 0.30, 0.6625, 0.70];
        for (g, w) in f.s_final.iter().zip(want) {
            assert!((g - w).abs() < 1e-6);
        }
        assert_eq!(argmax_first(&f.s_final), Some(0));
    }

    #[test]
    fn argmax_prefers_earliest_tie() {
        assert_eq!(argmax_first(&[0.1, 0.7, 0.7, 0.2]), Some(1));
        assert_eq!(argmax_first::<f64>(&[]), None);
    }

    proptest! {
        #[test]
        fn normalised_values_lie_in_unit_interval(v in prop::collection::vec(-1e6f64..1e6, 1..20)) {
            for x in minmax_normalize(&v) {
                prop_assert!((0.0..=1.0).contains(&x));
            }
        }

        #[test]
        fn argmax_is_affine_invariant(
            s1 in prop::collection::vec(0.0f64..1.0, 2..10),
            scale in 0.1f64..10.0,
            shift in -5.0f64..5.0,
            lambda in 0.0f64..=1.0,
        ) {
            let s2: Vec<f64> = s1.iter().rev().map(|x| -x * 3.0).collect();
            let base = argmax_first(&fuse(lambda, &s1, &s2).s_final);
            let moved: Vec<f64> = s1.iter().map(|x| scale * x + shift).collect();
            let fused = fuse(lambda, &moved, &s2);
            let other = argmax_first(&fused.s_final).unwrap();
            // Affine maps can perturb the last bits of the normalised scores, so
            // compare fused values rather than indices when there is a near tie.
            let b = base.unwrap();
            prop_assert!((fused.s_final[other] - fused.s_final[b]).abs() < 1e-9);
        }
    }
}
