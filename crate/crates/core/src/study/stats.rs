use super::StudyError;

/// Min–max scales one volunteer's durations onto [0, 1].
pub fn normalize_times(durations: &[f64]) -> Result<Vec<f64>, StudyError> {
    if durations.len() < 2 {
        return Err(StudyError::NotNormalizable(format!(
            "{} trial(s); at least 2 are needed",
            durations.len()
        )));
    }
    if let Some(bad) = durations.iter().find(|d| !d.is_finite()) {
        return Err(StudyError::NotNormalizable(format!("non-finite duration {bad}")));
    }
    let min = durations.iter().copied().fold(f64::INFINITY, f64::min);
    let max = durations.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    if range <= 0.0 {
        return Err(StudyError::NotNormalizable(format!("all durations equal {min}")));
    }
    Ok(durations.iter().map(|t| (t - min) / range).collect())
}

/// Relative reduction of the mean normalised search time, in percent.
pub fn compute_improvement(mean_original: f64, mean_inpainted: f64) -> Result<f64, StudyError> {
    if !mean_original.is_finite() || mean_original <= 0.0 {
        return Err(StudyError::NonPositiveBaseline(mean_original));
    }
    Ok((mean_original - mean_inpainted) / mean_original * 100.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn min_max_example() {
        assert_eq!(normalize_times(&[2000.0, 4000.0, 6000.0]).unwrap(), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn not_normalizable() {
        assert!(matches!(normalize_times(&[5.0, 5.0, 5.0]), Err(StudyError::NotNormalizable(_))));
        assert!(matches!(normalize_times(&[5.0]), Err(StudyError::NotNormalizable(_))));
        assert!(normalize_times(&[]).is_err());
    }

    #[test]
    fn table_values() {
        let cases = [
            (0.4165, 0.2547, 38.85),
            (0.4569, 0.2834, 37.97),
            (0.5059, 0.3707, 26.72),
            (0.4669, 0.3269, 29.99),
        ];
        for (o, i, want) in cases {
            let got = compute_improvement(o, i).unwrap();
            assert!((got - want).abs() <= 0.01, "{o} {i}: {got}");
        }
        assert_eq!(compute_improvement(0.3, 0.3).unwrap(), 0.0);
        assert!(compute_improvement(0.0, 0.1).is_err());
        assert!(compute_improvement(-1.0, 0.1).is_err());
    }

    fn durations() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.0f64..60_000.0, 2..40)
            .prop_filter("needs spread", |v| v.iter().any(|&x| x != v[0]))
    }

    proptest! {
        #[test]
        fn normalized_range(v in durations()) {
            let n = normalize_times(&v).unwrap();
            let lo = n.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = n.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(lo, 0.0);
            prop_assert_eq!(hi, 1.0);
        }

        #[test]
        fn order_preserving(v in durations()) {
            let n = normalize_times(&v).unwrap();
            for i in 0..v.len() {
                for j in 0..v.len() {
                    if v[i] < v[j] {
                        prop_assert!(n[i] <= n[j]);
                    }
                }
            }
        }

        #[test]
        fn affine_invariant(v in durations(), a in 0.01f64..100.0, b in -1000.0f64..1000.0) {
            let n = normalize_times(&v).unwrap();
            let shifted: Vec<f64> = v.iter().map(|t| a * t + b).collect();
            let m = normalize_times(&shifted).unwrap();
            for (x, y) in n.iter().zip(&m) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn improvement_antisymmetric(a in 0.01f64..1.0, b in 0.01f64..1.0) {
            let ab = compute_improvement(a, b).unwrap() * a;
            let ba = compute_improvement(b, a).unwrap() * b;
            prop_assert!((ab + ba).abs() < 1e-9);
        }
    }
}
