/// Extrapolated blow-up time from three refinement levels.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Extrapolation {
    pub t_est: f64,
    pub uncertainty: f64,
    /// Observed convergence order (clamped to `[1, 2]`); `None` when the
    /// sequence was not monotone and no extrapolation was attempted.
    pub order: Option<f64>,
}

/// Richardson extrapolation of detection times measured at `dx`, `dx/2`,
/// `dx/4` (in that order).
///
/// The observed order `q = log2(|T1 - T2| / |T2 - T3|)` is clamped to the
/// range of the scheme, `[1, 2]`, and `T3 + (T3 - T2)/(2^q - 1)` is returned
/// with uncertainty `|T_est - T3|`. A non-monotone sequence returns the finest
/// value with the full spread as uncertainty.
pub fn blowup_time_extrapolate(times: [f64; 3]) -> Extrapolation {
    let [t1, t2, t3] = times;
    let (d12, d23) = (t2 - t1, t3 - t2);
    if d12 == 0.0 && d23 == 0.0 {
        return Extrapolation {
            t_est: t3,
            uncertainty: 0.0,
            order: None,
        };
    }
    let monotone = d12 * d23 > 0.0 && d23.abs() < d12.abs();
    if !monotone {
        let hi = t1.max(t2).max(t3);
        let lo = t1.min(t2).min(t3);
        return Extrapolation {
            t_est: t3,
            uncertainty: hi - lo,
            order: None,
        };
    }
    let q = (d12.abs() / d23.abs()).log2().clamp(1.0, 2.0);
    let t_est = t3 + d23 / (2f64.powf(q) - 1.0);
    Extrapolation {
        t_est,
        uncertainty: (t_est - t3).abs(),
        order: Some(q),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_levels() {
        let e = blowup_time_extrapolate([2.5, 2.5, 2.5]);
        assert_eq!(e.t_est, 2.5);
        assert_eq!(e.uncertainty, 0.0);
    }

    #[test]
    fn first_order_geometric_sequence() {
        // Oracle: T(h) = 1 + 0.2 h with h = 1/2, 1/4, 1/8 has limit 1.
        let e = blowup_time_extrapolate([1.10, 1.05, 1.025]);
        assert!((e.t_est - 1.0).abs() < 1e-12);
        assert!((e.order.unwrap() - 1.0).abs() < 1e-12);
        assert!(e.uncertainty <= (1.05f64 - 1.025).abs() + 1e-15);
    }

    #[test]
    fn second_order_geometric_sequence() {
        let h = [0.1, 0.05, 0.025];
        let times = h.map(|h| 3.0 - 7.0 * h * h);
        let e = blowup_time_extrapolate(times);
        assert!((e.t_est - 3.0).abs() < 1e-12);
    }

    #[test]
    fn non_monotone_sequence_returns_finest_with_full_spread() {
        let e = blowup_time_extrapolate([1.0, 1.2, 1.1]);
        assert_eq!(e.t_est, 1.1);
        assert!((e.uncertainty - 0.2).abs() < 1e-15);
        assert_eq!(e.order, None);
    }

    proptest::proptest! {
        #[test]
        fn uncertainty_bounded_by_last_increment(t1 in 0.5..50.0f64, a in -1.0..1.0f64, b in -1.0..1.0f64) {
            let t2 = t1 + a;
            let t3 = t2 + b;
            let e = blowup_time_extrapolate([t1, t2, t3]);
            if e.order.is_some() {
                proptest::prop_assert!(e.uncertainty <= (t3 - t2).abs() * (1.0 + 1e-12));
            }
        }
    }
}
