//! Property-based invariants over randomized inputs.

use carleman_lab::domain::{build_grid, DomainSpec, SpatialDomain};
use carleman_lab::carleman::Bump;
use carleman_lab::geometry::mu_levels;
use carleman_lab::logsum::{logsumexp, LogSum};
use proptest::prelude::*;

proptest! {
    #[test]
    fn mu_levels_strictly_ordered(
        norm in 0.1f64..10.0,
        frac in 0.51f64..0.99,
        lambda in 0.1f64..8.0,
        n in 2usize..64,
    ) {
        // beta eps^2 in (norm/2, norm): the admissible interval
        let mu = mu_levels(norm, frac * norm, lambda, n);
        prop_assert!(mu[0] < mu[1] && mu[1] < mu[2] && mu[2] < mu[3]);
        prop_assert!(mu.iter().all(|m| *m > 0.0));
    }

    #[test]
    fn logsum_matches_naive_sum(values in prop::collection::vec(1e-6f64..1e6, 1..40)) {
        let mut acc = LogSum::new();
        for v in &values {
            acc.add(v.ln());
        }
        let naive: f64 = values.iter().sum();
        let rel = (acc.value().exp() - naive).abs() / naive;
        prop_assert!(rel < 1e-12, "rel {rel}");
    }

    #[test]
    fn logsumexp_commutes_and_shifts(a in -50.0f64..50.0, b in -50.0f64..50.0, c in -30.0f64..30.0) {
        let ab = logsumexp(a, b);
        prop_assert!((ab - logsumexp(b, a)).abs() < 1e-13);
        // shifting both inputs shifts the output by the same amount
        prop_assert!((logsumexp(a + c, b + c) - (ab + c)).abs() < 1e-10);
        prop_assert!(ab >= a.max(b));
    }

    #[test]
    fn bump_bounded_and_supported(
        center in prop::collection::vec(0.3f64..0.7, 4),
        radius in prop::collection::vec(0.05f64..0.3, 4),
        probe in prop::collection::vec(0.0f64..1.0, 4),
    ) {
        let b = Bump { center: center.clone(), radius: radius.clone() };
        let v = b.value(&probe);
        prop_assert!((0.0..=1.0).contains(&v));
        let outside = (0..4).any(|k| (probe[k] - center[k]).abs() >= radius[k]);
        if outside {
            prop_assert_eq!(v, 0.0);
        }
        prop_assert_eq!(b.value(&center), 1.0);
    }

    #[test]
    fn quad_weights_sum_to_volume(
        shape in prop::collection::vec(3usize..8, 4),
        t_max in 0.5f64..2.0,
        a_max in 0.5f64..2.0,
    ) {
        let spec = DomainSpec {
            spatial: SpatialDomain::Interval { lo: 0.0, hi: 1.0 },
            t_max,
            a_max,
            tau_min: 0.0,
            tau_max: 1.0,
        };
        let g = build_grid(&spec, &shape).unwrap();
        let total: f64 = (0..g.len()).map(|i| g.quad_weight(i)).sum();
        let volume = t_max * a_max;
        prop_assert!(((total - volume) / volume).abs() < 1e-12, "total {total} vs {volume}");
    }
}
