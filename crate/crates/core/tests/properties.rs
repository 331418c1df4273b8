use num_complex::Complex64;
use proptest::prelude::*;

use sparse_dfrc::array::{
    aperture_efficiency, pattern, pattern_at, peak_sidelobe_level, AngularGrid, ArrayGeometry, Beamformer, GridBuilder,
    SelectionVector,
};
use sparse_dfrc::selection::swap_update;
use sparse_dfrc::signaling::{ber_curve, demap, estimate_symbol, wrap_phase, ChannelModel, SymbolDictionary};

fn weights(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n)
        .prop_map(|v| v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect())
}

fn nonzero(w: &[Complex64]) -> bool {
    w.iter().map(|x| x.norm()).sum::<f64>() > 1e-3
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn steering_is_conjugate_symmetric(n in 1usize..20, d in 0.1f64..1.0, theta in -90.0f64..90.0) {
        let g = ArrayGeometry::ula(n, d).unwrap();
        let a = g.steering_vector(theta).unwrap();
        let b = g.steering_vector(-theta).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y.conj()).norm() < 1e-12);
            prop_assert!((x.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pattern_is_linear_in_weights(
        w1 in weights(8), w2 in weights(8),
        a in -2.0f64..2.0, b in -2.0f64..2.0, theta in -90.0f64..90.0,
    ) {
        let g = ArrayGeometry::ula(8, 0.25).unwrap();
        // the pattern is w^H a, so complex scalars come out conjugated
        let s = Complex64::new(a, b);
        let mix: Vec<Complex64> = w1.iter().zip(&w2).map(|(x, y)| s * x + y).collect();
        let lhs = pattern_at(&mix, &g, theta).unwrap();
        let rhs = s.conj() * pattern_at(&w1, &g, theta).unwrap() + pattern_at(&w2, &g, theta).unwrap();
        prop_assert!((lhs - rhs).norm() < 1e-9);
    }

    #[test]
    fn psl_and_efficiency_ignore_scaling(w in weights(10), mag in 0.01f64..100.0, ph in -3.0f64..3.0) {
        prop_assume!(nonzero(&w));
        let g = ArrayGeometry::ula(10, 0.5).unwrap();
        let grid = GridBuilder::new(-5.0, 5.0).build().unwrap();
        let s = Complex64::from_polar(mag, ph);
        let ws: Vec<Complex64> = w.iter().map(|x| s * x).collect();
        let p0 = pattern(&w, &g, &grid).unwrap();
        let p1 = pattern(&ws, &g, &grid).unwrap();
        let d = peak_sidelobe_level(&p0, &grid).unwrap() - peak_sidelobe_level(&p1, &grid).unwrap();
        prop_assert!(d.abs() < 1e-8);
        let e0 = aperture_efficiency(&w, &g).unwrap();
        let e1 = aperture_efficiency(&ws, &g).unwrap();
        prop_assert!((e0 - e1).abs() < 1e-8 * e0.max(1.0));
    }

    #[test]
    fn swap_keeps_budget_and_stays_binary(w in weights(12), picks in prop::sample::subsequence((0..12).collect::<Vec<_>>(), 1..12)) {
        let r = SelectionVector::from_indices(12, &picks).unwrap();
        let out = swap_update(&Beamformer::new(w.clone()), &r).unwrap();
        prop_assert!(out.selection.is_binary());
        prop_assert_eq!(out.selection.selected_indices().len(), picks.len());
        let (i, o) = (out.p1.unwrap(), out.p2.unwrap());
        prop_assert!(!r.is_selected(i) && r.is_selected(o));
        prop_assert!(out.selection.is_selected(i) && !out.selection.is_selected(o));
        for n in r.unselected_indices() {
            prop_assert!(w[n].norm() <= w[i].norm() + 1e-9);
        }
        for n in r.selected_indices() {
            prop_assert!(w[n].norm() >= w[o].norm() - 1e-9);
        }
    }

    #[test]
    fn noiseless_estimate_recovers_symbol(
        mag in 0.001f64..10.0, ph in -3.1f64..3.1, bmag in 0.01f64..10.0, bph in -3.1f64..3.1,
    ) {
        let beta = Complex64::from_polar(bmag, bph);
        let y = beta * Complex64::from_polar(mag, ph);
        let (g, phi) = estimate_symbol(y, beta).unwrap();
        prop_assert!((g - mag).abs() < 1e-9 * mag.max(1.0));
        prop_assert!(wrap_phase(phi - ph).abs() < 1e-9);
    }

    #[test]
    fn phase_demap_ignores_magnitude(k in 0usize..4, scale in 0.01f64..100.0, jitter in -0.5f64..0.5) {
        let d = SymbolDictionary::qpsk(1.0).unwrap();
        let s = d.symbols()[k];
        let bits = demap((scale * s.norm(), s.arg() + jitter), &d, 1.0);
        prop_assert_eq!(bits, d.bits_of(k));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn ber_falls_with_snr_under_common_numbers(seed in 0u64..1000, a in 0.2f64..1.0) {
        // each binary decision region is a half-plane around its symbol, so
        // with the noise draws held fixed an error at one SNR implies an error
        // at every lower SNR
        let d = SymbolDictionary::bpsk(a).unwrap();
        let snr: Vec<f64> = (0..8).map(|i| -4.0 + 2.0 * i as f64).collect();
        let c = ber_curve(d.symbols(), &d, &ChannelModel::default(), &snr, 1, 2000, seed).unwrap();
        for w in c.ber.windows(2) {
            prop_assert!(w[1] <= w[0], "{:?}", c.ber);
        }
    }
}

#[test]
fn uniform_grid_has_requested_spacing() {
    let g = AngularGrid::uniform(-90.0, 90.0, 0.5, sparse_dfrc::array::Region::Sidelobe).unwrap();
    assert_eq!(g.len(), 361);
    assert!((g.angles()[360] - 90.0).abs() < 1e-12);
}
