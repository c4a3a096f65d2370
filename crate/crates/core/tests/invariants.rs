use std::sync::Arc;

use contrastlab_core::fem::ScalarField;
use contrastlab_core::mesh::{build_annulus_sized, build_square_polygon, l_shaped_polygon, Side};
use contrastlab_core::powerseries::{run_series, SeriesOptions, SeriesStatus};
use contrastlab_core::transmission::{
    solve_direct, DomainData, ExteriorBc, InterfaceData, TransmissionProblem, Variant,
};
use contrastlab_core::C64;
use proptest::prelude::*;

fn bc_of(dirichlet: bool) -> ExteriorBc {
    if dirichlet {
        ExteriorBc::Dirichlet
    } else {
        ExteriorBc::Neumann
    }
}

fn max_diff(a: &ScalarField, b: &ScalarField) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

fn max_abs(a: &ScalarField) -> f64 {
    a.values().iter().map(|x| x.norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn annulus_meshes_are_valid(h in 0.08f64..0.45, r_outer in 1.3f64..3.0) {
        let m = build_annulus_sized(1.0, r_outer, h).unwrap();
        m.check_invariants().unwrap();
        let area = m.area(Side::Minus) + m.area(Side::Plus);
        prop_assert!(area < std::f64::consts::PI * r_outer * r_outer);
        prop_assert!(area > 0.9 * std::f64::consts::PI * r_outer * r_outer);
        prop_assert!(m.interface_length() <= 2.0 * std::f64::consts::PI);
    }

    #[test]
    fn polygon_meshes_are_valid(h in 0.08f64..0.3) {
        let m = build_square_polygon(1.0, &l_shaped_polygon(), h).unwrap();
        m.check_invariants().unwrap();
        let total = m.area(Side::Minus) + m.area(Side::Plus);
        prop_assert!((total - 4.0).abs() < 1e-12);
    }

    #[test]
    fn swapping_labels_leaves_the_solution_unchanged(
        dirichlet in any::<bool>(),
        log_rho in 0.5f64..4.0,
        arg in 0.0f64..std::f64::consts::FRAC_PI_2,
    ) {
        let mesh = Arc::new(build_annulus_sized(1.0, 2.0, 0.25).unwrap());
        let p = TransmissionProblem::new(
            bc_of(dirichlet),
            C64::new(1.0, 0.0),
            C64::from_polar(10f64.powf(log_rho), arg),
            DomainData::zero(),
            InterfaceData::preset("cos").unwrap(),
            Variant::Standard,
        ).unwrap();
        let u = solve_direct(&p, &mesh).unwrap();
        let swapped = Arc::new(mesh.swap_sides().unwrap());
        let v = solve_direct(&p.swapped(), &swapped).unwrap();
        prop_assert!(max_diff(&u, &v) <= 1e-9 * max_abs(&u), "{}", max_diff(&u, &v));
    }

    #[test]
    fn solution_is_linear_in_the_data(scale in -5.0f64..5.0, dirichlet in any::<bool>()) {
        let mesh = Arc::new(build_annulus_sized(1.0, 2.0, 0.25).unwrap());
        let make = |s: f64| TransmissionProblem::new(
            bc_of(dirichlet),
            C64::new(1.0, 0.0),
            C64::new(50.0, 0.0),
            DomainData::zero(),
            InterfaceData::new("cos_scaled", move |p| C64::new(s * p[0] / (p[0] * p[0] + p[1] * p[1]).sqrt(), 0.0)),
            Variant::Standard,
        ).unwrap();
        let u = solve_direct(&make(1.0), &mesh).unwrap();
        let v = solve_direct(&make(scale), &mesh).unwrap();
        let su = u.scaled(C64::new(scale, 0.0));
        prop_assert!(max_diff(&su, &v) <= 1e-10 * max_abs(&u).max(1e-300) * scale.abs().max(1.0));
    }

    #[test]
    fn converged_series_matches_direct(log_rho in 1.5f64..5.0, dirichlet in any::<bool>()) {
        let mesh = Arc::new(build_annulus_sized(1.0, 2.0, 0.25).unwrap());
        let rho = 10f64.powf(log_rho);
        let p = TransmissionProblem::new(
            bc_of(dirichlet),
            C64::new(1.0, 0.0),
            C64::new(rho, 0.0),
            DomainData::zero(),
            InterfaceData::preset("cos").unwrap(),
            Variant::Standard,
        ).unwrap();
        let run = run_series(&p, &mesh, &SeriesOptions::default()).unwrap();
        prop_assert_eq!(run.status, SeriesStatus::Converged);
        let direct = solve_direct(&p, &mesh).unwrap();
        prop_assert!(max_diff(&run.sum(), &direct) <= 1e-9 * max_abs(&direct));
    }
}
