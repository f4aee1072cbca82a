use std::f64::consts::PI;

use proptest::prelude::*;

use narrowline_core::dynamics::{jacobian_at, FlowParams, SemiclassicalState};
use narrowline_core::model::{derive_params, from_dimensionless, to_dimensionless, Coherence, PhysicalSystem};
use narrowline_core::steady_state::{bistability_thresholds, solve_branches};
use narrowline_core::DimensionlessPoint;

fn system() -> impl Strategy<Value = PhysicalSystem> {
    (300e-9..1200e-9f64, -3.0..3.0f64, 0.0..1.0f64, 1u64..1_000_000, 1e2..1e6f64, 0.01..1.0f64, 20e-6..500e-6f64)
        .prop_map(|(lambda, log_gamma, dephasing, n, finesse, length, waist)| {
            let gamma = 2.0 * PI * 10f64.powf(log_gamma);
            // T2 between the radiative limit and 100x shorter
            let t2 = 2.0 / gamma * 10f64.powf(-2.0 * dephasing);
            PhysicalSystem {
                length,
                mode_area: PI * waist * waist,
                ..PhysicalSystem::new(lambda, gamma, Coherence::T2(t2), n, finesse)
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn cooperativity_from_rates(sys in system()) {
        let d = derive_params(&sys).unwrap();
        let from_rates = d.coupling * d.coupling / (d.kappa * d.dipole_decay);
        prop_assert!((d.single_atom_cooperativity / from_rates - 1.0).abs() < 1e-12);
        let n0 = sys.gamma * d.dipole_decay / (4.0 * d.coupling * d.coupling);
        prop_assert!((d.saturation_photons / n0 - 1.0).abs() < 1e-12);
        // C kappa n0 = N gamma / 4
        prop_assert!((d.cooperativity * d.kappa * d.saturation_photons / (sys.atom_number as f64 * sys.gamma / 4.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn length_does_not_change_cooperativity(sys in system(), scale in 0.1..10.0f64) {
        let other = PhysicalSystem { length: sys.length * scale, ..sys.clone() };
        let (a, b) = (derive_params(&sys).unwrap(), derive_params(&other).unwrap());
        prop_assert_eq!(a.cooperativity, b.cooperativity);
        prop_assert!((a.kappa / b.kappa - scale).abs() < 1e-12 * scale);
    }

    #[test]
    fn physical_round_trip(sys in system(), drive in 1e-3..1e6f64, delta in -10.0..10.0f64, theta in -10.0..10.0f64) {
        let c = derive_params(&sys).unwrap().cooperativity;
        let p = DimensionlessPoint::new(c, drive, delta, theta);
        let phys = from_dimensionless(&sys, &p).unwrap();
        let back = to_dimensionless(&sys, phys.eta, phys.atom_cavity, phys.cavity_laser).unwrap();
        prop_assert_eq!(back.cooperativity, c);
        prop_assert!((back.drive / drive - 1.0).abs() < 1e-12);
        // omega_a - omega_c = delta / T2 - theta kappa cancels against theta kappa
        let stiffness = derive_params(&sys).unwrap().stiffness;
        prop_assert!((back.delta - delta).abs() < 1e-14 * (1.0 + delta.abs() + theta.abs() * stiffness));
        prop_assert!((back.theta - theta).abs() < 1e-12 * (1.0 + theta.abs()));
    }

    #[test]
    fn universality_of_steady_states(a in system(), b in system(), drive in 1e-2..1e5f64, delta in -3.0..3.0f64, theta in -3.0..3.0f64) {
        let ca = derive_params(&a).unwrap().cooperativity;
        let cb = derive_params(&b).unwrap().cooperativity;
        let b = PhysicalSystem { finesse: b.finesse * ca / cb, ..b };
        let p = DimensionlessPoint::new(ca, drive, delta, theta);
        let mut points = Vec::new();
        let mut spread: f64 = 1.0;
        for sys in [&a, &b] {
            let phys = from_dimensionless(sys, &p).unwrap();
            points.push(to_dimensionless(sys, phys.eta, phys.atom_cavity, phys.cavity_laser).unwrap());
            spread += theta.abs() * derive_params(sys).unwrap().stiffness;
        }
        for q in &points {
            prop_assert!((q.cooperativity / ca - 1.0).abs() < 1e-14);
            prop_assert!((q.drive / drive - 1.0).abs() < 1e-12);
            prop_assert!((q.delta - delta).abs() < 1e-14 * (spread + delta.abs()));
            prop_assert!((q.theta - theta).abs() < 1e-12);
        }
    }

    #[test]
    fn monotone_below_critical(c in 0.0..8.0f64, lo in -2.0..4.0f64, step in 1e-3..1.0f64) {
        let i1 = 10f64.powf(lo);
        let i2 = i1 * (1.0 + step);
        let u1 = solve_branches(&DimensionlessPoint::new(c, i1, 0.0, 0.0)).unwrap();
        let u2 = solve_branches(&DimensionlessPoint::new(c, i2, 0.0, 0.0)).unwrap();
        prop_assert_eq!(u1.len(), 1);
        prop_assert!(u2.top().intensity > u1.top().intensity);
        prop_assert!(u1.top().intensity <= i1);
    }

    #[test]
    fn outer_branches_grow_with_drive(c in 9.0..500.0f64, lo in -2.0..5.0f64, step in 1e-3..0.5f64) {
        let i1 = 10f64.powf(lo);
        let a = solve_branches(&DimensionlessPoint::new(c, i1, 0.0, 0.0)).unwrap();
        let b = solve_branches(&DimensionlessPoint::new(c, i1 * (1.0 + step), 0.0, 0.0)).unwrap();
        if a.len() == b.len() {
            prop_assert!(b.top().intensity > a.top().intensity);
            prop_assert!(b.bottom().intensity > a.bottom().intensity);
        }
        let t = bistability_thresholds(c).unwrap();
        let inside = i1 > t.lower.drive * (1.0 + 1e-9) && i1 < t.upper.drive * (1.0 - 1e-9);
        prop_assert_eq!(a.len() == 3, inside);
    }

    #[test]
    fn jacobian_matches_finite_differences(
        c in 0.0..300.0f64, drive in 1e-2..1e5f64, delta in -3.0..3.0f64, theta in -3.0..3.0f64,
        k in 1.0..1e4f64, g in 0.1..2.0f64,
        v in proptest::array::uniform5(-2.0..2.0f64),
    ) {
        let fp = FlowParams::new(&DimensionlessPoint::new(c, drive, delta, theta), k, g).unwrap();
        let x = nalgebra::Vector5::from_row_slice(&v);
        let j = jacobian_at(&x, &fp);
        let f = |y: &nalgebra::Vector5<f64>| narrowline_core::dynamics::rhs(&SemiclassicalState::from_vector(y), &fp);
        for col in 0..5 {
            let h = 1e-6 * (1.0 + x[col].abs());
            let (mut p, mut m) = (x, x);
            p[col] += h;
            m[col] -= h;
            let fd = (f(&p) - f(&m)) / (2.0 * h);
            let scale = j.column(col).amax().max(fd.amax()).max(1.0);
            prop_assert!((fd - j.column(col)).amax() < 1e-6 * scale, "column {col}");
        }
    }
}
