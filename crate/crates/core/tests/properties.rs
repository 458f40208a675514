use biofilm_core::constitutive::ModelParams;
use biofilm_core::coupling::{CouplingConfig, Simulation};
use biofilm_core::flow::{max_abs_divergence, ObstacleField, Projector};
use biofilm_core::grid::{center_speeds, Grid, ScalarField, Side, VectorField};
use biofilm_core::io::{parse_config, SimConfig};
use biofilm_core::mollify::{build_cutoff, mollify_cut, MollifierKernel};
use biofilm_core::transport::upwind_divergence;
use proptest::prelude::*;

fn grid(nx: usize, ny: usize) -> Grid {
    Grid::new(2, &[1.0, ny as f64 / nx as f64], &[nx, ny], &[Side::XMin]).unwrap()
}

fn face_field(g: &Grid, values: &[f64]) -> VectorField {
    let mut v = VectorField::zeros(g);
    let mut it = values.iter().cycle();
    for a in 0..2 {
        v.comps[a].iter_mut().for_each(|x| *x = *it.next().unwrap());
    }
    v
}

fn cell_values(g: &Grid, values: &[f64]) -> Vec<f64> {
    values.iter().cycle().take(g.num_cells()).copied().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn speed_bound_is_monotone_and_capped(mu in 0.01f64..0.4, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let p = ModelParams { mu, ..ModelParams::default() };
        prop_assume!(p.validate().is_ok());
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let (pl, ph) = (p.p_mu_clamped(lo), p.p_mu_clamped(hi));
        prop_assert!(ph <= pl);
        prop_assert!(pl <= p.p_mu_max() && ph >= mu);
    }

    #[test]
    fn regularized_potential_inverts(r in 0.0f64..1.5) {
        let p = ModelParams::default();
        let s = p.beta_reg(r);
        prop_assert!(s >= 0.0);
        prop_assert!(p.beta_reg_prime(r) >= 0.0);
        let back = p.beta_reg_inv_nonneg(s);
        prop_assert!((back - r).abs() <= 1e-9 * (1.0 + r), "{} vs {}", back, r);
    }

    #[test]
    fn bounded_projection_is_feasible_idempotent_and_nonexpansive(
        nx in 3usize..7,
        ny in 3usize..7,
        a in prop::collection::vec(-2.0f64..2.0, 16..48),
        b in prop::collection::vec(-2.0f64..2.0, 16..48),
        bounds in prop::collection::vec(0.05f64..1.0, 4..20),
    ) {
        let g = grid(nx, ny);
        let proj = Projector::new(&g);
        let obs = ObstacleField { grid: g, values: cell_values(&g, &bounds) };
        let (va, vb) = (face_field(&g, &a), face_field(&g, &b));
        let (pa, ra) = proj.project_k(&va, &obs, 1e-12, 200_000).unwrap();
        let (pb, _) = proj.project_k(&vb, &obs, 1e-12, 200_000).unwrap();
        prop_assert!(ra.max_excess <= 1e-15);
        prop_assert!(max_abs_divergence(&pa) <= 1e-9);
        prop_assert_eq!(pa.boundary_max_abs(), 0.0);
        for (s, o) in center_speeds(&pa).iter().zip(&obs.values) {
            prop_assert!(*s <= o * (1.0 + 1e-14));
        }
        let (paa, _) = proj.project_k(&pa, &obs, 1e-12, 200_000).unwrap();
        prop_assert!(paa.sub(&pa).max_abs() <= 1e-9);
        let gap = pa.sub(&pb).dot(&pa.sub(&pb)).sqrt();
        let orig = va.sub(&vb).dot(&va.sub(&vb)).sqrt();
        prop_assert!(gap <= orig * (1.0 + 1e-6) + 1e-9);
    }

    #[test]
    fn mollified_biomass_stays_in_range(
        n in 8usize..20,
        values in prop::collection::vec(0.0f64..1.0, 8..64),
    ) {
        let g = grid(n, n);
        let u = ScalarField::from_values(&g, cell_values(&g, &values)).unwrap();
        let cutoff = build_cutoff(&g, 0.05).unwrap();
        let kernel = MollifierKernel::new(0.1, &g).unwrap();
        let m = mollify_cut(&u, &cutoff, &kernel);
        let top = u.max();
        for x in &m.values {
            prop_assert!(*x >= 0.0 && *x <= top * (1.0 + 1e-12));
        }
    }

    #[test]
    fn upwind_transport_conserves_without_boundary_flux(
        n in 3usize..9,
        z in prop::collection::vec(0.0f64..1.0, 9..81),
        v in prop::collection::vec(-1.0f64..1.0, 16..48),
    ) {
        let g = grid(n, n);
        let mut vf = face_field(&g, &v);
        vf.zero_boundary();
        let d = upwind_divergence(&cell_values(&g, &z), &vf);
        prop_assert!(d.iter().sum::<f64>().abs() <= 1e-10);
    }

    #[test]
    fn config_print_parse_fixed_point(
        nx in 2usize..100,
        ny in 2usize..100,
        mu in 0.01f64..0.3,
        dt in 1e-5f64..1e-2,
        seed in 0..=i64::MAX as u64,
    ) {
        let mut cfg = SimConfig::default();
        cfg.grid.cells = vec![nx, ny];
        cfg.model.mu = mu;
        cfg.time.dt = dt;
        cfg.initial.seed = seed;
        let back = parse_config(&cfg.to_toml().unwrap()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn coupled_step_keeps_densities_in_range(
        amp in 0.1f64..0.95,
        cx in 0.2f64..0.8,
        cy in 0.2f64..0.8,
        w0 in 0.0f64..1.0,
        force in 0.0f64..4.0,
    ) {
        let g = grid(10, 10);
        let params = ModelParams::default();
        let f = biofilm_core::init::ForcingConfig::Vortex { amplitude: force }.build(&g).unwrap();
        let sim = Simulation::new(&g, &params, 1e-3, &CouplingConfig::default(), f).unwrap();
        let u0 = ScalarField::from_fn(&g, |x| amp * (-((x[0] - cx).powi(2) + (x[1] - cy).powi(2)) / 0.02).exp());
        let w = ScalarField::constant(&g, w0);
        let mut s = sim.check_initial_data(&u0, &w, &VectorField::zeros(&g)).unwrap();
        for step in 1..=3 {
            let o = sim.picard_step(&s, step).unwrap();
            let d = &o.diagnostics;
            prop_assert!(d.u_min_pre >= -1e-8 && d.u_max_pre <= params.u_star + 1e-8);
            prop_assert!(d.w_min_pre >= -1e-8 && d.w_max_pre <= 1.0 + 1e-8);
            prop_assert!(d.max_constraint_excess <= 1e-8 * params.p_mu_max());
            s = o.state;
        }
    }
}
