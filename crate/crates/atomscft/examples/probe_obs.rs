// temporary probe: pin observable values on the adaptive grid
use atomscft::observables::*;
use atomscft::*;

fn converged(z: u32, count: usize, c_min: f64, c_max: f64) -> (ScfContext, ScfState) {
    let basis = build_basis(&[ChannelSpec { l: 0, count, c_min, c_max }]).unwrap();
    let ctx = ScfContext::new(basis, 1e-12).unwrap();
    let state = run_scf(&ScfConfig::new(z), &ctx).unwrap();
    (ctx, state)
}

fn main() {
    for (z, count, c_min, c_max) in [
        (1u32, 40usize, 1e-12, 1e8),
        (2, 40, 1e-12, 1e8),
        (3, 30, 1e-8, 1e7),
        (3, 60, 1e-15, 1e11),
    ] {
        let t0 = std::time::Instant::now();
        let (ctx, state) = converged(z, count, c_min, c_max);
        let spec = default_grid(&ctx.basis);
        println!(
            "Z={z} ladder ({count},{c_min:.0e},{c_max:.0e}) conv={} grid nr={} [{:.1e},{:.1e}]",
            state.converged, spec.n_radial, spec.r_min, spec.r_max
        );
        let grid = QuadGrid::build(spec).unwrap();
        let report = energy_report(&state, &ctx, &grid).unwrap();
        println!(
            "  gap={:.3e} norms={:?} clamped={}",
            report.decomposition_gap, report.pair_norms, report.clamped_log_nodes
        );
        println!(
            "  binding={:.7} k={:.7} sc={:.6} st={:.6} f_solver={:.7} f_report={:.7}",
            report.binding,
            report.total.k,
            report.total.minus_sc_over_beta,
            report.total.minus_st_over_beta,
            state.free_energy,
            report.total.f
        );
        let k = kinetic_energy(&state, &ctx);
        let (r1, r2) = check_constraints(&state, &ctx, &grid, k).unwrap();
        println!("  ratios r1={r1:.5} r2={r2:.5}  elapsed={:.1?}", t0.elapsed());
    }

    // coefficient vs eigen density routes on a small window
    let (ctx, state) = converged(3, 24, 1e-6, 1e6);
    let small = QuadGrid::build(GridSpec {
        n_radial: 50,
        r_min: 1e-3,
        r_max: 20.0,
        n_theta: 6,
        n_phi: 5,
    })
    .unwrap();
    let coef = density_on_grid(&ctx.basis, &state.densities, &small);
    let eig = eigen_density_on_grid(&state, &ctx, &small);
    let peak = coef.total.iter().cloned().fold(0.0, f64::max);
    let max_diff = coef
        .total
        .iter()
        .zip(&eig.total)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let q_coef = small.integrate_values(&coef.total);
    let q_eig = small.integrate_values(&eig.total);
    println!("small window: peak={peak:.4} max|coef-eigen|={max_diff:.3e}");
    println!("  charge coef={q_coef:.8} eigen={q_eig:.8}");
    let full = QuadGrid::build(default_grid(&ctx.basis)).unwrap();
    let eig_full = eigen_density_on_grid(&state, &ctx, &full);
    let q_full = full.integrate_values(&eig_full.total);
    let min_coef = density_on_grid(&ctx.basis, &state.densities, &full)
        .total
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    println!("  full-window eigen charge={q_full:.10} min coef density={min_coef:.3e}");
}
