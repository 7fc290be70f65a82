//! Small numeric helpers shared across modules.

/// Gamma(two_x / 2) for positive half-integer or integer arguments.
///
/// Everything in the tensor formulas needs Gamma only at n/2 with small n,
/// so an exact recurrence beats a general lgamma here.
pub fn gamma_half(two_x: u32) -> f64 {
    assert!(two_x > 0, "gamma_half needs a positive argument");
    let mut value = if two_x % 2 == 0 {
        1.0 // Gamma(1)
    } else {
        std::f64::consts::PI.sqrt() // Gamma(1/2)
    };
    let mut two_arg = if two_x % 2 == 0 { 2 } else { 1 };
    while two_arg < two_x {
        value *= two_arg as f64 / 2.0;
        two_arg += 2;
    }
    value
}

pub fn ln_gamma_half(two_x: u32) -> f64 {
    gamma_half(two_x).ln()
}

pub fn factorial(n: u32) -> f64 {
    (1..=n as u64).map(|k| k as f64).product()
}

/// log(sum_i exp(v_i)) without overflow; returns -inf for an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi-style seed, then Newton.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_deriv(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                let (_, d2) = legendre_with_deriv(n, x);
                dp = d2;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x.abs();
        nodes[n - 1 - i] = x.abs();
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
