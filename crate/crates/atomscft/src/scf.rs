//! Self-consistent field driver.
//!
//! Electrons are grouped into pairs (two each, one left over for odd Z).
//! Every iteration rebuilds the interaction fields from the current pair
//! densities, solves each pair's thermal eigenproblem, and mixes the new
//! densities into the old. The residual is measured on the raw proposal,
//! before mixing, so it reflects distance from self-consistency rather than
//! the step size.
//!
//! Identical pairs under identical fields are a fixed point of the exact
//! iteration, so a seeded per-pair perturbation of the initial densities is
//! what lets core and valence pairs differentiate, radially and (with l > 0
//! channels present) angularly.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::BasisSet;
use crate::elements::MAX_Z;
use crate::error::{Error, Result};
use crate::fields::{build_w_ee, build_w_en, build_w_pauli, build_w_sic, PoissonSolver};
use crate::solver::{
    canonical_basis, generalized_eig, pair_moments, propagate, trace_identity_deviation,
    CanonicalBasis, PairEig, Propagated,
};
use crate::tensors::{build_tensors, build_tensors_cached, Tensors};

#[derive(Debug, Clone)]
pub struct ScfConfig {
    pub z: u32,
    pub beta: f64,
    /// Pauli contact coupling. The field on pair mu is the other pairs'
    /// density sum divided by g0.
    pub g0: f64,
    /// Replace the single g0 by an arithmetic ladder centered on it, smallest
    /// value to the first pair. Off by default.
    pub g0_per_pair: bool,
    pub mixing_alpha: f64,
    /// Convergence threshold on the max-abs density coefficient change.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial per-pair density perturbation, relative to the density's
    /// largest coefficient.
    pub perturb_amplitude: f64,
    pub perturb_seed: u64,
    /// Restrict the run to l = 0 channels (the caller builds the basis
    /// accordingly; recorded here so reports can say which family a run
    /// belongs to).
    pub spherical_only: bool,
    /// Relative overlap eigenvalue cutoff for canonical orthogonalization.
    pub eig_threshold: f64,
    /// Check propagator invariants every iteration and fail loudly on
    /// violation. Meant for tests; costs one S*q trace per pair per
    /// iteration.
    pub validate_iterates: bool,
}

impl ScfConfig {
    pub fn new(z: u32) -> Self {
        ScfConfig {
            z,
            beta: 50.0,
            g0: 0.1,
            g0_per_pair: false,
            mixing_alpha: 0.1,
            tol: 1e-6,
            max_iter: 2000,
            perturb_amplitude: 1e-3,
            perturb_seed: 1,
            spherical_only: false,
            eig_threshold: 1e-12,
            validate_iterates: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.z == 0 || self.z > MAX_Z {
            return Err(Error::InvalidConfig(format!("z = {} outside 1..={MAX_Z}", self.z)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidConfig(format!("beta = {} must be positive", self.beta)));
        }
        if !(self.g0 > 0.0 && self.g0.is_finite()) {
            return Err(Error::InvalidConfig(format!("g0 = {} must be positive", self.g0)));
        }
        if !(self.mixing_alpha > 0.0 && self.mixing_alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "mixing_alpha = {} outside (0, 1]",
                self.mixing_alpha
            )));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidConfig(format!("tol = {} must be positive", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        if !(self.perturb_amplitude >= 0.0 && self.perturb_amplitude.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "perturb_amplitude = {} must be nonnegative",
                self.perturb_amplitude
            )));
        }
        if !(self.eig_threshold > 0.0 && self.eig_threshold < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "eig_threshold = {} outside (0, 1)",
                self.eig_threshold
            )));
        }
        Ok(())
    }
}

/// Everything about the basis that the iteration reuses unchanged: tensors,
/// the canonical orthogonalization, and the factored Poisson solver.
pub struct ScfContext {
    pub basis: BasisSet,
    pub tensors: Tensors,
    pub canon: CanonicalBasis,
    pub poisson: PoissonSolver,
}

impl ScfContext {
    pub fn new(basis: BasisSet, eig_threshold: f64) -> Result<Self> {
        let tensors = build_tensors(&basis)?;
        Self::assemble(basis, tensors, eig_threshold)
    }

    /// Like `new` but reads/writes the three-index tensor cache in
    /// `cache_dir`.
    pub fn with_cache(basis: BasisSet, eig_threshold: f64, cache_dir: &std::path::Path) -> Result<Self> {
        let tensors = build_tensors_cached(&basis, cache_dir)?;
        Self::assemble(basis, tensors, eig_threshold)
    }

    fn assemble(basis: BasisSet, tensors: Tensors, eig_threshold: f64) -> Result<Self> {
        let canon = canonical_basis(&tensors.overlap, eig_threshold)?;
        let poisson = PoissonSolver::new(&basis, &tensors.laplace)?;
        Ok(ScfContext { basis, tensors, canon, poisson })
    }
}

#[derive(Debug, Clone)]
pub struct FieldSet {
    pub w_en: DVector<f64>,
    pub w_ee: DVector<f64>,
    pub w_sic: Vec<DVector<f64>>,
    pub w_pauli: Vec<DVector<f64>>,
}

impl FieldSet {
    /// Full field felt by pair mu.
    pub fn w_total(&self, mu: usize) -> DVector<f64> {
        &self.w_en + &self.w_ee + &self.w_sic[mu] + &self.w_pauli[mu]
    }

    /// The interaction part whose double counting the free energy corrects:
    /// everything except the external nuclear field.
    pub fn w_interaction(&self, mu: usize) -> DVector<f64> {
        &self.w_ee + &self.w_sic[mu] + &self.w_pauli[mu]
    }
}

#[derive(Debug, Clone)]
pub struct PairSolution {
    pub eig: PairEig,
    pub prop: Propagated,
}

#[derive(Debug, Clone, Copy)]
pub struct IterRecord {
    pub iter: usize,
    pub residual: f64,
    pub free_energy: f64,
    pub alpha: f64,
}

pub struct ScfState {
    /// Electrons per pair, in assignment order.
    pub electrons: Vec<u32>,
    pub g0: Vec<f64>,
    pub beta: f64,
    /// Coefficient representation of each pair density, S^{-1} m. Feeds the
    /// contact Pauli field and pointwise evaluation.
    pub densities: Vec<DVector<f64>>,
    /// Moment representation <f_i, n_mu>, the S-free frame. Feeds Poisson
    /// right-hand sides and energy bilinears. Mixed in lockstep with
    /// `densities`.
    pub moments: Vec<DVector<f64>>,
    pub fields: FieldSet,
    /// Eigen solutions consistent with `fields`.
    pub pairs: Vec<PairSolution>,
    pub pair_free_energies: Vec<f64>,
    pub free_energy: f64,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    pub history: Vec<IterRecord>,
}

impl ScfState {
    pub fn n_pairs(&self) -> usize {
        self.electrons.len()
    }

    pub fn total_density(&self) -> DVector<f64> {
        let mut n = DVector::zeros(self.densities[0].len());
        for d in &self.densities {
            n += d;
        }
        n
    }

    pub fn total_moments(&self) -> DVector<f64> {
        let mut m = DVector::zeros(self.moments[0].len());
        for v in &self.moments {
            m += v;
        }
        m
    }
}

/// Two electrons per pair, one left over for odd Z.
pub fn assign_pairs(z: u32) -> Vec<u32> {
    let mut pairs = vec![2u32; (z / 2) as usize];
    if z % 2 == 1 {
        pairs.push(1);
    }
    pairs
}

/// Per-pair Pauli couplings: all equal to g0 unless per_pair is set, in
/// which case an arithmetic ladder centered on g0 (step g0/20) hands the
/// smallest value to the first pair.
pub fn g0_sequence(g0: f64, per_pair: bool, n_pairs: usize) -> Vec<f64> {
    if !per_pair || n_pairs < 2 {
        return vec![g0; n_pairs];
    }
    let step = g0 / 20.0;
    let mid = (n_pairs as f64 - 1.0) / 2.0;
    (0..n_pairs).map(|k| g0 + step * (k as f64 - mid)).collect()
}

/// One pair's contribution to the free energy: the ideal term from its
/// partition function plus the double-counting correction of the
/// interaction fields. The bilinear int n w is the moment-field dot
/// product.
pub fn pair_free_energy(
    n_electrons: u32,
    beta: f64,
    log_q: f64,
    moments: &DVector<f64>,
    fields: &FieldSet,
    mu: usize,
) -> f64 {
    let w_int = fields.w_interaction(mu);
    -(n_electrons as f64 / beta) * log_q - 0.5 * moments.dot(&w_int)
}

/// Exponent floor for the symmetry-breaking perturbation. A normalized
/// Gaussian with tiny exponent carries an enormous charge integral, so an
/// additive coefficient bump on the diffuse tail rungs would inject huge
/// fictional charge into the Poisson problems. All the instabilities the
/// perturbation has to seed (core/valence splitting, angular lobe
/// formation) live at atomic length scales, so compact rungs suffice.
const PERTURB_C_MIN: f64 = 1e-3;

/// Thermal state of a bare-nucleus pair, common starting point for every
/// pair, plus the seeded per-pair perturbation that breaks pair-exchange
/// symmetry. Interaction fields start at zero.
pub fn initial_state(cfg: &ScfConfig, ctx: &ScfContext) -> Result<ScfState> {
    cfg.validate()?;
    let electrons = assign_pairs(cfg.z);
    let n_pairs = electrons.len();
    let g0 = g0_sequence(cfg.g0, cfg.g0_per_pair, n_pairs);
    let dim = ctx.basis.len();

    let w_en = build_w_en(&ctx.poisson, &ctx.basis, cfg.z);
    let a = 0.5 * &ctx.tensors.laplace - ctx.tensors.gamma.contract_field(&w_en);
    let eig = generalized_eig(&a, &ctx.canon)?;
    let prop = propagate(&eig, cfg.beta);

    let mut densities = Vec::with_capacity(n_pairs);
    let mut moments = Vec::with_capacity(n_pairs);
    let mut pairs = Vec::with_capacity(n_pairs);
    for (mu, &n_e) in electrons.iter().enumerate() {
        let m0 = pair_moments(&prop, n_e, &ctx.tensors.gamma)?;
        let mut n = ctx.canon.s_plus() * &m0;
        let mut m = m0;
        if cfg.perturb_amplitude > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.perturb_seed);
            rng.set_stream(mu as u64);
            let scale = cfg.perturb_amplitude * n.amax();
            let mut delta = DVector::zeros(dim);
            for i in 0..dim {
                // draw for every rung so the stream position does not depend
                // on the basis layout, keep only the compact ones
                let u = rng.random_range(-1.0..1.0);
                if ctx.basis.function(i).c >= PERTURB_C_MIN {
                    delta[i] = scale * u;
                }
            }
            n += &delta;
            m += &ctx.tensors.overlap * delta;
        }
        densities.push(n);
        moments.push(m);
        pairs.push(PairSolution { eig: eig.clone(), prop: prop.clone() });
    }

    let zero = DVector::zeros(dim);
    let fields = FieldSet {
        w_en,
        w_ee: zero.clone(),
        w_sic: vec![zero.clone(); n_pairs],
        w_pauli: vec![zero; n_pairs],
    };
    Ok(ScfState {
        electrons,
        g0,
        beta: cfg.beta,
        densities,
        moments,
        fields,
        pairs,
        pair_free_energies: vec![0.0; n_pairs],
        free_energy: f64::INFINITY,
        iterations: 0,
        residual: f64::INFINITY,
        converged: false,
        history: Vec::new(),
    })
}

fn build_fields(ctx: &ScfContext, state: &ScfState) -> FieldSet {
    let w_ee = build_w_ee(&ctx.poisson, &state.total_moments());
    let w_sic = state
        .moments
        .iter()
        .zip(&state.electrons)
        .map(|(m, &ne)| build_w_sic(&ctx.poisson, m, ne))
        .collect();
    let w_pauli = (0..state.n_pairs())
        .map(|mu| build_w_pauli(&state.densities, &state.g0, mu))
        .collect();
    FieldSet { w_en: state.fields.w_en.clone(), w_ee, w_sic, w_pauli }
}

fn solve_pair(
    ctx: &ScfContext,
    beta: f64,
    w_total: &DVector<f64>,
) -> Result<(PairEig, Propagated)> {
    let a = 0.5 * &ctx.tensors.laplace - ctx.tensors.gamma.contract_field(w_total);
    let eig = generalized_eig(&a, &ctx.canon)?;
    let prop = propagate(&eig, beta);
    Ok((eig, prop))
}

const TRACE_IDENTITY_TOL: f64 = 1e-10;

fn validate_pair(ctx: &ScfContext, mu: usize, prop: &Propagated, n: &DVector<f64>) -> Result<()> {
    let dev = trace_identity_deviation(prop, &ctx.tensors.overlap);
    if dev > TRACE_IDENTITY_TOL {
        return Err(Error::Validation(format!(
            "pair {mu}: trace identity deviation {dev:.3e}"
        )));
    }
    if prop.weights.windows(2).any(|w| w[1] > w[0]) || prop.weights.first().copied() != Some(1.0) {
        return Err(Error::Validation(format!("pair {mu}: weights not descending from 1")));
    }
    if n.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation(format!("pair {mu}: non-finite density coefficient")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
pub struct StepInfo {
    pub residual: f64,
    pub free_energy: f64,
}

/// One SCF step: fields from the current densities, a fresh eigen solve per
/// pair, residual on the unmixed proposal, then linear mixing with the given
/// alpha. The state keeps this step's fields and eigen solutions.
pub fn scf_iterate(
    cfg: &ScfConfig,
    ctx: &ScfContext,
    state: &mut ScfState,
    alpha: f64,
) -> Result<StepInfo> {
    let fields = build_fields(ctx, state);
    let n_pairs = state.n_pairs();
    let mut prop_n = Vec::with_capacity(n_pairs);
    let mut prop_m = Vec::with_capacity(n_pairs);
    let mut pairs = Vec::with_capacity(n_pairs);
    let mut pair_f = Vec::with_capacity(n_pairs);
    let mut residual = 0.0f64;
    for mu in 0..n_pairs {
        let (eig, prop) = solve_pair(ctx, cfg.beta, &fields.w_total(mu))?;
        let m_new = pair_moments(&prop, state.electrons[mu], &ctx.tensors.gamma)?;
        let n_new = ctx.canon.s_plus() * &m_new;
        if cfg.validate_iterates {
            validate_pair(ctx, mu, &prop, &n_new)?;
        }
        residual = residual.max((&n_new - &state.densities[mu]).amax());
        pair_f.push(pair_free_energy(
            state.electrons[mu],
            cfg.beta,
            prop.log_q,
            &m_new,
            &fields,
            mu,
        ));
        prop_n.push(n_new);
        prop_m.push(m_new);
        pairs.push(PairSolution { eig, prop });
    }
    for (n, proposal) in state.densities.iter_mut().zip(&prop_n) {
        n.axpy(alpha, proposal, 1.0 - alpha);
    }
    for (m, proposal) in state.moments.iter_mut().zip(&prop_m) {
        m.axpy(alpha, proposal, 1.0 - alpha);
    }
    state.fields = fields;
    state.pairs = pairs;
    state.free_energy = pair_f.iter().sum();
    state.pair_free_energies = pair_f;
    state.residual = residual;
    Ok(StepInfo { residual, free_energy: state.free_energy })
}

/// Rebuild fields and eigen solutions from the final densities without
/// another mixing step, so the reported state is internally consistent.
fn finalize(cfg: &ScfConfig, ctx: &ScfContext, state: &mut ScfState) -> Result<()> {
    let fields = build_fields(ctx, state);
    let mut pairs = Vec::with_capacity(state.n_pairs());
    let mut pair_f = Vec::with_capacity(state.n_pairs());
    for mu in 0..state.n_pairs() {
        let (eig, prop) = solve_pair(ctx, cfg.beta, &fields.w_total(mu))?;
        pair_f.push(pair_free_energy(
            state.electrons[mu],
            cfg.beta,
            prop.log_q,
            &state.moments[mu],
            &fields,
            mu,
        ));
        pairs.push(PairSolution { eig, prop });
    }
    state.fields = fields;
    state.pairs = pairs;
    state.free_energy = pair_f.iter().sum();
    state.pair_free_energies = pair_f;
    Ok(())
}

const ALPHA_FLOOR: f64 = 0.005;
const SHRINK_AFTER: usize = 3;
const GROW_AFTER: usize = 12;

fn drive(cfg: &ScfConfig, ctx: &ScfContext, mut state: ScfState) -> Result<ScfState> {
    let mut alpha = cfg.mixing_alpha;
    let mut prev_residual = f64::INFINITY;
    let mut rising = 0usize;
    let mut falling = 0usize;
    for it in 1..=cfg.max_iter {
        let step = scf_iterate(cfg, ctx, &mut state, alpha)?;
        state.iterations = it;
        state.history.push(IterRecord {
            iter: it,
            residual: step.residual,
            free_energy: step.free_energy,
            alpha,
        });
        if step.residual < cfg.tol {
            state.converged = true;
            break;
        }
        // The residual trend steers the mixing weight. Free energy is the
        // wrong signal here: it rises legitimately while a broken-symmetry
        // state relaxes from its initial overshoot. A run of residual
        // increases (or a non-finite value; NaN compares false and lands in
        // the rising branch) halves alpha, sustained decay earns the
        // configured value back.
        if step.residual < prev_residual {
            falling += 1;
            rising = 0;
            if falling >= GROW_AFTER {
                alpha = (alpha * 1.5).min(cfg.mixing_alpha);
                falling = 0;
            }
        } else {
            rising += 1;
            falling = 0;
            if rising >= SHRINK_AFTER || !step.residual.is_finite() {
                alpha = (alpha * 0.5).max(ALPHA_FLOOR);
                rising = 0;
            }
        }
        prev_residual = step.residual;
    }
    finalize(cfg, ctx, &mut state)?;
    Ok(state)
}

/// Full run from the bare-nucleus initial state. Convergence failure is not
/// an error; the returned state says whether it converged.
pub fn run_scf(cfg: &ScfConfig, ctx: &ScfContext) -> Result<ScfState> {
    let state = initial_state(cfg, ctx)?;
    drive(cfg, ctx, state)
}

/// Run continuing from a previous state's pair densities (same basis, same
/// Z), the cheap path for sweeps over beta or g0. No perturbation is
/// applied.
pub fn run_scf_warm(cfg: &ScfConfig, ctx: &ScfContext, seed: &ScfState) -> Result<ScfState> {
    let mut quiet = cfg.clone();
    quiet.perturb_amplitude = 0.0;
    let mut state = initial_state(&quiet, ctx)?;
    if seed.densities.len() != state.n_pairs() {
        return Err(Error::InvalidConfig(format!(
            "warm start has {} densities, z = {} needs {}",
            seed.densities.len(),
            cfg.z,
            state.n_pairs()
        )));
    }
    if seed.densities.iter().any(|n| n.len() != ctx.basis.len())
        || seed.moments.iter().any(|m| m.len() != ctx.basis.len())
    {
        return Err(Error::InvalidConfig("warm start density length mismatch".into()));
    }
    state.densities = seed.densities.clone();
    state.moments = seed.moments.clone();
    drive(cfg, ctx, state)
}
