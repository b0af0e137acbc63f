//! Brute-force self-checks of the structural identities the estimators rely
//! on, printed as a checklist by the `verify` command.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::array_dictionary::{build_dictionaries, DictionarySet, GridSpec, UlaSpec, UpaSpec};
use crate::beamforming::{arspr, optimize_phases, rank_one_optimum, BeamformingConfig};
use crate::cascade_sparse::{
    assemble_mimo_problem, build_d_u, build_mimo_operator, draw_on_grid_gamma,
    merge_mimo_coefficients, mimo_channel, reconstruct_h, sensing_row, CascadeRepresentation,
    MergeMap, TrainingSequence,
};
use crate::channel_model::{draw_channel, noiseless_sample, random_phase_vector, ChannelStatistics};
use crate::linalg::{complex_gaussian, relative_error, vec_of, CMatrix, CVector, C64};
use crate::Result;

const TOL: f64 = 1e-10;

/// `D = F_P* • F_P` in full: column `p·M_G + q` is `conj(F_P(:,p)) ⊙ F_P(:,q)`.
pub fn brute_force_d(dicts: &DictionarySet) -> CMatrix {
    let f = &dicts.f_p;
    let mg = f.ncols();
    let mut d = CMatrix::zeros(f.nrows(), mg * mg);
    for p in 0..mg {
        for q in 0..mg {
            let col = f.column(p).map(|z| z.conj()).component_mul(&f.column(q));
            d.set_column(p * mg + q, &col);
        }
    }
    d
}

/// Indices of the first occurrence of each distinct column, in order.
pub fn distinct_columns(m: &CMatrix, tol: f64) -> Vec<usize> {
    let mut reps: Vec<usize> = Vec::new();
    for j in 0..m.ncols() {
        let seen = reps
            .iter()
            .any(|&r| (m.column(j) - m.column(r)).iter().all(|z| z.norm() <= tol));
        if !seen {
            reps.push(j);
        }
    }
    reps
}

#[derive(Debug, Clone)]
pub struct DedupReport {
    pub m_grid: usize,
    /// Distinct columns of the full `D`.
    pub distinct_d: usize,
    /// Distinct columns among the supplied `D_u`.
    pub distinct_du: usize,
    /// Every column `n` of `D` equals `D_u(:, class(n))` within tolerance.
    pub merge_map_exact: bool,
    /// Largest deviation `|D(:,n) − D_u(:,class(n))|`.
    pub max_error: f64,
}

impl DedupReport {
    /// The distinct columns of `D` are exactly those of `D_u`.
    pub fn structure_holds(&self) -> bool {
        self.merge_map_exact && self.distinct_d == self.distinct_du
    }

    /// The literal count: `D` has `M_G` distinct columns.
    pub fn count_is_m_grid(&self) -> bool {
        self.distinct_d == self.m_grid
    }
}

/// Compare the materialized `D` against a candidate `D_u` and the merge map.
pub fn dedup_check(dicts: &DictionarySet, d_u: &CMatrix) -> DedupReport {
    let d = brute_force_d(dicts);
    let merge = MergeMap::new(&dicts.grid);
    let mut max_error: f64 = 0.0;
    for n in 0..d.ncols() {
        let i = merge.class_of_column(n);
        let err = (d.column(n) - d_u.column(i)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        max_error = max_error.max(err);
    }
    DedupReport {
        m_grid: dicts.m_grid(),
        distinct_d: distinct_columns(&d, TOL).len(),
        distinct_du: distinct_columns(d_u, TOL).len(),
        merge_map_exact: max_error <= TOL,
        max_error,
    }
}

/// Every small grid combination `M_{G,x}, M_{G,y} ∈ {1..4}` with arrays
/// `M_x, M_y ∈ {1, 2}` no larger than their grids.
pub fn small_grid_cases() -> Vec<(usize, usize, usize, usize)> {
    let mut out = Vec::new();
    for mx in 1..=2 {
        for my in 1..=2 {
            for gx in mx..=4 {
                for gy in my..=4 {
                    out.push((mx, my, gx, gy));
                }
            }
        }
    }
    out
}

fn small_dicts(mx: usize, my: usize, gx: usize, gy: usize) -> Result<DictionarySet> {
    build_dictionaries(UlaSpec::new(1)?, UpaSpec::new(mx, my)?, GridSpec::new(1, gx, gy))
}

/// Relative error of `diag(h_rᴴ) G` against `D_u Λ F_Lᴴ` for an on-grid draw.
pub fn representation_error(dicts: &DictionarySet, d_u: &CMatrix, seed: u64) -> Result<f64> {
    let stats = ChannelStatistics::default().on_grid();
    let ch = draw_channel(&mut ChaCha8Rng::seed_from_u64(seed), &stats, dicts)?;
    let merge = MergeMap::new(&dicts.grid);
    let rep = CascadeRepresentation::from_coefficients(ch.coefficients.as_ref().unwrap(), &merge)?;
    let h = reconstruct_h(&rep.lambda, d_u, dicts)?;
    Ok(relative_error(&h, &ch.h_cascade))
}

/// Multi-antenna chain at `N = 2`, `N_r = 2`, `2 × 2` IRS with critical grids:
/// relative errors of `vec(H̄) = K x̄` and of the noise-free `y = W_f K x̄`
/// against a direct evaluation `w(t)ᵀ ⊗ f(t)ᴴ · vec(H̄)`.
pub fn mimo_chain_errors(seed: u64) -> Result<(f64, f64)> {
    let dicts = build_dictionaries(UlaSpec::new(2)?, UpaSpec::new(2, 2)?, GridSpec::new(2, 2, 2))?;
    let rx = UlaSpec::new(2)?;
    let stats = ChannelStatistics::default().on_grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ch = draw_channel(&mut rng, &stats, &dicts)?;
    let sigma = ch.coefficients.unwrap().sigma;
    let gamma = draw_on_grid_gamma(&mut rng, &stats, &dicts, &rx, 2)?;
    let v = random_phase_vector(&mut rng, dicts.m());
    let mimo = build_mimo_operator(&dicts, &rx, 2, &v)?;
    let x_bar = vec_of(&merge_mimo_coefficients(&sigma, &gamma, &MergeMap::new(&dicts.grid))?);
    let h_bar = mimo_channel(&mimo.f_r, &gamma, &dicts, &sigma, &v);
    let kx = &mimo.k_op * &x_bar;
    let vec_h = vec_of(&h_bar);
    let chain = (&kx - &vec_h).norm() / vec_h.norm();

    let prob = assemble_mimo_problem(&mimo, &x_bar, 8, &mut rng, 0.0)?;
    let direct = CVector::from_iterator(
        8,
        (0..8).map(|t| {
            let w = prob.precoders.column(t);
            let f = prob.combiners.column(t);
            f.dotc(&(&h_bar * w))
        }),
    );
    let meas = (&prob.y - &direct).norm() / direct.norm();
    Ok((chain, meas))
}

/// Achieved over analytic optimum for a random rank-1 channel.
pub fn rank_one_ratio(seed: u64, m: usize, n: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = CVector::from_fn(m, |_, _| complex_gaussian(&mut rng, 1.0));
    let b = CVector::from_fn(n, |_, _| complex_gaussian(&mut rng, 1.0));
    let h = &a * b.adjoint();
    optimize_phases(&h, &BeamformingConfig::default()).objective / rank_one_optimum(&a, &b)
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct VerifyOptions {
    /// Perturb `D_u` before the structural checks; they must then fail.
    pub inject_fault: bool,
}

fn perturb(d_u: &mut CMatrix) {
    for mut col in d_u.column_iter_mut() {
        col[0] += C64::new(1e-6, 0.0);
    }
}

pub fn verify_suite(opts: VerifyOptions) -> Result<Vec<Check>> {
    let mut checks = Vec::new();

    let cases = small_grid_cases();
    let mut structural = 0;
    let mut exact_count = 0;
    let mut worst: f64 = 0.0;
    for &(mx, my, gx, gy) in &cases {
        let dicts = small_dicts(mx, my, gx, gy)?;
        let mut d_u = build_d_u(&dicts);
        if opts.inject_fault {
            perturb(&mut d_u);
        }
        let r = dedup_check(&dicts, &d_u);
        worst = worst.max(r.max_error);
        structural += r.structure_holds() as usize;
        exact_count += r.count_is_m_grid() as usize;
    }
    checks.push(Check {
        name: "reduced dictionary holds every distinct column of D",
        passed: structural == cases.len(),
        detail: format!(
            "{structural}/{} grids, max deviation {worst:.1e}; {exact_count} grids have exactly M_G distinct columns",
            cases.len()
        ),
    });

    let paper = build_dictionaries(UlaSpec::new(16)?, UpaSpec::new(8, 8)?, GridSpec::new(64, 32, 32))?;
    let mut d_u = build_d_u(&paper);
    if opts.inject_fault {
        perturb(&mut d_u);
    }
    let mut rep_worst: f64 = 0.0;
    for seed in 0..5 {
        rep_worst = rep_worst.max(representation_error(&paper, &d_u, seed)?);
    }
    checks.push(Check {
        name: "cascade representation identity (on-grid, 16x64)",
        passed: rep_worst <= TOL,
        detail: format!("max relative error {rep_worst:.1e}"),
    });

    let small = build_dictionaries(UlaSpec::new(3)?, UpaSpec::new(2, 2)?, GridSpec::new(6, 4, 3))?;
    let d_u = build_d_u(&small);
    let mut meas_worst: f64 = 0.0;
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let stats = ChannelStatistics::default().on_grid();
        let ch = draw_channel(&mut rng, &stats, &small)?;
        let x = CascadeRepresentation::from_coefficients(ch.coefficients.as_ref().unwrap(), &MergeMap::new(&small.grid))?.x();
        let tr = TrainingSequence::random(&mut rng, 4, small.n(), small.m());
        for t in 0..4 {
            let direct = noiseless_sample(&ch.h_cascade, &tr.w(t), &tr.v(t));
            let row = sensing_row(&tr.w(t), &tr.v(t), &small, &d_u)?;
            let via = row.transpose() * &x;
            meas_worst = meas_worst.max((via[0] - direct).norm() / direct.norm());
        }
    }
    checks.push(Check {
        name: "pilot measurement equals sensing row times x",
        passed: meas_worst <= 1e-9,
        detail: format!("max relative error {meas_worst:.1e}"),
    });

    let mut chain_worst: f64 = 0.0;
    for seed in 0..10 {
        let (a, b) = mimo_chain_errors(seed)?;
        chain_worst = chain_worst.max(a).max(b);
    }
    checks.push(Check {
        name: "multi-antenna chain vec(H) = K x and y = W_f K x",
        passed: chain_worst <= TOL,
        detail: format!("max relative error {chain_worst:.1e}"),
    });

    let worst_ratio = (0..20).map(|s| rank_one_ratio(s, 64, 16)).fold(f64::INFINITY, f64::min);
    checks.push(Check {
        name: "phase optimizer reaches rank-1 optimum",
        passed: worst_ratio >= 0.999,
        detail: format!("worst achieved/optimal {worst_ratio:.6}"),
    });

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let h = CMatrix::from_fn(16, 4, |_, _| complex_gaussian(&mut rng, 1.0));
    let self_ratio = arspr(&h, &h, &BeamformingConfig::default())?;
    checks.push(Check {
        name: "receive-power ratio of the true channel is 1",
        passed: (self_ratio - 1.0).abs() <= 1e-9,
        detail: format!("{self_ratio:.12}"),
    });

    Ok(checks)
}

pub fn render_checklist(checks: &[Check]) -> String {
    let mut out = String::new();
    for c in checks {
        out.push_str(&format!(
            "[{}] {}: {}\n",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        ));
    }
    let passed = checks.iter().filter(|c| c.passed).count();
    out.push_str(&format!("{passed}/{} checks passed\n", checks.len()));
    out
}
