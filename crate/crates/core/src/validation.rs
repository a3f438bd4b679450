//! The acceptance suite: thirteen criteria, each run end to end against an
//! independent oracle, a closed form or a frozen tolerance.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{fit_points, fit_power, fit_stretched, kolmogorov_check, pz_verify, FitModel};
use crate::diagrams::{
    check_recursion, evaluate_truncated, noninjective_reduction_check, DenseKernel, LimitPolicy, PinnedDiagram,
};
use crate::error::{LabError, Result};
use crate::lattice::{bracket, bubble_sum, four_dim_bubble_envelope, green_value, truncated_green, BubbleVariant};
use crate::moments::{exact_moment, second_moment_bounds_at_origin, MomentRequest, Truncation};
use crate::offspring::{make_distribution, OffspringDistribution, OffspringSpec};
use crate::simulator::{estimate_survival, estimate_tail, fold_episodes, EpisodeConfig, IntMoments, PreparedConfig, TailEstimate};
use crate::skeletons::{enumerate_plane_trees, enumerate_skeletons, Skeleton};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Ten times fewer Monte Carlo episodes.
    Quick,
    Full,
}

impl Profile {
    fn episodes(self, full: u64) -> u64 {
        match self {
            Profile::Full => full,
            Profile::Quick => full / 10,
        }
    }
}

impl std::str::FromStr for Profile {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quick" => Ok(Profile::Quick),
            "full" => Ok(Profile::Full),
            other => Err(LabError::Config(format!("unknown profile {other:?}, expected quick or full"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: u32,
    pub title: String,
    /// Command that reproduces the underlying numbers.
    pub producer: String,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

pub struct Criterion {
    pub id: u32,
    pub title: &'static str,
    pub producer: &'static str,
    run: fn(Profile) -> Result<(bool, String)>,
}

pub const CRITERIA: [Criterion; 13] = [
    Criterion { id: 1, title: "combinatorics", producer: "brwlab skeletons --k-max 4", run: c01_combinatorics },
    Criterion { id: 2, title: "diagram oracle equivalence", producer: "brwlab diagrams <request>", run: c02_diagram_oracle },
    Criterion { id: 3, title: "recursion inequality", producer: "brwlab diagrams <recursion request>", run: c03_recursion },
    Criterion { id: 4, title: "first-moment identity", producer: "brwlab moments <job>", run: c04_first_moment },
    Criterion { id: 5, title: "moment equality, d=5", producer: "brwlab moments <job>", run: c05_high_dim_moments },
    Criterion { id: 6, title: "truncated upper bound", producer: "brwlab moments <job>", run: c06_truncated_bound },
    Criterion { id: 7, title: "low-d second-moment scaling", producer: "brwlab moments <job>", run: c07_low_d_scaling },
    Criterion { id: 8, title: "Kolmogorov constant", producer: "brwlab simulate <survival manifest>", run: c08_kolmogorov },
    Criterion { id: 9, title: "tail exponents, d<4", producer: "brwlab tails <manifest>", run: c09_tail_exponents },
    Criterion { id: 10, title: "d=4 tail shape", producer: "brwlab tails <manifest>", run: c10_four_dim_shape },
    Criterion { id: 11, title: "d=5 tail shape", producer: "brwlab tails <manifest>", run: c11_five_dim_shape },
    Criterion { id: 12, title: "Paley-Zygmund", producer: "brwlab validate --only 12", run: c12_paley_zygmund },
    Criterion { id: 13, title: "bubble sums", producer: "brwlab validate --only 13", run: c13_bubbles },
];

pub fn run_criterion(criterion: &Criterion, profile: Profile) -> CriterionReport {
    let start = Instant::now();
    let (pass, detail) = match (criterion.run)(profile) {
        Ok(outcome) => outcome,
        Err(e) => (false, format!("error: {e}")),
    };
    CriterionReport {
        id: criterion.id,
        title: criterion.title.to_string(),
        producer: criterion.producer.to_string(),
        pass,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Run the criteria in `only` (all when empty), reporting each as it ends.
pub fn run_all(profile: Profile, only: &[u32], mut on_report: impl FnMut(&CriterionReport)) -> Vec<CriterionReport> {
    CRITERIA
        .iter()
        .filter(|c| only.is_empty() || only.contains(&c.id))
        .map(|c| {
            let report = run_criterion(c, profile);
            on_report(&report);
            report
        })
        .collect()
}

fn explicit_law(k: usize) -> Result<OffspringDistribution> {
    let mut pmf = vec![0.0; k + 1];
    pmf[0] = 1.0 - 1.0 / k as f64;
    pmf[k] = 1.0 / k as f64;
    make_distribution(&OffspringSpec::Explicit { pmf })
}

/// Truncation below ten times the smallest positive tail estimate.
fn truncation_ok(tail: &TailEstimate) -> (bool, f64) {
    let smallest = tail.estimates().into_iter().filter(|&p| p > 0.0).fold(f64::INFINITY, f64::min);
    (tail.truncation_fraction < 10.0 * smallest, smallest)
}

fn c01_combinatorics(_: Profile) -> Result<(bool, String)> {
    let counts: Vec<usize> = (0..=4).map(|k| enumerate_skeletons(k).map(|s| s.len())).collect::<Result<_>>()?;
    let mut pass = counts == [1, 2, 10, 122, 2554];
    let mut catalan_ok = true;
    for n in 1..=10u64 {
        // C(2m, m) / (m + 1) with m = n - 1, in exact integers
        let m = n - 1;
        let mut c: u64 = 1;
        for i in 0..m {
            c = c * (2 * m - i) / (i + 1);
        }
        catalan_ok &= enumerate_plane_trees(n as usize)?.len() as u64 == c / (m + 1);
    }
    let mut vertex_ok = true;
    for k in 0..=4 {
        vertex_ok &= enumerate_skeletons(k)?.items().iter().all(|s| s.vertex_count() <= (2 * k).max(1));
    }
    pass &= catalan_ok && vertex_ok;
    Ok((pass, format!("skeleton counts k=0..4 {counts:?}; plane trees Catalan n<=10: {catalan_ok}; |V| <= 2k: {vertex_ok}")))
}

fn binomial(m: i64, j: i64) -> f64 {
    if j < 0 || j > m {
        return 0.0;
    }
    (0..j).fold(1.0, |acc, i| acc * (m - i) as f64 / (i + 1) as f64)
}

/// `P(S_m = x)` for simple random walk in one or two dimensions, in closed form.
fn walk_probability(m: i64, x: &[i64]) -> f64 {
    let line = |u: i64| {
        if (m + u) % 2 != 0 || u.abs() > m {
            0.0
        } else {
            binomial(m, (m + u) / 2) / 2f64.powi(m as i32)
        }
    };
    match x {
        [a] => line(*a),
        // rotate by 45 degrees: two independent one-dimensional walks
        [a, b] => line(a + b) * line(a - b),
        _ => unreachable!("oracle is for d <= 2"),
    }
}

/// `D_n(pins; S)` by summing every placement of the unlabelled vertices.
fn brute_force_diagram(s: &Skeleton, pins: &[Vec<i64>], n: usize) -> Option<f64> {
    let dim = pins[0].len();
    let tree = s.tree();
    let mut fixed: Vec<Option<Vec<i64>>> = vec![None; tree.len()];
    for (label, &v) in s.labels().iter().enumerate() {
        match &fixed[v as usize] {
            Some(p) if *p != pins[label] => return None,
            _ => fixed[v as usize] = Some(pins[label].clone()),
        }
    }
    let free: Vec<usize> = (0..tree.len()).filter(|&v| fixed[v].is_none()).collect();
    let reach = pins.iter().flatten().map(|c| c.abs()).max().unwrap_or(0) + (n * free.len()) as i64;
    let side = 2 * reach + 1;
    let cells = side.pow(dim as u32);
    let green = |diff: &[i64]| (1..=n as i64).map(|m| walk_probability(m, diff)).sum::<f64>();
    let edges = tree.edges();
    let mut total = 0.0;
    let mut code = vec![0i64; free.len()];
    let mut pos: Vec<Vec<i64>> = fixed.iter().map(|p| p.clone().unwrap_or_else(|| vec![0; dim])).collect();
    loop {
        for (slot, &v) in free.iter().enumerate() {
            let mut c = code[slot];
            for coord in pos[v].iter_mut() {
                *coord = c % side - reach;
                c /= side;
            }
        }
        let mut product = 1.0;
        for &(u, v) in &edges {
            let diff: Vec<i64> = pos[v].iter().zip(&pos[u]).map(|(a, b)| a - b).collect();
            product *= green(&diff);
            if product == 0.0 {
                break;
            }
        }
        total += product;
        let mut i = 0;
        loop {
            if i == code.len() {
                return Some(total);
            }
            code[i] += 1;
            if code[i] < cells {
                break;
            }
            code[i] = 0;
            i += 1;
        }
    }
}

fn c02_diagram_oracle(_: Profile) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut compared = 0usize;
    let mut dense_mismatch = 0usize;
    for dim in 1..=2usize {
        for n in 1..=4usize {
            let dense = DenseKernel::new(dim, n)?;
            for k in 0..=3usize {
                let set = enumerate_skeletons(k)?;
                let mut pin_sets: Vec<Vec<Vec<i64>>> = vec![vec![vec![0; dim]; k + 1]];
                if k > 0 {
                    let mut moved = vec![vec![0; dim]; k + 1];
                    moved[k][0] = 1;
                    pin_sets.push(moved);
                }
                for _ in 0..2 {
                    pin_sets.push((0..=k).map(|_| (0..dim).map(|_| rng.gen_range(-1..=1)).collect()).collect());
                }
                for s in set.items() {
                    for pins in &pin_sets {
                        let oracle = brute_force_diagram(s, pins, n);
                        let value = evaluate_truncated(&PinnedDiagram::new(s.clone(), pins.clone())?, n)?;
                        let dp = value.pins_consistent.then_some(value.value);
                        match (oracle, dp) {
                            (Some(a), Some(b)) => {
                                let rel = (a - b).abs() / a.abs().max(f64::MIN_POSITIVE);
                                worst = worst.max(if a == 0.0 && b == 0.0 { 0.0 } else { rel });
                            }
                            (None, None) => {}
                            _ => worst = f64::INFINITY,
                        }
                        let agree = match (oracle, dense.evaluate(s, pins)?) {
                            (Some(a), Some(b)) => (a - b).abs() <= 1e-12 * a.abs(),
                            (None, None) => true,
                            _ => false,
                        };
                        if !agree {
                            dense_mismatch += 1;
                        }
                        compared += 1;
                    }
                }
            }
        }
    }
    let cherry = Skeleton::parse("c=1.2.0.0;l=0.2.3")?;
    let cherry_value = evaluate_truncated(&PinnedDiagram::new(cherry, vec![vec![0]; 3])?, 2)?.value;
    let pass = worst <= 1e-12 && dense_mismatch == 0 && cherry_value == 13.0 / 32.0;
    Ok((
        pass,
        format!(
            "{compared} pinned diagrams, worst relative gap {worst:.2e}, dense engine mismatches {dense_mismatch}, cherry {cherry_value} (13/32 = {})",
            13.0 / 32.0
        ),
    ))
}

fn c03_recursion(_: Profile) -> Result<(bool, String)> {
    let mut pass = true;
    let mut worst = 0.0f64;
    for dim in 1..=4 {
        for k in 2..=4 {
            let r = check_recursion(k, 8, dim)?;
            pass &= r.pass;
            worst = worst.max(r.worst_ratio);
        }
    }
    let mut worst_noninjective = 0.0f64;
    for dim in 1..=4 {
        for k in 0..=3 {
            let r = noninjective_reduction_check(k, 8, dim)?;
            pass &= r.pass;
            worst_noninjective = worst_noninjective.max(r.worst_ratio);
        }
    }
    Ok((
        pass,
        format!("worst lhs/rhs {worst:.4} over k=2..4, d=1..4, n=8; worst noninjective ratio {worst_noninjective:.4} for k<=3"),
    ))
}

fn c04_first_moment(profile: Profile) -> Result<(bool, String)> {
    let episodes = profile.episodes(1_000_000);
    let cfg = EpisodeConfig::new(3, OffspringDistribution::binary(), 32, 4);
    let prepared = PreparedConfig::new(&cfg)?;
    let m = fold_episodes(&prepared, episodes, IntMoments::default, |a, _, r| a.push(r.local_times[0]), IntMoments::merge);
    let exact = 1.0 + truncated_green(3, 32)?.get(&[0, 0, 0]);
    let se = m.std_error()?;
    let gap = (m.mean() - exact).abs();
    Ok((gap <= 3.0 * se, format!("MC {:.5} +- {:.5} vs 1 + G~_32(0,0) = {exact:.5}; gap {:.2} sigma", m.mean(), se, gap / se)))
}

#[derive(Clone, Default)]
struct SquareAcc {
    first: IntMoments,
    second: IntMoments,
    truncated: u64,
    truncated_first: u128,
    truncated_second: u128,
}

impl SquareAcc {
    fn push(&mut self, l: u64, truncated: bool) {
        self.first.push(l);
        self.second.push(l * l);
        if truncated {
            self.truncated += 1;
            self.truncated_first += l as u128;
            self.truncated_second += (l * l) as u128;
        }
    }

    fn merge(self, o: SquareAcc) -> SquareAcc {
        SquareAcc {
            first: self.first.merge(o.first),
            second: self.second.merge(o.second),
            truncated: self.truncated + o.truncated,
            truncated_first: self.truncated_first + o.truncated_first,
            truncated_second: self.truncated_second + o.truncated_second,
        }
    }
}

fn square_moments(cfg: &EpisodeConfig, episodes: u64) -> Result<SquareAcc> {
    let prepared = PreparedConfig::new(cfg)?;
    Ok(fold_episodes(
        &prepared,
        episodes,
        SquareAcc::default,
        |a, _, r| a.push(r.local_times[0], r.truncated),
        SquareAcc::merge,
    ))
}

fn c05_high_dim_moments(profile: Profile) -> Result<(bool, String)> {
    let mu = OffspringDistribution::geometric();
    let episodes = profile.episodes(1_000_000);
    let acc = square_moments(&EpisodeConfig::new(5, mu.clone(), 16384, 5), episodes)?;
    let n = episodes as f64;
    let trunc = acc.truncated as f64 / n;
    let mut policy = LimitPolicy::new(1e-3);
    policy.max_n = 128;
    let mut pass = trunc < 1e-4;
    let mut detail = format!("truncation {trunc:.1e}");
    for (k, m, tsum) in [(1, acc.first, acc.truncated_first), (2, acc.second, acc.truncated_second)] {
        let exact = exact_moment(&MomentRequest::at_origin(5, k, Truncation::Limit { policy }, mu.clone()))?;
        let se = m.std_error()?;
        let margin = tsum as f64 / n + trunc * m.mean();
        let allowed = 3.0 * se + margin + exact.error_bound;
        let gap = (m.mean() - exact.value).abs();
        pass &= gap <= allowed;
        detail += &format!(
            "; k={k}: MC {:.4} +- {:.4} vs diagrams {:.4} (err {:.1e}), gap {gap:.4} <= {allowed:.4}",
            m.mean(),
            se,
            exact.value,
            exact.error_bound
        );
    }
    Ok((pass, detail))
}

fn c06_truncated_bound(profile: Profile) -> Result<(bool, String)> {
    let mu = OffspringDistribution::binary();
    let episodes = profile.episodes(1_000_000);
    let mut pass = true;
    let mut rows = Vec::new();
    for dim in 1..=2 {
        for n in [4usize, 8, 16] {
            let acc = square_moments(&EpisodeConfig::new(dim, mu.clone(), n as u32, 6 + n as u64), episodes)?;
            let bound = exact_moment(&MomentRequest::at_origin(dim, 2, Truncation::Steps { n }, mu.clone()))?.value;
            let mc = acc.second.mean();
            let se = acc.second.std_error()?;
            pass &= mc <= bound + 3.0 * se;
            rows.push(format!("d={dim} n={n}: {mc:.3}+-{se:.3} <= {bound:.3}"));
        }
    }
    Ok((pass, rows.join("; ")))
}

fn c07_low_d_scaling(_: Profile) -> Result<(bool, String)> {
    let mu = OffspringDistribution::binary();
    let ns: Vec<usize> = (4..=9).map(|e| 1 << e).collect();
    let mut pass = true;
    let mut detail = Vec::new();
    for (dim, target) in [(1usize, 2.0), (2, 1.0)] {
        let bounds = second_moment_bounds_at_origin(dim, &ns, &mu)?;
        let xs: Vec<f64> = bounds.iter().map(|b| b.0 as f64).collect();
        let ys: Vec<f64> = bounds.iter().map(|b| b.1).collect();
        let fit = fit_points(FitModel::Power, &xs, &ys, &vec![0.0; xs.len()], (16.0, 512.0))?;
        pass &= (fit.slope - target).abs() <= 0.2;
        detail.push(format!("d={dim} exponent {:.3} (target {target})", fit.slope));
    }
    let bounds = second_moment_bounds_at_origin(3, &ns, &mu)?;
    let ratios: Vec<f64> = bounds.iter().map(|&(n, b)| b / (n as f64 + 1.0).ln()).collect();
    let spread = ratios.iter().cloned().fold(0.0, f64::max) / ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    pass &= spread <= 3.0;
    detail.push(format!("d=3 bound/log(n+1) spread {spread:.3}"));
    Ok((pass, detail.join("; ")))
}

fn c08_kolmogorov(profile: Profile) -> Result<(bool, String)> {
    let mu = OffspringDistribution::binary();
    let variance = mu.variance();
    let cfg = EpisodeConfig::new(1, mu, 256, 8);
    let r_values: Vec<u32> = (0..=8).map(|e| 1 << e).collect();
    let table = estimate_survival(&cfg, &r_values, profile.episodes(1_000_000))?;
    let report = kolmogorov_check(&table, variance, 0.1)?;
    let last = report.rows.last().expect("nonempty table");
    Ok((
        report.pass,
        format!("r=256: r P sigma^2/2 = {:.4} [{:.4}, {:.4}], deviation {:.4}", last.scaled, last.lower, last.upper, report.final_deviation),
    ))
}

struct TailCase {
    dim: usize,
    cap: u32,
    episodes: u64,
    thresholds: Vec<u64>,
    range: (f64, f64),
    target: f64,
    tolerance: f64,
}

fn c09_tail_exponents(profile: Profile) -> Result<(bool, String)> {
    let doubling = |from: u64, to: u64| (0..).map(move |e| from << e).take_while(move |&n| n <= to).collect::<Vec<_>>();
    let cases = [
        TailCase { dim: 1, cap: 4096, episodes: 1_000_000, thresholds: doubling(32, 1024), range: (32.0, 1024.0), target: -2.0 / 3.0, tolerance: 0.1 },
        TailCase { dim: 2, cap: 16384, episodes: 1_000_000, thresholds: doubling(16, 1024), range: (16.0, 1024.0), target: -1.0, tolerance: 0.12 },
        TailCase {
            dim: 3,
            cap: 4096,
            episodes: 10_000_000,
            thresholds: vec![8, 12, 16, 24, 32, 48, 64],
            range: (8.0, 64.0),
            target: -2.0,
            tolerance: 0.25,
        },
    ];
    let mut pass = true;
    let mut detail = Vec::new();
    for case in cases {
        let cfg = EpisodeConfig::new(case.dim, OffspringDistribution::binary(), case.cap, 9 + case.dim as u64);
        let tail = estimate_tail(&cfg, &case.thresholds, profile.episodes(case.episodes))?;
        let fit = fit_power(&tail, case.range)?;
        let (trunc_ok, smallest) = truncation_ok(&tail);
        let ok = (fit.slope - case.target).abs() <= case.tolerance && trunc_ok;
        pass &= ok;
        detail.push(format!(
            "d={} slope {:.3} +- {:.3} (target {:.3} +- {}), truncation {:.1e} vs 10 x {:.1e}",
            case.dim, fit.slope, fit.slope_std_error, case.target, case.tolerance, tail.truncation_fraction, smallest
        ));
    }
    Ok((pass, detail.join("; ")))
}

fn c10_four_dim_shape(profile: Profile) -> Result<(bool, String)> {
    let cfg = EpisodeConfig::new(4, explicit_law(32)?, 4096, 10);
    let thresholds: Vec<u64> = (3..=10).map(|m| m * m).collect();
    let tail = estimate_tail(&cfg, &thresholds, profile.episodes(1_000_000))?;
    let cmp = fit_stretched(&tail, (9.0, 100.0))?;
    let (trunc_ok, smallest) = truncation_ok(&tail);
    let pass = cmp.preferred == FitModel::StretchedExp && cmp.stretched.r_squared >= 0.98 && trunc_ok;
    Ok((
        pass,
        format!(
            "R^2 stretched {:.4}, exponential {:.4}, power {:.4}; preferred {:?}; truncation {:.1e} vs 10 x {:.1e}",
            cmp.stretched.r_squared,
            cmp.exponential.r_squared,
            cmp.power.r_squared,
            cmp.preferred,
            tail.truncation_fraction,
            smallest
        ),
    ))
}

fn c11_five_dim_shape(profile: Profile) -> Result<(bool, String)> {
    let cfg = EpisodeConfig::new(5, explicit_law(8)?, 1024, 11);
    let thresholds: Vec<u64> = (1..=10).map(|m| 2 * m).collect();
    let tail = estimate_tail(&cfg, &thresholds, profile.episodes(1_000_000))?;
    let fit = fit_points(
        FitModel::Exp,
        &thresholds.iter().map(|&t| t as f64).collect::<Vec<_>>(),
        &tail.estimates(),
        &tail.half_widths(),
        (2.0, 20.0),
    )?;
    let (trunc_ok, smallest) = truncation_ok(&tail);

    let radii = [4i64, 6, 8, 12, 16, 24, 32];
    let mut ns = Vec::new();
    let mut gs = Vec::new();
    for r in radii {
        let x = [r, 0, 0, 0, 0];
        ns.push(bracket(&x));
        gs.push(green_value(&x)?.0);
    }
    let green = fit_points(FitModel::Power, &ns, &gs, &vec![0.0; ns.len()], (4.0, 32.0))?;
    let pass = fit.r_squared >= 0.98 && trunc_ok && (green.slope + 3.0).abs() <= 0.3;
    Ok((
        pass,
        format!(
            "exp fit R^2 {:.4} (rate {:.3}), truncation {:.1e} vs 10 x {:.1e}; Green slope {:.3}",
            fit.r_squared, fit.slope, tail.truncation_fraction, smallest, green.slope
        ),
    ))
}

fn c12_paley_zygmund(_: Profile) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut failures = 0usize;
    let mut checks = 0usize;
    let mut tightest = f64::INFINITY;
    for _ in 0..10_000 {
        let atoms_n = rng.gen_range(1..=5);
        let mut atoms: Vec<(f64, f64)> = (0..atoms_n)
            .map(|_| {
                let x = if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.0..10.0) };
                (x, rng.gen_range(0.01..1.0))
            })
            .collect();
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        for a in atoms.iter_mut() {
            a.1 /= total;
        }
        for p in [2.0, 3.0] {
            for eps in [0.0, 0.25, 0.5] {
                let r = pz_verify(&atoms, p, eps)?;
                checks += 1;
                if !r.pass {
                    failures += 1;
                }
                tightest = tightest.min(r.truth.min(r.conditional_truth) - r.bound.value);
            }
        }
    }
    Ok((failures == 0, format!("{checks} checks, {failures} violations, smallest slack {tightest:.3e}")))
}

/// Orbit representatives: nonincreasing nonnegative vectors with `l1` norm at most `max`.
fn representatives(dim: usize, max: i64) -> Vec<Vec<i64>> {
    fn walk(prefix: &mut Vec<i64>, dim: usize, left: i64, cap: i64, out: &mut Vec<Vec<i64>>) {
        if prefix.len() == dim {
            out.push(prefix.clone());
            return;
        }
        for c in 0..=left.min(cap) {
            prefix.push(c);
            walk(prefix, dim, left - c, c, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    walk(&mut Vec::new(), dim, max, max, &mut out);
    out
}

/// Fixed window for `bubble(x) <x>^3` in five dimensions.
const HIGH_DIM_WINDOW: (f64, f64) = (0.25, 4.0);
/// The four-dimensional constant is this factor times the largest ratio seen
/// on the calibration orbits `|x|_1 <= 4` in a radius-48 box.
const FOUR_DIM_MARGIN: f64 = 1.5;

fn c13_bubbles(_: Profile) -> Result<(bool, String)> {
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    let points5 = representatives(5, 10);
    for x in &points5 {
        let v = bubble_sum(BubbleVariant::HighDim, x, 16)? * bracket(x).powi(3);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let mut calibration = 0.0f64;
    for k in 0..=4 {
        for x in &representatives(4, 4) {
            calibration = calibration.max(bubble_sum(BubbleVariant::FourDim { k }, x, 48)? / four_dim_bubble_envelope(k, x));
        }
    }
    let constant = FOUR_DIM_MARGIN * calibration;
    let mut worst4 = 0.0f64;
    let points4 = representatives(4, 10);
    for k in 0..=4 {
        for x in &points4 {
            worst4 = worst4.max(bubble_sum(BubbleVariant::FourDim { k }, x, 32)? / four_dim_bubble_envelope(k, x));
        }
    }
    let pass = lo >= HIGH_DIM_WINDOW.0 && hi <= HIGH_DIM_WINDOW.1 && worst4 <= constant;
    Ok((
        pass,
        format!(
            "d=5: bubble <x>^3 in [{lo:.3}, {hi:.3}] over {} orbits (window {:?}); d=4: max ratio {worst4:.3} <= C = {constant:.3} (calibrated {calibration:.3}) over {} orbits, k<=4",
            points5.len(),
            HIGH_DIM_WINDOW,
            points4.len()
        ),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_walk_matches_kernel() {
        for dim in 1..=2 {
            let g = truncated_green(dim, 4).unwrap();
            g.for_each_point(|x, v| {
                let oracle: f64 = (1..=4).map(|m| walk_probability(m, x)).sum();
                assert!((oracle - v).abs() < 1e-15, "{x:?}");
            });
        }
    }

    #[test]
    fn representatives_cover_small_balls() {
        assert_eq!(representatives(2, 2), vec![vec![0, 0], vec![1, 0], vec![1, 1], vec![2, 0]]);
    }

    #[test]
    fn fast_criteria_pass() {
        for id in [1, 12] {
            let r = run_criterion(&CRITERIA[id - 1], Profile::Quick);
            assert!(r.pass, "{}", r.detail);
        }
    }
}
