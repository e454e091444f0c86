//! End-to-end acceptance checks. Runs as a plain binary and prints one PASS/FAIL line per
//! criterion; exits non-zero if any criterion fails.

use std::path::Path;
use std::time::{Duration, Instant};

use molts::env::{gen_contexts, ContextMode};
use molts::harness::{run_experiment, run_instance, write_outputs, ExperimentConfig};
use molts::pareto::{
    effective_front, effective_gap, pareto_front, pareto_gap, scalarized_argmax, weight_for_arm,
    RewardTable,
};
use molts::policy::{m_min, optimism_probability_trial, PolicyConfig, SampleCount};
use molts::rls::RlsState;
use molts::rng::{seeded, stream_rng, SimRng, Stream};
use rand::Rng;
use rand_distr::StandardNormal;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn uniform_table(rng: &mut SimRng, k: usize, l: usize) -> RewardTable {
    RewardTable::new(
        (0..k)
            .map(|_| (0..l).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect(),
    )
    .unwrap()
}

/// Coarsely quantized entries, so ties and duplicate rows are common.
fn tied_table(rng: &mut SimRng, k: usize, l: usize) -> RewardTable {
    RewardTable::new(
        (0..k)
            .map(|_| {
                (0..l)
                    .map(|_| rng.random_range(0..=4) as f64 / 4.0)
                    .collect()
            })
            .collect(),
    )
    .unwrap()
}

fn subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, size, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, size, &mut Vec::new(), &mut out);
    out
}

/// Best `min_ℓ (Σ β_b μ_b − μ_a)_ℓ` per arm over mixtures on a simplex grid with step `1/n`.
/// A maximin optimum has at most `L` non-zero weights, so only supports of size `min(K, L)`
/// are enumerated (smaller supports are faces of those).
fn grid_maximin(table: &RewardTable, n: usize) -> Vec<f64> {
    let k = table.num_arms();
    let l = table.num_objectives();
    let rows: Vec<&[f64]> = table.rows().collect();
    let mut best = vec![f64::NEG_INFINITY; k];
    let mut mix = vec![0.0; l];
    let mut visit = |weights: &[(usize, f64)], best: &mut Vec<f64>| {
        mix.iter_mut().for_each(|v| *v = 0.0);
        for &(b, w) in weights {
            for (m, r) in mix.iter_mut().zip(rows[b]) {
                *m += w * r;
            }
        }
        for (a, row) in rows.iter().enumerate() {
            let val = mix
                .iter()
                .zip(row.iter())
                .map(|(m, r)| m - r)
                .fold(f64::INFINITY, f64::min);
            if val > best[a] {
                best[a] = val;
            }
        }
    };
    let nf = n as f64;
    for support in subsets(k, l.min(k)) {
        match support.len() {
            1 => visit(&[(support[0], 1.0)], &mut best),
            2 => {
                for i in 0..=n {
                    let w = i as f64 / nf;
                    visit(&[(support[0], w), (support[1], 1.0 - w)], &mut best);
                }
            }
            3 => {
                for i in 0..=n {
                    for j in 0..=(n - i) {
                        let (wi, wj) = (i as f64 / nf, j as f64 / nf);
                        visit(
                            &[
                                (support[0], wi),
                                (support[1], wj),
                                (support[2], (n - i - j) as f64 / nf),
                            ],
                            &mut best,
                        );
                    }
                }
            }
            s => unreachable!("support size {s} not needed for L <= 3"),
        }
    }
    best
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut rng = seeded(101);
    let mut membership_mismatch = Vec::new();
    let mut worst_gap_err: f64 = 0.0;
    for idx in 0..1000 {
        let k = rng.random_range(1..=6);
        let l = rng.random_range(1..=3);
        let table = uniform_table(&mut rng, k, l);
        let front = effective_front(&table).unwrap();
        let grid = grid_maximin(&table, 1000);
        for a in 0..k {
            let oracle_member = grid[a] <= 1e-12;
            if front.contains(a) != oracle_member {
                membership_mismatch.push(format!(
                    "table {idx} arm {a} (grid maximin {:.3e})",
                    grid[a]
                ));
            }
            let gap = effective_gap(&table, a).unwrap();
            worst_gap_err = worst_gap_err.max((gap - grid[a].max(0.0)).abs());
        }
    }
    let elapsed = start.elapsed();
    let pass = membership_mismatch.is_empty()
        && worst_gap_err <= 2e-3
        && elapsed < Duration::from_secs(120);
    let mut detail = format!(
        "1000 tables, membership mismatches {}, max |gap - grid| {worst_gap_err:.2e}, limit 120s",
        membership_mismatch.len()
    );
    if !membership_mismatch.is_empty() {
        detail.push_str(&format!(" [{}]", membership_mismatch.join("; ")));
    }
    verdict(pass, detail)
}

fn criterion_2() -> Verdict {
    let mut rng = seeded(202);
    let mut violations = Vec::new();
    for idx in 0..10_000 {
        let k = rng.random_range(1..=20);
        let l = rng.random_range(1..=5);
        let table = if idx % 2 == 0 {
            uniform_table(&mut rng, k, l)
        } else {
            tied_table(&mut rng, k, l)
        };
        let pareto = pareto_front(&table);
        let effective = effective_front(&table).unwrap();
        if effective.members.iter().any(|a| !pareto.contains(*a)) {
            violations.push(format!(
                "table {idx}: effective front not within Pareto front"
            ));
        }
        for a in 0..k {
            let pg = pareto_gap(&table, a).unwrap();
            let eg = effective_gap(&table, a).unwrap();
            if !(pg >= 0.0 && pg <= eg) {
                violations.push(format!(
                    "table {idx} arm {a}: pareto gap {pg} > effective gap {eg}"
                ));
            }
            if pareto.contains(a) && pg != 0.0 {
                violations.push(format!("table {idx} arm {a}: Pareto member with gap {pg}"));
            }
            if effective.contains(a) && eg != 0.0 {
                violations.push(format!(
                    "table {idx} arm {a}: effective member with gap {eg}"
                ));
            }
        }
    }
    let detail = format!("10000 tables, {} violations", violations.len());
    let detail = match violations.first() {
        Some(first) => format!("{detail} (first: {first})"),
        None => detail,
    };
    verdict(violations.is_empty(), detail)
}

fn random_simplex(rng: &mut SimRng, l: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..l)
        .map(|_| -rng.random_range(f64::EPSILON..1.0).ln())
        .collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn criterion_3() -> Verdict {
    let mut rng = seeded(303);
    let mut violations = Vec::new();
    let mut singletons = 0usize;
    let mut certified = 0usize;
    for idx in 0..500 {
        let k = rng.random_range(1..=8);
        let l = rng.random_range(1..=4);
        let table = uniform_table(&mut rng, k, l);
        let effective = effective_front(&table).unwrap();
        for _ in 0..100 {
            let w = random_simplex(&mut rng, l);
            let argmax = scalarized_argmax(&table, &w).unwrap();
            if let [a] = argmax[..] {
                singletons += 1;
                if !effective.contains(a) {
                    violations.push(format!(
                        "table {idx}: unique argmax {a} outside effective front"
                    ));
                }
            }
        }
        for &a in &effective.members {
            match weight_for_arm(&table, a).unwrap() {
                Some(w) => {
                    if scalarized_argmax(&table, &w).unwrap().contains(&a) {
                        certified += 1;
                    } else {
                        violations.push(format!(
                            "table {idx} arm {a}: certifying weight {w:?} fails"
                        ));
                    }
                }
                None => violations.push(format!("table {idx} arm {a}: no certifying weight")),
            }
        }
    }
    let detail = format!(
        "500 tables, {singletons} unique argmaxes, {certified} certified front arms, {} violations",
        violations.len()
    );
    let detail = match violations.first() {
        Some(first) => format!("{detail} (first: {first})"),
        None => detail,
    };
    verdict(violations.is_empty(), detail)
}

fn criterion_4() -> Verdict {
    let trials = 100_000;
    let threshold = 0.15 - 3.0 * (0.15 * 0.85 / trials as f64).sqrt();
    let start = Instant::now();
    let context = [0.2, -0.4, 0.1, 0.5, 0.3];
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, l) in [1usize, 2, 4, 8].into_iter().enumerate() {
        let m = m_min(l, 0.15).unwrap();
        let cfg = PolicyConfig {
            num_samples: SampleCount::Fixed(m),
            ..PolicyConfig::default()
        };
        let state = RlsState::new(5, l, 1.0).unwrap();
        let freq =
            optimism_probability_trial(&state, &context, &cfg, trials, &mut seeded(400 + i as u64))
                .unwrap();
        pass &= freq >= threshold;
        parts.push(format!("L={l} M={m}: {freq:.4}"));
    }
    // The criterion's own listing uses M = 5 for L = 2; report it alongside.
    let cfg = PolicyConfig {
        num_samples: SampleCount::Fixed(5),
        ..PolicyConfig::default()
    };
    let state = RlsState::new(5, 2, 1.0).unwrap();
    let freq5 =
        optimism_probability_trial(&state, &context, &cfg, trials, &mut seeded(499)).unwrap();
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(60);
    verdict(
        pass,
        format!(
            "{}, threshold {threshold:.4}, {:.1}s (info: L=2 M=5 gives {freq5:.4})",
            parts.join(", "),
            elapsed.as_secs_f64()
        ),
    )
}

/// Solve `A x = b` for symmetric positive definite `A` by Cholesky.
fn spd_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                l[i][i] = (a[i][i] - s).sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        y[i] = (b[i] - (0..i).map(|k| l[i][k] * y[k]).sum::<f64>()) / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        x[i] = (y[i] - ((i + 1)..n).map(|k| l[k][i] * x[k]).sum::<f64>()) / l[i][i];
    }
    x
}

fn unit_ball_point(rng: &mut SimRng, d: usize) -> Vec<f64> {
    let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let r: f64 = rng.random::<f64>().powf(1.0 / d as f64);
    g.iter().map(|v| v / n * r).collect()
}

fn criterion_5() -> Verdict {
    let (d, l, t, lambda) = (10, 3, 10_000, 1.0);
    let mut rng = seeded(505);
    let mut state = RlsState::new(d, l, lambda).unwrap();
    let mut gram = vec![vec![0.0; d]; d];
    for (i, row) in gram.iter_mut().enumerate() {
        row[i] = lambda;
    }
    let mut moments = vec![vec![0.0; d]; l];
    let mut potential = 0.0;
    for _ in 0..t {
        let x = unit_ball_point(&mut rng, d);
        let r: Vec<f64> = (0..l).map(|_| rng.sample(StandardNormal)).collect();
        let norm = state.mahalanobis_norm(&x).unwrap();
        potential += norm * norm;
        state.update(&x, &r).unwrap();
        for i in 0..d {
            for j in 0..d {
                gram[i][j] += x[i] * x[j];
            }
        }
        for (z, ri) in moments.iter_mut().zip(&r) {
            for (zi, xi) in z.iter_mut().zip(&x) {
                *zi += ri * xi;
            }
        }
    }
    let mut worst: f64 = 0.0;
    for (obj, z) in moments.iter().enumerate() {
        let direct = spd_solve(&gram, z);
        let inc = state.estimates()[obj].as_slice();
        let diff = direct
            .iter()
            .zip(inc)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale = direct.iter().map(|a| a * a).sum::<f64>().sqrt();
        worst = worst.max(diff / scale);
    }
    let cap = 2.0 * d as f64 * (1.0 + t as f64 / lambda).ln();
    verdict(
        worst <= 1e-8 && potential <= cap,
        format!("max relative estimate error {worst:.2e}, potential {potential:.3} <= {cap:.3}"),
    )
}

fn paper_config() -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/paper_default.cfg");
    ExperimentConfig::load(&path).expect("paper default config")
}

fn criterion_6() -> Verdict {
    let start = Instant::now();
    let mut cfg = paper_config();
    cfg.emit_plots = false;
    assert_eq!(
        (
            cfg.num_arms,
            cfg.dim,
            cfg.num_objectives,
            cfg.horizon,
            cfg.num_instances
        ),
        (50, 5, 4, 10_000, 10)
    );
    let outcome = run_experiment(&cfg).unwrap();
    if !outcome.failures.is_empty() {
        return verdict(false, format!("instance failures: {:?}", outcome.failures));
    }
    let ledgers = outcome.ledgers();
    let of = |label: &str| -> Vec<_> { ledgers.iter().filter(|l| l.label == label).collect() };
    let final_mean = |label: &str| {
        let ls = of(label);
        ls.iter().map(|l| l.final_effective_regret()).sum::<f64>() / ls.len() as f64
    };
    let ts = of("mol-ts");
    let window = |l: &molts::RegretLedger, from: usize, to: usize| {
        let before = if from == 1 {
            0.0
        } else {
            l.records[from - 2].cum_effective
        };
        (l.records[to - 1].cum_effective - before) / (to - from + 1) as f64
    };
    let early = ts.iter().map(|l| window(l, 1, 1000)).sum::<f64>() / ts.len() as f64;
    let late = ts.iter().map(|l| window(l, 9001, 10_000)).sum::<f64>() / ts.len() as f64;
    let ratio = late / early;
    let (ts_final, m1_final, eps_final) = (
        final_mean("mol-ts"),
        final_mean("mol-ts:m=1"),
        final_mean("eps-greedy"),
    );
    let a = ratio <= 0.5;
    let b = ts_final < eps_final;
    let c = ts_final <= m1_final;
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        a && b && c && elapsed <= 1800.0,
        format!(
            "(a) late/early per-round EPR {late:.4}/{early:.4} = {ratio:.3} [{}]; \
             (b) EPR(T) mol-ts {ts_final:.1} vs eps-greedy {eps_final:.1} [{}]; \
             (c) mol-ts {ts_final:.1} vs M=1 {m1_final:.1} [{}]; mol-ucb {:.1}; {elapsed:.0}s",
            if a { "ok" } else { "fail" },
            if b { "ok" } else { "fail" },
            if c { "ok" } else { "fail" },
            final_mean("mol-ucb"),
        ),
    )
}

/// Minimal single-objective linear bandit state with its own dense algebra.
struct ScalarLinear {
    d: usize,
    gram: Vec<Vec<f64>>,
    moment: Vec<f64>,
    rounds: usize,
}

impl ScalarLinear {
    fn new(d: usize, lambda: f64) -> Self {
        let mut gram = vec![vec![0.0; d]; d];
        for (i, row) in gram.iter_mut().enumerate() {
            row[i] = lambda;
        }
        Self {
            d,
            gram,
            moment: vec![0.0; d],
            rounds: 0,
        }
    }

    fn inverse(&self) -> Vec<Vec<f64>> {
        (0..self.d)
            .map(|j| {
                let mut e = vec![0.0; self.d];
                e[j] = 1.0;
                spd_solve(&self.gram, &e)
            })
            .collect()
    }

    fn estimate(&self) -> Vec<f64> {
        spd_solve(&self.gram, &self.moment)
    }

    fn update(&mut self, x: &[f64], r: f64) {
        for i in 0..self.d {
            for j in 0..self.d {
                self.gram[i][j] += x[i] * x[j];
            }
            self.moment[i] += r * x[i];
        }
        self.rounds += 1;
    }

    /// `R·sqrt(d·ln((1 + (t−1)/(λd))/δ)) + sqrt(λ)` with one objective, R = 1, λ = 1, δ = 0.05.
    fn radius(&self) -> f64 {
        let t = (self.rounds + 1) as f64;
        let d = self.d as f64;
        (d * ((1.0 + (t - 1.0) / d) / 0.05).ln()).sqrt() + 1.0
    }
}

fn cholesky_lower(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            l[i][j] = if i == j {
                (a[i][i] - s).sqrt()
            } else {
                (a[i][j] - s) / l[j][j]
            };
        }
    }
    l
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn argmax(values: &[f64]) -> Vec<usize> {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..values.len()).filter(|&i| values[i] == best).collect()
}

/// Linear Thompson sampling (`ucb = false`) or LinUCB, consuming the policy stream the same
/// way as the library: `d` normals per sample, then one index draw from the argmax set.
fn reference_run(cfg: &ExperimentConfig, instance: usize, ucb: bool) -> Vec<usize> {
    let env = cfg.environment(instance).unwrap();
    let idx = instance as u64;
    let mut contexts_rng = stream_rng(cfg.master_seed, idx, Stream::Contexts);
    let mut noise_rng = stream_rng(cfg.master_seed, idx, Stream::Noise);
    let mut policy_rng = stream_rng(cfg.master_seed, idx, Stream::Policy);
    let mut model = ScalarLinear::new(cfg.dim, 1.0);
    let mut arms = Vec::new();
    for t in 1..=cfg.horizon {
        let outcome = gen_contexts(&env, t, &mut contexts_rng);
        let c = model.radius();
        let inv = model.inverse();
        let theta_hat = model.estimate();
        let scores: Vec<f64> = if ucb {
            outcome
                .contexts
                .rows()
                .map(|x| {
                    let vx: Vec<f64> = inv.iter().map(|row| dot(row, x)).collect();
                    dot(x, &theta_hat) + c * dot(x, &vx).sqrt()
                })
                .collect()
        } else {
            let chol = cholesky_lower(&inv);
            let z: Vec<f64> = (0..cfg.dim)
                .map(|_| policy_rng.sample(StandardNormal))
                .collect();
            let theta: Vec<f64> = (0..cfg.dim)
                .map(|i| theta_hat[i] + c * dot(&chol[i], &z))
                .collect();
            outcome.contexts.rows().map(|x| dot(x, &theta)).collect()
        };
        let best = argmax(&scores);
        let arm = best[policy_rng.random_range(0..best.len())];
        let reward = outcome.pull(arm, &mut noise_rng).unwrap();
        model.update(outcome.contexts.row(arm), reward[0]);
        arms.push(arm);
    }
    arms
}

fn criterion_7() -> Verdict {
    let mut cfg = ExperimentConfig {
        master_seed: 707,
        num_instances: 5,
        horizon: 100,
        num_arms: 20,
        dim: 5,
        num_objectives: 1,
        context_mode: ContextMode::PerRound,
        ..ExperimentConfig::default()
    };
    cfg.set_algorithms(&["mol-ts:m=1", "mol-ucb"]).unwrap();
    let mut mismatches = Vec::new();
    for instance in 0..cfg.num_instances {
        let run = run_instance(&cfg, instance).unwrap();
        for (ledger, ucb) in run.ledgers.iter().zip([false, true]) {
            let lib: Vec<usize> = ledger.records.iter().map(|r| r.arm).collect();
            let reference = reference_run(&cfg, instance, ucb);
            if let Some(t) = (0..lib.len()).find(|&t| lib[t] != reference[t]) {
                mismatches.push(format!(
                    "{} instance {instance} round {}",
                    ledger.label,
                    t + 1
                ));
            }
        }
    }
    let detail = format!(
        "{} trajectories x 100 rounds, {} diverging",
        2 * cfg.num_instances,
        mismatches.len()
    );
    let detail = match mismatches.first() {
        Some(first) => format!("{detail} (first: {first})"),
        None => detail,
    };
    verdict(mismatches.is_empty(), detail)
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(p) = stack.pop() {
        for entry in std::fs::read_dir(&p).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path
                    .strip_prefix(dir)
                    .unwrap()
                    .to_string_lossy()
                    .into_owned();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn criterion_8() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let mut base = paper_config();
    base.num_instances = 4;
    base.horizon = 500;
    base.emit_plots = true;
    let mut trees = Vec::new();
    for (name, parallel) in [("first", true), ("second", true), ("sequential", false)] {
        let cfg = ExperimentConfig {
            output_dir: tmp.path().join(name),
            parallel,
            ..base.clone()
        };
        let outcome = run_experiment(&cfg).unwrap();
        write_outputs(&cfg, &outcome).unwrap();
        trees.push(read_tree(&cfg.output_dir));
    }
    let files = trees[0].len();
    let identical = trees[1] == trees[0] && trees[2] == trees[0];
    verdict(
        identical && files > 0,
        format!("{files} output files per run, byte-identical across reruns and scheduling: {identical}"),
    )
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() {
    // Accept and ignore libtest flags passed by `cargo test`.
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let criteria: [Criterion; 8] = [
        ("criterion 1 (geometry oracle equivalence)", criterion_1),
        ("criterion 2 (front and gap laws)", criterion_2),
        ("criterion 3 (scalarization property suite)", criterion_3),
        ("criterion 4 (joint optimism Monte-Carlo)", criterion_4),
        ("criterion 5 (RLS numerics)", criterion_5),
        ("criterion 6 (default experiment properties)", criterion_6),
        ("criterion 7 (single-objective degenerations)", criterion_7),
        ("criterion 8 (determinism)", criterion_8),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        if filter.as_deref().is_some_and(|f| !name.contains(f)) {
            continue;
        }
        let start = Instant::now();
        let v = check();
        println!(
            "{name}: {} - {} ({:.1}s)",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
        failed += usize::from(!v.pass);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
