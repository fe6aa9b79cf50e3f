//! Acceptance suite: one PASS or FAIL line per criterion.
//!
//! Runs without the libtest harness. The process exits non-zero when a
//! criterion cannot be evaluated at all (a panic or an error inside the
//! check). A criterion that is evaluated and not met prints FAIL and the
//! measured values; set `PLATOON_ACCEPT_STRICT=1` to turn such a FAIL into
//! a non-zero exit as well.
//!
//! Desk-scale training dominates the runtime: 15 runs of 60 episodes
//! (five seeds each for High at g = 12, Moderate at g = 12 and High at
//! g = 6). Progress goes to standard error. `PLATOON_ACCEPT_ONLY=1,2,5`
//! restricts the run to the listed criteria and skips training nobody needs.

use std::fmt::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use platoon_core::config::{PolicyKind, SimConfig};
use platoon_core::coordination::coordination_reward;
use platoon_core::deadlock::WaitForGraph;
use platoon_core::drl::train_loop::{train_loop, ChainMdp};
use platoon_core::drl::{
    coordination_net_spec, formation_net_spec, AdamConfig, DqnAgent, Hyperparams, Input, LayerSpec, NetSpec, Network, Shape, Tensor, Workspace,
};
use platoon_core::formation::{delay, max_platoon_size, penalized_waiting};
use platoon_core::geometry::{mcd, msd};
use platoon_core::harness::Agents;
use platoon_core::metrics::{merge_histograms, modal, EpisodeMetrics};
use platoon_core::rng;
use platoon_harness::config;
use platoon_harness::runs::{self, EvalRow, SweepRow};
use rand::{Rng as _, SeedableRng};

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
/// Largest allowed rise between consecutive points of the 10-episode
/// moving average of deadlocks (cross-seed mean, events per episode).
const DEADLOCK_TREND_SLACK: f64 = 0.05;
const GRADIENT_TOLERANCE: f64 = 1e-4;
const EVAL_EPISODES: u64 = 10;
const SAFETY_EPISODES: u64 = 20;

type Outcome = Result<(bool, String), String>;

struct Suite {
    lines: Vec<(usize, bool)>,
    broken: usize,
    only: Option<Vec<usize>>,
}

impl Suite {
    fn wants(&self, n: usize) -> bool {
        self.only.as_ref().is_none_or(|o| o.contains(&n))
    }

    fn run(&mut self, n: usize, name: &str, f: impl FnOnce() -> Outcome) {
        if !self.wants(n) {
            return;
        }
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok((pass, detail)) => {
                println!("{} {n:>2} {name}: {detail} [{secs:.1} s]", if pass { "PASS" } else { "FAIL" });
                self.lines.push((n, pass));
            }
            Err(e) => {
                println!("FAIL {n:>2} {name}: could not evaluate: {e} [{secs:.1} s]");
                self.lines.push((n, false));
                self.broken += 1;
            }
        }
    }
}

fn desk() -> SimConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../config/desk.toml");
    config::load(&path).expect("shipped desk preset")
}

// ---------------------------------------------------------------- 1

fn network_shapes() -> Outcome {
    let t = Instant::now();
    let formation = formation_net_spec(33).shapes().map_err(|e| e.to_string())?;
    let formation_ok = formation
        == [
            Shape::new(160, 160, 4),
            Shape::new(52, 52, 32),
            Shape::new(26, 26, 32),
            Shape::new(12, 12, 32),
            Shape::new(26, 26, 32),
            Shape::new(12, 12, 64),
            Shape::new(5, 5, 64),
            Shape::flat(1600),
            Shape::flat(100),
            Shape::flat(33),
        ];
    let tail = [Shape::flat(256), Shape::flat(16), Shape::flat(24)];
    let expected: [(usize, Vec<Shape>); 3] = [
        (6, vec![Shape::new(6, 6, 4), Shape::new(16, 16, 4), Shape::new(14, 14, 32), Shape::new(6, 6, 64), Shape::new(2, 2, 64)]),
        // conv-1 reads the 20x20 padded canvas, not the listed 16x16.
        (12, vec![Shape::new(12, 12, 4), Shape::new(20, 20, 4), Shape::new(18, 18, 32), Shape::new(6, 6, 64), Shape::new(2, 2, 64)]),
        (
            24,
            vec![
                Shape::new(24, 24, 4),
                Shape::new(30, 30, 4),
                Shape::new(28, 28, 32),
                Shape::new(9, 9, 64),
                Shape::new(4, 4, 64),
                Shape::new(2, 2, 64),
            ],
        ),
    ];
    let mut bad = Vec::new();
    for (g, mut want) in expected {
        want.extend_from_slice(&tail);
        let got = coordination_net_spec(g, 24).and_then(|s| s.shapes()).map_err(|e| e.to_string())?;
        if got != want {
            bad.push(g);
        }
    }
    for g in [6, 12, 24] {
        // Building allocates every layer and checks the chain again.
        Network::zeros(coordination_net_spec(g, 24).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    }
    Network::zeros(formation_net_spec(33)).map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    Ok((
        formation_ok && bad.is_empty() && secs < 1.0,
        format!("formation {}, coordination mismatches {bad:?}, built in {secs:.3} s", if formation_ok { "exact" } else { "differs" }),
    ))
}

// ---------------------------------------------------------------- 2

fn random_tensor(shape: Shape, seed: u64, density: f64) -> Tensor {
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let data = (0..shape.len()).map(|_| if r.random::<f64>() < density { r.random_range(-1.0..1.0) } else { 0.0 }).collect();
    Tensor::from_vec(shape, data).unwrap()
}

/// Worst relative error between backpropagated and central-difference
/// gradients of `sum_k c_k q_k`.
fn gradient_error(spec: NetSpec, seed: u64) -> f64 {
    let net = Network::new(spec.clone(), &mut rng::stream(seed, 100, 0)).unwrap();
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed + 1);
    let mut params = net.params.clone();
    for (i, l) in spec.layers.iter().enumerate() {
        if let LayerSpec::Dense { out, .. } = l {
            let off = net.offsets[i] + net.shapes[i].c * out;
            for p in &mut params[off..off + out] {
                *p = r.random_range(0.1..0.3);
            }
        }
    }
    let x = Input::Dense(random_tensor(spec.input, seed, 0.6));
    let coef: Vec<f64> = (0..net.outputs()).map(|_| r.random_range(-1.0..1.0)).collect();
    let value = |p: &[f64]| net.forward_params(p, &x).unwrap().iter().zip(&coef).map(|(q, c)| q * c).sum::<f64>();
    let mut ws = Workspace::default();
    net.forward_with(&params, &x, &mut ws).unwrap();
    let mut grads = vec![0.0; params.len()];
    net.backward(&params, &mut ws, &coef, &mut grads);
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    for i in 0..params.len() {
        let mut p = params.clone();
        p[i] += h;
        let up = value(&p);
        p[i] -= 2.0 * h;
        let fd = (up - value(&p)) / (2.0 * h);
        worst = worst.max((fd - grads[i]).abs() / fd.abs().max(grads[i].abs()).max(1e-3));
    }
    worst
}

fn gradients() -> Outcome {
    let t = Instant::now();
    let image = |h, w, c| Shape::new(h, w, c);
    let cases: Vec<(&str, NetSpec)> = vec![
        ("dense", NetSpec { input: image(1, 1, 6), layers: vec![LayerSpec::Dense { out: 5, relu: true }, LayerSpec::Dense { out: 3, relu: false }] }),
        (
            "conv",
            NetSpec {
                input: image(7, 7, 2),
                layers: vec![LayerSpec::Conv { kh: 3, kw: 3, sh: 2, sw: 2, filters: 3 }, LayerSpec::Reshape, LayerSpec::Dense { out: 2, relu: false }],
            },
        ),
        (
            "pool",
            NetSpec {
                input: image(6, 6, 2),
                layers: vec![
                    LayerSpec::Conv { kh: 1, kw: 1, sh: 1, sw: 1, filters: 2 },
                    LayerSpec::MaxPool { ph: 2, pw: 2 },
                    LayerSpec::Reshape,
                    LayerSpec::Dense { out: 2, relu: false },
                ],
            },
        ),
        (
            "pad",
            NetSpec {
                input: image(4, 4, 2),
                layers: vec![
                    LayerSpec::Pad { h: 6, w: 6 },
                    LayerSpec::Conv { kh: 3, kw: 3, sh: 1, sw: 1, filters: 2 },
                    LayerSpec::Reshape,
                    LayerSpec::Dense { out: 2, relu: false },
                ],
            },
        ),
        (
            "scaled g=6 coordination net",
            NetSpec {
                input: image(6, 6, 4),
                layers: vec![
                    LayerSpec::Pad { h: 16, w: 16 },
                    LayerSpec::Conv { kh: 3, kw: 3, sh: 1, sw: 1, filters: 4 },
                    LayerSpec::Conv { kh: 3, kw: 3, sh: 2, sw: 2, filters: 6 },
                    LayerSpec::Conv { kh: 3, kw: 3, sh: 2, sw: 2, filters: 6 },
                    LayerSpec::Reshape,
                    LayerSpec::Dense { out: 4, relu: true },
                    LayerSpec::Dense { out: 24, relu: false },
                ],
            },
        ),
    ];
    let mut detail = String::new();
    let mut pass = true;
    for (i, (name, spec)) in cases.into_iter().enumerate() {
        let params = spec.param_count().map_err(|e| e.to_string())?;
        let err = gradient_error(spec, 40 + i as u64);
        pass &= err < GRADIENT_TOLERANCE && params <= 1000;
        write!(detail, "{name} ({params} params) {err:.1e}; ").unwrap();
    }
    let secs = t.elapsed().as_secs_f64();
    Ok((pass && secs < 60.0, format!("worst relative errors: {detail}tolerance {GRADIENT_TOLERANCE:.0e}")))
}

// ---------------------------------------------------------------- 3

fn chain_agent(seed: u64) -> DqnAgent {
    let spec = NetSpec { input: Shape::flat(5), layers: vec![LayerSpec::Dense { out: 16, relu: true }, LayerSpec::Dense { out: 2, relu: false }] };
    let net = Network::new(spec, &mut rng::stream(seed, rng::domain::INIT1, 0)).unwrap();
    let hyper = Hyperparams { epsilon: 0.3, observe: 32, target_sync: 50, adam: AdamConfig { lr: 1e-2, ..AdamConfig::default() }, ..Hyperparams::default() };
    DqnAgent::new(net, hyper, rng::stream(seed, rng::domain::LAYER1_EXPLORE, 0), rng::stream(seed, rng::domain::REPLAY1, 0))
}

fn chain_mdp() -> Outcome {
    let t = Instant::now();
    let mut optimal = 0;
    for seed in 0..10 {
        let mut env = ChainMdp::new(5);
        let mut agent = chain_agent(seed);
        let mut steps = 0;
        while steps < 2000 {
            steps += train_loop(&mut env, &mut agent, 1, 50).map_err(|e| e.to_string())?[0].steps;
        }
        let q = env.optimal_q(agent.hyper.gamma);
        let best: Vec<usize> = q[..4].iter().map(|r| usize::from(r[1] > r[0])).collect();
        if env.greedy_policy(&agent).map_err(|e| e.to_string())? == best {
            optimal += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    Ok((optimal >= 9 && secs < 60.0, format!("greedy policy optimal in {optimal}/10 seeds after 2000 steps")))
}

// ---------------------------------------------------------------- 4

/// Every cyclic vertex order, rotated to start at its smallest vertex.
fn brute_cycles(g: &WaitForGraph) -> Vec<Vec<usize>> {
    fn extend(g: &WaitForGraph, path: &mut Vec<usize>, rest: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest.is_empty() {
            if g.has_edge(*path.last().unwrap(), path[0]) {
                out.push(path.clone());
            }
            return;
        }
        for i in 0..rest.len() {
            let v = rest.remove(i);
            if g.has_edge(*path.last().unwrap(), v) {
                path.push(v);
                extend(g, path, rest, out);
                path.pop();
            }
            rest.insert(i, v);
        }
    }
    let n = g.len();
    let mut out = Vec::new();
    for mask in 1u32..(1 << n) {
        let nodes: Vec<usize> = (0..n).filter(|v| mask >> v & 1 == 1).collect();
        if nodes.len() >= 2 {
            extend(g, &mut vec![nodes[0]], &mut nodes[1..].to_vec(), &mut out);
        }
    }
    out.sort();
    out
}

fn deadlock_oracle() -> Outcome {
    let t = Instant::now();
    let mut graphs = 0u64;
    let mut mismatches = 0u64;
    for n in 0..=5usize {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (0..n).filter(move |v| *v != u).map(move |v| (u, v))).collect();
        for bits in 0..(1u64 << pairs.len()) {
            let mut g = WaitForGraph::new(n);
            for (k, (u, v)) in pairs.iter().enumerate() {
                if bits >> k & 1 == 1 {
                    g.add_edge(*u, *v);
                }
            }
            graphs += 1;
            mismatches += u64::from(g.cycles() != brute_cycles(&g));
        }
    }
    let mut random = 0u64;
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..10_000 {
        let n = r.random_range(1..=8);
        let p: f64 = r.random_range(0.05..0.6);
        let mut g = WaitForGraph::new(n);
        for u in 0..n {
            for v in 0..n {
                if u != v && r.random::<f64>() < p {
                    g.add_edge(u, v);
                }
            }
        }
        random += 1;
        mismatches += u64::from(g.cycles() != brute_cycles(&g));
    }
    let secs = t.elapsed().as_secs_f64();
    Ok((mismatches == 0 && secs < 60.0, format!("{mismatches} mismatches over {graphs} exhaustive and {random} random graphs")))
}

// ---------------------------------------------------------------- 5

/// Stopping distance by explicit integration with a 1 ms step.
fn integrated_stop(speed: f64, decel: f64) -> f64 {
    let (mut v, mut x, dt) = (speed, 0.0, 1e-3);
    while v > 0.0 {
        let next = (v - decel * dt).max(0.0);
        x += 0.5 * (v + next) * dt;
        v = next;
    }
    x
}

fn closed_forms() -> Outcome {
    let e = |e: platoon_core::Error| e.to_string();
    let n = max_platoon_size(5.0, 1.0, 200.0).map_err(e)?;
    let stop = msd(20.0, 5.0).map_err(e)?;
    let oracle = integrated_stop(20.0, 5.0);
    let checks = [
        ("N", n == 33),
        ("msd", stop == 40.0 && (stop - oracle).abs() <= 0.1),
        ("mcd", mcd(stop, msd(10.0, 5.0).map_err(e)?) == 10.0),
        ("waiting", penalized_waiting(0.0, 60.0) == 0.0 && penalized_waiting(60.0, 60.0) == 1.0 && penalized_waiting(30.0, 60.0) == 0.25),
        ("delay", delay(20.0, 20.0).map_err(e)? == 0.0 && delay(0.0, 20.0).map_err(e)? == 1.0 && delay(15.0, 20.0).map_err(e)? == 0.25),
        ("coordination reward", coordination_reward(5.0, &[8.0, 12.0]).map_err(e)? == -15.0 && coordination_reward(0.0, &[0.0, 0.0]).map_err(e)? == 0.0),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    Ok((failed.is_empty(), format!("N = {n}, msd(20, 5) = {stop} m vs integrated {oracle:.4} m, failed {failed:?}")))
}

// ---------------------------------------------------------------- training runs

struct Run {
    seed: u64,
    episodes: Vec<EpisodeMetrics>,
    agents: Agents,
}

fn train_runs(label: &str, base: &SimConfig) -> Result<Vec<Run>, String> {
    SEEDS
        .iter()
        .map(|&seed| {
            let cfg = SimConfig { seed, ..base.clone() };
            let t = Instant::now();
            let run = runs::train(&cfg, None, |m| {
                eprintln!("  [{label} seed {seed}] episode {:>2}: travel {:.1} s, deadlocks {}", m.episode, m.mean_travel_time, m.deadlocks)
            })
            .map_err(|e| e.to_string())?;
            eprintln!("  [{label} seed {seed}] trained in {:.0} s", t.elapsed().as_secs_f64());
            Ok(Run { seed, episodes: run.episodes, agents: run.agents })
        })
        .collect()
}

// ---------------------------------------------------------------- 6

fn safety(cfg: &SimConfig, agents: &Agents) -> Outcome {
    let mut detail = String::new();
    let mut pass = true;
    for policy in PolicyKind::ALL {
        let c = SimConfig { policy, ..cfg.clone() };
        let (rows, log) = runs::compare(&c, Some(agents), &[policy], SAFETY_EPISODES).map_err(|e| e.to_string())?;
        let audited: u64 = log.iter().map(|m| m.audited_steps).sum();
        let full = log.iter().all(|m| m.audited_steps == m.steps);
        pass &= rows[0].safety_violations == 0 && full;
        write!(detail, "{} {} violations / {audited} steps; ", policy.name(), rows[0].safety_violations).unwrap();
    }
    Ok((pass, detail.trim_end_matches("; ").into()))
}

// ---------------------------------------------------------------- 7

fn deadlock_elimination(runs: &[Run]) -> Outcome {
    let finals: Vec<f64> = runs.iter().map(|r| r.episodes.iter().rev().take(10).map(|m| m.deadlocks).sum::<u64>() as f64).collect();
    let median = runs::median(&finals).ok_or("no runs")?;
    let len = runs.iter().map(|r| r.episodes.len()).min().unwrap_or(0);
    let mean: Vec<f64> = (0..len).map(|i| runs.iter().map(|r| r.episodes[i].deadlocks as f64).sum::<f64>() / runs.len() as f64).collect();
    // ma[j] averages zero-based episodes j..=j+9, so counted from one it ends at episode j + 10.
    let ma = runs::moving_average(&mean, 10);
    let from = 10usize.min(ma.len());
    let worst_rise = ma[from..].windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let trend_ok = ma.len() > from && worst_rise <= DEADLOCK_TREND_SLACK;
    Ok((
        median == 0.0 && trend_ok,
        format!(
            "final-10 deadlocks per seed {finals:?}, median {median}; largest rise of the 10-episode average from episode 20 on {worst_rise:.3} (slack {DEADLOCK_TREND_SLACK})"
        ),
    ))
}

// ---------------------------------------------------------------- 8, 9

fn pooled_travel_times(cfg: &SimConfig, runs: &[Run]) -> Result<Vec<(PolicyKind, f64, Vec<f64>)>, String> {
    let mut out = Vec::new();
    for policy in PolicyKind::ALL {
        let mut all = Vec::new();
        let mut per_seed = Vec::new();
        for r in runs {
            let c = SimConfig { seed: r.seed, ..cfg.clone() };
            let (rows, log) = runs::compare(&c, Some(&r.agents), &[policy], EVAL_EPISODES).map_err(|e| e.to_string())?;
            per_seed.push(rows[0].mean_travel_time);
            all.extend(log);
        }
        out.push((policy, EvalRow::summarize(policy, cfg.condition, &all).mean_travel_time, per_seed));
    }
    Ok(out)
}

fn tt(table: &[(PolicyKind, f64, Vec<f64>)], p: PolicyKind) -> f64 {
    table.iter().find(|r| r.0 == p).map(|r| r.1).unwrap()
}

fn variant_ordering(table: &[(PolicyKind, f64, Vec<f64>)]) -> Outcome {
    let (c, rc, fp) = (tt(table, PolicyKind::CoorPlt), tt(table, PolicyKind::Rc), tt(table, PolicyKind::Fp));
    Ok((
        c <= rc && rc <= fp && c <= 0.95 * fp,
        format!("travel time coor-plt {c:.2} s, rc {rc:.2} s, fp {fp:.2} s ({:.1}% below fp)", 100.0 * (1.0 - c / fp)),
    ))
}

fn baseline_ordering(table: &[(PolicyKind, f64, Vec<f64>)]) -> Outcome {
    let (c, w, f) = (tt(table, PolicyKind::CoorPlt), tt(table, PolicyKind::Webster), tt(table, PolicyKind::FcfsReservation));
    Ok((c < w && c < f, format!("travel time coor-plt {c:.2} s, webster {w:.2} s, fcfs-reservation {f:.2} s")))
}

// ---------------------------------------------------------------- 10

fn final_mode(runs: &[Run]) -> Option<usize> {
    let hists: Vec<&[u64]> = runs.iter().flat_map(|r| r.episodes.iter().rev().take(20).map(|m| m.size_histogram.as_slice())).collect();
    modal(&merge_histograms(hists))
}

fn size_adaptivity(high: &[Run], moderate: &[Run]) -> Outcome {
    let (h, m) = (final_mode(high), final_mode(moderate));
    Ok((matches!((h, m), (Some(h), Some(m)) if h > m), format!("modal platoon size over the final 20 episodes: high {h:?}, moderate {m:?}")))
}

// ---------------------------------------------------------------- 11

fn granularity(g12: &[Run], g6: &[Run], base: &SimConfig) -> Outcome {
    let mut agree = 0;
    let mut detail = String::new();
    for (a, b) in g12.iter().zip(g6) {
        let s12 = SweepRow::summarize(&SimConfig { seed: a.seed, granularity: 12, ..base.clone() }, &a.episodes);
        let s6 = SweepRow::summarize(&SimConfig { seed: b.seed, granularity: 6, ..base.clone() }, &b.episodes);
        let ok = s12.final_layer2_reward >= s6.final_layer2_reward && s12.final_deadlocks <= s6.final_deadlocks;
        agree += usize::from(ok);
        write!(
            detail,
            "seed {}: reward {:.2} vs {:.2}, deadlocks {} vs {}; ",
            a.seed, s12.final_layer2_reward, s6.final_layer2_reward, s12.final_deadlocks, s6.final_deadlocks
        )
        .unwrap();
    }
    Ok((agree >= 4, format!("g=12 no worse than g=6 in {agree}/5 seeds ({})", detail.trim_end_matches("; "))))
}

// ---------------------------------------------------------------- 12

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism(base: &SimConfig) -> Outcome {
    let cfg = SimConfig { episodes: 4, checkpoint_every: 2, seed: 11, ..base.clone() };
    let dir = std::env::temp_dir().join(format!("platoon-acceptance-{}", std::process::id()));
    let (a, b) = (dir.join("a"), dir.join("b"));
    let first = runs::train(&cfg, Some(&a), |_| {}).map_err(|e| e.to_string())?;
    runs::train(&cfg, Some(&b), |_| {}).map_err(|e| e.to_string())?;
    let (fa, fb) = (files(&a), files(&b));
    let _ = std::fs::remove_dir_all(&dir);
    let checkpoints = fa.iter().filter(|f| f.0.extension().is_some_and(|e| e == "ckpt")).count();
    let learned = first.agents.formation.grad_steps > 0 && first.agents.coordination.grad_steps > 0;
    Ok((
        fa == fb && checkpoints == 3 && learned,
        format!(
            "{} files compared, {checkpoints} checkpoints, {} formation and {} coordination gradient steps, identical: {}",
            fa.len(),
            first.agents.formation.grad_steps,
            first.agents.coordination.grad_steps,
            fa == fb
        ),
    ))
}

fn main() {
    let started = Instant::now();
    let only = std::env::var("PLATOON_ACCEPT_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|n| n.trim().parse().ok()).collect::<Vec<usize>>());
    let mut suite = Suite { lines: Vec::new(), broken: 0, only };
    suite.run(1, "network shapes", network_shapes);
    suite.run(2, "gradient correctness", gradients);
    suite.run(3, "DQN chain sanity", chain_mdp);
    suite.run(4, "deadlock detector oracle", deadlock_oracle);
    suite.run(5, "closed-form checks", closed_forms);

    let base = desk();
    let high = SimConfig { condition: 2, granularity: 12, ..base.clone() };
    fn skipped<T>() -> Result<T, String> {
        Err("not selected".into())
    }
    let high_runs = if (6..=11).any(|n| suite.wants(n)) { train_runs("high g=12", &high) } else { skipped() };
    let moderate_runs =
        if suite.wants(10) { train_runs("moderate g=12", &SimConfig { condition: 1, ..high.clone() }) } else { skipped() };
    let g6_runs = if suite.wants(11) { train_runs("high g=6", &SimConfig { granularity: 6, ..high.clone() }) } else { skipped() };
    let table = if suite.wants(8) || suite.wants(9) {
        high_runs.as_ref().map_err(Clone::clone).and_then(|r| pooled_travel_times(&high, r))
    } else {
        skipped()
    };

    suite.run(6, "safety invariant", || safety(&high, &high_runs.as_ref().map_err(Clone::clone)?[0].agents));
    suite.run(7, "deadlock elimination", || deadlock_elimination(high_runs.as_ref().map_err(Clone::clone)?));
    suite.run(8, "variant ordering", || variant_ordering(table.as_ref().map_err(Clone::clone)?));
    suite.run(9, "conventional-baseline ordering", || baseline_ordering(table.as_ref().map_err(Clone::clone)?));
    suite.run(10, "platoon-size adaptivity", || size_adaptivity(high_runs.as_ref().map_err(Clone::clone)?, moderate_runs.as_ref().map_err(Clone::clone)?));
    suite.run(11, "granularity sensitivity", || granularity(high_runs.as_ref().map_err(Clone::clone)?, g6_runs.as_ref().map_err(Clone::clone)?, &high));

    suite.run(12, "determinism", || determinism(&high));

    if let Ok(t) = &table {
        for (p, pooled, per_seed) in t {
            println!("     travel time {:<17} {pooled:>7.2} s  per seed {per_seed:.2?}", p.name());
        }
    }
    let passed = suite.lines.iter().filter(|l| l.1).count();
    println!("{passed}/{} criteria passed in {:.0} s", suite.lines.len(), started.elapsed().as_secs_f64());
    let strict = std::env::var("PLATOON_ACCEPT_STRICT").is_ok_and(|v| v == "1");
    if suite.broken > 0 || (strict && passed < suite.lines.len()) {
        std::process::exit(1);
    }
}
