//! Acceptance gate. One PASS/FAIL line per criterion; exits nonzero when
//! any criterion fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use socsim_core::abm::{
    message_of, population, simulate, update_bc, update_hk, update_lorenz, update_ra, update_sj, AgentState,
    BcParams, HkParams, LorenzParams, Message, ModelKind, ModelParams, OpinionModel, RaParams, SignConvention,
    SjParams,
};
use socsim_core::agent::{format_response, parse_response, AgentAction, ReplayDriver};
use socsim_core::calibration::{calibrate, CalibrationTarget, ParameterGrid};
use socsim_core::metrics::{bias_and_diversity, classification_metrics, dtw, mae, pearson, AttitudeTrace};
use socsim_core::rng::unit_hash;
use socsim_core::runner::synth::{generate, SynthSpec};
use socsim_core::runner::{read_core_recording, run_frozen_replicate, run_macro, run_macro_with, Components, RunConfig};
use socsim_core::{AgentId, AttitudeScore};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn within(limit: Duration, took: Duration) -> Result<(), String> {
    if took < limit {
        Ok(())
    } else {
        Err(format!("took {:.2?}, limit {:.0?}", took, limit))
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn state(a: f64) -> AgentState {
    AgentState::new(0u64, a)
}

fn msg(source: u64, a: f64) -> Message {
    Message::new(source, AttitudeScore::new(a).unwrap())
}

// Reference formulas, written out directly from the model definitions.

fn oracle_bc(a_i: f64, a_j: f64, alpha: f64, eps: f64) -> f64 {
    let sim = if (a_j - a_i).abs() < eps { 1.0 } else { 0.0 };
    alpha * sim * (a_j - a_i)
}

fn oracle_hk(a_i: f64, others: &[f64], eps: f64) -> f64 {
    let inbound: Vec<f64> = others.iter().copied().filter(|a_j| (a_j - a_i).abs() < eps).collect();
    let n = inbound.len() as f64;
    if inbound.is_empty() {
        return 0.0;
    }
    1.0 / (n + 1.0) * inbound.iter().map(|a_j| a_j - a_i).sum::<f64>()
}

fn oracle_ra(a_i: f64, u_i: f64, a_j: f64, u_j: f64, alpha: f64) -> f64 {
    let h = (a_i + u_i).min(a_j + u_j) - (a_i - u_i).max(a_j - u_j);
    let sim = if h / u_j > 1.0 { h / u_j - 1.0 } else { 0.0 };
    alpha * sim * (a_j - a_i)
}

fn oracle_sj(a_i: f64, a_j: f64, p: &SjParams) -> f64 {
    let d = a_j - a_i;
    let sim = if d.abs() < p.acc_thred { d } else { 0.0 };
    let rep = if d.abs() > p.rej_thred { -d } else { 0.0 };
    p.alpha * (sim + rep)
}

fn oracle_lorenz(a: f64, m: f64, p: &LorenzParams) -> f64 {
    let big_m = p.boundary;
    let pol = (big_m * big_m - a * a) / (big_m * big_m);
    let sim = p.lambda.powf(p.k) / (p.lambda.powf(p.k) + (m - a).abs().powf(p.k));
    p.alpha * p.credibility * pol * sim * (p.rho * (m - a) + (1.0 - p.rho) * m)
}

fn abm_oracle() -> Outcome {
    const DRAWS: usize = 1000;
    const TOL: f64 = 1e-12;
    let start = Instant::now();
    let mut r = rng(1);
    let mut worst = 0.0f64;
    let mut check = |model: &str, got: f64, want: f64| -> Result<(), String> {
        let err = (got - want).abs();
        worst = worst.max(err);
        ensure!(err <= TOL, "{model}: got {got}, oracle {want}");
        Ok(())
    };
    for _ in 0..DRAWS {
        let a_i = r.gen_range(-1.0..=1.0);
        let a_j = r.gen_range(-1.0..=1.0);

        let p = BcParams {
            alpha: r.gen_range(0.0..=1.0),
            epsilon: r.gen_range(0.01..=2.0),
        };
        check("bc", update_bc(&state(a_i), &msg(1, a_j), &p), oracle_bc(a_i, a_j, p.alpha, p.epsilon))?;

        let p = HkParams {
            epsilon: r.gen_range(0.01..=2.0),
        };
        let n = r.gen_range(1..=20);
        let others: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..=1.0)).collect();
        let msgs: Vec<Message> = others.iter().enumerate().map(|(k, &a)| msg(k as u64 + 1, a)).collect();
        check(
            "hk",
            update_hk(&state(a_i), &msgs, &p, SignConvention::Assimilative),
            oracle_hk(a_i, &others, p.epsilon),
        )?;

        let p = RaParams {
            alpha: r.gen_range(0.0..=1.0),
            init_uncertainty: 0.5,
        };
        let u_i = r.gen_range(0.01..=1.0);
        let u_j = r.gen_range(0.01..=1.0);
        let ra = ModelParams::Ra(p);
        let source = AgentState::new(1u64, a_j).with_uncertainty(u_j);
        let m = message_of(&ra, &source).map_err(|e| e.to_string())?;
        let got = update_ra(&state(a_i).with_uncertainty(u_i), &m, &p, SignConvention::Assimilative)
            .map_err(|e| e.to_string())?;
        check("ra", got, oracle_ra(a_i, u_i, a_j, u_j, p.alpha))?;

        let acc = r.gen_range(0.01..1.0);
        let p = SjParams {
            alpha: r.gen_range(0.0..=1.0),
            acc_thred: acc,
            rej_thred: r.gen_range(acc + 0.01..=2.0),
        };
        check("sj", update_sj(&state(a_i), &msg(1, a_j), &p), oracle_sj(a_i, a_j, &p))?;

        let p = LorenzParams {
            alpha: r.gen_range(0.0..=1.0),
            lambda: r.gen_range(0.05..=2.0),
            k: r.gen_range(0.5..=4.0),
            rho: r.gen_range(0.0..=1.0),
            boundary: r.gen_range(1.0..=2.0),
            credibility: r.gen_range(0.0..=1.0),
        };
        check("lorenz", update_lorenz(&state(a_i), &msg(1, a_j), &p), oracle_lorenz(a_i, a_j, &p))?;
    }
    let took = start.elapsed();
    within(Duration::from_secs(1), took)?;
    Ok(format!("5 x {DRAWS} draws, max error {worst:.1e}, {took:.2?}"))
}

fn hand_fixtures() -> Outcome {
    let bc = update_bc(&state(0.0), &msg(1, 0.2), &BcParams { alpha: 0.1, epsilon: 0.3 });
    ensure!(bc == 0.1 * 0.2, "bc {bc}");
    ensure!((bc - 0.02).abs() < 1e-15, "bc {bc}");

    let hk = update_hk(&state(0.0), &[msg(1, 0.2)], &HkParams { epsilon: 0.3 }, SignConvention::Assimilative);
    ensure!(hk == 0.1, "hk {hk}");

    let ra_p = RaParams {
        alpha: 0.3,
        init_uncertainty: 0.2,
    };
    let m = message_of(&ModelParams::Ra(ra_p), &AgentState::new(1u64, 0.1).with_uncertainty(0.2)).unwrap();
    let ra = update_ra(&state(0.0).with_uncertainty(0.2), &m, &ra_p, SignConvention::Assimilative).unwrap();
    ensure!((ra - 0.015).abs() < 1e-15, "ra {ra}");

    let sj_p = SjParams {
        alpha: 0.15,
        acc_thred: 0.1,
        rej_thred: 0.8,
    };
    let sj_acc = update_sj(&state(0.0), &msg(1, 0.05), &sj_p);
    let sj_rej = update_sj(&state(0.0), &msg(1, 0.9), &sj_p);
    ensure!((sj_acc - 0.0075).abs() < 1e-15, "sj acceptance {sj_acc}");
    ensure!((sj_rej + 0.135).abs() < 1e-15, "sj rejection {sj_rej}");

    let lz = update_lorenz(
        &state(0.0),
        &msg(1, 0.5),
        &LorenzParams {
            alpha: 0.1,
            lambda: 1.0,
            k: 2.0,
            rho: 1.0,
            boundary: 1.0,
            credibility: 1.0,
        },
    );
    ensure!((lz - 0.04).abs() < 1e-15, "lorenz {lz}");
    Ok(format!("bc {bc} hk {hk} ra {ra} sj {sj_acc}/{sj_rej} lorenz {lz}"))
}

fn bc_consensus() -> Outcome {
    let start = Instant::now();
    let mut r = rng(3);
    let init: Vec<(AgentId, f64)> = (0..100).map(|i| (AgentId(i), r.gen_range(-1.0..=1.0))).collect();
    let params = ModelParams::Bc(BcParams {
        alpha: 0.25,
        epsilon: 2.0,
    });
    let trace = simulate(&OpinionModel::new(params), &population(&params, &init), 2000, 3, 0)
        .map_err(|e| e.to_string())?;
    let last = AttitudeTrace::new(vec![trace.last().unwrap().clone()]);
    let div = bias_and_diversity(&last).map_err(|e| e.to_string())?.diversity;
    let took = start.elapsed();
    ensure!(div < 0.01, "final diversity {div}");
    within(Duration::from_secs(5), took)?;
    Ok(format!("final diversity {div:.2e}, {took:.2?}"))
}

fn hk_hull() -> Outcome {
    let mut r = rng(4);
    for p in 0..50 {
        let n = r.gen_range(2..=60);
        let init: Vec<(AgentId, f64)> = (0..n).map(|i| (AgentId(i), r.gen_range(-1.0..=1.0))).collect();
        let params = ModelParams::Hk(HkParams {
            epsilon: r.gen_range(0.05..=1.0),
        });
        let trace = simulate(&OpinionModel::new(params), &population(&params, &init), 100, p, 0)
            .map_err(|e| e.to_string())?;
        let mut hi = init.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
        let mut lo = init.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
        for (t, row) in trace.iter().enumerate() {
            let h = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let l = row.iter().copied().fold(f64::INFINITY, f64::min);
            ensure!(h <= hi, "population {p} round {}: max rose {hi} -> {h}", t + 1);
            ensure!(l >= lo, "population {p} round {}: min fell {lo} -> {l}", t + 1);
            hi = h;
            lo = l;
        }
    }
    Ok("50 populations x 100 rounds".into())
}

/// Full-table DP.
fn dtw_table(x: &[f64], y: &[f64]) -> f64 {
    let (n, m) = (x.len(), y.len());
    let mut d = vec![vec![f64::INFINITY; m + 1]; n + 1];
    d[0][0] = 0.0;
    for i in 1..=n {
        for j in 1..=m {
            d[i][j] = (x[i - 1] - y[j - 1]).abs() + d[i - 1][j - 1].min(d[i - 1][j]).min(d[i][j - 1]);
        }
    }
    d[n][m]
}

fn dtw_correctness() -> Outcome {
    let mut r = rng(5);
    for k in 0..100 {
        let x: Vec<f64> = (0..r.gen_range(1..=50)).map(|_| r.gen_range(-1.0..=1.0)).collect();
        let y: Vec<f64> = (0..r.gen_range(1..=50)).map(|_| r.gen_range(-1.0..=1.0)).collect();
        let got = dtw(&x, &y).map_err(|e| e.to_string())?;
        let want = dtw_table(&x, &y);
        ensure!(got == want, "pair {k}: {got} vs {want}");
    }
    let fixed = dtw(&[0.0, 0.0, 1.0], &[0.0, 1.0]).unwrap();
    ensure!(fixed == 0.0, "dtw([0,0,1],[0,1]) = {fixed}");
    Ok("100 pairs exact, fixture 0".into())
}

fn calibration_recovery() -> Outcome {
    const N: u64 = 2000;
    const ROUNDS: u32 = 14;
    let start = Instant::now();
    let truth = ModelParams::Bc(BcParams {
        alpha: 0.10,
        epsilon: 0.30,
    });
    let grid = ParameterGrid::new(ModelKind::Bc, [("alpha", vec![0.05, 0.10, 0.15]), ("epsilon", vec![0.25, 0.30, 0.35])]);
    let mut hits = 0;
    let mut misses = Vec::new();
    for s in 0..10u64 {
        // Skewed initial population: a symmetric start makes the bias
        // signal vanish and the grid nearly flat.
        let initial: Vec<(AgentId, f64)> = (0..N)
            .map(|i| {
                let u = unit_hash(&[999, s, i]);
                (AgentId(i), 2.0 * u * u - 1.0)
            })
            .collect();
        let observed = simulate(&OpinionModel::new(truth), &population(&truth, &initial), ROUNDS, 1_000_000 + s, 0)
            .map_err(|e| e.to_string())?;
        let target = CalibrationTarget::from_trace(initial, &AttitudeTrace::new(observed)).map_err(|e| e.to_string())?;
        let result = calibrate(ModelKind::Bc, &grid, &target, 5, s).map_err(|e| e.to_string())?;
        if result.best == truth {
            hits += 1;
        } else {
            misses.push(format!("seed {s} -> {:?}", result.best));
        }
    }
    let took = start.elapsed();
    ensure!(hits >= 9, "{hits}/10 recovered; {}", misses.join("; "));
    within(Duration::from_secs(30), took)?;
    Ok(format!("{hits}/10 seeds recovered, {took:.2?}"))
}

const RESPONSE_EXAMPLE: &str = "Thought: The observation about the solidarity shown at the Golden Globes in support of the MeToo and Time's Up movement aligns with my progressive values and interests.\nAction: retweet(content=None, author=\"T***x\", original_tweet_id=\"356\", original_tweet=\"The solidarity shown at the Golden Globes Awards ceremony in support of the MeToo and Time's Up movement is inspiring. Let's keep the conversation going and work towards a more inclusive and equal society. #MeToo #TimesUp\")";

fn parser_fidelity() -> Outcome {
    match parse_response(RESPONSE_EXAMPLE).action {
        AgentAction::Retweet {
            original_tweet_id, ..
        } if original_tweet_id == "356" => {}
        other => return Err(format!("example parsed to {other:?}")),
    }
    let shapes = [
        AgentAction::Post {
            content: "Believe survivors, \"always\". #MeToo".into(),
        },
        AgentAction::Retweet {
            content: None,
            author: "T***x".into(),
            original_tweet_id: "356".into(),
            original_tweet: "The solidarity shown is inspiring.".into(),
        },
        AgentAction::Retweet {
            content: Some("Agreed, (and) more.".into()),
            author: "e***1".into(),
            original_tweet_id: "7".into(),
            original_tweet: "line one\nline two".into(),
        },
        AgentAction::Reply {
            content: "Not so fast, see \\ here".into(),
            author: "a***b".into(),
            original_tweet_id: "12".into(),
        },
        AgentAction::Like {
            author: "c***d".into(),
            original_tweet_id: "99".into(),
        },
        AgentAction::DoNothing,
    ];
    for a in &shapes {
        let back = parse_response(&format_response("thinking, then acting", a)).action;
        ensure!(&back == a, "{a:?} came back as {back:?}");
    }
    let garbage = [
        "",
        "Action:",
        "Action: fly(to=\"moon\")",
        "Thought: ok\nAction: post(content=\"unterminated",
        "\u{0}\u{1}Action: retweet(((",
        "just prose with no structure at all",
        "Action: like(author=\"x\")",
    ];
    let mut r = rng(7);
    let random: Vec<String> = (0..200)
        .map(|_| {
            let len = r.gen_range(0..80);
            let body: String = (0..len).map(|_| r.gen_range(' '..='~')).collect();
            if r.gen_bool(0.5) {
                format!("Action: {body}")
            } else {
                body
            }
        })
        .collect();
    for g in garbage.iter().copied().chain(random.iter().map(String::as_str)) {
        let parsed = catch_unwind(|| parse_response(g)).map_err(|_| format!("parser panicked on {g:?}"))?;
        if !g.contains("Action:") || garbage.contains(&g) {
            ensure!(parsed.action == AgentAction::DoNothing, "{g:?} parsed to {:?}", parsed.action);
        }
    }
    Ok(format!("example ok, {} shapes round-trip, {} garbage inputs", shapes.len(), garbage.len() + random.len()))
}

fn read(dir: &Path, name: &str) -> Result<Vec<u8>, String> {
    std::fs::read(dir.join(name)).map_err(|e| format!("{name}: {e}"))
}

fn determinism() -> Outcome {
    let d = generate(&SynthSpec {
        core: 300,
        ordinary: 700,
        seed: 8,
        ..SynthSpec::default()
    });
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for (name, workers) in [("a", Some(8)), ("b", Some(8)), ("c", Some(1))] {
        let cfg = RunConfig {
            rounds: 14,
            seed: 42,
            workers,
            output_dir: tmp.path().join(name),
            ..RunConfig::default()
        };
        run_macro(&d, &cfg).map_err(|e| e.to_string())?;
        outputs.push((read(&cfg.output_dir, "trace.csv")?, read(&cfg.output_dir, "tweets.jsonl")?));
    }
    ensure!(outputs[0] == outputs[1], "repeat run differs");
    ensure!(outputs[0] == outputs[2], "1 vs 8 workers differ");
    Ok(format!("{} trace bytes, {} tweet bytes identical", outputs[0].0.len(), outputs[0].1.len()))
}

fn scalability() -> Outcome {
    let d = generate(&SynthSpec {
        core: 300,
        ordinary: 10_000,
        seed: 9,
        ..SynthSpec::default()
    });
    let cfg = RunConfig {
        rounds: 14,
        seed: 9,
        ..RunConfig::default()
    };
    // Record core responses first; only the replayed run is timed.
    let recorded = run_macro_with(&d, &cfg, Components::from_config(&cfg)).map_err(|e| e.to_string())?;
    let replay = ReplayDriver::from_records(recorded.responses.clone());
    let start = Instant::now();
    let out = run_macro_with(&d, &cfg, Components::from_config(&cfg).with_driver(Box::new(replay)))
        .map_err(|e| e.to_string())?;
    let took = start.elapsed();
    ensure!(out.rounds_completed() == 14, "completed {} rounds", out.rounds_completed());
    ensure!(out.metrics.driver_failures == 0, "{} replay failures", out.metrics.driver_failures);
    ensure!(out.trace == recorded.trace, "replayed trace differs from the recorded run");
    within(Duration::from_secs(60), took)?;
    Ok(format!("{} users, {} tweets, {took:.2?}", d.users.len(), out.store.len()))
}

fn pure_abm() -> Outcome {
    let d = generate(&SynthSpec {
        core: 0,
        ordinary: 500,
        seed: 10,
        ..SynthSpec::default()
    });
    let cfg = RunConfig {
        rounds: 14,
        seed: 10,
        ..RunConfig::default()
    };
    let out = run_macro_with(&d, &cfg, Components::from_config(&cfg)).map_err(|e| e.to_string())?;
    let init: Vec<(AgentId, f64)> = d.users.iter().map(|u| (u.id, u.initial_attitude)).collect();
    let direct = simulate(&OpinionModel::new(cfg.model), &population(&cfg.model, &init), 14, 10, 0)
        .map_err(|e| e.to_string())?;
    ensure!(out.trace.rounds == direct, "traces differ");
    Ok("500 agents x 14 rounds identical".into())
}

fn metric_fixtures() -> Outcome {
    let bd = bias_and_diversity(&AttitudeTrace::new(vec![vec![-1.0, 1.0], vec![0.5, 0.5]])).unwrap();
    ensure!(bd.bias == 0.25 && bd.diversity == 0.5, "bias/diversity {bd:?}");
    let r = pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
    ensure!((r - 0.8).abs() <= 1e-12, "pearson {r}");
    let e = mae(&[0.5, -0.25], &[0.0, 0.0]).unwrap();
    ensure!(e == 0.375, "mae {e}");
    let c = classification_metrics(&["a", "b", "a", "b"], &["a", "a", "b", "b"], &["a", "b"]).unwrap();
    ensure!(c.accuracy == 0.5 && c.macro_f1 == 0.5, "classification {c:?}");
    let c = classification_metrics(&["a", "b", "c"], &["a", "b", "c"], &["a", "b", "c"]).unwrap();
    ensure!(c.accuracy == 1.0 && c.macro_f1 == 1.0, "perfect classification {c:?}");
    Ok(format!("pearson {r}"))
}

fn frozen_contract() -> Outcome {
    let d = generate(&SynthSpec {
        core: 30,
        ordinary: 300,
        seed: 12,
        ..SynthSpec::default()
    });
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = RunConfig {
        rounds: 14,
        seed: 12,
        output_dir: tmp.path().to_path_buf(),
        ..RunConfig::default()
    };
    let recorded = run_macro(&d, &cfg).map_err(|e| e.to_string())?;
    let recording = read_core_recording(&tmp.path().join("core_attitudes.jsonl")).map_err(|e| e.to_string())?;
    let report = run_frozen_replicate(&recording, &d, &cfg, 10).map_err(|e| e.to_string())?;
    ensure!(report.traces.len() == 10, "{} replicates", report.traces.len());

    let is_core: Vec<bool> = report
        .agent_ids
        .iter()
        .map(|id| d.user(*id).map(|u| u.is_core).unwrap_or(false))
        .collect();
    for (r, trace) in report.traces.iter().enumerate() {
        for (t, row) in trace.rounds.iter().enumerate() {
            for (k, id) in report.agent_ids.iter().enumerate().filter(|(k, _)| is_core[*k]) {
                let want = recording.rounds[t][id].attitude.value();
                ensure!(row[k] == want, "replicate {r} round {} core {id}: {} vs {want}", t + 1, row[k]);
            }
        }
    }
    ensure!(report.traces[0] == recorded.trace, "replicate 0 does not reproduce the recorded run");
    let ordinary = |trace: &AttitudeTrace| -> Vec<f64> {
        trace
            .rounds
            .iter()
            .flat_map(|row| row.iter().zip(&is_core).filter(|(_, c)| !**c).map(|(v, _)| *v))
            .collect()
    };
    let parts: Vec<Vec<f64>> = report.traces.iter().map(ordinary).collect();
    for a in 0..parts.len() {
        for b in a + 1..parts.len() {
            ensure!(parts[a] != parts[b], "replicates {a} and {b} have identical ordinary traces");
        }
    }
    let again = run_frozen_replicate(&recording, &d, &cfg, 10).map_err(|e| e.to_string())?;
    ensure!(again.traces == report.traces, "replicates are not reproducible");
    Ok("10 replicates, identical core, distinct ordinary".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("abm oracle equivalence", abm_oracle),
        ("hand-computed update fixtures", hand_fixtures),
        ("bc consensus", bc_consensus),
        ("hk hull", hk_hull),
        ("dtw correctness", dtw_correctness),
        ("calibration self-recovery", calibration_recovery),
        ("parser fidelity", parser_fidelity),
        ("end-to-end determinism", determinism),
        ("scalability", scalability),
        ("pure-abm degeneracy", pure_abm),
        ("metric fixtures", metric_fixtures),
        ("frozen-replicate contract", frozen_contract),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let why = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {why}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
