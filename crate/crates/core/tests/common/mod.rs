//! Scripted scenes shared by the integration suites.
#![allow(dead_code)]

use crossflow::controllers::{max_pressure_decide, phase_pressures, sotl_step, Decision, SotlParams, SotlState};
use crossflow::sim::{build_scenario, Intersection, Observation, PhaseTimer, ScenarioTag, VehicleObs};

/// Observation with vehicles at the given stop-line distances on incoming
/// lanes and `count` stopped vehicles on outgoing lanes.
pub fn scene(x: &Intersection, incoming: &[(usize, &[f64])], outgoing: &[(usize, usize)], timer: PhaseTimer) -> Observation {
    let mut id = 0;
    let mut next = |pos: f64| {
        id += 1;
        VehicleObs {
            id,
            is_cv: true,
            pos,
            speed: 0.0,
        }
    };
    let mut inc = vec![Vec::new(); x.incoming.len()];
    for &(lane, positions) in incoming {
        inc[lane].extend(positions.iter().map(|&p| next(p)));
    }
    let mut out = vec![Vec::new(); x.outgoing.len()];
    for &(lane, count) in outgoing {
        out[lane].extend((0..count).map(|k| next(10.0 * k as f64)));
    }
    Observation {
        time: 0.0,
        incoming: inc,
        outgoing: out,
        lane_green: vec![false; x.incoming.len()],
        timer,
    }
}

/// Timer of scenario `x` sitting at a legal decision point of `phase`.
pub fn decision_timer(x: &Intersection, phase: usize) -> PhaseTimer {
    let mut t = PhaseTimer::new(&x.program);
    t.current_phase = phase;
    t.next_phase = phase;
    t.green_elapsed = x.program.min_green;
    t
}

/// Hand-computed Max Pressure trace on scenario (b), starting in phase 0.
/// Each entry: scene, expected pressures, expected choice.
///
/// Lane sets (incoming | outgoing):
/// NS-TR {0,1,6,7} | {0,1,3,6,7,9}; NS-L {2,8} | {5,11};
/// EW-TR {3,4,9,10} | {0,3,4,6,9,10}; EW-L {5,11} | {2,8}.
pub fn max_pressure_script() -> Vec<(Vec<i64>, usize, Vec<i64>, usize)> {
    type Scene<'a> = (Vec<(usize, &'a [f64])>, Vec<(usize, usize)>, [i64; 4], usize);
    let x = build_scenario(ScenarioTag::B);
    let scenes: [Scene; 3] = [
        (
            // 2 on N0, 3 on N2, 2 on S2; one vehicle gone west, one on E2
            vec![(0, &[5.0, 12.0]), (2, &[3.0, 11.0, 19.0]), (8, &[4.0, 13.0])],
            vec![(9, 1), (5, 1)],
            [1, 4, -1, 0],
            1,
        ),
        (
            // EW through and EW left both reach 5: the lower index wins
            vec![
                (3, &[2.0, 9.0, 16.0, 23.0]),
                (10, &[2.0, 9.0, 16.0]),
                (5, &[1.0, 8.0, 15.0, 22.0, 29.0, 36.0]),
                (11, &[3.0]),
            ],
            vec![(0, 2), (8, 2)],
            [-2, 0, 5, 5],
            2,
        ),
        (
            vec![(6, &[2.0, 9.0]), (7, &[2.0, 9.0]), (4, &[30.0])],
            vec![(4, 3)],
            [4, 0, -2, 0],
            0,
        ),
    ];
    let mut phase = 0;
    scenes
        .into_iter()
        .map(|(inc, out, pressures, choice)| {
            let obs = scene(&x, &inc, &out, decision_timer(&x, phase));
            let got_p = phase_pressures(&obs, &x);
            let got = max_pressure_decide(&obs, &x);
            phase = got;
            (got_p, got, pressures.to_vec(), choice)
        })
        .collect()
}

/// One step of the scripted SOTL scene.
#[derive(Clone, Debug, PartialEq)]
pub struct SotlTraceStep {
    pub step: u32,
    pub decision: Decision,
    pub chi: u64,
}

/// Runs the scripted SOTL scene on scenario (b) with the real phase timer
/// (min green 10 s, yellow 3 s, all-red 2 s), one call per simulated second.
///
/// Steps 1-29: five vehicles on N2 within 80 m (red for NS-TR), no green
/// platoon. Steps 12-29: after the switch to NS-L, three vehicles wait on
/// N0 within 80 m and two sit on N2 within 25 m (platoon of 2), which
/// vanishes from step 30. Steps 31-: after the switch to EW-TR, two
/// vehicles on N0 within 80 m plus one at 90 m (not counted), and four
/// vehicles within 25 m on the green EW lanes.
pub fn sotl_script(steps: u32) -> Vec<SotlTraceStep> {
    let x = build_scenario(ScenarioTag::B);
    let params = SotlParams::default();
    let mut state = SotlState::default();
    let mut timer = PhaseTimer::new(&x.program);
    let mut trace = Vec::new();
    for k in 1..=steps {
        let obs = match k {
            1..=11 => scene(&x, &[(2, &[5.0, 15.0, 25.0, 35.0, 45.0])], &[], timer),
            12..=29 => scene(&x, &[(0, &[5.0, 30.0, 60.0]), (2, &[5.0, 15.0])], &[], timer),
            30 => scene(&x, &[(0, &[5.0, 30.0, 60.0])], &[], timer),
            _ => scene(
                &x,
                &[(0, &[5.0, 30.0, 90.0]), (3, &[2.0, 10.0]), (9, &[3.0]), (10, &[20.0, 30.0])],
                &[],
                timer,
            ),
        };
        let d = sotl_step(&obs, &mut state, &timer, &x, &params);
        if let Decision::Phase(p) = d {
            timer.apply_action(&x.program, p, f64::from(k)).expect("legal decision");
        }
        trace.push(SotlTraceStep {
            step: k,
            decision: d,
            chi: state.chi,
        });
        timer.advance(&x.program, 1.0);
    }
    trace
}

/// Steps at which the scripted scene switches phase, with the chosen phase,
/// and chi (after the step) at the checkpoints called out in the scene.
pub const SOTL_EXPECTED_CHANGES: [(u32, usize); 3] = [(11, 1), (30, 2), (56, 3)];
pub const SOTL_EXPECTED_CHI: [(u32, u64); 6] = [(10, 50), (12, 3), (26, 45), (28, 51), (29, 54), (45, 30)];

/// Result of [`gradient_check`].
#[derive(Clone, Copy, Debug)]
pub struct GradCheck {
    /// Largest `|a - n| / max(|a|, |n|, 1e-5)` over the compared parameters,
    /// i.e. relative error with an absolute floor of 1e-9 at tolerance 1e-4.
    pub worst: f64,
    /// Same without the floor (dominated by gradients below 1e-6).
    pub worst_unfloored: f64,
    pub checked: usize,
    /// Parameters skipped because a perturbation moved a pre-activation across
    /// the ELU kink at 0, where central differences lose an order of accuracy.
    pub kinked: usize,
}

fn signs(ws: &crossflow::neural::Workspace<f64>) -> Vec<bool> {
    ws.hidden().iter().flat_map(|h| h.iter().map(|&v| v > 0.0)).collect()
}

/// Compares the analytic gradient of a Huber TD loss with central finite
/// differences (step `h`) on up to `per_block` sampled parameters of every
/// block. The network runs in f64 so the comparison measures the backward
/// pass rather than rounding.
pub fn gradient_check(seed: u64, per_block: usize, h: f64) -> GradCheck {
    use crossflow::neural::{huber_grad, huber_loss, Arch, QNetwork, Workspace};
    use crossflow::rng::RngStream;

    let arch = Arch::new(3, 8, 20, 2).unwrap();
    let mut rng = RngStream::new(seed);
    let mut net = QNetwork::<f64>::new(arch, &mut rng);
    for range in arch.blocks().into_iter().skip(1).step_by(2) {
        for p in &mut net.params_mut()[range] {
            *p = rng.uniform_range(-0.1, 0.1);
        }
    }
    let batch = 3;
    // DTSE-like states: binary presence, speed only where present, one
    // signal bit per lane
    let (lanes, cells) = (8, 20);
    let mut input = vec![0.0; batch * arch.input_len()];
    for s in input.chunks_exact_mut(arch.input_len()) {
        for l in 0..lanes {
            let green = if rng.uniform() < 0.5 { 1.0 } else { 0.0 };
            for c in 0..cells {
                if rng.uniform() < 0.25 {
                    s[l * cells + c] = 1.0;
                    s[(lanes + l) * cells + c] = rng.uniform();
                }
                s[(2 * lanes + l) * cells + c] = green;
            }
        }
    }
    let actions: Vec<usize> = (0..batch).map(|_| rng.index(2)).collect();
    let mut ws = Workspace::new();
    let q0 = net.forward(&input, batch, &mut ws).unwrap().to_vec();
    // one TD error in the quadratic zone, two in the linear zone
    let offsets = [0.4, -2.5, 1.7];
    let targets: Vec<f64> = (0..batch).map(|b| q0[b * 2 + actions[b]] + offsets[b]).collect();
    let base_signs = signs(&ws);

    let loss = |net: &QNetwork<f64>, ws: &mut Workspace<f64>| -> f64 {
        let q = net.forward(&input, batch, ws).unwrap();
        let d: Vec<f64> = (0..batch).map(|b| targets[b] - q[b * 2 + actions[b]]).collect();
        huber_loss(&d).unwrap()
    };

    net.forward(&input, batch, &mut ws).unwrap();
    let mut dq = vec![0.0; batch * 2];
    for b in 0..batch {
        dq[b * 2 + actions[b]] = -huber_grad(offsets[b], batch);
    }
    let mut grads = vec![0.0; arch.param_count()];
    net.backward(&mut ws, &dq, &mut grads);

    let mut out = GradCheck {
        worst: 0.0,
        worst_unfloored: 0.0,
        checked: 0,
        kinked: 0,
    };
    for range in arch.blocks() {
        let n = range.len();
        let picks: Vec<usize> = if n <= per_block {
            range.collect()
        } else {
            (0..per_block).map(|_| range.start + rng.index(n)).collect()
        };
        for i in picks {
            let orig = net.params()[i];
            net.params_mut()[i] = orig + h;
            let up = loss(&net, &mut ws);
            let mut kink = signs(&ws) != base_signs;
            net.params_mut()[i] = orig - h;
            let down = loss(&net, &mut ws);
            kink |= signs(&ws) != base_signs;
            net.params_mut()[i] = orig;
            if kink {
                out.kinked += 1;
                continue;
            }
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads[i];
            let scale = analytic.abs().max(numeric.abs());
            let diff = (analytic - numeric).abs();
            out.worst = out.worst.max(diff / scale.max(1e-5));
            if scale > 0.0 {
                out.worst_unfloored = out.worst_unfloored.max(diff / scale);
            }
            out.checked += 1;
        }
    }
    out
}

/// Proptest settings for integration suites (no regression files: the
/// suites live outside `src`, where proptest cannot place them).
pub fn cases(n: u32) -> proptest::test_runner::Config {
    proptest::test_runner::Config {
        cases: n,
        failure_persistence: None,
        ..Default::default()
    }
}

/// Runs `steps` seconds with uniformly random legal decisions and checks,
/// after every step: vehicle conservation, minimum gaps on every lane, speed
/// bounds, stop-line crossings only on green or yellow, and exact stage
/// durations (yellow 3 s, all-red 2 s, green at least 10 s).
pub fn checked_run(
    tag: ScenarioTag,
    demand: &crossflow::sim::DemandConfig,
    steps: usize,
    policy_seed: u64,
) -> Result<crossflow::sim::Counters, String> {
    use crossflow::rng::RngStream;
    use crossflow::sim::{SignalState, Simulation, Stage, MIN_GAP};
    use std::collections::HashMap;
    use std::sync::Arc;

    let x = Arc::new(build_scenario(tag));
    let mut sim = Simulation::new(Arc::clone(&x), demand);
    let mut rng = RngStream::new(policy_seed);
    let v_max = sim.params().car.v_max;
    let mut stage = (sim.timer().stage, 0.0f64);
    for _ in 0..steps {
        if sim.is_decision_point() && rng.uniform() < 0.3 {
            sim.apply_action(rng.index(x.program.len())).map_err(|e| e.to_string())?;
            if sim.timer().stage != stage.0 {
                let lasted = sim.time() - stage.1;
                if lasted < 10.0 {
                    return Err(format!("t={}: green lasted {lasted} s", sim.time()));
                }
                stage = (sim.timer().stage, sim.time());
            }
        }
        let signals = sim.signal_states();
        let conn: HashMap<u64, usize> = sim.incoming_vehicles().map(|v| (v.id, v.connection)).collect();
        let events = sim.step();
        let t = sim.time();
        for id in &events.crossed {
            let s = signals[conn[id]];
            if !matches!(s, SignalState::Green | SignalState::Yellow) {
                return Err(format!("t={t}: vehicle {id} crossed on {s:?}"));
            }
        }

        let c = sim.counters();
        if c.spawned != (sim.in_network() + sim.pending_count()) as u64 + c.exited
            || c.inserted != sim.in_network() as u64 + c.exited
        {
            return Err(format!("t={t}: conservation broken {c:?}"));
        }
        for l in 0..x.incoming.len() {
            let lane: Vec<_> = sim.incoming_lane(l).iter().collect();
            for p in lane.windows(2) {
                let gap = p[1].pos - p[0].pos - p[0].length;
                if gap < MIN_GAP - 1e-9 {
                    return Err(format!("t={t}: incoming lane {l} gap {gap}"));
                }
            }
            if let Some(v) = lane.iter().find(|v| v.speed < 0.0 || v.speed > v_max + 1e-12 || v.pos < 0.0) {
                return Err(format!("t={t}: vehicle {} out of bounds ({}, {})", v.id, v.pos, v.speed));
            }
        }
        for l in 0..x.outgoing.len() {
            let lane: Vec<_> = sim.outgoing_lane(l).iter().collect();
            for p in lane.windows(2) {
                let gap = p[0].pos - p[0].length - p[1].pos;
                if gap < MIN_GAP - 1e-9 {
                    return Err(format!("t={t}: outgoing lane {l} gap {gap}"));
                }
            }
        }

        let now = sim.timer().stage;
        if now != stage.0 {
            let lasted = t - stage.1;
            let ok = match stage.0 {
                Stage::Change => lasted == 3.0,
                Stage::Clearance => lasted == 2.0,
                Stage::Green => lasted >= 10.0,
            };
            if !ok {
                return Err(format!("t={t}: {:?} lasted {lasted} s", stage.0));
            }
            stage = (now, t);
        }
    }
    Ok(sim.counters())
}

/// Mean number of arrivals on one approach over 3600 s at `flow` veh/h,
/// averaged over `seeds` seeds.
pub fn mean_arrivals(flow: f64, seeds: u64) -> f64 {
    use crossflow::sim::{ArrivalProcess, DemandConfig};
    let x = build_scenario(ScenarioTag::A);
    let total: usize = (0..seeds)
        .map(|seed| {
            let d = DemandConfig::uniform(&x, [flow, 100.0, 100.0, 100.0], 1.0, seed);
            ArrivalProcess::new(&x, &d)
                .spawn_until(3600.0)
                .iter()
                .filter(|a| a.approach == 0)
                .count()
        })
        .sum();
    total as f64 / seeds as f64
}

/// Runs one episode twice with event logging and compares the logs bit for bit.
pub fn replay_identical(tag: ScenarioTag, seed: u64, steps: usize) -> Result<usize, String> {
    use crossflow::rng::RngStream;
    use crossflow::sim::{sample_demand, Simulation};
    use std::sync::Arc;
    let x = Arc::new(build_scenario(tag));
    let d = sample_demand(&x, &mut RngStream::new(seed));
    let run = || {
        let mut s = Simulation::new(Arc::clone(&x), &d);
        s.enable_event_log();
        let mut rng = RngStream::new(seed ^ 1);
        for _ in 0..steps {
            if s.is_decision_point() {
                s.apply_action(rng.index(x.program.len())).unwrap();
            }
            s.step();
        }
        s.event_log().unwrap().to_vec()
    };
    let (a, b) = (run(), run());
    if a.len() != b.len() {
        return Err(format!("{} vs {} events", a.len(), b.len()));
    }
    for (i, (e, f)) in a.iter().zip(&b).enumerate() {
        if e != f || e.pos.to_bits() != f.pos.to_bits() || e.speed.to_bits() != f.speed.to_bits() {
            return Err(format!("event {i} differs: {e:?} vs {f:?}"));
        }
    }
    Ok(a.len())
}

/// Fuzzes the reward with random vehicle sets; returns (min r, max r,
/// tsd_max never decreased).
pub fn reward_fuzz(steps: usize, seed: u64) -> (f64, f64, bool) {
    let mut rng = crossflow::rng::RngStream::new(seed);
    let mut state = crossflow::reward::RewardState::new();
    let (mut lo, mut hi, mut monotone) = (f64::INFINITY, f64::NEG_INFINITY, true);
    for _ in 0..steps {
        let n = rng.index(40);
        let speeds: Vec<f64> = (0..n).map(|_| rng.uniform() * 13.89).collect();
        let before = state.tsd_max;
        let r = state.reward(crossflow::reward::total_squared_delay(speeds, 13.89));
        monotone &= state.tsd_max >= before;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    (lo, hi, monotone)
}
