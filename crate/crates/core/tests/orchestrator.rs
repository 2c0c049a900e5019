use std::sync::Arc;

use mfbo::acquisition::AcqKind;
use mfbo::hyper::HpLabel;
use mfbo::orchestrator::*;
use mfbo::{Domain, Error, FidelitySpace, Point, VariableSpec};

fn square(d: usize) -> Domain {
    Domain::new(
        (0..d)
            .map(|i| VariableSpec::euclidean(format!("x{i}"), 0.0, 1.0).unwrap())
            .collect(),
    )
    .unwrap()
}

fn bowl(domain: &Domain) -> Arc<Objective> {
    let domain = domain.clone();
    Arc::new(move |p: &Point, _: Option<&[f64]>| Ok(-domain.encode(p).iter().map(|v| (v - 0.3).powi(2)).sum::<f64>()))
}

fn quick() -> RunOptions {
    let mut o = RunOptions::default();
    o.additive.k = 3;
    o.refresh.mll.direct_budget = 40;
    o.refresh.mll.polish_budget = 20;
    o.optimizer.min_budget = 150;
    o
}

#[test]
fn single_worker_runs_are_reproducible() {
    let domain = square(2);
    let go = || {
        let mut st = init_run(domain.clone(), None, 25.0, 1, quick(), 11).unwrap();
        let mut h = SimulatedHarness::fixed_delay(bowl(&domain), 1, 1.0);
        (run(&mut st, &mut h, StopCondition::default()).unwrap(), st.n_init())
    };
    let (a, n_init) = go();
    let (b, _) = go();
    assert_eq!(n_init, 2);
    assert_eq!(a.to_jsonl(), b.to_jsonl());
    assert_eq!(a.evaluations, 25);
    let steps: Vec<usize> = a.trace.iter().map(|r| r.step).collect();
    assert_eq!(steps, (1..=25).collect::<Vec<_>>());
    assert!(a.trace[..2]
        .iter()
        .all(|r| r.acq_label == "init" && r.hp_label == "init"));
    assert!(a.trace[2..].iter().all(|r| r.acq_label != "init"));
}

#[test]
fn capital_ledger_and_pending_bound() {
    let domain = square(2);
    for workers in [1usize, 2, 4] {
        let mut st = init_run(domain.clone(), None, 24.0, workers, quick(), workers as u64).unwrap();
        let mut h = SimulatedHarness::random_delay(bowl(&domain), workers, 0.5, 3.0, 9);
        let r = run(&mut st, &mut h, StopCondition::default()).unwrap();
        assert_eq!(r.evaluations, 24);
        assert_eq!(r.capital_spent, 24.0);
        assert!(st.max_pending() <= workers);
        if workers > 1 {
            assert_eq!(st.max_pending(), workers);
        }
        for (i, rec) in r.trace.iter().enumerate() {
            assert_eq!(rec.capital_spent, (i + 1) as f64);
        }
        let times: Vec<f64> = r.trace.iter().map(|t| t.wall_time_s).collect();
        assert!(times.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn incumbent_is_running_maximum() {
    let domain = square(2);
    let mut st = init_run(domain.clone(), None, 20.0, 2, quick(), 5).unwrap();
    let mut h = SimulatedHarness::fixed_delay(bowl(&domain), 2, 1.0);
    let r = run(&mut st, &mut h, StopCondition::default()).unwrap();
    let mut best = f64::NEG_INFINITY;
    for rec in &r.trace {
        best = best.max(rec.y.unwrap());
        assert_eq!(rec.incumbent, Some(best));
    }
    assert_eq!(r.incumbent, Some(best));
    let regret = r.simple_regret(0.0);
    assert!(regret.windows(2).all(|w| w[1] <= w[0]));
    assert!(regret.iter().all(|&v| v >= 0.0));
}

#[test]
fn weights_track_credited_improvements() {
    let domain = square(2);
    let mut st = init_run(domain.clone(), None, 30.0, 1, quick(), 2).unwrap();
    let mut h = SimulatedHarness::fixed_delay(bowl(&domain), 1, 1.0);
    let r = run(&mut st, &mut h, StopCondition::default()).unwrap();
    let acq = st.acq_state();
    let mut expected = vec![1.0; acq.labels().len()];
    let mut hp = [1.0, 1.0];
    let mut best = f64::NEG_INFINITY;
    for rec in &r.trace {
        let y = rec.y.unwrap();
        if y > best {
            best = y;
            if rec.acq_label != "init" {
                let kind = AcqKind::parse(&rec.acq_label).unwrap();
                let i = acq.labels().iter().position(|&k| k == kind).unwrap();
                expected[i] += 1.0;
                hp[HpLabel::parse(&rec.hp_label).unwrap().weight_index()] += 1.0;
            }
        }
    }
    assert_eq!(acq.weights(), expected.as_slice());
    assert_eq!(st.hyper_state().weights, hp);
}

#[test]
fn refresh_fills_queue_every_cycle() {
    let domain = square(2);
    let mut opts = quick();
    opts.n_init = Some(20);
    let mut st = init_run(domain.clone(), None, 40.0, 1, opts, 3).unwrap();
    let f = bowl(&domain);
    for i in 1..=17 {
        let q = st.next_query().unwrap();
        let y = f(&q.point, None);
        st.receive_result(EvalResult {
            query: q,
            outcome: y,
            wall_time_s: i as f64,
        })
        .unwrap();
    }
    assert_eq!(st.refreshes(), 1);
    assert_eq!(st.hyper_state().queue.len(), 17);
}

#[test]
fn failures_are_charged_and_recorded() {
    let domain = square(1);
    let objective: Arc<Objective> = Arc::new(|p: &Point, _: Option<&[f64]>| {
        let x = match p.coords[0] {
            mfbo::Coord::Real(v) => v,
            _ => unreachable!(),
        };
        if x > 0.5 {
            Err("boom".into())
        } else {
            Ok(x)
        }
    });
    let mut st = init_run(domain, None, 12.0, 2, quick(), 4).unwrap();
    let mut h = SimulatedHarness::fixed_delay(objective, 2, 1.0);
    let r = run(&mut st, &mut h, StopCondition::default()).unwrap();
    assert_eq!(r.capital_spent, 12.0);
    assert_eq!(r.failures, r.trace.iter().filter(|t| t.y.is_none()).count());
    assert_eq!(st.observations().len(), 12 - r.failures);
}

#[test]
fn unknown_results_are_rejected() {
    let domain = square(1);
    let mut st = init_run(domain.clone(), None, 5.0, 1, quick(), 0).unwrap();
    let mut q = st.next_query().unwrap();
    q.id += 100;
    let res = EvalResult {
        query: q,
        outcome: Ok(0.0),
        wall_time_s: 0.0,
    };
    assert_eq!(st.receive_result(res), Err(Error::UnknownQuery));
}

#[test]
fn time_limit_stops_dispatch() {
    let domain = square(1);
    let mut st = init_run(domain.clone(), None, 100.0, 1, quick(), 0).unwrap();
    let mut h = SimulatedHarness::fixed_delay(bowl(&domain), 1, 1.0);
    let r = run(&mut st, &mut h, StopCondition { wall_time_s: Some(6.5) }).unwrap();
    assert_eq!(r.evaluations, 7);
}

#[test]
fn trace_field_order() {
    let rec = TraceRecord {
        step: 1,
        wall_time_s: 0.5,
        z: Some(vec![1.0]),
        x: Point::new(vec![mfbo::Coord::Real(0.25)]),
        y: Some(2.0),
        acq_label: "UCB".into(),
        hp_label: "SFP".into(),
        incumbent: None,
        capital_spent: 1.1,
    };
    let s = serde_json::to_string(&rec).unwrap();
    let keys = [
        "\"step\"",
        "\"wall_time_s\"",
        "\"z\"",
        "\"x\"",
        "\"y\"",
        "\"acq_label\"",
        "\"hp_label\"",
        "\"incumbent\"",
        "\"capital_spent\"",
    ];
    let pos: Vec<usize> = keys.iter().map(|k| s.find(k).unwrap()).collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]), "{s}");
    let back: TraceRecord = serde_json::from_str(&s).unwrap();
    assert_eq!(back, rec);
    let sf = TraceRecord { z: None, ..rec };
    assert!(!serde_json::to_string(&sf).unwrap().contains("\"z\""));
}

#[test]
fn multi_fidelity_run() {
    let domain = square(2);
    let space = FidelitySpace::with_cost_expr(
        vec![VariableSpec::euclidean("z", 0.0, 1.0).unwrap()],
        vec![1.0],
        "z + 0.1",
    )
    .unwrap();
    let d2 = domain.clone();
    let g: Arc<Objective> = Arc::new(move |p: &Point, z: Option<&[f64]>| {
        let z = z.unwrap()[0];
        let x = d2.encode(p);
        Ok(-x.iter().map(|v| (v - 0.3).powi(2)).sum::<f64>() - 0.2 * (1.0 - z) * x[0])
    });
    let mut st = init_run(domain, Some(space.clone()), 15.0, 1, quick(), 8).unwrap();
    let mut h = SimulatedHarness::fixed_delay(g, 1, 1.0);
    let r = run(&mut st, &mut h, StopCondition::default()).unwrap();
    let mut spent = 0.0;
    for rec in &r.trace {
        let z = rec.z.as_ref().unwrap();
        assert!(space.contains(z));
        spent += space.cost(z);
        assert!((rec.capital_spent - spent).abs() < 1e-9);
    }
    // dispatch stops once committed capital reaches the budget
    assert!(r.capital_spent >= 15.0 && r.capital_spent < 15.0 + space.cost(space.z_hf()));
    assert_eq!(r.trace[0].z.as_deref(), Some(space.z_hf()));
    assert!(r.trace.iter().any(|t| t.z.as_ref().unwrap()[0] < 1.0));
}

#[test]
fn thread_harness_completes() {
    let domain = square(1);
    let mut st = init_run(domain.clone(), None, 8.0, 3, quick(), 1).unwrap();
    let mut h = ThreadHarness::new(bowl(&domain), 3);
    let r = run(&mut st, &mut h, StopCondition::default()).unwrap();
    assert_eq!(r.evaluations, 8);
    assert!(st.max_pending() <= 3);
}
