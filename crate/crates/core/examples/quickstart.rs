use mfbo::orchestrator::{init_run, run, Objective, RunOptions, SimulatedHarness, StopCondition};
use mfbo::{Coord, Domain, Point, VariableSpec};
use std::sync::Arc;

fn main() -> mfbo::Result<()> {
    let domain = Domain::new(vec![
        VariableSpec::euclidean("x", -2.0, 2.0)?,
        VariableSpec::integer("k", 1.0, 8.0)?,
    ])?
    .with_constraint_expr("x + k <= 6")?;

    let objective: Arc<Objective> = Arc::new(|p: &Point, _z: Option<&[f64]>| match p.coords.as_slice() {
        [Coord::Real(x), Coord::Int(k)] => Ok(-(x - 0.5).powi(2) - (*k as f64 - 3.0).abs()),
        _ => Err("unexpected point".to_string()),
    });

    let mut state = init_run(domain, None, 40.0, 2, RunOptions::default(), 42)?;
    let mut harness = SimulatedHarness::fixed_delay(objective, 2, 1.0);
    let report = run(&mut state, &mut harness, StopCondition::default())?;
    println!("{:?} at {:?}", report.incumbent, report.best_point);
    Ok(())
}
