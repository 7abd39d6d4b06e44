use fluxseek::compensator::{CompensationForm, FluxSource};
use fluxseek::harness::{run_scenario, steady_state, write_csv, Config, RunOptions, Scenario, Simulation, CSV_HEADER};
use fluxseek::Error;
use proptest::prelude::*;

fn cfg() -> Config {
    Config::builtin()
}

#[test]
fn rated_flux_run_settles_on_closed_form_input_power() {
    let cfg = cfg();
    for load in [6.0, 12.0, 18.0] {
        let mut s = Scenario::constant("rated", 8.0, 150.0, load);
        s.flc = false;
        let run = run_scenario(&s, &cfg).unwrap();
        let oracle = steady_state(&cfg.params, 150.0, load, 6.0).unwrap().unwrap();
        let err = (run.summary.tail_p_in - oracle.p_in).abs() / oracle.p_in;
        assert!(err < 1e-3, "{load} N m: {} vs {}", run.summary.tail_p_in, oracle.p_in);
        assert!(run.records.iter().all(|r| r.i_ds_cmd == 6.0));
    }
}

#[test]
fn zero_duration_gives_an_empty_stream() {
    let cfg = cfg();
    let run = run_scenario(&Scenario::constant("empty", 0.0, 150.0, 6.0), &cfg).unwrap();
    assert!(run.records.is_empty() && run.events.is_empty());
    let mut buf = Vec::new();
    write_csv(&mut buf, &run.records).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), format!("{CSV_HEADER}\n"));
}

#[test]
fn non_finite_state_aborts_with_the_step_index() {
    let cfg = cfg();
    let s = Scenario::constant("blowup", 1.0, 150.0, 1e308);
    match run_scenario(&s, &cfg) {
        Err(Error::Diverged { step, .. }) => assert_eq!(step, 0),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn every_compensator_variant_keeps_the_search_converging() {
    let base = cfg();
    for source in [FluxSource::Measured, FluxSource::Predicted] {
        for form in [CompensationForm::Continuous, CompensationForm::Discrete] {
            let mut cfg = base.clone();
            cfg.compensator.flux_source = source;
            cfg.compensator.form = form;
            let run = run_scenario(&Scenario::constant("q", 15.0, 150.0, 6.0), &cfg).unwrap();
            assert!(run.summary.converged_at_end, "{source:?} {form:?}");
            assert!(run.summary.max_search_speed_error < 0.02 * 150.0);
        }
    }
}

#[test]
fn disabled_search_never_leaves_rated_flux() {
    let cfg = cfg();
    let s = cfg.scenario("quarter-load-no-flc").unwrap();
    let run = run_scenario(s, &cfg).unwrap();
    assert!(run.events.is_empty());
    assert!(run.records.iter().all(|r| r.i_ds_cmd == 6.0));
}

#[test]
fn power_balance_holds_in_every_record() {
    let cfg = cfg();
    let run = run_scenario(cfg.scenario("load-step").unwrap(), &cfg).unwrap();
    for r in &run.records {
        let losses = r.loss_cu_s + r.loss_cu_r + r.loss_fe + r.loss_conv;
        assert!((r.p_in - r.p_out - losses).abs() <= 1e-9 * r.p_in.abs().max(1.0));
        assert!(r.psi_dr >= cfg.params.flux_floor());
    }
}

#[test]
fn decimation_keeps_every_nth_step() {
    let cfg = cfg();
    let s = Scenario::constant("short", 0.05, 150.0, 6.0);
    let all = Simulation::new(&cfg, &s)
        .unwrap()
        .run(RunOptions {
            decimation: 1,
            tail_window: 0.01,
        })
        .unwrap();
    let some = Simulation::new(&cfg, &s)
        .unwrap()
        .run(RunOptions {
            decimation: 7,
            tail_window: 0.01,
        })
        .unwrap();
    assert_eq!(all.records.len(), 500);
    assert_eq!(some.records.len(), 500 / 7);
    assert_eq!(some.records[0], all.records[6]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn excitation_command_stays_in_range(load in 2.0f64..20.0, speed in 60.0f64..170.0) {
        let cfg = cfg();
        let s = Scenario::constant("p", 6.0, speed, load);
        let run = run_scenario(&s, &cfg).unwrap();
        let spec = cfg.params.spec();
        for r in &run.records {
            prop_assert!(r.i_ds_cmd >= spec.min_excitation_current && r.i_ds_cmd <= spec.rated_excitation_current);
            prop_assert!(r.i_qs_cmd.abs() <= spec.max_torque_current);
        }
    }
}
