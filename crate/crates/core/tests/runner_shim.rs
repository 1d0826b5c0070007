mod common;

use std::sync::Arc;
use std::time::{Duration, Instant};

use common::{toy, toy_config};
use incoherence::runner::{CachedExecutor, Executor, Runner, ShimPool, MAX_DIAGNOSTIC_BYTES};
use incoherence::{Program, Status, Value};

fn pool(timeout: f64) -> ShimPool {
    ShimPool::new("toy", toy_config(timeout)).unwrap()
}

#[test]
fn ok_values_round_trip_through_the_shim() {
    let p = pool(10.0);
    let id = toy("id", "fn f");
    let samples = [
        Value::int(7),
        Value::Int("123456789012345678901234567890".parse().unwrap()),
        Value::Float(f64::NAN),
        Value::text("héllo\n\"x\""),
        Value::Tuple(vec![Value::None, Value::Bool(true)]),
        Value::set([Value::int(3), Value::int(1)]).unwrap(),
        Value::map([(Value::text("k"), Value::List(vec![]))]).unwrap(),
    ];
    for v in samples {
        let out = p.execute(&id, std::slice::from_ref(&v)).unwrap();
        assert_eq!(out.status(), Status::Ok);
        assert_eq!(out.value().unwrap().encode(), v.encode());
    }
    let two = toy("two", "fn f\nadd 1\nmul 3");
    assert_eq!(p.execute(&two, &[Value::int(1)]).unwrap().value(), Some(&Value::int(6)));
}

#[test]
fn exceptions_carry_a_diagnostic() {
    let p = pool(10.0);
    let out = p.execute(&toy("r", "fn f\nraise ValueError: bad"), &[Value::int(1)]).unwrap();
    assert_eq!(out.status(), Status::Exception);
    assert!(out.diagnostic().unwrap().contains("ValueError: bad"));
    let out = p.execute(&toy("m", "fn f\nmod 0"), &[Value::int(1)]).unwrap();
    assert_eq!(out.status(), Status::Exception);
    let out = p.execute(&toy("s", "fn f\nbogus 1"), &[Value::int(1)]).unwrap();
    assert_eq!(out.status(), Status::Exception);
    let wrong_entry = Program::new("w", "fn g\nneg", "f", "toy").unwrap();
    assert_eq!(p.execute(&wrong_entry, &[Value::int(1)]).unwrap().status(), Status::Exception);
    assert!(out.diagnostic().unwrap().len() <= MAX_DIAGNOSTIC_BYTES);
}

#[test]
fn hanging_program_times_out_and_the_pool_recovers() {
    let p = pool(1.0);
    let start = Instant::now();
    let out = p.execute(&toy("h", "fn f\nhang"), &[Value::int(1)]).unwrap();
    let elapsed = start.elapsed();
    assert_eq!(out.status(), Status::Timeout);
    assert!(elapsed >= Duration::from_millis(900), "{elapsed:?}");
    assert!(elapsed < Duration::from_secs(5), "{elapsed:?}");
    let spawned = p.spawn_count();
    let out = p.execute(&toy("ok", "fn f\nneg"), &[Value::int(4)]).unwrap();
    assert_eq!(out.value(), Some(&Value::int(-4)));
    assert_eq!(p.spawn_count(), spawned + 1);
}

#[test]
fn process_is_reused_between_requests() {
    let p = pool(10.0);
    let prog = toy("n", "fn f\nneg");
    for i in 0..20 {
        p.execute(&prog, &[Value::int(i)]).unwrap();
    }
    assert_eq!(p.spawn_count(), 1);
}

#[test]
fn shim_exit_is_an_exception_and_the_next_request_respawns() {
    let p = pool(10.0);
    let out = p.execute(&toy("e", "fn f\nprint going away\nexit 3"), &[Value::int(1)]).unwrap();
    assert_eq!(out.status(), Status::Exception);
    assert!(out.diagnostic().unwrap().contains("terminated"));
    let out = p.execute(&toy("ok", "fn f\nabs"), &[Value::int(-2)]).unwrap();
    assert_eq!(out.value(), Some(&Value::int(2)));
    assert_eq!(p.spawn_count(), 2);
}

#[test]
fn unencodable_return_is_a_decode_error() {
    let p = pool(10.0);
    let out = p.execute(&toy("o", "fn f\nopaque"), &[Value::int(1)]).unwrap();
    assert_eq!(out.status(), Status::DecodeError);
}

#[test]
fn program_output_does_not_corrupt_the_protocol() {
    let p = pool(10.0);
    let out = p.execute(&toy("p", "fn f\nprint {\"id\":\"x\"}\nadd 1"), &[Value::int(1)]).unwrap();
    assert_eq!(out.value(), Some(&Value::int(2)));
}

#[test]
fn sentinel_programs_never_reach_a_shim() {
    let p = pool(10.0);
    let s = Program::sentinel("s", "f", "no code block");
    let out = p.execute(&s, &[Value::int(1)]).unwrap();
    assert_eq!(out.status(), Status::Exception);
    assert_eq!(p.spawn_count(), 0);
}

#[test]
fn runner_dispatches_by_language() {
    let runner = Runner::new().with_language("toy", toy_config(10.0)).unwrap();
    assert!(runner.execute(&toy("a", "fn f\nneg"), &[Value::int(1)]).unwrap().is_ok());
    let py = Program::new("b", "def f(x): return x", "f", "python").unwrap();
    assert!(runner.execute(&py, &[Value::int(1)]).is_err());
}

#[test]
fn concurrent_requests_are_answered_correctly() {
    let mut cfg = toy_config(10.0);
    cfg.max_concurrent_executions = 4;
    let p = Arc::new(ShimPool::new("toy", cfg).unwrap());
    let prog = toy("m", "fn f\nmul 2");
    std::thread::scope(|s| {
        for t in 0..8i64 {
            let p = p.clone();
            let prog = prog.clone();
            s.spawn(move || {
                for i in 0..25i64 {
                    let x = t * 1000 + i;
                    let out = p.execute(&prog, &[Value::int(x)]).unwrap();
                    assert_eq!(out.value(), Some(&Value::int(2 * x)));
                }
            });
        }
    });
    assert!(p.spawn_count() <= 4);
}

#[test]
fn cache_returns_identical_outcomes_without_reexecuting() {
    let cached = CachedExecutor::in_memory(pool(10.0));
    let prog = toy("c", "fn f\nadd 5");
    let a = cached.execute(&prog, &[Value::int(1)]).unwrap();
    let b = cached.execute(&prog, &[Value::int(1)]).unwrap();
    assert_eq!(a, b);
    assert_eq!(cached.misses(), 1);
    cached.execute(&prog, &[Value::int(2)]).unwrap();
    assert_eq!(cached.misses(), 2);
    // a different source under the same id is a different program
    let changed = toy("c", "fn f\nadd 6");
    assert_eq!(cached.execute(&changed, &[Value::int(1)]).unwrap().value(), Some(&Value::int(7)));
    assert_eq!(cached.misses(), 3);
}

#[test]
fn persistent_cache_survives_reload() {
    let dir = common::tmp();
    let path = dir.path().join("exec.jsonl");
    let prog = toy("c", "fn f\nmul 3");
    let expected = {
        let cached = CachedExecutor::persistent(pool(10.0), &path).unwrap();
        let out = cached.execute(&prog, &[Value::int(3)]).unwrap();
        cached.execute(&toy("r", "fn f\nraise boom"), &[Value::int(0)]).unwrap();
        cached.flush().unwrap();
        out
    };
    let reloaded = CachedExecutor::persistent(pool(10.0), &path).unwrap();
    assert_eq!(reloaded.len(), 2);
    assert_eq!(reloaded.execute(&prog, &[Value::int(3)]).unwrap(), expected);
    assert_eq!(reloaded.misses(), 0);
    assert_eq!(reloaded.inner().spawn_count(), 0);
}
