//! A tiny line-oriented language for synthetic candidates.
//!
//! Real candidates are executed by an external shim for their language. The
//! toy language exists so that the full pipeline (store, fuzz, subprocess
//! execution, estimation) can run offline with programs whose behaviour is
//! known exactly. The `toy-shim` binary serves it over the runner protocol.
//!
//! A program names its entry point on the first line and then transforms an
//! accumulator that starts as the first argument:
//!
//! ```text
//! fn clamp_double
//! if_lt 0 const {"t":"int","v":"0"}
//! mul 2
//! ```
//!
//! Statements: `arg K`, `const <canonical value>`, `add K`, `mul K`,
//! `mod K`, `neg`, `abs`, `len`, `sum`, `sort`, `reverse`, `max`, `min`,
//! `first`, `upper`, `lower`, `if_lt K <stmt>`, `if_even <stmt>`,
//! `hang`, `raise <msg>`, `print <text>`, `opaque`, `exit <code>`.

use std::collections::HashMap;
use std::io::{self, BufRead, Write};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};

use crate::runner::{Outcome, ShimRequest, ShimResponse, Status};
use crate::value::{decode, Value};

pub const LANGUAGE: &str = "toy";

#[derive(Clone, Debug, PartialEq)]
enum Stmt {
    Arg(usize),
    Const(Value),
    Add(i64),
    Mul(i64),
    Mod(i64),
    Neg,
    Abs,
    Len,
    Sum,
    Sort,
    Reverse,
    Max,
    Min,
    First,
    Upper,
    Lower,
    IfLt(i64, Box<Stmt>),
    IfEven(Box<Stmt>),
    Hang,
    Raise(String),
    Print(String),
    Opaque,
    Exit(i32),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ToyProgram {
    pub name: String,
    body: Vec<Stmt>,
}

/// What running a statement can do besides producing a value.
#[derive(Debug, PartialEq)]
pub enum Effect {
    Value(Value),
    /// A value the protocol cannot carry.
    Opaque,
    Raise(String),
    Exit(i32),
}

pub fn compile(source: &str) -> Result<ToyProgram, String> {
    let mut lines = source
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines.next().ok_or("empty program")?;
    let name = header
        .strip_prefix("fn ")
        .map(str::trim)
        .filter(|n| crate::runner::is_identifier(n))
        .ok_or_else(|| format!("expected `fn <name>`, found {header:?}"))?;
    let body = lines.map(parse_stmt).collect::<Result<_, _>>()?;
    Ok(ToyProgram {
        name: name.to_owned(),
        body,
    })
}

fn parse_stmt(line: &str) -> Result<Stmt, String> {
    let (op, rest) = line.split_once(' ').map_or((line, ""), |(a, b)| (a, b.trim()));
    let int = |s: &str| s.parse::<i64>().map_err(|_| format!("bad integer {s:?} in {line:?}"));
    Ok(match op {
        "arg" => Stmt::Arg(rest.parse().map_err(|_| format!("bad index in {line:?}"))?),
        "const" => Stmt::Const(decode(rest).map_err(|e| e.to_string())?),
        "add" => Stmt::Add(int(rest)?),
        "mul" => Stmt::Mul(int(rest)?),
        "mod" => Stmt::Mod(int(rest)?),
        "neg" => Stmt::Neg,
        "abs" => Stmt::Abs,
        "len" => Stmt::Len,
        "sum" => Stmt::Sum,
        "sort" => Stmt::Sort,
        "reverse" => Stmt::Reverse,
        "max" => Stmt::Max,
        "min" => Stmt::Min,
        "first" => Stmt::First,
        "upper" => Stmt::Upper,
        "lower" => Stmt::Lower,
        "if_lt" => {
            let (k, inner) = rest.split_once(' ').ok_or_else(|| format!("if_lt needs a statement: {line:?}"))?;
            Stmt::IfLt(int(k)?, Box::new(parse_stmt(inner.trim())?))
        }
        "if_even" => Stmt::IfEven(Box::new(parse_stmt(rest)?)),
        "hang" => Stmt::Hang,
        "raise" => Stmt::Raise(rest.to_owned()),
        "print" => Stmt::Print(rest.to_owned()),
        "opaque" => Stmt::Opaque,
        "exit" => Stmt::Exit(rest.parse().unwrap_or(1)),
        _ => return Err(format!("unknown statement {op:?}")),
    })
}

fn type_error(what: &str, v: &Value) -> String {
    format!("TypeError: {what} not supported for {}", v.tag())
}

impl ToyProgram {
    /// Runs the program. `log` receives anything the program prints.
    pub fn run(&self, args: &[Value], log: &mut dyn Write) -> Effect {
        let mut acc = args.first().cloned().unwrap_or(Value::None);
        for stmt in &self.body {
            match exec(stmt, acc, args, log) {
                Ok(v) => acc = v,
                Err(effect) => return effect,
            }
        }
        Effect::Value(acc)
    }
}

fn exec(stmt: &Stmt, acc: Value, args: &[Value], log: &mut dyn Write) -> Result<Value, Effect> {
    let raise = |m: String| Effect::Raise(m);
    let numeric = |acc: &Value, f: &dyn Fn(&BigInt) -> BigInt, g: &dyn Fn(f64) -> f64| match acc {
        Value::Int(i) => Ok(Value::Int(f(i))),
        Value::Float(x) => Ok(Value::Float(g(*x))),
        other => Err(raise(type_error("arithmetic", other))),
    };
    match stmt {
        Stmt::Arg(k) => args
            .get(*k)
            .cloned()
            .ok_or_else(|| raise(format!("IndexError: argument {k} out of range"))),
        Stmt::Const(v) => Ok(v.clone()),
        Stmt::Add(k) => numeric(&acc, &|i| i + k, &|x| x + *k as f64),
        Stmt::Mul(k) => numeric(&acc, &|i| i * k, &|x| x * *k as f64),
        Stmt::Mod(k) => {
            if *k == 0 {
                return Err(raise("ZeroDivisionError: modulo by zero".into()));
            }
            numeric(&acc, &|i| i.mod_floor(&BigInt::from(*k)), &|x| x.rem_euclid(*k as f64))
        }
        Stmt::Neg => numeric(&acc, &|i| -i, &|x| -x),
        Stmt::Abs => numeric(&acc, &|i| i.abs(), &f64::abs),
        Stmt::Len => Ok(Value::int(acc.size() as u64)),
        Stmt::Sum => {
            let items = seq(&acc)?;
            let mut total = BigInt::zero();
            for v in items {
                match v {
                    Value::Int(i) => total += i,
                    other => return Err(raise(type_error("sum", other))),
                }
            }
            Ok(Value::Int(total))
        }
        Stmt::Sort => {
            let mut items = seq(&acc)?.to_vec();
            let key = |v: &Value| v.as_f64().ok_or_else(|| raise(type_error("ordering", v)));
            let mut keyed = items.drain(..).map(|v| key(&v).map(|k| (k, v))).collect::<Result<Vec<_>, _>>()?;
            keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
            Ok(rebuild(&acc, keyed.into_iter().map(|(_, v)| v).collect()))
        }
        Stmt::Reverse => match acc {
            Value::Text(s) => Ok(Value::Text(s.chars().rev().collect())),
            ref other => {
                let mut items = seq(other)?.to_vec();
                items.reverse();
                Ok(rebuild(other, items))
            }
        },
        Stmt::Max | Stmt::Min => {
            let items = seq(&acc)?;
            let mut best: Option<(f64, &Value)> = None;
            for v in items {
                let k = v.as_f64().ok_or_else(|| raise(type_error("ordering", v)))?;
                let better = match best {
                    None => true,
                    Some((b, _)) if *stmt == Stmt::Max => k > b,
                    Some((b, _)) => k < b,
                };
                if better {
                    best = Some((k, v));
                }
            }
            best.map(|(_, v)| v.clone())
                .ok_or_else(|| raise("ValueError: empty sequence".into()))
        }
        Stmt::First => seq(&acc)?
            .first()
            .cloned()
            .ok_or_else(|| raise("IndexError: empty sequence".into())),
        Stmt::Upper | Stmt::Lower => match acc {
            Value::Text(s) => Ok(Value::Text(if *stmt == Stmt::Upper {
                s.to_uppercase()
            } else {
                s.to_lowercase()
            })),
            other => Err(raise(type_error("case mapping", &other))),
        },
        Stmt::IfLt(k, inner) => match acc.as_f64() {
            Some(x) if x < *k as f64 => exec(inner, acc, args, log),
            Some(_) => Ok(acc),
            None => Err(raise(type_error("comparison", &acc))),
        },
        Stmt::IfEven(inner) => match &acc {
            Value::Int(i) if i.is_even() => exec(inner, acc, args, log),
            Value::Int(_) => Ok(acc),
            other => Err(raise(type_error("parity", other))),
        },
        Stmt::Hang => loop {
            std::thread::park();
        },
        Stmt::Raise(m) => Err(raise(format!("RuntimeError: {m}"))),
        Stmt::Print(t) => {
            let _ = writeln!(log, "{t}");
            Ok(acc)
        }
        Stmt::Opaque => Err(Effect::Opaque),
        Stmt::Exit(code) => Err(Effect::Exit(*code)),
    }
}

fn seq(v: &Value) -> Result<&[Value], Effect> {
    match v {
        Value::List(items) | Value::Tuple(items) => Ok(items),
        other => Err(Effect::Raise(type_error("sequence operation", other))),
    }
}

fn rebuild(like: &Value, items: Vec<Value>) -> Value {
    match like {
        Value::Tuple(_) => Value::Tuple(items),
        _ => Value::List(items),
    }
}

/// Serves the runner protocol until `input` closes. Program output goes to
/// `log`, never to `output`.
pub fn serve<R: BufRead, W: Write, L: Write>(input: R, mut output: W, mut log: L) -> io::Result<()> {
    let mut compiled: HashMap<String, Result<ToyProgram, String>> = HashMap::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = match serde_json::from_str::<ShimRequest>(&line) {
            Err(e) => ShimResponse {
                id: String::new(),
                status: "decode_error".into(),
                value: None,
                diagnostic: format!("malformed request: {e}"),
            },
            Ok(req) => {
                let program = compiled
                    .entry(req.source.clone())
                    .or_insert_with(|| compile(&req.source));
                let outcome = match program {
                    Err(e) => Outcome::exception(format!("SyntaxError: {e}")),
                    Ok(p) if p.name != req.entry_point => {
                        Outcome::exception(format!("NameError: {} is not defined", req.entry_point))
                    }
                    Ok(p) => match p.run(&req.args, &mut log) {
                        Effect::Value(v) => Outcome::ok(v),
                        Effect::Raise(m) => Outcome::exception(m),
                        Effect::Opaque => Outcome::abnormal(Status::DecodeError, "return value is not encodable"),
                        Effect::Exit(code) => {
                            log.flush()?;
                            std::process::exit(code);
                        }
                    },
                };
                ShimResponse::from_outcome(req.id, &outcome)
            }
        };
        writeln!(output, "{}", serde_json::to_string(&response).expect("response serializes"))?;
        output.flush()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(src: &str, args: &[Value]) -> Effect {
        compile(src).unwrap().run(args, &mut io::sink())
    }

    #[test]
    fn arithmetic_and_conditionals() {
        assert_eq!(run("fn f\nadd 1", &[Value::int(41)]), Effect::Value(Value::int(42)));
        assert_eq!(run("fn f\nif_lt 0 neg", &[Value::int(-3)]), Effect::Value(Value::int(3)));
        assert_eq!(run("fn f\nif_lt 0 neg", &[Value::int(3)]), Effect::Value(Value::int(3)));
        assert_eq!(run("fn f\nmod 3", &[Value::int(-1)]), Effect::Value(Value::int(2)));
        assert!(matches!(run("fn f\nmod 0", &[Value::int(1)]), Effect::Raise(_)));
        assert_eq!(run("fn f\narg 1", &[Value::int(1), Value::text("b")]), Effect::Value(Value::text("b")));
    }

    #[test]
    fn sequences() {
        let xs = Value::List(vec![Value::int(3), Value::int(1), Value::int(2)]);
        assert_eq!(
            run("fn f\nsort", std::slice::from_ref(&xs)),
            Effect::Value(Value::List(vec![Value::int(1), Value::int(2), Value::int(3)]))
        );
        assert_eq!(run("fn f\nsum", std::slice::from_ref(&xs)), Effect::Value(Value::int(6)));
        assert_eq!(run("fn f\nmax", std::slice::from_ref(&xs)), Effect::Value(Value::int(3)));
        assert!(matches!(run("fn f\nmin", &[Value::List(vec![])]), Effect::Raise(_)));
        assert_eq!(run("fn f\nlen", &[xs]), Effect::Value(Value::int(3)));
    }

    #[test]
    fn compile_errors() {
        assert!(compile("").is_err());
        assert!(compile("add 1").is_err());
        assert!(compile("fn f\nfrobnicate").is_err());
    }

    #[test]
    fn serve_keeps_stdout_clean() {
        let req = ShimRequest {
            id: "r1".into(),
            source: "fn f\nprint hello\nadd 1".into(),
            entry_point: "f".into(),
            args: vec![Value::int(1)],
            timeout_ms: 1000,
        };
        let input = format!("{}\nnot json\n", serde_json::to_string(&req).unwrap());
        let mut out = Vec::new();
        let mut log = Vec::new();
        serve(input.as_bytes(), &mut out, &mut log).unwrap();
        let out = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines.len(), 2);
        let r: ShimResponse = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(r.id, "r1");
        assert_eq!(r.status, "ok");
        let r: ShimResponse = serde_json::from_str(lines[1]).unwrap();
        assert_eq!(r.status, "decode_error");
        assert_eq!(String::from_utf8(log).unwrap(), "hello\n");
    }
}
