//! The universal runtime value domain.
//!
//! Inputs, fuzzer outputs and program results all live in [`Value`]. Values
//! have a canonical text form (tagged JSON, single line) which is what
//! crosses the process boundary to runner shims and what the outcome cache
//! keys on.
//!
//! ```text
//! {"t":"int","v":"5"}
//! {"t":"float","v":"nan"}
//! {"t":"tuple","v":[{"t":"int","v":"1"},{"t":"str","v":"a"}]}
//! {"t":"dict","v":[[{"t":"str","v":"k"},{"t":"none"}]]}
//! ```

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value as Json;
use thiserror::Error;

/// Default cap on the number of decimal digits an integer may carry.
pub const DEFAULT_MAX_INT_DIGITS: usize = 4096;

/// An argument list: one value per parameter of the task signature.
pub type InputTuple = Vec<Value>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TypeTag {
    None,
    Bool,
    Int,
    Float,
    Str,
    List,
    Tuple,
    Set,
    Dict,
}

impl TypeTag {
    pub const ALL: [TypeTag; 9] = [
        TypeTag::None,
        TypeTag::Bool,
        TypeTag::Int,
        TypeTag::Float,
        TypeTag::Str,
        TypeTag::List,
        TypeTag::Tuple,
        TypeTag::Set,
        TypeTag::Dict,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TypeTag::None => "none",
            TypeTag::Bool => "bool",
            TypeTag::Int => "int",
            TypeTag::Float => "float",
            TypeTag::Str => "str",
            TypeTag::List => "list",
            TypeTag::Tuple => "tuple",
            TypeTag::Set => "set",
            TypeTag::Dict => "dict",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        TypeTag::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

impl fmt::Display for TypeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ValueError {
    #[error("{0} values are not hashable and cannot be set elements or map keys")]
    Unhashable(TypeTag),
    #[error("duplicate map key {0}")]
    DuplicateKey(String),
}

/// A runtime value.
///
/// Sets and maps are kept in canonical order (by encoded text) with unique
/// members, so structural equality is a plain element-wise comparison.
#[derive(Clone, Debug)]
pub enum Value {
    None,
    Bool(bool),
    Int(BigInt),
    Float(f64),
    Text(String),
    List(Vec<Value>),
    Tuple(Vec<Value>),
    Set(ValueSet),
    Map(ValueMap),
}

/// Unordered collection of hashable values, stored in canonical order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValueSet {
    items: Vec<Value>,
}

/// Map from hashable keys to values, stored sorted by encoded key.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValueMap {
    entries: Vec<(Value, Value)>,
}

impl ValueSet {
    /// Builds a set, merging duplicates.
    pub fn new<I: IntoIterator<Item = Value>>(items: I) -> Result<Self, ValueError> {
        let mut keyed = Vec::new();
        for item in items {
            if !item.is_hashable() {
                return Err(ValueError::Unhashable(item.tag()));
            }
            keyed.push((item.encode(), item));
        }
        keyed.sort_by(|a, b| a.0.cmp(&b.0));
        keyed.dedup_by(|a, b| a.0 == b.0);
        Ok(ValueSet {
            items: keyed.into_iter().map(|(_, v)| v).collect(),
        })
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Value> {
        self.items.iter()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn into_vec(self) -> Vec<Value> {
        self.items
    }
}

impl ValueMap {
    /// Builds a map; duplicate keys are rejected.
    pub fn new<I: IntoIterator<Item = (Value, Value)>>(entries: I) -> Result<Self, ValueError> {
        let mut keyed = Vec::new();
        for (k, v) in entries {
            if !k.is_hashable() {
                return Err(ValueError::Unhashable(k.tag()));
            }
            keyed.push((k.encode(), k, v));
        }
        keyed.sort_by(|a, b| a.0.cmp(&b.0));
        if let Some(w) = keyed.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(ValueError::DuplicateKey(w[0].0.clone()));
        }
        Ok(ValueMap {
            entries: keyed.into_iter().map(|(_, k, v)| (k, v)).collect(),
        })
    }

    /// Builds a map where later entries replace earlier ones with the same key.
    pub fn from_entries_last_wins<I: IntoIterator<Item = (Value, Value)>>(
        entries: I,
    ) -> Result<Self, ValueError> {
        let mut keyed: Vec<(String, Value, Value)> = Vec::new();
        for (k, v) in entries {
            if !k.is_hashable() {
                return Err(ValueError::Unhashable(k.tag()));
            }
            let enc = k.encode();
            match keyed.iter_mut().find(|e| e.0 == enc) {
                Some(slot) => slot.2 = v,
                None => keyed.push((enc, k, v)),
            }
        }
        keyed.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(ValueMap {
            entries: keyed.into_iter().map(|(_, k, v)| (k, v)).collect(),
        })
    }

    pub fn iter(&self) -> std::slice::Iter<'_, (Value, Value)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &Value) -> Option<&Value> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn into_vec(self) -> Vec<(Value, Value)> {
        self.entries
    }
}

impl Value {
    pub fn int<T: Into<BigInt>>(i: T) -> Value {
        Value::Int(i.into())
    }

    pub fn text<S: Into<String>>(s: S) -> Value {
        Value::Text(s.into())
    }

    pub fn set<I: IntoIterator<Item = Value>>(items: I) -> Result<Value, ValueError> {
        ValueSet::new(items).map(Value::Set)
    }

    pub fn map<I: IntoIterator<Item = (Value, Value)>>(entries: I) -> Result<Value, ValueError> {
        ValueMap::new(entries).map(Value::Map)
    }

    pub fn tag(&self) -> TypeTag {
        match self {
            Value::None => TypeTag::None,
            Value::Bool(_) => TypeTag::Bool,
            Value::Int(_) => TypeTag::Int,
            Value::Float(_) => TypeTag::Float,
            Value::Text(_) => TypeTag::Str,
            Value::List(_) => TypeTag::List,
            Value::Tuple(_) => TypeTag::Tuple,
            Value::Set(_) => TypeTag::Set,
            Value::Map(_) => TypeTag::Dict,
        }
    }

    pub fn is_hashable(&self) -> bool {
        match self {
            Value::None | Value::Bool(_) | Value::Int(_) | Value::Float(_) | Value::Text(_) => true,
            Value::Tuple(items) => items.iter().all(Value::is_hashable),
            Value::List(_) | Value::Set(_) | Value::Map(_) => false,
        }
    }

    /// Number of direct children for collections, characters for text.
    pub fn size(&self) -> usize {
        match self {
            Value::Text(s) => s.chars().count(),
            Value::List(v) | Value::Tuple(v) => v.len(),
            Value::Set(s) => s.len(),
            Value::Map(m) => m.len(),
            _ => 0,
        }
    }

    /// Canonical single-line encoding.
    pub fn encode(&self) -> String {
        let mut out = String::new();
        self.write_canonical(&mut out);
        out
    }

    fn write_canonical(&self, out: &mut String) {
        out.push_str("{\"t\":\"");
        out.push_str(self.tag().as_str());
        out.push('"');
        match self {
            Value::None => {}
            Value::Bool(b) => {
                out.push_str(",\"v\":");
                out.push_str(if *b { "true" } else { "false" });
            }
            Value::Int(i) => {
                out.push_str(",\"v\":\"");
                out.push_str(&i.to_string());
                out.push('"');
            }
            Value::Float(x) => {
                out.push_str(",\"v\":\"");
                out.push_str(&encode_float(*x));
                out.push('"');
            }
            Value::Text(s) => {
                out.push_str(",\"v\":");
                out.push_str(&serde_json::to_string(s).expect("string serialization"));
            }
            Value::List(items) | Value::Tuple(items) => {
                out.push_str(",\"v\":");
                write_array(out, items.iter());
            }
            Value::Set(set) => {
                out.push_str(",\"v\":");
                write_array(out, set.iter());
            }
            Value::Map(map) => {
                out.push_str(",\"v\":[");
                for (i, (k, v)) in map.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push('[');
                    k.write_canonical(out);
                    out.push(',');
                    v.write_canonical(out);
                    out.push(']');
                }
                out.push(']');
            }
        }
        out.push('}');
    }

    /// The canonical form as a JSON tree (for embedding in other documents).
    pub fn to_json(&self) -> Json {
        serde_json::from_str(&self.encode()).expect("canonical encoding is valid JSON")
    }

    pub fn from_json(json: &Json) -> Result<Value, DecodeError> {
        Decoder::new(DecodeLimits::default()).value(json, &mut String::from("$"))
    }
}

fn write_array<'a>(out: &mut String, items: impl Iterator<Item = &'a Value>) {
    out.push('[');
    for (i, item) in items.enumerate() {
        if i > 0 {
            out.push(',');
        }
        item.write_canonical(out);
    }
    out.push(']');
}

fn encode_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        // Debug formatting is the shortest representation that roundtrips.
        format!("{x:?}")
    }
}

/// Exact structural equality. Floats compare bitwise except that every NaN
/// equals every other NaN (the encoding does not carry payloads).
impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::None, Value::None) => true,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Float(a), Value::Float(b)) => {
                (a.is_nan() && b.is_nan()) || a.to_bits() == b.to_bits()
            }
            (Value::Text(a), Value::Text(b)) => a == b,
            (Value::List(a), Value::List(b)) | (Value::Tuple(a), Value::Tuple(b)) => a == b,
            (Value::Set(a), Value::Set(b)) => a == b,
            (Value::Map(a), Value::Map(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Value {}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.encode())
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let json = Json::deserialize(deserializer)?;
        Value::from_json(&json).map_err(serde::de::Error::custom)
    }
}

/// Encodes an argument list as a JSON array of canonical values.
pub fn encode_args(args: &[Value]) -> String {
    let mut out = String::new();
    write_array(&mut out, args.iter());
    out
}

pub fn decode_args(text: &str) -> Result<InputTuple, DecodeError> {
    let json: Json = parse_json(text)?;
    let items = json
        .as_array()
        .ok_or_else(|| DecodeError::structural("$", "argument list must be a JSON array"))?;
    let decoder = Decoder::new(DecodeLimits::default());
    items
        .iter()
        .enumerate()
        .map(|(i, item)| decoder.value(item, &mut format!("$[{i}]")))
        .collect()
}

// ---------------------------------------------------------------------------
// decoding

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("decode error at {path}{}: {reason}", column.map(|c| format!(" (column {c})")).unwrap_or_default())]
pub struct DecodeError {
    /// JSON path of the offending node, `$` for the root.
    pub path: String,
    /// 1-based column for syntax errors in the raw text.
    pub column: Option<usize>,
    pub reason: String,
}

impl DecodeError {
    fn structural(path: &str, reason: impl Into<String>) -> Self {
        DecodeError {
            path: path.to_owned(),
            column: None,
            reason: reason.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DecodeLimits {
    pub max_int_digits: usize,
}

impl Default for DecodeLimits {
    fn default() -> Self {
        DecodeLimits {
            max_int_digits: DEFAULT_MAX_INT_DIGITS,
        }
    }
}

fn parse_json(text: &str) -> Result<Json, DecodeError> {
    serde_json::from_str(text).map_err(|e| DecodeError {
        path: "$".into(),
        column: Some(e.column()),
        reason: e.to_string(),
    })
}

/// Decodes canonical text with the default limits.
pub fn decode(text: &str) -> Result<Value, DecodeError> {
    decode_with(text, DecodeLimits::default())
}

pub fn decode_with(text: &str, limits: DecodeLimits) -> Result<Value, DecodeError> {
    let json = parse_json(text)?;
    Decoder::new(limits).value(&json, &mut String::from("$"))
}

pub fn decode_json_with(json: &Json, limits: DecodeLimits) -> Result<Value, DecodeError> {
    Decoder::new(limits).value(json, &mut String::from("$"))
}

struct Decoder {
    limits: DecodeLimits,
}

impl Decoder {
    fn new(limits: DecodeLimits) -> Self {
        Decoder { limits }
    }

    fn value(&self, json: &Json, path: &mut String) -> Result<Value, DecodeError> {
        let obj = json
            .as_object()
            .ok_or_else(|| DecodeError::structural(path, "expected a tagged object"))?;
        let tag_text = obj
            .get("t")
            .and_then(Json::as_str)
            .ok_or_else(|| DecodeError::structural(path, "missing string field \"t\""))?;
        let tag = TypeTag::parse(tag_text)
            .ok_or_else(|| DecodeError::structural(path, format!("unknown tag {tag_text:?}")))?;
        if let Some(extra) = obj.keys().find(|k| *k != "t" && *k != "v") {
            return Err(DecodeError::structural(path, format!("unexpected field {extra:?}")));
        }
        let payload = obj.get("v");
        if tag == TypeTag::None {
            return match payload {
                None => Ok(Value::None),
                Some(_) => Err(DecodeError::structural(path, "none carries no \"v\"")),
            };
        }
        let v = payload.ok_or_else(|| DecodeError::structural(path, "missing field \"v\""))?;
        let len = path.len();
        path.push_str(".v");
        let out = self.payload(tag, v, path);
        path.truncate(len);
        out
    }

    fn payload(&self, tag: TypeTag, v: &Json, path: &mut String) -> Result<Value, DecodeError> {
        let err = |path: &str, reason: &str| DecodeError::structural(path, reason);
        match tag {
            TypeTag::None => unreachable!("handled by caller"),
            TypeTag::Bool => v.as_bool().map(Value::Bool).ok_or_else(|| err(path, "bool payload must be true/false")),
            TypeTag::Int => {
                let s = v.as_str().ok_or_else(|| err(path, "int payload must be a decimal string"))?;
                parse_int(s, self.limits.max_int_digits).map(Value::Int).map_err(|r| err(path, &r))
            }
            TypeTag::Float => {
                let s = v.as_str().ok_or_else(|| err(path, "float payload must be a string"))?;
                parse_float(s).map(Value::Float).ok_or_else(|| err(path, "malformed float literal"))
            }
            TypeTag::Str => v
                .as_str()
                .map(|s| Value::Text(s.to_owned()))
                .ok_or_else(|| err(path, "str payload must be a JSON string")),
            TypeTag::List | TypeTag::Tuple | TypeTag::Set => {
                let arr = v.as_array().ok_or_else(|| err(path, "collection payload must be an array"))?;
                let items = self.items(arr, path)?;
                match tag {
                    TypeTag::List => Ok(Value::List(items)),
                    TypeTag::Tuple => Ok(Value::Tuple(items)),
                    _ => {
                        let n = items.len();
                        let set = ValueSet::new(items).map_err(|e| err(path, &e.to_string()))?;
                        if set.len() != n {
                            return Err(err(path, "set contains duplicate elements"));
                        }
                        Ok(Value::Set(set))
                    }
                }
            }
            TypeTag::Dict => {
                let arr = v.as_array().ok_or_else(|| err(path, "dict payload must be an array of pairs"))?;
                let mut entries = Vec::with_capacity(arr.len());
                for (i, pair) in arr.iter().enumerate() {
                    let len = path.len();
                    path.push_str(&format!("[{i}]"));
                    let kv = pair
                        .as_array()
                        .filter(|p| p.len() == 2)
                        .ok_or_else(|| err(path, "dict entry must be a [key, value] pair"))?;
                    path.push_str("[0]");
                    let k = self.value(&kv[0], path)?;
                    path.truncate(path.len() - 3);
                    path.push_str("[1]");
                    let val = self.value(&kv[1], path)?;
                    path.truncate(len);
                    entries.push((k, val));
                }
                ValueMap::new(entries)
                    .map(Value::Map)
                    .map_err(|e| err(path, &e.to_string()))
            }
        }
    }

    fn items(&self, arr: &[Json], path: &mut String) -> Result<Vec<Value>, DecodeError> {
        let mut out = Vec::with_capacity(arr.len());
        for (i, item) in arr.iter().enumerate() {
            let len = path.len();
            path.push_str(&format!("[{i}]"));
            out.push(self.value(item, path)?);
            path.truncate(len);
        }
        Ok(out)
    }
}

fn parse_int(s: &str, max_digits: usize) -> Result<BigInt, String> {
    let digits = s.strip_prefix('-').unwrap_or(s);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(format!("malformed integer {s:?}"));
    }
    if (digits.len() > 1 && digits.starts_with('0')) || s == "-0" {
        return Err(format!("non-canonical integer {s:?}"));
    }
    if digits.len() > max_digits {
        return Err(format!("integer has {} digits, cap is {max_digits}", digits.len()));
    }
    s.parse().map_err(|_| format!("malformed integer {s:?}"))
}

fn parse_float(s: &str) -> Option<f64> {
    match s {
        "nan" => return Some(f64::NAN),
        "inf" => return Some(f64::INFINITY),
        "-inf" => return Some(f64::NEG_INFINITY),
        _ => {}
    }
    // -?digits(.digits)?([eE][+-]?digits)?
    let b = s.as_bytes();
    let mut i = 0;
    if b.first() == Some(&b'-') {
        i += 1;
    }
    let digits = |i: &mut usize| {
        let start = *i;
        while *i < b.len() && b[*i].is_ascii_digit() {
            *i += 1;
        }
        *i > start
    };
    if !digits(&mut i) {
        return None;
    }
    if i < b.len() && b[i] == b'.' {
        i += 1;
        if !digits(&mut i) {
            return None;
        }
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        i += 1;
        if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
            i += 1;
        }
        if !digits(&mut i) {
            return None;
        }
    }
    if i != b.len() {
        return None;
    }
    s.parse().ok()
}

// ---------------------------------------------------------------------------
// tolerant comparison

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid float policy: {0}")]
pub struct FloatPolicyError(String);

/// How floats are compared when deciding whether two outputs differ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloatPolicy {
    pub relative_tolerance: f64,
    pub absolute_tolerance: f64,
    pub nan_equals_nan: bool,
}

impl Default for FloatPolicy {
    fn default() -> Self {
        FloatPolicy {
            relative_tolerance: 1e-6,
            absolute_tolerance: 1e-9,
            nan_equals_nan: true,
        }
    }
}

impl FloatPolicy {
    pub fn new(
        relative_tolerance: f64,
        absolute_tolerance: f64,
        nan_equals_nan: bool,
    ) -> Result<Self, FloatPolicyError> {
        let p = FloatPolicy {
            relative_tolerance,
            absolute_tolerance,
            nan_equals_nan,
        };
        p.validate()?;
        Ok(p)
    }

    /// Zero tolerances, NaN equal to NaN.
    pub fn exact() -> Self {
        FloatPolicy {
            relative_tolerance: 0.0,
            absolute_tolerance: 0.0,
            nan_equals_nan: true,
        }
    }

    pub fn validate(&self) -> Result<(), FloatPolicyError> {
        for (name, t) in [
            ("relative_tolerance", self.relative_tolerance),
            ("absolute_tolerance", self.absolute_tolerance),
        ] {
            if !t.is_finite() || t < 0.0 {
                return Err(FloatPolicyError(format!("{name} must be finite and >= 0, got {t}")));
            }
        }
        Ok(())
    }

    pub fn floats_equal(&self, a: f64, b: f64) -> bool {
        if a.is_nan() || b.is_nan() {
            return a.is_nan() && b.is_nan() && self.nan_equals_nan;
        }
        if a.is_infinite() || b.is_infinite() {
            return a == b;
        }
        let diff = (a - b).abs();
        diff <= self.absolute_tolerance.max(self.relative_tolerance * a.abs().max(b.abs()))
    }
}

/// Decides whether two values count as the same output.
///
/// Different tags never compare equal. Sets and maps are compared as
/// multisets under the tolerant predicate (via bipartite matching, so the
/// result does not depend on element order).
pub fn values_equal(a: &Value, b: &Value, policy: &FloatPolicy) -> bool {
    match (a, b) {
        (Value::None, Value::None) => true,
        (Value::Bool(x), Value::Bool(y)) => x == y,
        (Value::Int(x), Value::Int(y)) => x == y,
        (Value::Float(x), Value::Float(y)) => policy.floats_equal(*x, *y),
        (Value::Text(x), Value::Text(y)) => x == y,
        (Value::List(x), Value::List(y)) | (Value::Tuple(x), Value::Tuple(y)) => {
            x.len() == y.len() && x.iter().zip(y).all(|(p, q)| values_equal(p, q, policy))
        }
        (Value::Set(x), Value::Set(y)) => {
            x.len() == y.len()
                && unordered_match(x.len(), |i, j| values_equal(&x.items[i], &y.items[j], policy))
        }
        (Value::Map(x), Value::Map(y)) => {
            x.len() == y.len()
                && unordered_match(x.len(), |i, j| {
                    let (ka, va) = &x.entries[i];
                    let (kb, vb) = &y.entries[j];
                    values_equal(ka, kb, policy) && values_equal(va, vb, policy)
                })
        }
        _ => false,
    }
}

/// Whether a perfect matching exists in the `n x n` bipartite graph given by
/// `edge`. Tries the diagonal first, which is the common case for canonically
/// ordered collections.
fn unordered_match(n: usize, edge: impl Fn(usize, usize) -> bool) -> bool {
    if (0..n).all(|i| edge(i, i)) {
        return true;
    }
    let adj: Vec<Vec<usize>> = (0..n).map(|i| (0..n).filter(|&j| edge(i, j)).collect()).collect();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    fn augment(i: usize, adj: &[Vec<usize>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for &j in &adj[i] {
            if seen[j] {
                continue;
            }
            seen[j] = true;
            if owner[j].is_none_or(|k| augment(k, adj, seen, owner)) {
                owner[j] = Some(i);
                return true;
            }
        }
        false
    }
    (0..n).all(|i| {
        let mut seen = vec![false; n];
        augment(i, &adj, &mut seen, &mut owner)
    })
}

// ---------------------------------------------------------------------------
// ordering helpers used by the fuzzer and metrics

impl Value {
    /// Numeric view for ints and floats.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => i.to_f64(),
            Value::Float(x) => Some(*x),
            Value::Bool(b) => Some(if *b { 1.0 } else { 0.0 }),
            _ => None,
        }
    }

    /// Number of decimal digits of an integer value.
    pub fn int_digits(&self) -> Option<usize> {
        match self {
            Value::Int(i) => Some(i.abs().to_string().len()),
            _ => None,
        }
    }
}

/// Total order on canonical encodings; used wherever a deterministic order
/// over values is needed.
pub fn canonical_cmp(a: &Value, b: &Value) -> Ordering {
    a.encode().cmp(&b.encode())
}
