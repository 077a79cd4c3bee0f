//! Parsing of `--lambda` and `--jitter` arguments.
//!
//! Inline grammar:
//! - `arith:N=3,jitter=random,count=4096` (jitter: `random`, `random-int`,
//!   `zero`, `const:x`; every key optional)
//! - `explicit:0,1.5,4`
//! - `dyadic` or `dyadic:count=40`
//! - `naturals` or `naturals:count=100`
//!
//! Anything else is read as a path to a JSON file holding either an array of
//! exponents or a serialized exponent set.

use std::fs;

use carleson::ExponentSet;
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub enum JitterRule {
    Random,
    RandomInteger,
    Zero,
    Const(f64),
    Explicit(Vec<f64>),
}

impl JitterRule {
    pub fn parse(text: &str) -> Result<Self, String> {
        match text {
            "random" => Ok(JitterRule::Random),
            "random-int" => Ok(JitterRule::RandomInteger),
            "zero" => Ok(JitterRule::Zero),
            _ => {
                if let Some(v) = text.strip_prefix("const:") {
                    let x = v
                        .parse()
                        .map_err(|_| format!("bad jitter constant `{v}`"))?;
                    return Ok(JitterRule::Const(x));
                }
                let body = fs::read_to_string(text).map_err(|e| {
                    format!("jitter `{text}` is neither a rule nor a readable file: {e}")
                })?;
                let values: Vec<f64> = serde_json::from_str(&body)
                    .map_err(|e| format!("{text}: invalid jitter JSON: {e}"))?;
                Ok(JitterRule::Explicit(values))
            }
        }
    }

    pub fn build<R: Rng + ?Sized>(
        &self,
        n_step: u32,
        count: usize,
        rng: &mut R,
    ) -> Result<ExponentSet, String> {
        let set = match self {
            JitterRule::Random => ExponentSet::jittered_random(n_step, count, rng),
            JitterRule::RandomInteger => ExponentSet::jittered_random_integer(n_step, count, rng),
            JitterRule::Zero => ExponentSet::arithmetic(n_step, count),
            JitterRule::Const(x) => ExponentSet::jittered(n_step, vec![*x; count]),
            JitterRule::Explicit(v) => {
                if v.len() < count {
                    return Err(format!(
                        "jitter file has {} values, {count} needed",
                        v.len()
                    ));
                }
                ExponentSet::jittered(n_step, v[..count].to_vec())
            }
        };
        set.map_err(|e| e.to_string())
    }
}

/// Defaults used when the inline spec leaves a key out.
#[derive(Debug, Clone, Copy)]
pub struct LambdaDefaults {
    pub n_step: u32,
    pub count: usize,
}

fn keyed(body: &str) -> Result<Vec<(&str, &str)>, String> {
    if body.is_empty() {
        return Ok(Vec::new());
    }
    body.split(',')
        .map(|kv| {
            kv.split_once('=')
                .ok_or_else(|| format!("expected key=value, got `{kv}`"))
        })
        .collect()
}

fn parse_count(v: &str) -> Result<usize, String> {
    v.parse().map_err(|_| format!("bad count `{v}`"))
}

pub fn parse_lambda<R: Rng + ?Sized>(
    text: &str,
    defaults: LambdaDefaults,
    rng: &mut R,
) -> Result<ExponentSet, String> {
    let (head, body) = text.split_once(':').unwrap_or((text, ""));
    match head {
        "arith" => {
            let mut n_step = defaults.n_step;
            let mut count = defaults.count;
            let mut rule = JitterRule::Zero;
            for (k, v) in keyed(body)? {
                match k {
                    "N" => n_step = v.parse().map_err(|_| format!("bad N `{v}`"))?,
                    "count" => count = parse_count(v)?,
                    "jitter" => rule = JitterRule::parse(v)?,
                    _ => return Err(format!("unknown key `{k}` in arith spec")),
                }
            }
            rule.build(n_step, count, rng)
        }
        "explicit" => {
            let values = body
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| format!("bad exponent `{v}`"))
                })
                .collect::<Result<Vec<_>, _>>()?;
            ExponentSet::explicit(values).map_err(|e| e.to_string())
        }
        "dyadic" | "naturals" => {
            let mut count = if head == "dyadic" { 64 } else { defaults.count };
            for (k, v) in keyed(body)? {
                match k {
                    "count" => count = parse_count(v)?,
                    _ => return Err(format!("unknown key `{k}` in {head} spec")),
                }
            }
            let set = if head == "dyadic" {
                ExponentSet::dyadic(count)
            } else {
                ExponentSet::naturals(count)
            };
            set.map_err(|e| e.to_string())
        }
        _ => {
            let body = fs::read_to_string(text).map_err(|e| {
                format!("lambda `{text}` is neither an inline spec nor a readable file: {e}")
            })?;
            if let Ok(values) = serde_json::from_str::<Vec<f64>>(&body) {
                return ExponentSet::explicit(values).map_err(|e| e.to_string());
            }
            serde_json::from_str::<ExponentSet>(&body)
                .map_err(|e| format!("{text}: invalid exponent JSON: {e}"))
        }
    }
}
