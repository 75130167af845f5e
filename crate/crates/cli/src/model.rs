//! Parsing `--model` arguments into chain models.
//!
//! `--model` accepts JSON (`{"family":"jacobi","alpha":1,"beta":0}`), `@path` to a
//! JSON file, or a shorthand:
//!
//! - `jacobi:alpha,beta[,h0=v]`
//! - `constant:a0` for `a = c = 1/4`, `constant:a0,a,c` with `b = 1 - a - c`, or
//!   `constant:a0,a,b,c`, each optionally followed by `,k=v`

use bdchain::models::{ConstantChainParams, JacobiParams, ModelSpec};
use bdchain::scalar::decimal_rational;
use bdchain::urn::{Order, UrnFamily, UrnStepSpec};

use crate::{config, Failure};

pub fn parse_model(text: &str) -> Result<ModelSpec, Failure> {
    let text = text.trim();
    let spec = if let Some(path) = text.strip_prefix('@') {
        let body = std::fs::read_to_string(path).map_err(|e| config(format!("{path}: {e}")))?;
        serde_json::from_str(&body).map_err(|e| config(format!("{path}: {e}")))?
    } else if text.starts_with('{') {
        serde_json::from_str(text).map_err(|e| config(format!("model JSON: {e}")))?
    } else {
        shorthand(text)?
    };
    let checked = match &spec {
        ModelSpec::Constant(p) => p.validate(),
        ModelSpec::Jacobi(p) => p.validate(),
    };
    checked.map_err(config)?;
    Ok(spec)
}

fn shorthand(text: &str) -> Result<ModelSpec, Failure> {
    let (family, rest) = text.split_once(':').ok_or_else(|| config(format!("cannot parse model {text:?}")))?;
    let mut values = Vec::new();
    let mut named = Vec::new();
    for part in rest.split(',').map(str::trim) {
        match part.split_once('=') {
            Some((k, v)) => named.push((k.trim(), number(v)?)),
            None => values.push(number(part)?),
        }
    }
    match family {
        "jacobi" => {
            let [alpha, beta] = values[..] else { return Err(config("jacobi takes alpha,beta")) };
            let mut p = JacobiParams::new(alpha, beta);
            for (k, v) in named {
                match k {
                    "h0" => p = p.with_h0(v),
                    _ => return Err(config(format!("unknown jacobi option {k}"))),
                }
            }
            Ok(ModelSpec::Jacobi(p))
        }
        "constant" => {
            let mut p = match values[..] {
                [a0] => ConstantChainParams::quarter(a0),
                [a0, a, c] => ConstantChainParams::new(a0, a, 1.0 - a - c, c),
                [a0, a, b, c] => ConstantChainParams::new(a0, a, b, c),
                _ => return Err(config("constant takes a0, a0,a,c or a0,a,b,c")),
            };
            for (k, v) in named {
                match k {
                    "k" if v.fract() == 0.0 && v >= 0.0 => p = p.with_k(v as u32),
                    _ => return Err(config(format!("bad constant option {k}={v}"))),
                }
            }
            Ok(ModelSpec::Constant(p))
        }
        _ => Err(config(format!("unknown family {family:?}"))),
    }
}

fn number(s: &str) -> Result<f64, Failure> {
    s.trim().parse().map_err(|_| config(format!("not a number: {s:?}")))
}

/// The urn experiment realizing `spec`: the quarter constant family with `k` set,
/// or a Jacobi family with nonnegative integer parameters at `h0 = 1`.
pub fn urn_spec(spec: &ModelSpec, order: Order) -> Result<UrnStepSpec, Failure> {
    let family = match spec {
        ModelSpec::Constant(p) => {
            let k = p.k.ok_or_else(|| config("the constant urn needs k"))?;
            if p.a != 0.25 || p.c != 0.25 {
                return Err(config("the constant urn needs a = c = 1/4"));
            }
            let q = decimal_rational(p.a0);
            let (num, den) = (q.numer().to_u64(), q.denom().to_u64());
            let (Some(a0_num), Some(a0_den)) = (num, den) else { return Err(config("a0 has too many digits")) };
            UrnFamily::Constant { k: k as u64, a0_num, a0_den }
        }
        ModelSpec::Jacobi(p) => {
            if !p.is_integer() || p.alpha < 0.0 || p.beta < 0.0 {
                return Err(config("the Jacobi urn needs nonnegative integer alpha, beta"));
            }
            if p.h0.is_some_and(|h| h != 1.0) {
                return Err(config("the Jacobi urn realizes h0 = 1 only"));
            }
            UrnFamily::Jacobi { alpha: p.alpha as u64, beta: p.beta as u64 }
        }
    };
    UrnStepSpec::new(family, order).map_err(config)
}
