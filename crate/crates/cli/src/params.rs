//! Parsing of parameter values and row lists given on the command line.

use anyhow::{bail, Context, Result};
use nodalquad_core::analysis::{BrinkmanRow, ScalarRow};
use nodalquad_core::assembly::{BrinkmanParams, FourthOrderParams};

/// Parses `1`, `0.25`, `1e-3` or a power of two written `2^-6`.
pub fn parse_value(text: &str) -> Result<f64> {
    let t = text.trim();
    let v = if let Some(exp) = t.strip_prefix("2^") {
        let e: i32 = exp.parse().with_context(|| format!("bad exponent in {t:?}"))?;
        2f64.powi(e)
    } else {
        t.parse::<f64>().with_context(|| format!("not a number: {t:?}"))?
    };
    if !v.is_finite() || v < 0.0 {
        bail!("parameter {t:?} must be finite and non-negative");
    }
    Ok(v)
}

/// `2^k` for exact powers of two with `|k| >= 2`, plain decimal otherwise.
pub fn format_value(v: f64) -> String {
    if v > 0.0 {
        let k = v.log2().round();
        if k.abs() >= 2.0 && 2f64.powi(k as i32) == v {
            return format!("2^{}", k as i32);
        }
    }
    format!("{v}")
}

pub fn split_list(text: &str) -> Vec<String> {
    text.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

/// One row of the fourth-order problem: `biharmonic`, `poisson`, or a
/// value of `eps` (`0` is the Poisson limit).
pub fn scalar_row(text: &str) -> Result<ScalarRow> {
    let lower = text.trim().to_ascii_lowercase();
    let (label, params) = match lower.as_str() {
        "biharmonic" => ("biharmonic".to_string(), FourthOrderParams::biharmonic()),
        "poisson" => ("Poisson".to_string(), FourthOrderParams::perturbation(0.0)),
        _ => {
            let eps = parse_value(&lower)?;
            let label = if eps == 0.0 { "Poisson".to_string() } else { format_value(eps) };
            (label, FourthOrderParams::perturbation(eps))
        }
    };
    Ok(ScalarRow { label, params })
}

pub fn default_scalar_rows() -> Vec<ScalarRow> {
    ["biharmonic", "1", "2^-6", "2^-12", "poisson"].iter().map(|t| scalar_row(t).unwrap()).collect()
}

fn brinkman_label(p: BrinkmanParams) -> String {
    match (p.nu, p.alpha) {
        (_, 0.0) => {
            if p.nu == 1.0 {
                "Stokes".into()
            } else {
                format!("Stokes nu={}", format_value(p.nu))
            }
        }
        (0.0, a) => {
            if a == 1.0 {
                "Darcy".into()
            } else {
                format!("Darcy alpha={}", format_value(a))
            }
        }
        (n, 1.0) => format_value(n.sqrt()),
        (n, a) => format!("nu={} alpha={}", format_value(n), format_value(a)),
    }
}

/// Pairs `nu` and `alpha` lists entrywise; a single-entry list is
/// broadcast against the other.
pub fn brinkman_rows(nu: &[String], alpha: &[String]) -> Result<Vec<BrinkmanRow>> {
    let nu: Vec<f64> = nu.iter().map(|t| parse_value(t)).collect::<Result<_>>()?;
    let alpha: Vec<f64> = alpha.iter().map(|t| parse_value(t)).collect::<Result<_>>()?;
    let len = match (nu.len(), alpha.len()) {
        (0, _) | (_, 0) => bail!("nu and alpha lists must not be empty"),
        (a, b) if a == b || b == 1 => a,
        (1, b) => b,
        (a, b) => bail!("nu has {a} entries but alpha has {b}"),
    };
    (0..len)
        .map(|i| {
            let params = BrinkmanParams { nu: nu[i.min(nu.len() - 1)], alpha: alpha[i.min(alpha.len() - 1)] };
            params.validate().map_err(|e| anyhow::anyhow!("row {}: {e}", i + 1))?;
            Ok(BrinkmanRow { label: brinkman_label(params), params })
        })
        .collect()
}

/// Stokes, `nu^(1/2) = 1, 2^-6, 2^-12` with `alpha = 1`, and Darcy.
pub fn default_brinkman_rows() -> Vec<BrinkmanRow> {
    let nu = ["1", "1", "2^-12", "2^-24", "0"].map(String::from);
    let alpha = ["0", "1", "1", "1", "1"].map(String::from);
    brinkman_rows(&nu, &alpha).unwrap()
}

pub fn parse_ns(text: &str) -> Result<Vec<usize>> {
    let ns: Vec<usize> = split_list(text)
        .iter()
        .map(|t| t.parse::<usize>().with_context(|| format!("bad mesh size {t:?}")))
        .collect::<Result<_>>()?;
    if ns.is_empty() {
        bail!("empty mesh size list");
    }
    if let Some(n) = ns.iter().find(|&&n| n < 2) {
        bail!("mesh size {n} is below 2");
    }
    Ok(ns)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values() {
        assert_eq!(parse_value("2^-6").unwrap(), 1.0 / 64.0);
        assert_eq!(parse_value("0.5").unwrap(), 0.5);
        assert!(parse_value("-1").is_err());
        assert!(parse_value("2^x").is_err());
        assert_eq!(format_value(2f64.powi(-12)), "2^-12");
        assert_eq!(format_value(1.0), "1");
        assert_eq!(format_value(0.3), "0.3");
    }

    #[test]
    fn scalar_rows() {
        let r = scalar_row("0").unwrap();
        assert_eq!((r.label.as_str(), r.params.hess, r.params.grad), ("Poisson", 0.0, 1.0));
        let r = scalar_row("2^-6").unwrap();
        assert_eq!(r.params.hess, 2f64.powi(-12));
        assert_eq!(scalar_row("biharmonic").unwrap().params.grad, 0.0);
    }

    #[test]
    fn brinkman_defaults() {
        let labels: Vec<String> = default_brinkman_rows().into_iter().map(|r| r.label).collect();
        assert_eq!(labels, ["Stokes", "1", "2^-6", "2^-12", "Darcy"]);
        let one = vec!["1".to_string()];
        assert_eq!(brinkman_rows(&one, &["0".into(), "1".into()]).unwrap().len(), 2);
        assert!(brinkman_rows(&["0".into()], &["0".into()]).is_err());
        assert!(brinkman_rows(&["1".into(), "2".into()], &["0".into(), "1".into(), "1".into()]).is_err());
    }

    #[test]
    fn sizes() {
        assert_eq!(parse_ns("4, 8,16").unwrap(), vec![4, 8, 16]);
        assert!(parse_ns("1,2").is_err());
        assert!(parse_ns("").is_err());
    }
}
